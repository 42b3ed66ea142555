#pragma once

#include <optional>
#include <string>
#include <string_view>

#include "caplab/clock.hpp"
#include "caplab/machine.hpp"
#include "caplab/protocol.hpp"

namespace caplab {

// Firmware emulation around the machine model. Motion verbs either run to
// completion (handle / handle_line) or are started with submit() and driven
// by tick(), in which case a second motion verb before completion gets
// E_BUSY. STATUS, ESTOP and RESET are always answered immediately.
class SimulatedController {
 public:
  explicit SimulatedController(machine::MachineConfig config,
                               VirtualClock* clock = nullptr);
  SimulatedController(machine::MachineConfig config, machine::MachineState state,
                      VirtualClock* clock = nullptr);

  // Blocking execution.
  protocol::Response handle(protocol::Command cmd);
  // Blocking execution of one wire line; answers E_BADCMD to bad lines.
  std::string handle_line(std::string_view line);

  // Non-blocking: returns the immediate response, or nullopt when a motion
  // job was accepted and its response will come from tick().
  std::optional<protocol::Response> submit(protocol::Command cmd);
  // Advances the simulation by dt; returns the deferred response when the
  // running job finishes or is aborted.
  std::optional<protocol::Response> tick(double dt);

  bool busy() const { return state_.job != machine::Job::None; }
  const machine::MachineState& state() const { return state_; }
  const machine::MachineConfig& config() const { return config_; }
  double elapsed() const { return elapsed_; }

  // Physical access for the simulated robot and operator.
  machine::MachineState& mutable_state() { return state_; }

 private:
  void advance_time(double dt);

  machine::MachineConfig config_;
  machine::MachineState state_;
  VirtualClock* clock_;
  double elapsed_ = 0.0;
  bool pending_ = false;
};

}  // namespace caplab
