#pragma once

// Line-based ASCII protocol between the orchestration PC and the machine
// controller. Every message is one line terminated by LF (0x0A), at most
// 64 bytes including the terminator.
//
//   PC -> controller:  CAP | UNCAP | HOME | FEED | STATUS | ESTOP | RESET
//   controller -> PC:  OK
//                      ERR <E_NOVIAL|E_FEEDER|E_ESTOP|E_BADCMD|E_NOTCAPPED|E_BUSY>
//                      STATE pos=<int> motor=<F|R|S> lock=<0|1> feed=<int> cap=<0|1>
//
// pos is the holder position in integer tenths of a millimetre.
//
// A real-firmware port driving only the two controller relays can implement
// the HOME/FEED/ESTOP/RESET/STATUS subset; CAP and UNCAP are passes built
// from FEED followed by HOME.

#include <array>
#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

#include "caplab/machine.hpp"

namespace caplab::protocol {

inline constexpr std::size_t kMaxLine = 64;

enum class Verb { Cap, Uncap, Home, Feed, Status, Estop, Reset };

inline constexpr std::array<Verb, 7> kAllVerbs = {Verb::Cap,    Verb::Uncap, Verb::Home,
                                                  Verb::Feed,   Verb::Status, Verb::Estop,
                                                  Verb::Reset};

struct Command {
  Verb verb = Verb::Status;
  bool operator==(const Command&) const = default;
};

bool is_motion(Verb verb);
std::string_view verb_name(Verb verb);

enum class ErrCode { NoVial, Feeder, Estop, BadCmd, NotCapped, Busy };

std::string_view err_name(ErrCode code);

struct StateFields {
  long position_tenths = 0;
  machine::Motor motor = machine::Motor::Stopped;
  bool lock = false;
  long feeder_count = 0;
  bool capped = false;

  double position_mm() const { return static_cast<double>(position_tenths) / 10.0; }
  bool operator==(const StateFields&) const = default;
};

struct Response {
  enum class Kind { Ok, Err, State };

  Kind kind = Kind::Ok;
  std::optional<ErrCode> err;
  std::optional<StateFields> state;

  static Response ok() { return {}; }
  static Response error(ErrCode code) { return {Kind::Err, code, std::nullopt}; }
  static Response snapshot(const StateFields& f) { return {Kind::State, std::nullopt, f}; }

  bool operator==(const Response&) const = default;
};

enum class ProtocolErrc { MalformedResponse, BadCommand };

class ProtocolError : public std::runtime_error {
 public:
  ProtocolError(ProtocolErrc code, const std::string& what)
      : std::runtime_error(what), code_(code) {}
  ProtocolErrc code() const noexcept { return code_; }

 private:
  ProtocolErrc code_;
};

std::string encode(Command cmd);

// Controller side. Throws ProtocolError(BadCommand).
Command parse_command(std::string_view line);

std::string encode_response(const Response& response);

// PC side. Total over arbitrary bytes: returns a Response or throws
// ProtocolError(MalformedResponse).
Response parse_response(std::string_view line);

StateFields snapshot(const machine::MachineState& state);

ErrCode to_err_code(machine::MachineErrc code);

struct Executed {
  machine::MachineState state;
  Response response;
};

// Binds a verb to the machine model and runs motion to completion.
// A motion verb while a job is in progress yields E_BUSY.
Executed execute(Command cmd, const machine::MachineState& state,
                 const machine::MachineConfig& config);

}  // namespace caplab::protocol
