#include "caplab/controller.hpp"

#include <utility>

namespace caplab {

using protocol::Command;
using protocol::ErrCode;
using protocol::Response;
using protocol::Verb;

SimulatedController::SimulatedController(machine::MachineConfig config, VirtualClock* clock)
    : SimulatedController(config, machine::initial_state(config), clock) {}

SimulatedController::SimulatedController(machine::MachineConfig config,
                                         machine::MachineState state, VirtualClock* clock)
    : config_(std::move(config)), state_(std::move(state)), clock_(clock) {
  config_.validate();
  machine::validate_state(state_, config_);
}

void SimulatedController::advance_time(double dt) {
  elapsed_ += dt;
  if (clock_) clock_->advance(dt);
}

std::optional<Response> SimulatedController::submit(Command cmd) {
  if (!protocol::is_motion(cmd.verb)) {
    auto out = protocol::execute(cmd, state_, config_);
    state_ = std::move(out.state);
    return out.response;
  }
  if (busy()) return Response::error(ErrCode::Busy);
  try {
    switch (cmd.verb) {
      case Verb::Cap: state_ = machine::begin_cap(state_, config_); break;
      case Verb::Uncap: state_ = machine::begin_uncap(state_, config_); break;
      case Verb::Home: state_ = machine::begin_home(state_, config_); break;
      case Verb::Feed: state_ = machine::begin_feed(state_, config_); break;
      default: break;
    }
  } catch (const machine::MachineError& e) {
    return Response::error(protocol::to_err_code(e.code()));
  }
  // Already at the endpoint: the job finishes on its first tick.
  pending_ = true;
  return std::nullopt;
}

std::optional<Response> SimulatedController::tick(double dt) {
  state_ = busy() ? machine::advance(state_, config_, dt) : machine::step(state_, config_, dt);
  advance_time(dt);
  // An ESTOP clears the job at once; its caller still gets an answer.
  if (!pending_ || busy()) return std::nullopt;
  pending_ = false;
  if (state_.estop) return Response::error(ErrCode::Estop);
  return Response::ok();
}

Response SimulatedController::handle(Command cmd) {
  if (auto immediate = submit(cmd)) return *immediate;
  const double pass_time = 2.0 * config_.position_end / config_.speed();
  const long max_ticks = static_cast<long>(pass_time / config_.tick) + 16;
  for (long i = 0; i < max_ticks; ++i) {
    if (auto done = tick(config_.tick)) return *done;
  }
  // Held panel buttons can keep the holder from its endpoint.
  state_ = machine::press_estop(state_);
  pending_ = false;
  return Response::error(ErrCode::Estop);
}

std::string SimulatedController::handle_line(std::string_view line) {
  try {
    return protocol::encode_response(handle(protocol::parse_command(line)));
  } catch (const protocol::ProtocolError&) {
    return protocol::encode_response(Response::error(ErrCode::BadCmd));
  }
}

}  // namespace caplab
