#include "caplab/protocol.hpp"

#include <charconv>
#include <cmath>

namespace caplab::protocol {

using machine::MachineErrc;
using machine::MachineError;
using machine::Motor;

bool is_motion(Verb verb) {
  return verb == Verb::Cap || verb == Verb::Uncap || verb == Verb::Home || verb == Verb::Feed;
}

std::string_view verb_name(Verb verb) {
  switch (verb) {
    case Verb::Cap: return "CAP";
    case Verb::Uncap: return "UNCAP";
    case Verb::Home: return "HOME";
    case Verb::Feed: return "FEED";
    case Verb::Status: return "STATUS";
    case Verb::Estop: return "ESTOP";
    case Verb::Reset: return "RESET";
  }
  return "";
}

std::string_view err_name(ErrCode code) {
  switch (code) {
    case ErrCode::NoVial: return "E_NOVIAL";
    case ErrCode::Feeder: return "E_FEEDER";
    case ErrCode::Estop: return "E_ESTOP";
    case ErrCode::BadCmd: return "E_BADCMD";
    case ErrCode::NotCapped: return "E_NOTCAPPED";
    case ErrCode::Busy: return "E_BUSY";
  }
  return "";
}

std::string encode(Command cmd) {
  std::string out(verb_name(cmd.verb));
  out.push_back('\n');
  return out;
}

Command parse_command(std::string_view line) {
  if (line.size() > kMaxLine || line.empty() || line.back() != '\n')
    throw ProtocolError(ProtocolErrc::BadCommand, "command must be one LF-terminated line");
  line.remove_suffix(1);
  for (Verb v : kAllVerbs)
    if (line == verb_name(v)) return Command{v};
  throw ProtocolError(ProtocolErrc::BadCommand, "unknown verb");
}

namespace {

char motor_letter(Motor m) {
  switch (m) {
    case Motor::Forward: return 'F';
    case Motor::Reverse: return 'R';
    case Motor::Stopped: return 'S';
  }
  return 'S';
}

[[noreturn]] void malformed(const char* why) {
  throw ProtocolError(ProtocolErrc::MalformedResponse, std::string("malformed response: ") + why);
}

// Consumes `prefix` from the front of `rest`.
bool eat(std::string_view& rest, std::string_view prefix) {
  if (rest.substr(0, prefix.size()) != prefix) return false;
  rest.remove_prefix(prefix.size());
  return true;
}

long eat_uint(std::string_view& rest) {
  std::size_t n = 0;
  while (n < rest.size() && rest[n] >= '0' && rest[n] <= '9') ++n;
  if (n == 0) malformed("expected digits");
  if (n > 9) malformed("number too long");
  long value = 0;
  std::from_chars(rest.data(), rest.data() + n, value);
  rest.remove_prefix(n);
  return value;
}

bool eat_flag(std::string_view& rest) {
  if (eat(rest, "0")) return false;
  if (eat(rest, "1")) return true;
  malformed("expected 0 or 1");
}

}  // namespace

std::string encode_response(const Response& r) {
  switch (r.kind) {
    case Response::Kind::Ok:
      return "OK\n";
    case Response::Kind::Err:
      return "ERR " + std::string(err_name(r.err.value_or(ErrCode::BadCmd))) + "\n";
    case Response::Kind::State: {
      const StateFields f = r.state.value_or(StateFields{});
      std::string out = "STATE pos=" + std::to_string(f.position_tenths);
      out += " motor=";
      out.push_back(motor_letter(f.motor));
      out += f.lock ? " lock=1" : " lock=0";
      out += " feed=" + std::to_string(f.feeder_count);
      out += f.capped ? " cap=1\n" : " cap=0\n";
      return out;
    }
  }
  return "OK\n";
}

Response parse_response(std::string_view line) {
  if (line.size() > kMaxLine) malformed("line longer than 64 bytes");
  if (line.empty() || line.back() != '\n') malformed("missing LF terminator");
  for (char c : line)
    if (static_cast<unsigned char>(c) > 0x7F) malformed("non-ASCII byte");

  std::string_view rest = line.substr(0, line.size() - 1);
  if (rest.find('\n') != std::string_view::npos) malformed("embedded LF");

  if (rest == "OK") return Response::ok();

  if (eat(rest, "ERR ")) {
    for (ErrCode c : {ErrCode::NoVial, ErrCode::Feeder, ErrCode::Estop, ErrCode::BadCmd,
                      ErrCode::NotCapped, ErrCode::Busy})
      if (rest == err_name(c)) return Response::error(c);
    malformed("unknown error code");
  }

  if (eat(rest, "STATE ")) {
    StateFields f;
    if (!eat(rest, "pos=")) malformed("expected pos=");
    f.position_tenths = eat_uint(rest);
    if (!eat(rest, " motor=")) malformed("expected motor=");
    if (eat(rest, "F")) f.motor = Motor::Forward;
    else if (eat(rest, "R")) f.motor = Motor::Reverse;
    else if (eat(rest, "S")) f.motor = Motor::Stopped;
    else malformed("expected motor F, R or S");
    if (!eat(rest, " lock=")) malformed("expected lock=");
    f.lock = eat_flag(rest);
    if (!eat(rest, " feed=")) malformed("expected feed=");
    f.feeder_count = eat_uint(rest);
    if (!eat(rest, " cap=")) malformed("expected cap=");
    f.capped = eat_flag(rest);
    if (!rest.empty()) malformed("trailing bytes");
    return Response::snapshot(f);
  }

  malformed("unknown response");
}

StateFields snapshot(const machine::MachineState& s) {
  StateFields f;
  f.position_tenths = std::lround(s.holder_position * 10.0);
  f.motor = s.motor;
  f.lock = s.lock_engaged;
  f.feeder_count = s.feeder_count;
  f.capped = s.vial_capped;
  return f;
}

ErrCode to_err_code(MachineErrc code) {
  switch (code) {
    case MachineErrc::NoVial: return ErrCode::NoVial;
    case MachineErrc::FeederEmpty: return ErrCode::Feeder;
    case MachineErrc::EStop: return ErrCode::Estop;
    case MachineErrc::NotCapped: return ErrCode::NotCapped;
    case MachineErrc::Busy: return ErrCode::Busy;
    case MachineErrc::InvalidConfig:
    case MachineErrc::InvalidState:
    case MachineErrc::WrongLane:
    case MachineErrc::HolderOccupied:
      return ErrCode::BadCmd;
  }
  return ErrCode::BadCmd;
}

Executed execute(Command cmd, const machine::MachineState& state,
                 const machine::MachineConfig& config) {
  namespace m = caplab::machine;
  if (is_motion(cmd.verb) && state.job != m::Job::None)
    return {state, Response::error(ErrCode::Busy)};

  try {
    switch (cmd.verb) {
      case Verb::Status:
        return {state, Response::snapshot(snapshot(state))};
      case Verb::Estop:
        return {m::press_estop(state), Response::ok()};
      case Verb::Reset:
        return {m::release_estop(state), Response::ok()};
      case Verb::Cap:
        // The controller cannot sense whether the cap seated; that is the
        // vision check's job.
        return {m::command_cap(state, config).first, Response::ok()};
      case Verb::Uncap:
        return {m::command_uncap(state, config).first, Response::ok()};
      case Verb::Home:
        return {m::run_job(m::begin_home(state, config), config), Response::ok()};
      case Verb::Feed:
        return {m::run_job(m::begin_feed(state, config), config), Response::ok()};
    }
  } catch (const MachineError& e) {
    return {state, Response::error(to_err_code(e.code()))};
  }
  return {state, Response::error(ErrCode::BadCmd)};
}

}  // namespace caplab::protocol
