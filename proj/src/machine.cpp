#include "caplab/machine.hpp"

#include <algorithm>
#include <cmath>

namespace caplab::machine {

const char* to_string(MachineErrc code) {
  switch (code) {
    case MachineErrc::InvalidConfig: return "InvalidConfig";
    case MachineErrc::InvalidState: return "InvalidState";
    case MachineErrc::NoVial: return "NoVial";
    case MachineErrc::FeederEmpty: return "FeederEmpty";
    case MachineErrc::EStop: return "EStop";
    case MachineErrc::NotCapped: return "NotCapped";
    case MachineErrc::WrongLane: return "WrongLane";
    case MachineErrc::HolderOccupied: return "HolderOccupied";
    case MachineErrc::Busy: return "Busy";
  }
  return "?";
}

const char* to_string(Motor motor) {
  switch (motor) {
    case Motor::Stopped: return "Stopped";
    case Motor::Forward: return "Forward";
    case Motor::Reverse: return "Reverse";
  }
  return "?";
}

const char* to_string(CapReason reason) {
  switch (reason) {
    case CapReason::Ok: return "Ok";
    case CapReason::MissingThreads: return "MissingThreads";
    case CapReason::Misoriented: return "Misoriented";
    case CapReason::FeederEmpty: return "FeederEmpty";
    case CapReason::NoVial: return "NoVial";
  }
  return "?";
}

namespace {

[[noreturn]] void fail(MachineErrc code, const std::string& msg) {
  throw MachineError(code, msg);
}

void require_config(bool ok, const char* what) {
  if (!ok) fail(MachineErrc::InvalidConfig, std::string("invalid machine config: ") + what);
}

void require_state(bool ok, const char* what) {
  if (!ok) fail(MachineErrc::InvalidState, std::string("invalid machine state: ") + what);
}

void apply_drive(MachineState& s, Motor drive) {
  s.motor = drive;
  s.relay_forward = drive == Motor::Forward;
  s.relay_reverse = drive == Motor::Reverse;
}

void update_drive(MachineState& s) {
  apply_drive(s, relay_logic(s.panel_home, s.panel_feed, s.estop, s.ctrl_fwd, s.ctrl_rev,
                             s.limit_home, s.limit_far));
}

void clear_job(MachineState& s) {
  s.job = Job::None;
  s.leg = Leg::Outbound;
  s.ctrl_fwd = false;
  s.ctrl_rev = false;
}

void require_idle_home(const MachineState& s, const MachineConfig& config) {
  if (s.job != Job::None) fail(MachineErrc::Busy, "machine is moving");
  if (s.holder_position > config.limit_epsilon())
    fail(MachineErrc::InvalidState, "holder is not at the home position");
}

MachineState start_job(MachineState s, Job job) {
  s.job = job;
  s.leg = Leg::Outbound;
  s.ctrl_fwd = job == Job::Feed || job == Job::Cap || job == Job::Uncap;
  s.ctrl_rev = job == Job::Home;
  update_drive(s);
  return s;
}

void check_can_move(const MachineState& s, const MachineConfig& config) {
  validate_state(s, config);
  if (s.estop) fail(MachineErrc::EStop, "emergency stop is latched");
  if (s.job != Job::None) fail(MachineErrc::Busy, "machine is moving");
}

}  // namespace

void MachineConfig::validate() const {
  require_config(motor_rpm > 0.0, "motor_rpm must be > 0");
  require_config(leadscrew_pitch > 0.0, "leadscrew_pitch must be > 0");
  require_config(tick > 0.0, "tick must be > 0");
  require_config(position_load >= 0.0, "position_load must be >= 0");
  require_config(position_load < position_feeder, "position_load must be < position_feeder");
  require_config(position_feeder < position_end, "position_feeder must be < position_end");
  require_config(position_end <= rail_length, "position_end must be <= rail_length");
  require_config(cam_engage_offset >= 0.0, "cam_engage_offset must be >= 0");
  require_config(feeder_capacity >= 0, "feeder_capacity must be >= 0");
  require_config(orientation_tolerance >= 0.0, "orientation_tolerance must be >= 0");
  require_config(std::isfinite(motor_rpm * leadscrew_pitch * tick * position_end),
                 "values must be finite");
}

VialSpec make_vial(std::string id, int thread_count, double orientation) {
  return VialSpec{std::move(id), thread_count, orientation, thread_count < 3};
}

Motor relay_logic(bool panel_home, bool panel_feed, bool panel_estop, bool ctrl_fwd,
                  bool ctrl_rev, bool limit_home, bool limit_far) {
  if (panel_estop) return Motor::Stopped;

  bool want_fwd = false;
  bool want_rev = false;
  if (panel_home || panel_feed) {
    want_fwd = panel_feed;
    want_rev = panel_home;
  } else {
    want_fwd = ctrl_fwd;
    want_rev = ctrl_rev;
  }

  if (want_fwd && want_rev) return Motor::Stopped;
  if (want_fwd) return limit_far ? Motor::Stopped : Motor::Forward;
  if (want_rev) return limit_home ? Motor::Stopped : Motor::Reverse;
  return Motor::Stopped;
}

MachineState initial_state(const MachineConfig& config) {
  config.validate();
  MachineState s;
  s.feeder_count = config.feeder_capacity;
  return refresh_sensors(s, config);
}

MachineState refresh_sensors(MachineState s, const MachineConfig& config) {
  const double eps = config.limit_epsilon();
  s.limit_home = s.holder_position <= eps;
  s.limit_far = s.holder_position >= config.position_end - eps;
  s.lock_engaged = s.holder_position >= config.position_load + config.cam_engage_offset;
  return s;
}

void validate_state(const MachineState& s, const MachineConfig& config) {
  require_state(std::isfinite(s.holder_position), "holder_position not finite");
  require_state(s.holder_position >= 0.0 && s.holder_position <= config.position_end,
                "holder_position outside [0, position_end]");
  const MachineState sensed = refresh_sensors(s, config);
  require_state(sensed.limit_home == s.limit_home, "limit_home disagrees with position");
  require_state(sensed.limit_far == s.limit_far, "limit_far disagrees with position");
  require_state(sensed.lock_engaged == s.lock_engaged, "lock_engaged disagrees with position");
  require_state(!(s.relay_forward && s.relay_reverse), "both direction relays closed");
  require_state(s.motor != Motor::Forward || (s.relay_forward && !s.relay_reverse),
                "Forward drive without forward relay");
  require_state(s.motor != Motor::Reverse || (s.relay_reverse && !s.relay_forward),
                "Reverse drive without reverse relay");
  require_state(s.motor != Motor::Stopped || (!s.relay_forward && !s.relay_reverse),
                "relay closed while stopped");
  require_state(!s.estop || s.motor == Motor::Stopped, "motor running under e-stop");
  require_state(s.feeder_count >= 0 && s.feeder_count <= config.feeder_capacity,
                "feeder_count outside [0, capacity]");
  require_state(!s.vial_capped || s.vial.has_value(), "capped without a vial");
  require_state(!s.loose_cap || (s.vial.has_value() && !s.vial_capped),
                "loose cap without an uncapped vial");
  if (s.vial) {
    require_state(s.vial->thread_count >= 0, "negative thread count");
    require_state(s.vial->thread_count >= 3 || s.vial->defective,
                  "vial with fewer than 3 threads must be flagged defective");
  }
}

double angular_distance(double orientation_deg) {
  double d = std::fmod(orientation_deg, 360.0);
  if (d < 0.0) d += 360.0;
  return std::min(d, 360.0 - d);
}

namespace {

CapReason classify_vial(const VialSpec& vial, const MachineConfig& config) {
  if (vial.defective || vial.thread_count != 3) return CapReason::MissingThreads;
  if (angular_distance(vial.orientation) > config.orientation_tolerance)
    return CapReason::Misoriented;
  return CapReason::Ok;
}

}  // namespace

CapAttempt evaluate_cap(const MachineState& s, const MachineConfig& config) {
  if (!s.vial) return CapAttempt::from(CapReason::NoVial);
  if (s.vial_capped) return CapAttempt::from(CapReason::Ok);
  if (s.feeder_count <= 0) return CapAttempt::from(CapReason::FeederEmpty);
  return CapAttempt::from(classify_vial(*s.vial, config));
}

MachineState step(const MachineState& state, const MachineConfig& config, double dt) {
  if (!(dt > 0.0) || !std::isfinite(dt))
    fail(MachineErrc::InvalidState, "step requires dt > 0");
  validate_state(state, config);

  MachineState s = state;
  const double v = config.speed();
  const double eps = config.limit_epsilon();
  const double old_pos = s.holder_position;
  double pos = old_pos;
  if (s.motor == Motor::Forward) {
    pos = old_pos + v * dt;
    if (pos >= config.position_end - eps) pos = config.position_end;
  } else if (s.motor == Motor::Reverse) {
    pos = old_pos - v * dt;
    if (pos <= eps) pos = 0.0;
  }
  s.holder_position = std::clamp(pos, 0.0, config.position_end);

  const double feeder = config.position_feeder;
  const bool outbound_cross = old_pos < feeder && s.holder_position >= feeder;
  const bool return_cross = old_pos > feeder && s.holder_position <= feeder;

  if (s.vial && s.lane == Lane::Capping && !s.vial_capped) {
    if (outbound_cross && !s.loose_cap && s.feeder_count > 0) s.loose_cap = true;
    if (return_cross && s.loose_cap && classify_vial(*s.vial, config) == CapReason::Ok) {
      s.loose_cap = false;
      s.vial_capped = true;
      --s.feeder_count;
    }
  } else if (s.vial && s.lane == Lane::Uncapping && s.vial_capped && return_cross) {
    s.vial_capped = false;
    s.loose_cap = true;
  }

  s = refresh_sensors(s, config);
  update_drive(s);
  return s;
}

MachineState begin_cap(const MachineState& state, const MachineConfig& config) {
  check_can_move(state, config);
  if (state.lane != Lane::Capping) fail(MachineErrc::WrongLane, "vial is not in the capping lane");
  if (!state.vial) fail(MachineErrc::NoVial, "holder is empty");
  if (state.feeder_count <= 0 && !state.vial_capped)
    fail(MachineErrc::FeederEmpty, "cap feeder is empty");
  require_idle_home(state, config);
  return start_job(state, Job::Cap);
}

MachineState begin_uncap(const MachineState& state, const MachineConfig& config) {
  check_can_move(state, config);
  if (state.lane != Lane::Uncapping)
    fail(MachineErrc::WrongLane, "vial is not in the uncapping lane");
  if (!state.vial) fail(MachineErrc::NoVial, "holder is empty");
  if (!state.vial_capped) fail(MachineErrc::NotCapped, "vial is not capped");
  require_idle_home(state, config);
  return start_job(state, Job::Uncap);
}

MachineState begin_home(const MachineState& state, const MachineConfig& config) {
  check_can_move(state, config);
  return start_job(state, Job::Home);
}

MachineState begin_feed(const MachineState& state, const MachineConfig& config) {
  check_can_move(state, config);
  return start_job(state, Job::Feed);
}

MachineState advance(const MachineState& state, const MachineConfig& config, double dt) {
  MachineState s = step(state, config, dt);
  if (s.job == Job::None) return s;
  if (s.estop) {
    clear_job(s);
    update_drive(s);
    return s;
  }

  switch (s.job) {
    case Job::Home:
      if (s.limit_home) clear_job(s);
      break;
    case Job::Feed:
      if (s.limit_far) clear_job(s);
      break;
    case Job::Cap:
    case Job::Uncap:
      if (s.leg == Leg::Outbound && s.limit_far) {
        s.leg = Leg::Return;
        s.ctrl_fwd = false;
        s.ctrl_rev = true;
      } else if (s.leg == Leg::Return && s.limit_home) {
        clear_job(s);
      }
      break;
    case Job::None:
      break;
  }
  update_drive(s);
  return s;
}

MachineState run_job(const MachineState& state, const MachineConfig& config) {
  MachineState s = state;
  // Generous bound: a full pass is two rail lengths.
  const double pass_time = 2.0 * config.position_end / config.speed();
  const long max_ticks = static_cast<long>(std::ceil(pass_time / config.tick)) + 16;
  for (long i = 0; s.job != Job::None; ++i) {
    if (i > max_ticks) fail(MachineErrc::InvalidState, "job did not reach its endpoint");
    s = advance(s, config, config.tick);
  }
  if (s.estop) fail(MachineErrc::EStop, "emergency stop during motion");
  return s;
}

std::pair<MachineState, CapAttempt> command_cap(const MachineState& state,
                                                const MachineConfig& config) {
  MachineState s = run_job(begin_cap(state, config), config);
  CapAttempt attempt;
  if (s.vial_capped) {
    attempt = CapAttempt::from(CapReason::Ok);
  } else {
    attempt = CapAttempt::from(classify_vial(*s.vial, config));
    // Rule passed but nothing seated: the feeder released no cap.
    if (attempt.success) attempt = CapAttempt::from(CapReason::FeederEmpty);
  }
  return {s, attempt};
}

std::pair<MachineState, CapAttempt> command_uncap(const MachineState& state,
                                                  const MachineConfig& config) {
  MachineState s = run_job(begin_uncap(state, config), config);
  return {s, CapAttempt::from(CapReason::Ok)};
}

MachineState press_estop(MachineState s) {
  s.estop = true;
  clear_job(s);
  s.panel_home = s.panel_feed = false;
  apply_drive(s, Motor::Stopped);
  return s;
}

MachineState release_estop(MachineState s) {
  s.estop = false;
  return s;
}

MachineState load_vial(MachineState s, const MachineConfig& config, VialSpec vial, Lane lane) {
  require_idle_home(s, config);
  if (s.vial) fail(MachineErrc::HolderOccupied, "holder already holds a vial");
  if (vial.thread_count < 0) fail(MachineErrc::InvalidState, "negative thread count");
  if (vial.thread_count < 3) vial.defective = true;
  s.vial = std::move(vial);
  s.vial_capped = false;
  s.loose_cap = false;
  s.lane = lane;
  return s;
}

MachineState move_to_lane(MachineState s, const MachineConfig& config, Lane lane) {
  require_idle_home(s, config);
  if (!s.vial) fail(MachineErrc::NoVial, "holder is empty");
  s.lane = lane;
  return s;
}

MachineState unload_vial(MachineState s, const MachineConfig& config) {
  require_idle_home(s, config);
  if (!s.vial) fail(MachineErrc::NoVial, "holder is empty");
  s.vial.reset();
  s.vial_capped = false;
  s.loose_cap = false;
  return s;
}

bool lift_loose_cap(MachineState& s) {
  if (!s.loose_cap) return false;
  s.loose_cap = false;
  return true;
}

MachineState load_caps(MachineState s, const MachineConfig& config, int count) {
  if (count < 0) fail(MachineErrc::InvalidState, "cannot load a negative number of caps");
  s.feeder_count = std::min(config.feeder_capacity, s.feeder_count + count);
  return s;
}

}  // namespace caplab::machine
