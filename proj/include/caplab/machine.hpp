#pragma once

// Digital twin of the capping machine: lead-screw driven vial holder, cam lock,
// relay H-bridge with limit switches, cap feeder, and the capping/uncapping lanes.

#include <optional>
#include <stdexcept>
#include <string>
#include <utility>

namespace caplab::machine {

enum class Motor { Stopped, Forward, Reverse };
enum class Lane { Capping, Uncapping };

// Motion job driven by the controller. Cap and Uncap are two-leg passes
// (position 1 -> position 2 -> home).
enum class Job { None, Home, Feed, Cap, Uncap };
enum class Leg { Outbound, Return };

enum class MachineErrc {
  InvalidConfig,
  InvalidState,
  NoVial,
  FeederEmpty,
  EStop,
  NotCapped,
  WrongLane,
  HolderOccupied,
  Busy,
};

const char* to_string(MachineErrc code);
const char* to_string(Motor motor);

class MachineError : public std::runtime_error {
 public:
  MachineError(MachineErrc code, const std::string& what)
      : std::runtime_error(what), code_(code) {}
  MachineErrc code() const noexcept { return code_; }

 private:
  MachineErrc code_;
};

struct MachineConfig {
  double motor_rpm = 84.0;        // rev/min
  double leadscrew_pitch = 2.0;   // mm/rev
  double rail_length = 300.0;     // mm
  double position_load = 0.0;     // mm, position 1
  double position_feeder = 140.0; // mm, under the cap feeder
  double position_end = 280.0;    // mm, position 2
  double cam_engage_offset = 10.0;  // mm past position 1 where the lock closes
  double tick = 0.05;             // s
  int feeder_capacity = 24;
  double orientation_tolerance = 60.0;  // degrees

  // Recorded for reference only, not simulated.
  double motor_torque_ncm = 59.0;
  double belt_ratio = 1.0;

  // Holder speed in mm/s.
  double speed() const { return motor_rpm / 60.0 * leadscrew_pitch; }
  // Limit-switch activation distance: one tick of travel.
  double limit_epsilon() const { return speed() * tick; }

  // Throws MachineError(InvalidConfig).
  void validate() const;
};

struct VialSpec {
  std::string id;
  int thread_count = 3;
  double orientation = 0.0;  // degrees relative to the cap feeder
  bool defective = false;

  bool operator==(const VialSpec&) const = default;
};

// Builds a vial with the defect flag derived from the thread count.
VialSpec make_vial(std::string id, int thread_count = 3, double orientation = 0.0);

struct MachineState {
  double holder_position = 0.0;
  Motor motor = Motor::Stopped;
  bool relay_forward = false;
  bool relay_reverse = false;
  bool limit_home = true;
  bool limit_far = false;
  bool lock_engaged = false;
  int feeder_count = 0;
  Lane lane = Lane::Capping;
  std::optional<VialSpec> vial;
  bool vial_capped = false;
  bool loose_cap = false;  // cap sitting on the vial mouth, not tightened
  bool estop = false;

  // Direction request lines. Panel buttons are spring-return; the controller
  // lines are held by the firmware for the duration of a job.
  bool panel_home = false;
  bool panel_feed = false;
  bool ctrl_fwd = false;
  bool ctrl_rev = false;

  Job job = Job::None;
  Leg leg = Leg::Outbound;

  bool operator==(const MachineState&) const = default;
};

enum class CapReason { Ok, MissingThreads, Misoriented, FeederEmpty, NoVial };
const char* to_string(CapReason reason);

struct CapAttempt {
  bool success = false;
  CapReason reason = CapReason::NoVial;

  static CapAttempt from(CapReason r) { return {r == CapReason::Ok, r}; }
  bool operator==(const CapAttempt&) const = default;
};

// H-bridge direction logic. Total over its inputs.
Motor relay_logic(bool panel_home, bool panel_feed, bool panel_estop, bool ctrl_fwd,
                  bool ctrl_rev, bool limit_home, bool limit_far);

MachineState initial_state(const MachineConfig& config);

// Throws MachineError(InvalidState) naming the first violated invariant.
void validate_state(const MachineState& state, const MachineConfig& config);

// Recomputes the sensor flags (limits, cam lock) from the holder position.
MachineState refresh_sensors(MachineState state, const MachineConfig& config);

// Advances the holder by dt seconds at the current motor drive, then updates
// sensors, feeder/lane effects and the relay outputs.
MachineState step(const MachineState& state, const MachineConfig& config, double dt);

// Angular distance from the feeder-facing orientation, in [0, 180].
double angular_distance(double orientation_deg);

// Outcome the next cap pass would have. Exactly one reason for any state.
CapAttempt evaluate_cap(const MachineState& state, const MachineConfig& config);

// Job control. begin_* check preconditions and throw MachineError; advance
// steps a running job and finishes it when its endpoint is reached. An
// asserted e-stop aborts the job and leaves the holder where it is.
MachineState begin_cap(const MachineState& state, const MachineConfig& config);
MachineState begin_uncap(const MachineState& state, const MachineConfig& config);
MachineState begin_home(const MachineState& state, const MachineConfig& config);
MachineState begin_feed(const MachineState& state, const MachineConfig& config);
MachineState advance(const MachineState& state, const MachineConfig& config, double dt);

// Runs the current job to completion in tick steps. Throws EStop if the job
// ends because of an e-stop.
MachineState run_job(const MachineState& state, const MachineConfig& config);

std::pair<MachineState, CapAttempt> command_cap(const MachineState& state,
                                                const MachineConfig& config);
std::pair<MachineState, CapAttempt> command_uncap(const MachineState& state,
                                                  const MachineConfig& config);

MachineState press_estop(MachineState state);
MachineState release_estop(MachineState state);

// Hands-on operations (robot or operator). The holder must be home and idle.
MachineState load_vial(MachineState state, const MachineConfig& config, VialSpec vial,
                       Lane lane = Lane::Capping);
MachineState move_to_lane(MachineState state, const MachineConfig& config, Lane lane);
// Removes the vial; a loose cap leaves with it.
MachineState unload_vial(MachineState state, const MachineConfig& config);
// Lifts a loose cap off the vial mouth. Returns false when there was none.
bool lift_loose_cap(MachineState& state);
// Refills the hopper, clamped at capacity.
MachineState load_caps(MachineState state, const MachineConfig& config, int count);

}  // namespace caplab::machine
