#pragma once

// Orchestration of the capping/uncapping trial and the sealing experiment
// against abstract station clients. Every step is appended to an event log.

#include <iosfwd>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <tuple>
#include <vector>

#include "caplab/clock.hpp"
#include "caplab/machine.hpp"
#include "caplab/sealing.hpp"
#include "caplab/transport.hpp"
#include "caplab/vision.hpp"

namespace caplab::workflow {

enum class EventKind {
  Pick,
  Place,
  Cap,
  CapFailed,
  Uncap,
  ManualUncap,
  ManualCapRemoval,
  Return,
  Weigh,
  Dispense,
};

const char* to_string(EventKind kind);

struct WorkflowEvent {
  long seq = 0;
  double time_s = 0.0;
  EventKind kind = EventKind::Pick;
  std::string detail;

  bool operator==(const WorkflowEvent&) const = default;
};

// Append-only; sequence numbers start at 1 and increase by one.
class EventLog {
 public:
  const WorkflowEvent& append(double time_s, EventKind kind, std::string detail);
  const std::vector<WorkflowEvent>& events() const { return events_; }

 private:
  std::vector<WorkflowEvent> events_;
};

// One JSON object per line with keys seq, time_s, kind, detail.
void write_events_jsonl(std::ostream& out, const std::vector<WorkflowEvent>& events);

// Thrown by station clients on a hard failure.
class StationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A station failed or timed out; the workflow cannot continue.
class StationUnavailable : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class Robot {
 public:
  virtual ~Robot() = default;
  // The vial spec is what sits in the rack slot; hardware robots ignore it.
  virtual void pick_from_rack(int slot, const machine::VialSpec& vial) = 0;
  virtual void place_in_holder() = 0;
  virtual void move_to_uncapping() = 0;
  // Returns false when the cap stayed on the vial.
  virtual bool remove_cap() = 0;
  virtual void return_to_rack(int slot) = 0;
};

class Balance {
 public:
  virtual ~Balance() = default;
  virtual double weigh(const std::string& vial_id) = 0;  // gross, g
};

class Pump {
 public:
  virtual ~Pump() = default;
  virtual void dispense(const std::string& vial_id, const sealing::SolventInfo& solvent,
                        double volume_ml) = 0;
};

class Camera {
 public:
  virtual ~Camera() = default;
  virtual vision::Frame capture() = 0;
};

// "Check capping status" after a capping pass.
class CapCheck {
 public:
  virtual ~CapCheck() = default;
  virtual bool is_capped() = 0;
};

class VisionCapCheck : public CapCheck {
 public:
  VisionCapCheck(Camera& camera, vision::Roi roi, vision::DetectorConfig cfg)
      : camera_(camera), roi_(roi), cfg_(cfg) {}
  bool is_capped() override;
  const std::optional<vision::DetectionResult>& last() const { return last_; }

 private:
  Camera& camera_;
  vision::Roi roi_;
  vision::DetectorConfig cfg_;
  std::optional<vision::DetectionResult> last_;
};

// Trusts the controller's cap flag from STATUS.
class StatusCapCheck : public CapCheck {
 public:
  explicit StatusCapCheck(CapperPort& capper) : capper_(capper) {}
  bool is_capped() override;

 private:
  CapperPort& capper_;
};

// Manual steps. Instantaneous in simulation; a blocking acknowledgement
// prompt against real hardware.
class Operator {
 public:
  virtual ~Operator() = default;
  // Take the vial out of the holder, remove the loose cap, return the cap.
  virtual void manual_uncap(const std::string& vial_id) = 0;
  // Remove a cap left on a vial that went back to the rack.
  virtual void manual_cap_removal(const std::string& vial_id, int slot) = 0;
};

struct StationClients {
  Robot& robot;
  Balance& balance;
  Pump& pump;
  CapperPort& capper;
  CapCheck& check;
  Operator& op;
  Clock& clock;
};

struct TrialOptions {
  int rack_size = 24;
  double call_timeout_s = 30.0;     // robot, balance, pump
  double capper_timeout_s = 600.0;  // one full pass plus margin
};

struct TrialReport {
  int iterations = 0;
  int cap_successes = 0;
  int uncap_successes = 0;
  int manual_interventions = 0;
  int residual_caps = 0;
  std::vector<WorkflowEvent> events;
  std::optional<std::string> abort_reason;  // set when a station became unavailable

  std::string summary() const;
};

// Runs n capping/uncapping cycles. Cycle i uses vials[i] from rack slot
// i mod rack_size. A capping failure hands the vial to the operator and
// moves on; a cap left on after uncapping is removed manually. A station
// failure ends the trial and the partial report carries abort_reason.
TrialReport run_capping_trial(int n, const std::vector<machine::VialSpec>& vials,
                              StationClients clients, const TrialOptions& options = {});

// Loss rates in % of liquid weight per hour, keyed by method and solvent,
// with optional per-sample overrides.
class EvaporationModel {
 public:
  // Throws sealing::AnalysisError(NegativeRate).
  void set_rate(sealing::Method method, const std::string& solvent, double pct_per_hour);
  void set_sample_rate(sealing::Method method, const std::string& solvent, int sample,
                       double pct_per_hour);

  bool defined(sealing::Method method, const std::string& solvent, int sample) const;
  // Throws std::out_of_range when no rate is defined.
  double rate(sealing::Method method, const std::string& solvent, int sample) const;

  // initial - liquid * rate * t / 100, never below initial - liquid.
  static double gross_at(double initial_g, double liquid_g, double pct_per_hour, double t_h);

  double evaluate(sealing::Method method, const std::string& solvent, int sample,
                  double initial_g, double liquid_g, double t_h) const;

  // Per-hour batch averages of the benchmark runs, 10 mL fills.
  static EvaporationModel benchmark_defaults();

  // Per-sample rates that reproduce each vial's first and last record.
  static EvaporationModel replay(const std::vector<sealing::WeightRecord>& records,
                                 const sealing::SolventCatalog& catalog = sealing::standard_solvents());

 private:
  std::map<std::tuple<sealing::Method, std::string>, double> group_;
  std::map<std::tuple<sealing::Method, std::string, int>, double> sample_;
};

struct BatchPlan {
  sealing::SolventInfo solvent;  // liquid_weight follows from density and volume
  double volume_ml = 10.0;
  int repeats = 4;
  sealing::Method method = sealing::Method::CappingMachine;
  double duration_h = 72.0;
  double weigh_interval_h = 3.0;

  // Throws std::invalid_argument.
  void validate() const;
  double liquid_weight() const { return solvent.density * volume_ml * 1e-3; }
};

std::string vial_id_for(sealing::Method method, const std::string& solvent, int sample);

struct SealingRun {
  std::vector<sealing::WeightRecord> records;
  std::vector<WorkflowEvent> events;
};

// Fills, weighs and caps every vial, then logs a weight every
// weigh_interval_h over duration_h on the simulated clock: duration/interval + 1
// records per vial. Throws StationUnavailable.
SealingRun run_sealing_experiment(const std::vector<BatchPlan>& plans, StationClients clients,
                                  const EvaporationModel& model, const TrialOptions& options = {});

}  // namespace caplab::workflow
