#include "caplab/workflow.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <sstream>
#include <type_traits>

namespace caplab::workflow {

using protocol::Command;
using protocol::Response;
using protocol::Verb;

const char* to_string(EventKind kind) {
  switch (kind) {
    case EventKind::Pick: return "Pick";
    case EventKind::Place: return "Place";
    case EventKind::Cap: return "Cap";
    case EventKind::CapFailed: return "CapFailed";
    case EventKind::Uncap: return "Uncap";
    case EventKind::ManualUncap: return "ManualUncap";
    case EventKind::ManualCapRemoval: return "ManualCapRemoval";
    case EventKind::Return: return "Return";
    case EventKind::Weigh: return "Weigh";
    case EventKind::Dispense: return "Dispense";
  }
  return "?";
}

const WorkflowEvent& EventLog::append(double time_s, EventKind kind, std::string detail) {
  const long seq = events_.empty() ? 1 : events_.back().seq + 1;
  events_.push_back({seq, time_s, kind, std::move(detail)});
  return events_.back();
}

void write_events_jsonl(std::ostream& out, const std::vector<WorkflowEvent>& events) {
  for (const auto& e : events) {
    nlohmann::ordered_json j;
    j["seq"] = e.seq;
    j["time_s"] = std::round(e.time_s * 1e6) / 1e6;
    j["kind"] = to_string(e.kind);
    j["detail"] = e.detail;
    out << j.dump() << '\n';
  }
}

bool VisionCapCheck::is_capped() {
  last_ = vision::detect(camera_.capture(), roi_, cfg_);
  return last_->capped;
}

bool StatusCapCheck::is_capped() {
  const Response r = capper_.execute(Command{Verb::Status});
  if (r.kind != Response::Kind::State || !r.state)
    throw StationError("capper did not answer STATUS with a state line");
  return r.state->capped;
}

namespace {

std::string fmt(const char* pattern, auto... args) {
  char buf[256];
  std::snprintf(buf, sizeof buf, pattern, args...);
  return buf;
}

// Runs one station call, converting client failures and overruns into
// StationUnavailable.
template <typename F>
auto station_call(Clock& clock, double timeout_s, const std::string& what, F&& call) {
  const double started = clock.now();
  auto check_time = [&] {
    if (clock.now() - started > timeout_s)
      throw StationUnavailable(what + " exceeded its " + fmt("%.0f", timeout_s) + " s timeout");
  };
  try {
    if constexpr (std::is_void_v<std::invoke_result_t<F>>) {
      call();
      check_time();
    } else {
      auto result = call();
      check_time();
      return result;
    }
  } catch (const StationUnavailable&) {
    throw;
  } catch (const std::exception& e) {
    throw StationUnavailable(what + " failed: " + e.what());
  }
}

void capper_command(StationClients& c, const TrialOptions& o, Verb verb) {
  const std::string what = "capper " + std::string(protocol::verb_name(verb));
  const Response r =
      station_call(c.clock, o.capper_timeout_s, what, [&] { return c.capper.execute(Command{verb}); });
  if (r.kind == Response::Kind::Err)
    throw StationUnavailable(what + " answered " + std::string(protocol::err_name(*r.err)));
}

}  // namespace

std::string TrialReport::summary() const {
  std::string s = fmt("%d/%d capped, %d/%d uncapped, %d manual intervention%s", cap_successes,
                      iterations, uncap_successes, cap_successes, manual_interventions,
                      manual_interventions == 1 ? "" : "s");
  if (abort_reason) s += " (aborted: " + *abort_reason + ")";
  return s;
}

TrialReport run_capping_trial(int n, const std::vector<machine::VialSpec>& vials,
                              StationClients c, const TrialOptions& o) {
  if (n < 0) throw std::invalid_argument("trial length must be >= 0");
  if (vials.size() < static_cast<std::size_t>(n))
    throw std::invalid_argument("trial needs one vial spec per iteration");
  if (o.rack_size < 1) throw std::invalid_argument("rack_size must be >= 1");

  TrialReport report;
  EventLog log;
  auto robot = [&](const char* what, auto&& call) {
    return station_call(c.clock, o.call_timeout_s, std::string("robot ") + what, call);
  };

  try {
    for (int i = 0; i < n; ++i) {
      const machine::VialSpec& vial = vials[static_cast<std::size_t>(i)];
      const int slot = i % o.rack_size;
      const std::string tag = fmt("iteration %d vial %s", i + 1, vial.id.c_str());

      robot("pick", [&] { c.robot.pick_from_rack(slot, vial); });
      log.append(c.clock.now(), EventKind::Pick, tag + fmt(" from slot %d", slot));
      robot("place", [&] { c.robot.place_in_holder(); });
      log.append(c.clock.now(), EventKind::Place, tag + " in holder");

      capper_command(c, o, Verb::Cap);
      const bool capped =
          station_call(c.clock, o.call_timeout_s, "cap check", [&] { return c.check.is_capped(); });
      ++report.iterations;

      if (!capped) {
        log.append(c.clock.now(), EventKind::CapFailed, tag + " not capped");
        station_call(c.clock, o.call_timeout_s, "operator", [&] { c.op.manual_uncap(vial.id); });
        log.append(c.clock.now(), EventKind::ManualUncap, tag + " cap returned, vial uncapped by operator");
        continue;
      }
      ++report.cap_successes;
      log.append(c.clock.now(), EventKind::Cap, tag + " capped");

      robot("move to uncapping lane", [&] { c.robot.move_to_uncapping(); });
      capper_command(c, o, Verb::Uncap);
      ++report.uncap_successes;
      const bool removed = robot("remove cap", [&] { return c.robot.remove_cap(); });
      log.append(c.clock.now(), EventKind::Uncap,
                 tag + (removed ? " uncapped, cap removed by robot" : " uncapped, cap left on vial"));

      robot("return", [&] { c.robot.return_to_rack(slot); });
      log.append(c.clock.now(), EventKind::Return, tag + fmt(" to slot %d", slot));

      if (!removed) {
        station_call(c.clock, o.call_timeout_s, "operator",
                     [&] { c.op.manual_cap_removal(vial.id, slot); });
        ++report.residual_caps;
        log.append(c.clock.now(), EventKind::ManualCapRemoval, tag + " residual cap removed by operator");
      }
    }
  } catch (const StationUnavailable& e) {
    report.abort_reason = e.what();
  }

  report.manual_interventions = report.iterations - report.cap_successes + report.residual_caps;
  report.events = log.events();
  return report;
}

void EvaporationModel::set_rate(sealing::Method method, const std::string& solvent,
                                double pct_per_hour) {
  if (!(pct_per_hour >= 0.0))
    throw sealing::AnalysisError(sealing::AnalysisErrc::NegativeRate,
                                 "evaporation rate for " + solvent + " must be >= 0");
  group_[{method, solvent}] = pct_per_hour;
}

void EvaporationModel::set_sample_rate(sealing::Method method, const std::string& solvent,
                                       int sample, double pct_per_hour) {
  if (!(pct_per_hour >= 0.0))
    throw sealing::AnalysisError(sealing::AnalysisErrc::NegativeRate,
                                 fmt("evaporation rate for %s sample %d must be >= 0",
                                     solvent.c_str(), sample));
  sample_[{method, solvent, sample}] = pct_per_hour;
}

bool EvaporationModel::defined(sealing::Method method, const std::string& solvent, int sample) const {
  return sample_.count({method, solvent, sample}) > 0 || group_.count({method, solvent}) > 0;
}

double EvaporationModel::rate(sealing::Method method, const std::string& solvent, int sample) const {
  if (auto it = sample_.find({method, solvent, sample}); it != sample_.end()) return it->second;
  if (auto it = group_.find({method, solvent}); it != group_.end()) return it->second;
  throw std::out_of_range("no evaporation rate for " + std::string(sealing::method_token(method)) +
                          "/" + solvent);
}

double EvaporationModel::gross_at(double initial_g, double liquid_g, double pct_per_hour, double t_h) {
  if (!(pct_per_hour >= 0.0))
    throw sealing::AnalysisError(sealing::AnalysisErrc::NegativeRate, "evaporation rate must be >= 0");
  const double loss = liquid_g * pct_per_hour * t_h / 100.0;
  return initial_g - std::min(loss, liquid_g);
}

double EvaporationModel::evaluate(sealing::Method method, const std::string& solvent, int sample,
                                  double initial_g, double liquid_g, double t_h) const {
  return gross_at(initial_g, liquid_g, rate(method, solvent, sample), t_h);
}

EvaporationModel EvaporationModel::benchmark_defaults() {
  using sealing::Method;
  EvaporationModel m;
  m.set_rate(Method::CappingMachine, "water", 0.0013);
  m.set_rate(Method::CappingMachine, "ethanol", 0.0084);
  m.set_rate(Method::CappingMachine, "acetone", 0.0581);
  m.set_rate(Method::Manual, "water", 0.0003);
  m.set_rate(Method::Manual, "ethanol", 0.0003);
  m.set_rate(Method::Manual, "acetone", 0.0006);
  m.set_rate(Method::Chemspeed, "water", 0.00017);
  m.set_rate(Method::Chemspeed, "ethanol", 0.00022);
  m.set_rate(Method::Chemspeed, "acetone", 0.0006);
  return m;
}

EvaporationModel EvaporationModel::replay(const std::vector<sealing::WeightRecord>& input,
                                          const sealing::SolventCatalog& catalog) {
  std::vector<sealing::WeightRecord> records = input;
  sealing::sort_records(records);
  EvaporationModel model;
  for (std::size_t i = 0; i < records.size();) {
    std::size_t j = i;
    while (j < records.size() && records[j].vial_id == records[i].vial_id) ++j;
    const auto& first = records[i];
    const auto& last = records[j - 1];
    const double span = last.time_h - first.time_h;
    if (j - i < 2 || span <= 0.0)
      throw sealing::AnalysisError(sealing::AnalysisErrc::InsufficientRecords,
                                   "vial '" + first.vial_id + "' needs two records at distinct times");
    const double liquid = sealing::lookup_solvent(catalog, first.solvent).liquid_weight;
    const double rate = (first.gross_g - last.gross_g) / liquid * 100.0 / span;
    model.set_sample_rate(first.method, first.solvent, first.sample_index, rate);
    i = j;
  }
  return model;
}

void BatchPlan::validate() const {
  if (!(volume_ml > 0.0)) throw std::invalid_argument("batch volume must be > 0");
  if (repeats < 1) throw std::invalid_argument("batch repeats must be >= 1");
  if (!(solvent.density > 0.0)) throw std::invalid_argument("solvent density must be > 0");
  if (!(weigh_interval_h > 0.0) || !(duration_h > 0.0))
    throw std::invalid_argument("duration and weigh interval must be > 0");
  const double steps = duration_h / weigh_interval_h;
  if (std::abs(steps - std::round(steps)) > 1e-9)
    throw std::invalid_argument("weigh interval must divide the duration");
}

std::string vial_id_for(sealing::Method method, const std::string& solvent, int sample) {
  return std::string(sealing::method_token(method)) + "-" + solvent + "-" + std::to_string(sample);
}

SealingRun run_sealing_experiment(const std::vector<BatchPlan>& plans, StationClients c,
                                  const EvaporationModel& model, const TrialOptions& o) {
  if (plans.empty()) throw std::invalid_argument("sealing experiment needs at least one batch");
  for (const auto& p : plans) {
    p.validate();
    for (int r = 1; r <= p.repeats; ++r)
      if (!model.defined(p.method, p.solvent.name, r))
        throw std::invalid_argument("no evaporation rate for " + vial_id_for(p.method, p.solvent.name, r));
  }

  struct Prepared {
    const BatchPlan* plan;
    std::string vial_id;
    int sample;
    double initial;
    double liquid;
  };
  std::vector<Prepared> vials;
  EventLog log;
  auto call = [&](const std::string& what, auto&& fn) {
    return station_call(c.clock, o.call_timeout_s, what, fn);
  };

  int slot = 0;
  for (const auto& plan : plans) {
    const sealing::SolventInfo solvent =
        sealing::make_solvent(plan.solvent.name, plan.solvent.density, plan.volume_ml);
    for (int r = 1; r <= plan.repeats; ++r, ++slot) {
      const std::string id = vial_id_for(plan.method, solvent.name, r);
      const int rack_slot = slot % o.rack_size;
      const bool machine = plan.method == sealing::Method::CappingMachine;

      if (machine) {
        call("robot pick", [&] { c.robot.pick_from_rack(rack_slot, machine::make_vial(id)); });
        log.append(c.clock.now(), EventKind::Pick, id + fmt(" from slot %d", rack_slot));
      }
      call("pump", [&] { c.pump.dispense(id, solvent, plan.volume_ml); });
      log.append(c.clock.now(), EventKind::Dispense, id + fmt(" %.2f mL %s", plan.volume_ml, solvent.name.c_str()));
      const double initial = call("balance", [&] { return c.balance.weigh(id); });
      log.append(c.clock.now(), EventKind::Weigh, id + fmt(" t=0 h %.4f g", initial));

      if (machine) {
        call("robot place", [&] { c.robot.place_in_holder(); });
        log.append(c.clock.now(), EventKind::Place, id + " in holder");
        capper_command(c, o, Verb::Cap);
        if (!call("cap check", [&] { return c.check.is_capped(); })) {
          log.append(c.clock.now(), EventKind::CapFailed, id + " not capped");
          call("operator", [&] { c.op.manual_uncap(id); });
          log.append(c.clock.now(), EventKind::ManualUncap, id + " cap returned, vial uncapped by operator");
          throw StationUnavailable("capping machine failed to cap " + id);
        }
        log.append(c.clock.now(), EventKind::Cap, id + " capped by the capping machine");
        call("robot return", [&] { c.robot.return_to_rack(rack_slot); });
        log.append(c.clock.now(), EventKind::Return, id + fmt(" to slot %d", rack_slot));
      } else {
        log.append(c.clock.now(), EventKind::Cap,
                   id + " capped by " + std::string(sealing::method_label(plan.method)));
      }
      vials.push_back({&plan, id, r, initial, solvent.liquid_weight});
    }
  }

  struct Reading {
    double t_h;
    std::size_t vial;
  };
  std::vector<Reading> schedule;
  for (std::size_t v = 0; v < vials.size(); ++v) {
    const BatchPlan& p = *vials[v].plan;
    const long steps = std::lround(p.duration_h / p.weigh_interval_h);
    for (long k = 0; k <= steps; ++k) schedule.push_back({static_cast<double>(k) * p.weigh_interval_h, v});
  }
  std::stable_sort(schedule.begin(), schedule.end(),
                   [](const Reading& a, const Reading& b) { return a.t_h < b.t_h; });

  SealingRun run;
  const double start = c.clock.now();
  for (const Reading& reading : schedule) {
    const Prepared& v = vials[reading.vial];
    c.clock.wait(start + reading.t_h * 3600.0 - c.clock.now());
    const double gross =
        model.evaluate(v.plan->method, v.plan->solvent.name, v.sample, v.initial, v.liquid, reading.t_h);
    run.records.push_back({v.vial_id, v.plan->method, v.plan->solvent.name, v.sample, reading.t_h, gross});
    if (reading.t_h > 0.0)
      log.append(c.clock.now(), EventKind::Weigh, v.vial_id + fmt(" t=%g h %.4f g", reading.t_h, gross));
  }
  sealing::sort_records(run.records);
  run.events = log.events();
  return run;
}

}  // namespace caplab::workflow
