// Acceptance runner: one PASS/FAIL line per criterion, non-zero exit on any
// failure.

#include "caplab/machine.hpp"
#include "caplab/protocol.hpp"
#include "caplab/sealing.hpp"
#include "caplab/sim_bench.hpp"
#include "caplab/synthetic.hpp"
#include "caplab/vision.hpp"
#include "caplab/workflow.hpp"

#include "oracles.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

using namespace caplab;

namespace {

struct Outcome {
  bool ok = true;
  std::string detail;
  std::vector<std::string> failures;

  void require(bool cond, const std::string& what) {
    if (!cond) {
      ok = false;
      if (failures.size() < 5) failures.push_back(what);
    }
  }
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

std::vector<std::vector<std::string>> csv_rows(const std::string& path) {
  std::ifstream in(path);
  std::vector<std::vector<std::string>> rows;
  std::string line;
  std::getline(in, line);
  while (std::getline(in, line)) {
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    rows.push_back(cells);
  }
  return rows;
}

Outcome table_reproduction() {
  using namespace sealing;
  Outcome out;
  const auto t0 = Clock::now();
  std::ifstream in(CAPLAB_DATA_DIR "/tables_raw.csv");
  const auto records = ingest_csv(in);
  const auto r = report(records);
  const std::string text = render_text(r);
  const double wall = seconds_since(t0);

  auto sample = [&](Method m, const std::string& solvent, int k) -> const SampleRow* {
    for (const auto& g : r.groups)
      if (g.method == m && g.solvent == solvent)
        for (const auto& s : g.samples)
          if (s.sample_index == k) return &s;
    return nullptr;
  };
  auto group = [&](Method m, const std::string& solvent) -> const GroupRow* {
    for (const auto& g : r.groups)
      if (g.method == m && g.solvent == solvent) return &g;
    return nullptr;
  };

  const auto printed = csv_rows(CAPLAB_TEST_DATA_DIR "/tables_printed.csv");
  out.require(printed.size() == 36, "36 printed samples");
  for (const auto& row : printed) {
    const SampleRow* s = sample(*parse_method(row[0]), row[1], std::stoi(row[2]));
    const std::string id = row[0] + "/" + row[1] + "/" + row[2];
    out.require(s != nullptr, id + " missing");
    if (!s) continue;
    out.require(std::abs(s->stats.loss_mg - std::stod(row[3])) <= 0.05, id + " loss_mg");
    out.require(std::abs(s->stats.loss_pct - std::stod(row[4])) <= 0.0005, id + " loss_pct");
  }
  const auto averages = csv_rows(CAPLAB_TEST_DATA_DIR "/tables_averages.csv");
  out.require(averages.size() == 9, "9 printed averages");
  for (const auto& row : averages) {
    const GroupRow* g = group(*parse_method(row[0]), row[1]);
    const std::string id = row[0] + "/" + row[1];
    out.require(g != nullptr, id + " missing");
    if (!g) continue;
    out.require(std::abs(g->stats.avg_3day_pct - std::stod(row[2])) <= 0.0005, id + " 3-day");
    out.require(std::abs(g->stats.avg_per_day_pct - std::stod(row[3])) <= 0.0005, id + " per day");
    out.require(std::abs(g->stats.avg_per_hour_pct - std::stod(row[4])) <= 0.0005, id + " per hour");
  }

  double machine = NAN, manual = NAN, chemspeed = NAN;
  bool manual_flagged = false, others_flagged = false;
  for (const auto& m : r.methods) {
    if (m.method == Method::CappingMachine) machine = m.per_day_pct, others_flagged |= m.discrepancy;
    if (m.method == Method::Chemspeed) chemspeed = m.per_day_pct, others_flagged |= m.discrepancy;
    if (m.method == Method::Manual) manual = m.per_day_pct, manual_flagged = m.discrepancy;
  }
  out.require(std::abs(machine - 0.5438) <= 0.0005, "capping machine average");
  out.require(std::abs(chemspeed - 0.0078) <= 0.0005, "chemspeed average");
  out.require(std::abs(manual - 0.0095) <= 0.0005, "manual average");
  out.require(manual_flagged && !others_flagged, "discrepancy flags");
  out.require(text.find("DISCREPANCY") != std::string::npos && !r.notes.empty(), "discrepancy in report");
  out.require(wall < 1.0, "runtime under 1 s");
  out.detail = "machine " + fmt("%.4f", machine) + ", chemspeed " + fmt("%.5f", chemspeed) + ", manual " +
               fmt("%.4f", manual) + " (flagged), " + fmt("%.3f s", wall);
  return out;
}

std::vector<machine::VialSpec> good_vials(int n) {
  std::vector<machine::VialSpec> v;
  for (int i = 1; i <= n; ++i) v.push_back(machine::make_vial("v" + std::to_string(i)));
  return v;
}

Outcome trial_success() {
  using workflow::EventKind;
  Outcome out;
  const auto t0 = Clock::now();
  SimulatedBench bench;
  const auto r = workflow::run_capping_trial(100, good_vials(100), bench.clients());
  const double wall = seconds_since(t0);
  out.require(r.summary() == "100/100 capped, 100/100 uncapped, 0 manual interventions", r.summary());
  out.require(wall < 5.0, "runtime under 5 s");

  auto defect_run = [&](int n, int k) {
    auto vials = good_vials(n);
    vials[static_cast<std::size_t>(k - 1)] = machine::make_vial("bad", 2);
    SimulatedBench b;
    const auto d = workflow::run_capping_trial(n, vials, b.clients());
    int failed = 0, manual = 0;
    bool at_k = true;
    const std::string tag = "iteration " + std::to_string(k) + " ";
    for (const auto& e : d.events) {
      if (e.kind == EventKind::CapFailed || e.kind == EventKind::ManualUncap) {
        failed += e.kind == EventKind::CapFailed;
        manual += e.kind == EventKind::ManualUncap;
        at_k &= e.detail.find(tag) != std::string::npos;
      }
    }
    const std::string id = "n=" + std::to_string(n) + " k=" + std::to_string(k);
    out.require(failed == 1 && manual == 1 && at_k, id + " failure events");
    out.require(d.cap_successes == n - 1 && d.uncap_successes == n - 1, id + " successes");
  };
  for (int k = 1; k <= 10; ++k) defect_run(10, k);
  for (int k : {1, 37, 100}) defect_run(100, k);

  out.detail = r.summary() + ", " + fmt("%.2f s wall", wall) + ", " + fmt("%.0f s on the bench clock", bench.clock().now());
  return out;
}

Outcome vision_detector() {
  using namespace vision;
  Outcome out;
  const DetectorConfig cfg;
  const Roi roi = synthetic::default_roi();

  synthetic::CorpusGenerator gen(42, 0.02);
  int wrong = 0;
  const int frames = 200;
  for (int i = 0; i < frames; ++i) {
    const auto s = gen.next();
    if (detect(s.frame, roi, cfg).capped != s.capped) ++wrong;
  }
  out.require(wrong == 0, std::to_string(wrong) + " misclassified frames");

  std::mt19937 rng(77);
  synthetic::CorpusGenerator base_gen(5);
  std::vector<Frame> base;
  for (int i = 0; i < 10; ++i) base.push_back(base_gen.next().frame);
  int changed = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const Frame& original = base[static_cast<std::size_t>(trial) % base.size()];
    Frame f = original;
    const int touches = 1 + static_cast<int>(rng() % 5000);
    for (int k = 0; k < touches; ++k) {
      const int x = static_cast<int>(rng() % f.width), y = static_cast<int>(rng() % f.height);
      if (x >= roi.x && x < roi.x + roi.w && y >= roi.y && y < roi.y + roi.h) continue;
      f.set(x, y, static_cast<std::uint8_t>(rng()), static_cast<std::uint8_t>(rng()), static_cast<std::uint8_t>(rng()));
    }
    if (!(detect(f, roi, cfg) == detect(original, roi, cfg))) ++changed;
  }
  out.require(changed == 0, std::to_string(changed) + " ROI-locality changes");

  std::mt19937 mrng(1234);
  std::uniform_real_distribution<double> u(0, 1);
  int mismatched = 0;
  for (int i = 0; i < 200; ++i) {
    BinaryImage m(1 + static_cast<int>(mrng() % 64), 1 + static_cast<int>(mrng() % 64));
    const double density = u(mrng);
    for (auto& b : m.bits) b = u(mrng) < density;
    const long min_blob = static_cast<long>(mrng() % 12);
    if (!(total_blob_area(m, min_blob) == oracle::flood_fill(m, min_blob))) ++mismatched;
  }
  out.require(mismatched == 0, std::to_string(mismatched) + " blob-area mismatches");

  out.detail = std::to_string(frames) + " frames, " + std::to_string(wrong) + " wrong; " + std::to_string(changed) +
               "/1000 ROI changes; " + std::to_string(mismatched) + "/200 oracle mismatches";
  return out;
}

Outcome relay_logic() {
  using machine::Motor;
  Outcome out;
  int disagreements = 0;
  for (unsigned b = 0; b < 128; ++b) {
    const Motor m = oracle::relay_under_test(b);
    const std::string id = "inputs " + std::to_string(b);
    if (m != oracle::relay_drive(b)) ++disagreements;
    if (b & 4) out.require(m == Motor::Stopped, id + " e-stop dominance");
    if (m == Motor::Forward) out.require(!(b & 64), id + " far limit cutoff");
    if (m == Motor::Reverse) out.require(!(b & 32), id + " home limit cutoff");
  }
  out.require(disagreements == 0, std::to_string(disagreements) + " truth-table disagreements");

  const machine::MachineConfig c;
  for (unsigned b = 0; b < 128; ++b) {
    auto s = machine::initial_state(c);
    s.holder_position = (b & 32) ? 0.0 : (b & 64) ? c.position_end : c.position_feeder / 2;
    s = machine::refresh_sensors(s, c);
    s.panel_home = b & 1;
    s.panel_feed = b & 2;
    s.estop = b & 4;
    s.ctrl_fwd = b & 8;
    s.ctrl_rev = b & 16;
    for (int i = 0; i < 3; ++i) {
      s = machine::step(s, c, c.tick);
      out.require(!(s.relay_forward && s.relay_reverse), "inputs " + std::to_string(b) + " both relays");
    }
  }
  out.detail = "128 inputs, " + std::to_string(disagreements) + " disagreements";
  return out;
}

Outcome protocol_robustness() {
  using namespace protocol;
  Outcome out;
  std::mt19937 rng(31337);
  const std::vector<std::string> seeds = {"OK\n", "ERR E_BUSY\n", "STATE pos=1400 motor=S lock=1 feed=9 cap=1\n"};
  int valid = 0, malformed = 0, other = 0, disagree = 0;
  for (int i = 0; i < 10000; ++i) {
    std::string line;
    if (i % 2) {
      line.resize(rng() % 80);
      for (auto& ch : line) ch = static_cast<char>(rng());
      if (rng() % 2) line.push_back('\n');
    } else {
      line = seeds[rng() % seeds.size()];
      const std::size_t at = rng() % line.size();
      if (rng() % 2) line[at] = static_cast<char>(rng());
      else line.insert(at, std::string(rng() % 12, static_cast<char>('0' + rng() % 10)));
    }
    bool ok = false;
    try {
      const Response r = parse_response(line);
      ok = true;
      ++valid;
      if (!(parse_response(encode_response(r)) == r)) ++disagree;
    } catch (const ProtocolError& e) {
      if (e.code() == ProtocolErrc::MalformedResponse) ++malformed;
      else ++other;
    } catch (...) {
      ++other;
    }
    if (ok != oracle::grammatical(line)) ++disagree;
  }
  out.require(other == 0, std::to_string(other) + " unstructured failures");
  out.require(disagree == 0, std::to_string(disagree) + " grammar disagreements");
  int verbs = 0;
  for (Verb v : kAllVerbs) {
    out.require(parse_command(encode(Command{v})) == Command{v}, "verb round trip");
    ++verbs;
  }
  out.require(verbs == 7, "seven verbs");
  out.detail = "10000 lines: " + std::to_string(valid) + " valid, " + std::to_string(malformed) +
               " malformed; " + std::to_string(verbs) + " verbs round trip";
  return out;
}

Outcome kinematics() {
  using namespace machine;
  Outcome out;
  std::mt19937 rng(7);
  std::uniform_real_distribution<double> rpm(10, 300), pitch(0.5, 8), dist(20, 600);
  double worst = 0;
  int configs = 0;
  while (configs < 300) {
    MachineConfig c;
    c.motor_rpm = rpm(rng);
    c.leadscrew_pitch = pitch(rng);
    c.position_end = dist(rng);
    c.rail_length = c.position_end;
    c.position_feeder = c.position_end / 2;
    const double expected = c.position_end / ((c.motor_rpm / 60.0) * c.leadscrew_pitch);
    if (expected < 4 * c.tick) continue;
    ++configs;
    MachineState s = begin_feed(initial_state(c), c);
    long ticks = 0;
    while (s.job != Job::None && ticks < 10000000) {
      s = advance(s, c, c.tick);
      ++ticks;
    }
    const double err = std::abs(ticks * c.tick - expected);
    worst = std::max(worst, err / c.tick);
    out.require(err <= c.tick + 1e-9, "traversal rpm " + fmt("%.1f", c.motor_rpm));
  }

  const MachineConfig c;
  std::mt19937 seq_rng(2024);
  std::uniform_real_distribution<double> dt(0.001, 3.0);
  int escapes = 0;
  for (int seq = 0; seq < 10000; ++seq) {
    MachineState s = initial_state(c);
    for (int i = 0; i < 24; ++i) {
      try {
        switch (seq_rng() % 11) {
          case 0: s = begin_cap(s, c); break;
          case 1: s = begin_uncap(s, c); break;
          case 2: s = begin_home(s, c); break;
          case 3: s = begin_feed(s, c); break;
          case 4: s = press_estop(s); break;
          case 5: s = release_estop(s); break;
          case 6: s.panel_home = !s.panel_home; break;
          case 7: s.panel_feed = !s.panel_feed; break;
          case 8: s = load_vial(s, c, make_vial("v", 2 + static_cast<int>(seq_rng() % 2), seq_rng() % 360)); break;
          case 9: s = move_to_lane(s, c, seq_rng() % 2 ? Lane::Capping : Lane::Uncapping); break;
          default: s = unload_vial(s, c); break;
        }
      } catch (const MachineError&) {
      }
      const int steps = 1 + static_cast<int>(seq_rng() % 40);
      for (int k = 0; k < steps; ++k) {
        s = advance(s, c, dt(seq_rng));
        if (s.holder_position < 0.0 || s.holder_position > c.position_end) ++escapes;
      }
    }
  }
  out.require(escapes == 0, std::to_string(escapes) + " positions off the rail");
  out.detail = std::to_string(configs) + " configs, worst error " + fmt("%.3f", worst) + " ticks; 10000 sequences, " +
               std::to_string(escapes) + " escapes";
  return out;
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
      {"table reproduction", table_reproduction}, {"trial success", trial_success},
      {"vision detector", vision_detector},       {"relay logic", relay_logic},
      {"protocol robustness", protocol_robustness}, {"kinematics", kinematics},
  };
  int failed = 0;
  for (const auto& [name, check] : criteria) {
    Outcome o;
    try {
      o = check();
    } catch (const std::exception& e) {
      o.ok = false;
      o.detail = std::string("threw: ") + e.what();
    }
    std::printf("[%s] %s: %s\n", o.ok ? "PASS" : "FAIL", name, o.detail.c_str());
    for (const auto& f : o.failures) std::printf("       - %s\n", f.c_str());
    failed += !o.ok;
  }
  std::fflush(stdout);
  return failed == 0 ? 0 : 1;
}
