// caplab: simulator, trial runner, vision detector and sealing analyzer.
//
// Exit status: 0 success, 1 operational or I/O error, 2 negative outcome
// (a frame not capped, or a trial that needed manual intervention).

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "caplab/config.hpp"
#include "caplab/controller.hpp"
#include "caplab/image_io.hpp"
#include "caplab/protocol.hpp"
#include "caplab/sealing.hpp"
#include "caplab/sim_bench.hpp"
#include "caplab/synthetic.hpp"
#include "caplab/transport.hpp"
#include "caplab/vision.hpp"
#include "caplab/workflow.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace caplab;

namespace {

struct Failure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

Settings settings_from(const std::string& path) {
  return path.empty() ? default_settings() : load_settings(path);
}

std::ofstream open_out(const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Failure("cannot write " + path.string());
  return out;
}

// ---- trial ----------------------------------------------------------------

std::vector<machine::VialSpec> read_vials(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Failure("cannot open " + path);
  std::vector<machine::VialSpec> vials;
  std::string line;
  long n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.rfind("id,", 0) == 0) continue;
    std::stringstream ss(line);
    std::string id, threads, orientation;
    std::getline(ss, id, ',');
    std::getline(ss, threads, ',');
    std::getline(ss, orientation, ',');
    try {
      vials.push_back(machine::make_vial(id, threads.empty() ? 3 : std::stoi(threads),
                                         orientation.empty() ? 0.0 : std::stod(orientation)));
    } catch (const std::logic_error&) {
      throw Failure(path + ":" + std::to_string(n) + ": expected id,thread_count,orientation_deg");
    }
  }
  return vials;
}

int cmd_trial(const Settings& settings, int n, const std::string& vials_path,
              const std::vector<int>& defects, const std::string& out_dir) {
  std::vector<machine::VialSpec> vials;
  if (!vials_path.empty()) {
    vials = read_vials(vials_path);
  } else {
    for (int i = 1; i <= n; ++i) {
      char id[32];
      std::snprintf(id, sizeof id, "vial-%03d", i);
      vials.push_back(machine::make_vial(id));
    }
  }
  for (int k : defects) {
    if (k < 1 || k > static_cast<int>(vials.size()))
      throw Failure("--defect-at " + std::to_string(k) + " is outside 1.." + std::to_string(vials.size()));
    auto& v = vials[static_cast<std::size_t>(k - 1)];
    v = machine::make_vial(v.id, 2, v.orientation);
  }
  if (static_cast<int>(vials.size()) < n)
    throw Failure("vial list has " + std::to_string(vials.size()) + " entries, need " + std::to_string(n));

  SimulatedBench bench(settings.machine);
  workflow::VisionCapCheck check(bench, settings.roi, settings.detector);
  const auto report = workflow::run_capping_trial(n, vials, bench.clients(check));

  if (!out_dir.empty()) {
    fs::create_directories(out_dir);
    auto events = open_out(fs::path(out_dir) / "events.jsonl");
    workflow::write_events_jsonl(events, report.events);
    auto summary = open_out(fs::path(out_dir) / "summary.txt");
    summary << report.summary() << '\n';
  }
  std::cout << report.summary() << '\n';
  if (report.abort_reason) return 1;
  return report.manual_interventions == 0 ? 0 : 2;
}

// ---- detect ---------------------------------------------------------------

std::vector<fs::path> expand_inputs(const std::vector<std::string>& inputs) {
  std::vector<fs::path> files;
  for (const auto& in : inputs) {
    if (fs::is_directory(in)) {
      std::vector<fs::path> found;
      for (const auto& entry : fs::directory_iterator(in))
        if (entry.is_regular_file() && image_io::has_image_extension(entry.path())) found.push_back(entry.path());
      std::sort(found.begin(), found.end());
      files.insert(files.end(), found.begin(), found.end());
    } else {
      files.emplace_back(in);
    }
  }
  return files;
}

vision::Roi parse_roi(const std::string& text) {
  std::istringstream ss(text);
  vision::Roi roi;
  char c1 = 0, c2 = 0, c3 = 0;
  if (!(ss >> roi.x >> c1 >> roi.y >> c2 >> roi.w >> c3 >> roi.h) || c1 != ',' || c2 != ',' || c3 != ',')
    throw Failure("--roi expects x,y,w,h");
  return roi;
}

int cmd_detect(const Settings& settings, const std::vector<std::string>& inputs,
               const std::string& roi_text, bool premasked) {
  const vision::Roi roi = roi_text.empty() ? settings.roi : parse_roi(roi_text);
  const auto files = expand_inputs(inputs);
  std::vector<vision::Frame> frames;
  frames.reserve(files.size());
  for (const auto& f : files) frames.push_back(image_io::read_image(f));

  std::vector<vision::DetectionResult> results;
  if (premasked) {
    for (const auto& f : frames) results.push_back(vision::detect_premasked(f, roi, settings.detector));
  } else {
    results = vision::detect_batch(frames, roi, settings.detector);
  }
  bool all_capped = true;
  for (std::size_t i = 0; i < files.size(); ++i) {
    std::cout << files[i].string() << '\t' << (results[i].capped ? "capped" : "not_capped") << '\t'
              << results[i].total_area << '\n';
    all_capped = all_capped && results[i].capped;
  }
  return all_capped ? 0 : 2;
}

// ---- analyze --------------------------------------------------------------

int cmd_analyze(const std::string& csv_path, const std::string& out_dir) {
  std::ifstream in(csv_path);
  if (!in) throw Failure("cannot open " + csv_path);
  const auto records = sealing::ingest_csv(in);
  const auto report = sealing::report(records);
  const std::string text = sealing::render_text(report);
  std::cout << text;
  if (!out_dir.empty()) {
    fs::create_directories(out_dir);
    auto txt = open_out(fs::path(out_dir) / "report.txt");
    txt << text;
    auto csv = open_out(fs::path(out_dir) / "report.csv");
    sealing::render_csv(csv, report);
  }
  return 0;
}

// ---- seal -----------------------------------------------------------------

int cmd_seal(const Settings& settings, const std::string& replay_path, int repeats,
             const std::string& out_dir) {
  const auto catalog = sealing::standard_solvents();
  SimulatedBench bench(settings.machine);
  workflow::EvaporationModel model = workflow::EvaporationModel::benchmark_defaults();
  std::vector<workflow::BatchPlan> plans;

  if (!replay_path.empty()) {
    std::ifstream in(replay_path);
    if (!in) throw Failure("cannot open " + replay_path);
    const auto records = sealing::ingest_csv(in);
    model = workflow::EvaporationModel::replay(records, catalog);
    std::map<std::pair<sealing::Method, std::string>, int> samples;
    for (const auto& r : records) {
      auto& count = samples[{r.method, r.solvent}];
      count = std::max(count, r.sample_index);
      const auto& solvent = sealing::lookup_solvent(catalog, r.solvent);
      if (r.time_h == 0.0)
        bench.set_tare(workflow::vial_id_for(r.method, r.solvent, r.sample_index),
                       r.gross_g - solvent.liquid_weight);
    }
    for (const auto& [key, count] : samples) {
      workflow::BatchPlan plan;
      plan.method = key.first;
      plan.solvent = sealing::lookup_solvent(catalog, key.second);
      plan.repeats = count;
      plans.push_back(plan);
    }
  } else {
    for (auto method : {sealing::Method::CappingMachine, sealing::Method::Manual, sealing::Method::Chemspeed})
      for (const char* solvent : {"water", "ethanol", "acetone"}) {
        workflow::BatchPlan plan;
        plan.method = method;
        plan.solvent = sealing::lookup_solvent(catalog, solvent);
        plan.repeats = repeats;
        plans.push_back(plan);
      }
  }

  const auto run = workflow::run_sealing_experiment(plans, bench.clients(), model);
  fs::create_directories(out_dir);
  auto weights = open_out(fs::path(out_dir) / "weights.csv");
  sealing::write_csv(weights, run.records);
  auto events = open_out(fs::path(out_dir) / "events.jsonl");
  workflow::write_events_jsonl(events, run.events);
  int vials = 0;
  for (const auto& p : plans) vials += p.repeats;
  std::cout << run.records.size() << " records for " << vials << " vials written to "
            << (fs::path(out_dir) / "weights.csv").string() << '\n';
  return 0;
}

// ---- manual ---------------------------------------------------------------

json to_json(const machine::MachineState& s) {
  json j = {{"holder_position", s.holder_position},
            {"feeder_count", s.feeder_count},
            {"lane", s.lane == machine::Lane::Capping ? "capping" : "uncapping"},
            {"vial_capped", s.vial_capped},
            {"loose_cap", s.loose_cap},
            {"estop", s.estop}};
  if (s.vial) {
    j["vial"] = {{"id", s.vial->id},
                 {"thread_count", s.vial->thread_count},
                 {"orientation", s.vial->orientation},
                 {"defective", s.vial->defective}};
  } else {
    j["vial"] = nullptr;
  }
  return j;
}

machine::MachineState from_json(const json& j, const machine::MachineConfig& config) {
  machine::MachineState s = machine::initial_state(config);
  s.holder_position = j.at("holder_position").get<double>();
  s.feeder_count = j.at("feeder_count").get<int>();
  s.lane = j.at("lane").get<std::string>() == "uncapping" ? machine::Lane::Uncapping : machine::Lane::Capping;
  s.vial_capped = j.at("vial_capped").get<bool>();
  s.loose_cap = j.at("loose_cap").get<bool>();
  s.estop = j.at("estop").get<bool>();
  if (!j.at("vial").is_null()) {
    const auto& v = j.at("vial");
    s.vial = machine::VialSpec{v.at("id").get<std::string>(), v.at("thread_count").get<int>(),
                               v.at("orientation").get<double>(), v.at("defective").get<bool>()};
  }
  s = machine::refresh_sensors(s, config);
  machine::validate_state(s, config);
  return s;
}

int cmd_manual(const Settings& settings, std::string verb, const std::string& state_path,
               const std::string& device, const std::string& load_vial) {
  std::transform(verb.begin(), verb.end(), verb.begin(), [](unsigned char c) { return std::toupper(c); });
  const protocol::Command cmd = protocol::parse_command(verb + "\n");

  protocol::Response response;
  if (!device.empty()) {
    std::fstream port(device, std::ios::in | std::ios::out | std::ios::binary);
    if (!port) throw Failure("cannot open " + device);
    StreamTransport transport(port, port);
    response = CapperClient(transport).execute(cmd);
  } else {
    machine::MachineState state = machine::initial_state(settings.machine);
    if (!state_path.empty() && fs::exists(state_path)) {
      std::ifstream in(state_path);
      try {
        state = from_json(json::parse(in), settings.machine);
      } catch (const json::exception& e) {
        throw Failure(state_path + ": " + e.what());
      }
    }
    if (!load_vial.empty()) state = machine::load_vial(state, settings.machine, machine::make_vial(load_vial));
    SimulatedController controller(settings.machine, state);
    response = controller.handle(cmd);
    if (!state_path.empty()) {
      auto out = open_out(state_path);
      out << to_json(controller.state()).dump(2) << '\n';
    }
  }
  std::cout << protocol::encode_response(response);
  return response.kind == protocol::Response::Kind::Err ? 1 : 0;
}

// ---- simulate -------------------------------------------------------------

int cmd_simulate(const Settings& settings, std::string verb, double duration, double period,
                 bool with_vial) {
  std::transform(verb.begin(), verb.end(), verb.begin(), [](unsigned char c) { return std::toupper(c); });
  SimulatedController controller(settings.machine);
  if (with_vial) {
    auto& s = controller.mutable_state();
    s = machine::load_vial(s, settings.machine, machine::make_vial("sim-1"));
  }
  auto print = [&] {
    std::cout << protocol::encode_response(protocol::Response::snapshot(protocol::snapshot(controller.state())));
  };
  print();
  if (!verb.empty()) {
    if (auto immediate = controller.submit(protocol::parse_command(verb + "\n")))
      std::cout << protocol::encode_response(*immediate);
  }
  const double dt = settings.machine.tick;
  const long steps_per_print = std::max(1L, std::lround(period / dt));
  const long steps = std::lround(duration / dt);
  for (long i = 1; i <= steps; ++i) {
    if (auto done = controller.tick(dt)) std::cout << protocol::encode_response(*done);
    if (i % steps_per_print == 0) print();
  }
  return 0;
}

// ---- corpus ---------------------------------------------------------------

int cmd_corpus(int n, std::uint64_t seed, double noise, const std::string& out_dir, const std::string& format) {
  if (format != "png" && format != "ppm") throw Failure("--format must be png or ppm");
  fs::create_directories(out_dir);
  auto labels = open_out(fs::path(out_dir) / "labels.csv");
  labels << "file,capped,exposed_threads\n";
  synthetic::CorpusGenerator gen(seed, noise);
  for (int i = 0; i < n; ++i) {
    const auto sample = gen.next();
    char name[32];
    std::snprintf(name, sizeof name, "frame_%04d.%s", i, format.c_str());
    image_io::write_image(fs::path(out_dir) / name, sample.frame);
    labels << name << ',' << (sample.capped ? 1 : 0) << ',' << sample.exposed_threads << '\n';
  }
  std::cout << n << " frames written to " << out_dir << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Vial capping station: simulator, trial runner, cap detector and sealing analyzer"};
  app.require_subcommand(1);

  std::string config_path;
  app.add_option("--config", config_path, "Settings file (key = value)")->envname("CAPLAB_CONFIG");

  auto* trial = app.add_subcommand("trial", "Run the capping/uncapping trial on the simulated station");
  int trial_n = 100;
  std::string vials_path, trial_out;
  std::vector<int> defects;
  trial->add_option("--n", trial_n, "Iterations")->check(CLI::NonNegativeNumber);
  trial->add_option("--vials", vials_path, "CSV of id,thread_count,orientation_deg");
  trial->add_option("--defect-at", defects, "1-based iterations whose vial has a missing thread")->delimiter(',');
  trial->add_option("--out", trial_out, "Directory for events.jsonl and summary.txt");

  auto* detect = app.add_subcommand("detect", "Classify images as capped or not capped");
  std::vector<std::string> inputs;
  std::string roi_text;
  bool premasked = false;
  detect->add_option("paths", inputs, "Image files or directories");
  detect->add_option("--roi", roi_text, "x,y,w,h");
  detect->add_flag("--premasked", premasked, "Inputs are already masked; threshold the gray level");

  auto* analyze = app.add_subcommand("analyze", "Sealing report from a weight-log CSV");
  std::string csv_path, analyze_out;
  analyze->add_option("csv", csv_path, "Weight log")->required();
  analyze->add_option("--out", analyze_out, "Directory for report.txt and report.csv");

  auto* seal = app.add_subcommand("seal", "Simulate the sealing experiment and write its weight log");
  std::string replay_path, seal_out = "seal_out";
  int repeats = 4;
  seal->add_option("--replay", replay_path, "Fit per-vial rates to the endpoints of this weight log");
  seal->add_option("--repeats", repeats, "Vials per method and solvent")->check(CLI::PositiveNumber);
  seal->add_option("--out", seal_out, "Output directory");

  auto* manual = app.add_subcommand("manual", "Send one command to the machine and print the reply");
  std::string verb, state_path, device, load;
  manual->add_option("verb", verb, "cap|uncap|home|feed|status|estop|reset")->required();
  manual->add_option("--state", state_path, "JSON file that carries the simulated machine between calls");
  manual->add_option("--device", device, "Serial device to talk to instead of the simulator");
  manual->add_option("--load-vial", load, "Place a vial with this id in the holder first");

  auto* simulate = app.add_subcommand("simulate", "Free-run the machine and print STATE lines");
  std::string sim_verb;
  double duration = 10.0, period = 1.0;
  bool with_vial = false;
  simulate->add_option("--command", sim_verb, "Verb to submit at t=0");
  simulate->add_option("--duration", duration, "Seconds of simulated time")->check(CLI::NonNegativeNumber);
  simulate->add_option("--period", period, "Seconds between STATE lines")->check(CLI::PositiveNumber);
  simulate->add_flag("--vial", with_vial, "Start with a vial in the holder");

  auto* corpus = app.add_subcommand("corpus", "Write labeled synthetic camera frames");
  int corpus_n = 100;
  std::uint64_t seed = 1;
  double noise = 0.02;
  std::string corpus_out = "corpus", format = "png";
  corpus->add_option("--n", corpus_n)->check(CLI::NonNegativeNumber);
  corpus->add_option("--seed", seed);
  corpus->add_option("--noise", noise, "Maximum salt-and-pepper fraction")->check(CLI::Range(0.0, 1.0));
  corpus->add_option("--out", corpus_out);
  corpus->add_option("--format", format, "png or ppm");

  auto* show = app.add_subcommand("config", "Print the effective settings");

  CLI11_PARSE(app, argc, argv);

  try {
    if (!config_path.empty() && !fs::exists(config_path)) throw Failure("config file not found: " + config_path);
    const Settings settings = settings_from(config_path);
    if (*trial) return cmd_trial(settings, trial_n, vials_path, defects, trial_out);
    if (*detect) return cmd_detect(settings, inputs, roi_text, premasked);
    if (*analyze) return cmd_analyze(csv_path, analyze_out);
    if (*seal) return cmd_seal(settings, replay_path, repeats, seal_out);
    if (*manual) return cmd_manual(settings, verb, state_path, device, load);
    if (*simulate) return cmd_simulate(settings, sim_verb, duration, period, with_vial);
    if (*corpus) return cmd_corpus(corpus_n, seed, noise, corpus_out, format);
    if (*show) {
      write_settings(std::cout, settings);
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "caplab: " << e.what() << '\n';
    return 1;
  }
  return 1;
}
