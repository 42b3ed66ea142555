#include "caplab/sealing.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <istream>
#include <ostream>
#include <set>
#include <sstream>
#include <tuple>

namespace caplab::sealing {

std::string_view method_token(Method m) {
  switch (m) {
    case Method::CappingMachine: return "capping_machine";
    case Method::Manual: return "manual";
    case Method::Chemspeed: return "chemspeed";
  }
  return "";
}

std::string_view method_label(Method m) {
  switch (m) {
    case Method::CappingMachine: return "Capping machine";
    case Method::Manual: return "Manual capping";
    case Method::Chemspeed: return "Chemspeed";
  }
  return "";
}

std::optional<Method> parse_method(std::string_view token) {
  for (Method m : {Method::CappingMachine, Method::Manual, Method::Chemspeed})
    if (token == method_token(m)) return m;
  return std::nullopt;
}

SolventInfo make_solvent(std::string name, double density_kg_m3, double volume_ml) {
  return {std::move(name), density_kg_m3, volume_ml, density_kg_m3 * volume_ml * 1e-3};
}

SolventCatalog standard_solvents(double volume_ml) {
  SolventCatalog c;
  for (auto [name, density] : {std::pair{"water", 997.0}, {"ethanol", 789.0}, {"acetone", 784.0}})
    c.emplace(name, make_solvent(name, density, volume_ml));
  return c;
}

const SolventInfo& lookup_solvent(const SolventCatalog& catalog, std::string_view name) {
  auto it = catalog.find(name);
  if (it == catalog.end())
    throw AnalysisError(AnalysisErrc::UnknownSolvent, "unknown solvent '" + std::string(name) + "'");
  return it->second;
}

void sort_records(std::vector<WeightRecord>& records) {
  std::sort(records.begin(), records.end(), [](const WeightRecord& a, const WeightRecord& b) {
    return std::tie(a.vial_id, a.time_h) < std::tie(b.vial_id, b.time_h);
  });
}

namespace {

std::string format_fixed(double v, int decimals) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
  return buf;
}

// Shortest representation that reads back to the same double.
std::string format_number(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, end);
}

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    const std::size_t comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
}

[[noreturn]] void parse_fail(long line, int column, const std::string& what) {
  std::ostringstream msg;
  msg << "line " << line << ", column " << column << ": " << what;
  throw AnalysisError(AnalysisErrc::ParseError, msg.str(), line, column);
}

template <typename T>
bool parse_full(std::string_view text, T& value) {
  if (text.empty()) return false;
  const char* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, value);
  return ec == std::errc() && ptr == end;
}

int solvent_rank(std::string_view name) {
  if (name == "water") return 0;
  if (name == "ethanol") return 1;
  if (name == "acetone") return 2;
  return 3;
}

std::string solvent_title(std::string_view name) {
  std::string s(name);
  if (!s.empty() && s[0] >= 'a' && s[0] <= 'z') s[0] = static_cast<char>(s[0] - 'a' + 'A');
  return s;
}

}  // namespace

std::vector<WeightRecord> ingest_csv(std::istream& in) {
  std::vector<WeightRecord> records;
  std::string raw;
  long line_no = 0;
  bool header_seen = false;
  std::set<std::pair<std::string, double>> seen;
  struct Identity {
    Method method;
    std::string solvent;
    int sample_index;
  };
  std::map<std::string, Identity> identity;

  while (std::getline(in, raw)) {
    ++line_no;
    std::string_view line = raw;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (!header_seen) {
      if (line.substr(0, 3) == "\xEF\xBB\xBF") line.remove_prefix(3);
      if (line != kCsvHeader) parse_fail(line_no, 1, "expected header '" + std::string(kCsvHeader) + "'");
      header_seen = true;
      continue;
    }
    if (line.empty()) continue;

    const auto f = split_fields(line);
    if (f.size() != 6)
      parse_fail(line_no, static_cast<int>(std::min<std::size_t>(f.size(), 7)),
                 "expected 6 fields, found " + std::to_string(f.size()));

    WeightRecord r;
    if (f[0].empty()) parse_fail(line_no, 1, "empty vial_id");
    r.vial_id = std::string(f[0]);
    const auto method = parse_method(f[1]);
    if (!method) parse_fail(line_no, 2, "method must be capping_machine, manual or chemspeed");
    r.method = *method;
    if (f[2].empty()) parse_fail(line_no, 3, "empty solvent");
    r.solvent = std::string(f[2]);
    if (!parse_full(f[3], r.sample_index) || r.sample_index < 0)
      parse_fail(line_no, 4, "sample_index must be a non-negative integer");
    if (!parse_full(f[4], r.time_h) || !std::isfinite(r.time_h) || r.time_h < 0.0)
      parse_fail(line_no, 5, "time_h must be a number >= 0");
    if (!parse_full(f[5], r.gross_g) || !std::isfinite(r.gross_g) || r.gross_g <= 0.0)
      parse_fail(line_no, 6, "gross_g must be a number > 0");

    if (!seen.emplace(r.vial_id, r.time_h).second) {
      std::ostringstream msg;
      msg << "line " << line_no << ": duplicate record for vial '" << r.vial_id << "' at "
          << format_number(r.time_h) << " h";
      throw AnalysisError(AnalysisErrc::DuplicateRecord, msg.str(), line_no, 5);
    }
    auto [it, inserted] = identity.try_emplace(r.vial_id, Identity{r.method, r.solvent, r.sample_index});
    if (!inserted && (it->second.method != r.method || it->second.solvent != r.solvent ||
                      it->second.sample_index != r.sample_index))
      parse_fail(line_no, 2, "vial '" + r.vial_id + "' changes method, solvent or sample_index");
    records.push_back(std::move(r));
  }
  if (!header_seen && line_no > 0) parse_fail(1, 1, "missing header");
  sort_records(records);
  return records;
}

void write_csv(std::ostream& out, const std::vector<WeightRecord>& records) {
  out << kCsvHeader << '\n';
  for (const auto& r : records) {
    out << r.vial_id << ',' << method_token(r.method) << ',' << r.solvent << ',' << r.sample_index
        << ',' << format_number(r.time_h) << ',' << format_number(r.gross_g) << '\n';
  }
}

SampleStats sample_stats(double initial_g, double final_g, const SolventInfo& solvent) {
  SampleStats s;
  s.initial = initial_g;
  s.final = final_g;
  s.loss_mg = (initial_g - final_g) * 1000.0;
  s.loss_pct = s.loss_mg / (solvent.liquid_weight * 1000.0) * 100.0;
  s.negative = s.loss_mg < 0.0;
  return s;
}

GroupStats group_stats(const std::vector<SampleStats>& samples) {
  if (samples.empty()) throw AnalysisError(AnalysisErrc::EmptyGroup, "no samples in group");
  double sum = 0.0;
  for (const auto& s : samples) sum += s.loss_pct;
  GroupStats g;
  g.avg_3day_pct = sum / static_cast<double>(samples.size());
  g.avg_per_day_pct = g.avg_3day_pct / 3.0;
  g.avg_per_hour_pct = g.avg_3day_pct / 72.0;
  return g;
}

double method_average(const std::vector<GroupStats>& groups) {
  if (groups.empty()) throw AnalysisError(AnalysisErrc::EmptyGroup, "no groups for method");
  double sum = 0.0;
  for (const auto& g : groups) sum += g.avg_per_day_pct;
  return sum / static_cast<double>(groups.size());
}

std::optional<ReferenceFigure> reference_per_day(Method m) {
  switch (m) {
    case Method::CappingMachine: return ReferenceFigure{0.54, 2};
    case Method::Manual: return ReferenceFigure{0.013, 3};
    case Method::Chemspeed: return ReferenceFigure{0.0078, 4};
  }
  return std::nullopt;
}

BenchmarkReport report(const std::vector<WeightRecord>& input, const SolventCatalog& catalog) {
  if (input.empty())
    throw AnalysisError(AnalysisErrc::InsufficientRecords, "no weight records to analyse");

  std::vector<WeightRecord> records = input;
  sort_records(records);

  std::map<std::tuple<Method, int, std::string>, GroupRow> groups;
  for (std::size_t i = 0; i < records.size();) {
    std::size_t j = i;
    while (j < records.size() && records[j].vial_id == records[i].vial_id) ++j;
    const WeightRecord& first = records[i];
    const WeightRecord& last = records[j - 1];
    if (j - i < 2)
      throw AnalysisError(AnalysisErrc::InsufficientRecords,
                          "vial '" + first.vial_id + "' needs at least two weight records");
    const SolventInfo& solvent = lookup_solvent(catalog, first.solvent);

    SampleRow row;
    row.vial_id = first.vial_id;
    row.method = first.method;
    row.solvent = first.solvent;
    row.sample_index = first.sample_index;
    row.liquid_weight = solvent.liquid_weight;
    row.duration_h = last.time_h - first.time_h;
    row.final_time_h = last.time_h;
    row.stats = sample_stats(first.gross_g, last.gross_g, solvent);

    auto key = std::make_tuple(first.method, solvent_rank(first.solvent), first.solvent);
    auto [it, inserted] = groups.try_emplace(key);
    if (inserted) {
      it->second.method = first.method;
      it->second.solvent = first.solvent;
      it->second.density = solvent.density;
      it->second.liquid_weight = solvent.liquid_weight;
    }
    it->second.samples.push_back(std::move(row));
    i = j;
  }

  BenchmarkReport out;
  for (auto& [key, group] : groups) {
    std::sort(group.samples.begin(), group.samples.end(), [](const SampleRow& a, const SampleRow& b) {
      return std::tie(a.sample_index, a.vial_id) < std::tie(b.sample_index, b.vial_id);
    });
    std::vector<SampleStats> stats;
    for (const auto& s : group.samples) {
      stats.push_back(s.stats);
      if (s.stats.negative)
        out.notes.push_back("vial " + s.vial_id + " gained weight (" +
                            format_fixed(s.stats.loss_mg, 1) + " mg); kept in the averages");
      if (std::abs(s.duration_h - 72.0) > 1e-9)
        out.notes.push_back("vial " + s.vial_id + " spans " + format_number(s.duration_h) +
                            " h; per-day and per-hour columns assume 72 h");
    }
    group.stats = group_stats(stats);
    out.groups.push_back(std::move(group));
  }

  for (Method m : {Method::CappingMachine, Method::Manual, Method::Chemspeed}) {
    std::vector<GroupStats> stats;
    std::set<std::string> solvents;
    for (const auto& g : out.groups) {
      if (g.method != m) continue;
      stats.push_back(g.stats);
      solvents.insert(g.solvent);
    }
    if (stats.empty()) continue;
    MethodRow row;
    row.method = m;
    row.per_day_pct = method_average(stats);
    if (solvents == std::set<std::string>{"acetone", "ethanol", "water"}) {
      row.reference = reference_per_day(m);
      if (row.reference) {
        // One unit in the last quoted decimal covers both rounding and truncation.
        const double unit = std::pow(10.0, -row.reference->decimals);
        row.discrepancy = std::abs(row.per_day_pct - row.reference->per_day_pct) > unit + 1e-12;
      }
    }
    if (row.discrepancy) {
      out.notes.push_back(std::string(method_token(m)) + ": recomputed " +
                          format_fixed(row.per_day_pct, 4) + " %/day disagrees with the reference figure " +
                          format_fixed(row.reference->per_day_pct, row.reference->decimals) + " %/day");
    }
    out.methods.push_back(row);
  }
  return out;
}

std::string render_text(const BenchmarkReport& r) {
  std::ostringstream out;
  char line[256];
  bool first_table = true;
  for (Method m : {Method::CappingMachine, Method::Manual, Method::Chemspeed}) {
    bool any = false;
    for (const auto& g : r.groups) any = any || g.method == m;
    if (!any) continue;
    if (!first_table) out << '\n';
    first_table = false;

    out << method_label(m) << " (" << method_token(m) << ")\n";
    std::snprintf(line, sizeof line, "%-18s %11s %11s %9s %9s %10s %9s %11s %11s %12s\n",
                  "Solvent (sample)", "Initial g", "Final g", "Density", "Liquid g", "Loss mg",
                  "Loss %", "3 days %", "Per day %", "Per hour %");
    out << line;
    for (const auto& g : r.groups) {
      if (g.method != m) continue;
      bool first_row = true;
      for (const auto& s : g.samples) {
        const std::string name = solvent_title(g.solvent) + " (" + std::to_string(s.sample_index) + ")" +
                                 (s.stats.negative ? "*" : "");
        std::string avg3, avgd, avgh;
        if (first_row) {
          avg3 = format_fixed(g.stats.avg_3day_pct, 4);
          avgd = format_fixed(g.stats.avg_per_day_pct, 4);
          avgh = format_fixed(g.stats.avg_per_hour_pct, 5);
        }
        std::snprintf(line, sizeof line, "%-18s %11.4f %11.4f %9.0f %9.2f %10.1f %9.4f %11s %11s %12s\n",
                      name.c_str(), s.stats.initial, s.stats.final, g.density, g.liquid_weight,
                      s.stats.loss_mg, s.stats.loss_pct, avg3.c_str(), avgd.c_str(), avgh.c_str());
        out << line;
        first_row = false;
      }
    }
  }

  if (!r.methods.empty()) {
    out << "\nMethod averages (per day, % of liquid weight)\n";
    for (const auto& m : r.methods) {
      std::string ref;
      if (m.reference)
        ref = "reference " + format_fixed(m.reference->per_day_pct, m.reference->decimals) +
              (m.discrepancy ? "  DISCREPANCY" : "");
      std::snprintf(line, sizeof line, "%-16s %9.4f  %s\n", std::string(method_token(m.method)).c_str(),
                    m.per_day_pct, ref.c_str());
      out << line;
    }
  }
  if (!r.notes.empty()) {
    out << "\nNotes\n";
    for (const auto& n : r.notes) out << "- " << n << '\n';
  }
  return out.str();
}

void render_csv(std::ostream& out, const BenchmarkReport& r) {
  out << kCsvHeader << ",initial_g,final_g,liquid_g,loss_mg,loss_pct,negative\n";
  for (const auto& g : r.groups) {
    for (const auto& s : g.samples) {
      out << s.vial_id << ',' << method_token(s.method) << ',' << s.solvent << ',' << s.sample_index
          << ',' << format_number(s.final_time_h) << ',' << format_number(s.stats.final) << ','
          << format_number(s.stats.initial) << ',' << format_number(s.stats.final) << ','
          << format_number(s.liquid_weight) << ',' << format_fixed(s.stats.loss_mg, 4) << ','
          << format_fixed(s.stats.loss_pct, 6) << ',' << (s.stats.negative ? 1 : 0) << '\n';
    }
  }
}

}  // namespace caplab::sealing
