#pragma once

// Gravimetric sealing analysis. Weight loss is expressed relative to the
// dispensed liquid weight (density x volume), not the gross vial weight.
// Group averages are the mean percent loss over the three-day run, with
// per-day = 3-day / 3 and per-hour = 3-day / 72.

#include <iosfwd>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace caplab::sealing {

enum class Method { CappingMachine, Manual, Chemspeed };

std::string_view method_token(Method m);   // capping_machine | manual | chemspeed
std::string_view method_label(Method m);   // human-readable
std::optional<Method> parse_method(std::string_view token);

enum class AnalysisErrc {
  ParseError,
  DuplicateRecord,
  UnknownSolvent,
  EmptyGroup,
  InsufficientRecords,
  NegativeRate,
};

class AnalysisError : public std::runtime_error {
 public:
  AnalysisError(AnalysisErrc code, const std::string& what, long line = 0, int column = 0)
      : std::runtime_error(what), code_(code), line_(line), column_(column) {}
  AnalysisErrc code() const noexcept { return code_; }
  long line() const noexcept { return line_; }
  int column() const noexcept { return column_; }

 private:
  AnalysisErrc code_;
  long line_;
  int column_;
};

struct SolventInfo {
  std::string name;
  double density = 0.0;        // kg/m^3
  double volume = 0.0;         // mL
  double liquid_weight = 0.0;  // g
};

SolventInfo make_solvent(std::string name, double density_kg_m3, double volume_ml);

using SolventCatalog = std::map<std::string, SolventInfo, std::less<>>;

// Water 997, ethanol 789, acetone 784 kg/m^3 at the given fill volume.
SolventCatalog standard_solvents(double volume_ml = 10.0);

// Throws AnalysisError(UnknownSolvent).
const SolventInfo& lookup_solvent(const SolventCatalog& catalog, std::string_view name);

struct WeightRecord {
  std::string vial_id;
  Method method = Method::CappingMachine;
  std::string solvent;
  int sample_index = 0;
  double time_h = 0.0;
  double gross_g = 0.0;

  bool operator==(const WeightRecord&) const = default;
};

// Sorts by vial id, then time.
void sort_records(std::vector<WeightRecord>& records);

inline constexpr std::string_view kCsvHeader = "vial_id,method,solvent,sample_index,time_h,gross_g";

// Parses the weight-log CSV. Throws AnalysisError(ParseError) with the line
// and 1-based column of the offending field, or DuplicateRecord on a repeated
// (vial_id, time_h). Returns records sorted by vial then time.
std::vector<WeightRecord> ingest_csv(std::istream& in);

void write_csv(std::ostream& out, const std::vector<WeightRecord>& records);

struct SampleStats {
  double initial = 0.0;   // g
  double final = 0.0;     // g
  double loss_mg = 0.0;
  double loss_pct = 0.0;  // % of liquid weight
  bool negative = false;  // final heavier than initial (balance drift)
};

SampleStats sample_stats(double initial_g, double final_g, const SolventInfo& solvent);

struct GroupStats {
  double avg_3day_pct = 0.0;
  double avg_per_day_pct = 0.0;
  double avg_per_hour_pct = 0.0;
};

// Throws AnalysisError(EmptyGroup).
GroupStats group_stats(const std::vector<SampleStats>& samples);

// Mean of the per-day averages. Throws AnalysisError(EmptyGroup).
double method_average(const std::vector<GroupStats>& groups);

// Reference per-day figures quoted for each method alongside the number of
// decimals they were quoted with.
struct ReferenceFigure {
  double per_day_pct;
  int decimals;
};
std::optional<ReferenceFigure> reference_per_day(Method m);

struct SampleRow {
  std::string vial_id;
  Method method = Method::CappingMachine;
  std::string solvent;
  int sample_index = 0;
  double liquid_weight = 0.0;
  double duration_h = 0.0;
  double final_time_h = 0.0;
  SampleStats stats;
};

struct GroupRow {
  Method method = Method::CappingMachine;
  std::string solvent;
  double density = 0.0;
  double liquid_weight = 0.0;
  std::vector<SampleRow> samples;
  GroupStats stats;
};

struct MethodRow {
  Method method = Method::CappingMachine;
  double per_day_pct = 0.0;
  std::optional<ReferenceFigure> reference;
  bool discrepancy = false;  // recomputed value disagrees with the reference
};

struct BenchmarkReport {
  std::vector<GroupRow> groups;  // method order, then water, ethanol, acetone, others
  std::vector<MethodRow> methods;
  std::vector<std::string> notes;
};

// Per-sample stats from each vial's first and last record, grouped by
// (method, solvent). Throws InsufficientRecords when there are no records or a
// vial has fewer than two, UnknownSolvent for solvents missing from the
// catalog.
BenchmarkReport report(const std::vector<WeightRecord>& records,
                       const SolventCatalog& catalog = standard_solvents());

// Aligned text tables, one per method, followed by the method averages and notes.
std::string render_text(const BenchmarkReport& report);

// Per-sample rows: the weight-log columns of the final record extended with
// computed columns.
void render_csv(std::ostream& out, const BenchmarkReport& report);

}  // namespace caplab::sealing
