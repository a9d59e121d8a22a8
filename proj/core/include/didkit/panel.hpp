#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace didkit {

/// Balanced group-by-period panel of cell means. The single source of truth
/// for every estimator: outcomes Y, treatments D, and cell sizes N over a
/// rectangular G x T grid, plus the planner's discount rate.
///
/// Group indices g are 0-based. Period arguments t are 1-based (1..T), so
/// estimator code can index cells the way the formulas are written; the
/// integer labels in `periods` are only used for I/O.
struct Panel {
  std::vector<std::string> groups;    // size G, in first-appearance order
  std::vector<std::int64_t> periods;  // size T, consecutive integers, ascending
  double discount = 1.0;              // beta in (0, 1]
  double treatment_tolerance = 0.0;   // equality slack for real-coded doses

  int group_count() const { return static_cast<int>(groups.size()); }
  int period_count() const { return static_cast<int>(periods.size()); }

  double outcome(int g, int t) const { return outcome_[cell(g, t)]; }
  double treatment(int g, int t) const { return treatment_[cell(g, t)]; }
  double cell_size(int g, int t) const { return cell_size_[cell(g, t)]; }

  void set_outcome(int g, int t, double v) { outcome_[cell(g, t)] = v; }
  void set_treatment(int g, int t, double v) { treatment_[cell(g, t)] = v; }
  void set_cell_size(int g, int t, double v) { cell_size_[cell(g, t)] = v; }

  /// True when two doses are equal under the panel's treatment tolerance.
  bool same_dose(double a, double b) const;

  /// Enforces the data-model invariants: rectangular storage, positive cell
  /// sizes, discount in (0, 1], consecutive periods, finite outcomes.
  /// Throws validation_error.
  void validate() const;

  std::size_t cell(int g, int t) const {
    return static_cast<std::size_t>(g) * periods.size() +
           static_cast<std::size_t>(t - 1);
  }

  std::vector<double> outcome_;    // row-major G x T
  std::vector<double> treatment_;  // row-major G x T
  std::vector<double> cell_size_;  // row-major G x T
};

/// Builds a panel from row-major G x T arrays. Group names default to
/// "g1".."gG" and period labels to 1..T. Cell sizes default to 1.
Panel make_panel(int n_groups, int n_periods, std::vector<double> outcome,
                 std::vector<double> treatment,
                 std::vector<double> cell_size = {}, double discount = 1.0);

/// Maps CSV column names to panel fields. An empty weight name means no
/// cell-size column: sizes come from row counts within each (g, t) cell.
struct ColumnMap {
  std::string group = "group";
  std::string time = "time";
  std::string outcome = "outcome";
  std::string treatment = "treatment";
  std::string weight;
};

/// Reads a UTF-8 CSV with a header row into a validated panel.
///
/// Rows sharing a (group, period) cell are collapsed to weighted cell means
/// with cell size equal to the total row weight (row count when no weight
/// column); their treatments must agree, otherwise the design is not sharp
/// and ingestion fails naming the cell. Unbalanced panels and non-consecutive
/// period labels are hard errors.
Panel ingest_csv(const std::string& path, const ColumnMap& columns = {},
                 double discount = 1.0, double treatment_tolerance = 0.0);

/// Splits one CSV record, honoring double quotes. Exposed for table readers.
std::vector<std::string> split_csv_line(const std::string& line);

/// Shortest round-trip decimal representation of a double.
std::string format_double(double v);

/// Parses a double, rejecting trailing garbage. Throws validation_error.
double parse_double(const std::string& s, const std::string& context);

}  // namespace didkit
