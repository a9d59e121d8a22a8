#include "didkit/panel.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <unordered_map>

#include "didkit/errors.hpp"

namespace didkit {

bool Panel::same_dose(double a, double b) const {
  return std::fabs(a - b) <= treatment_tolerance;
}

void Panel::validate() const {
  const std::size_t n_cells = groups.size() * periods.size();
  if (groups.empty() || periods.empty()) {
    throw validation_error("panel is empty");
  }
  if (outcome_.size() != n_cells || treatment_.size() != n_cells ||
      cell_size_.size() != n_cells) {
    throw validation_error("panel storage is not rectangular");
  }
  if (!(discount > 0.0) || discount > 1.0) {
    throw validation_error("discount must lie in (0, 1]");
  }
  if (treatment_tolerance < 0.0) {
    throw validation_error("treatment tolerance must be >= 0");
  }
  for (std::size_t i = 1; i < periods.size(); ++i) {
    if (periods[i] != periods[i - 1] + 1) {
      throw validation_error("period labels must be consecutive integers; gap between " +
                             std::to_string(periods[i - 1]) + " and " +
                             std::to_string(periods[i]));
    }
  }
  for (int g = 0; g < group_count(); ++g) {
    for (int t = 1; t <= period_count(); ++t) {
      if (!(cell_size(g, t) > 0.0)) {
        throw validation_error("cell size must be positive at (" + groups[g] + "," +
                               std::to_string(periods[t - 1]) + ")");
      }
      if (!std::isfinite(outcome(g, t)) || !std::isfinite(treatment(g, t))) {
        throw validation_error("non-finite value at (" + groups[g] + "," +
                               std::to_string(periods[t - 1]) + ")");
      }
    }
  }
}

Panel make_panel(int n_groups, int n_periods, std::vector<double> outcome,
                 std::vector<double> treatment, std::vector<double> cell_size,
                 double discount) {
  Panel p;
  p.discount = discount;
  p.groups.reserve(n_groups);
  for (int g = 0; g < n_groups; ++g) p.groups.push_back("g" + std::to_string(g + 1));
  p.periods.reserve(n_periods);
  for (int t = 1; t <= n_periods; ++t) p.periods.push_back(t);
  if (cell_size.empty()) {
    cell_size.assign(static_cast<std::size_t>(n_groups) * n_periods, 1.0);
  }
  p.outcome_ = std::move(outcome);
  p.treatment_ = std::move(treatment);
  p.cell_size_ = std::move(cell_size);
  p.validate();
  return p;
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cur.push_back(c);
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  fields.push_back(cur);
  return fields;
}

std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

double parse_double(const std::string& s, const std::string& context) {
  std::string trimmed = s;
  while (!trimmed.empty() && (trimmed.front() == ' ' || trimmed.front() == '\t'))
    trimmed.erase(trimmed.begin());
  while (!trimmed.empty() && (trimmed.back() == ' ' || trimmed.back() == '\t'))
    trimmed.pop_back();
  double v = 0.0;
  auto res = std::from_chars(trimmed.data(), trimmed.data() + trimmed.size(), v);
  if (res.ec != std::errc{} || res.ptr != trimmed.data() + trimmed.size()) {
    throw validation_error("cannot parse number '" + s + "' in " + context);
  }
  return v;
}

namespace {

std::int64_t parse_period(const std::string& s) {
  double v = parse_double(s, "time column");
  double rounded = std::round(v);
  if (std::fabs(v - rounded) > 1e-9) {
    throw validation_error("period label '" + s + "' is not an integer");
  }
  return static_cast<std::int64_t>(rounded);
}

struct CellAccum {
  double weighted_outcome = 0.0;
  double weight = 0.0;
  double treatment = 0.0;
  bool seen = false;
};

}  // namespace

Panel ingest_csv(const std::string& path, const ColumnMap& columns, double discount,
                 double treatment_tolerance) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw validation_error("cannot open input file: " + path);

  std::string header;
  if (!std::getline(in, header)) throw validation_error("empty input file: " + path);
  // Strip a UTF-8 BOM if present.
  if (header.size() >= 3 && header[0] == '\xEF' && header[1] == '\xBB' &&
      header[2] == '\xBF') {
    header.erase(0, 3);
  }
  std::vector<std::string> names = split_csv_line(header);
  auto find_col = [&](const std::string& name, bool required) -> int {
    for (std::size_t i = 0; i < names.size(); ++i) {
      if (names[i] == name) return static_cast<int>(i);
    }
    if (required) {
      throw validation_error("missing required column '" + name + "' in " + path);
    }
    return -1;
  };

  const int gi = find_col(columns.group, true);
  const int ti = find_col(columns.time, true);
  const int yi = find_col(columns.outcome, true);
  const int di = find_col(columns.treatment, true);
  const int wi = columns.weight.empty() ? -1 : find_col(columns.weight, true);

  std::vector<std::string> group_names;
  std::unordered_map<std::string, int> group_index;
  std::vector<std::int64_t> period_labels;
  std::unordered_map<std::int64_t, int> period_index;
  std::map<std::pair<int, int>, CellAccum> cells;

  Panel probe;  // carries the dose tolerance for the in-cell sharpness check
  probe.treatment_tolerance = treatment_tolerance;

  std::string line;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    std::vector<std::string> f = split_csv_line(line);
    int needed = std::max({gi, ti, yi, di, wi});
    if (static_cast<int>(f.size()) <= needed) {
      throw validation_error("line " + std::to_string(line_no) + " of " + path +
                             " has too few fields");
    }
    const std::string& gname = f[gi];
    std::int64_t period = parse_period(f[ti]);
    double y = parse_double(f[yi], "outcome column, line " + std::to_string(line_no));
    double d = parse_double(f[di], "treatment column, line " + std::to_string(line_no));
    double w = 1.0;
    if (wi >= 0) {
      w = parse_double(f[wi], "weight column, line " + std::to_string(line_no));
      if (!(w > 0.0)) {
        throw validation_error("weight must be positive on line " +
                               std::to_string(line_no));
      }
    }

    auto [git, ginserted] = group_index.try_emplace(gname, (int)group_names.size());
    if (ginserted) group_names.push_back(gname);
    auto [pit, pinserted] = period_index.try_emplace(period, (int)period_labels.size());
    if (pinserted) period_labels.push_back(period);

    CellAccum& cell = cells[{git->second, pit->second}];
    if (cell.seen && !probe.same_dose(cell.treatment, d)) {
      throw validation_error("sharp design violated at (" + gname + "," +
                             std::to_string(period) + "): treatment varies within the cell");
    }
    cell.treatment = cell.seen ? cell.treatment : d;
    cell.weighted_outcome += w * y;
    cell.weight += w;
    cell.seen = true;
  }

  if (group_names.empty()) throw validation_error("no data rows in " + path);

  // Periods sorted ascending; remap indices accordingly.
  std::vector<std::int64_t> sorted_periods = period_labels;
  std::sort(sorted_periods.begin(), sorted_periods.end());
  std::unordered_map<std::int64_t, int> sorted_index;
  for (std::size_t i = 0; i < sorted_periods.size(); ++i) {
    sorted_index[sorted_periods[i]] = static_cast<int>(i);
  }
  for (std::size_t i = 1; i < sorted_periods.size(); ++i) {
    if (sorted_periods[i] != sorted_periods[i - 1] + 1) {
      throw validation_error(
          "period labels must be consecutive integers; gap between " +
          std::to_string(sorted_periods[i - 1]) + " and " +
          std::to_string(sorted_periods[i]));
    }
  }

  const int G = static_cast<int>(group_names.size());
  const int T = static_cast<int>(sorted_periods.size());
  Panel p;
  p.groups = group_names;
  p.periods = sorted_periods;
  p.discount = discount;
  p.treatment_tolerance = treatment_tolerance;
  p.outcome_.assign(static_cast<std::size_t>(G) * T, 0.0);
  p.treatment_.assign(static_cast<std::size_t>(G) * T, 0.0);
  p.cell_size_.assign(static_cast<std::size_t>(G) * T, 0.0);

  std::vector<bool> filled(static_cast<std::size_t>(G) * T, false);
  for (const auto& [key, acc] : cells) {
    int g = key.first;
    int t = sorted_index[period_labels[key.second]] + 1;
    p.set_outcome(g, t, acc.weighted_outcome / acc.weight);
    p.set_treatment(g, t, acc.treatment);
    p.set_cell_size(g, t, acc.weight);
    filled[p.cell(g, t)] = true;
  }

  // Balanced panel required: report the missing cells, capped to keep the
  // message readable.
  std::string missing;
  int missing_count = 0;
  for (int g = 0; g < G; ++g) {
    for (int t = 1; t <= T; ++t) {
      if (!filled[p.cell(g, t)]) {
        ++missing_count;
        if (missing_count <= 8) {
          missing += " (" + p.groups[g] + "," + std::to_string(p.periods[t - 1]) + ")";
        }
      }
    }
  }
  if (missing_count > 0) {
    std::string more =
        missing_count > 8 ? " and " + std::to_string(missing_count - 8) + " more" : "";
    throw validation_error("unbalanced panel: missing cells" + missing + more);
  }

  p.validate();
  return p;
}

}  // namespace didkit
