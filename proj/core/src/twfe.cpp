#include "didkit/twfe.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>

#include "didkit/design.hpp"
#include "didkit/errors.hpp"
#include "didkit/event_study.hpp"

namespace didkit {

namespace {

constexpr double kSumTol = 1e-10;

struct Sample {
  std::vector<int> g, t;       // per row
  std::vector<double> w;       // cell weights
  std::vector<double> y;       // outcome
  std::vector<std::vector<double>> x;  // per regressor, per row
};

Sample collect_sample(const Panel& panel, const std::vector<double>& outcome,
                      const std::vector<RegressorColumn>& regressors,
                      const CellFilter& include) {
  Sample s;
  const int G = panel.group_count();
  const int T = panel.period_count();
  s.x.resize(regressors.size());
  for (int g = 0; g < G; ++g) {
    for (int t = 1; t <= T; ++t) {
      if (include && !include(g, t)) continue;
      std::size_t cell = panel.cell(g, t);
      s.g.push_back(g);
      s.t.push_back(t);
      s.w.push_back(panel.cell_size(g, t));
      s.y.push_back(outcome[cell]);
      for (std::size_t j = 0; j < regressors.size(); ++j) {
        s.x[j].push_back(regressors[j].values[cell]);
      }
    }
  }
  return s;
}

// Absorbs group and period fixed effects by alternating weighted demeaning
// within the sample. Two passes suffice on balanced equal-weight layouts;
// unbalanced subsamples iterate to convergence.
void demean_two_way(const Sample& s, std::vector<double>& v, int n_groups,
                    int n_periods) {
  const std::size_t n = v.size();
  std::vector<double> gsum(n_groups), gw(n_groups), tsum(n_periods + 1),
      tw(n_periods + 1);
  double scale = 1.0;
  for (double x : v) scale = std::max(scale, std::fabs(x));

  for (int pass = 0; pass < 1000; ++pass) {
    double change = 0.0;

    std::fill(gsum.begin(), gsum.end(), 0.0);
    std::fill(gw.begin(), gw.end(), 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      gsum[s.g[i]] += s.w[i] * v[i];
      gw[s.g[i]] += s.w[i];
    }
    for (std::size_t i = 0; i < n; ++i) {
      double m = gsum[s.g[i]] / gw[s.g[i]];
      v[i] -= m;
      change = std::max(change, std::fabs(m));
    }

    std::fill(tsum.begin(), tsum.end(), 0.0);
    std::fill(tw.begin(), tw.end(), 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      tsum[s.t[i]] += s.w[i] * v[i];
      tw[s.t[i]] += s.w[i];
    }
    for (std::size_t i = 0; i < n; ++i) {
      double m = tsum[s.t[i]] / tw[s.t[i]];
      v[i] -= m;
      change = std::max(change, std::fabs(m));
    }

    if (change <= 1e-13 * scale) break;
  }
}

}  // namespace

FeFit fe_regression(const Panel& panel, const std::vector<double>& outcome,
                    const std::vector<RegressorColumn>& regressors,
                    const CellFilter& include) {
  Sample s = collect_sample(panel, outcome, regressors, include);
  const std::size_t n = s.y.size();
  const std::size_t p = regressors.size();
  if (n == 0) throw estimation_error("fixed-effects regression has an empty sample");

  demean_two_way(s, s.y, panel.group_count(), panel.period_count());
  for (auto& col : s.x) demean_two_way(s, col, panel.group_count(), panel.period_count());

  FeFit fit;
  fit.cell_group = s.g;
  fit.cell_period = s.t;
  for (const auto& r : regressors) fit.names.push_back(r.name);

  if (p == 0) {
    fit.residuals = s.y;
    return fit;
  }

  Eigen::MatrixXd X(n, p);
  Eigen::VectorXd Y(n);
  for (std::size_t i = 0; i < n; ++i) {
    double sw = std::sqrt(s.w[i]);
    Y(i) = sw * s.y[i];
    for (std::size_t j = 0; j < p; ++j) X(i, j) = sw * s.x[j][i];
  }

  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(X);
  qr.setThreshold(1e-10);
  if (qr.rank() < static_cast<Eigen::Index>(p)) {
    std::string bad;
    const auto& perm = qr.colsPermutation().indices();
    for (Eigen::Index j = qr.rank(); j < perm.size(); ++j) {
      if (!bad.empty()) bad += ", ";
      bad += regressors[perm(j)].name;
    }
    throw validation_error("rank-deficient regression: collinear columns {" + bad +
                           "} after absorbing fixed effects");
  }
  Eigen::VectorXd beta = qr.solve(Y);

  fit.coefficients.assign(beta.data(), beta.data() + p);
  fit.residuals.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    double fitted = 0.0;
    for (std::size_t j = 0; j < p; ++j) fitted += s.x[j][i] * beta(j);
    fit.residuals[i] = s.y[i] - fitted;
  }
  return fit;
}

std::string twfe_spec_name(TwfeSpec spec) {
  switch (spec) {
    case TwfeSpec::intensity_x_period: return "prop1";
    case TwfeSpec::distributed_lag: return "prop3";
    case TwfeSpec::local_projection: return "prop4";
  }
  return "unknown";
}

WeightSummary summarize_weights(const std::vector<WeightCell>& cells) {
  WeightSummary s;
  for (const auto& c : cells) {
    s.total += c.weight;
    s.min_weight = std::min(s.min_weight, c.weight);
    if (c.weight > 0) {
      ++s.n_positive;
      s.sum_positive += c.weight;
    } else if (c.weight < 0) {
      ++s.n_negative;
      s.sum_negative += c.weight;
    }
  }
  if (cells.empty()) s.min_weight = 0.0;
  return s;
}

namespace {

void require_time_constant_sizes(const Panel& panel, const char* what) {
  for (int g = 0; g < panel.group_count(); ++g) {
    for (int t = 2; t <= panel.period_count(); ++t) {
      if (panel.cell_size(g, t) != panel.cell_size(g, 1)) {
        throw validation_error(std::string(what) +
                               " requires time-constant cell sizes; group " +
                               panel.groups[g] + " varies over time");
      }
    }
  }
}

}  // namespace

IntensityDesign detect_intensity_design(const Panel& panel) {
  const int T = panel.period_count();
  std::vector<int> first = first_switch_periods(panel);
  int common = 0;
  for (int g = 0; g < panel.group_count(); ++g) {
    if (first[g] > T) continue;
    if (common == 0) common = first[g];
    if (first[g] != common) {
      throw validation_error(
          "not an intensity x period design: switch periods differ across groups");
    }
  }
  if (common == 0) {
    throw validation_error("not an intensity x period design: no group ever switches");
  }
  IntensityDesign d;
  d.switch_period = common;
  d.intensity.resize(panel.group_count());
  for (int g = 0; g < panel.group_count(); ++g) {
    for (int t = 1; t < common; ++t) {
      if (panel.treatment(g, t) != 0.0) {
        throw validation_error("not an intensity x period design: group " +
                               panel.groups[g] + " treated before the switch period");
      }
    }
    double level = panel.treatment(g, common);
    for (int t = common; t <= T; ++t) {
      if (panel.treatment(g, t) != level) {
        throw validation_error("not an intensity x period design: group " +
                               panel.groups[g] + " changes dose after switching");
      }
    }
    d.intensity[g] = level;
  }
  return d;
}

StaggeredIntensityDesign detect_staggered_intensity(const Panel& panel) {
  const int T = panel.period_count();
  StaggeredIntensityDesign d;
  d.first_switch = first_switch_periods(panel);
  d.intensity.assign(panel.group_count(), 0.0);
  for (int g = 0; g < panel.group_count(); ++g) {
    for (int t = 1; t < d.first_switch[g] && t <= T; ++t) {
      if (panel.treatment(g, t) != 0.0) {
        throw validation_error("not a staggered intensity design: group " +
                               panel.groups[g] + " starts treated");
      }
    }
    if (d.first_switch[g] > T) continue;
    double level = panel.treatment(g, d.first_switch[g]);
    for (int t = d.first_switch[g]; t <= T; ++t) {
      if (panel.treatment(g, t) != level) {
        throw validation_error("not a staggered intensity design: group " +
                               panel.groups[g] + " changes dose after switching");
      }
    }
    d.intensity[g] = level;
  }
  return d;
}

std::map<int, double> intensity_event_study(const Panel& panel) {
  IntensityDesign d = detect_intensity_design(panel);
  require_time_constant_sizes(panel, "the intensity x period regression");
  const int T = panel.period_count();
  const int ref = d.switch_period - 1;

  std::vector<RegressorColumn> cols;
  std::vector<int> col_period;
  for (int t = 1; t <= T; ++t) {
    if (t == ref) continue;
    RegressorColumn col;
    col.name = "intensity_x_t" + std::to_string(t);
    col.values.assign(panel.outcome_.size(), 0.0);
    for (int g = 0; g < panel.group_count(); ++g) {
      col.values[panel.cell(g, t)] = d.intensity[g];
    }
    cols.push_back(std::move(col));
    col_period.push_back(t);
  }
  FeFit fit = fe_regression(panel, panel.outcome_, cols);
  std::map<int, double> out;
  for (std::size_t j = 0; j < col_period.size(); ++j) {
    out[col_period[j]] = fit.coefficients[j];
  }
  return out;
}

WeightReport intensity_weights(const Panel& panel,
                               std::optional<int> coefficient_period) {
  IntensityDesign d = detect_intensity_design(panel);
  require_time_constant_sizes(panel, "the intensity x period decomposition");
  const int G = panel.group_count();

  double mass = 0.0, dose_mass = 0.0;
  for (int g = 0; g < G; ++g) {
    mass += panel.cell_size(g, 1);
    dose_mass += panel.cell_size(g, 1) * d.intensity[g];
  }
  const double mean_intensity = dose_mass / mass;

  double denom = 0.0;
  for (int g = 0; g < G; ++g) {
    denom += panel.cell_size(g, 1) * d.intensity[g] * (d.intensity[g] - mean_intensity);
  }
  if (std::fabs(denom) <= 1e-12) {
    throw validation_error("no intensity variation: decomposition weights undefined");
  }

  WeightReport report;
  report.spec = TwfeSpec::intensity_x_period;
  report.parameter = d.switch_period;

  LagWeights fam;
  int period = coefficient_period.value_or(d.switch_period);
  if (period < 1 || period > panel.period_count() || period == d.switch_period - 1) {
    throw validation_error("coefficient period " + std::to_string(period) +
                           " is the omitted reference or out of range");
  }
  fam.target = period;
  fam.coefficient = intensity_event_study(panel).at(period);

  std::vector<std::string> flagged;
  for (int g = 0; g < G; ++g) {
    if (d.intensity[g] == 0.0) continue;
    WeightCell cell;
    cell.g = g;
    cell.t = 0;
    cell.weight =
        panel.cell_size(g, 1) * d.intensity[g] * (d.intensity[g] - mean_intensity) / denom;
    fam.weights.push_back(cell);
    bool between_up = mean_intensity > 0 && d.intensity[g] > 0 && d.intensity[g] < mean_intensity;
    bool between_down = mean_intensity < 0 && d.intensity[g] < 0 && d.intensity[g] > mean_intensity;
    if (between_up || between_down) flagged.push_back(panel.groups[g]);
  }
  fam.term_summaries[period] = summarize_weights(fam.weights);
  report.families.push_back(std::move(fam));

  report.notes.push_back("mean intensity " + format_double(mean_intensity));
  if (!flagged.empty()) {
    std::string msg = "negative-weight condition: intensity strictly between 0 and the "
                      "mean for {";
    for (std::size_t i = 0; i < flagged.size(); ++i) {
      if (i) msg += ", ";
      msg += flagged[i];
    }
    msg += "}";
    report.notes.push_back(msg);
  }
  return report;
}

namespace {

// Treatment lagged by `lag` as a full cell grid; periods before the panel are
// treated as dose zero.
std::vector<double> lagged_treatment(const Panel& panel, int lag) {
  std::vector<double> v(panel.outcome_.size(), 0.0);
  for (int g = 0; g < panel.group_count(); ++g) {
    for (int t = 1; t <= panel.period_count(); ++t) {
      if (t - lag >= 1) v[panel.cell(g, t)] = panel.treatment(g, t - lag);
    }
  }
  return v;
}

}  // namespace

std::vector<double> distributed_lag_coefficients(const Panel& panel, int lag_count) {
  if (lag_count < 0) throw validation_error("lag count must be >= 0");
  if (lag_count + 1 > panel.period_count()) {
    throw validation_error("lag count " + std::to_string(lag_count) +
                           " exceeds the available pre-sample (T = " +
                           std::to_string(panel.period_count()) + ")");
  }
  std::vector<RegressorColumn> cols;
  for (int l = 0; l <= lag_count; ++l) {
    cols.push_back({"treatment_lag" + std::to_string(l), lagged_treatment(panel, l)});
  }
  CellFilter keep = [&](int, int t) { return t >= lag_count + 1; };
  FeFit fit = fe_regression(panel, panel.outcome_, cols, keep);
  return fit.coefficients;
}

WeightReport distributed_lag_weights(const Panel& panel, int lag_count) {
  if (lag_count < 0) throw validation_error("lag count must be >= 0");
  if (lag_count + 1 > panel.period_count()) {
    throw validation_error("lag count " + std::to_string(lag_count) +
                           " exceeds the available pre-sample (T = " +
                           std::to_string(panel.period_count()) + ")");
  }
  for (int g = 0; g < panel.group_count(); ++g) {
    for (int t = 1; t <= panel.period_count(); ++t) {
      double d = panel.treatment(g, t);
      if (d != 0.0 && d != 1.0) {
        throw validation_error(
            "the distributed-lag decomposition requires a binary treatment");
      }
    }
  }

  std::vector<std::vector<double>> lag_grid;
  for (int l = 0; l <= lag_count; ++l) lag_grid.push_back(lagged_treatment(panel, l));
  CellFilter keep = [&](int, int t) { return t >= lag_count + 1; };

  std::vector<double> coefs = distributed_lag_coefficients(panel, lag_count);

  WeightReport report;
  report.spec = TwfeSpec::distributed_lag;
  report.parameter = lag_count;

  for (int target = 0; target <= lag_count; ++target) {
    std::vector<RegressorColumn> others;
    for (int l = 0; l <= lag_count; ++l) {
      if (l == target) continue;
      others.push_back({"treatment_lag" + std::to_string(l), lag_grid[l]});
    }
    FeFit fit = fe_regression(panel, lag_grid[target], others, keep);

    double denom = 0.0;
    for (std::size_t i = 0; i < fit.residuals.size(); ++i) {
      int g = fit.cell_group[i];
      int t = fit.cell_period[i];
      denom += panel.cell_size(g, t) * fit.residuals[i] *
               lag_grid[target][panel.cell(g, t)];
    }
    if (std::fabs(denom) <= 1e-12) {
      throw validation_error("rank-deficient decomposition: lag " +
                             std::to_string(target) +
                             " has no residual variation (treatment constant?)");
    }

    LagWeights fam;
    fam.target = target;
    fam.coefficient = coefs[target];
    for (std::size_t i = 0; i < fit.residuals.size(); ++i) {
      int g = fit.cell_group[i];
      int t = fit.cell_period[i];
      WeightCell cell;
      cell.g = g;
      cell.t = t;
      cell.weight = panel.cell_size(g, t) * fit.residuals[i] / denom;
      fam.weights.push_back(cell);
    }
    for (int other = 0; other <= lag_count; ++other) {
      std::vector<WeightCell> subset;
      for (const auto& cell : fam.weights) {
        if (lag_grid[other][panel.cell(cell.g, cell.t)] != 0.0) subset.push_back(cell);
      }
      fam.term_summaries[other] = summarize_weights(subset);
    }
    report.families.push_back(std::move(fam));
  }
  return report;
}

WeightReport local_projection_weights(const Panel& panel, int horizon) {
  if (horizon < 0 || horizon >= panel.period_count()) {
    throw validation_error("horizon out of range for the local projection");
  }
  StaggeredIntensityDesign d = detect_staggered_intensity(panel);
  require_time_constant_sizes(panel, "the local-projection decomposition");
  const int G = panel.group_count();
  const int T = panel.period_count();
  const int t_max = T - horizon;

  // Sample averages of the treatment over the subsample t <= T - horizon.
  std::vector<double> avg_by_group(G, 0.0);
  std::vector<double> avg_by_period(T + 1, 0.0);
  double grand = 0.0, grand_mass = 0.0;
  for (int g = 0; g < G; ++g) {
    double m = 0.0, s = 0.0;
    for (int t = 1; t <= t_max; ++t) {
      m += panel.cell_size(g, t);
      s += panel.cell_size(g, t) * panel.treatment(g, t);
    }
    avg_by_group[g] = s / m;
    grand += s;
    grand_mass += m;
  }
  for (int t = 1; t <= t_max; ++t) {
    double m = 0.0, s = 0.0;
    for (int g = 0; g < G; ++g) {
      m += panel.cell_size(g, t);
      s += panel.cell_size(g, t) * panel.treatment(g, t);
    }
    avg_by_period[t] = s / m;
  }
  grand /= grand_mass;

  double denom = 0.0;
  for (int g = 0; g < G; ++g) {
    if (d.intensity[g] == 0.0) continue;
    for (int t = 1; t <= t_max; ++t) {
      if (t < d.first_switch[g]) continue;
      denom += panel.cell_size(g, t) * d.intensity[g] *
               (d.intensity[g] - avg_by_group[g] - avg_by_period[t] + grand);
    }
  }
  if (std::fabs(denom) <= 1e-12) {
    throw validation_error(
        "local-projection regression undefined: no treated cells in the subsample");
  }

  WeightReport report;
  report.spec = TwfeSpec::local_projection;
  report.parameter = horizon;

  LagWeights fam;
  fam.target = horizon;

  // Coefficient: outcome led by `horizon`, regressed on the current dose.
  std::vector<double> led(panel.outcome_.size(), 0.0);
  for (int g = 0; g < G; ++g) {
    for (int t = 1; t <= t_max; ++t) {
      led[panel.cell(g, t)] = panel.outcome(g, t + horizon);
    }
  }
  RegressorColumn dose{"treatment", panel.treatment_};
  CellFilter keep = [&](int, int t) { return t <= t_max; };
  fam.coefficient = fe_regression(panel, led, {dose}, keep).coefficients[0];

  for (int g = 0; g < G; ++g) {
    if (d.intensity[g] == 0.0) continue;
    for (int t = 1; t <= t_max; ++t) {
      if (t + horizon < d.first_switch[g]) continue;
      double treated_now = t >= d.first_switch[g] ? d.intensity[g] : 0.0;
      WeightCell cell;
      cell.g = g;
      cell.t = t;
      cell.weight = panel.cell_size(g, t) * d.intensity[g] *
                    (treated_now - avg_by_group[g] - avg_by_period[t] + grand) / denom;
      fam.weights.push_back(cell);
    }
  }
  WeightSummary summary = summarize_weights(fam.weights);
  fam.term_summaries[horizon] = summary;
  report.families.push_back(std::move(fam));

  if (horizon >= 1 && std::fabs(summary.total - 1.0) > kSumTol) {
    report.notes.push_back(
        "weights sum to " + format_double(summary.total) +
        ": the coefficient is biased even under constant homogeneous effects");
  }
  bool unit_doses = true;
  bool constant_switch = true;
  int seen = 0;
  for (int g = 0; g < G; ++g) {
    if (d.intensity[g] == 0.0) continue;
    if (d.intensity[g] != 1.0) unit_doses = false;
    if (seen && d.first_switch[g] != seen) constant_switch = false;
    seen = d.first_switch[g];
  }
  if (horizon >= 1) {
    if (unit_doses && !constant_switch) {
      report.notes.push_back("binary staggered with non-constant switch dates: minimum "
                             "weight is negative by construction");
    } else if (constant_switch) {
      report.notes.push_back("switch date constant across treated groups: the "
                             "negative-minimum guarantee does not apply");
    }
  }
  return report;
}

std::map<int, double> implied_event_study(const Panel& panel, int lag_count) {
  std::vector<double> gamma = distributed_lag_coefficients(panel, lag_count);
  DesignStats stats = design_stats(panel);

  std::map<int, double> out;
  for (int l = 0; l <= stats.max_horizon; ++l) {
    double mass = 0.0, value = 0.0;
    for (int g = 0; g < panel.group_count(); ++g) {
      if (!stats.initially_untreated(g)) continue;
      if (stats.first_switch[g] > stats.last_untreated_period - l) continue;
      int t = stats.first_switch[g] + l;
      double m = std::pow(panel.discount, t) * panel.cell_size(g, t);
      double effect = 0.0;
      for (int j = 0; j <= lag_count; ++j) {
        if (t - j >= 1) effect += gamma[j] * panel.treatment(g, t - j);
      }
      mass += m;
      value += m * effect;
    }
    if (mass > 0.0) out[l] = value / mass;
  }
  return out;
}

}  // namespace didkit
