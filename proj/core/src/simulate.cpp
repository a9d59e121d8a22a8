#include "didkit/simulate.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "didkit/design.hpp"
#include "didkit/errors.hpp"
#include "didkit/event_study.hpp"
#include "didkit/inference.hpp"
#include "didkit/parallel.hpp"
#include "didkit/placebo.hpp"
#include "didkit/rng.hpp"
#include "didkit/stats_math.hpp"
#include "didkit/twfe.hpp"

#include "json.hpp"

namespace didkit {

using nlohmann::json;

AssignmentRule parse_assignment_rule(const std::string& name) {
  if (name == "staggered_binary") return AssignmentRule::staggered_binary;
  if (name == "nonstaggered_binary") return AssignmentRule::nonstaggered_binary;
  if (name == "intensity_x_period") return AssignmentRule::intensity_x_period;
  if (name == "local_projection_staggered")
    return AssignmentRule::local_projection_staggered;
  throw validation_error("unknown assignment rule '" + name + "'");
}

double EffectModel::kernel(int g, int n_groups, int dose_period,
                           int outcome_period) const {
  const int gap = outcome_period - dose_period;
  if (gap < 0) return 0.0;
  switch (kind) {
    case Kind::none:
      return 0.0;
    case Kind::cumulative: {
      double u = (static_cast<double>(g) + 0.5) / static_cast<double>(n_groups) - 0.5;
      double tau_g = tau * (1.0 + group_spread * u);
      return tau_g * (1.0 + time_ramp * static_cast<double>(gap));
    }
    case Kind::distributed_lag:
      return gap < static_cast<int>(lag_coefficients.size()) ? lag_coefficients[gap]
                                                             : 0.0;
  }
  return 0.0;
}

bool EffectModel::monotone(int n_groups, int n_periods) const {
  if (kind == Kind::none) return true;
  for (int g = 0; g < n_groups; ++g) {
    for (int s = 1; s <= n_periods; ++s) {
      for (int t = s; t <= n_periods; ++t) {
        if (kernel(g, n_groups, s, t) < 0.0) return false;
      }
    }
  }
  return true;
}

void SimConfig::validate() const {
  if (n_groups < 2 || n_periods < 2) {
    throw validation_error("simulation needs at least 2 groups and 2 periods");
  }
  if (baseline.noise_sd < 0.0) throw validation_error("noise sd must be >= 0");
  if (std::fabs(baseline.ar1) >= 1.0) throw validation_error("|ar1| must be < 1");
  if (replications < 1) throw validation_error("replications must be >= 1");
  if (!(discount > 0.0) || discount > 1.0) {
    throw validation_error("discount must lie in (0, 1]");
  }
  if (!(alpha > 0.0) || !(alpha < 1.0)) throw validation_error("alpha must be in (0,1)");
}

namespace {

// --- treatment assignment -------------------------------------------------

std::vector<double> draw_design(const SimConfig& cfg, Rng& rng) {
  const int G = cfg.n_groups;
  const int T = cfg.n_periods;
  const Assignment& a = cfg.assignment;
  std::vector<double> d(static_cast<std::size_t>(G) * T, 0.0);
  auto at = [&](int g, int t) -> double& {
    return d[static_cast<std::size_t>(g) * T + (t - 1)];
  };

  switch (a.rule) {
    case AssignmentRule::staggered_binary: {
      int lo = std::max(2, a.min_switch);
      for (int g = 0; g < G; ++g) {
        if (rng.uniform01() < a.initially_treated_share) {
          for (int t = 1; t <= T; ++t) at(g, t) = 1.0;
          continue;
        }
        if (rng.uniform01() < a.never_share) continue;
        int f = lo + static_cast<int>(rng.uniform_int(T - lo + 1));
        for (int t = f; t <= T; ++t) at(g, t) = 1.0;
      }
      break;
    }
    case AssignmentRule::nonstaggered_binary: {
      int lo = std::max(2, a.min_switch);
      for (int g = 0; g < G; ++g) {
        double start = rng.uniform01() < a.initially_treated_share ? 1.0 : 0.0;
        at(g, 1) = start;
        bool never = rng.uniform01() < a.never_share;
        int f = never ? T + 1 : lo + static_cast<int>(rng.uniform_int(T - lo + 1));
        double cur = start;
        for (int t = 2; t <= T; ++t) {
          if (t == f) {
            cur = 1.0 - cur;
          } else if (t > f && a.revert_prob > 0.0 && rng.uniform01() < a.revert_prob) {
            cur = 1.0 - cur;
          }
          at(g, t) = cur;
        }
      }
      break;
    }
    case AssignmentRule::intensity_x_period: {
      for (int g = 0; g < G; ++g) {
        double dose =
            a.intensities[rng.uniform_int(static_cast<std::uint64_t>(a.intensities.size()))];
        for (int t = a.switch_period; t <= T; ++t) at(g, t) = dose;
      }
      break;
    }
    case AssignmentRule::local_projection_staggered: {
      int lo = std::max(2, a.min_switch);
      for (int g = 0; g < G; ++g) {
        if (rng.uniform01() < a.never_share) continue;
        double dose =
            a.intensities[rng.uniform_int(static_cast<std::uint64_t>(a.intensities.size()))];
        if (dose == 0.0) continue;
        int f = lo + static_cast<int>(rng.uniform_int(T - lo + 1));
        for (int t = f; t <= T; ++t) at(g, t) = dose;
      }
      break;
    }
  }

  // Keep the initially-untreated arm usable: force one early switcher and one
  // never-switcher when a finite draw happens to be pathological.
  auto usable = [&]() {
    bool early = false, never = false;
    for (int g = 0; g < G; ++g) {
      if (at(g, 1) != 0.0) continue;
      bool switched = false;
      for (int t = 2; t <= T; ++t) {
        if (at(g, t) != at(g, t - 1)) {
          switched = true;
          break;
        }
      }
      (switched ? early : never) = true;
    }
    return early && never;
  };
  if (!usable()) {
    double dose = 1.0;
    for (double v : cfg.assignment.intensities) {
      if (v != 0.0) {
        dose = v;
        break;
      }
    }
    int f = a.rule == AssignmentRule::intensity_x_period ? a.switch_period
                                                         : std::max(2, a.min_switch);
    for (int t = 1; t <= T; ++t) {
      at(0, t) = t >= f ? dose : 0.0;
      at(1, t) = 0.0;
    }
  }
  return d;
}

// Effect of the realized dose path at (g, t), relative to holding the
// period-1 dose forever; the status-quo path contributes through the same
// linear kernel.
double realized_effect(const SimConfig& cfg, const std::vector<double>& doses, int g,
                       int t, int T) {
  double e = 0.0;
  double base = doses[static_cast<std::size_t>(g) * T];
  for (int s = 1; s <= t; ++s) {
    double actual = doses[static_cast<std::size_t>(g) * T + (s - 1)];
    if (actual == base) continue;
    e += cfg.effect.kernel(g, cfg.n_groups, s, t) * (actual - base);
  }
  return e;
}

struct DesignDraw {
  std::vector<double> doses;
  std::vector<double> group_effects;   // a_g
  std::vector<double> period_effects;  // b_t
};

DesignDraw draw_design_and_baseline(const SimConfig& cfg, int replicate) {
  std::uint64_t stream = cfg.redraw_design ? 0xD0000000ull + replicate : 0xD0ull;
  Rng rng(cfg.seed, stream);
  DesignDraw out;
  out.doses = draw_design(cfg, rng);
  out.group_effects.resize(cfg.n_groups);
  out.period_effects.resize(cfg.n_periods);
  for (auto& a : out.group_effects) a = rng.normal(0.0, cfg.baseline.group_sd);
  for (auto& b : out.period_effects) b = rng.normal(0.0, cfg.baseline.period_sd);
  return out;
}

PanelTruth compute_truth(const SimConfig& cfg, const Panel& panel) {
  DesignStats stats = design_stats(panel);
  const int T = cfg.n_periods;
  PanelTruth truth;
  truth.max_horizon = stats.max_horizon;
  truth.group_effect.assign(cfg.n_groups, {});
  truth.horizon_effect.assign(stats.max_horizon + 1, 0.0);

  for (int g = 0; g < cfg.n_groups; ++g) {
    if (!stats.initially_untreated(g)) continue;
    if (stats.first_switch[g] > stats.last_untreated_period) continue;
    int top = stats.last_untreated_period - stats.first_switch[g];
    truth.group_effect[g].resize(top + 1);
    for (int l = 0; l <= top; ++l) {
      truth.group_effect[g][l] =
          realized_effect(cfg, panel.treatment_, g, stats.first_switch[g] + l, T);
    }
  }

  double num = 0.0, den = 0.0;
  for (int l = 0; l <= stats.max_horizon; ++l) {
    double mass = 0.0, value = 0.0, dose = 0.0;
    for (int g = 0; g < cfg.n_groups; ++g) {
      if (!stats.initially_untreated(g)) continue;
      if (stats.first_switch[g] > stats.last_untreated_period - l) continue;
      int t = stats.first_switch[g] + l;
      double m = std::pow(panel.discount, t) * panel.cell_size(g, t);
      mass += m;
      value += m * truth.group_effect[g][l];
      dose += m * panel.treatment(g, t);
    }
    truth.horizon_effect[l] = value / mass;
    num += value;
    den += dose;
  }
  truth.aggregate = num / den;
  return truth;
}

}  // namespace

GeneratedPanel generate(const SimConfig& cfg, int replicate) {
  cfg.validate();
  const int G = cfg.n_groups;
  const int T = cfg.n_periods;

  DesignDraw design = draw_design_and_baseline(cfg, replicate);

  Rng noise(cfg.seed, 0x1000ull + static_cast<std::uint64_t>(replicate));
  std::vector<double> outcome(static_cast<std::size_t>(G) * T, 0.0);

  // Switcher-specific trend breaks parallel trends when requested.
  std::vector<double> trend(G, 0.0);
  for (int g = 0; g < G; ++g) {
    bool switches = false;
    for (int t = 2; t <= T; ++t) {
      if (design.doses[static_cast<std::size_t>(g) * T + (t - 1)] !=
          design.doses[static_cast<std::size_t>(g) * T + (t - 2)]) {
        switches = true;
        break;
      }
    }
    if (switches) trend[g] = cfg.baseline.trend_slope;
  }

  const double rho = cfg.baseline.ar1;
  const double innov_sd =
      cfg.baseline.noise_sd * (rho != 0.0 ? std::sqrt(1.0 - rho * rho) : 1.0);
  for (int g = 0; g < G; ++g) {
    double eps = noise.normal(0.0, cfg.baseline.noise_sd);
    for (int t = 1; t <= T; ++t) {
      if (t > 1) eps = rho * eps + noise.normal(0.0, innov_sd);
      double y0 = design.group_effects[g] + design.period_effects[t - 1] +
                  trend[g] * static_cast<double>(t - 1) + eps;
      outcome[static_cast<std::size_t>(g) * T + (t - 1)] =
          y0 + realized_effect(cfg, design.doses, g, t, T);
    }
  }

  GeneratedPanel out{
      make_panel(G, T, std::move(outcome), design.doses, {}, cfg.discount), {}};
  out.truth = compute_truth(cfg, out.panel);
  return out;
}

namespace {

struct ReplicateRow {
  std::vector<double> horizon;        // estimates, per own horizon
  std::vector<double> horizon_truth;  // matching truths
  double aggregate = 0.0;
  double aggregate_truth = 0.0;
  std::vector<char> horizon_covered;
  char aggregate_covered = 0;
  std::vector<double> placebo;  // at the reference horizon keys; NaN if absent
  char placebo_rejected = 0;
  char has_placebo_test = 0;
  std::vector<double> twfe_coefs;
  std::vector<double> implied_gap;
};

EstimandSummary summarize(const std::vector<double>& truths,
                          const std::vector<double>& draws,
                          const std::vector<char>* covered) {
  EstimandSummary s;
  s.replications = static_cast<int>(draws.size());
  if (draws.empty()) return s;
  s.truth = mean(truths);
  s.mc_mean = mean(draws);
  s.sd = sample_sd(draws);
  s.mc_se = s.sd / std::sqrt(static_cast<double>(draws.size()));
  KahanSum b;
  for (std::size_t i = 0; i < draws.size(); ++i) b.add(draws[i] - truths[i]);
  s.bias = b.value() / static_cast<double>(draws.size());
  if (covered) {
    KahanSum c;
    for (char v : *covered) c.add(v ? 1.0 : 0.0);
    s.coverage = c.value() / static_cast<double>(covered->size());
  }
  return s;
}

void check_assertions(const SimConfig& cfg, SimReport& report) {
  auto fail = [&](const std::string& msg) { report.assertion_failures.push_back(msg); };
  for (const auto& a : cfg.assertions) {
    if (a.kind == "bias_within") {
      for (const auto& [l, s] : report.horizon) {
        if (std::fabs(s.bias) > a.a * s.mc_se) {
          fail("horizon " + std::to_string(l) + ": |bias| " + format_double(std::fabs(s.bias)) +
               " exceeds " + format_double(a.a) + " x mc_se " + format_double(s.mc_se));
        }
      }
      if (std::fabs(report.aggregate.bias) > a.a * report.aggregate.mc_se) {
        fail("aggregate: |bias| exceeds " + format_double(a.a) + " x mc_se");
      }
    } else if (a.kind == "placebo_bias_within") {
      for (const auto& [l, s] : report.placebo) {
        if (std::fabs(s.mc_mean) > a.a * s.mc_se) {
          fail("placebo " + std::to_string(l) + ": |mean| exceeds " +
               format_double(a.a) + " x mc_se");
        }
      }
    } else if (a.kind == "coverage_at_least") {
      for (const auto& [l, s] : report.horizon) {
        if (s.coverage >= 0 && s.coverage < a.a) {
          fail("horizon " + std::to_string(l) + ": coverage " + format_double(s.coverage) +
               " below " + format_double(a.a));
        }
      }
      if (report.aggregate.coverage >= 0 && report.aggregate.coverage < a.a) {
        fail("aggregate: coverage below " + format_double(a.a));
      }
    } else if (a.kind == "placebo_rejection_between") {
      if (report.placebo_rejection_rate < a.a || report.placebo_rejection_rate > a.b) {
        fail("placebo joint rejection rate " + format_double(report.placebo_rejection_rate) +
             " outside [" + format_double(a.a) + ", " + format_double(a.b) + "]");
      }
    } else {
      fail("unknown assertion kind '" + a.kind + "'");
    }
  }
}

}  // namespace

SimReport run_monte_carlo(const SimConfig& cfg) {
  cfg.validate();
  const int R = cfg.replications;

  // The realized design is shared by construction when redraw_design is off;
  // truth and design statistics are then computed once.
  GeneratedPanel first = generate(cfg, 0);
  DesignStats stats0 = design_stats(first.panel);
  const int L = stats0.max_horizon;

  PlaceboResult pl0;
  std::vector<int> placebo_keys;
  if (cfg.tabulate_placebos) {
    pl0 = placebo_study_plus(first.panel, stats0);
    for (const auto& [h, e] : pl0.horizons) placebo_keys.push_back(h);
  }

  std::vector<ReplicateRow> rows(R);
  parallel_for(static_cast<std::size_t>(R), [&](std::size_t r) {
    GeneratedPanel gen = generate(cfg, static_cast<int>(r));
    const Panel& panel = gen.panel;
    DesignStats stats = cfg.redraw_design ? design_stats(panel) : stats0;
    ReplicateRow& row = rows[r];

    row.horizon.resize(stats.max_horizon + 1);
    row.horizon_truth = gen.truth.horizon_effect;
    for (int l = 0; l <= stats.max_horizon; ++l) {
      row.horizon[l] = horizon_did(panel, stats, l).first;
    }
    row.aggregate = aggregate_effect(panel, stats);
    row.aggregate_truth = gen.truth.aggregate;

    if (cfg.tabulate_coverage) {
      row.horizon_covered.resize(stats.max_horizon + 1, 0);
      for (int l = 0; l <= stats.max_horizon; ++l) {
        ConfidenceInterval ci = analytic_ci_horizon(panel, stats, l, cfg.alpha);
        double truth = gen.truth.horizon_effect[l];
        row.horizon_covered[l] = truth >= ci.lower && truth <= ci.upper;
      }
      ConfidenceInterval ci = analytic_ci_aggregate(panel, stats, cfg.alpha);
      row.aggregate_covered =
          gen.truth.aggregate >= ci.lower && gen.truth.aggregate <= ci.upper;
    }

    if (cfg.tabulate_placebos) {
      PlaceboResult pl = placebo_study_plus(panel, stats);
      row.placebo.assign(placebo_keys.size(),
                         std::numeric_limits<double>::quiet_NaN());
      for (std::size_t i = 0; i < placebo_keys.size(); ++i) {
        auto it = pl.horizons.find(placebo_keys[i]);
        if (it != pl.horizons.end()) row.placebo[i] = it->second.estimate;
      }
      // Joint test against the cluster-bootstrap covariance of this
      // replicate's own placebo vector.
      std::vector<int> own_keys;
      std::vector<double> own_values;
      for (const auto& [h, e] : pl.horizons) {
        own_keys.push_back(h);
        own_values.push_back(e.estimate);
      }
      if (!own_keys.empty()) {
        BootstrapSpec spec;
        spec.replications = cfg.bootstrap_replications;
        spec.seed = cfg.seed ^ (0x9e3779b97f4a7c15ull * (r + 1));
        spec.threads = 1;
        auto statistic = [&](const Panel& resample) {
          DesignStats s = design_stats(resample);
          PlaceboResult p = placebo_study_plus(resample, s);
          std::vector<double> v(own_keys.size());
          for (std::size_t i = 0; i < own_keys.size(); ++i) {
            auto it = p.horizons.find(own_keys[i]);
            if (it == p.horizons.end()) {
              throw estimation_error("placebo horizon missing in resample");
            }
            v[i] = it->second.estimate;
          }
          return v;
        };
        try {
          BootstrapResult boot = cluster_bootstrap(panel, spec, statistic, cfg.alpha);
          JointTest test = joint_placebo_test(
              own_values, boot.covariance, static_cast<int>(boot.replicates.size()));
          row.placebo_rejected = test.p_value < cfg.alpha;
          row.has_placebo_test = 1;
        } catch (const estimation_error&) {
          row.has_placebo_test = 0;
        }
      }
    }

    if (cfg.twfe_intensity_event_study) {
      std::map<int, double> coefs = intensity_event_study(panel);
      row.twfe_coefs.reserve(coefs.size());
      for (const auto& [t, c] : coefs) row.twfe_coefs.push_back(c);
    }
    if (cfg.twfe_distributed_lags >= 0) {
      std::map<int, double> implied =
          implied_event_study(panel, cfg.twfe_distributed_lags);
      row.implied_gap.resize(stats.max_horizon + 1, 0.0);
      for (int l = 0; l <= stats.max_horizon; ++l) {
        row.implied_gap[l] = implied.at(l) - row.horizon[l];
      }
    }
  });

  SimReport report;
  report.n_groups = cfg.n_groups;
  report.n_periods = cfg.n_periods;
  report.max_horizon = L;
  report.replications = R;

  std::vector<double> draws, truths;
  std::vector<char> covered;
  draws.reserve(R);
  truths.reserve(R);
  covered.reserve(R);
  for (int l = 0; l <= L; ++l) {
    draws.clear();
    truths.clear();
    covered.clear();
    for (int r = 0; r < R; ++r) {
      if (l >= static_cast<int>(rows[r].horizon.size())) continue;
      draws.push_back(rows[r].horizon[l]);
      truths.push_back(rows[r].horizon_truth[l]);
      if (cfg.tabulate_coverage) covered.push_back(rows[r].horizon_covered[l]);
    }
    report.horizon[l] =
        summarize(truths, draws, cfg.tabulate_coverage ? &covered : nullptr);
  }
  draws.clear();
  truths.clear();
  covered.clear();
  for (int r = 0; r < R; ++r) {
    draws.push_back(rows[r].aggregate);
    truths.push_back(rows[r].aggregate_truth);
    if (cfg.tabulate_coverage) covered.push_back(rows[r].aggregate_covered);
  }
  report.aggregate =
      summarize(truths, draws, cfg.tabulate_coverage ? &covered : nullptr);

  if (cfg.tabulate_placebos && !placebo_keys.empty()) {
    for (std::size_t i = 0; i < placebo_keys.size(); ++i) {
      draws.clear();
      for (int r = 0; r < R; ++r) {
        if (i < rows[r].placebo.size() && std::isfinite(rows[r].placebo[i])) {
          draws.push_back(rows[r].placebo[i]);
        }
      }
      truths.assign(draws.size(), 0.0);
      report.placebo[placebo_keys[i]] = summarize(truths, draws, nullptr);
    }
    KahanSum rejected, tests;
    for (int r = 0; r < R; ++r) {
      if (!rows[r].has_placebo_test) continue;
      tests.add(1.0);
      rejected.add(rows[r].placebo_rejected ? 1.0 : 0.0);
    }
    report.placebo_tests = static_cast<int>(tests.value());
    if (report.placebo_tests > 0) {
      report.placebo_rejection_rate = rejected.value() / tests.value();
    }
  }

  if (cfg.twfe_intensity_event_study && !rows.empty() && !rows[0].twfe_coefs.empty()) {
    std::map<int, double> coefs0 = intensity_event_study(first.panel);
    std::size_t j = 0;
    for (const auto& [t, c] : coefs0) {
      draws.clear();
      for (int r = 0; r < R; ++r) {
        if (j < rows[r].twfe_coefs.size()) draws.push_back(rows[r].twfe_coefs[j]);
      }
      truths.assign(draws.size(), 0.0);
      report.twfe_event_study[t] = summarize(truths, draws, nullptr);
      ++j;
    }
  }
  if (cfg.twfe_distributed_lags >= 0) {
    for (int l = 0; l <= L; ++l) {
      draws.clear();
      for (int r = 0; r < R; ++r) {
        if (l < static_cast<int>(rows[r].implied_gap.size())) {
          draws.push_back(rows[r].implied_gap[l]);
        }
      }
      truths.assign(draws.size(), 0.0);
      report.implied_gap[l] = summarize(truths, draws, nullptr);
    }
  }

  check_assertions(cfg, report);
  return report;
}

std::map<int, double> group_time_att_oracle(const Panel& panel) {
  const int G = panel.group_count();
  const int T = panel.period_count();
  if (panel.discount != 1.0) {
    throw validation_error("oracle defined only for undiscounted designs (beta = 1)");
  }
  for (int g = 0; g < G; ++g) {
    double prev = panel.treatment(g, 1);
    for (int t = 1; t <= T; ++t) {
      double d = panel.treatment(g, t);
      if (d != 0.0 && d != 1.0) {
        throw validation_error("oracle defined only for binary treatments");
      }
      if (d < prev) {
        throw validation_error("oracle defined only for staggered (nondecreasing) designs");
      }
      prev = d;
    }
  }

  // Adoption dates, written directly from the dose matrix.
  std::vector<int> adopt(G, T + 1);
  for (int g = 0; g < G; ++g) {
    for (int t = 1; t <= T; ++t) {
      if (panel.treatment(g, t) == 1.0) {
        adopt[g] = t;
        break;
      }
    }
  }

  int last_control = 0;
  for (int g = 0; g < G; ++g) {
    if (adopt[g] >= 2) last_control = std::max(last_control, adopt[g] - 1);
  }

  std::map<int, double> out;
  for (int horizon = 0;; ++horizon) {
    double mass = 0.0, total = 0.0;
    for (int g = 0; g < G; ++g) {
      if (adopt[g] < 2 || adopt[g] + horizon > last_control) continue;
      int t = adopt[g] + horizon;
      double pool = 0.0, pool_change = 0.0;
      for (int h = 0; h < G; ++h) {
        if (adopt[h] <= t) continue;
        pool += panel.cell_size(h, t);
        pool_change += panel.cell_size(h, t) *
                       (panel.outcome(h, t) - panel.outcome(h, adopt[g] - 1));
      }
      if (!(pool > 0.0)) continue;
      double att = panel.outcome(g, t) - panel.outcome(g, adopt[g] - 1) -
                   pool_change / pool;
      mass += panel.cell_size(g, t);
      total += panel.cell_size(g, t) * att;
    }
    if (!(mass > 0.0)) break;
    out[horizon] = total / mass;
  }
  return out;
}

// --- configuration parsing -------------------------------------------------

namespace {

SimConfig config_from_json(const json& j) {
  SimConfig cfg;
  cfg.n_groups = j.value("groups", cfg.n_groups);
  cfg.n_periods = j.value("periods", cfg.n_periods);
  cfg.replications = j.value("replications", cfg.replications);
  cfg.seed = j.value("seed", cfg.seed);
  cfg.discount = j.value("discount", cfg.discount);
  cfg.redraw_design = j.value("redraw_design", cfg.redraw_design);
  cfg.bootstrap_replications = j.value("bootstrap_replications", cfg.bootstrap_replications);
  cfg.alpha = j.value("alpha", cfg.alpha);
  cfg.tabulate_placebos = j.value("tabulate_placebos", cfg.tabulate_placebos);
  cfg.tabulate_coverage = j.value("tabulate_coverage", cfg.tabulate_coverage);

  if (j.contains("assignment")) {
    const json& a = j.at("assignment");
    cfg.assignment.rule = parse_assignment_rule(a.value("rule", "staggered_binary"));
    cfg.assignment.never_share = a.value("never_share", cfg.assignment.never_share);
    cfg.assignment.initially_treated_share =
        a.value("initially_treated_share", cfg.assignment.initially_treated_share);
    cfg.assignment.revert_prob = a.value("revert_prob", cfg.assignment.revert_prob);
    cfg.assignment.min_switch = a.value("min_switch", cfg.assignment.min_switch);
    cfg.assignment.switch_period = a.value("switch_period", cfg.assignment.switch_period);
    if (a.contains("intensities")) {
      cfg.assignment.intensities = a.at("intensities").get<std::vector<double>>();
      if (cfg.assignment.intensities.empty()) {
        throw validation_error("assignment.intensities must not be empty");
      }
    }
  }
  if (j.contains("baseline")) {
    const json& b = j.at("baseline");
    cfg.baseline.group_sd = b.value("group_sd", cfg.baseline.group_sd);
    cfg.baseline.period_sd = b.value("period_sd", cfg.baseline.period_sd);
    cfg.baseline.noise_sd = b.value("noise_sd", cfg.baseline.noise_sd);
    cfg.baseline.ar1 = b.value("ar1", cfg.baseline.ar1);
    cfg.baseline.trend_slope = b.value("trend_slope", cfg.baseline.trend_slope);
  }
  if (j.contains("effect")) {
    const json& e = j.at("effect");
    std::string kind = e.value("kind", "none");
    if (kind == "none") {
      cfg.effect.kind = EffectModel::Kind::none;
    } else if (kind == "cumulative") {
      cfg.effect.kind = EffectModel::Kind::cumulative;
    } else if (kind == "distributed_lag") {
      cfg.effect.kind = EffectModel::Kind::distributed_lag;
    } else {
      throw validation_error("unknown effect kind '" + kind + "'");
    }
    cfg.effect.tau = e.value("tau", cfg.effect.tau);
    cfg.effect.group_spread = e.value("group_spread", cfg.effect.group_spread);
    cfg.effect.time_ramp = e.value("time_ramp", cfg.effect.time_ramp);
    if (e.contains("lags")) {
      // Keys are lag distances; a negative key would let the effect reference
      // future treatments, which the outcome model rules out.
      std::map<int, double> lags;
      for (const auto& [key, value] : e.at("lags").items()) {
        int lag = std::stoi(key);
        if (lag < 0) {
          throw validation_error(
              "effect model references future treatments (lag " + key +
              "): anticipation is not allowed");
        }
        lags[lag] = value.get<double>();
      }
      int top = lags.empty() ? -1 : lags.rbegin()->first;
      cfg.effect.lag_coefficients.assign(top + 1, 0.0);
      for (const auto& [lag, coef] : lags) cfg.effect.lag_coefficients[lag] = coef;
    }
  }
  if (j.contains("twfe")) {
    const json& t = j.at("twfe");
    cfg.twfe_intensity_event_study =
        t.value("intensity_event_study", cfg.twfe_intensity_event_study);
    cfg.twfe_distributed_lags = t.value("distributed_lags", cfg.twfe_distributed_lags);
  }
  if (j.contains("assertions")) {
    for (const json& a : j.at("assertions")) {
      SimAssertion sa;
      sa.kind = a.at("kind").get<std::string>();
      sa.a = a.value("factor", a.value("value", a.value("low", 0.0)));
      sa.b = a.value("high", 0.0);
      cfg.assertions.push_back(sa);
    }
  }
  cfg.validate();
  return cfg;
}

}  // namespace

SimConfig SimConfig::from_json_string(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw validation_error(std::string("invalid simulation config: ") + e.what());
  }
  return config_from_json(j);
}

SimConfig SimConfig::from_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw validation_error("cannot open simulation config: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return from_json_string(ss.str());
}

}  // namespace didkit
