#include "didkit/inference.hpp"

#include <algorithm>
#include <cmath>
#include <optional>

#include "didkit/errors.hpp"
#include "didkit/event_study.hpp"
#include "didkit/parallel.hpp"
#include "didkit/stats_math.hpp"

namespace didkit {

namespace {

// Switcher mass entering horizon `horizon` at calendar period t, undiscounted.
std::vector<double> switcher_mass_by_period(const Panel& panel, const DesignStats& stats,
                                            int horizon) {
  std::vector<double> mass(panel.period_count() + 1, 0.0);
  for (int g = 0; g < panel.group_count(); ++g) {
    if (!stats.initially_untreated(g)) continue;
    int t = stats.first_switch[g] + horizon;
    if (stats.first_switch[g] <= panel.period_count() && t <= panel.period_count()) {
      mass[t] += panel.cell_size(g, t);
    }
  }
  return mass;
}

ConfidenceInterval build_ci(double estimate, const std::vector<double>& terms,
                            const DesignStats& stats, int n_groups, double alpha) {
  const double G = static_cast<double>(n_groups);
  KahanSum ss;
  int carriers = 0;
  for (int g = 0; g < n_groups; ++g) {
    if (!stats.initially_untreated(g)) continue;
    double dev = terms[g] - estimate;
    ss.add(dev * dev);
    if (terms[g] != 0.0) ++carriers;
  }
  ConfidenceInterval ci;
  ci.estimate = estimate;
  ci.level = 1.0 - alpha;
  ci.method = CiMethod::analytic;
  ci.se = std::sqrt(ss.value() / G) / std::sqrt(G);
  ci.degenerate_variance = carriers <= 1;
  double z = normal_quantile(1.0 - alpha / 2.0);
  ci.lower = estimate - z * ci.se;
  ci.upper = estimate + z * ci.se;
  return ci;
}

}  // namespace

std::vector<double> influence_terms(const Panel& panel, const DesignStats& stats,
                                    int horizon) {
  if (horizon < 0 || horizon > stats.max_horizon) {
    throw validation_error("horizon " + std::to_string(horizon) +
                           " out of range: estimable horizons are 0.." +
                           std::to_string(stats.max_horizon));
  }
  const int G = panel.group_count();
  const double scale = static_cast<double>(G) / stats.switcher_mass[horizon];
  std::vector<double> by_period = switcher_mass_by_period(panel, stats, horizon);

  std::vector<double> terms(G, 0.0);
  for (int g = 0; g < G; ++g) {
    if (!stats.initially_untreated(g)) continue;
    KahanSum sum;
    for (int t = horizon + 2; t <= stats.last_untreated_period; ++t) {
      double bracket = 0.0;
      if (stats.first_switch[g] == t - horizon) bracket += 1.0;
      if (stats.first_switch[g] > t) {
        bracket -= by_period[t] / stats.untreated_mass[t - 1];
      }
      if (bracket == 0.0) continue;
      double change = panel.outcome(g, t) - panel.outcome(g, t - horizon - 1);
      sum.add(std::pow(panel.discount, t) * panel.cell_size(g, t) * bracket * change);
    }
    terms[g] = scale * sum.value();
  }
  return terms;
}

InfluenceDecomposition influence_decomposition(const Panel& panel,
                                               const DesignStats& stats) {
  const int G = panel.group_count();
  const int L = stats.max_horizon;
  InfluenceDecomposition d;
  d.horizon_terms.resize(L + 1);
  d.horizon_variance.resize(L + 1, 0.0);

  std::vector<double> first_stage(L + 1, 0.0);
  std::vector<double> estimates(L + 1, 0.0);
  for (int l = 0; l <= L; ++l) {
    d.horizon_terms[l] = influence_terms(panel, stats, l);
    auto [est, fs] = horizon_did(panel, stats, l);
    estimates[l] = est;
    first_stage[l] = fs;
  }

  double denom = 0.0;
  for (int l = 0; l <= L; ++l) denom += stats.horizon_weights[l] * first_stage[l];
  if (std::fabs(denom) <= 1e-12) {
    throw estimation_error("no treatment exposure mass: first-stage denominator is zero");
  }

  d.aggregate_terms.assign(G, 0.0);
  for (int g = 0; g < G; ++g) {
    if (!stats.initially_untreated(g)) continue;
    double num = 0.0;
    for (int l = 0; l <= L; ++l) num += stats.horizon_weights[l] * d.horizon_terms[l][g];
    d.aggregate_terms[g] = num / denom;
  }

  const double Gd = static_cast<double>(G);
  for (int l = 0; l <= L; ++l) {
    KahanSum ss;
    for (int g = 0; g < G; ++g) {
      if (!stats.initially_untreated(g)) continue;
      double dev = d.horizon_terms[l][g] - estimates[l];
      ss.add(dev * dev);
    }
    d.horizon_variance[l] = ss.value() / Gd;
  }
  double aggregate = aggregate_effect(panel, stats);
  KahanSum ss;
  for (int g = 0; g < G; ++g) {
    if (!stats.initially_untreated(g)) continue;
    double dev = d.aggregate_terms[g] - aggregate;
    ss.add(dev * dev);
  }
  d.aggregate_variance = ss.value() / Gd;
  return d;
}

ConfidenceInterval analytic_ci_horizon(const Panel& panel, const DesignStats& stats,
                                       int horizon, double alpha) {
  std::vector<double> terms = influence_terms(panel, stats, horizon);
  double estimate = horizon_did(panel, stats, horizon).first;
  return build_ci(estimate, terms, stats, panel.group_count(), alpha);
}

ConfidenceInterval analytic_ci_aggregate(const Panel& panel, const DesignStats& stats,
                                         double alpha) {
  InfluenceDecomposition d = influence_decomposition(panel, stats);
  double estimate = aggregate_effect(panel, stats);
  return build_ci(estimate, d.aggregate_terms, stats, panel.group_count(), alpha);
}

ConfidenceInterval analytic_ci_trimmed(const Panel& panel, const DesignStats& stats,
                                       int k, double alpha) {
  if (k < 0 || k > stats.max_horizon) {
    throw validation_error("trim horizon " + std::to_string(k) +
                           " out of range: estimable horizons are 0.." +
                           std::to_string(stats.max_horizon));
  }
  const int G = panel.group_count();
  double denom = 0.0;
  std::vector<double> terms(G, 0.0);
  std::vector<std::vector<double>> per_horizon(k + 1);
  for (int l = 0; l <= k; ++l) {
    per_horizon[l] = influence_terms(panel, stats, l);
    denom += stats.horizon_weights[l] * horizon_did(panel, stats, l).second;
  }
  if (std::fabs(denom) <= 1e-12) {
    throw estimation_error("no treatment exposure mass: first-stage denominator is zero");
  }
  for (int g = 0; g < G; ++g) {
    if (!stats.initially_untreated(g)) continue;
    double num = 0.0;
    for (int l = 0; l <= k; ++l) num += stats.horizon_weights[l] * per_horizon[l][g];
    terms[g] = num / denom;
  }
  double estimate = trimmed_aggregate(panel, stats, k);
  return build_ci(estimate, terms, stats, G, alpha);
}

Panel resample_groups(const Panel& panel, Rng& rng) {
  const int G = panel.group_count();
  const int T = panel.period_count();
  Panel out;
  out.periods = panel.periods;
  out.discount = panel.discount;
  out.treatment_tolerance = panel.treatment_tolerance;
  out.groups.reserve(G);
  out.outcome_.resize(static_cast<std::size_t>(G) * T);
  out.treatment_.resize(static_cast<std::size_t>(G) * T);
  out.cell_size_.resize(static_cast<std::size_t>(G) * T);
  for (int g = 0; g < G; ++g) {
    int src = static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(G)));
    out.groups.push_back(panel.groups[src]);
    std::copy_n(panel.outcome_.begin() + static_cast<std::size_t>(src) * T, T,
                out.outcome_.begin() + static_cast<std::size_t>(g) * T);
    std::copy_n(panel.treatment_.begin() + static_cast<std::size_t>(src) * T, T,
                out.treatment_.begin() + static_cast<std::size_t>(g) * T);
    std::copy_n(panel.cell_size_.begin() + static_cast<std::size_t>(src) * T, T,
                out.cell_size_.begin() + static_cast<std::size_t>(g) * T);
  }
  return out;
}

BootstrapResult cluster_bootstrap(const Panel& panel, const BootstrapSpec& spec,
                                  const PanelStatistic& statistic, double alpha) {
  if (spec.replications < 2) {
    throw validation_error("bootstrap needs at least 2 replications");
  }
  const int B = spec.replications;
  std::vector<std::optional<std::vector<double>>> rows(B);

  parallel_for(
      static_cast<std::size_t>(B),
      [&](std::size_t r) {
        Rng rng(spec.seed, r + 1);
        Panel resample = resample_groups(panel, rng);
        try {
          std::vector<double> value = statistic(resample);
          for (double v : value) {
            if (!std::isfinite(v)) return;  // leave the slot empty
          }
          rows[r] = std::move(value);
        } catch (const validation_error&) {
        } catch (const estimation_error&) {
        }
      },
      spec.threads);

  BootstrapResult out;
  for (auto& row : rows) {
    if (row) out.replicates.push_back(std::move(*row));
  }
  out.invalid_replicates = B - static_cast<int>(out.replicates.size());
  if (out.invalid_replicates * 2 > B || out.replicates.size() < 2) {
    throw estimation_error("design too sparse for cluster bootstrap: " +
                           std::to_string(out.invalid_replicates) + " of " +
                           std::to_string(B) + " replicates undefined");
  }

  const std::size_t dim = out.replicates.front().size();
  for (const auto& row : out.replicates) {
    if (row.size() != dim) {
      throw estimation_error("bootstrap statistic changed dimension across replicates");
    }
  }
  const std::size_t n = out.replicates.size();

  out.se.resize(dim);
  out.percentile_ci.resize(dim);
  std::vector<double> column(n);
  std::vector<double> means(dim);
  for (std::size_t j = 0; j < dim; ++j) {
    for (std::size_t i = 0; i < n; ++i) column[i] = out.replicates[i][j];
    out.se[j] = sample_sd(column);
    means[j] = mean(column);
    out.percentile_ci[j] = {quantile(column, alpha / 2.0),
                            quantile(column, 1.0 - alpha / 2.0)};
  }

  out.covariance = Eigen::MatrixXd::Zero(dim, dim);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t a = 0; a < dim; ++a) {
      double da = out.replicates[i][a] - means[a];
      for (std::size_t b = a; b < dim; ++b) {
        out.covariance(a, b) += da * (out.replicates[i][b] - means[b]);
      }
    }
  }
  out.covariance /= static_cast<double>(n - 1);
  for (std::size_t a = 0; a < dim; ++a) {
    for (std::size_t b = 0; b < a; ++b) out.covariance(a, b) = out.covariance(b, a);
  }
  return out;
}

}  // namespace didkit
