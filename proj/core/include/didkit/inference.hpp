#pragma once

#include <Eigen/Dense>
#include <array>
#include <cstdint>
#include <functional>
#include <vector>

#include "didkit/design.hpp"
#include "didkit/panel.hpp"
#include "didkit/rng.hpp"

namespace didkit {

/// Per-group linear terms whose group averages reproduce the horizon and
/// aggregate estimators exactly, plus the variance estimators built on them.
struct InfluenceDecomposition {
  std::vector<std::vector<double>> horizon_terms;  // [horizon][g]; 0 outside the arm
  std::vector<double> aggregate_terms;             // [g]
  std::vector<double> horizon_variance;            // per horizon
  double aggregate_variance = 0.0;
};

/// Influence terms for one horizon, indexed by group (zero for groups outside
/// the initially-untreated arm). Their mean over all G groups equals the
/// horizon estimate exactly.
std::vector<double> influence_terms(const Panel& panel, const DesignStats& stats,
                                    int horizon);

InfluenceDecomposition influence_decomposition(const Panel& panel,
                                               const DesignStats& stats);

enum class CiMethod { analytic, bootstrap_percentile, bootstrap_normal };

struct ConfidenceInterval {
  double estimate = 0.0;
  double lower = 0.0;
  double upper = 0.0;
  double se = 0.0;
  double level = 0.95;
  CiMethod method = CiMethod::analytic;
  bool degenerate_variance = false;  // at most one group carried the variance
};

/// Large-G normal interval for the horizon effect, using the influence-term
/// variance scaled by 1/G.
ConfidenceInterval analytic_ci_horizon(const Panel& panel, const DesignStats& stats,
                                       int horizon, double alpha = 0.05);

/// Same construction for the aggregate ratio.
ConfidenceInterval analytic_ci_aggregate(const Panel& panel, const DesignStats& stats,
                                         double alpha = 0.05);

/// Same construction applied to the trimmed aggregate (horizons 0..k).
ConfidenceInterval analytic_ci_trimmed(const Panel& panel, const DesignStats& stats,
                                       int k, double alpha = 0.05);

struct BootstrapSpec {
  int replications = 100;
  std::uint64_t seed = 0;
  unsigned threads = 0;  // 0 = hardware concurrency, 1 = run inline
};

struct BootstrapResult {
  std::vector<std::vector<double>> replicates;        // valid rows, replicate order
  std::vector<double> se;                             // per statistic coordinate
  std::vector<std::array<double, 2>> percentile_ci;   // per coordinate
  Eigen::MatrixXd covariance;                         // across replicates
  int invalid_replicates = 0;
};

/// A statistic evaluated on (resampled) panels; fixed output dimension.
using PanelStatistic = std::function<std::vector<double>(const Panel&)>;

/// Draws G groups with replacement (all periods of a drawn group move
/// together) and re-evaluates the statistic per replicate. Replicate r uses
/// its own stream of (seed, r), so results are identical for any thread
/// count. Replicates where the statistic is undefined are dropped and
/// counted; more than half invalid is an error.
BootstrapResult cluster_bootstrap(const Panel& panel, const BootstrapSpec& spec,
                                  const PanelStatistic& statistic, double alpha = 0.05);

/// One group-resample of the panel (group rows copied wholesale).
Panel resample_groups(const Panel& panel, Rng& rng);

}  // namespace didkit
