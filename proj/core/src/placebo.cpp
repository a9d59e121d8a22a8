#include "didkit/placebo.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "didkit/errors.hpp"
#include "didkit/stats_math.hpp"

namespace didkit {

namespace {

int placebo_max_horizon(const DesignStats& stats, int n_groups) {
  int best = -1;
  for (int g = 0; g < n_groups; ++g) {
    if (!stats.initially_untreated(g)) continue;
    int cap = std::min(stats.last_untreated_period - stats.first_switch[g],
                       stats.first_switch[g] - 3);
    best = std::max(best, cap);
  }
  return best;
}

bool admissible(const DesignStats& stats, int g, int horizon) {
  return stats.initially_untreated(g) &&
         stats.first_switch[g] >= horizon + 3 &&
         stats.first_switch[g] <= stats.last_untreated_period - horizon;
}

}  // namespace

double switcher_placebo(const Panel& panel, const DesignStats& stats, int g,
                        int horizon) {
  if (g < 0 || g >= panel.group_count()) throw validation_error("group index out of range");
  if (horizon < 0 || !admissible(stats, g, horizon)) {
    throw validation_error("placebo horizon " + std::to_string(horizon) +
                           " not admissible for group " + panel.groups[g]);
  }
  const int f = stats.first_switch[g];
  const int past = f - horizon - 2;
  const int ref = f - 1;
  const int ctrl_t = f + horizon;
  const double baseline = panel.treatment(g, 1);

  double ctrl_mass = 0.0;
  double ctrl_change = 0.0;
  for (int h = 0; h < panel.group_count(); ++h) {
    if (stats.first_switch[h] <= ctrl_t) continue;
    if (!panel.same_dose(panel.treatment(h, 1), baseline)) continue;
    double w = panel.cell_size(h, ctrl_t);
    ctrl_mass += w;
    ctrl_change += w * (panel.outcome(h, past) - panel.outcome(h, ref));
  }
  if (!(ctrl_mass > 0.0)) {
    throw estimation_error("no never-switched controls for placebo at horizon " +
                           std::to_string(horizon));
  }
  return panel.outcome(g, past) - panel.outcome(g, ref) - ctrl_change / ctrl_mass;
}

double horizon_placebo(const Panel& panel, const DesignStats& stats, int horizon) {
  int top = placebo_max_horizon(stats, panel.group_count());
  if (top < 0) {
    throw validation_error(
        "no placebos computable: all switchers switch at period 2");
  }
  if (horizon < 0 || horizon > top) {
    throw validation_error("placebo horizon " + std::to_string(horizon) +
                           " out of range: computable horizons are 0.." +
                           std::to_string(top));
  }
  double mass = 0.0, est = 0.0;
  for (int g = 0; g < panel.group_count(); ++g) {
    if (!admissible(stats, g, horizon)) continue;
    int t = stats.first_switch[g] + horizon;
    double m = std::pow(panel.discount, t) * panel.cell_size(g, t);
    mass += m;
    est += m * switcher_placebo(panel, stats, g, horizon);
  }
  if (!(mass > 0.0)) {
    throw estimation_error("no placebo mass at horizon " + std::to_string(horizon));
  }
  return est / mass;
}

PlaceboResult placebo_study_plus(const Panel& panel, const DesignStats& stats) {
  PlaceboResult res;
  res.arm = Arm::plus;
  res.max_horizon = placebo_max_horizon(stats, panel.group_count());
  for (int h = 0; h <= res.max_horizon; ++h) {
    PlaceboEffect eff;
    KahanSum sum;
    for (int g = 0; g < panel.group_count(); ++g) {
      if (!admissible(stats, g, h)) continue;
      int t = stats.first_switch[g] + h;
      double m = std::pow(panel.discount, t) * panel.cell_size(g, t);
      eff.mass += m;
      sum.add(m * switcher_placebo(panel, stats, g, h));
      eff.groups.push_back(g);
    }
    if (!(eff.mass > 0.0)) continue;
    eff.estimate = sum.value() / eff.mass;
    res.horizons[h] = std::move(eff);
  }
  return res;
}

PlaceboResult placebo_study(const Panel& panel, Arm arm) {
  if (arm == Arm::plus) {
    return placebo_study_plus(panel, design_stats(panel));
  }

  auto minus_side = [&]() {
    Panel inverted = invert_binary_treatment(panel);
    PlaceboResult r = placebo_study_plus(inverted, design_stats(inverted));
    r.arm = Arm::minus;
    for (auto& [h, eff] : r.horizons) eff.estimate = -eff.estimate;
    return r;
  };

  if (arm == Arm::minus) return minus_side();

  // Combined: pool whichever arms are usable, weighting by placebo mass.
  PlaceboResult plus, minus;
  bool has_plus = true, has_minus = true;
  try {
    plus = placebo_study_plus(panel, design_stats(panel));
  } catch (const validation_error&) {
    has_plus = false;
  }
  try {
    minus = minus_side();
  } catch (const validation_error&) {
    has_minus = false;
  }
  if (!has_plus && !has_minus) {
    throw validation_error(
        "pathological design: neither arm has switchers with usable controls");
  }

  PlaceboResult res;
  res.arm = Arm::combined;
  std::set<int> keys;
  if (has_plus) {
    for (const auto& [h, e] : plus.horizons) keys.insert(h);
  }
  if (has_minus) {
    for (const auto& [h, e] : minus.horizons) keys.insert(h);
  }
  for (int h : keys) {
    PlaceboEffect eff;
    const PlaceboEffect* a =
        has_plus && plus.horizons.count(h) ? &plus.horizons.at(h) : nullptr;
    const PlaceboEffect* b =
        has_minus && minus.horizons.count(h) ? &minus.horizons.at(h) : nullptr;
    eff.mass = (a ? a->mass : 0.0) + (b ? b->mass : 0.0);
    if (a) {
      eff.estimate += a->mass / eff.mass * a->estimate;
      eff.groups.insert(eff.groups.end(), a->groups.begin(), a->groups.end());
    }
    if (b) {
      eff.estimate += b->mass / eff.mass * b->estimate;
      eff.groups.insert(eff.groups.end(), b->groups.begin(), b->groups.end());
    }
    std::sort(eff.groups.begin(), eff.groups.end());
    res.horizons[h] = std::move(eff);
    res.max_horizon = std::max(res.max_horizon, h);
  }
  return res;
}

JointTest joint_placebo_test(const std::vector<double>& placebos,
                             const Eigen::MatrixXd& covariance,
                             int bootstrap_replicates) {
  const int dim = static_cast<int>(placebos.size());
  if (dim == 0) throw validation_error("joint placebo test needs at least one placebo");
  if (covariance.rows() != dim || covariance.cols() != dim) {
    throw validation_error("covariance dimension does not match the placebo vector");
  }

  JointTest out;
  if (bootstrap_replicates >= 0 && bootstrap_replicates < dim + 1) {
    out.underpowered_covariance = true;
  }

  Eigen::VectorXd p(dim);
  for (int i = 0; i < dim; ++i) p(i) = placebos[i];

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(covariance);
  const Eigen::VectorXd& lambda = eig.eigenvalues();
  double lmax = lambda.maxCoeff();
  if (!(lmax > 0.0)) {
    // Degenerate covariance: no variance direction at all. The statistic is
    // zero by convention (matches the exactly-null placebo vector case).
    out.dof = 0;
    out.pseudo_inverse = true;
    return out;
  }
  const double tol = lmax * 1e-12 * dim;
  double stat = 0.0;
  int rank = 0;
  for (int i = 0; i < dim; ++i) {
    if (lambda(i) <= tol) continue;
    double proj = eig.eigenvectors().col(i).dot(p);
    stat += proj * proj / lambda(i);
    ++rank;
  }
  out.statistic = stat;
  out.dof = rank;
  out.pseudo_inverse = rank < dim;
  out.p_value = rank > 0 ? chi_squared_sf(stat, rank) : 1.0;
  return out;
}

}  // namespace didkit
