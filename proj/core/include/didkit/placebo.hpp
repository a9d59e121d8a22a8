#pragma once

#include <Eigen/Dense>
#include <map>
#include <vector>

#include "didkit/design.hpp"
#include "didkit/event_study.hpp"
#include "didkit/panel.hpp"

namespace didkit {

struct PlaceboEffect {
  double estimate = 0.0;
  double mass = 0.0;
  std::vector<int> groups;
};

/// Long-difference placebos mirroring the actual estimators horizon for
/// horizon, oriented from the pre-switch reference period back into the past.
struct PlaceboResult {
  Arm arm = Arm::plus;
  std::map<int, PlaceboEffect> horizons;
  int max_horizon = -1;  // -1 when no placebo is computable
};

/// Placebo DID for one switcher: the outcome change from period F-1 back to
/// F-horizon-2, differenced against the same change among matched
/// not-yet-switched controls (control masses taken at F+horizon, mirroring
/// the actual estimator's control set).
double switcher_placebo(const Panel& panel, const DesignStats& stats, int g,
                        int horizon);

/// Mass-weighted placebo across all groups admissible at this horizon, i.e.
/// groups whose actual effect and placebo are both computable.
double horizon_placebo(const Panel& panel, const DesignStats& stats, int horizon);

/// All computable placebo horizons for the initially-untreated arm.
PlaceboResult placebo_study_plus(const Panel& panel, const DesignStats& stats);

/// Arm dispatch: minus uses the inverted-treatment machinery with negated
/// estimates, combined pools the arms with mass weights.
PlaceboResult placebo_study(const Panel& panel, Arm arm);

struct JointTest {
  double statistic = 0.0;
  double p_value = 1.0;
  int dof = 0;                 // effective rank of the covariance
  bool pseudo_inverse = false; // covariance was singular
  bool underpowered_covariance = false;  // fewer replicates than placebos
};

/// Wald test of "all placebos are zero" against a bootstrap covariance.
/// A singular covariance falls back to its pseudo-inverse with the effective
/// rank as degrees of freedom.
JointTest joint_placebo_test(const std::vector<double>& placebos,
                             const Eigen::MatrixXd& covariance,
                             int bootstrap_replicates = -1);

}  // namespace didkit
