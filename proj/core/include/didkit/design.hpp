#pragma once

#include <vector>

#include "didkit/panel.hpp"

namespace didkit {

/// Sentinel-aware switch dates: first_switch[g] is the first period t >= 2 at
/// which group g's treatment differs from its previous-period treatment, or
/// T+1 when the treatment never changes.
std::vector<int> first_switch_periods(const Panel& panel);

/// Control frame for one baseline dose: the groups sharing that period-1
/// treatment, the horizon range over which switchers among them can be
/// compared to still-unchanged members, and the masses behind each horizon.
struct ArmFrame {
  double baseline = 0.0;
  std::vector<int> members;            // groups with D_{g,1} == baseline
  int last_unchanged_period = 0;       // last t with an unchanged member (T_u analog)
  int max_horizon = -1;                // -1 when no member pair has distinct switch dates
  std::vector<double> unchanged_mass;  // per t = 1..T: total N of members unchanged through t
  std::vector<double> switcher_mass;   // per horizon 0..max_horizon: discounted switcher mass

  bool usable() const { return max_horizon >= 0; }
};

/// Builds the frame for one baseline value. Never throws: an unusable arm is
/// reported with max_horizon == -1.
ArmFrame arm_frame(const Panel& panel, const std::vector<int>& first_switch,
                   double baseline);

/// Design-derived statistics for the initially-untreated arm, shared by every
/// estimator: switch dates, the last all-control period, horizon masses and
/// weights, and design classification flags.
struct DesignStats {
  std::vector<int> first_switch;           // F in {2..T+1}, size G
  std::vector<double> baseline_treatment;  // period-1 dose per group
  int last_untreated_period = 0;           // last t with a never-treated group
  int max_horizon = -1;                    // horizons 0..max_horizon are estimable
  std::vector<double> untreated_mass;      // per t = 1..T
  std::vector<double> switcher_mass;       // per horizon
  std::vector<double> horizon_weights;     // switcher_mass normalized to sum 1
  bool is_staggered = false;  // doses monotone over time, same direction for all groups
  bool is_binary = false;     // all doses in {0, 1}
  double dose_tolerance = 0.0;

  bool initially_untreated(int g) const {
    double d = baseline_treatment[g];
    return d >= -dose_tolerance && d <= dose_tolerance;
  }
};

/// Computes DesignStats, validating that the initially-untreated arm is
/// non-pathological: at least two groups start untreated and switch at
/// distinct dates (one may never switch). Throws validation_error otherwise.
DesignStats design_stats(const Panel& panel);

}  // namespace didkit
