#include "didkit/design.hpp"

#include <algorithm>
#include <cmath>

#include "didkit/errors.hpp"

namespace didkit {

std::vector<int> first_switch_periods(const Panel& panel) {
  const int G = panel.group_count();
  const int T = panel.period_count();
  std::vector<int> first(G, T + 1);
  for (int g = 0; g < G; ++g) {
    for (int t = 2; t <= T; ++t) {
      if (!panel.same_dose(panel.treatment(g, t), panel.treatment(g, t - 1))) {
        first[g] = t;
        break;
      }
    }
  }
  return first;
}

ArmFrame arm_frame(const Panel& panel, const std::vector<int>& first_switch,
                   double baseline) {
  const int T = panel.period_count();
  ArmFrame frame;
  frame.baseline = baseline;

  int min_switch = T + 2;
  int max_switch = 0;
  for (int g = 0; g < panel.group_count(); ++g) {
    if (!panel.same_dose(panel.treatment(g, 1), baseline)) continue;
    frame.members.push_back(g);
    min_switch = std::min(min_switch, first_switch[g]);
    max_switch = std::max(max_switch, first_switch[g]);
  }
  if (frame.members.empty()) return frame;

  frame.unchanged_mass.assign(T, 0.0);
  for (int g : frame.members) {
    for (int t = 1; t < first_switch[g] && t <= T; ++t) {
      frame.unchanged_mass[t - 1] += panel.cell_size(g, t);
    }
  }

  frame.last_unchanged_period = max_switch - 1;
  if (min_switch >= max_switch) return frame;  // no usable switcher/control pair
  frame.max_horizon = frame.last_unchanged_period - min_switch;

  frame.switcher_mass.assign(frame.max_horizon + 1, 0.0);
  for (int horizon = 0; horizon <= frame.max_horizon; ++horizon) {
    for (int g : frame.members) {
      if (first_switch[g] > frame.last_unchanged_period - horizon) continue;
      int t = first_switch[g] + horizon;
      frame.switcher_mass[horizon] +=
          std::pow(panel.discount, t) * panel.cell_size(g, t);
    }
  }
  return frame;
}

DesignStats design_stats(const Panel& panel) {
  panel.validate();
  const int G = panel.group_count();
  const int T = panel.period_count();

  DesignStats stats;
  stats.first_switch = first_switch_periods(panel);
  stats.baseline_treatment.resize(G);
  for (int g = 0; g < G; ++g) stats.baseline_treatment[g] = panel.treatment(g, 1);
  stats.dose_tolerance = panel.treatment_tolerance;

  ArmFrame frame = arm_frame(panel, stats.first_switch, 0.0);
  if (!frame.usable()) {
    throw validation_error(
        "pathological design: need two initially-untreated groups with distinct "
        "first-switch periods (one may never switch)");
  }
  stats.last_untreated_period = frame.last_unchanged_period;
  stats.max_horizon = frame.max_horizon;
  stats.untreated_mass = frame.unchanged_mass;
  stats.switcher_mass = frame.switcher_mass;

  double total = 0.0;
  for (double m : stats.switcher_mass) total += m;
  stats.horizon_weights.resize(stats.switcher_mass.size());
  for (std::size_t i = 0; i < stats.switcher_mass.size(); ++i) {
    stats.horizon_weights[i] = stats.switcher_mass[i] / total;
  }

  for (int t = 1; t <= stats.last_untreated_period; ++t) {
    if (!(stats.untreated_mass[t - 1] > 0.0)) {
      throw validation_error("internal: never-treated mass vanished at period " +
                             std::to_string(panel.periods[t - 1]));
    }
  }

  stats.is_binary = true;
  for (int g = 0; g < G && stats.is_binary; ++g) {
    for (int t = 1; t <= T; ++t) {
      double d = panel.treatment(g, t);
      if (d != 0.0 && d != 1.0) {
        stats.is_binary = false;
        break;
      }
    }
  }

  bool all_nondecreasing = true;
  bool all_nonincreasing = true;
  for (int g = 0; g < G; ++g) {
    for (int t = 2; t <= T; ++t) {
      double prev = panel.treatment(g, t - 1);
      double cur = panel.treatment(g, t);
      if (cur < prev - panel.treatment_tolerance) all_nondecreasing = false;
      if (cur > prev + panel.treatment_tolerance) all_nonincreasing = false;
    }
  }
  stats.is_staggered = all_nondecreasing || all_nonincreasing;

  return stats;
}

}  // namespace didkit
