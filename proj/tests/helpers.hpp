#pragma once

#include <vector>

#include "didkit/design.hpp"
#include "didkit/panel.hpp"
#include "didkit/rng.hpp"

namespace didkit::testing {

// Three groups, four periods, unit cell sizes. Group 1 switches on at t=2 and
// back off at t=4; group 2 switches on at t=3 and stays; group 3 never
// switches. Hand-traceable outcomes.
inline Panel toy_panel() {
  std::vector<double> outcome = {
      0, 2, 3, 1,   // g1
      0, 1, 3, 4,   // g2
      0, 0, 0, 0};  // g3
  std::vector<double> treatment = {
      0, 1, 1, 0,   // g1
      0, 0, 1, 1,   // g2
      0, 0, 0, 0};  // g3
  return make_panel(3, 4, outcome, treatment);
}

// Random balanced binary panel with a guaranteed-usable untreated arm.
inline Panel random_binary_panel(Rng& rng, int n_groups, int n_periods,
                                 bool staggered, double never_share = 0.3) {
  std::vector<double> d(static_cast<std::size_t>(n_groups) * n_periods, 0.0);
  auto at = [&](int g, int t) -> double& {
    return d[static_cast<std::size_t>(g) * n_periods + (t - 1)];
  };
  for (int g = 2; g < n_groups; ++g) {
    if (rng.uniform01() < never_share) continue;
    int f = 2 + static_cast<int>(rng.uniform_int(n_periods - 1));
    for (int t = f; t <= n_periods; ++t) at(g, t) = 1.0;
    if (!staggered && rng.uniform01() < 0.4 && f + 1 <= n_periods) {
      int off = f + 1 + static_cast<int>(rng.uniform_int(n_periods - f));
      for (int t = off; t <= n_periods; ++t) at(g, t) = 0.0;
    }
  }
  at(0, 2) = 1.0;  // early switcher
  for (int t = 3; t <= n_periods; ++t) at(0, t) = staggered ? 1.0 : at(0, t - 1);
  // group 1 stays never-treated

  std::vector<double> y(static_cast<std::size_t>(n_groups) * n_periods);
  for (auto& v : y) v = rng.normal();
  std::vector<double> n(static_cast<std::size_t>(n_groups) * n_periods);
  for (auto& v : n) v = 1.0 + rng.uniform01() * 3.0;
  return make_panel(n_groups, n_periods, std::move(y), std::move(d), std::move(n));
}

}  // namespace didkit::testing
