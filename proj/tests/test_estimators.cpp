#include "doctest.h"

#include <cmath>
#include <vector>

#include "didkit/design.hpp"
#include "didkit/errors.hpp"
#include "didkit/event_study.hpp"
#include "didkit/rng.hpp"
#include "helpers.hpp"

using namespace didkit;

TEST_CASE("toy panel: per-switcher DIDs traced by hand") {
  Panel p = testing::toy_panel();
  DesignStats s = design_stats(p);
  // g1 at horizon 0: (2-0) - [(1-0) + (0-0)]/2
  CHECK(switcher_did(p, s, 0, 0) == doctest::Approx(1.5).epsilon(1e-14));
  // g2 at horizon 1: (4-1) - (0-0)
  CHECK(switcher_did(p, s, 1, 1) == doctest::Approx(3.0).epsilon(1e-14));
  CHECK_THROWS_AS(switcher_did(p, s, 2, 0), validation_error);  // never switches
}

TEST_CASE("toy panel: horizon effects and first stages") {
  Panel p = testing::toy_panel();
  DesignStats s = design_stats(p);
  auto [e0, d0] = horizon_did(p, s, 0);
  CHECK(e0 == doctest::Approx(1.75).epsilon(1e-14));
  CHECK(d0 == doctest::Approx(1.0).epsilon(1e-14));
  auto [e1, d1] = horizon_did(p, s, 1);
  CHECK(e1 == doctest::Approx(3.0).epsilon(1e-14));
  CHECK(d1 == doctest::Approx(1.0).epsilon(1e-14));
  // Horizon 2: only g1 qualifies and it has reverted to untreated by t=4.
  auto [e2, d2] = horizon_did(p, s, 2);
  CHECK(e2 == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(d2 == doctest::Approx(0.0).epsilon(1e-14));
  CHECK_THROWS_AS(horizon_did(p, s, 3), validation_error);
}

TEST_CASE("toy panel: aggregate and trimmed aggregates") {
  Panel p = testing::toy_panel();
  DesignStats s = design_stats(p);
  CHECK(aggregate_effect(p, s) == doctest::Approx(2.625).epsilon(1e-14));
  CHECK(trimmed_aggregate(p, s, 1) == doctest::Approx(2.375).epsilon(1e-14));
  CHECK(trimmed_aggregate(p, s, 2) == doctest::Approx(2.625).epsilon(1e-14));
  CHECK_THROWS_AS(trimmed_aggregate(p, s, 3), validation_error);
}

TEST_CASE("ratio and double-sum forms of the aggregate agree exactly") {
  Rng rng(21, 0);
  for (int rep = 0; rep < 40; ++rep) {
    Panel p = testing::random_binary_panel(rng, 9, 6, rep % 2 == 0);
    p.discount = rep % 3 == 0 ? 0.9 : 1.0;
    DesignStats s = design_stats(p);
    double num = 0.0, den = 0.0;
    for (int l = 0; l <= s.max_horizon; ++l) {
      auto [est, fs] = horizon_did(p, s, l);
      num += s.horizon_weights[l] * est;
      den += s.horizon_weights[l] * fs;
    }
    CHECK(aggregate_effect(p, s) == doctest::Approx(num / den).epsilon(1e-13));
  }
}

TEST_CASE("identical outcome paths difference out to zero") {
  Panel p = testing::toy_panel();
  for (int g = 0; g < 3; ++g) {
    for (int t = 1; t <= 4; ++t) p.set_outcome(g, t, 3.0 * t * t - 5.0);
  }
  DesignStats s = design_stats(p);
  for (int l = 0; l <= s.max_horizon; ++l) {
    CHECK(horizon_did(p, s, l).first == doctest::Approx(0.0).epsilon(1e-14));
    for (int g = 0; g < 3; ++g) {
      if (s.baseline_treatment[g] != 0.0) continue;
      if (s.first_switch[g] > s.last_untreated_period - l) continue;
      CHECK(switcher_did(p, s, g, l) == doctest::Approx(0.0).epsilon(1e-14));
    }
  }
}

TEST_CASE("location, period-shock, and scale equivariance") {
  Rng rng(22, 0);
  Panel p = testing::random_binary_panel(rng, 8, 6, false);
  DesignStats s = design_stats(p);
  std::vector<double> base_est(s.max_horizon + 1);
  for (int l = 0; l <= s.max_horizon; ++l) base_est[l] = horizon_did(p, s, l).first;
  double base_agg = aggregate_effect(p, s);

  Panel shifted = p;
  for (int g = 0; g < p.group_count(); ++g) {
    for (int t = 1; t <= p.period_count(); ++t) {
      shifted.set_outcome(g, t, p.outcome(g, t) + 17.5 + 2.0 * t * t);
    }
  }
  for (int l = 0; l <= s.max_horizon; ++l) {
    CHECK(horizon_did(shifted, s, l).first ==
          doctest::Approx(base_est[l]).epsilon(1e-10));
  }
  CHECK(aggregate_effect(shifted, s) == doctest::Approx(base_agg).epsilon(1e-10));

  Panel scaled = p;
  for (int g = 0; g < p.group_count(); ++g) {
    for (int t = 1; t <= p.period_count(); ++t) {
      scaled.set_outcome(g, t, -3.0 * p.outcome(g, t));
    }
  }
  for (int l = 0; l <= s.max_horizon; ++l) {
    CHECK(horizon_did(scaled, s, l).first ==
          doctest::Approx(-3.0 * base_est[l]).epsilon(1e-12));
  }
  CHECK(aggregate_effect(scaled, s) == doctest::Approx(-3.0 * base_agg).epsilon(1e-12));
}

TEST_CASE("two periods: the aggregate is the plain switcher-vs-stayer DID") {
  Rng rng(23, 0);
  for (int rep = 0; rep < 20; ++rep) {
    const int G = 6;
    std::vector<double> y(G * 2), d(G * 2, 0.0), n(G * 2);
    for (auto& v : y) v = rng.normal();
    for (auto& v : n) v = 1.0 + rng.uniform01() * 4.0;
    // First three groups switch on at t=2.
    for (int g = 0; g < 3; ++g) d[g * 2 + 1] = 1.0;
    Panel p = make_panel(G, 2, y, d, n);
    DesignStats s = design_stats(p);

    double sw = 0, swm = 0, ctrl = 0, ctrlm = 0;
    for (int g = 0; g < G; ++g) {
      double change = p.outcome(g, 2) - p.outcome(g, 1);
      if (p.treatment(g, 2) == 1.0) {
        sw += p.cell_size(g, 2) * change;
        swm += p.cell_size(g, 2);
      } else {
        ctrl += p.cell_size(g, 2) * change;
        ctrlm += p.cell_size(g, 2);
      }
    }
    CHECK(aggregate_effect(p, s) ==
          doctest::Approx(sw / swm - ctrl / ctrlm).epsilon(1e-12));
  }
}

TEST_CASE("event study result carries masses, groups, and the trimmed ladder") {
  Panel p = testing::toy_panel();
  EventStudyResult r = event_study(p, Arm::plus);
  CHECK(r.max_horizon == 2);
  REQUIRE(r.horizons.size() == 3);
  CHECK(r.horizons.at(0).groups == std::vector<int>{0, 1});
  CHECK(r.horizons.at(2).groups == std::vector<int>{0});
  CHECK(r.horizons.at(0).mass == doctest::Approx(2.0));
  CHECK(r.trimmed.at(0) == doctest::Approx(1.75));
  CHECK(r.trimmed.at(1) == doctest::Approx(2.375));
  CHECK(r.trimmed.at(2) == doctest::Approx(r.aggregate));
  CHECK(r.excluded_cells == 0);
}

namespace {

// Panel with exactly parallel untreated paths plus per-cell effects after the
// switch, and its mirror (flipped doses, negated effects).
struct MirrorPair {
  Panel original;
  Panel mirror;
};

MirrorPair build_mirror_pair(Rng& rng) {
  const int G = 6, T = 5;
  std::vector<double> d(G * T, 0.0);
  auto at = [&](std::vector<double>& v, int g, int t) -> double& {
    return v[static_cast<std::size_t>(g) * T + (t - 1)];
  };
  // Binary switch paths: groups 0..3 switch at varied dates, some revert;
  // groups 4, 5 never switch.
  int first[4] = {2, 3, 4, 3};
  for (int g = 0; g < 4; ++g) {
    double cur = 0.0;
    for (int t = 1; t <= T; ++t) {
      if (t == first[g]) cur = 1.0;
      if (g == 1 && t == 5) cur = 0.0;
      at(d, g, t) = cur;
    }
  }
  std::vector<double> a(G), b(T);
  for (auto& v : a) v = rng.normal();
  for (auto& v : b) v = rng.normal();
  std::vector<double> effect(G * T, 0.0);
  for (int g = 0; g < 4; ++g) {
    for (int t = first[g]; t <= T; ++t) at(effect, g, t) = rng.normal();
  }
  std::vector<double> y0(G * T), y_orig(G * T), y_mirror(G * T), d_mirror(G * T);
  for (int g = 0; g < G; ++g) {
    for (int t = 1; t <= T; ++t) {
      at(y0, g, t) = a[g] + b[t - 1];
      at(y_orig, g, t) = at(y0, g, t) + at(effect, g, t);
      at(y_mirror, g, t) = at(y0, g, t) - at(effect, g, t);
      at(d_mirror, g, t) = 1.0 - at(d, g, t);
    }
  }
  return {make_panel(G, T, y_orig, d), make_panel(G, T, y_mirror, d_mirror)};
}

}  // namespace

TEST_CASE("mirror involution: the initially-treated arm of the mirror equals the "
          "initially-untreated arm of the original") {
  Rng rng(24, 0);
  for (int rep = 0; rep < 10; ++rep) {
    MirrorPair pair = build_mirror_pair(rng);
    EventStudyResult plus = event_study(pair.original, Arm::plus);
    EventStudyResult minus = event_study(pair.mirror, Arm::minus);
    REQUIRE(minus.horizons.size() == plus.horizons.size());
    for (const auto& [h, eff] : plus.horizons) {
      const HorizonEffect& m = minus.horizons.at(h);
      CHECK(m.estimate == doctest::Approx(eff.estimate).epsilon(1e-12));
      CHECK(m.first_stage == doctest::Approx(eff.first_stage).epsilon(1e-12));
      CHECK(m.mass == doctest::Approx(eff.mass).epsilon(1e-12));
      CHECK(m.groups == eff.groups);
    }
    CHECK(minus.aggregate == doctest::Approx(plus.aggregate).epsilon(1e-12));
  }
}

TEST_CASE("combined arm: equal masses average the two arms") {
  // g0 switches on (effect 2 vs its stayer g1); g2 switches off (effect 4 in
  // status-quo-minus-actual terms vs the always-treated g3).
  std::vector<double> y = {0, 2, 0, 0, 0, -4, 0, 0};
  std::vector<double> d = {0, 1, 0, 0, 1, 0, 1, 1};
  Panel p = make_panel(4, 2, y, d);

  ArmPair arms = minus_and_combined(p);
  CHECK(arms.minus.horizons.at(0).estimate == doctest::Approx(4.0));
  CHECK(arms.minus.aggregate == doctest::Approx(4.0));
  CHECK(arms.combined.horizons.at(0).estimate == doctest::Approx(3.0));
  CHECK(arms.combined.aggregate == doctest::Approx(3.0));
  CHECK(arms.combined.horizons.at(0).mass == doctest::Approx(2.0));
  CHECK_FALSE(arms.combined.minus_arm_empty);
}

TEST_CASE("combined arm with no initially-treated switchers falls back to plus") {
  Panel p = testing::toy_panel();
  ArmPair arms = minus_and_combined(p);
  CHECK(arms.combined.minus_arm_empty);
  EventStudyResult plus = event_study(p, Arm::plus);
  CHECK(arms.combined.aggregate == doctest::Approx(plus.aggregate));
  for (const auto& [h, eff] : plus.horizons) {
    CHECK(arms.combined.horizons.at(h).estimate == doctest::Approx(eff.estimate));
  }
}

TEST_CASE("general estimator coincides with the combined arm on binary panels") {
  Rng rng(25, 0);
  for (int rep = 0; rep < 15; ++rep) {
    Panel p = testing::random_binary_panel(rng, 10, 6, false);
    // Plant some initially-treated groups with a later switch.
    for (int t = 1; t <= 6; ++t) {
      p.set_treatment(8, t, t >= 4 ? 0.0 : 1.0);
      p.set_treatment(9, t, 1.0);
    }
    EventStudyResult combined = minus_and_combined(p).combined;
    EventStudyResult general = event_study_general(p);
    REQUIRE(general.horizons.size() == combined.horizons.size());
    for (const auto& [h, eff] : combined.horizons) {
      CHECK(general.horizons.at(h).estimate == doctest::Approx(eff.estimate).epsilon(1e-12));
      CHECK(general.horizons.at(h).first_stage ==
            doctest::Approx(eff.first_stage).epsilon(1e-12));
    }
    CHECK(general.aggregate == doctest::Approx(combined.aggregate).epsilon(1e-12));
    for (const auto& [k, v] : combined.trimmed) {
      CHECK(general.trimmed.at(k) == doctest::Approx(v).epsilon(1e-12));
    }
  }
}

TEST_CASE("non-binary: controls are matched on the period-1 dose") {
  // Two baseline-dose strata (0 and 5), one switcher and one stayer in each.
  std::vector<double> d = {0, 1, 1,   //
                           0, 0, 0,   //
                           5, 7, 7,   //
                           5, 5, 5};
  std::vector<double> y = {0, 3, 4,   //
                           0, 1, 1,   //
                           10, 14, 15,  //
                           10, 11, 11};
  Panel p = make_panel(4, 3, y, d);
  EventStudyResult r = event_study_general(p);

  // Horizon 0: g0 vs g1 gives (3-0)-(1-0)=2 with dose gap 1;
  //            g2 vs g3 gives (14-10)-(11-10)=3 with dose gap 2.
  CHECK(r.horizons.at(0).estimate == doctest::Approx(2.5));
  CHECK(r.horizons.at(0).first_stage == doctest::Approx(1.5));
  // Horizon 1: g0 vs g1 gives (4-0)-(1-0)=3; g2 vs g3 gives (15-10)-(11-10)=4.
  CHECK(r.horizons.at(1).estimate == doctest::Approx(3.5));
  CHECK(r.excluded_cells == 0);
  // Per-stratum ratios combined with equal masses:
  // stratum 0: (2+3)/(1+1) = 2.5; stratum 5: (3+4)/(2+2) = 1.75.
  CHECK(r.aggregate == doctest::Approx((2.5 + 1.75) / 2.0));
}

TEST_CASE("non-binary: dose paths crossing their baseline are excluded and counted") {
  // g0's dose path (1, 2, 0) rises then falls through its baseline; the
  // horizon-1 cell is not a one-direction exposure.
  std::vector<double> d = {1, 2, 0,  //
                           1, 1, 1,  //
                           1, 1, 1};
  std::vector<double> y = {0, 5, 9,  //
                           0, 1, 2,  //
                           0, 1, 2};
  Panel p = make_panel(3, 3, y, d);
  EventStudyResult r = event_study_general(p);
  CHECK(r.excluded_cells == 1);
  CHECK(r.horizons.count(0) == 1);
  CHECK(r.horizons.count(1) == 0);  // absent, not zero
  CHECK(r.horizons.at(0).estimate == doctest::Approx(4.0));  // (5-0)-(1-0)
  CHECK(r.horizons.at(0).first_stage == doctest::Approx(1.0));
  CHECK(r.negative_path_cells == 0);
}

TEST_CASE("minus arm requires a binary treatment") {
  std::vector<double> d = {0, 2, 2, 0, 0, 0};
  Panel p = make_panel(2, 3, std::vector<double>(6, 0.0), d);
  CHECK_THROWS_AS(event_study(p, Arm::minus), validation_error);
  CHECK_THROWS_AS(minus_and_combined(p), validation_error);
}
