#include "doctest.h"

#include <Eigen/Dense>
#include <cmath>

#include "didkit/design.hpp"
#include "didkit/errors.hpp"
#include "didkit/placebo.hpp"
#include "didkit/rng.hpp"
#include "didkit/stats_math.hpp"
#include "helpers.hpp"

using namespace didkit;

TEST_CASE("toy panel: placebo traced by hand") {
  Panel p = testing::toy_panel();
  DesignStats s = design_stats(p);
  // g2 at horizon 0: (Y_{2,1}-Y_{2,2}) - (Y_{3,1}-Y_{3,2}) = (0-1)-(0-0).
  CHECK(switcher_placebo(p, s, 1, 0) == doctest::Approx(-1.0).epsilon(1e-14));
  CHECK(horizon_placebo(p, s, 0) == doctest::Approx(-1.0).epsilon(1e-14));
  // g1 switches at period 2: no pre-period long enough, nothing admissible.
  CHECK_THROWS_AS(switcher_placebo(p, s, 0, 0), validation_error);

  PlaceboResult r = placebo_study_plus(p, s);
  CHECK(r.max_horizon == 0);
  REQUIRE(r.horizons.size() == 1);
  CHECK(r.horizons.at(0).estimate == doctest::Approx(-1.0));
  CHECK(r.horizons.at(0).groups == std::vector<int>{1});
  CHECK(r.horizons.at(0).mass == doctest::Approx(1.0));
}

TEST_CASE("exactly parallel pre-trends give zero placebos") {
  Rng rng(31, 0);
  const int G = 8, T = 7;
  std::vector<double> d(G * T, 0.0);
  // Varied adoption dates far enough from the start for placebos to exist.
  int first[G] = {4, 5, 6, 4, 5, 8, 8, 8};
  for (int g = 0; g < G; ++g) {
    for (int t = first[g]; t <= T; ++t) d[g * T + (t - 1)] = 1.0;
  }
  std::vector<double> y(G * T);
  for (int g = 0; g < G; ++g) {
    for (int t = 1; t <= T; ++t) {
      y[g * T + (t - 1)] = 2.0 * g + 0.5 * t * t + (t >= first[g] ? rng.normal() : 0.0);
    }
  }
  Panel p = make_panel(G, T, y, d);
  DesignStats s = design_stats(p);
  PlaceboResult r = placebo_study_plus(p, s);
  CHECK(r.max_horizon >= 1);
  for (const auto& [h, eff] : r.horizons) {
    CHECK(eff.estimate == doctest::Approx(0.0).epsilon(1e-12));
  }
}

TEST_CASE("admissibility window: horizon caps at both ends") {
  Panel p = testing::toy_panel();
  DesignStats s = design_stats(p);
  CHECK_THROWS_AS(horizon_placebo(p, s, 1), validation_error);
  CHECK_THROWS_AS(horizon_placebo(p, s, -1), validation_error);
}

TEST_CASE("all switchers at period 2 leaves no computable placebo") {
  std::vector<double> d = {0, 1, 1, 1, 0, 0, 0, 0};
  Panel p = make_panel(2, 4, std::vector<double>(8, 0.0), d);
  DesignStats s = design_stats(p);
  PlaceboResult r = placebo_study_plus(p, s);
  CHECK(r.max_horizon == -1);
  CHECK(r.horizons.empty());
  CHECK_THROWS_WITH_AS(horizon_placebo(p, s, 0),
                       doctest::Contains("no placebos computable"), validation_error);
}

TEST_CASE("placebo contributors also contribute to the actual estimator") {
  Rng rng(32, 0);
  for (int rep = 0; rep < 25; ++rep) {
    Panel p = testing::random_binary_panel(rng, 10, 8, rep % 2 == 0);
    DesignStats s = design_stats(p);
    PlaceboResult pl = placebo_study_plus(p, s);
    EventStudyResult ev = event_study_plus(p, s);
    for (const auto& [h, eff] : pl.horizons) {
      const auto& actual = ev.horizons.at(h).groups;
      for (int g : eff.groups) {
        CHECK(std::find(actual.begin(), actual.end(), g) != actual.end());
      }
    }
  }
}

TEST_CASE("placebo study: minus arm by involution, combined by mass") {
  // Stratified panel with pre-periods: one on-switcher block and one
  // off-switcher block, both with never-switching members.
  const int G = 4, T = 6;
  std::vector<double> d(G * T, 0.0);
  for (int t = 4; t <= T; ++t) d[0 * T + (t - 1)] = 1.0;  // g0 on at 4
  for (int t = 1; t <= T; ++t) d[2 * T + (t - 1)] = t < 4 ? 1.0 : 0.0;  // g2 off at 4
  for (int t = 1; t <= T; ++t) d[3 * T + (t - 1)] = 1.0;  // g3 always treated
  Rng rng(33, 0);
  std::vector<double> y(G * T);
  for (auto& v : y) v = rng.normal();
  Panel p = make_panel(G, T, y, d);

  PlaceboResult plus = placebo_study(p, Arm::plus);
  PlaceboResult minus = placebo_study(p, Arm::minus);
  PlaceboResult combined = placebo_study(p, Arm::combined);

  // Direct check of the involution: the minus placebo is the negated plus
  // placebo of the dose-flipped panel.
  Panel flipped = invert_binary_treatment(p);
  PlaceboResult flipped_plus = placebo_study(flipped, Arm::plus);
  REQUIRE(minus.horizons.size() == flipped_plus.horizons.size());
  for (const auto& [h, eff] : flipped_plus.horizons) {
    CHECK(minus.horizons.at(h).estimate == doctest::Approx(-eff.estimate));
  }

  for (const auto& [h, eff] : combined.horizons) {
    double pm = plus.horizons.count(h) ? plus.horizons.at(h).mass : 0.0;
    double mm = minus.horizons.count(h) ? minus.horizons.at(h).mass : 0.0;
    double expect = 0.0;
    if (pm > 0) expect += pm / (pm + mm) * plus.horizons.at(h).estimate;
    if (mm > 0) expect += mm / (pm + mm) * minus.horizons.at(h).estimate;
    CHECK(eff.estimate == doctest::Approx(expect).epsilon(1e-12));
    CHECK(eff.mass == doctest::Approx(pm + mm).epsilon(1e-12));
  }
}

TEST_CASE("joint test: exactly null placebos") {
  Eigen::MatrixXd v(2, 2);
  v << 1.0, 0.2, 0.2, 2.0;
  JointTest t = joint_placebo_test({0.0, 0.0}, v);
  CHECK(t.statistic == doctest::Approx(0.0));
  CHECK(t.p_value == doctest::Approx(1.0));
  CHECK(t.dof == 2);
  CHECK_FALSE(t.pseudo_inverse);
}

TEST_CASE("joint test: scalar Wald") {
  Eigen::MatrixXd v(1, 1);
  v << 0.25;
  JointTest t = joint_placebo_test({1.5}, v);
  CHECK(t.statistic == doctest::Approx(9.0).epsilon(1e-12));
  CHECK(t.p_value == doctest::Approx(chi_squared_sf(9.0, 1)).epsilon(1e-12));
  CHECK(t.dof == 1);
}

TEST_CASE("joint test: singular covariance uses the pseudo-inverse") {
  Eigen::MatrixXd v(2, 2);
  v << 1.0, 1.0, 1.0, 1.0;
  // V+ has a single spectral direction (1,1)/sqrt(2) with eigenvalue 2:
  // p' V+ p = (sqrt(2))^2 / 2 = 1.
  JointTest t = joint_placebo_test({1.0, 1.0}, v);
  CHECK(t.dof == 1);
  CHECK(t.pseudo_inverse);
  CHECK(t.statistic == doctest::Approx(1.0).epsilon(1e-10));

  JointTest few = joint_placebo_test({1.0, 1.0}, v, 1);
  CHECK(few.underpowered_covariance);
}

TEST_CASE("joint test: dimension checks") {
  Eigen::MatrixXd v(2, 2);
  v.setIdentity();
  CHECK_THROWS_AS(joint_placebo_test({1.0}, v), validation_error);
  CHECK_THROWS_AS(joint_placebo_test({}, Eigen::MatrixXd()), validation_error);
}
