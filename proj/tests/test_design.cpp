#include "doctest.h"

#include <algorithm>
#include <numeric>

#include "didkit/design.hpp"
#include "didkit/errors.hpp"
#include "didkit/rng.hpp"
#include "helpers.hpp"

using namespace didkit;

TEST_CASE("toy panel design statistics, traced by hand") {
  Panel p = testing::toy_panel();
  DesignStats s = design_stats(p);

  CHECK(s.first_switch == std::vector<int>{2, 3, 5});
  CHECK(s.last_untreated_period == 4);
  CHECK(s.max_horizon == 2);
  CHECK(s.untreated_mass == std::vector<double>{3, 2, 1, 1});
  REQUIRE(s.switcher_mass.size() == 3);
  CHECK(s.switcher_mass[0] == doctest::Approx(2.0).epsilon(1e-14));
  CHECK(s.switcher_mass[1] == doctest::Approx(2.0).epsilon(1e-14));
  CHECK(s.switcher_mass[2] == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(s.horizon_weights[0] == doctest::Approx(0.4).epsilon(1e-14));
  CHECK(s.horizon_weights[1] == doctest::Approx(0.4).epsilon(1e-14));
  CHECK(s.horizon_weights[2] == doctest::Approx(0.2).epsilon(1e-14));
  CHECK(s.is_binary);
  CHECK_FALSE(s.is_staggered);  // group 1 reverts
}

TEST_CASE("all-zero treatment is pathological") {
  Panel p = make_panel(3, 4, std::vector<double>(12, 0.0), std::vector<double>(12, 0.0));
  CHECK_THROWS_WITH_AS(design_stats(p), doctest::Contains("pathological"),
                       validation_error);
}

TEST_CASE("everyone switching at the same period is pathological") {
  std::vector<double> d = {0, 1, 1, 0, 1, 1, 0, 1, 1};
  Panel p = make_panel(3, 3, std::vector<double>(9, 0.0), d);
  CHECK_THROWS_AS(design_stats(p), validation_error);
}

TEST_CASE("staggered binary adoption panel") {
  // F = (2, 3, 4): adoption dates, no never-treated group.
  std::vector<double> d = {0, 1, 1, 1, 0, 0, 1, 1, 0, 0, 0, 1};
  Panel p = make_panel(3, 4, std::vector<double>(12, 0.0), d);
  DesignStats s = design_stats(p);
  CHECK(s.is_staggered);
  CHECK(s.is_binary);
  CHECK(s.last_untreated_period == 3);
  CHECK(s.max_horizon == 1);
}

TEST_CASE("treatment constant before the first switch") {
  Rng rng(11, 0);
  for (int rep = 0; rep < 30; ++rep) {
    Panel p = testing::random_binary_panel(rng, 8, 6, rep % 2 == 0);
    DesignStats s = design_stats(p);
    for (int g = 0; g < p.group_count(); ++g) {
      for (int t = 1; t < s.first_switch[g] && t <= p.period_count(); ++t) {
        CHECK(p.treatment(g, t) == p.treatment(g, 1));
      }
    }
  }
}

TEST_CASE("horizon weights sum to one") {
  Rng rng(12, 0);
  for (int rep = 0; rep < 30; ++rep) {
    Panel p = testing::random_binary_panel(rng, 10, 7, rep % 2 == 1);
    DesignStats s = design_stats(p);
    double total = std::accumulate(s.horizon_weights.begin(), s.horizon_weights.end(), 0.0);
    CHECK(std::fabs(total - 1.0) <= 1e-12);
  }
}

TEST_CASE("unit masses count groups when undiscounted") {
  Panel p = testing::toy_panel();
  DesignStats s = design_stats(p);
  // With beta = 1 and unit cells, the switcher mass at horizon l counts the
  // initially-untreated groups whose switch happens at least l periods before
  // the last control period.
  for (int l = 0; l <= s.max_horizon; ++l) {
    int count = 0;
    for (int g = 0; g < p.group_count(); ++g) {
      if (s.baseline_treatment[g] == 0.0 &&
          s.first_switch[g] <= s.last_untreated_period - l) {
        ++count;
      }
    }
    CHECK(s.switcher_mass[l] == doctest::Approx(count).epsilon(1e-14));
  }
}

TEST_CASE("permuting groups permutes the statistics") {
  Rng rng(13, 0);
  Panel p = testing::random_binary_panel(rng, 9, 6, false);
  DesignStats s = design_stats(p);

  std::vector<int> perm(p.group_count());
  std::iota(perm.begin(), perm.end(), 0);
  for (int i = p.group_count() - 1; i > 0; --i) {
    std::swap(perm[i], perm[rng.uniform_int(i + 1)]);
  }
  Panel q = p;
  for (int g = 0; g < p.group_count(); ++g) {
    q.groups[g] = p.groups[perm[g]];
    for (int t = 1; t <= p.period_count(); ++t) {
      q.set_outcome(g, t, p.outcome(perm[g], t));
      q.set_treatment(g, t, p.treatment(perm[g], t));
      q.set_cell_size(g, t, p.cell_size(perm[g], t));
    }
  }
  DesignStats sq = design_stats(q);
  for (int g = 0; g < p.group_count(); ++g) {
    CHECK(sq.first_switch[g] == s.first_switch[perm[g]]);
    CHECK(sq.baseline_treatment[g] == s.baseline_treatment[perm[g]]);
  }
  CHECK(sq.last_untreated_period == s.last_untreated_period);
  CHECK(sq.max_horizon == s.max_horizon);
  for (std::size_t i = 0; i < s.switcher_mass.size(); ++i) {
    CHECK(sq.switcher_mass[i] == doctest::Approx(s.switcher_mass[i]).epsilon(1e-12));
  }
}

TEST_CASE("dose tolerance controls switch detection") {
  std::vector<double> d = {0, 1e-7, 1e-7, 0, 0, 0, 0, 1, 1};
  Panel p = make_panel(3, 3, std::vector<double>(9, 0.0), d);
  p.treatment_tolerance = 1e-6;
  DesignStats s = design_stats(p);
  CHECK(s.first_switch[0] == 4);  // the 1e-7 blip is below tolerance
  CHECK(s.first_switch[2] == 2);

  p.treatment_tolerance = 0.0;
  DesignStats exact = design_stats(p);
  CHECK(exact.first_switch[0] == 2);
}
