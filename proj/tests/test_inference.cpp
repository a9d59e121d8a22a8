#include "doctest.h"

#include <cmath>
#include <set>

#include "didkit/design.hpp"
#include "didkit/errors.hpp"
#include "didkit/event_study.hpp"
#include "didkit/inference.hpp"
#include "didkit/stats_math.hpp"
#include "helpers.hpp"

using namespace didkit;

TEST_CASE("toy panel: influence terms traced by hand") {
  Panel p = testing::toy_panel();
  DesignStats s = design_stats(p);

  std::vector<double> u0 = influence_terms(p, s, 0);
  CHECK(u0[0] == doctest::Approx(3.0).epsilon(1e-14));
  CHECK(u0[1] == doctest::Approx(2.25).epsilon(1e-14));
  CHECK(u0[2] == doctest::Approx(0.0).epsilon(1e-14));
  CHECK((u0[0] + u0[1] + u0[2]) / 3.0 == doctest::Approx(1.75).epsilon(1e-14));

  std::vector<double> u1 = influence_terms(p, s, 1);
  CHECK((u1[0] + u1[1] + u1[2]) / 3.0 == doctest::Approx(3.0).epsilon(1e-14));

  // g2 enters no term at horizon 2: not a switcher there, and no longer a
  // usable control.
  std::vector<double> u2 = influence_terms(p, s, 2);
  CHECK(u2[1] == doctest::Approx(0.0).epsilon(1e-14));
}

TEST_CASE("toy panel: variance and confidence interval by hand") {
  Panel p = testing::toy_panel();
  DesignStats s = design_stats(p);

  InfluenceDecomposition d = influence_decomposition(p, s);
  CHECK(d.horizon_variance[0] == doctest::Approx(1.625).epsilon(1e-14));

  ConfidenceInterval ci = analytic_ci_horizon(p, s, 0, 0.05);
  CHECK(ci.estimate == doctest::Approx(1.75));
  CHECK(ci.se == doctest::Approx(std::sqrt(1.625 / 3.0)).epsilon(1e-12));
  double z = normal_quantile(0.975);
  CHECK(ci.lower == doctest::Approx(1.75 - z * std::sqrt(1.625 / 3.0)).epsilon(1e-12));
  CHECK(ci.upper == doctest::Approx(1.75 + z * std::sqrt(1.625 / 3.0)).epsilon(1e-12));
  CHECK_FALSE(ci.degenerate_variance);

  // Aggregate terms reproduce the aggregate exactly.
  CHECK((d.aggregate_terms[0] + d.aggregate_terms[1] + d.aggregate_terms[2]) / 3.0 ==
        doctest::Approx(2.625).epsilon(1e-13));
  CHECK(d.aggregate_terms[0] == doctest::Approx(4.5).epsilon(1e-13));
  CHECK(d.aggregate_terms[1] == doctest::Approx(3.375).epsilon(1e-13));
}

TEST_CASE("influence identity on random designs") {
  Rng rng(41, 0);
  for (int rep = 0; rep < 50; ++rep) {
    Panel p = testing::random_binary_panel(rng, 3 + (int)rng.uniform_int(12), 4 + (int)rng.uniform_int(5),
                                           rep % 2 == 0);
    p.discount = rep % 3 == 0 ? 0.92 : 1.0;
    DesignStats s = design_stats(p);
    const double G = p.group_count();
    for (int l = 0; l <= s.max_horizon; ++l) {
      std::vector<double> u = influence_terms(p, s, l);
      double total = 0.0;
      for (double v : u) total += v;
      double est = horizon_did(p, s, l).first;
      CHECK(total / G == doctest::Approx(est).epsilon(1e-10));
    }
    InfluenceDecomposition d = influence_decomposition(p, s);
    double total = 0.0;
    for (double v : d.aggregate_terms) total += v;
    CHECK(total / G == doctest::Approx(aggregate_effect(p, s)).epsilon(1e-10));
  }
}

TEST_CASE("variance is shift invariant and scales with the outcome") {
  Rng rng(42, 0);
  Panel p = testing::random_binary_panel(rng, 9, 6, false);
  DesignStats s = design_stats(p);
  InfluenceDecomposition base = influence_decomposition(p, s);

  Panel shifted = p;
  Panel scaled = p;
  for (int g = 0; g < p.group_count(); ++g) {
    for (int t = 1; t <= p.period_count(); ++t) {
      shifted.set_outcome(g, t, p.outcome(g, t) + 41.0);
      scaled.set_outcome(g, t, -2.5 * p.outcome(g, t));
    }
  }
  InfluenceDecomposition sh = influence_decomposition(shifted, s);
  InfluenceDecomposition sc = influence_decomposition(scaled, s);
  for (std::size_t l = 0; l < base.horizon_variance.size(); ++l) {
    CHECK(sh.horizon_variance[l] ==
          doctest::Approx(base.horizon_variance[l]).epsilon(1e-9));
    CHECK(std::sqrt(sc.horizon_variance[l]) ==
          doctest::Approx(2.5 * std::sqrt(base.horizon_variance[l])).epsilon(1e-9));
  }
}

TEST_CASE("identical outcomes: interval still centers on the estimate") {
  Panel p = testing::toy_panel();
  for (int g = 0; g < 3; ++g) {
    for (int t = 1; t <= 4; ++t) p.set_outcome(g, t, 1.0 + t);
  }
  DesignStats s = design_stats(p);
  ConfidenceInterval ci = analytic_ci_horizon(p, s, 0, 0.05);
  CHECK(ci.estimate == doctest::Approx(0.0).epsilon(1e-14));
  CHECK(ci.lower <= ci.estimate);
  CHECK(ci.upper >= ci.estimate);
}

TEST_CASE("trimmed-aggregate interval matches the full one at the last horizon") {
  Panel p = testing::toy_panel();
  DesignStats s = design_stats(p);
  ConfidenceInterval full = analytic_ci_aggregate(p, s, 0.05);
  ConfidenceInterval trimmed = analytic_ci_trimmed(p, s, s.max_horizon, 0.05);
  CHECK(trimmed.estimate == doctest::Approx(full.estimate).epsilon(1e-13));
  CHECK(trimmed.se == doctest::Approx(full.se).epsilon(1e-13));
  CHECK(analytic_ci_trimmed(p, s, 1, 0.05).estimate == doctest::Approx(2.375));
}

TEST_CASE("bootstrap: determinism and the two-replicate contract") {
  Panel p = testing::toy_panel();
  BootstrapSpec spec;
  spec.replications = 2;
  spec.seed = 77;
  auto stat = [](const Panel& resample) {
    DesignStats s = design_stats(resample);
    return std::vector<double>{aggregate_effect(resample, s)};
  };
  BootstrapResult a = cluster_bootstrap(p, spec, stat);
  BootstrapResult b = cluster_bootstrap(p, spec, stat);
  REQUIRE(a.replicates.size() == 2);
  CHECK(a.replicates == b.replicates);  // bitwise identical
  std::vector<double> col = {a.replicates[0][0], a.replicates[1][0]};
  CHECK(a.se[0] == doctest::Approx(sample_sd(col)).epsilon(1e-14));

  spec.threads = 2;
  BootstrapResult c = cluster_bootstrap(p, spec, stat);
  CHECK(a.replicates == c.replicates);  // thread count cannot change draws
}

TEST_CASE("bootstrap: constant statistic has zero spread") {
  Panel p = testing::toy_panel();
  BootstrapSpec spec;
  spec.replications = 20;
  spec.seed = 5;
  BootstrapResult r = cluster_bootstrap(
      p, spec, [](const Panel&) { return std::vector<double>{7.0}; });
  CHECK(r.se[0] == doctest::Approx(0.0));
  CHECK(r.percentile_ci[0][0] == doctest::Approx(7.0));
  CHECK(r.percentile_ci[0][1] == doctest::Approx(7.0));
  CHECK(r.invalid_replicates == 0);
  CHECK(r.covariance(0, 0) == doctest::Approx(0.0));
}

TEST_CASE("bootstrap: undefined replicates are dropped and counted") {
  Panel p = testing::toy_panel();
  BootstrapSpec spec;
  spec.replications = 100;
  spec.seed = 9;
  // Undefined whenever the resample misses the never-treated group.
  auto stat = [](const Panel& resample) {
    bool has_control = false;
    for (int g = 0; g < resample.group_count(); ++g) {
      if (resample.groups[g] == "g3") has_control = true;
    }
    if (!has_control) throw estimation_error("no controls in resample");
    return std::vector<double>{1.0};
  };
  BootstrapResult r = cluster_bootstrap(p, spec, stat);
  CHECK(r.invalid_replicates > 0);
  CHECK(r.invalid_replicates + static_cast<int>(r.replicates.size()) == 100);

  // A statistic undefined on most resamples is a hard error.
  auto picky = [](const Panel& resample) -> std::vector<double> {
    std::set<std::string> names(resample.groups.begin(), resample.groups.end());
    if (names.size() < 3) throw estimation_error("needs all three groups");
    return {1.0};
  };
  CHECK_THROWS_WITH_AS(cluster_bootstrap(p, spec, picky),
                       doctest::Contains("design too sparse"), estimation_error);
}

TEST_CASE("bootstrap: vector statistics get a covariance") {
  Panel p = testing::toy_panel();
  BootstrapSpec spec;
  spec.replications = 60;
  spec.seed = 123;
  auto stat = [](const Panel& resample) {
    DesignStats s = design_stats(resample);
    double x = horizon_did(resample, s, 0).first;
    return std::vector<double>{x, 2.0 * x};
  };
  BootstrapResult r = cluster_bootstrap(p, spec, stat);
  CHECK(r.covariance(0, 1) == doctest::Approx(2.0 * r.covariance(0, 0)).epsilon(1e-10));
  CHECK(r.covariance(1, 1) == doctest::Approx(4.0 * r.covariance(0, 0)).epsilon(1e-10));
  CHECK(r.se[1] == doctest::Approx(2.0 * r.se[0]).epsilon(1e-10));
}

TEST_CASE("bootstrap: fewer than two replications is rejected") {
  Panel p = testing::toy_panel();
  BootstrapSpec spec;
  spec.replications = 1;
  CHECK_THROWS_AS(
      cluster_bootstrap(p, spec, [](const Panel&) { return std::vector<double>{1.0}; }),
      validation_error);
}
