#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "didkit/panel.hpp"

namespace didkit {

enum class AssignmentRule {
  staggered_binary,
  nonstaggered_binary,
  intensity_x_period,
  local_projection_staggered,
};

AssignmentRule parse_assignment_rule(const std::string& name);

struct Assignment {
  AssignmentRule rule = AssignmentRule::staggered_binary;
  double never_share = 0.25;            // groups that never switch
  double initially_treated_share = 0.0; // binary rules: start treated
  double revert_prob = 0.0;             // non-staggered: flip back probability
  int min_switch = 2;                   // earliest switch period
  int switch_period = 2;                // intensity rule: the common switch date
  std::vector<double> intensities = {0.0, 1.0};  // dose pool for intensity rules
};

struct Baseline {
  double group_sd = 1.0;
  double period_sd = 1.0;
  double noise_sd = 1.0;
  double ar1 = 0.0;          // within-group serial correlation of the noise
  double trend_slope = 0.0;  // switcher-specific linear trend; breaks parallel trends
};

/// Treatment effects enter linearly in current and past doses:
/// effect(g, t) = sum_s kappa(g, s, t) * D_{g,s}. The kernel covers constant,
/// group-varying, time-profile, and distributed-lag effect models; potential
/// outcomes are monotone in every dose exactly when the kernel is nonnegative.
struct EffectModel {
  enum class Kind { none, cumulative, distributed_lag };
  Kind kind = Kind::none;
  double tau = 0.0;          // per-unit per-period effect
  double group_spread = 0.0; // tau_g = tau * (1 + group_spread * u_g), u_g in (-.5,.5)
  double time_ramp = 0.0;    // kernel multiplier 1 + time_ramp * (t - s)
  std::vector<double> lag_coefficients;  // distributed-lag kernel

  double kernel(int g, int n_groups, int dose_period, int outcome_period) const;
  bool monotone(int n_groups, int n_periods) const;
};

struct SimAssertion {
  std::string kind;  // bias_within | placebo_bias_within | coverage_at_least |
                     // placebo_rejection_between
  double a = 0.0;
  double b = 0.0;
};

struct SimConfig {
  int n_groups = 2;
  int n_periods = 2;
  Assignment assignment;
  Baseline baseline;
  EffectModel effect;
  int replications = 100;
  std::uint64_t seed = 1;
  double discount = 1.0;
  bool redraw_design = false;  // default: condition on one realized design
  int bootstrap_replications = 100;
  double alpha = 0.05;
  bool tabulate_placebos = true;
  bool tabulate_coverage = true;
  bool twfe_intensity_event_study = false;
  int twfe_distributed_lags = -1;  // >= 0 tabulates the implied-event-study gap
  std::vector<SimAssertion> assertions;

  void validate() const;
  static SimConfig from_json_string(const std::string& text);
  static SimConfig from_json_file(const std::string& path);
};

/// Exact effects implied by the realized design and the effect model,
/// evaluated from potential outcomes (never from estimates).
struct PanelTruth {
  std::vector<double> horizon_effect;            // per horizon 0..max_horizon
  double aggregate = 0.0;
  std::vector<std::vector<double>> group_effect; // [g][horizon], switchers only
  int max_horizon = -1;
};

struct GeneratedPanel {
  Panel panel;
  PanelTruth truth;
};

/// Draws one replicate. The design is a function of (config) alone unless
/// redraw_design is set, so replicates share D and differ only in noise.
GeneratedPanel generate(const SimConfig& config, int replicate);

struct EstimandSummary {
  double truth = 0.0;
  double mc_mean = 0.0;
  double mc_se = 0.0;    // standard error of the Monte Carlo mean
  double sd = 0.0;       // across-replicate standard deviation
  double bias = 0.0;
  double coverage = -1;  // -1 when not tabulated
  int replications = 0;
};

struct SimReport {
  int n_groups = 0;
  int n_periods = 0;
  int max_horizon = -1;
  int replications = 0;
  std::map<int, EstimandSummary> horizon;   // reduced-form effects
  EstimandSummary aggregate;
  std::map<int, EstimandSummary> placebo;   // truth is zero
  double placebo_rejection_rate = -1;       // joint test at alpha
  int placebo_tests = 0;
  std::map<int, EstimandSummary> twfe_event_study;  // per period coefficient
  std::map<int, EstimandSummary> implied_gap;       // implied minus direct, per horizon
  std::vector<std::string> assertion_failures;
};

SimReport run_monte_carlo(const SimConfig& config);

/// Brute-force group-time effect aggregation for binary staggered designs
/// with no discounting: each adopter's DID against the pool of not-yet-treated
/// groups, mass-aggregated per horizon. An independent implementation kept
/// free of the estimator machinery, used to cross-check the event-study path.
std::map<int, double> group_time_att_oracle(const Panel& panel);

}  // namespace didkit
