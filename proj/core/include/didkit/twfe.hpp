#pragma once

#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "didkit/panel.hpp"

namespace didkit {

/// One regressor for the fixed-effects solver, as a full G x T value grid
/// (indexed by Panel::cell).
struct RegressorColumn {
  std::string name;
  std::vector<double> values;
};

/// Cell filter: include (g, t) in the estimation sample (t is 1-based).
using CellFilter = std::function<bool(int g, int t)>;

struct FeFit {
  std::vector<double> coefficients;  // per regressor
  std::vector<std::string> names;
  std::vector<double> residuals;  // per included cell, sample order
  std::vector<int> cell_group;    // row map: group index per row
  std::vector<int> cell_period;   // row map: period (1-based) per row
};

/// Weighted least squares of `outcome` on group and period fixed effects plus
/// the given regressors, over the included cells, weighting each cell by its
/// size. Fixed effects are absorbed by iterated weighted demeaning; the
/// demeaned system is then solved by dense column-pivoted QR. Rank-deficient
/// regressor sets raise an estimation_error naming the collinear columns.
FeFit fe_regression(const Panel& panel, const std::vector<double>& outcome,
                    const std::vector<RegressorColumn>& regressors,
                    const CellFilter& include = {});

enum class TwfeSpec { intensity_x_period, distributed_lag, local_projection };

std::string twfe_spec_name(TwfeSpec spec);

struct WeightCell {
  int g = 0;
  int t = 0;  // 0 for per-group weights
  double weight = 0.0;
};

struct WeightSummary {
  int n_positive = 0;
  int n_negative = 0;
  double sum_positive = 0.0;
  double sum_negative = 0.0;
  double total = 0.0;
  double min_weight = std::numeric_limits<double>::infinity();
};

WeightSummary summarize_weights(const std::vector<WeightCell>& cells);

/// Decomposition weights attached to one regression coefficient.
struct LagWeights {
  int target = 0;           // target lag (distributed lag) or horizon
  double coefficient = std::numeric_limits<double>::quiet_NaN();
  std::vector<WeightCell> weights;
  // Per contaminating lag: count/mass of the weights over the cells where
  // that lag's treatment is nonzero. The own-lag entry sums to one, the
  // others to zero. Single self entry for the closed-form specs.
  std::map<int, WeightSummary> term_summaries;
};

struct WeightReport {
  TwfeSpec spec = TwfeSpec::intensity_x_period;
  int parameter = 0;  // common switch period (prop 1), K (lags), or horizon
  std::vector<LagWeights> families;
  std::vector<std::string> notes;
};

/// Intensity-times-period design D = I_g * 1{t >= F} with one common switch
/// period. Throws validation_error when the panel does not match.
struct IntensityDesign {
  int switch_period = 0;
  std::vector<double> intensity;
};
IntensityDesign detect_intensity_design(const Panel& panel);

/// Staggered intensity design D = I_g * 1{t >= F_g}.
struct StaggeredIntensityDesign {
  std::vector<int> first_switch;  // T+1 when never treated
  std::vector<double> intensity;
};
StaggeredIntensityDesign detect_staggered_intensity(const Panel& panel);

/// Coefficients of the event-study regression of the outcome on group and
/// period fixed effects and intensity-times-period indicators, keyed by
/// period (the pre-switch reference period is omitted).
std::map<int, double> intensity_event_study(const Panel& panel);

/// Closed-form decomposition weights of the intensity-times-period
/// regression coefficient: one weight per treated group, proportional to
/// N_g I_g (I_g - mean intensity), summing to one. Flags groups whose
/// intensity lies strictly between zero and the mean (their effects enter
/// negatively). `coefficient_period` picks which period's coefficient to
/// report (defaults to the switch period).
WeightReport intensity_weights(const Panel& panel,
                               std::optional<int> coefficient_period = {});

/// Decomposition of each distributed-lag coefficient (lags 0..lag_count) in
/// the subsample t >= lag_count+1: per-cell weights proportional to the
/// residual of that lag on the other lags and the fixed effects.
WeightReport distributed_lag_weights(const Panel& panel, int lag_count);

/// Closed-form weights of the local-projection coefficient at the given
/// horizon in a staggered intensity design, over the subsample t <= T-horizon.
WeightReport local_projection_weights(const Panel& panel, int horizon);

/// Distributed-lag coefficient estimates (lags 0..lag_count).
std::vector<double> distributed_lag_coefficients(const Panel& panel, int lag_count);

/// Event-study effects implied by the distributed-lag coefficients under a
/// constant-effect model: plugs the estimated lag coefficients and the
/// realized treatment paths into the horizon-effect definition.
std::map<int, double> implied_event_study(const Panel& panel, int lag_count);

}  // namespace didkit
