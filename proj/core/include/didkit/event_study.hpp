#pragma once

#include <cmath>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "didkit/design.hpp"
#include "didkit/panel.hpp"

namespace didkit {

/// Which groups anchor the comparison: those starting untreated (plus), those
/// starting treated (minus, binary designs only), or both pooled.
enum class Arm { plus, minus, combined };

std::string arm_name(Arm arm);
Arm parse_arm(const std::string& name);

struct HorizonEffect {
  double estimate = 0.0;     // reduced-form effect at this horizon
  double first_stage = 0.0;  // average dose change behind the effect
  double mass = 0.0;         // discounted switcher mass
  std::vector<int> groups;   // switcher groups entering the average
};

struct EventStudyResult {
  Arm arm = Arm::plus;
  std::map<int, HorizonEffect> horizons;  // horizon -> effect; absent when no mass
  double aggregate = std::numeric_limits<double>::quiet_NaN();
  std::map<int, double> trimmed;          // k -> aggregate restricted to horizons 0..k
  int max_horizon = -1;
  int excluded_cells = 0;       // non-monotone dose-path cells dropped (non-binary designs)
  int negative_path_cells = 0;  // cells entering with a flipped sign (dose fell)
  bool plus_arm_empty = false;
  bool minus_arm_empty = false;
};

/// DID comparing group g's outcome change from the period before its first
/// switch to `horizon` periods after it, against groups with the same
/// period-1 dose whose treatment has not changed yet. The anchor of every
/// estimator in this module.
double switcher_did(const Panel& panel, const DesignStats& stats, int g, int horizon);

/// (reduced-form effect, first-stage dose) at one horizon, averaged over
/// initially-untreated switchers with the design's discounted-mass weights.
std::pair<double, double> horizon_did(const Panel& panel, const DesignStats& stats,
                                      int horizon);

/// Ratio of mass-weighted reduced-form effects to mass-weighted first-stage
/// doses across all horizons; the cost-benefit / total-effect-per-unit
/// aggregate for the initially-untreated arm.
double aggregate_effect(const Panel& panel, const DesignStats& stats);

/// Same ratio restricted to horizons 0..k.
double trimmed_aggregate(const Panel& panel, const DesignStats& stats, int k);

/// Full event study for the initially-untreated arm.
EventStudyResult event_study_plus(const Panel& panel, const DesignStats& stats);

/// Event study for initially-treated groups in a binary design, computed by
/// flipping the treatment, running the initially-untreated machinery, and
/// negating reduced-form estimates (their status quo is to stay treated).
EventStudyResult event_study_minus(const Panel& panel);

struct ArmPair {
  EventStudyResult minus;
  EventStudyResult combined;
};

/// Both the initially-treated arm and the pooled estimator combining arms
/// with weights proportional to switcher mass. An arm without usable
/// switchers is reported empty and flagged; at least one arm must be usable.
ArmPair minus_and_combined(const Panel& panel);

/// Dispatch on arm. `plus` requires a non-pathological initially-untreated
/// arm; `minus`/`combined` require a binary treatment.
EventStudyResult event_study(const Panel& panel, Arm arm);

/// General-design event study: groups are matched to controls on their exact
/// period-1 dose, cells whose dose path is not weakly monotone relative to
/// that baseline are dropped (and counted), and per-baseline aggregates are
/// pooled with mass weights. Specializes to `combined` on binary panels.
EventStudyResult event_study_general(const Panel& panel);

/// D -> 1 - D. Requires a binary treatment.
Panel invert_binary_treatment(const Panel& panel);

}  // namespace didkit
