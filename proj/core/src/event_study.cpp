#include "didkit/event_study.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

#include "didkit/errors.hpp"

namespace didkit {

namespace {

constexpr double kDenominatorTol = 1e-12;

// One computable switcher cell: group g observed `horizon` periods after its
// first switch, with the mass weight, matched DID, and signed dose gap.
struct SwitcherCell {
  int g = 0;
  double mass = 0.0;
  double did = 0.0;
  double dose_gap = 0.0;  // sign * (D_{g,F+h} - baseline) >= 0 on monotone paths
  int sign = 1;
};

struct ArmCells {
  ArmFrame frame;
  std::vector<std::vector<SwitcherCell>> by_horizon;
  int excluded = 0;

  double horizon_mass(int h) const {
    double m = 0.0;
    for (const auto& c : by_horizon[h]) m += c.mass;
    return m;
  }
  double total_mass() const {
    double m = 0.0;
    for (std::size_t h = 0; h < by_horizon.size(); ++h) m += horizon_mass((int)h);
    return m;
  }
};

double matched_did(const Panel& panel, const std::vector<int>& first_switch, int g,
                   int horizon) {
  const int t = first_switch[g] + horizon;
  const int base = first_switch[g] - 1;
  const double baseline = panel.treatment(g, 1);
  double ctrl_mass = 0.0;
  double ctrl_change = 0.0;
  for (int h = 0; h < panel.group_count(); ++h) {
    if (first_switch[h] <= t) continue;
    if (!panel.same_dose(panel.treatment(h, 1), baseline)) continue;
    double w = panel.cell_size(h, t);
    ctrl_mass += w;
    ctrl_change += w * (panel.outcome(h, t) - panel.outcome(h, base));
  }
  if (!(ctrl_mass > 0.0)) {
    throw estimation_error("no never-switched controls at horizon " +
                           std::to_string(horizon) + " for group " + panel.groups[g]);
  }
  return panel.outcome(g, t) - panel.outcome(g, base) - ctrl_change / ctrl_mass;
}

// +1 when the dose path through period t stays weakly above the baseline,
// -1 when weakly below, 0 when it crosses (cell not interpretable as a
// one-direction exposure and must be dropped).
int path_sign(const Panel& panel, int g, int t) {
  const double baseline = panel.treatment(g, 1);
  const double tol = panel.treatment_tolerance;
  bool up = true, down = true;
  for (int s = 1; s <= t; ++s) {
    double d = panel.treatment(g, s);
    if (d < baseline - tol) up = false;
    if (d > baseline + tol) down = false;
  }
  if (up) return 1;
  if (down) return -1;
  return 0;
}

ArmCells build_arm(const Panel& panel, const std::vector<int>& first_switch,
                   double baseline) {
  ArmCells arm;
  arm.frame = arm_frame(panel, first_switch, baseline);
  if (!arm.frame.usable()) return arm;

  arm.by_horizon.resize(arm.frame.max_horizon + 1);
  for (int h = 0; h <= arm.frame.max_horizon; ++h) {
    for (int g : arm.frame.members) {
      if (first_switch[g] > arm.frame.last_unchanged_period - h) continue;
      const int t = first_switch[g] + h;
      int sign = path_sign(panel, g, t);
      if (sign == 0) {
        ++arm.excluded;
        continue;
      }
      SwitcherCell cell;
      cell.g = g;
      cell.sign = sign;
      cell.mass = std::pow(panel.discount, t) * panel.cell_size(g, t);
      cell.did = matched_did(panel, first_switch, g, h);
      cell.dose_gap = sign * (panel.treatment(g, t) - baseline);
      arm.by_horizon[h].push_back(cell);
    }
  }
  return arm;
}

// Mass-weighted reduced-form and first-stage sums over horizons 0..k.
// Returns {numerator, denominator} of the aggregate ratio.
std::pair<double, double> ratio_sums(const ArmCells& arm, int k) {
  double num = 0.0, den = 0.0;
  for (int h = 0; h <= k && h < (int)arm.by_horizon.size(); ++h) {
    for (const auto& c : arm.by_horizon[h]) {
      num += c.mass * c.sign * c.did;
      den += c.mass * c.dose_gap;
    }
  }
  return {num, den};
}

double arm_ratio(const ArmCells& arm, int k, bool* ok = nullptr) {
  auto [num, den] = ratio_sums(arm, k);
  double scale = 0.0;
  for (int h = 0; h <= k && h < (int)arm.by_horizon.size(); ++h) {
    scale += arm.horizon_mass(h);
  }
  bool valid = scale > 0.0 && std::fabs(den) > kDenominatorTol * scale;
  if (ok) {
    *ok = valid;
    if (!valid) return std::numeric_limits<double>::quiet_NaN();
  } else if (!valid) {
    throw estimation_error("no treatment exposure mass: first-stage denominator is zero");
  }
  return num / den;
}

EventStudyResult assemble_single_arm(const ArmCells& arm, Arm tag) {
  EventStudyResult res;
  res.arm = tag;
  res.max_horizon = arm.frame.max_horizon;
  res.excluded_cells = arm.excluded;
  for (const auto& cells : arm.by_horizon) {
    for (const auto& c : cells) {
      if (c.sign < 0) ++res.negative_path_cells;
    }
  }
  for (int h = 0; h <= arm.frame.max_horizon; ++h) {
    double mass = arm.horizon_mass(h);
    if (!(mass > 0.0)) continue;  // every cell at this horizon was excluded
    HorizonEffect eff;
    eff.mass = mass;
    for (const auto& c : arm.by_horizon[h]) {
      eff.estimate += c.mass * c.sign * c.did / mass;
      eff.first_stage += c.mass * c.dose_gap / mass;
      eff.groups.push_back(c.g);
    }
    std::sort(eff.groups.begin(), eff.groups.end());
    res.horizons[h] = std::move(eff);
  }
  res.aggregate = arm_ratio(arm, arm.frame.max_horizon);
  for (int k = 0; k <= arm.frame.max_horizon; ++k) {
    bool ok = false;
    double v = arm_ratio(arm, k, &ok);
    if (ok) res.trimmed[k] = v;
  }
  return res;
}

void require_binary(const Panel& panel, const char* what) {
  for (int g = 0; g < panel.group_count(); ++g) {
    for (int t = 1; t <= panel.period_count(); ++t) {
      double d = panel.treatment(g, t);
      if (d != 0.0 && d != 1.0) {
        throw validation_error(std::string(what) +
                               " requires a binary treatment; found dose " +
                               format_double(d) + " in group " + panel.groups[g]);
      }
    }
  }
}

}  // namespace

std::string arm_name(Arm arm) {
  switch (arm) {
    case Arm::plus: return "plus";
    case Arm::minus: return "minus";
    case Arm::combined: return "combined";
  }
  return "unknown";
}

Arm parse_arm(const std::string& name) {
  if (name == "plus") return Arm::plus;
  if (name == "minus") return Arm::minus;
  if (name == "combined") return Arm::combined;
  throw validation_error("unknown arm '" + name + "' (expected plus|minus|combined)");
}

double switcher_did(const Panel& panel, const DesignStats& stats, int g, int horizon) {
  const int T = panel.period_count();
  if (g < 0 || g >= panel.group_count()) throw validation_error("group index out of range");
  if (stats.first_switch[g] > T) {
    throw validation_error("group " + panel.groups[g] + " never switches treatment");
  }
  const int t = stats.first_switch[g] + horizon;
  if (horizon < 0 || t > T) {
    throw validation_error("horizon " + std::to_string(horizon) + " out of range for group " +
                           panel.groups[g]);
  }
  return matched_did(panel, stats.first_switch, g, horizon);
}

std::pair<double, double> horizon_did(const Panel& panel, const DesignStats& stats,
                                      int horizon) {
  if (horizon < 0 || horizon > stats.max_horizon) {
    throw validation_error("horizon " + std::to_string(horizon) +
                           " out of range: estimable horizons are 0.." +
                           std::to_string(stats.max_horizon));
  }
  double mass = 0.0, est = 0.0, dose = 0.0;
  for (int g = 0; g < panel.group_count(); ++g) {
    if (!stats.initially_untreated(g)) continue;
    if (stats.first_switch[g] > stats.last_untreated_period - horizon) continue;
    const int t = stats.first_switch[g] + horizon;
    int sign = path_sign(panel, g, t);
    if (sign == 0) continue;
    double m = std::pow(panel.discount, t) * panel.cell_size(g, t);
    mass += m;
    est += m * sign * matched_did(panel, stats.first_switch, g, horizon);
    dose += m * sign * (panel.treatment(g, t) - stats.baseline_treatment[g]);
  }
  if (!(mass > 0.0)) {
    throw estimation_error("no switcher mass at horizon " + std::to_string(horizon));
  }
  return {est / mass, dose / mass};
}

double aggregate_effect(const Panel& panel, const DesignStats& stats) {
  ArmCells arm = build_arm(panel, stats.first_switch, 0.0);
  if (!arm.frame.usable()) {
    throw validation_error("pathological design: initially-untreated arm unusable");
  }
  return arm_ratio(arm, arm.frame.max_horizon);
}

double trimmed_aggregate(const Panel& panel, const DesignStats& stats, int k) {
  if (k < 0 || k > stats.max_horizon) {
    throw validation_error("trim horizon " + std::to_string(k) +
                           " out of range: estimable horizons are 0.." +
                           std::to_string(stats.max_horizon));
  }
  ArmCells arm = build_arm(panel, stats.first_switch, 0.0);
  return arm_ratio(arm, k);
}

EventStudyResult event_study_plus(const Panel& panel, const DesignStats& stats) {
  ArmCells arm = build_arm(panel, stats.first_switch, 0.0);
  if (!arm.frame.usable()) {
    throw validation_error("pathological design: initially-untreated arm unusable");
  }
  return assemble_single_arm(arm, Arm::plus);
}

Panel invert_binary_treatment(const Panel& panel) {
  require_binary(panel, "treatment inversion");
  Panel out = panel;
  for (double& d : out.treatment_) d = 1.0 - d;
  return out;
}

EventStudyResult event_study_minus(const Panel& panel) {
  Panel inverted = invert_binary_treatment(panel);
  std::vector<int> first = first_switch_periods(inverted);
  ArmCells arm = build_arm(inverted, first, 0.0);
  if (!arm.frame.usable()) {
    throw validation_error(
        "pathological design: no usable initially-treated switchers");
  }
  EventStudyResult res = assemble_single_arm(arm, Arm::minus);
  // Effects are defined against the always-treated status quo, so the
  // inverted-panel comparison enters with a minus sign. First stages are dose
  // magnitudes and keep their sign.
  for (auto& [h, eff] : res.horizons) eff.estimate = -eff.estimate;
  res.aggregate = -res.aggregate;
  for (auto& [k, v] : res.trimmed) v = -v;
  return res;
}

namespace {

EventStudyResult combine_arms(const EventStudyResult* plus, const EventStudyResult* minus,
                              const std::vector<double>* plus_mass_by_k,
                              const std::vector<double>* minus_mass_by_k) {
  EventStudyResult res;
  res.arm = Arm::combined;
  res.plus_arm_empty = plus == nullptr;
  res.minus_arm_empty = minus == nullptr;

  std::set<int> keys;
  if (plus) {
    for (const auto& [h, e] : plus->horizons) keys.insert(h);
    res.excluded_cells += plus->excluded_cells;
    res.negative_path_cells += plus->negative_path_cells;
  }
  if (minus) {
    for (const auto& [h, e] : minus->horizons) keys.insert(h);
    res.excluded_cells += minus->excluded_cells;
    res.negative_path_cells += minus->negative_path_cells;
  }
  for (int h : keys) {
    const HorizonEffect* a = nullptr;
    const HorizonEffect* b = nullptr;
    if (plus) {
      auto it = plus->horizons.find(h);
      if (it != plus->horizons.end()) a = &it->second;
    }
    if (minus) {
      auto it = minus->horizons.find(h);
      if (it != minus->horizons.end()) b = &it->second;
    }
    HorizonEffect eff;
    double mass = (a ? a->mass : 0.0) + (b ? b->mass : 0.0);
    eff.mass = mass;
    if (a) {
      eff.estimate += a->mass / mass * a->estimate;
      eff.first_stage += a->mass / mass * a->first_stage;
      eff.groups.insert(eff.groups.end(), a->groups.begin(), a->groups.end());
    }
    if (b) {
      eff.estimate += b->mass / mass * b->estimate;
      eff.first_stage += b->mass / mass * b->first_stage;
      eff.groups.insert(eff.groups.end(), b->groups.begin(), b->groups.end());
    }
    std::sort(eff.groups.begin(), eff.groups.end());
    res.horizons[h] = std::move(eff);
    res.max_horizon = std::max(res.max_horizon, h);
  }

  auto arm_total = [](const EventStudyResult* r) {
    double m = 0.0;
    if (r) {
      for (const auto& [h, e] : r->horizons) m += e.mass;
    }
    return m;
  };
  double mp = arm_total(plus);
  double mm = arm_total(minus);
  res.aggregate = 0.0;
  if (plus) res.aggregate += mp / (mp + mm) * plus->aggregate;
  if (minus) res.aggregate += mm / (mp + mm) * minus->aggregate;

  // Trimming an arm past its own last horizon leaves it untrimmed, so the arm
  // keeps contributing its full aggregate and mass at larger k.
  for (int k = 0; k <= res.max_horizon; ++k) {
    double wp = 0.0, wm = 0.0;
    double vp = 0.0, vm = 0.0;
    if (plus && plus_mass_by_k) {
      int kk = std::min(k, plus->max_horizon);
      auto it = plus->trimmed.find(kk);
      if (it != plus->trimmed.end()) {
        wp = (*plus_mass_by_k)[kk];
        vp = it->second;
      }
    }
    if (minus && minus_mass_by_k) {
      int kk = std::min(k, minus->max_horizon);
      auto it = minus->trimmed.find(kk);
      if (it != minus->trimmed.end()) {
        wm = (*minus_mass_by_k)[kk];
        vm = it->second;
      }
    }
    if (wp + wm <= 0.0) continue;
    res.trimmed[k] = (wp * vp + wm * vm) / (wp + wm);
  }
  return res;
}

// Cumulative switcher mass through horizon k, clamped at the arm's largest
// horizon so later combined horizons keep weighting the arm by all its mass.
std::vector<double> cumulative_mass(const EventStudyResult& r, int upto) {
  std::vector<double> out(upto + 1, 0.0);
  double run = 0.0;
  for (int k = 0; k <= upto; ++k) {
    auto it = r.horizons.find(k);
    if (it != r.horizons.end()) run += it->second.mass;
    out[k] = run;
  }
  return out;
}

}  // namespace

ArmPair minus_and_combined(const Panel& panel) {
  require_binary(panel, "the initially-treated arm");

  bool has_plus = true;
  EventStudyResult plus;
  try {
    plus = event_study_plus(panel, design_stats(panel));
  } catch (const validation_error&) {
    has_plus = false;
  }

  bool has_minus = true;
  EventStudyResult minus;
  try {
    minus = event_study_minus(panel);
  } catch (const validation_error&) {
    has_minus = false;
  }

  if (!has_plus && !has_minus) {
    throw validation_error(
        "pathological design: neither arm has switchers with usable controls");
  }

  ArmPair pair;
  if (has_minus) {
    pair.minus = minus;
  } else {
    pair.minus.arm = Arm::minus;
    pair.minus.minus_arm_empty = true;
  }

  int top = std::max(has_plus ? plus.max_horizon : -1,
                     has_minus ? minus.max_horizon : -1);
  std::vector<double> pm, mm;
  if (has_plus) pm = cumulative_mass(plus, top);
  if (has_minus) mm = cumulative_mass(minus, top);
  pair.combined = combine_arms(has_plus ? &plus : nullptr, has_minus ? &minus : nullptr,
                               has_plus ? &pm : nullptr, has_minus ? &mm : nullptr);
  return pair;
}

EventStudyResult event_study(const Panel& panel, Arm arm) {
  switch (arm) {
    case Arm::plus: return event_study_plus(panel, design_stats(panel));
    case Arm::minus: return event_study_minus(panel);
    case Arm::combined: return minus_and_combined(panel).combined;
  }
  throw validation_error("unknown arm");
}

EventStudyResult event_study_general(const Panel& panel) {
  panel.validate();
  std::vector<int> first = first_switch_periods(panel);

  // Distinct baseline doses, merged under the panel's dose tolerance.
  std::vector<double> baselines;
  for (int g = 0; g < panel.group_count(); ++g) {
    double b = panel.treatment(g, 1);
    bool known = false;
    for (double v : baselines) {
      if (panel.same_dose(v, b)) {
        known = true;
        break;
      }
    }
    if (!known) baselines.push_back(b);
  }
  std::sort(baselines.begin(), baselines.end());

  std::vector<ArmCells> arms;
  int excluded = 0;
  for (double b : baselines) {
    ArmCells arm = build_arm(panel, first, b);
    excluded += arm.excluded;
    if (arm.frame.usable()) arms.push_back(std::move(arm));
  }
  if (arms.empty()) {
    throw validation_error(
        "pathological design: no baseline dose has switchers with usable controls");
  }

  EventStudyResult res;
  res.arm = Arm::combined;
  res.excluded_cells = excluded;
  for (const auto& arm : arms) {
    res.max_horizon = std::max(res.max_horizon, arm.frame.max_horizon);
    for (const auto& cells : arm.by_horizon) {
      for (const auto& c : cells) {
        if (c.sign < 0) ++res.negative_path_cells;
      }
    }
  }

  // Horizon effects pool cells across baselines directly; they are plain
  // mass-weighted averages so pooling and arm-combining coincide.
  for (int h = 0; h <= res.max_horizon; ++h) {
    HorizonEffect eff;
    for (const auto& arm : arms) {
      if (h >= (int)arm.by_horizon.size()) continue;
      for (const auto& c : arm.by_horizon[h]) {
        eff.mass += c.mass;
        eff.groups.push_back(c.g);
      }
    }
    if (!(eff.mass > 0.0)) continue;
    for (const auto& arm : arms) {
      if (h >= (int)arm.by_horizon.size()) continue;
      for (const auto& c : arm.by_horizon[h]) {
        eff.estimate += c.mass * c.sign * c.did / eff.mass;
        eff.first_stage += c.mass * c.dose_gap / eff.mass;
      }
    }
    std::sort(eff.groups.begin(), eff.groups.end());
    res.horizons[h] = std::move(eff);
  }

  // Aggregates are ratios, so arms are combined at the ratio level with mass
  // weights, matching the binary combined estimator exactly.
  auto combine_ratios = [&](int k, bool* any) {
    double total_mass = 0.0, value = 0.0;
    for (const auto& arm : arms) {
      int top = std::min(k, arm.frame.max_horizon);
      double m = 0.0;
      for (int h = 0; h <= top; ++h) m += arm.horizon_mass(h);
      if (!(m > 0.0)) continue;
      bool ok = false;
      double r = arm_ratio(arm, top, &ok);
      if (!ok) continue;
      total_mass += m;
      value += m * r;
    }
    if (any) *any = total_mass > 0.0;
    return total_mass > 0.0 ? value / total_mass
                            : std::numeric_limits<double>::quiet_NaN();
  };

  bool any = false;
  res.aggregate = combine_ratios(res.max_horizon, &any);
  if (!any) {
    throw estimation_error("no treatment exposure mass: first-stage denominator is zero");
  }
  for (int k = 0; k <= res.max_horizon; ++k) {
    bool ok = false;
    double v = combine_ratios(k, &ok);
    if (ok) res.trimmed[k] = v;
  }
  return res;
}

}  // namespace didkit
