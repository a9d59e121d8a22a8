#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "didkit/event_study.hpp"
#include "didkit/inference.hpp"
#include "didkit/placebo.hpp"
#include "didkit/simulate.hpp"
#include "didkit/twfe.hpp"

namespace didkit {

/// Everything needed to reproduce a run, recorded verbatim in every output
/// bundle.
struct RunManifest {
  std::string subcommand;
  std::string input_path;
  std::string output_dir;
  std::string tool_version;
  std::string input_hash;  // fnv1a-64 of the input bytes, hex
  ColumnMap columns;
  double discount = 1.0;
  double treatment_tolerance = 0.0;
  std::string arm = "plus";
  int trim_k = -1;
  int bootstrap_replications = 0;
  std::uint64_t seed = 0;
  double alpha = 0.05;
};

nlohmann::json manifest_json(const RunManifest& manifest);

/// Hex fingerprint of a file's bytes. Throws validation_error when unreadable.
std::string hash_file(const std::string& path);

/// Assembled estimation output: point estimates, placebos, and inference for
/// one arm of one panel.
struct EventStudyReport {
  RunManifest manifest;
  std::vector<std::string> group_names;
  EventStudyResult result;
  PlaceboResult placebos;                       // max_horizon == -1 when none
  std::map<int, ConfidenceInterval> horizon_ci;
  std::map<int, ConfidenceInterval> trimmed_ci;  // keyed like result.trimmed
  std::map<int, ConfidenceInterval> placebo_ci;
  std::optional<ConfidenceInterval> aggregate_ci;
  bool has_joint_test = false;
  JointTest joint_test;
  std::vector<std::string> warnings;
};

/// Runs the full estimation pipeline for one arm: event study, placebos,
/// analytic inference where available (initially-untreated arm), and a group
/// bootstrap for everything else including the placebo joint test.
EventStudyReport build_estimate_report(const Panel& panel, const RunManifest& manifest);

/// One row of the flat results table (one per horizon per series).
struct SeriesRow {
  std::string arm;
  std::string series;  // effect | placebo | reference | aggregate | trimmed
  int key = 0;         // horizon or trim depth
  double x = 0.0;      // event-study x position
  double estimate = 0.0;
  double first_stage = 0.0;
  double mass = 0.0;
  int n_groups = 0;
  double se = 0.0;
  double ci_lower = 0.0;
  double ci_upper = 0.0;
  std::string method;
};

std::vector<SeriesRow> report_rows(const EventStudyReport& report);
std::vector<SeriesRow> placebo_rows(const EventStudyReport& report);
std::string rows_to_csv(const std::vector<SeriesRow>& rows);
std::vector<SeriesRow> rows_from_csv(const std::string& text);

nlohmann::json report_json(const EventStudyReport& report);
nlohmann::json placebo_report_json(const EventStudyReport& report);

nlohmann::json weight_report_json(const WeightReport& report, const RunManifest& manifest);
std::string weight_report_csv(const WeightReport& report, const Panel& panel);
std::string weight_report_summary(const WeightReport& report);

nlohmann::json sim_report_json(const SimReport& report, const RunManifest& manifest);
std::string sim_report_csv(const SimReport& report);

}  // namespace didkit
