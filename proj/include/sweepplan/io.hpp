// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "sweepplan/analysis.hpp"
#include "sweepplan/fitting.hpp"
#include "sweepplan/mixture.hpp"
#include "sweepplan/search_space.hpp"
#include "sweepplan/surrogate.hpp"
#include "sweepplan/train_config.hpp"

#include <json.hpp>

#include <filesystem>
#include <iosfwd>
#include <string>

namespace sweepplan {

using Json = nlohmann::ordered_json;

/// Shortest decimal text that reads back to the same double.
std::string format_double(double v);

Json setup_to_json(const SetupSpec& setup);
Json plan_to_json(const TrainingPlan& plan);
Json schedule_to_json(const ScheduleSpec& schedule);

Json surrogate_to_json(const SurrogateParams& params);
/// Overlays the keys present in `j` onto `base`. Unknown keys are a parse error.
SurrogateParams surrogate_from_json(const nlohmann::json& j, SurrogateParams base = {});

// Fitted models share the envelope {model_type, parameters, diagnostics{rss, n_points, warnings}}.
Json epoch_fits_to_json(const EpochFitSummary& fits, const std::string& pair, Approach category);
Json kstar_to_json(const KStarModel& model, std::size_t skipped_extrapolated = 0);
KStarModel kstar_from_json(const nlohmann::json& j);
Json ratio_to_json(const RatioPowerLawFit& fit, std::size_t dropped_groups = 0);
RatioPowerLawFit ratio_from_json(const nlohmann::json& j);

Json report_to_json(const AnalysisReport& report, const IngestReport& ingest);

/// Per (pair, C, D_T): best loss of each category.
void write_minima_csv(std::ostream& out, const AnalysisReport& report);
/// Per (pair, C, D_T, M): best loss inside multi-2stage, with the column winner marked.
void write_scale_csv(std::ostream& out, const AnalysisReport& report);
/// Per (C, D_T, k): best loss and the fitted quadratic.
void write_epoch_csv(std::ostream& out, const EpochFitSummary& fits, const std::string& pair);
/// Per single-stage k = 1 point: (M, D, r, L) with the power-law prediction.
void write_ratio_csv(std::ostream& out, const RatioInputs& inputs, const RatioPowerLawFit* fit);

/// Human-readable digest of a report.
std::string render_summary(const AnalysisReport& report);

/// Writes through a sibling temporary file and renames it into place.
void write_file_atomic(const std::filesystem::path& path, const std::string& content);
std::string read_file(const std::filesystem::path& path);

} // namespace sweepplan
