// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "sweepplan/fitting.hpp"
#include "sweepplan/search_space.hpp"

#include <cstddef>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace sweepplan {

struct LossRecord {
    std::string setup_id;
    std::string language_pair;
    double val_loss = 0.0;
};

inline constexpr const char* kResultsHeader = "setup_id,language_pair,val_loss";

void write_results_csv(std::ostream& out, std::span<const LossRecord> records);

/// One accepted measurement; `setup` indexes ResultSet::setups.
struct Measurement {
    std::size_t setup;
    std::string language_pair;
    double val_loss;
};

/// Immutable snapshot of validated results. Measurements are sorted by
/// (language pair, setup id) and hold at most one loss per pair and setup.
struct ResultSet {
    std::vector<SetupSpec> setups;
    std::vector<Measurement> measurements;

    const SetupSpec& setup_of(const Measurement& m) const { return setups[m.setup]; }
    std::vector<std::string> language_pairs() const;
    /// Measurements for one pair (all pairs when `pair` is empty).
    std::vector<const Measurement*> for_pair(const std::string& pair) const;
};

struct RejectedRecord {
    std::size_t line;
    std::string setup_id;
    std::string reason;
};

struct IngestReport {
    ResultSet results;
    std::vector<RejectedRecord> rejected;
    /// Records dropped because another record for the same (pair, setup) had a lower or equal loss.
    std::size_t duplicates = 0;
};

/// Validates records against the setup catalogue. Unknown ids are rejected
/// (and listed); duplicates keep the minimum loss. Non-positive or
/// non-finite losses raise a validation error. Line numbers count from 1.
IngestReport ingest(std::span<const LossRecord> records, std::span<const SetupSpec> setups);

/// Same, reading a results CSV. Line numbers refer to the file (header is line 1).
IngestReport ingest_csv(std::istream& in, std::span<const SetupSpec> setups);

// ---------------------------------------------------------------------------

struct CategoryBest {
    double loss;
    std::string setup_id;
};

/// Minimum loss of each nested category inside one (f_C, f_D) budget group.
struct CategoryMinima {
    std::string language_pair;
    int f_C;
    int f_D;
    double compute;
    double target_tokens;
    std::optional<CategoryBest> mono;   // mono-1stage
    std::optional<CategoryBest> multi1; // multi-1stage (includes mono)
    std::optional<CategoryBest> multi2; // multi-2stage (includes everything)

    const std::optional<CategoryBest>& at(Approach category) const;
};

/// Sorted by (pair, f_C, f_D).
std::vector<CategoryMinima> category_minima(const ResultSet& results);

struct ComputeOptimalEstimate {
    std::string language_pair;
    int f_C;
    double compute;
    double d_star; // k * D_T of the winning mono-1stage setup
    std::string setup_id;
};

ComputeOptimalEstimate estimate_compute_optimal(const ResultSet& results, const std::string& pair, int f_C);

struct ThresholdReport {
    std::string language_pair;
    int f_C = 0;
    double compute = 0.0;
    double d_star = 0.0;
    bool crossing = false;
    /// Multi-2stage wins at every compared f_D.
    bool no_upper_crossing = false;
    std::optional<int> f_D_low;  // largest f_D where multi-2stage strictly wins
    std::optional<int> f_D_high; // next compared f_D, where it does not
    std::optional<double> target_tokens_low;
    std::optional<double> target_tokens_high;
    std::optional<double> ratio_low; // D_T_low / D*
    std::optional<double> ratio_high;
};

/// `minima` must all share one pair and f_C. A group counts as a win when
/// multi2 < mono - epsilon; equal losses go to mono-1stage. Groups lacking
/// either category are skipped.
ThresholdReport detect_threshold(std::span<const CategoryMinima> minima, double d_star, double epsilon = 0.0);

struct ScaleWinner {
    std::string language_pair;
    int f_C;
    int f_D;
    int f_M;
    double model_scale;
    double loss;
    std::string setup_id;
};

struct ScaleFoldChange {
    std::string language_pair;
    int f_C;
    double fold_change; // max / min winning M across f_D
    int f_M_min;
    int f_M_max;
};

/// Loss of the best setup at one (pair, f_C, f_D, f_M) inside a category.
struct ScaleCell {
    std::string language_pair;
    int f_C;
    int f_D;
    int f_M;
    double loss;
    std::string setup_id;
};

struct ScaleTable {
    std::vector<ScaleCell> cells;
    std::vector<ScaleWinner> winners;
    std::vector<ScaleFoldChange> fold_changes;
};

ScaleTable optimal_scale_table(const ResultSet& results, Approach category = Approach::Multi2Stage);

// ---------------------------------------------------------------------------
// Inputs for the fitters, derived from a result set.

struct EpochCurve {
    int f_C;
    int f_D;
    double compute;
    double target_tokens;
    std::vector<EpochPoint> points; // best loss per f_k within the category
};

std::vector<EpochCurve> epoch_curves(const ResultSet& results, const std::string& pair, Approach category);

struct EpochCurveFit {
    EpochCurve curve;
    QuadraticEpochFit fit;
};

struct EpochFitSummary {
    std::vector<EpochCurveFit> fits;
    std::size_t underdetermined = 0; // curves with fewer than 3 distinct f_k
};

EpochFitSummary fit_epoch_curves(const ResultSet& results, const std::string& pair, Approach category);

struct KStarInputs {
    std::vector<KStarCurvePoint> points;
    std::size_t skipped_extrapolated = 0;
};

KStarInputs kstar_inputs(const EpochFitSummary& fits);

struct RatioInputs {
    std::vector<RatioPoint> points;
    std::size_t dropped_groups = 0; // (M, D) groups with a single ratio
};

/// Single-stage k = 1 measurements grouped by (M, D_total).
RatioInputs ratio_inputs(const ResultSet& results, const std::string& pair);

// ---------------------------------------------------------------------------

struct PairAnalysis {
    std::string language_pair;
    std::vector<CategoryMinima> minima;
    std::vector<ComputeOptimalEstimate> compute_optimal;
    std::vector<ThresholdReport> thresholds;
    ScaleTable scales;
};

struct AnalysisReport {
    std::vector<PairAnalysis> pairs;
    double epsilon = 0.0;
};

AnalysisReport analyze(const ResultSet& results, double epsilon = 0.0);

} // namespace sweepplan
