// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "sweepplan/budget.hpp"

#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace sweepplan {

/// Half-open integer interval [lo, hi).
struct Interval {
    int lo = 0;
    int hi = 0;

    bool contains(int v) const { return v >= lo && v < hi; }
    bool empty() const { return hi <= lo; }
};

/// One row of the factor search table: the f_C values it applies to and the
/// ranges of the remaining factors.
struct SearchRow {
    std::vector<int> compute_factors;
    Interval f_r;
    Interval f_M;
    Interval f_k;
    Interval f_D;
};

struct SearchRanges {
    std::vector<SearchRow> rows;

    /// The published grid: f_C in {0, -1, -2, -3, -4}.
    static SearchRanges defaults();

    /// Keep only the listed f_C values (rows left empty are dropped).
    SearchRanges restricted_to(std::span<const int> compute_factors) const;

    /// Row covering f_C, if any.
    const SearchRow* row_for(int f_C) const;
};

enum class Approach { Mono1Stage, Multi1Stage, Multi2Stage };

const char* to_string(Approach a);
Approach parse_approach(const std::string& text);

/// Category membership for the nested comparison classes:
/// mono-1stage is contained in multi-1stage, which is contained in multi-2stage.
bool in_category(Approach setup_approach, Approach category);

struct TwoStageRatios {
    Fraction r1;
    Fraction r2;

    bool operator==(const TwoStageRatios&) const = default;
};

/// First-stage ratio grid.
std::span<const Fraction> first_stage_ratios();
/// Second-stage ratio grid.
std::span<const Fraction> second_stage_ratios();

struct SetupSpec {
    std::string id;
    FactorTuple factors;
    std::optional<TwoStageRatios> two_stage;
    Approach approach = Approach::Mono1Stage;
    DerivedSetup derived;
    std::optional<StageSplit> split;

    bool is_two_stage() const { return two_stage.has_value(); }
};

/// Validates the factors (and ratios) and builds the canonical setup.
/// Two-stage setups must satisfy r1 < r < r2 strictly.
SetupSpec make_setup(const FactorTuple& factors, std::optional<TwoStageRatios> ratios = std::nullopt);

std::string canonical_id(const FactorTuple& factors, const std::optional<TwoStageRatios>& ratios);

/// Inverse of canonical_id.
SetupSpec parse_setup_id(const std::string& id);

std::vector<SetupSpec> enumerate_single_stage(const SearchRanges& ranges);
std::vector<SetupSpec> enumerate_two_stage(const SearchRanges& ranges);
/// Single-stage setups followed by two-stage setups.
std::vector<SetupSpec> enumerate_all(const SearchRanges& ranges);

using BudgetKey = std::pair<int, int>; // (f_C, f_D)

std::map<BudgetKey, std::vector<SetupSpec>> group_by_budget(std::span<const SetupSpec> setups);

void write_setups_jsonl(std::ostream& out, std::span<const SetupSpec> setups);
std::vector<SetupSpec> read_setups_jsonl(std::istream& in);

} // namespace sweepplan
