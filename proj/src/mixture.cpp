// SPDX-License-Identifier: Apache-2.0
#include "sweepplan/mixture.hpp"

#include "sweepplan/error.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

namespace sweepplan {

std::int64_t unique_target_tokens(const DerivedSetup& setup) {
    return static_cast<std::int64_t>(std::llround(setup.target_tokens));
}

std::int64_t total_training_tokens(const DerivedSetup& setup) {
    // D_total = k * D_T * 2^f_r exactly in integers.
    return unique_target_tokens(setup) * (std::int64_t{1} << setup.factors.f_k) *
           (std::int64_t{1} << setup.factors.f_r);
}

std::vector<StageTokenBudget> stage_budgets(const DerivedSetup& setup, const std::optional<StageSplit>& split,
                                            std::optional<std::int64_t> high_available) {
    const std::int64_t total = total_training_tokens(setup);
    const std::int64_t target = unique_target_tokens(setup) * (std::int64_t{1} << setup.factors.f_k);

    std::vector<StageTokenBudget> out;
    if (!split) {
        out.push_back({1, total, target, total - target, setup.ratio});
    } else {
        StageTokenBudget first{1, floor_mul(split->s1, total), floor_mul(split->r1 * split->s1, total), 0,
                               split->r1};
        first.high = first.total - first.target;
        StageTokenBudget second{2, total - first.total, target - first.target, 0, split->r2};
        second.high = second.total - second.target;
        out.push_back(first);
        out.push_back(second);
    }

    std::int64_t high_total = 0;
    for (const auto& b : out) {
        if (b.high < 0 || b.target < 0) {
            throw Error(ErrorCode::Validation, "negative stage budget");
        }
        high_total += b.high;
    }
    if (high_available && high_total > *high_available) {
        throw Error(ErrorCode::InsufficientCorpus,
                    "setup needs " + std::to_string(high_total) + " high-resource tokens but only " +
                        std::to_string(*high_available) + " are available");
    }
    return out;
}

std::uint64_t mix64(std::uint64_t x) {
    x ^= x >> 30;
    x *= 0xBF58476D1CE4E5B9ULL;
    x ^= x >> 27;
    x *= 0x94D049BB133111EBULL;
    x ^= x >> 31;
    return x;
}

std::vector<std::uint64_t> epoch_seeds(std::int64_t k, std::uint64_t base_seed) {
    if (k < 1) {
        throw Error(ErrorCode::Validation, "epoch count must be >= 1");
    }
    std::vector<std::uint64_t> seeds;
    seeds.reserve(static_cast<std::size_t>(k));
    for (std::int64_t i = 1; i <= k; ++i) {
        seeds.push_back(mix64(base_seed + static_cast<std::uint64_t>(i) * 0x9E3779B97F4A7C15ULL));
    }
    return seeds;
}

InterleavePattern::InterleavePattern(Fraction ratio, std::int64_t batch_tokens)
    : ratio_(ratio), batch_tokens_(batch_tokens) {
    if (ratio < Fraction(0) || ratio > Fraction(1)) {
        throw Error(ErrorCode::Validation, "stage ratio " + ratio.str() + " outside [0, 1]");
    }
}

std::int64_t InterleavePattern::targets_in_prefix(std::int64_t n) const {
    // floor((2 p n + q) / (2 q))
    __extension__ using wide = __int128;
    const wide num = wide(2) * ratio_.num() * n + ratio_.den();
    return static_cast<std::int64_t>(num / (wide(2) * ratio_.den()));
}

bool InterleavePattern::is_target(std::int64_t batch_index) const {
    return targets_in_prefix(batch_index + 1) > targets_in_prefix(batch_index);
}

InterleavePattern interleave_pattern(const Fraction& stage_ratio, std::int64_t global_batch_tokens) {
    return InterleavePattern(stage_ratio, global_batch_tokens);
}

ScheduleSpec build_schedule(const DerivedSetup& setup, const std::optional<StageSplit>& split,
                            std::int64_t global_batch_tokens, std::uint64_t base_seed,
                            std::optional<std::int64_t> high_available) {
    if (global_batch_tokens < 1) {
        throw Error(ErrorCode::Validation, "global batch must hold at least one token");
    }
    ScheduleSpec s;
    s.stages = stage_budgets(setup, split, high_available);
    s.epochs = std::int64_t{1} << setup.factors.f_k;
    s.unique_target_tokens = unique_target_tokens(setup);
    s.base_seed = base_seed;
    s.epoch_seeds = epoch_seeds(s.epochs, base_seed);
    s.global_batch_tokens = global_batch_tokens;
    for (const auto& stage : s.stages) {
        s.patterns.push_back(interleave_pattern(stage.ratio, global_batch_tokens));
    }
    s.trailing_partial_epoch = (s.epochs * s.unique_target_tokens) % global_batch_tokens != 0;
    return s;
}

std::vector<ScheduledBatch> expand_schedule(const ScheduleSpec& schedule) {
    std::vector<ScheduledBatch> out;
    std::int64_t index = 0;
    for (std::size_t i = 0; i < schedule.stages.size(); ++i) {
        const auto& stage = schedule.stages[i];
        const auto& pattern = schedule.patterns[i];
        std::int64_t target_left = stage.target;
        std::int64_t high_left = stage.high;
        std::int64_t local = 0;
        while (target_left > 0 || high_left > 0) {
            bool want_target = pattern.is_target(local);
            if (want_target && target_left == 0) want_target = false;
            if (!want_target && high_left == 0) want_target = true;
            std::int64_t& left = want_target ? target_left : high_left;
            const std::int64_t tokens = std::min(left, schedule.global_batch_tokens);
            left -= tokens;
            out.push_back({index++, stage.stage, want_target ? BatchSource::Target : BatchSource::High, tokens});
            ++local;
        }
    }
    return out;
}

void write_schedule_csv(std::ostream& out, const ScheduleSpec& schedule) {
    out << "batch_index,stage,source,tokens\n";
    for (const auto& b : expand_schedule(schedule)) {
        out << b.index << ',' << b.stage << ',' << (b.source == BatchSource::Target ? "target" : "high") << ','
            << b.tokens << '\n';
    }
}

} // namespace sweepplan
