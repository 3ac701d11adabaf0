// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "sweepplan/budget.hpp"

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <vector>

namespace sweepplan {

struct StageTokenBudget {
    int stage = 1;
    std::int64_t total = 0;
    std::int64_t target = 0;
    std::int64_t high = 0;
    Fraction ratio;
};

/// Unique target-language tokens of a setup, as an integer count.
std::int64_t unique_target_tokens(const DerivedSetup& setup);

/// Total training tokens k * D_T / r, as an integer count.
std::int64_t total_training_tokens(const DerivedSetup& setup);

/// Per-stage token budgets. Stage 1 amounts are floored from the exact
/// rational products and stage 2 receives the remainder, so target tokens
/// sum to k * D_T exactly. High-resource tokens are never repeated: when
/// `high_available` is given, the total must fit in it.
std::vector<StageTokenBudget> stage_budgets(const DerivedSetup& setup, const std::optional<StageSplit>& split,
                                            std::optional<std::int64_t> high_available = std::nullopt);

/// splitmix64 output function.
std::uint64_t mix64(std::uint64_t x);

/// seed_i = mix64(base + i * 0x9E3779B97F4A7C15) for i = 1..k. Distinct for a
/// fixed base. Two bases produce overlapping (shifted) sequences only if they
/// differ by a multiple of the increment.
std::vector<std::uint64_t> epoch_seeds(std::int64_t k, std::uint64_t base_seed);

/// Error-diffusion interleaving of target and high-resource batches at an
/// exact ratio. Stateless: any batch position can be queried directly.
class InterleavePattern {
public:
    InterleavePattern() = default;
    InterleavePattern(Fraction ratio, std::int64_t batch_tokens);

    const Fraction& ratio() const { return ratio_; }
    std::int64_t batch_tokens() const { return batch_tokens_; }

    /// Target batches among the first n batches: floor(r * n + 1/2).
    std::int64_t targets_in_prefix(std::int64_t n) const;
    bool is_target(std::int64_t batch_index) const;
    /// The pattern repeats with this period (the reduced denominator of r).
    std::int64_t period() const { return ratio_.den(); }

private:
    Fraction ratio_{0};
    std::int64_t batch_tokens_ = 0;
};

InterleavePattern interleave_pattern(const Fraction& stage_ratio, std::int64_t global_batch_tokens);

struct ScheduleSpec {
    std::vector<StageTokenBudget> stages;
    std::int64_t epochs = 1;
    std::int64_t unique_target_tokens = 0;
    std::uint64_t base_seed = 0;
    std::vector<std::uint64_t> epoch_seeds;
    std::int64_t global_batch_tokens = 0;
    std::vector<InterleavePattern> patterns;
    bool trailing_partial_epoch = false;
};

ScheduleSpec build_schedule(const DerivedSetup& setup, const std::optional<StageSplit>& split,
                            std::int64_t global_batch_tokens, std::uint64_t base_seed,
                            std::optional<std::int64_t> high_available = std::nullopt);

enum class BatchSource { Target, High };

struct ScheduledBatch {
    std::int64_t index;
    int stage;
    BatchSource source;
    std::int64_t tokens;
};

/// Expanded batch list. Each batch draws from one source; when the pattern
/// asks for an exhausted source the other one is used, and the final batch
/// of each source may be partial. Token sums per source equal the budgets.
std::vector<ScheduledBatch> expand_schedule(const ScheduleSpec& schedule);

void write_schedule_csv(std::ostream& out, const ScheduleSpec& schedule);

} // namespace sweepplan
