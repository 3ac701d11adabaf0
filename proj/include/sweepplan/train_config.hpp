// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "sweepplan/mixture.hpp"
#include "sweepplan/search_space.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace sweepplan {

inline constexpr int kSequenceLength = 4096;
inline constexpr int kDefaultDevices = 8;

struct ModelShape {
    int n_layers = 0;
    int n_heads = 0;
    int d_model = 0;
    int seq_len = kSequenceLength;
    std::int64_t flops_per_token = 0;

    double aspect_ratio() const { return static_cast<double>(d_model) / n_layers; }
};

/// Non-embedding FLOPs per token: 72 n d^2 + 12 n d L.
std::int64_t model_scale(std::int64_t n_layers, std::int64_t d_model, std::int64_t seq_len);

/// Shape table for f_M in [-1, 5].
ModelShape shape_for_factor(int f_M);

/// Peak learning rate for a compute budget: 0.3118 * C^-0.125.
double learning_rate(double compute);

/// Round half away from zero.
std::int64_t round_half_away(double x);

struct BatchConfig {
    int local_batch = 0;
    int devices = kDefaultDevices;
    int accumulation = 0;
    std::int64_t global_batch_seqs = 0;
    std::int64_t global_batch_tokens = 0;
};

/// Batch sizing: pick the per-device batch from the model complexity,
/// then accumulate towards 0.292 * C^0.3271 tokens.
BatchConfig batch_config(double compute, const ModelShape& shape, int devices = kDefaultDevices);

struct Milestone {
    double fraction;
    double multiplier;
};

struct LRSchedule {
    double eta_max = 0.0;
    int warmup_steps = 500;
    std::vector<Milestone> milestones{{0.8, 0.316}, {0.9, 0.1}};
    bool per_stage = true;

    /// Learning rate at a step within a stage of `total_steps` steps: linear
    /// warmup, then the step multipliers once their fraction of steps is done.
    double rate_at(std::int64_t step, std::int64_t total_steps) const;
};

struct OptimizerConstants {
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.95;
    double adam_epsilon = 1e-8;
    double weight_decay = 0.1;
    double grad_clip_norm = 1.0;
    double init_std = 0.006;
};

struct StagePlan {
    StageTokenBudget budget;
    std::int64_t steps = 0;
    LRSchedule schedule;
    std::vector<std::string> warnings;
};

struct PlanOptions {
    int devices = kDefaultDevices;
    std::optional<std::int64_t> high_resource_available;
};

struct TrainingPlan {
    std::string setup_id;
    ModelShape shape;
    double eta_max = 0.0;
    OptimizerConstants optimizer;
    BatchConfig batch;
    std::vector<StagePlan> stages;
};

inline constexpr int kPlanSchemaVersion = 1;

TrainingPlan build_training_plan(const SetupSpec& setup, const PlanOptions& options = {});

} // namespace sweepplan
