// SPDX-License-Identifier: Apache-2.0
#include "sweepplan/train_config.hpp"

#include "sweepplan/error.hpp"

#include <array>
#include <cmath>

namespace sweepplan {

namespace {

struct ShapeRow {
    int f_M;
    int n_layers;
    int n_heads;
    int d_model;
};

constexpr std::array<ShapeRow, 7> kShapes = {{
    {5, 2, 4, 128},
    {4, 4, 4, 128},
    {3, 4, 7, 224},
    {2, 4, 12, 384},
    {1, 8, 12, 384},
    {0, 8, 39, 624},
    {-1, 16, 39, 624},
}};

} // namespace

std::int64_t model_scale(std::int64_t n_layers, std::int64_t d_model, std::int64_t seq_len) {
    return 72 * n_layers * d_model * d_model + 12 * n_layers * d_model * seq_len;
}

ModelShape shape_for_factor(int f_M) {
    for (const auto& row : kShapes) {
        if (row.f_M == f_M) {
            ModelShape s;
            s.n_layers = row.n_layers;
            s.n_heads = row.n_heads;
            s.d_model = row.d_model;
            s.seq_len = kSequenceLength;
            s.flops_per_token = model_scale(s.n_layers, s.d_model, s.seq_len);
            return s;
        }
    }
    throw Error(ErrorCode::UnsupportedScale,
                "no model shape for f_M=" + std::to_string(f_M) + " (supported: -1..5)");
}

double learning_rate(double compute) { return 0.3118 * std::pow(compute, -0.1250); }

std::int64_t round_half_away(double x) { return static_cast<std::int64_t>(std::round(x)); }

BatchConfig batch_config(double compute, const ModelShape& shape, int devices) {
    if (devices < 1) {
        throw Error(ErrorCode::Validation, "device count must be >= 1");
    }
    const double complexity = static_cast<double>(shape.n_layers) * shape.d_model * shape.d_model;
    int local = 0;
    if (complexity < 0.1e8) {
        local = 4;
    } else if (complexity < 0.5e8) {
        local = 2;
    } else if (complexity < 1.1e8) {
        local = 1;
    } else {
        throw Error(ErrorCode::UnsupportedModel,
                    "model complexity n*d^2 = " + std::to_string(static_cast<long long>(complexity)) +
                        " is outside the batch sizing table (< 1.1e8)");
    }

    const std::int64_t optimal =
        round_half_away(0.292 * std::pow(compute, 0.3271) / (static_cast<double>(shape.seq_len) * devices));
    if (optimal < 1) {
        throw Error(ErrorCode::MinimumBatch, "optimal local batch rounds to 0 for C=" + std::to_string(compute));
    }

    BatchConfig b;
    b.devices = devices;
    if (optimal < local) {
        b.local_batch = static_cast<int>(optimal);
        b.accumulation = 1;
    } else {
        b.local_batch = local;
        b.accumulation = static_cast<int>(round_half_away(static_cast<double>(optimal) / local));
    }
    b.global_batch_seqs = static_cast<std::int64_t>(b.local_batch) * devices * b.accumulation;
    b.global_batch_tokens = b.global_batch_seqs * shape.seq_len;
    return b;
}

double LRSchedule::rate_at(std::int64_t step, std::int64_t total_steps) const {
    double rate = eta_max;
    if (warmup_steps > 0 && step < warmup_steps) {
        rate = eta_max * static_cast<double>(step) / warmup_steps;
    }
    for (const auto& m : milestones) {
        if (static_cast<double>(step) >= m.fraction * static_cast<double>(total_steps)) {
            rate = eta_max * m.multiplier;
        }
    }
    return rate;
}

TrainingPlan build_training_plan(const SetupSpec& setup, const PlanOptions& options) {
    TrainingPlan plan;
    plan.setup_id = setup.id;
    plan.shape = shape_for_factor(setup.factors.f_M);
    plan.eta_max = learning_rate(setup.derived.compute);
    plan.batch = batch_config(setup.derived.compute, plan.shape, options.devices);

    const auto budgets = stage_budgets(setup.derived, setup.split, options.high_resource_available);
    for (const auto& budget : budgets) {
        StagePlan stage;
        stage.budget = budget;
        stage.steps = (budget.total + plan.batch.global_batch_tokens - 1) / plan.batch.global_batch_tokens;
        stage.schedule.eta_max = plan.eta_max;
        if (stage.steps < stage.schedule.warmup_steps) {
            stage.warnings.emplace_back("warmup-exceeds-stage");
        }
        if (budget.total % plan.batch.global_batch_tokens != 0) {
            stage.warnings.emplace_back("partial-final-batch");
        }
        plan.stages.push_back(std::move(stage));
    }
    return plan;
}

} // namespace sweepplan
