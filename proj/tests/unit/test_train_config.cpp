// SPDX-License-Identifier: Apache-2.0
#include "sweepplan/budget.hpp"
#include "sweepplan/error.hpp"
#include "sweepplan/search_space.hpp"
#include "sweepplan/train_config.hpp"

#include <doctest.h>

#include <cmath>

using namespace sweepplan;

namespace {

// Hand transcription of the batch-size procedure, 8 devices.
long long oracle_batch_seqs(double compute, int n_layers, int d_model) {
    const double complexity = double(n_layers) * d_model * d_model;
    int local = complexity < 1e7 ? 4 : complexity < 5e7 ? 2 : 1;
    const long long opt = std::llround(0.292 * std::pow(compute, 0.3271) / (4096.0 * 8));
    long long acc = 1;
    if (opt < local) {
        local = static_cast<int>(opt);
    } else {
        acc = std::llround(double(opt) / local);
    }
    return local * 8LL * acc;
}

} // namespace

TEST_CASE("shape table model scales") {
    struct Row {
        int f_M;
        double printed;
        std::int64_t exact;
    };
    // printed column of the shape table (3 significant figures) and the formula value
    const Row rows[] = {{5, 1.49e7, 14942208},   {4, 2.99e7, 29884416},   {3, 5.85e7, 58490880},
                        {2, 1.18e8, 117964800},  {1, 2.36e8, 235929600},  {0, 4.70e8, 469647360},
                        {-1, 9.39e8, 939294720}};
    for (const auto& r : rows) {
        const auto s = shape_for_factor(r.f_M);
        CHECK(s.flops_per_token == r.exact);
        CHECK(s.flops_per_token == 72LL * s.n_layers * s.d_model * s.d_model + 12LL * s.n_layers * s.d_model * 4096);
        const double mag = std::pow(10.0, std::floor(std::log10(double(s.flops_per_token))) - 2);
        CHECK(std::round(double(s.flops_per_token) / mag) * mag == doctest::Approx(r.printed));
        CHECK(s.aspect_ratio() >= 30.0);
        CHECK(s.aspect_ratio() <= 150.0);
    }
    CHECK_THROWS_AS(shape_for_factor(6), Error);
    CHECK_THROWS_AS(shape_for_factor(-2), Error);
}

TEST_CASE("peak learning rate") {
    CHECK(learning_rate(1e18) == doctest::Approx(0.3118 * std::pow(1e18, -0.125)));
    CHECK(learning_rate(1e18) == doctest::Approx(1.7534e-3).epsilon(1e-4));
    CHECK(learning_rate(6.25e16) == doctest::Approx(2.480e-3).epsilon(1e-3));
}

TEST_CASE("batch sizing traces") {
    const auto ref_shape = shape_for_factor(0);
    auto b = batch_config(1e18, ref_shape);
    CHECK(b.local_batch == 4);
    CHECK(b.accumulation == 2);
    CHECK(b.global_batch_seqs == 64);
    CHECK(b.global_batch_tokens == 64 * 4096);

    b = batch_config(6.25e16, ref_shape);
    CHECK(b.local_batch == 3);
    CHECK(b.accumulation == 1);
    CHECK(b.global_batch_seqs == 24);
}

TEST_CASE("batch sizing agrees with the transcription on the whole grid") {
    for (int f_C = -4; f_C <= 0; ++f_C)
        for (int f_M = -1; f_M <= 5; ++f_M) {
            const auto s = shape_for_factor(f_M);
            const double c = std::ldexp(1e18, f_C);
            if (double(s.n_layers) * s.d_model * s.d_model >= 1.1e8) {
                CHECK_THROWS_AS(batch_config(c, s), Error);
                continue;
            }
            CHECK(batch_config(c, s).global_batch_seqs == oracle_batch_seqs(c, s.n_layers, s.d_model));
        }
}

TEST_CASE("batch sizing errors") {
    ModelShape huge = shape_for_factor(-1);
    huge.n_layers = 400;
    try {
        batch_config(1e18, huge);
        FAIL("expected throw");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::UnsupportedModel);
    }
    try {
        batch_config(1e12, shape_for_factor(0));
        FAIL("expected throw");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::MinimumBatch);
    }
}

TEST_CASE("learning-rate schedule") {
    LRSchedule s;
    s.eta_max = 1.0;
    CHECK(s.rate_at(0, 10000) == 0.0);
    CHECK(s.rate_at(250, 10000) == doctest::Approx(0.5));
    CHECK(s.rate_at(500, 10000) == 1.0);
    CHECK(s.rate_at(7999, 10000) == 1.0);
    CHECK(s.rate_at(8000, 10000) == doctest::Approx(0.316));
    CHECK(s.rate_at(9000, 10000) == doctest::Approx(0.1));
    CHECK(s.rate_at(9999, 10000) == doctest::Approx(0.1));
}

TEST_CASE("training plan") {
    const auto mono = make_setup({0, 0, 0, 0});
    const auto plan = build_training_plan(mono);
    CHECK(plan.shape.d_model == 624);
    CHECK(plan.optimizer.adam_beta2 == 0.95);
    CHECK(plan.optimizer.weight_decay == 0.1);
    CHECK(plan.optimizer.init_std == 0.006);
    REQUIRE(plan.stages.size() == 1);
    const auto& st = plan.stages[0];
    CHECK(st.budget.target == st.budget.total);
    CHECK(st.steps == (st.budget.total + 262143) / 262144);

    const auto two = make_setup({2, 0, 1, 0}, TwoStageRatios{Fraction(1, 8), Fraction(1, 2)});
    const auto p2 = build_training_plan(two);
    REQUIRE(p2.stages.size() == 2);
    CHECK(p2.stages[0].budget.ratio == Fraction(1, 8));
    CHECK(p2.stages[1].budget.ratio == Fraction(1, 2));
    CHECK(p2.stages[0].budget.target + p2.stages[1].budget.target ==
          2 * std::llround(two.derived.target_tokens));

    // 4 devices double the accumulation of the 8-device plan
    PlanOptions opts;
    opts.devices = 4;
    CHECK(build_training_plan(mono, opts).batch.global_batch_seqs == 64);
}
