// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "sweepplan/fraction.hpp"

#include <optional>

namespace sweepplan {

/// Reference budget the factor grid is anchored on: C0 FLOPs, the
/// matching target-corpus size and the model scale that exhausts C0 on it.
struct ReferenceConstants {
    double compute;       // C0, FLOPs
    double target_tokens; // D_T0
    double model_scale;   // M0, FLOPs/token
};

const ReferenceConstants& reference_constants();

/// Integer factors of one single-stage setup. Every derived hyperparameter
/// is a power-of-two multiple of a reference value.
struct FactorTuple {
    int f_r = 0;
    int f_M = 0;
    int f_k = 0;
    int f_C = 0;

    constexpr int f_D() const { return -f_r + f_M - f_k + f_C; }

    bool operator==(const FactorTuple&) const = default;
    auto operator<=>(const FactorTuple&) const = default;
};

struct DerivedSetup {
    FactorTuple factors;
    Fraction ratio;       // r = 2^-f_r
    double model_scale;   // M = M0 / 2^f_M
    double epochs;        // k = 2^f_k
    double compute;       // C = 2^f_C * C0
    double target_tokens; // D_T = 2^f_D * D_T0
    double total_tokens;  // k * D_T / r

    int f_D() const { return factors.f_D(); }

    /// log2(M) + log2(D_total) == log2(C), checked on the integer exponents.
    bool budget_identity_holds() const;
};

DerivedSetup derive_single_stage(const FactorTuple& factors);

struct StageSplit {
    Fraction r1;
    Fraction r2;
    Fraction s1;
    Fraction s2;

    /// One of the stages has zero length, i.e. the split is really single-stage.
    bool degenerate() const { return s1 == Fraction(0) || s2 == Fraction(0); }
    Fraction average_ratio() const { return s1 * r1 + s2 * r2; }
};

StageSplit stage_split(const Fraction& r1, const Fraction& r2, const Fraction& r);

} // namespace sweepplan
