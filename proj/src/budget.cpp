// SPDX-License-Identifier: Apache-2.0
#include "sweepplan/budget.hpp"

#include "sweepplan/error.hpp"

#include <cmath>
#include <string>

namespace sweepplan {

const ReferenceConstants& reference_constants() {
    static const ReferenceConstants constants = [] {
        ReferenceConstants c{};
        c.compute = 1e18;
        c.target_tokens = 5.8316 * std::pow(c.compute, 0.4757);
        c.model_scale = c.compute / c.target_tokens;
        return c;
    }();
    return constants;
}

bool DerivedSetup::budget_identity_holds() const {
    // M = M0 * 2^-f_M, D_total = D_T0 * 2^(f_D + f_k + f_r), M0 * D_T0 = C0.
    return -factors.f_M + (f_D() + factors.f_k + factors.f_r) == factors.f_C;
}

DerivedSetup derive_single_stage(const FactorTuple& factors) {
    if (factors.f_r < 0) {
        throw Error(ErrorCode::InvalidFactor, "f_r must be >= 0, got " + std::to_string(factors.f_r));
    }
    if (factors.f_k < 0) {
        throw Error(ErrorCode::InvalidFactor, "f_k must be >= 0, got " + std::to_string(factors.f_k));
    }
    if (factors.f_r > 62) {
        throw Error(ErrorCode::InvalidFactor, "f_r too large: " + std::to_string(factors.f_r));
    }
    const auto& ref = reference_constants();
    DerivedSetup d{};
    d.factors = factors;
    d.ratio = Fraction(1, std::int64_t{1} << factors.f_r);
    d.model_scale = std::ldexp(ref.model_scale, -factors.f_M);
    d.epochs = std::ldexp(1.0, factors.f_k);
    d.compute = std::ldexp(ref.compute, factors.f_C);
    d.target_tokens = std::ldexp(ref.target_tokens, factors.f_D());
    d.total_tokens = std::ldexp(ref.target_tokens, factors.f_D() + factors.f_k + factors.f_r);
    return d;
}

StageSplit stage_split(const Fraction& r1, const Fraction& r2, const Fraction& r) {
    if (!(r1 < r2)) {
        throw Error(ErrorCode::SplitOrdering, "stage ratios must satisfy r1 < r2 (r1=" + r1.str() +
                                                  ", r2=" + r2.str() + ")");
    }
    if (r < r1 || r > r2) {
        throw Error(ErrorCode::InfeasibleSplit, "average ratio " + r.str() + " outside [" + r1.str() +
                                                    ", " + r2.str() + "]");
    }
    StageSplit split;
    split.r1 = r1;
    split.r2 = r2;
    split.s1 = (r2 - r) / (r2 - r1);
    split.s2 = Fraction(1) - split.s1;
    return split;
}

const char* to_string(ErrorCode code) noexcept {
    switch (code) {
    case ErrorCode::InvalidFactor: return "invalid-factor";
    case ErrorCode::InfeasibleSplit: return "infeasible-split";
    case ErrorCode::SplitOrdering: return "split-ordering";
    case ErrorCode::UnsupportedScale: return "unsupported-scale";
    case ErrorCode::UnsupportedModel: return "unsupported-model";
    case ErrorCode::MinimumBatch: return "minimum-batch";
    case ErrorCode::InsufficientCorpus: return "insufficient-corpus";
    case ErrorCode::Parse: return "parse";
    case ErrorCode::Validation: return "validation";
    case ErrorCode::InsufficientData: return "insufficient-data";
    case ErrorCode::Underdetermined: return "underdetermined";
    case ErrorCode::Unidentifiable: return "unidentifiable";
    case ErrorCode::DegenerateGroup: return "degenerate-group";
    case ErrorCode::Usage: return "usage";
    }
    return "unknown";
}

} // namespace sweepplan
