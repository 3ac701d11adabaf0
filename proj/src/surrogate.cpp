// SPDX-License-Identifier: Apache-2.0
#include "sweepplan/surrogate.hpp"

#include "sweepplan/error.hpp"
#include "sweepplan/mixture.hpp"

#include <cmath>
#include <numbers>

namespace sweepplan {

namespace {

std::uint64_t fnv1a(std::uint64_t h, const std::string& text) {
    for (unsigned char c : text) {
        h ^= c;
        h *= 0x100000001B3ULL;
    }
    return h;
}

double unit_open(std::uint64_t bits) {
    // 53 random bits mapped into (0, 1).
    return (static_cast<double>(bits >> 11) + 0.5) * 0x1.0p-53;
}

} // namespace

double ge_loss(double steps, double ratio, const GeParams& p) {
    return (p.A0 / std::pow(steps, p.alpha) + p.A1) * p.A3 / std::pow(ratio, p.beta);
}

SurrogateParams SurrogateParams::crossing_fixture() {
    SurrogateParams p;
    p.R_star = 2.0;
    return p;
}

void SurrogateParams::validate() const {
    if (!(E > 0 && A > 0 && B > 0)) {
        throw Error(ErrorCode::Validation, "surrogate magnitudes E, A, B must be positive");
    }
    if (!(alpha_M > 0 && alpha_D > 0 && R_star > 0)) {
        throw Error(ErrorCode::Validation, "surrogate exponents and R_star must be positive");
    }
    if (!(beta < 0)) {
        throw Error(ErrorCode::Validation, "surrogate beta must be negative");
    }
    if (!(gamma >= 0 && gamma <= 1)) {
        throw Error(ErrorCode::Validation, "surrogate gamma must lie in [0, 1]");
    }
    if (!(noise_sigma >= 0)) {
        throw Error(ErrorCode::Validation, "noise_sigma must be >= 0");
    }
}

LossQuery query_for(const SetupSpec& setup) {
    const auto& d = setup.derived;
    LossQuery q{d.model_scale, d.target_tokens, d.epochs, d.ratio.to_double(), {}, {}, {}};
    if (setup.split) {
        q.r1 = setup.split->r1.to_double();
        q.r2 = setup.split->r2.to_double();
        q.s1 = setup.split->s1.to_double();
    }
    return q;
}

double composite_loss(const LossQuery& q, const SurrogateParams& p) {
    const double unique = q.target_tokens / q.ratio;
    const double repeat = 1.0 + p.R_star * (1.0 - std::exp(-(q.epochs - 1.0) / p.R_star));
    const double effective = unique * repeat;
    double r_eff = q.ratio;
    if (q.r2) {
        r_eff = std::pow(*q.r2, p.gamma) * std::pow(q.ratio, 1.0 - p.gamma);
    }
    const double base = p.E + p.A / std::pow(q.model_scale, p.alpha_M) + p.B / std::pow(effective, p.alpha_D);
    return base * std::pow(r_eff, p.beta);
}

double noise_factor(const SurrogateParams& p, const std::string& language_pair, const std::string& setup_id) {
    if (p.noise_sigma == 0.0) {
        return 1.0;
    }
    std::uint64_t h = fnv1a(0xCBF29CE484222325ULL, language_pair);
    h = fnv1a(h ^ 0x1F, setup_id);
    const std::uint64_t state = mix64(p.seed ^ mix64(h));
    const double u1 = unit_open(mix64(state + 0x9E3779B97F4A7C15ULL));
    const double u2 = unit_open(mix64(state + 2 * 0x9E3779B97F4A7C15ULL));
    const double z = std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
    return std::exp(p.noise_sigma * z);
}

std::vector<LossRecord> generate_dataset(std::span<const SetupSpec> setups, const SurrogateParams& params,
                                         const std::string& language_pair) {
    params.validate();
    std::vector<LossRecord> out;
    out.reserve(setups.size());
    for (const auto& s : setups) {
        const double loss = composite_loss(query_for(s), params) * noise_factor(params, language_pair, s.id);
        out.push_back({s.id, language_pair, loss});
    }
    return out;
}

} // namespace sweepplan
