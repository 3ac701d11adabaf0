// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "sweepplan/analysis.hpp"
#include "sweepplan/search_space.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace sweepplan {

/// Domain-mixture power law: L = (A0 / s^alpha + A1) * A3 / r^beta.
struct GeParams {
    double A0 = 1.0;
    double A1 = 0.5;
    double A3 = 2.0;
    double alpha = 0.5;
    double beta = 0.1;
};

double ge_loss(double steps, double ratio, const GeParams& params);

/// Synthetic loss landscape used as a test fixture. The constants are
/// configuration, not measurements.
///
///   L = [E + A / M^alpha_M + B / D_eff^alpha_D] * r_eff^beta
///   D_eff = U * (1 + R* (1 - exp(-(k - 1) / R*))),  U = D_T / r
///   r_eff = r2^gamma * r^(1 - gamma) for two-stage setups, r otherwise
///
/// U is one pass over the target corpus together with the high-resource
/// tokens mixed into it. With alpha_D <= |beta| a single-stage multilingual
/// setup never beats the monolingual setup of the same model scale.
struct SurrogateParams {
    double E = 1.0;
    double A = 790.0;
    double alpha_M = 0.34;
    double B = 26.3;
    double alpha_D = 0.101;
    double beta = -0.101;
    double R_star = 15.4;
    double gamma = 0.5;
    double noise_sigma = 0.0;
    std::uint64_t seed = 0;

    /// Defaults with a short repetition horizon (R* = 2), which places the
    /// mono/two-stage crossing between D*/16 and D*/4 on the default grid.
    static SurrogateParams crossing_fixture();

    void validate() const;
};

struct LossQuery {
    double model_scale;
    double target_tokens;
    double epochs;
    double ratio;
    std::optional<double> r1;
    std::optional<double> r2;
    std::optional<double> s1;
};

LossQuery query_for(const SetupSpec& setup);

/// Noiseless composite loss.
double composite_loss(const LossQuery& q, const SurrogateParams& params);

/// Multiplicative log-normal noise factor exp(sigma * z), with z drawn from
/// (seed, language pair, setup id) alone so records are order independent.
double noise_factor(const SurrogateParams& params, const std::string& language_pair, const std::string& setup_id);

std::vector<LossRecord> generate_dataset(std::span<const SetupSpec> setups, const SurrogateParams& params,
                                         const std::string& language_pair = "synthetic");

} // namespace sweepplan
