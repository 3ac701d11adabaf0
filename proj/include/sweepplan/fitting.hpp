// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "sweepplan/search_space.hpp"

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace sweepplan {

struct EpochPoint {
    double f_k;  // log2 of the epoch count
    double loss;
};

/// Quadratic fit L ~ a2 f_k^2 + a1 f_k + a0 over log2 epochs.
struct QuadraticEpochFit {
    double a2 = 0.0;
    double a1 = 0.0;
    double a0 = 0.0;
    double f_k_star = 0.0;
    double k_star = 1.0;
    bool convex = false;
    /// Minimizer lies outside [min f_k - 1, max f_k + 1].
    bool extrapolated = false;
    double rss = 0.0;
    std::size_t n_points = 0;

    double predict(double f_k) const { return (a2 * f_k + a1) * f_k + a0; }
};

/// Ordinary least squares on (1, f_k, f_k^2). Needs three distinct f_k.
/// A non-convex fit reports the sampled argmin instead of the vertex.
QuadraticEpochFit fit_epoch_quadratic(std::span<const EpochPoint> points);

struct KStarKnot {
    double h;   // log2 k* level
    double f_D; // shifted log2(D_T / D_T0) at which h is reached
};

/// log2 k*(C, D_T) = h(f_D - a (log2 C - log2 C0)) with h piecewise linear
/// and strictly decreasing.
struct KStarModel {
    double a = 0.0;
    std::vector<KStarKnot> knots; // h ascending, f_D strictly decreasing
    Approach approach = Approach::Mono1Stage;
    double rss = 0.0;
    std::size_t n_points = 0;
    std::vector<std::string> warnings;

    /// Piecewise-linear h with linear extrapolation past the end knots (unclamped).
    double h_at(double shifted_f_D) const;
    /// max(0, h) at (C, f_D).
    double log2_k_star(double compute, double f_D) const;
};

struct KStarCurvePoint {
    double compute;
    double f_D;
    double log2_k_star;
};

struct KStarFitOptions {
    double a_min = 0.05;
    double a_max = 1.5;
    double coarse_step = 0.05;
    double tolerance = 1e-7;
    /// Upper h level; defaults to 4.0 (mono-1stage) or 3.0 (multi-2stage).
    double h_max = 0.0;
    double h_step = 0.5;
    double min_gap = 1e-3;
    /// RMS residual (log2 units) above which a warning is attached.
    double residual_warning = 0.25;
};

double default_h_max(Approach approach);

KStarModel fit_kstar_model(std::span<const KStarCurvePoint> curves, Approach approach,
                           const KStarFitOptions& options = {});

/// k* = 2^h(f_D - a delta) with f_D = log2(D_T/D_T0), delta = log2(C/C0),
/// clamped to >= 1, optionally rounded to the nearest power of two.
double predict_kstar(const KStarModel& model, double compute, double target_tokens, bool round_pow2 = false);

struct RatioPoint {
    double model_scale;  // M
    double total_tokens; // D
    double ratio;        // r
    double loss;         // L
};

struct RatioGroup {
    double model_scale;
    double total_tokens;
    double intercept; // L0(M, D)
    std::size_t n_points;
};

/// L(M, D, r) = L0(M, D) r^beta with one beta shared by all (M, D) groups.
struct RatioPowerLawFit {
    double beta = 0.0;
    std::vector<RatioGroup> groups; // ordered by (M, D)
    std::vector<double> residuals;  // ln L - ln L_hat, in input order
    double rss = 0.0;

    double predict(double model_scale, double total_tokens, double ratio) const;
};

RatioPowerLawFit fit_ratio_power_law(std::span<const RatioPoint> points);

/// Nonincreasing least-squares fit (pool adjacent violators) of y ordered by x.
std::vector<double> isotonic_decreasing(std::span<const double> y);

} // namespace sweepplan
