// SPDX-License-Identifier: Apache-2.0
#include "sweepplan/fitting.hpp"

#include "sweepplan/budget.hpp"
#include "sweepplan/error.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <set>
#include <sstream>
#include <utility>

namespace sweepplan {

QuadraticEpochFit fit_epoch_quadratic(std::span<const EpochPoint> points) {
    std::set<double> abscissae;
    for (const auto& p : points) abscissae.insert(p.f_k);
    if (abscissae.size() < 3) {
        throw Error(ErrorCode::Underdetermined,
                    "quadratic epoch fit needs 3 distinct f_k values, got " +
                        std::to_string(abscissae.size()));
    }

    const auto n = static_cast<Eigen::Index>(points.size());
    Eigen::MatrixXd X(n, 3);
    Eigen::VectorXd y(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const double x = points[static_cast<std::size_t>(i)].f_k;
        X(i, 0) = 1.0;
        X(i, 1) = x;
        X(i, 2) = x * x;
        y(i) = points[static_cast<std::size_t>(i)].loss;
    }
    const Eigen::Vector3d coef = X.colPivHouseholderQr().solve(y);

    QuadraticEpochFit fit;
    fit.a0 = coef(0);
    fit.a1 = coef(1);
    fit.a2 = coef(2);
    fit.n_points = points.size();
    fit.rss = (X * coef - y).squaredNorm();

    if (fit.a2 > 0.0) {
        fit.convex = true;
        fit.f_k_star = -fit.a1 / (2.0 * fit.a2);
    } else {
        // lowest observed loss, smaller f_k on ties
        const auto best = std::min_element(points.begin(), points.end(), [](const auto& a, const auto& b) {
            return a.loss < b.loss || (a.loss == b.loss && a.f_k < b.f_k);
        });
        fit.f_k_star = best->f_k;
    }
    fit.k_star = std::exp2(fit.f_k_star);
    fit.extrapolated =
        fit.f_k_star < *abscissae.begin() - 1.0 || fit.f_k_star > *abscissae.rbegin() + 1.0;
    return fit;
}

// ---------------------------------------------------------------------------

double default_h_max(Approach approach) {
    return approach == Approach::Multi2Stage ? 3.0 : 4.0;
}

double KStarModel::h_at(double x) const {
    if (knots.empty()) return 0.0;
    if (knots.size() == 1) return knots.front().h;
    // knots[j].f_D decreases with j; find the segment containing x
    std::size_t j = 0;
    if (x >= knots.front().f_D) {
        j = 0;
    } else if (x <= knots.back().f_D) {
        j = knots.size() - 2;
    } else {
        while (j + 1 < knots.size() && knots[j + 1].f_D > x) ++j;
    }
    const auto& lo = knots[j];
    const auto& hi = knots[j + 1];
    const double t = (lo.f_D - x) / (lo.f_D - hi.f_D);
    return lo.h + t * (hi.h - lo.h);
}

double KStarModel::log2_k_star(double compute, double f_D) const {
    const double delta = std::log2(compute / reference_constants().compute);
    return std::max(0.0, h_at(f_D - a * delta));
}

std::vector<double> isotonic_decreasing(std::span<const double> y) {
    struct Block {
        double sum;
        std::size_t count;
        double mean() const { return sum / static_cast<double>(count); }
    };
    std::vector<Block> blocks;
    for (double v : y) {
        blocks.push_back({v, 1});
        while (blocks.size() > 1 && blocks[blocks.size() - 2].mean() < blocks.back().mean()) {
            auto top = blocks.back();
            blocks.pop_back();
            blocks.back().sum += top.sum;
            blocks.back().count += top.count;
        }
    }
    std::vector<double> out;
    out.reserve(y.size());
    for (const auto& b : blocks) out.insert(out.end(), b.count, b.mean());
    return out;
}

namespace {

struct Sample {
    double x; // shifted f_D
    double y; // log2 k*
};

std::vector<double> levels_for(double h_max, double h_step) {
    std::vector<double> levels;
    for (int j = 0;; ++j) {
        const double h = j * h_step;
        if (h > h_max + 1e-12) break;
        levels.push_back(h);
    }
    return levels;
}

void project_knots(std::vector<KStarKnot>& knots, double gap) {
    for (std::size_t j = 1; j < knots.size(); ++j) {
        knots[j].f_D = std::min(knots[j].f_D, knots[j - 1].f_D - gap);
    }
}

double sse(const KStarModel& m, const std::vector<Sample>& samples) {
    double total = 0.0;
    for (const auto& s : samples) {
        const double e = std::max(0.0, m.h_at(s.x)) - s.y;
        total += e * e;
    }
    return total;
}

// Knot positions from an isotonic fit of the pooled data, read off by inverse
// linear interpolation. Levels outside the data range use the end slopes.
std::vector<KStarKnot> initial_knots(std::vector<Sample> samples, const std::vector<double>& levels,
                                     double gap) {
    std::sort(samples.begin(), samples.end(),
              [](const Sample& a, const Sample& b) { return a.x < b.x || (a.x == b.x && a.y > b.y); });
    std::vector<double> ys;
    ys.reserve(samples.size());
    for (const auto& s : samples) ys.push_back(s.y);
    const auto fitted = isotonic_decreasing(ys);

    // collapse flat runs into single points so the curve is strictly decreasing
    std::vector<std::pair<double, double>> curve; // (x, level), level decreasing
    for (std::size_t i = 0; i < samples.size();) {
        std::size_t j = i;
        while (j < samples.size() && fitted[j] == fitted[i]) ++j;
        double x;
        if (i == 0) {
            x = samples[j - 1].x;
        } else if (j == samples.size()) {
            x = samples[i].x;
        } else {
            x = 0.5 * (samples[i].x + samples[j - 1].x);
        }
        curve.emplace_back(x, fitted[i]);
        i = j;
    }

    auto position = [&](double level) {
        if (curve.size() == 1) return curve.front().first - (level - curve.front().second);
        if (level >= curve.front().second) {
            const auto& [x0, y0] = curve[0];
            const auto& [x1, y1] = curve[1];
            return x0 + (level - y0) * (x1 - x0) / (y1 - y0);
        }
        if (level <= curve.back().second) {
            const auto& [x0, y0] = curve[curve.size() - 2];
            const auto& [x1, y1] = curve.back();
            return x1 + (level - y1) * (x1 - x0) / (y1 - y0);
        }
        std::size_t k = 0;
        while (curve[k + 1].second > level) ++k;
        const auto& [x0, y0] = curve[k];
        const auto& [x1, y1] = curve[k + 1];
        return x0 + (level - y0) * (x1 - x0) / (y1 - y0);
    };

    std::vector<KStarKnot> knots;
    knots.reserve(levels.size());
    for (double h : levels) knots.push_back({h, position(h)});
    project_knots(knots, gap);
    return knots;
}

// Levenberg-Marquardt on knot positions, projected onto the ordering constraint.
void refine_knots(KStarModel& model, const std::vector<Sample>& samples, double gap) {
    const auto n_knots = static_cast<Eigen::Index>(model.knots.size());
    const auto n = static_cast<Eigen::Index>(samples.size());
    auto residuals = [&](const KStarModel& m) {
        Eigen::VectorXd r(n);
        for (Eigen::Index i = 0; i < n; ++i) {
            const auto& s = samples[static_cast<std::size_t>(i)];
            r(i) = std::max(0.0, m.h_at(s.x)) - s.y;
        }
        return r;
    };

    double lambda = 1e-3;
    Eigen::VectorXd r = residuals(model);
    double cost = r.squaredNorm();
    for (int iter = 0; iter < 100 && cost > 1e-24; ++iter) {
        Eigen::MatrixXd J(n, n_knots);
        for (Eigen::Index j = 0; j < n_knots; ++j) {
            KStarModel probe = model;
            const double step = 1e-6;
            probe.knots[static_cast<std::size_t>(j)].f_D += step;
            J.col(j) = (residuals(probe) - r) / step;
        }
        const Eigen::MatrixXd JtJ = J.transpose() * J;
        const Eigen::VectorXd g = J.transpose() * r;

        bool improved = false;
        while (lambda < 1e10) {
            Eigen::MatrixXd A = JtJ;
            A.diagonal() += lambda * (JtJ.diagonal().array() + 1e-9).matrix();
            const Eigen::VectorXd delta = A.ldlt().solve(-g);
            KStarModel trial = model;
            for (Eigen::Index j = 0; j < n_knots; ++j) {
                trial.knots[static_cast<std::size_t>(j)].f_D += delta(j);
            }
            project_knots(trial.knots, gap);
            const Eigen::VectorXd tr = residuals(trial);
            const double tc = tr.squaredNorm();
            if (tc < cost) {
                const double gain = cost - tc;
                model = std::move(trial);
                r = tr;
                cost = tc;
                lambda = std::max(lambda * 0.3, 1e-12);
                improved = gain > 1e-15 * (1.0 + cost);
                break;
            }
            lambda *= 10.0;
        }
        if (!improved) break;
    }
}

KStarModel fit_at(double a, const std::vector<KStarCurvePoint>& curves, Approach approach,
                  const std::vector<double>& levels, const KStarFitOptions& options,
                  std::vector<Sample>& scratch) {
    const double log_c0 = std::log2(reference_constants().compute);
    scratch.clear();
    for (const auto& c : curves) {
        scratch.push_back({c.f_D - a * (std::log2(c.compute) - log_c0), c.log2_k_star});
    }
    KStarModel model;
    model.a = a;
    model.approach = approach;
    model.knots = initial_knots(scratch, levels, options.min_gap);
    refine_knots(model, scratch, options.min_gap);
    model.rss = sse(model, scratch);
    model.n_points = curves.size();
    return model;
}

} // namespace

KStarModel fit_kstar_model(std::span<const KStarCurvePoint> curves, Approach approach,
                           const KStarFitOptions& options) {
    std::set<double> computes;
    for (const auto& c : curves) computes.insert(c.compute);
    if (computes.size() < 2) {
        throw Error(ErrorCode::Unidentifiable,
                    "k* model needs curves at 2 or more compute budgets; the shift exponent is "
                    "unobservable from " + std::to_string(computes.size()));
    }

    const double h_max = options.h_max > 0.0 ? options.h_max : default_h_max(approach);
    const auto levels = levels_for(h_max, options.h_step);
    const std::vector<KStarCurvePoint> points(curves.begin(), curves.end());
    std::vector<Sample> scratch;
    auto objective = [&](double a) {
        return fit_at(a, points, approach, levels, options, scratch).rss;
    };

    double best_a = options.a_min;
    double best = objective(best_a);
    const int steps = static_cast<int>(std::lround((options.a_max - options.a_min) / options.coarse_step));
    for (int i = 1; i <= steps; ++i) {
        const double a = options.a_min + i * options.coarse_step;
        const double v = objective(a);
        if (v < best) {
            best = v;
            best_a = a;
        }
    }

    // golden-section refinement inside the neighbouring coarse cells
    const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
    double lo = std::max(options.a_min, best_a - options.coarse_step);
    double hi = std::min(options.a_max, best_a + options.coarse_step);
    double x1 = hi - inv_phi * (hi - lo);
    double x2 = lo + inv_phi * (hi - lo);
    double f1 = objective(x1);
    double f2 = objective(x2);
    while (hi - lo > options.tolerance) {
        if (f1 <= f2) {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - inv_phi * (hi - lo);
            f1 = objective(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + inv_phi * (hi - lo);
            f2 = objective(x2);
        }
    }
    double a = 0.5 * (lo + hi);
    if (objective(a) > best) a = best_a;

    KStarModel model = fit_at(a, points, approach, levels, options, scratch);
    const double rms = std::sqrt(model.rss / static_cast<double>(std::max<std::size_t>(1, model.n_points)));
    if (rms > options.residual_warning) {
        std::ostringstream msg;
        msg << "large-residual: rms " << rms << " exceeds " << options.residual_warning;
        model.warnings.push_back(msg.str());
    }
    return model;
}

double predict_kstar(const KStarModel& model, double compute, double target_tokens, bool round_pow2) {
    const auto& ref = reference_constants();
    const double h = model.log2_k_star(compute, std::log2(target_tokens / ref.target_tokens));
    return round_pow2 ? std::exp2(std::round(h)) : std::exp2(h);
}

// ---------------------------------------------------------------------------

double RatioPowerLawFit::predict(double model_scale, double total_tokens, double ratio) const {
    for (const auto& g : groups) {
        if (g.model_scale == model_scale && g.total_tokens == total_tokens) {
            return g.intercept * std::pow(ratio, beta);
        }
    }
    throw Error(ErrorCode::Validation, "no fitted intercept for the requested (M, D) group");
}

RatioPowerLawFit fit_ratio_power_law(std::span<const RatioPoint> points) {
    if (points.empty()) throw Error(ErrorCode::Underdetermined, "ratio power law: no points");

    using Key = std::pair<double, double>;
    std::map<Key, std::vector<std::size_t>> members;
    for (std::size_t i = 0; i < points.size(); ++i) {
        const auto& p = points[i];
        if (!(p.ratio > 0.0) || !(p.loss > 0.0)) {
            throw Error(ErrorCode::Validation, "ratio power law needs positive r and L");
        }
        members[{p.model_scale, p.total_tokens}].push_back(i);
    }

    struct Moments {
        double x_mean;
        double y_mean;
    };
    std::map<Key, Moments> moments;
    double sxy = 0.0;
    double sxx = 0.0;
    for (const auto& [key, idx] : members) {
        std::set<double> ratios;
        double xs = 0.0;
        double ys = 0.0;
        for (auto i : idx) {
            ratios.insert(points[i].ratio);
            xs += std::log(points[i].ratio);
            ys += std::log(points[i].loss);
        }
        if (ratios.size() < 2) {
            std::ostringstream msg;
            msg << "ratio power law: group (M=" << key.first << ", D=" << key.second
                << ") has a single ratio value";
            throw Error(ErrorCode::DegenerateGroup, msg.str());
        }
        const double nx = static_cast<double>(idx.size());
        const Moments m{xs / nx, ys / nx};
        moments[key] = m;
        for (auto i : idx) {
            const double dx = std::log(points[i].ratio) - m.x_mean;
            sxy += dx * (std::log(points[i].loss) - m.y_mean);
            sxx += dx * dx;
        }
    }

    RatioPowerLawFit fit;
    fit.beta = sxy / sxx;
    for (const auto& [key, m] : moments) {
        fit.groups.push_back({key.first, key.second, std::exp(m.y_mean - fit.beta * m.x_mean),
                              members[key].size()});
    }
    fit.residuals.reserve(points.size());
    for (const auto& p : points) {
        const auto& m = moments[{p.model_scale, p.total_tokens}];
        const double pred = m.y_mean + fit.beta * (std::log(p.ratio) - m.x_mean);
        const double e = std::log(p.loss) - pred;
        fit.residuals.push_back(e);
        fit.rss += e * e;
    }
    return fit;
}

} // namespace sweepplan
