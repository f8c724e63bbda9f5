#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <deque>
#include <functional>
#include <limits>
#include <span>
#include <stdexcept>
#include <vector>

#include "icemlp/ice.hpp"

namespace icemlp {

enum class Termination {
    gradient_converged,
    loss_converged,
    max_iterations,
    line_search_failed,
};

inline const char* to_string(Termination t) {
    switch (t) {
        case Termination::gradient_converged: return "gradient_converged";
        case Termination::loss_converged: return "loss_converged";
        case Termination::max_iterations: return "max_iterations";
        case Termination::line_search_failed: return "line_search_failed";
    }
    return "unknown";
}

struct OptimizerConfig {
    std::size_t memory = 10;
    std::size_t max_iterations = 200;
    /// Stop when ||g||_inf <= gradient_tolerance * max(1, ||theta||_inf).
    double gradient_tolerance = 1e-6;
    /// Stop when one iteration improves the loss by less than
    /// relative_loss_tolerance * max(1, |loss|).
    double relative_loss_tolerance = 1e-9;
    double wolfe_c1 = 1e-4;
    double wolfe_c2 = 0.9;
    std::size_t max_line_search_steps = 20;

    void ensure_valid() const {
        if (memory < 1) throw std::invalid_argument("optimizer: memory must be >= 1");
        if (!(gradient_tolerance > 0.0) || !(relative_loss_tolerance > 0.0))
            throw std::invalid_argument("optimizer: tolerances must be positive");
        if (!(0.0 < wolfe_c1 && wolfe_c1 < wolfe_c2 && wolfe_c2 < 1.0))
            throw std::invalid_argument("optimizer: need 0 < c1 < c2 < 1");
        if (max_line_search_steps < 1)
            throw std::invalid_argument("optimizer: need at least one line-search step");
    }
};

struct OptimizerResult {
    std::vector<double> theta;
    double loss = 0.0;
    std::vector<double> gradient;
    std::size_t iterations = 0;
    Termination termination = Termination::max_iterations;
};

/// Snapshot after each accepted step (and once at the start with an empty
/// step). Spans refer to optimizer-internal storage and are valid only during
/// the callback.
struct IterationRecord {
    std::size_t iteration = 0;
    double loss = 0.0;
    std::span<const double> theta;
    std::span<const double> gradient;
    std::span<const double> step;
};

using IterationObserver = std::function<void(const IterationRecord&)>;

namespace detail {

inline double dot(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

inline double norm2(std::span<const double> a) { return std::sqrt(dot(a, a)); }

inline double norm_inf(std::span<const double> a) {
    double m = 0.0;
    for (double x : a) m = std::max(m, std::abs(x));
    return m;
}

inline bool all_finite(std::span<const double> a) {
    for (double x : a)
        if (!std::isfinite(x)) return false;
    return true;
}

struct CurvaturePair {
    std::vector<double> s;
    std::vector<double> y;
    double rho;
};

// Two-loop recursion with the usual s'y/y'y initial scaling.
inline void two_loop_direction(std::span<const double> gradient,
                               const std::deque<CurvaturePair>& history,
                               std::vector<double>& direction) {
    direction.assign(gradient.begin(), gradient.end());
    if (history.empty()) {
        for (double& x : direction) x = -x;
        return;
    }
    std::vector<double> alpha(history.size());
    for (std::size_t j = history.size(); j-- > 0;) {
        const CurvaturePair& p = history[j];
        alpha[j] = p.rho * dot(p.s, direction);
        for (std::size_t k = 0; k < direction.size(); ++k)
            direction[k] -= alpha[j] * p.y[k];
    }
    const CurvaturePair& last = history.back();
    const double gamma = dot(last.s, last.y) / dot(last.y, last.y);
    for (double& x : direction) x *= gamma;
    for (std::size_t j = 0; j < history.size(); ++j) {
        const CurvaturePair& p = history[j];
        const double beta = p.rho * dot(p.y, direction);
        for (std::size_t k = 0; k < direction.size(); ++k)
            direction[k] += (alpha[j] - beta) * p.s[k];
    }
    for (double& x : direction) x = -x;
}

}  // namespace detail

/// Limited-memory BFGS with a strong-Wolfe line search.
///
/// The objective callable maps a parameter vector to an ObjectiveValue; the
/// supplied gradient need not be the exact differential of the loss (the
/// bias-corrected objective's is not), so acceptance uses the Armijo
/// condition on the loss with the supplied directional derivatives, and
/// curvature pairs with s'y <= 1e-10 ||s|| ||y|| are dropped rather than
/// poisoning the inverse-Hessian model. Non-finite trial evaluations shrink
/// the search interval; a failed search returns the best point found with
/// termination line_search_failed. Identical inputs give identical iterates.
template <typename F>
OptimizerResult minimize(F&& objective, std::vector<double> theta0,
                         const OptimizerConfig& config = {},
                         const IterationObserver& observer = {}) {
    config.ensure_valid();
    const std::size_t dim = theta0.size();

    auto evaluate = [&](const std::vector<double>& x) -> ObjectiveValue {
        ObjectiveValue v = objective(x);
        if (v.gradient.size() != x.size())
            throw std::invalid_argument("minimize: objective returned gradient of wrong length");
        return v;
    };

    std::vector<double> theta = std::move(theta0);
    ObjectiveValue current = evaluate(theta);
    if (!std::isfinite(current.loss) || !detail::all_finite(current.gradient))
        throw std::invalid_argument("minimize: objective not finite at the starting point");

    if (observer)
        observer(IterationRecord{0, current.loss, theta, current.gradient, {}});

    std::deque<detail::CurvaturePair> history;
    std::vector<double> direction, trial_theta;
    OptimizerResult result;
    result.termination = Termination::max_iterations;

    std::size_t iteration = 0;
    while (true) {
        if (detail::norm_inf(current.gradient) <=
            config.gradient_tolerance * std::max(1.0, detail::norm_inf(theta))) {
            result.termination = Termination::gradient_converged;
            break;
        }
        if (iteration >= config.max_iterations) {
            result.termination = Termination::max_iterations;
            break;
        }

        detail::two_loop_direction(current.gradient, history, direction);
        double dd = detail::dot(current.gradient, direction);
        if (!std::isfinite(dd) || dd >= 0.0) {
            for (std::size_t k = 0; k < dim; ++k) direction[k] = -current.gradient[k];
            dd = -detail::dot(current.gradient, current.gradient);
        }

        // --- strong-Wolfe line search (bracket, then zoom) ---
        const double f0 = current.loss;
        const double armijo_slope = config.wolfe_c1 * dd;
        const double curvature_bound = -config.wolfe_c2 * dd;
        std::size_t evals_left = config.max_line_search_steps;

        auto eval_step = [&](double alpha) -> ObjectiveValue {
            trial_theta.resize(dim);
            for (std::size_t k = 0; k < dim; ++k)
                trial_theta[k] = theta[k] + alpha * direction[k];
            --evals_left;
            return evaluate(trial_theta);
        };

        bool accepted = false;
        double step_alpha = 0.0;
        ObjectiveValue next;

        double alpha = history.empty()
                           ? 1.0 / std::max(1.0, detail::norm2(direction))
                           : 1.0;
        double alpha_prev = 0.0, f_prev = f0, df_prev = dd;
        bool moved = false;

        // Interval [zoom_lo, zoom_hi] per the usual bracketing invariants.
        bool zooming = false;
        double zoom_lo = 0.0, zoom_f_lo = f0, zoom_df_lo = dd;
        double zoom_hi = 0.0, zoom_f_hi = 0.0;
        bool zoom_hi_finite = true;

        while (evals_left > 0) {
            double probe;
            if (!zooming) {
                probe = alpha;
            } else {
                // Quadratic interpolation through (lo, f, f') and (hi, f);
                // bisect when the model is degenerate or the step leaves the
                // safeguarded interior.
                const double h = zoom_hi - zoom_lo;
                probe = zoom_lo + 0.5 * h;
                if (zoom_hi_finite) {
                    const double denom = zoom_f_hi - zoom_f_lo - zoom_df_lo * h;
                    if (denom > 0.0) {
                        const double interp = zoom_lo - 0.5 * zoom_df_lo * h * h / denom;
                        const double margin = 0.001 * std::abs(h);
                        if (interp > std::min(zoom_lo, zoom_hi) + margin &&
                            interp < std::max(zoom_lo, zoom_hi) - margin)
                            probe = interp;
                    }
                }
                if (std::abs(h) <= 1e-16 * std::max(1.0, std::abs(zoom_lo))) break;
            }

            ObjectiveValue candidate = eval_step(probe);
            if (!std::isfinite(candidate.loss) || !detail::all_finite(candidate.gradient)) {
                // Reject and shrink toward the last good point.
                if (!zooming) {
                    alpha = 0.5 * (alpha_prev + probe);
                } else {
                    zoom_hi = probe;
                    zoom_hi_finite = false;
                }
                continue;
            }
            const double df = detail::dot(candidate.gradient, direction);

            if (!zooming) {
                if (candidate.loss > f0 + probe * armijo_slope || (moved && candidate.loss >= f_prev)) {
                    zooming = true;
                    zoom_lo = alpha_prev;
                    zoom_f_lo = f_prev;
                    zoom_df_lo = df_prev;
                    zoom_hi = probe;
                    zoom_f_hi = candidate.loss;
                    zoom_hi_finite = true;
                    continue;
                }
                if (std::abs(df) <= curvature_bound) {
                    accepted = true;
                    step_alpha = probe;
                    next = std::move(candidate);
                    break;
                }
                if (df >= 0.0) {
                    zooming = true;
                    zoom_lo = probe;
                    zoom_f_lo = candidate.loss;
                    zoom_df_lo = df;
                    zoom_hi = alpha_prev;
                    zoom_f_hi = f_prev;
                    zoom_hi_finite = true;
                    continue;
                }
                alpha_prev = probe;
                f_prev = candidate.loss;
                df_prev = df;
                moved = true;
                alpha = 2.0 * probe;
            } else {
                if (candidate.loss > f0 + probe * armijo_slope || candidate.loss >= zoom_f_lo) {
                    zoom_hi = probe;
                    zoom_f_hi = candidate.loss;
                    zoom_hi_finite = true;
                } else {
                    if (std::abs(df) <= curvature_bound) {
                        accepted = true;
                        step_alpha = probe;
                        next = std::move(candidate);
                        break;
                    }
                    if (df * (zoom_hi - zoom_lo) >= 0.0) {
                        zoom_hi = zoom_lo;
                        zoom_f_hi = zoom_f_lo;
                        zoom_hi_finite = true;
                    }
                    zoom_lo = probe;
                    zoom_f_lo = candidate.loss;
                    zoom_df_lo = df;
                }
            }
        }

        if (!accepted) {
            result.termination = Termination::line_search_failed;
            break;
        }

        // Accepted: update iterate, history, and convergence bookkeeping.
        std::vector<double> s(dim), y(dim);
        for (std::size_t k = 0; k < dim; ++k) {
            s[k] = step_alpha * direction[k];
            theta[k] += s[k];
            y[k] = next.gradient[k] - current.gradient[k];
        }
        const double improvement = current.loss - next.loss;
        current = std::move(next);
        ++iteration;

        if (observer)
            observer(IterationRecord{iteration, current.loss, theta, current.gradient, s});

        const double sy = detail::dot(s, y);
        if (sy > 1e-10 * detail::norm2(s) * detail::norm2(y)) {
            history.push_back({std::move(s), std::move(y), 1.0 / sy});
            if (history.size() > config.memory) history.pop_front();
        }

        if (improvement < config.relative_loss_tolerance * std::max(1.0, std::abs(current.loss))) {
            result.termination = Termination::loss_converged;
            break;
        }
    }

    result.theta = std::move(theta);
    result.loss = current.loss;
    result.gradient = std::move(current.gradient);
    result.iterations = iteration;
    return result;
}

}  // namespace icemlp
