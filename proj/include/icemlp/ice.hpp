#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <stdexcept>
#include <vector>

#include "icemlp/problem.hpp"

namespace icemlp {

/// sqrt of 64-bit machine epsilon; the scale cutoff used by both the score
/// truncation and the inverse-curvature stabilizer.
inline const double kSqrtEpsilon = std::sqrt(std::numeric_limits<double>::epsilon());

/// Zeroes every component with |v_k| < sqrt(eps) * max_k |v_k|. Such entries
/// cannot change a dot product against v within machine error, but they can
/// destabilize the inverse-curvature weighting. Idempotent.
inline void truncate_small_components(std::span<double> v) {
    double top = 0.0;
    for (double x : v) top = std::max(top, std::abs(x));
    const double cutoff = kSqrtEpsilon * top;
    for (double& x : v)
        if (std::abs(x) < cutoff) x = 0.0;
}

inline std::vector<double> truncate_small_components(std::vector<double> v) {
    truncate_small_components(std::span<double>(v));
    return v;
}

/// Stabilized elementwise inverse of the curvature estimate: returns
/// approximately 1/d_k where d_k is trustworthy, blending toward 1/v_k^2 as
/// d_k falls below rounding scale. The blend weight is
///   w = exp(-sqrt(eps) * d_max_abs / max(0, d_k)),
/// continuous in d_k, with w = 0 for d_k <= 0 (which pins the penalty term
/// v_k^2 / v_k^2 at exactly 1) and w = 1 when the whole curvature vector is
/// zero but d_k > 0. A zero denominator only occurs for v_k = 0 with no
/// usable curvature; that element carries no information and contributes 0.
inline double stabilized_inverse_element(double d_k, double v_k, double d_max_abs) {
    double w;
    if (d_k <= 0.0)
        w = 0.0;
    else if (d_max_abs == 0.0)
        w = 1.0;
    else
        w = std::exp(-kSqrtEpsilon * d_max_abs / d_k);
    const double denominator = w * d_k + (1.0 - w) * v_k * v_k;
    if (denominator == 0.0) return 0.0;
    return 1.0 / denominator;
}

struct ObjectiveValue {
    double loss = 0.0;
    std::vector<double> gradient;
};

/// Running state of the two-pass ICE evaluation. d_hat is the mean
/// per-observation Hessian diagonal; penalty_sum and correction_sum hold the
/// un-normalized quadratic-form accumulations from the second pass.
struct IceAccumulator {
    std::size_t n = 0;
    double mean_loss = 0.0;
    std::vector<double> mean_gradient;
    std::vector<double> d_hat;
    double penalty_sum = 0.0;
    std::vector<double> correction_sum;

    /// Penalty on the information-criterion scale: the mean stabilized
    /// quadratic form divided once more by n, i.e. tr(I_hat D_hat^-1) / n,
    /// which decays like parameters/n and so hands the objective back to
    /// plain maximum likelihood as the sample grows.
    double penalty() const {
        return penalty_sum / (static_cast<double>(n) * static_cast<double>(n));
    }
};

/// Evaluation telemetry, primarily for the experiment harness: counts
/// evaluations where the curvature estimate was elementwise non-negative and
/// any of those where the penalty came out negative (there should be none).
struct IceInstrumentation {
    std::size_t evaluations = 0;
    std::size_t nonneg_curvature_evaluations = 0;
    std::size_t negative_penalty_violations = 0;
};

/// Mean negated log-likelihood and its gradient: loss is the mean
/// cross-entropy over samples, gradient the mean per-sample score vector.
template <SampleObjective P>
ObjectiveValue mle_objective(P& problem) {
    const std::size_t n = problem.sample_count();
    const std::size_t d = problem.parameter_count();
    if (n == 0) throw std::invalid_argument("mle_objective: empty dataset");

    ObjectiveValue value;
    value.gradient.assign(d, 0.0);
    std::vector<double> grad(d);
    for (std::size_t i = 0; i < n; ++i) {
        value.loss += problem.sample_gradient(i, grad);
        for (std::size_t k = 0; k < d; ++k) value.gradient[k] += grad[k];
    }
    const double inv_n = 1.0 / static_cast<double>(n);
    value.loss *= inv_n;
    for (double& g : value.gradient) g *= inv_n;
    return value;
}

/// Two sweeps over the data: the first accumulates the mean loss, mean score
/// vector, and mean Hessian diagonal; the second truncates each per-sample
/// score vector, forms its stabilized inverse-curvature quadratic form q_i,
/// and accumulates the penalty and the gradient correction sum q_i * v_i.
template <SampleObjective P>
IceAccumulator ice_accumulate(P& problem) {
    const std::size_t n = problem.sample_count();
    const std::size_t d = problem.parameter_count();
    if (n == 0) throw std::invalid_argument("ice_accumulate: empty dataset");

    IceAccumulator acc;
    acc.n = n;
    acc.mean_gradient.assign(d, 0.0);
    acc.d_hat.assign(d, 0.0);
    acc.correction_sum.assign(d, 0.0);

    std::vector<double> grad(d), hess(d);
    for (std::size_t i = 0; i < n; ++i) {
        acc.mean_loss += problem.sample_derivatives(i, grad, hess);
        for (std::size_t k = 0; k < d; ++k) {
            acc.mean_gradient[k] += grad[k];
            acc.d_hat[k] += hess[k];
        }
    }
    const double inv_n = 1.0 / static_cast<double>(n);
    acc.mean_loss *= inv_n;
    for (double& g : acc.mean_gradient) g *= inv_n;
    for (double& h : acc.d_hat) h *= inv_n;

    double d_max_abs = 0.0;
    for (double h : acc.d_hat) d_max_abs = std::max(d_max_abs, std::abs(h));

    for (std::size_t i = 0; i < n; ++i) {
        problem.sample_gradient(i, grad);
        truncate_small_components(grad);
        double q = 0.0;
        for (std::size_t k = 0; k < d; ++k)
            q += grad[k] * grad[k] *
                 stabilized_inverse_element(acc.d_hat[k], grad[k], d_max_abs);
        acc.penalty_sum += q;
        for (std::size_t k = 0; k < d; ++k) acc.correction_sum[k] += q * grad[k];
    }
    return acc;
}

/// Bias-corrected objective: loss is the mean cross-entropy plus the
/// stabilized inverse-curvature penalty tr(I_hat D_hat^-1) / n, accumulated
/// as (1/n^2) sum_i q_i; the gradient adds the matching correction term
/// (2/n^2) * sum_i q_i v_i to the mean score vector. The gradient is itself
/// an approximation of the penalty's derivative, not an exact differential
/// of the loss.
template <SampleObjective P>
ObjectiveValue ice_objective(P& problem, IceInstrumentation* telemetry = nullptr) {
    IceAccumulator acc = ice_accumulate(problem);
    const double inv_n = 1.0 / static_cast<double>(acc.n);
    const double inv_n2 = inv_n * inv_n;

    if (telemetry) {
        ++telemetry->evaluations;
        bool nonneg = true;
        for (double h : acc.d_hat)
            if (h < 0.0) {
                nonneg = false;
                break;
            }
        if (nonneg) {
            ++telemetry->nonneg_curvature_evaluations;
            if (acc.penalty_sum < 0.0) ++telemetry->negative_penalty_violations;
        }
    }

    ObjectiveValue value;
    value.loss = acc.mean_loss + acc.penalty_sum * inv_n2;
    value.gradient = acc.mean_gradient;
    for (std::size_t k = 0; k < value.gradient.size(); ++k)
        value.gradient[k] += 2.0 * inv_n2 * acc.correction_sum[k];
    return value;
}

}  // namespace icemlp
