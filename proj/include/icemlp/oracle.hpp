#pragma once

#include <Eigen/Dense>
#include <Eigen/SVD>

#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <stdexcept>
#include <vector>

#include "icemlp/backprop.hpp"
#include "icemlp/ice.hpp"
#include "icemlp/network.hpp"
#include "icemlp/problem.hpp"

// Brute-force validators, deliberately written with plain index loops and no
// code shared with the production sweep. Test-time only; everything here is
// O(parameters^2) or worse.

namespace icemlp::oracle {

struct FdConfig {
    double first_order_scale = 1e-5;   // h_k = scale * max(1, |theta_k|)
    double second_order_scale = 1e-4;
};

/// ||a - b||_inf / max(1, ||b||_inf).
inline double norm_relative_error(std::span<const double> a, std::span<const double> b) {
    double diff = 0.0, scale = 1.0;
    for (std::size_t k = 0; k < a.size(); ++k) {
        diff = std::max(diff, std::abs(a[k] - b[k]));
        scale = std::max(scale, std::abs(b[k]));
    }
    return diff / scale;
}

/// max_k |a_k - b_k| / max(floor, |a_k|, |b_k|); pairs that are both exactly
/// zero contribute nothing.
inline double componentwise_relative_error(std::span<const double> a,
                                           std::span<const double> b,
                                           double floor = 0.0) {
    double worst = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) {
        const double scale = std::max({floor, std::abs(a[k]), std::abs(b[k])});
        if (scale == 0.0) continue;
        worst = std::max(worst, std::abs(a[k] - b[k]) / scale);
    }
    return worst;
}

/// Central-difference gradient of a scalar function of the parameter vector.
template <typename F>
std::vector<double> fd_gradient(F&& objective, std::vector<double> theta,
                                const FdConfig& config = {}) {
    std::vector<double> grad(theta.size());
    for (std::size_t k = 0; k < theta.size(); ++k) {
        const double h = config.first_order_scale * std::max(1.0, std::abs(theta[k]));
        const double saved = theta[k];
        theta[k] = saved + h;
        const double above = objective(theta);
        theta[k] = saved - h;
        const double below = objective(theta);
        theta[k] = saved;
        if (!std::isfinite(above) || !std::isfinite(below))
            throw std::runtime_error("fd_gradient: non-finite probe");
        grad[k] = (above - below) / (2.0 * h);
    }
    return grad;
}

/// Second central difference (f(x+h) - 2f(x) + f(x-h)) / h^2 per coordinate.
template <typename F>
std::vector<double> fd_hessian_diagonal(F&& objective, std::vector<double> theta,
                                        const FdConfig& config = {}) {
    const double center = objective(theta);
    if (!std::isfinite(center)) throw std::runtime_error("fd_hessian_diagonal: non-finite center");
    std::vector<double> diag(theta.size());
    for (std::size_t k = 0; k < theta.size(); ++k) {
        const double h = config.second_order_scale * std::max(1.0, std::abs(theta[k]));
        const double saved = theta[k];
        theta[k] = saved + h;
        const double above = objective(theta);
        theta[k] = saved - h;
        const double below = objective(theta);
        theta[k] = saved;
        if (!std::isfinite(above) || !std::isfinite(below))
            throw std::runtime_error("fd_hessian_diagonal: non-finite probe");
        diag[k] = (above - 2.0 * center + below) / (h * h);
    }
    return diag;
}

/// Naive summation-form implementation of the diagonal curvature recursion
/// and the weight derivatives, with its own activation-partial bookkeeping.
/// Same contract as backprop_hessian_diagonal; kept deliberately loop-by-loop
/// as the independent reference for the production backward sweep.
inline PerSampleDerivatives dense_gamma_oracle(const Network& net,
                                               const ForwardTrace& trace,
                                               std::size_t label) {
    const NetworkTopology& t = net.topology();
    const std::size_t depth = t.layer_count();
    const std::size_t classes = t.class_count();

    // Output probabilities, max-shifted.
    const std::vector<double>& out = trace.activations[depth];
    double top = out[0];
    for (std::size_t i = 1; i < classes; ++i)
        if (out[i] > top) top = out[i];
    std::vector<double> probs(classes);
    double sum = 0.0;
    for (std::size_t i = 0; i < classes; ++i) {
        probs[i] = std::exp(out[i] - top);
        sum += probs[i];
    }
    for (std::size_t i = 0; i < classes; ++i) probs[i] /= sum;

    std::vector<std::vector<double>> partials(depth + 1);  // dC/da_l
    std::vector<std::vector<double>> gamma(depth + 1);     // d2C/da_l^2 diagonal
    partials[depth].resize(classes);
    gamma[depth].resize(classes);
    for (std::size_t i = 0; i < classes; ++i) {
        partials[depth][i] = probs[i] - (i == label ? 1.0 : 0.0);
        gamma[depth][i] = (1.0 - probs[i]) * probs[i];
    }

    PerSampleDerivatives d;
    d.gradient.assign(net.parameter_count(), 0.0);
    d.hessian_diagonal.assign(net.parameter_count(), 0.0);

    for (std::size_t l = depth; l >= 1; --l) {
        const std::size_t rows = t.weight_rows(l);
        const std::size_t cols = t.weight_cols(l);
        const std::size_t offset = net.layer_offset(l);

        for (std::size_t i = 0; i < rows; ++i) {
            const double delta_i = trace.first_derivs[l][i] * partials[l][i];
            const double bracket =
                gamma[l][i] * trace.first_derivs[l][i] * trace.first_derivs[l][i] +
                partials[l][i] * trace.second_derivs[l][i];
            for (std::size_t k = 0; k < cols; ++k) {
                const double abar = (k == 0) ? 1.0 : trace.activations[l - 1][k - 1];
                d.gradient[offset + i * cols + k] = delta_i * abar;
                d.hessian_diagonal[offset + i * cols + k] = bracket * abar * abar;
            }
        }

        if (l == 1) break;
        partials[l - 1].assign(cols - 1, 0.0);
        gamma[l - 1].assign(cols - 1, 0.0);
        for (std::size_t k = 1; k < cols; ++k) {
            for (std::size_t i = 0; i < rows; ++i) {
                const double w = net.weight(l, i, k);
                const double delta_i = trace.first_derivs[l][i] * partials[l][i];
                const double bracket =
                    gamma[l][i] * trace.first_derivs[l][i] * trace.first_derivs[l][i] +
                    partials[l][i] * trace.second_derivs[l][i];
                partials[l - 1][k - 1] += w * delta_i;
                gamma[l - 1][k - 1] += bracket * w * w;
            }
        }
    }
    return d;
}

/// Full-matrix bias-correction report at desk scale: the empirical negative
/// Hessian (by central-differencing the mean score vector column by column,
/// then symmetrizing), the empirical Fisher information, and the penalty
/// computed with an SVD pseudo-inverse, next to the production diagonal
/// approximation on the same data.
struct ExactIceReport {
    Eigen::MatrixXd j_hat;
    Eigen::MatrixXd i_hat;
    double exact_penalty = 0.0;
    double approx_penalty = 0.0;
    double condition_estimate = 0.0;           // largest / smallest retained singular value
    std::size_t retained_singular_values = 0;
};

inline constexpr std::size_t kExactIceMaxParameters = 64;

template <SampleObjective P>
ExactIceReport exact_ice(P& problem, double svd_truncation = 1e-12) {
    const std::size_t d = problem.parameter_count();
    const std::size_t n = problem.sample_count();
    if (d > kExactIceMaxParameters)
        throw std::invalid_argument("exact_ice: full-matrix computation is desk scale only");
    if (n == 0) throw std::invalid_argument("exact_ice: empty dataset");

    const std::span<const double> start = problem.parameters();
    std::vector<double> theta(start.begin(), start.end());

    std::vector<double> grad(d);
    auto mean_gradient = [&](const std::vector<double>& at, std::vector<double>& out) {
        problem.set_parameters(at);
        out.assign(d, 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            problem.sample_gradient(i, grad);
            for (std::size_t k = 0; k < d; ++k) out[k] += grad[k];
        }
        for (double& g : out) g /= static_cast<double>(n);
    };

    const FdConfig fd;
    Eigen::MatrixXd columns(d, d);
    std::vector<double> probe = theta, above(d), below(d);
    for (std::size_t k = 0; k < d; ++k) {
        const double h = fd.first_order_scale * std::max(1.0, std::abs(theta[k]));
        probe[k] = theta[k] + h;
        mean_gradient(probe, above);
        probe[k] = theta[k] - h;
        mean_gradient(probe, below);
        probe[k] = theta[k];
        for (std::size_t r = 0; r < d; ++r)
            columns(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(k)) =
                (above[r] - below[r]) / (2.0 * h);
    }
    problem.set_parameters(theta);

    ExactIceReport report;
    report.j_hat = 0.5 * (columns + columns.transpose());

    Eigen::MatrixXd scores(d, n);
    for (std::size_t i = 0; i < n; ++i) {
        problem.sample_gradient(i, grad);
        for (std::size_t r = 0; r < d; ++r)
            scores(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(i)) = grad[r];
    }
    report.i_hat = (scores * scores.transpose()) / static_cast<double>(n);

    Eigen::JacobiSVD<Eigen::MatrixXd> svd(report.j_hat,
                                          Eigen::ComputeFullU | Eigen::ComputeFullV);
    const Eigen::VectorXd& sigma = svd.singularValues();
    const double sigma_max = sigma.size() > 0 ? sigma(0) : 0.0;
    const double cutoff = svd_truncation * sigma_max;
    Eigen::VectorXd inverted = Eigen::VectorXd::Zero(sigma.size());
    double sigma_min_kept = 0.0;
    for (Eigen::Index i = 0; i < sigma.size(); ++i) {
        if (sigma(i) > cutoff && sigma(i) > 0.0) {
            inverted(i) = 1.0 / sigma(i);
            sigma_min_kept = sigma(i);
            ++report.retained_singular_values;
        }
    }
    report.condition_estimate =
        report.retained_singular_values > 0 ? sigma_max / sigma_min_kept : 0.0;
    const Eigen::MatrixXd pinv =
        svd.matrixV() * inverted.asDiagonal() * svd.matrixU().transpose();

    double penalty = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        penalty += scores.col(static_cast<Eigen::Index>(i)).dot(
            pinv * scores.col(static_cast<Eigen::Index>(i)));
    // Information-criterion scale: tr(I_hat J_hat^+) / n, matching the
    // production penalty's normalization.
    report.exact_penalty = penalty / (static_cast<double>(n) * static_cast<double>(n));

    report.approx_penalty = ice_accumulate(problem).penalty();
    problem.set_parameters(theta);
    return report;
}

/// One-parameter model with per-sample losses 0.5 * (theta - anchor_i)^2.
/// Its per-sample curvature is exactly 1, so the diagonal approximation of
/// the penalty is exact; the penalty path can be validated against the
/// full-matrix report at tight tolerance.
class ScalarQuadraticProblem {
public:
    explicit ScalarQuadraticProblem(std::vector<double> anchors, double theta = 0.0)
        : anchors_(std::move(anchors)), theta_{theta} {
        if (anchors_.empty())
            throw std::invalid_argument("scalar quadratic problem: need at least one anchor");
    }

    std::size_t parameter_count() const { return 1; }
    std::size_t sample_count() const { return anchors_.size(); }
    std::span<const double> parameters() const { return {&theta_, 1}; }
    void set_parameters(std::span<const double> theta) { theta_ = theta[0]; }

    double sample_loss(std::size_t i) const {
        const double r = theta_ - anchors_[i];
        return 0.5 * r * r;
    }
    double sample_gradient(std::size_t i, std::span<double> grad) {
        grad[0] = theta_ - anchors_[i];
        return sample_loss(i);
    }
    double sample_derivatives(std::size_t i, std::span<double> grad, std::span<double> hess) {
        hess[0] = 1.0;
        return sample_gradient(i, grad);
    }

private:
    std::vector<double> anchors_;
    double theta_;
};

}  // namespace icemlp::oracle
