#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

#include "icemlp/loss.hpp"
#include "icemlp/network.hpp"

namespace icemlp {

/// Per-observation derivatives of the cross-entropy loss with respect to the
/// packed parameter vector: the score vector v (gradient of the negative
/// log-likelihood of one sample) and this sample's contribution to the
/// Hessian-diagonal estimate.
struct PerSampleDerivatives {
    std::vector<double> gradient;
    std::vector<double> hessian_diagonal;
};

/// Scratch buffers for one backward sweep. Index l holds the layer-l vectors;
/// slot 0 is unused. Workspaces are per-invocation state and must not be
/// shared between concurrent sweeps.
struct BackpropWorkspace {
    std::vector<std::vector<double>> delta;                // first-order adjoints
    std::vector<std::vector<double>> gamma;                // diagonal curvature adjoints
    std::vector<std::vector<double>> activation_partials;  // dC/da_l
    std::vector<double> curvature_factor;                  // per-layer scratch

    void resize(const NetworkTopology& t) {
        const std::size_t depth = t.layer_count();
        delta.resize(depth + 1);
        gamma.resize(depth + 1);
        activation_partials.resize(depth + 1);
        for (std::size_t l = 1; l <= depth; ++l) {
            delta[l].resize(t.layer_sizes[l]);
            gamma[l].resize(t.layer_sizes[l]);
            activation_partials[l].resize(t.layer_sizes[l]);
        }
    }
};

namespace detail {

// One backward sweep over the layers. Writes the packed loss gradient into
// grad_out and, when hess_out is non-null, the packed Hessian diagonal as
// well. The gradient statements are shared between both call paths, so the
// gradient is bit-identical whether or not the curvature is requested.
//
// Per layer l, with b_i = gamma_l[i] * u'_l[i]^2 + (dC/da_l)[i] * u''_l[i]:
//   gradient block   (i,k):  delta_l[i] * abar[k]
//   curvature block  (i,k):  b_i * abar[k]^2
//   propagated:  (dC/da_{l-1})[k] = sum_i W(i,k+1) * delta_l[i]
//                gamma_{l-1}[k]   = sum_i b_i * W(i,k+1)^2
// where abar = (1, a_{l-1}) includes the bias activation.
inline void backward_sweep(const Network& net, const ForwardTrace& trace,
                           std::size_t label, BackpropWorkspace& ws,
                           std::span<double> grad_out, std::span<double>* hess_out) {
    const NetworkTopology& t = net.topology();
    const std::size_t depth = t.layer_count();
    if (trace.activations.size() != depth + 1 ||
        trace.activations[0].size() != t.input_width())
        throw std::invalid_argument("backprop: trace does not match network");
    if (grad_out.size() != net.parameter_count())
        throw std::invalid_argument("backprop: gradient buffer has wrong length");
    if (hess_out && hess_out->size() != net.parameter_count())
        throw std::invalid_argument("backprop: curvature buffer has wrong length");
    ws.resize(t);

    // Output layer: dC/da_L = probs - onehot, gamma_L = probs*(1-probs).
    loss_output_derivs(label, trace.activations[depth],
                       ws.activation_partials[depth], ws.gamma[depth]);
    for (std::size_t i = 0; i < t.class_count(); ++i)
        ws.delta[depth][i] = trace.first_derivs[depth][i] * ws.activation_partials[depth][i];

    std::vector<double>& b = ws.curvature_factor;
    for (std::size_t l = depth; l >= 1; --l) {
        const std::size_t rows = t.weight_rows(l);
        const std::size_t cols = t.weight_cols(l);
        const std::span<const double> w = net.layer(l);
        const std::vector<double>& prev = trace.activations[l - 1];
        const std::vector<double>& dlt = ws.delta[l];
        const std::size_t offset = net.layer_offset(l);

        for (std::size_t i = 0; i < rows; ++i) {
            double* g = grad_out.data() + offset + i * cols;
            g[0] = dlt[i];
            for (std::size_t k = 1; k < cols; ++k) g[k] = dlt[i] * prev[k - 1];
        }

        if (hess_out) {
            b.resize(rows);
            for (std::size_t i = 0; i < rows; ++i)
                b[i] = ws.gamma[l][i] * trace.first_derivs[l][i] * trace.first_derivs[l][i] +
                       ws.activation_partials[l][i] * trace.second_derivs[l][i];
            for (std::size_t i = 0; i < rows; ++i) {
                double* h = hess_out->data() + offset + i * cols;
                h[0] = b[i];
                for (std::size_t k = 1; k < cols; ++k)
                    h[k] = b[i] * prev[k - 1] * prev[k - 1];
            }
        }

        if (l == 1) break;

        std::vector<double>& ap = ws.activation_partials[l - 1];
        for (std::size_t k = 1; k < cols; ++k) {
            double sum = 0.0;
            for (std::size_t i = 0; i < rows; ++i) sum += w[i * cols + k] * dlt[i];
            ap[k - 1] = sum;
        }
        for (std::size_t k = 0; k + 1 < cols; ++k)
            ws.delta[l - 1][k] = trace.first_derivs[l - 1][k] * ap[k];

        if (hess_out) {
            std::vector<double>& gm = ws.gamma[l - 1];
            for (std::size_t k = 1; k < cols; ++k) {
                double sum = 0.0;
                for (std::size_t i = 0; i < rows; ++i) {
                    const double wv = w[i * cols + k];
                    sum += b[i] * wv * wv;
                }
                gm[k - 1] = sum;
            }
        }
    }
}

}  // namespace detail

/// Packed gradient of the single-observation cross-entropy loss with respect
/// to all weights, computed with the delta recursion. Activation partials
/// dC/da_l are retained in the workspace for the curvature pass.
inline void backprop_gradient(const Network& net, const ForwardTrace& trace,
                              std::size_t label, BackpropWorkspace& ws,
                              std::span<double> grad_out) {
    detail::backward_sweep(net, trace, label, ws, grad_out, nullptr);
}

inline std::vector<double> backprop_gradient(const Network& net,
                                             const ForwardTrace& trace,
                                             std::size_t label) {
    BackpropWorkspace ws;
    std::vector<double> grad(net.parameter_count());
    backprop_gradient(net, trace, label, ws, grad);
    return grad;
}

/// Gradient and approximate Hessian diagonal in a single backward sweep. The
/// curvature recursion propagates only the diagonal (the gamma vector); for
/// networks with hidden layers the result is the standard diagonal
/// approximation, exact when every weight feeds exactly one output.
inline void backprop_hessian_diagonal(const Network& net, const ForwardTrace& trace,
                                      std::size_t label, BackpropWorkspace& ws,
                                      std::span<double> grad_out,
                                      std::span<double> hess_out) {
    detail::backward_sweep(net, trace, label, ws, grad_out, &hess_out);
}

inline PerSampleDerivatives backprop_hessian_diagonal(const Network& net,
                                                      const ForwardTrace& trace,
                                                      std::size_t label) {
    BackpropWorkspace ws;
    PerSampleDerivatives d;
    d.gradient.resize(net.parameter_count());
    d.hessian_diagonal.resize(net.parameter_count());
    std::span<double> hess(d.hessian_diagonal);
    detail::backward_sweep(net, trace, label, ws, d.gradient, &hess);
    return d;
}

}  // namespace icemlp
