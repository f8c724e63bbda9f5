#pragma once

#include <concepts>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

#include "icemlp/backprop.hpp"
#include "icemlp/dataset.hpp"
#include "icemlp/network.hpp"

namespace icemlp {

/// A differentiable objective given as a sum over observations. Implementors
/// expose the current parameter vector plus per-sample loss, gradient, and
/// Hessian-diagonal evaluation; the objective modules build dataset-level
/// estimators on top. sample_gradient exists separately because the second
/// objective pass needs only scores, not curvature.
template <typename P>
concept SampleObjective =
    requires(P& p, const P& cp, std::size_t i, std::span<const double> theta,
             std::span<double> grad, std::span<double> hess) {
        { cp.parameter_count() } -> std::convertible_to<std::size_t>;
        { cp.sample_count() } -> std::convertible_to<std::size_t>;
        { cp.parameters() } -> std::convertible_to<std::span<const double>>;
        p.set_parameters(theta);
        { p.sample_gradient(i, grad) } -> std::convertible_to<double>;
        { p.sample_derivatives(i, grad, hess) } -> std::convertible_to<double>;
    };

/// Cross-entropy classification of a fixed dataset by a Network. Owns the
/// network (whose packed weights are the parameters) and scratch buffers for
/// forward/backward passes, so evaluation allocates nothing per sample.
class NetworkClassificationProblem {
public:
    NetworkClassificationProblem(Network network, const Dataset& data)
        : net_(std::move(network)), data_(&data) {
        if (data.feature_width != net_.topology().input_width() ||
            data.class_count > net_.topology().class_count())
            throw std::invalid_argument(
                "network problem: dataset shape does not match network topology");
        if (data.empty())
            throw std::invalid_argument("network problem: dataset is empty");
    }

    std::size_t parameter_count() const { return net_.parameter_count(); }
    std::size_t sample_count() const { return data_->size(); }

    std::span<const double> parameters() const { return net_.parameters(); }
    void set_parameters(std::span<const double> theta) { net_.set_parameters(theta); }

    double sample_loss(std::size_t i) {
        const LabeledSample& s = data_->samples[i];
        forward(net_, s.features, trace_);
        return cross_entropy(s.label, trace_.output());
    }

    double sample_gradient(std::size_t i, std::span<double> grad) {
        const LabeledSample& s = data_->samples[i];
        forward(net_, s.features, trace_);
        backprop_gradient(net_, trace_, s.label, ws_, grad);
        return cross_entropy(s.label, trace_.output());
    }

    double sample_derivatives(std::size_t i, std::span<double> grad, std::span<double> hess) {
        const LabeledSample& s = data_->samples[i];
        forward(net_, s.features, trace_);
        backprop_hessian_diagonal(net_, trace_, s.label, ws_, grad, hess);
        return cross_entropy(s.label, trace_.output());
    }

    const Network& network() const { return net_; }
    const Dataset& data() const { return *data_; }

private:
    Network net_;
    const Dataset* data_;
    ForwardTrace trace_;
    BackpropWorkspace ws_;
};

/// Mean cross-entropy of a network over a dataset (no gradients).
inline double mean_cross_entropy(const Network& net, const Dataset& data) {
    if (data.empty()) throw std::invalid_argument("mean_cross_entropy: empty dataset");
    ForwardTrace trace;
    double total = 0.0;
    for (const LabeledSample& s : data.samples) {
        forward(net, s.features, trace);
        total += cross_entropy(s.label, trace.output());
    }
    return total / static_cast<double>(data.size());
}

}  // namespace icemlp
