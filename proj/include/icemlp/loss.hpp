#pragma once

#include <cmath>
#include <limits>
#include <span>
#include <stdexcept>
#include <vector>

namespace icemlp {

/// Shift-invariant softmax: the max score is subtracted before
/// exponentiation, so scores of any magnitude produce finite output.
inline void softmax_into(std::span<const double> scores, std::vector<double>& probs) {
    probs.resize(scores.size());
    double top = -std::numeric_limits<double>::infinity();
    for (double s : scores)
        if (s > top) top = s;
    double sum = 0.0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        probs[i] = std::exp(scores[i] - top);
        sum += probs[i];
    }
    for (double& p : probs) p /= sum;
}

inline std::vector<double> softmax(std::span<const double> scores) {
    std::vector<double> probs;
    softmax_into(scores, probs);
    return probs;
}

/// -log softmax(scores)[label], computed through log-sum-exp.
inline double cross_entropy(std::size_t label, std::span<const double> scores) {
    if (label >= scores.size())
        throw std::out_of_range("cross_entropy: label out of range");
    double top = -std::numeric_limits<double>::infinity();
    for (double s : scores)
        if (s > top) top = s;
    double sum = 0.0;
    for (double s : scores) sum += std::exp(s - top);
    return top + std::log(sum) - scores[label];
}

/// Gradient and diagonal curvature of the cross-entropy loss with respect to
/// the output scores: gradient = probs - onehot(label), curvature entry i is
/// probs_i * (1 - probs_i), always in [0, 0.25].
inline void loss_output_derivs(std::size_t label, std::span<const double> scores,
                               std::vector<double>& gradient,
                               std::vector<double>& hessian_diagonal) {
    if (label >= scores.size())
        throw std::out_of_range("loss_output_derivs: label out of range");
    softmax_into(scores, gradient);
    hessian_diagonal.resize(scores.size());
    for (std::size_t i = 0; i < scores.size(); ++i)
        hessian_diagonal[i] = gradient[i] * (1.0 - gradient[i]);
    gradient[label] -= 1.0;
}

}  // namespace icemlp
