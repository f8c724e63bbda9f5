#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <utility>
#include <vector>

#include "icemlp/loss.hpp"
#include "icemlp/network.hpp"
#include "icemlp/rng.hpp"
#include "icemlp/topology.hpp"

namespace icemlp {

struct LabeledSample {
    std::vector<double> features;
    std::size_t label = 0;

    friend bool operator==(const LabeledSample&, const LabeledSample&) = default;
};

/// Immutable after construction; safe for concurrent reads.
struct Dataset {
    std::vector<LabeledSample> samples;
    std::size_t feature_width = 0;
    std::size_t class_count = 0;

    std::size_t size() const { return samples.size(); }
    bool empty() const { return samples.empty(); }

    void validate() const {
        for (const LabeledSample& s : samples) {
            if (s.features.size() != feature_width)
                throw std::invalid_argument("dataset: inconsistent feature width");
            if (s.label >= class_count)
                throw std::invalid_argument("dataset: label out of range");
        }
    }

    friend bool operator==(const Dataset&, const Dataset&) = default;
};

/// Synthetic classification data drawn from a teacher network: features are
/// i.i.d. uniform [0,1) per coordinate, labels are sampled from the teacher's
/// softmax probabilities with scores scaled by noise_temperature. The
/// scale_features option multiplies coordinate j by 10^(j mod 3) to emulate
/// badly balanced regressors.
struct SyntheticSpec {
    std::size_t feature_width = 11;
    std::size_t class_count = 3;
    NetworkTopology teacher_topology{11, 3};
    std::uint64_t teacher_seed = 1;
    double noise_temperature = 1.0;
    bool scale_features = false;

    void ensure_valid() const {
        teacher_topology.ensure_valid();
        if (teacher_topology.input_width() != feature_width ||
            teacher_topology.class_count() != class_count)
            throw std::invalid_argument(
                "synthetic spec: teacher topology must match feature width and class count");
        if (!(noise_temperature > 0.0) || !std::isfinite(noise_temperature))
            throw std::invalid_argument("synthetic spec: noise_temperature must be positive");
    }
};

/// Draws n samples from an explicit teacher network.
inline Dataset generate_synthetic(const Network& teacher, double noise_temperature,
                                  bool scale_features, std::size_t n,
                                  std::uint64_t seed) {
    if (n == 0) throw std::invalid_argument("generate_synthetic: n must be >= 1");
    if (!(noise_temperature > 0.0) || !std::isfinite(noise_temperature))
        throw std::invalid_argument("generate_synthetic: noise_temperature must be positive");

    const std::size_t width = teacher.topology().input_width();
    const std::size_t classes = teacher.topology().class_count();
    std::mt19937_64 rng(seed);

    Dataset data;
    data.feature_width = width;
    data.class_count = classes;
    data.samples.resize(n);

    ForwardTrace trace;
    std::vector<double> scores(classes);
    std::vector<double> probs;
    for (LabeledSample& sample : data.samples) {
        sample.features.resize(width);
        for (std::size_t j = 0; j < width; ++j) {
            double x = uniform_unit(rng);
            if (scale_features) {
                static const double scale[3] = {1.0, 10.0, 100.0};
                x *= scale[j % 3];
            }
            sample.features[j] = x;
        }
        forward(teacher, sample.features, trace);
        for (std::size_t c = 0; c < classes; ++c)
            scores[c] = noise_temperature * trace.output()[c];
        softmax_into(scores, probs);

        // Inverse-CDF draw; the final class absorbs rounding slack.
        const double u = uniform_unit(rng);
        double cumulative = 0.0;
        std::size_t label = classes - 1;
        for (std::size_t c = 0; c < classes; ++c) {
            cumulative += probs[c];
            if (u < cumulative) {
                label = c;
                break;
            }
        }
        sample.label = label;
    }
    return data;
}

inline Dataset generate_synthetic(const SyntheticSpec& spec, std::size_t n,
                                  std::uint64_t seed) {
    spec.ensure_valid();
    const Network teacher = init_network(spec.teacher_topology, spec.teacher_seed);
    return generate_synthetic(teacher, spec.noise_temperature, spec.scale_features, n, seed);
}

/// Random fit/test partition: each sample lands in the fit set independently
/// with probability p_fit. Throws if either side comes out empty.
inline std::pair<Dataset, Dataset> split(const Dataset& data, double p_fit,
                                         std::uint64_t seed) {
    if (!(p_fit > 0.0) || !(p_fit < 1.0))
        throw std::invalid_argument("split: p_fit must lie strictly between 0 and 1");
    std::mt19937_64 rng(seed);
    Dataset fit, test;
    fit.feature_width = test.feature_width = data.feature_width;
    fit.class_count = test.class_count = data.class_count;
    for (const LabeledSample& s : data.samples)
        (uniform_unit(rng) < p_fit ? fit : test).samples.push_back(s);
    if (fit.empty() || test.empty())
        throw std::runtime_error("split: degenerate partition (one side is empty)");
    return {std::move(fit), std::move(test)};
}

/// Uniform subsample without replacement, deterministic for a given seed.
/// Selected samples keep their original relative order.
inline Dataset subsample(const Dataset& data, std::size_t target, std::uint64_t seed) {
    if (target > data.size())
        throw std::invalid_argument("subsample: target exceeds dataset size");
    std::mt19937_64 rng(seed);
    std::vector<std::size_t> index(data.size());
    for (std::size_t i = 0; i < index.size(); ++i) index[i] = i;
    for (std::size_t i = 0; i < target; ++i) {
        const std::size_t j = i + uniform_index(rng, index.size() - i);
        std::swap(index[i], index[j]);
    }
    index.resize(target);
    std::sort(index.begin(), index.end());

    Dataset out;
    out.feature_width = data.feature_width;
    out.class_count = data.class_count;
    out.samples.reserve(target);
    for (std::size_t i : index) out.samples.push_back(data.samples[i]);
    return out;
}

}  // namespace icemlp
