#pragma once

#include <cstdint>
#include <vector>

#include "icemlp/dataset.hpp"
#include "icemlp/network.hpp"
#include "icemlp/rng.hpp"
#include "icemlp/topology.hpp"

namespace testsupport {

inline std::vector<double> random_theta(std::size_t count, std::uint64_t seed,
                                        double radius = 0.5) {
    std::mt19937_64 rng(seed);
    std::vector<double> theta(count);
    for (double& x : theta) x = icemlp::uniform_range(rng, -radius, radius);
    return theta;
}

/// Features are kept away from zero so per-parameter relative comparisons of
/// curvature (which scales with feature^2) stay well conditioned.
inline icemlp::LabeledSample random_sample(const icemlp::NetworkTopology& t,
                                           std::uint64_t seed, double lo = 0.2,
                                           double hi = 1.2) {
    std::mt19937_64 rng(seed);
    icemlp::LabeledSample s;
    s.features.resize(t.input_width());
    for (double& x : s.features) x = icemlp::uniform_range(rng, lo, hi);
    s.label = icemlp::uniform_index(rng, t.class_count());
    return s;
}

inline icemlp::Network random_network(const icemlp::NetworkTopology& t,
                                      std::uint64_t seed, double radius = 0.5) {
    icemlp::Network net(t);
    net.set_parameters(random_theta(net.parameter_count(), seed, radius));
    return net;
}

inline icemlp::Dataset random_dataset(const icemlp::NetworkTopology& t, std::size_t n,
                                      std::uint64_t seed) {
    icemlp::Dataset data;
    data.feature_width = t.input_width();
    data.class_count = t.class_count();
    for (std::size_t i = 0; i < n; ++i)
        data.samples.push_back(random_sample(t, icemlp::derive_seed(seed, i)));
    return data;
}

}  // namespace testsupport
