#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>

#include "icemlp/ice.hpp"
#include "icemlp/oracle.hpp"
#include "support.hpp"

using namespace icemlp;

TEST_CASE("truncation zeroes only components below the scaled cutoff") {
    CHECK(truncate_small_components(std::vector<double>{1.0, 1e-10}) ==
          std::vector<double>{1.0, 0.0});
    CHECK(truncate_small_components(std::vector<double>{0.0, 0.0, 0.0}) ==
          std::vector<double>{0.0, 0.0, 0.0});
    // The cutoff scales with the largest component.
    CHECK(truncate_small_components(std::vector<double>{1e-9, 1e-10}) ==
          std::vector<double>{1e-9, 1e-10});
}

TEST_CASE("truncation is idempotent") {
    std::mt19937_64 rng(64);
    for (int rep = 0; rep < 50; ++rep) {
        std::vector<double> v(20);
        for (double& x : v)
            x = uniform_range(rng, -1.0, 1.0) * std::pow(10.0, -3.0 * uniform_unit(rng) * 4.0);
        const std::vector<double> once = truncate_small_components(v);
        CHECK(truncate_small_components(once) == once);
    }
}

TEST_CASE("stabilized inverse branches") {
    // Non-positive curvature pins the penalty contribution at exactly 1.
    const double inv = stabilized_inverse_element(-5.0, 2.0, 5.0);
    CHECK(inv == 0.25);
    CHECK(2.0 * 2.0 * inv == 1.0);

    // Healthy curvature at the top of the scale: essentially 1/d. The exact
    // value of the blend is evaluated independently as the oracle.
    const double healthy = stabilized_inverse_element(4.0, 1.0, 4.0);
    CHECK(std::abs(healthy - 0.25) / 0.25 <= 1e-7);
    const double w = std::exp(-kSqrtEpsilon);
    CHECK(healthy == 1.0 / (w * 4.0 + (1.0 - w) * 1.0));

    // No curvature, no score: the element contributes nothing.
    CHECK(stabilized_inverse_element(0.0, 0.0, 0.0) == 0.0);

    // Zero curvature vector with positive d_k takes the w = 1 convention.
    CHECK(stabilized_inverse_element(2.0, 3.0, 0.0) == 0.5);
}

TEST_CASE("pinning holds across magnitudes") {
    for (double d_k : {0.0, -1e-12, -1.0, -1e9}) {
        for (double mag : {1e-6, 1e-2, 1.0, 1e4, 1e6}) {
            for (double sign : {-1.0, 1.0}) {
                const double v = sign * mag;
                const double contribution = v * v * stabilized_inverse_element(d_k, v, 3.0);
                CHECK(std::abs(contribution - 1.0) <= 1e-12);
            }
        }
    }
}

TEST_CASE("blend weight is nondecreasing in the curvature with the right limits") {
    const double d_max = 2.5;
    double previous = -1.0;
    for (double exponent = -10.0; exponent <= 10.0; exponent += 0.25) {
        const double d_k = d_max * std::pow(10.0, exponent);
        // With v = 0 the inverse is 1/(w d), so w can be read back out.
        const double inv = stabilized_inverse_element(d_k, 0.0, d_max);
        const double w = inv > 0.0 ? 1.0 / (inv * d_k) : 0.0;
        CHECK(w >= previous - 1e-12);
        previous = w;
    }
    const double w_tiny =
        1.0 / (stabilized_inverse_element(d_max * 1e-10, 0.0, d_max) * d_max * 1e-10);
    const double w_huge =
        1.0 / (stabilized_inverse_element(d_max * 1e10, 0.0, d_max) * d_max * 1e10);
    CHECK(w_tiny <= 1e-60);
    CHECK(w_huge >= 1.0 - 1e-15);
}

TEST_CASE("mle objective basics") {
    const NetworkTopology topology{2, 3};
    const Dataset data = testsupport::random_dataset(topology, 17, 71);

    // Zero weights predict uniformly: loss is log(3) regardless of the data.
    NetworkClassificationProblem uniform(Network(topology), data);
    const ObjectiveValue at_zero = mle_objective(uniform);
    CHECK(at_zero.loss == Catch::Approx(std::log(3.0)).epsilon(1e-14));

    // One sample: the objective is that sample's cross-entropy.
    Dataset single;
    single.feature_width = 2;
    single.class_count = 3;
    single.samples.push_back(data.samples[0]);
    Network net = testsupport::random_network(topology, 72);
    NetworkClassificationProblem one(net, single);
    const ForwardTrace trace = forward(net, single.samples[0].features);
    CHECK(mle_objective(one).loss ==
          Catch::Approx(cross_entropy(single.samples[0].label, trace.output())));
}

TEST_CASE("mle gradient matches finite differences of the mean loss") {
    const NetworkTopology topology{4, 4, 3};
    const Dataset data = testsupport::random_dataset(topology, 12, 73);
    const Network net = testsupport::random_network(topology, 74);

    NetworkClassificationProblem problem(net, data);
    const ObjectiveValue value = mle_objective(problem);

    NetworkClassificationProblem probe(net, data);
    const std::vector<double> fd = oracle::fd_gradient(
        [&](const std::vector<double>& theta) {
            probe.set_parameters(theta);
            double total = 0.0;
            for (std::size_t i = 0; i < probe.sample_count(); ++i) total += probe.sample_loss(i);
            return total / static_cast<double>(probe.sample_count());
        },
        std::vector<double>(net.parameters().begin(), net.parameters().end()));

    CHECK(oracle::norm_relative_error(value.gradient, fd) <= 1e-5);
}

TEST_CASE("a perfectly saturated fit has zero penalty and zero gradient") {
    // Scores of +-800 underflow the off-class probability to exactly zero,
    // so every per-sample score vector is identically zero.
    Network net(NetworkTopology{1, 2});
    net.weight(1, 0, 1) = 800.0;
    net.weight(1, 1, 1) = -800.0;

    Dataset data;
    data.feature_width = 1;
    data.class_count = 2;
    data.samples.push_back({{1.0}, 0});
    data.samples.push_back({{-1.0}, 1});
    data.samples.push_back({{2.0}, 0});

    NetworkClassificationProblem problem(net, data);
    const ObjectiveValue ice = ice_objective(problem);
    const ObjectiveValue mle = mle_objective(problem);
    CHECK(ice.loss == mle.loss);
    for (double g : ice.gradient) CHECK(g == 0.0);
}

TEST_CASE("ice loss dominates mle loss when curvature is non-negative") {
    const NetworkTopology topology{11, 3};
    SyntheticSpec spec;
    const Dataset data = generate_synthetic(spec, 128, 77);

    for (std::uint64_t seed = 0; seed < 6; ++seed) {
        const Network net =
            seed == 0 ? Network(topology) : testsupport::random_network(topology, seed, 1.0);
        NetworkClassificationProblem problem(net, data);
        IceInstrumentation telemetry;
        const ObjectiveValue ice = ice_objective(problem, &telemetry);

        NetworkClassificationProblem mle_problem(net, data);
        const ObjectiveValue mle = mle_objective(mle_problem);

        // Single-layer curvature contributions are probs(1-probs) x^2 >= 0,
        // so the non-negative branch must be the one exercised.
        CHECK(telemetry.nonneg_curvature_evaluations == 1);
        CHECK(telemetry.negative_penalty_violations == 0);
        CHECK(ice.loss >= mle.loss);
    }
}

TEST_CASE("objective value is invariant under dataset permutation") {
    const NetworkTopology topology{5, 4, 3};
    Dataset data = testsupport::random_dataset(topology, 40, 81);
    const Network net = testsupport::random_network(topology, 82);

    NetworkClassificationProblem forward_order(net, data);
    const ObjectiveValue a = ice_objective(forward_order);

    std::reverse(data.samples.begin(), data.samples.end());
    NetworkClassificationProblem reversed(net, data);
    const ObjectiveValue b = ice_objective(reversed);

    CHECK(std::abs(a.loss - b.loss) <= 1e-12 * std::max(1.0, std::abs(a.loss)));
    CHECK(oracle::componentwise_relative_error(a.gradient, b.gradient, 1e-9) <= 1e-11);
}

TEST_CASE("ice accumulator ties the objective pieces together") {
    const NetworkTopology topology{3, 3};
    const Dataset data = testsupport::random_dataset(topology, 25, 91);
    const Network net = testsupport::random_network(topology, 92);

    NetworkClassificationProblem problem(net, data);
    const IceAccumulator acc = ice_accumulate(problem);
    REQUIRE(acc.n == 25);
    CHECK(acc.penalty_sum >= 0.0);

    NetworkClassificationProblem again(net, data);
    const ObjectiveValue ice = ice_objective(again);
    CHECK(ice.loss == Catch::Approx(acc.mean_loss + acc.penalty()).epsilon(1e-14));
    for (std::size_t k = 0; k < acc.mean_gradient.size(); ++k)
        CHECK(ice.gradient[k] ==
              Catch::Approx(acc.mean_gradient[k] +
                            2.0 / (25.0 * 25.0) * acc.correction_sum[k])
                  .margin(1e-15));
}

TEST_CASE("problems reject empty datasets") {
    Dataset empty;
    empty.feature_width = 2;
    empty.class_count = 2;
    CHECK_THROWS_AS(NetworkClassificationProblem(Network(NetworkTopology{2, 2}), empty),
                    std::invalid_argument);
}
