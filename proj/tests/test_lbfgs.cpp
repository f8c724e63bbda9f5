#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "icemlp/lbfgs.hpp"
#include "icemlp/problem.hpp"
#include "support.hpp"

using namespace icemlp;

namespace {

ObjectiveValue quadratic_1d(const std::vector<double>& x) {
    ObjectiveValue v;
    v.loss = (x[0] - 3.0) * (x[0] - 3.0);
    v.gradient = {2.0 * (x[0] - 3.0)};
    return v;
}

ObjectiveValue rosenbrock(const std::vector<double>& x) {
    const double a = 1.0 - x[0];
    const double b = x[1] - x[0] * x[0];
    ObjectiveValue v;
    v.loss = a * a + 100.0 * b * b;
    v.gradient = {-2.0 * a - 400.0 * x[0] * b, 200.0 * b};
    return v;
}

struct Trace {
    std::vector<double> losses;
    std::vector<std::vector<double>> thetas;
    std::vector<std::vector<double>> gradients;
    std::vector<std::vector<double>> steps;

    IterationObserver observer() {
        return [this](const IterationRecord& r) {
            losses.push_back(r.loss);
            thetas.emplace_back(r.theta.begin(), r.theta.end());
            gradients.emplace_back(r.gradient.begin(), r.gradient.end());
            steps.emplace_back(r.step.begin(), r.step.end());
        };
    }
};

double dot(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

}  // namespace

TEST_CASE("one-dimensional quadratic converges immediately") {
    const OptimizerResult result = minimize(quadratic_1d, {0.0});
    CHECK(std::abs(result.theta[0] - 3.0) <= 1e-8);
    CHECK(result.iterations <= 5);
    CHECK(result.loss <= 1e-15);
}

TEST_CASE("rosenbrock reaches the global minimum") {
    const OptimizerResult result = minimize(rosenbrock, {-1.2, 1.0});
    CHECK(std::abs(result.theta[0] - 1.0) <= 1e-5);
    CHECK(std::abs(result.theta[1] - 1.0) <= 1e-5);
}

TEST_CASE("every accepted step satisfies both strong Wolfe conditions") {
    OptimizerConfig config;
    Trace trace;
    minimize(rosenbrock, {-1.2, 1.0}, config, trace.observer());
    REQUIRE(trace.losses.size() >= 2);

    for (std::size_t k = 1; k < trace.losses.size(); ++k) {
        const double slope = dot(trace.gradients[k - 1], trace.steps[k]);
        const double slack = 1e-12 * std::max(1.0, std::abs(trace.losses[k - 1]));
        CHECK(trace.losses[k] <= trace.losses[k - 1] + config.wolfe_c1 * slope + slack);
        CHECK(std::abs(dot(trace.gradients[k], trace.steps[k])) <=
              config.wolfe_c2 * std::abs(slope) * (1.0 + 1e-12));
        CHECK(trace.losses[k] < trace.losses[k - 1]);  // strict descent
    }
}

TEST_CASE("strictly convex quadratic finishes within dimension plus two iterations") {
    const std::vector<double> curvatures = {1.0, 3.0, 7.5, 0.2, 12.0, 5.0};
    auto objective = [&](const std::vector<double>& x) {
        ObjectiveValue v;
        v.gradient.resize(x.size());
        for (std::size_t k = 0; k < x.size(); ++k) {
            v.loss += 0.5 * curvatures[k] * x[k] * x[k];
            v.gradient[k] = curvatures[k] * x[k];
        }
        return v;
    };
    // Finite termination on quadratics presumes (near-)exact line
    // minimization; a tight curvature constant makes the interpolating
    // search return the exact one-dimensional minimizer.
    OptimizerConfig config;
    config.wolfe_c1 = 1e-5;
    config.wolfe_c2 = 0.01;
    config.gradient_tolerance = 1e-13;
    config.relative_loss_tolerance = 1e-16;
    config.max_iterations = curvatures.size() + 2;

    const OptimizerResult result = minimize(objective, {1.0, -2.0, 0.5, 4.0, -1.0, 2.5}, config);
    double gnorm = 0.0;
    for (double g : result.gradient) gnorm = std::max(gnorm, std::abs(g));
    INFO("iterations " << result.iterations << ", gradient norm " << gnorm);
    CHECK(result.iterations <= curvatures.size() + 2);
    CHECK(gnorm <= 1e-10);
}

TEST_CASE("identical inputs give identical iterate sequences") {
    Trace first, second;
    minimize(rosenbrock, {-1.2, 1.0}, {}, first.observer());
    minimize(rosenbrock, {-1.2, 1.0}, {}, second.observer());
    REQUIRE(first.thetas.size() == second.thetas.size());
    for (std::size_t k = 0; k < first.thetas.size(); ++k) {
        CHECK(first.thetas[k] == second.thetas[k]);
        CHECK(first.losses[k] == second.losses[k]);
    }
}

TEST_CASE("separable two-class logistic problem is driven to first-order stationarity") {
    Dataset data;
    data.feature_width = 2;
    data.class_count = 2;
    data.samples.push_back({{0.1, 0.1}, 0});
    data.samples.push_back({{0.2, 0.3}, 0});
    data.samples.push_back({{0.8, 0.9}, 1});
    data.samples.push_back({{0.9, 0.7}, 1});

    NetworkClassificationProblem problem(Network(NetworkTopology{2, 2}), data);
    auto objective = [&](const std::vector<double>& theta) {
        problem.set_parameters(theta);
        return mle_objective(problem);
    };
    // Separable data lets the loss decay toward zero along a ray, so ask for
    // a small absolute gradient rather than the default relative test.
    OptimizerConfig config;
    config.gradient_tolerance = 1e-8;
    config.relative_loss_tolerance = 1e-15;
    config.max_iterations = 2000;
    const OptimizerResult result =
        minimize(objective, std::vector<double>(6, 0.0), config);

    double gnorm = 0.0;
    for (double g : result.gradient) gnorm = std::max(gnorm, std::abs(g));
    INFO("termination " << to_string(result.termination) << " after " << result.iterations
                        << " iterations, |g| = " << gnorm);
    CHECK(gnorm <= 1e-6);
}

TEST_CASE("non-smooth kink fails the line search but returns the best point") {
    auto objective = [](const std::vector<double>& x) {
        ObjectiveValue v;
        v.loss = std::abs(x[0]);
        v.gradient = {x[0] >= 0.0 ? 1.0 : -1.0};
        return v;
    };
    const OptimizerResult result = minimize(objective, {5.0});
    CHECK(result.termination == Termination::line_search_failed);
    CHECK(result.loss <= 5.0);
    CHECK(std::isfinite(result.theta[0]));
}

TEST_CASE("non-finite starting point is rejected") {
    auto objective = [](const std::vector<double>& x) {
        ObjectiveValue v;
        v.loss = std::numeric_limits<double>::quiet_NaN();
        v.gradient = {x[0]};
        return v;
    };
    CHECK_THROWS_AS(minimize(objective, {1.0}), std::invalid_argument);
}

TEST_CASE("non-finite trial evaluations shrink the interval instead of aborting") {
    // Finite at the start, infinite beyond x = 2; the search must still find
    // an acceptable step inside the finite region.
    auto objective = [](const std::vector<double>& x) {
        ObjectiveValue v;
        if (x[0] > 2.0) {
            v.loss = std::numeric_limits<double>::infinity();
            v.gradient = {0.0};
            return v;
        }
        v.loss = (x[0] - 1.9) * (x[0] - 1.9);
        v.gradient = {2.0 * (x[0] - 1.9)};
        return v;
    };
    const OptimizerResult result = minimize(objective, {0.0});
    CHECK(std::abs(result.theta[0] - 1.9) <= 1e-6);
}

TEST_CASE("optimizer config validation") {
    OptimizerConfig config;
    config.memory = 0;
    CHECK_THROWS_AS(config.ensure_valid(), std::invalid_argument);
    config = {};
    config.wolfe_c1 = 0.95;  // violates c1 < c2
    CHECK_THROWS_AS(config.ensure_valid(), std::invalid_argument);
    config = {};
    config.gradient_tolerance = 0.0;
    CHECK_THROWS_AS(config.ensure_valid(), std::invalid_argument);
}
