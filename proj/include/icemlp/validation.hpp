#pragma once

#include <cmath>
#include <cstdint>
#include <sstream>
#include <string>
#include <vector>

#include "icemlp/dataset.hpp"
#include "icemlp/experiment.hpp"
#include "icemlp/ice.hpp"
#include "icemlp/oracle.hpp"
#include "icemlp/problem.hpp"

namespace icemlp {

struct ValidationCheck {
    std::string name;
    bool passed = false;
    std::string detail;
};

namespace detail {

inline std::vector<double> random_parameters(std::size_t count, std::uint64_t seed,
                                             double radius = 0.5) {
    std::mt19937_64 rng(seed);
    std::vector<double> theta(count);
    for (double& x : theta) x = uniform_range(rng, -radius, radius);
    return theta;
}

inline LabeledSample random_sample(const NetworkTopology& t, std::uint64_t seed,
                                   double feature_lo = 0.2, double feature_hi = 1.2) {
    std::mt19937_64 rng(seed);
    LabeledSample s;
    s.features.resize(t.input_width());
    for (double& x : s.features) x = uniform_range(rng, feature_lo, feature_hi);
    s.label = uniform_index(rng, t.class_count());
    return s;
}

inline Dataset single_sample_dataset(const NetworkTopology& t, std::uint64_t seed) {
    Dataset d;
    d.feature_width = t.input_width();
    d.class_count = t.class_count();
    d.samples.push_back(random_sample(t, seed));
    return d;
}

}  // namespace detail

/// The full oracle suite as a pass/fail table: finite differences are first
/// proven on closed forms, then used to check the backward sweep; the sweep
/// is checked against the naive summation-form recursion; the stabilizer and
/// the penalty path are checked against the full-matrix report.
inline std::vector<ValidationCheck> run_validation_suite() {
    std::vector<ValidationCheck> checks;
    auto add = [&checks](const std::string& name, bool ok, const std::string& detail) {
        checks.push_back({name, ok, detail});
    };
    auto describe = [](double err, double tol) {
        std::ostringstream out;
        out << "max rel err " << err << " (tolerance " << tol << ")";
        return out.str();
    };

    // Finite differences on closed forms.
    {
        auto quadratic = [](const std::vector<double>& x) {
            return x[0] * x[0] + x[1] * x[1];
        };
        const std::vector<double> grad = oracle::fd_gradient(quadratic, {1.0, 2.0});
        const double err = oracle::norm_relative_error(grad, std::vector<double>{2.0, 4.0});
        add("fd_gradient on x'x", err <= 1e-9, describe(err, 1e-9));
    }
    {
        auto constant = [](const std::vector<double>&) { return 3.5; };
        const std::vector<double> grad = oracle::fd_gradient(constant, {0.3, -0.7, 9.0});
        const double err = oracle::norm_relative_error(grad, std::vector<double>{0, 0, 0});
        add("fd_gradient on a constant", err <= 1e-9, describe(err, 1e-9));
    }
    {
        auto weighted = [](const std::vector<double>& x) {
            return 2.0 * x[0] * x[0] + 0.5 * x[1] * x[1] + 3.0 * x[2] * x[2];
        };
        const std::vector<double> diag = oracle::fd_hessian_diagonal(weighted, {0.1, -2.0, 1.0});
        const double err =
            oracle::norm_relative_error(diag, std::vector<double>{4.0, 1.0, 6.0});
        add("fd_hessian_diagonal on weighted squares", err <= 1e-6, describe(err, 1e-6));
    }
    {
        auto linear = [](const std::vector<double>& x) { return 3.0 * x[0] - x[1]; };
        const std::vector<double> diag = oracle::fd_hessian_diagonal(linear, {0.4, 0.6});
        const double err = oracle::norm_relative_error(diag, std::vector<double>{0, 0});
        add("fd_hessian_diagonal on a linear map", err <= 1e-6, describe(err, 1e-6));
    }

    // Backward sweep against finite differences of the scalar loss.
    {
        double worst = 0.0;
        std::uint64_t instance = 0;
        for (const NetworkTopology& topology : benchmark_topologies()) {
            for (std::uint64_t rep = 0; rep < 2; ++rep) {
                ++instance;
                Network net = init_network(topology, derive_seed(101, instance));
                std::vector<double> theta =
                    detail::random_parameters(net.parameter_count(), derive_seed(102, instance));
                net.set_parameters(theta);
                const LabeledSample sample =
                    detail::random_sample(topology, derive_seed(103, instance));

                const ForwardTrace trace = forward(net, sample.features);
                const std::vector<double> swept =
                    backprop_gradient(net, trace, sample.label);

                Network probe = net;
                auto scalar_loss = [&](const std::vector<double>& th) {
                    probe.set_parameters(th);
                    const ForwardTrace tr = forward(probe, sample.features);
                    return cross_entropy(sample.label, tr.output());
                };
                const std::vector<double> fd = oracle::fd_gradient(scalar_loss, theta);
                worst = std::max(worst, oracle::norm_relative_error(swept, fd));
            }
        }
        add("backprop gradient vs finite differences", worst <= 1e-5, describe(worst, 1e-5));
    }

    // Single-layer curvature is exact; check it per parameter.
    {
        const NetworkTopology topology{11, 3};
        Network net = init_network(topology, 7);
        net.set_parameters(detail::random_parameters(net.parameter_count(), 8));
        const LabeledSample sample = detail::random_sample(topology, 9);
        const ForwardTrace trace = forward(net, sample.features);
        const PerSampleDerivatives d = backprop_hessian_diagonal(net, trace, sample.label);

        Network probe = net;
        auto scalar_loss = [&](const std::vector<double>& th) {
            probe.set_parameters(th);
            const ForwardTrace tr = forward(probe, sample.features);
            return cross_entropy(sample.label, tr.output());
        };
        const std::vector<double> fd = oracle::fd_hessian_diagonal(
            scalar_loss, std::vector<double>(net.parameters().begin(), net.parameters().end()));
        const double err = oracle::componentwise_relative_error(d.hessian_diagonal, fd);
        add("single-layer curvature vs finite differences", err <= 1e-4, describe(err, 1e-4));
    }

    // Sweep vs naive summation-form recursion on all benchmark topologies.
    {
        double worst = 0.0;
        std::uint64_t instance = 0;
        for (const NetworkTopology& topology : benchmark_topologies()) {
            ++instance;
            Network net = init_network(topology, derive_seed(201, instance));
            net.set_parameters(
                detail::random_parameters(net.parameter_count(), derive_seed(202, instance)));
            const LabeledSample sample =
                detail::random_sample(topology, derive_seed(203, instance));
            const ForwardTrace trace = forward(net, sample.features);
            const PerSampleDerivatives swept =
                backprop_hessian_diagonal(net, trace, sample.label);
            const PerSampleDerivatives naive =
                oracle::dense_gamma_oracle(net, trace, sample.label);
            worst = std::max(worst, oracle::componentwise_relative_error(
                                        swept.hessian_diagonal, naive.hessian_diagonal));
            worst = std::max(worst, oracle::componentwise_relative_error(
                                        swept.gradient, naive.gradient));
        }
        add("backward sweep vs summation-form recursion", worst <= 1e-12,
            describe(worst, 1e-12));
    }

    // Penalty path vs full-matrix report on the one-parameter model.
    {
        std::vector<double> anchors;
        for (std::size_t i = 0; i < 40; ++i) anchors.push_back(i % 2 == 0 ? 1.0 : -1.0);
        oracle::ScalarQuadraticProblem problem(anchors, 0.05);
        const oracle::ExactIceReport report = oracle::exact_ice(problem);
        const double err = std::abs(report.exact_penalty - report.approx_penalty) /
                           std::abs(report.exact_penalty);
        add("one-parameter penalty vs full-matrix penalty", err <= 1e-8, describe(err, 1e-8));
    }

    // Full-matrix report internal identities on a small network problem.
    {
        const NetworkTopology topology{2, 2};
        Dataset data;
        data.feature_width = 2;
        data.class_count = 2;
        std::mt19937_64 rng(33);
        for (std::size_t i = 0; i < 50; ++i) {
            LabeledSample s;
            s.features = {uniform_unit(rng), uniform_unit(rng)};
            s.label = s.features[0] + 0.3 * uniform_unit(rng) > 0.6 ? 1u : 0u;
            data.samples.push_back(std::move(s));
        }
        // Truncate aggressively: softmax shift invariance makes the true
        // Hessian singular and the junk directions would poison the 1e-10
        // identity below.
        const double truncation = 1e-6;
        Network net = init_network(topology, 5);
        NetworkClassificationProblem problem(net, data);
        const oracle::ExactIceReport report = oracle::exact_ice(problem, truncation);

        const double asym = (report.j_hat - report.j_hat.transpose()).cwiseAbs().maxCoeff();
        add("empirical Hessian symmetric after symmetrization", asym == 0.0,
            "max |J - J'| = " + std::to_string(asym));

        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eigensolver(report.i_hat);
        const double min_eig = eigensolver.eigenvalues().minCoeff();
        add("Fisher information positive semidefinite", min_eig >= -1e-10,
            "min eigenvalue " + std::to_string(min_eig));

        Eigen::JacobiSVD<Eigen::MatrixXd> svd(report.j_hat,
                                              Eigen::ComputeFullU | Eigen::ComputeFullV);
        Eigen::VectorXd inv = svd.singularValues();
        for (Eigen::Index i = 0; i < inv.size(); ++i)
            inv(i) = inv(i) > truncation * svd.singularValues()(0) ? 1.0 / inv(i) : 0.0;
        const Eigen::MatrixXd pinv =
            svd.matrixV() * inv.asDiagonal() * svd.matrixU().transpose();
        const double trace_form = (report.i_hat * pinv).trace();
        const double quadratic_form = static_cast<double>(data.size()) * report.exact_penalty;
        const double err = std::abs(trace_form - quadratic_form) /
                           std::max(1.0, std::abs(trace_form));
        add("trace identity tr(I J^+) = mean quadratic form", err <= 1e-10,
            describe(err, 1e-10));
    }

    // Stabilizer pinning for non-positive curvature.
    {
        double worst = 0.0;
        for (double d_k : {0.0, -1e-9, -5.0, -1e9}) {
            for (double magnitude : {1e-6, 1e-3, 1.0, 1e3, 1e6}) {
                for (double sign : {-1.0, 1.0}) {
                    const double v = sign * magnitude;
                    const double contribution =
                        v * v * stabilized_inverse_element(d_k, v, 7.5);
                    worst = std::max(worst, std::abs(contribution - 1.0));
                }
            }
        }
        add("stabilizer pins non-positive curvature at 1.0", worst <= 1e-12,
            describe(worst, 1e-12));
    }

    return checks;
}

}  // namespace icemlp
