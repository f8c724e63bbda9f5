#pragma once

#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <istream>
#include <ostream>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "icemlp/rng.hpp"
#include "icemlp/topology.hpp"

namespace icemlp {

/// Fully connected feed-forward classifier with sigmoid hidden layers and an
/// identity output layer. Weights are held as one flat vector in row-major
/// per-layer order, which doubles as the packed parameter vector, so
/// pack/unpack round-trips are exact by construction.
///
/// A Network is immutable during evaluation: forward and loss routines only
/// read it and may run concurrently. set_parameters requires exclusive access.
class Network {
public:
    explicit Network(NetworkTopology topology) : topology_(std::move(topology)) {
        topology_.ensure_valid();
        offsets_.resize(topology_.layer_count() + 1, 0);
        for (std::size_t l = 1; l <= topology_.layer_count(); ++l)
            offsets_[l] = offsets_[l - 1] +
                          topology_.weight_rows(l) * topology_.weight_cols(l);
        params_.assign(offsets_.back(), 0.0);
    }

    const NetworkTopology& topology() const { return topology_; }
    std::size_t parameter_count() const { return params_.size(); }

    /// Packed parameter vector (row-major per-layer order).
    std::span<const double> parameters() const { return params_; }

    void set_parameters(std::span<const double> theta) {
        if (theta.size() != params_.size())
            throw std::invalid_argument("set_parameters: wrong parameter count");
        params_.assign(theta.begin(), theta.end());
    }

    /// Start of layer l's block inside the packed vector. Layer index is
    /// 1-based; entry (i, k) of layer l lives at
    /// layer_offset(l) + i * weight_cols(l) + k, with k = 0 the bias column.
    std::size_t layer_offset(std::size_t l) const { return offsets_[l - 1]; }

    double weight(std::size_t l, std::size_t i, std::size_t k) const {
        return params_[offsets_[l - 1] + i * topology_.weight_cols(l) + k];
    }
    double& weight(std::size_t l, std::size_t i, std::size_t k) {
        return params_[offsets_[l - 1] + i * topology_.weight_cols(l) + k];
    }

    std::span<const double> layer(std::size_t l) const {
        return std::span<const double>(params_).subspan(offsets_[l - 1],
                                                        offsets_[l] - offsets_[l - 1]);
    }

    bool finite() const {
        for (double w : params_)
            if (!std::isfinite(w)) return false;
        return true;
    }

private:
    NetworkTopology topology_;
    std::vector<std::size_t> offsets_;  // offsets_[l] = end of layer l's block
    std::vector<double> params_;
};

/// Glorot-uniform initialization: weights i.i.d. uniform on
/// [-sqrt(6/(fan_in+fan_out)), +sqrt(6/(fan_in+fan_out))] per layer, biases
/// zero. Deterministic for a given (topology, seed).
inline Network init_network(const NetworkTopology& topology, std::uint64_t seed) {
    Network net(topology);
    std::mt19937_64 rng(seed);
    for (std::size_t l = 1; l <= topology.layer_count(); ++l) {
        const std::size_t fan_in = topology.layer_sizes[l - 1];
        const std::size_t fan_out = topology.layer_sizes[l];
        const double r = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
        for (std::size_t i = 0; i < topology.weight_rows(l); ++i)
            for (std::size_t k = 1; k < topology.weight_cols(l); ++k)
                net.weight(l, i, k) = uniform_range(rng, -r, r);
    }
    return net;
}

/// Per-layer activations and activation derivatives for one observation.
/// activations[l] is a_l for l = 0..L (a_0 = input features); first_derivs[l]
/// and second_derivs[l] are valid for l >= 1 only. Hidden layers are sigmoid
/// (u' = a(1-a), u'' = a(1-a)(1-2a)); the output layer is the identity
/// (u' = 1, u'' = 0).
struct ForwardTrace {
    std::vector<std::vector<double>> activations;
    std::vector<std::vector<double>> first_derivs;
    std::vector<std::vector<double>> second_derivs;

    const std::vector<double>& output() const { return activations.back(); }
};

inline double sigmoid(double z) {
    if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
}

inline void forward(const Network& net, std::span<const double> features,
                    ForwardTrace& trace) {
    const NetworkTopology& t = net.topology();
    if (features.size() != t.input_width())
        throw std::invalid_argument("forward: feature width does not match input layer");

    const std::size_t depth = t.layer_count();
    trace.activations.resize(depth + 1);
    trace.first_derivs.resize(depth + 1);
    trace.second_derivs.resize(depth + 1);
    trace.activations[0].assign(features.begin(), features.end());

    for (std::size_t l = 1; l <= depth; ++l) {
        const std::size_t rows = t.weight_rows(l);
        const std::size_t cols = t.weight_cols(l);
        const std::span<const double> w = net.layer(l);
        const std::vector<double>& prev = trace.activations[l - 1];

        std::vector<double>& a = trace.activations[l];
        std::vector<double>& u1 = trace.first_derivs[l];
        std::vector<double>& u2 = trace.second_derivs[l];
        a.resize(rows);
        u1.resize(rows);
        u2.resize(rows);

        const bool hidden = l < depth;
        for (std::size_t i = 0; i < rows; ++i) {
            const double* row = w.data() + i * cols;
            double z = row[0];
            for (std::size_t k = 1; k < cols; ++k) z += row[k] * prev[k - 1];
            if (hidden) {
                const double s = sigmoid(z);
                a[i] = s;
                u1[i] = s * (1.0 - s);
                u2[i] = u1[i] * (1.0 - 2.0 * s);
            } else {
                a[i] = z;
                u1[i] = 1.0;
                u2[i] = 0.0;
            }
        }
    }
}

inline ForwardTrace forward(const Network& net, std::span<const double> features) {
    ForwardTrace trace;
    forward(net, features, trace);
    return trace;
}

// --- model file -------------------------------------------------------------
//
// Plain text, three header lines then the packed parameters:
//
//   icemlp-model 1
//   layers 11 5 3
//   weights 78
//   <78 space-separated decimal values>
//
// Values are written with the shortest decimal representation that parses
// back to the identical 64-bit float, so save/load round-trips are bit exact.

inline void save_model(const Network& net, std::ostream& out) {
    out << "icemlp-model 1\n";
    out << "layers";
    for (std::size_t n : net.topology().layer_sizes) out << ' ' << n;
    out << '\n';
    out << "weights " << net.parameter_count() << '\n';
    char buf[64];
    std::span<const double> theta = net.parameters();
    for (std::size_t i = 0; i < theta.size(); ++i) {
        auto r = std::to_chars(buf, buf + sizeof(buf), theta[i]);
        if (i) out << ' ';
        out.write(buf, r.ptr - buf);
    }
    out << '\n';
    if (!out) throw std::runtime_error("model file: write failed");
}

inline Network load_model(std::istream& in) {
    auto fail = [](const std::string& what) -> Network {
        throw std::runtime_error("model file: " + what);
    };
    std::string magic;
    int version = 0;
    if (!(in >> magic >> version) || magic != "icemlp-model" || version != 1)
        return fail("unrecognized header");

    std::string tag;
    if (!(in >> tag) || tag != "layers") return fail("missing layers line");
    std::string rest;
    std::getline(in, rest);
    NetworkTopology topology;
    {
        std::istringstream sizes(rest);
        std::size_t n = 0;
        while (sizes >> n) topology.layer_sizes.push_back(n);
    }
    if (!topology.valid()) return fail("bad layers line");

    std::size_t count = 0;
    if (!(in >> tag >> count) || tag != "weights") return fail("missing weights line");
    if (count != parameter_count(topology)) return fail("weight count does not match layers");

    Network net(topology);
    std::vector<double> theta(count);
    std::string token;
    for (std::size_t i = 0; i < count; ++i) {
        if (!(in >> token)) return fail("truncated weight list");
        double v = 0.0;
        auto r = std::from_chars(token.data(), token.data() + token.size(), v);
        if (r.ec != std::errc{} || r.ptr != token.data() + token.size())
            return fail("bad weight value '" + token + "'");
        if (!std::isfinite(v)) return fail("non-finite weight value");
        theta[i] = v;
    }
    net.set_parameters(theta);
    return net;
}

inline void save_model(const Network& net, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("model file: cannot open '" + path + "' for writing");
    save_model(net, out);
}

inline Network load_model(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("model file: cannot open '" + path + "'");
    return load_model(in);
}

}  // namespace icemlp
