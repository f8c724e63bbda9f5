#pragma once

#include <cstddef>
#include <initializer_list>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace icemlp {

/// Layer widths of a fully connected feed-forward classifier: input width,
/// hidden widths..., class count. Layer l in [1, layer_count()] is fed by a
/// weight matrix of shape layer_sizes[l] x (layer_sizes[l-1] + 1); column 0
/// multiplies a constant 1 and acts as the bias.
struct NetworkTopology {
    std::vector<std::size_t> layer_sizes;

    NetworkTopology() = default;
    NetworkTopology(std::initializer_list<std::size_t> sizes) : layer_sizes(sizes) {}
    explicit NetworkTopology(std::vector<std::size_t> sizes) : layer_sizes(std::move(sizes)) {}

    /// Number of weight layers (the paper-style L); valid topologies have >= 1.
    std::size_t layer_count() const { return layer_sizes.size() - 1; }
    std::size_t input_width() const { return layer_sizes.front(); }
    std::size_t class_count() const { return layer_sizes.back(); }

    std::size_t weight_rows(std::size_t l) const { return layer_sizes[l]; }
    std::size_t weight_cols(std::size_t l) const { return layer_sizes[l - 1] + 1; }

    bool valid() const {
        if (layer_sizes.size() < 2) return false;
        for (std::size_t n : layer_sizes)
            if (n == 0) return false;
        return true;
    }

    void ensure_valid() const {
        if (!valid())
            throw std::invalid_argument(
                "topology must list at least two layers, every width >= 1");
    }

    /// Renders as "[11,5,3]".
    std::string to_string() const {
        std::ostringstream out;
        out << '[';
        for (std::size_t i = 0; i < layer_sizes.size(); ++i) {
            if (i) out << ',';
            out << layer_sizes[i];
        }
        out << ']';
        return out.str();
    }

    /// Parses "11,5,3" (surrounding brackets and spaces allowed).
    static NetworkTopology parse(const std::string& text) {
        NetworkTopology t;
        std::string cleaned;
        for (char c : text)
            if (c != '[' && c != ']' && c != ' ') cleaned.push_back(c);
        std::istringstream in(cleaned);
        std::string item;
        while (std::getline(in, item, ',')) {
            if (item.empty()) throw std::invalid_argument("topology: empty entry in '" + text + "'");
            std::size_t pos = 0;
            long v = std::stol(item, &pos);
            if (pos != item.size() || v <= 0)
                throw std::invalid_argument("topology: bad layer width '" + item + "'");
            t.layer_sizes.push_back(static_cast<std::size_t>(v));
        }
        t.ensure_valid();
        return t;
    }

    friend bool operator==(const NetworkTopology&, const NetworkTopology&) = default;
};

/// The four benchmark layer configurations used throughout the tests and
/// the experiment harness.
inline std::vector<NetworkTopology> benchmark_topologies() {
    return {NetworkTopology{11, 3}, NetworkTopology{11, 5, 3},
            NetworkTopology{11, 8, 5, 3}, NetworkTopology{11, 11, 8, 5, 3}};
}

/// Total number of weights including bias columns:
/// sum over layers of (fan_in + 1) * fan_out.
inline std::size_t parameter_count(const NetworkTopology& t) {
    t.ensure_valid();
    std::size_t p = 0;
    for (std::size_t l = 1; l < t.layer_sizes.size(); ++l)
        p += (t.layer_sizes[l - 1] + 1) * t.layer_sizes[l];
    return p;
}

}  // namespace icemlp
