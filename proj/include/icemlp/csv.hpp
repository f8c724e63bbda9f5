#pragma once

#include <charconv>
#include <cstddef>
#include <fstream>
#include <functional>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "icemlp/dataset.hpp"

namespace icemlp {

/// Row filter applied to one numeric column; rows where accept() is false are
/// dropped and counted. description is echoed in load reports.
struct ColumnFilter {
    std::string column;
    std::function<bool(double)> accept;
    std::string description;
};

/// Convenience filters matching the usual data-cleaning predicates.
inline ColumnFilter filter_non_negative(std::string column) {
    return {column, [](double v) { return v >= 0.0; }, column + " >= 0"};
}
inline ColumnFilter filter_positive(std::string column) {
    return {column, [](double v) { return v > 0.0; }, column + " > 0"};
}
inline ColumnFilter filter_range(std::string column, double lo, double hi) {
    std::ostringstream d;
    d << lo << " <= " << column << " <= " << hi;
    return {column, [lo, hi](double v) { return v >= lo && v <= hi; }, d.str()};
}

struct CsvLoadOptions {
    std::string label_column = "label";
    std::vector<std::string> feature_columns;  // empty: all non-label columns
    std::vector<ColumnFilter> filters;
    bool strict = false;  // abort on unparseable numerics instead of dropping
};

struct CsvLoadReport {
    Dataset dataset;
    std::size_t rows_read = 0;
    std::size_t rows_dropped_by_filter = 0;
    std::size_t rows_dropped_unparseable = 0;
    std::vector<std::string> label_names;  // empty when labels were integer indices

    double dropped_fraction() const {
        return rows_read == 0
                   ? 0.0
                   : static_cast<double>(rows_dropped_by_filter + rows_dropped_unparseable) /
                         static_cast<double>(rows_read);
    }
};

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string field;
    std::istringstream in(line);
    while (std::getline(in, field, ',')) {
        std::size_t b = field.find_first_not_of(" \t\r");
        std::size_t e = field.find_last_not_of(" \t\r");
        fields.push_back(b == std::string::npos ? std::string() : field.substr(b, e - b + 1));
    }
    if (!line.empty() && line.back() == ',') fields.emplace_back();
    return fields;
}

inline bool parse_double(const std::string& s, double& out) {
    auto r = std::from_chars(s.data(), s.data() + s.size(), out);
    return r.ec == std::errc{} && r.ptr == s.data() + s.size();
}

inline bool parse_index(const std::string& s, long& out) {
    auto r = std::from_chars(s.data(), s.data() + s.size(), out);
    return r.ec == std::errc{} && r.ptr == s.data() + s.size() && out >= 0;
}

}  // namespace detail

/// Loads a comma-separated file with a header row. The label column may hold
/// integer class indices (class count becomes max index + 1) or strings,
/// which are mapped to indices in order of first appearance. Filters are
/// evaluated on feature columns after numeric parsing.
inline CsvLoadReport load_csv(std::istream& in, const CsvLoadOptions& options = {}) {
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error("csv: missing header row");
    const std::vector<std::string> header = detail::split_csv_line(line);

    std::map<std::string, std::size_t> column_of;
    for (std::size_t i = 0; i < header.size(); ++i) column_of[header[i]] = i;

    auto require_column = [&](const std::string& name) -> std::size_t {
        auto it = column_of.find(name);
        if (it == column_of.end()) throw std::runtime_error("csv: missing column '" + name + "'");
        return it->second;
    };

    const std::size_t label_index = require_column(options.label_column);
    std::vector<std::size_t> feature_indices;
    if (options.feature_columns.empty()) {
        for (std::size_t i = 0; i < header.size(); ++i)
            if (i != label_index) feature_indices.push_back(i);
    } else {
        for (const std::string& name : options.feature_columns) {
            std::size_t i = require_column(name);
            if (i == label_index)
                throw std::runtime_error("csv: label column listed as a feature");
            feature_indices.push_back(i);
        }
    }
    if (feature_indices.empty()) throw std::runtime_error("csv: no feature columns");

    struct BoundFilter {
        std::size_t feature_slot;
        const ColumnFilter* filter;
    };
    std::vector<BoundFilter> bound;
    for (const ColumnFilter& f : options.filters) {
        const std::size_t col = require_column(f.column);
        std::size_t slot = feature_indices.size();
        for (std::size_t s = 0; s < feature_indices.size(); ++s)
            if (feature_indices[s] == col) slot = s;
        if (slot == feature_indices.size())
            throw std::runtime_error("csv: filter column '" + f.column +
                                     "' is not a feature column");
        bound.push_back({slot, &f});
    }

    CsvLoadReport report;
    report.dataset.feature_width = feature_indices.size();

    std::vector<std::string> raw_labels;
    std::vector<double> features(feature_indices.size());
    std::size_t line_number = 1;
    while (std::getline(in, line)) {
        ++line_number;
        if (line.empty()) continue;
        ++report.rows_read;
        const std::vector<std::string> fields = detail::split_csv_line(line);
        if (fields.size() != header.size()) {
            if (options.strict)
                throw std::runtime_error("csv: line " + std::to_string(line_number) +
                                         ": wrong field count");
            ++report.rows_dropped_unparseable;
            continue;
        }

        bool parsed = true;
        for (std::size_t s = 0; s < feature_indices.size(); ++s) {
            if (!detail::parse_double(fields[feature_indices[s]], features[s])) {
                parsed = false;
                break;
            }
        }
        if (!parsed) {
            if (options.strict)
                throw std::runtime_error("csv: line " + std::to_string(line_number) +
                                         ": unparseable numeric field");
            ++report.rows_dropped_unparseable;
            continue;
        }

        bool accepted = true;
        for (const BoundFilter& bf : bound) {
            if (!bf.filter->accept(features[bf.feature_slot])) {
                accepted = false;
                break;
            }
        }
        if (!accepted) {
            ++report.rows_dropped_by_filter;
            continue;
        }

        LabeledSample sample;
        sample.features = features;
        report.dataset.samples.push_back(std::move(sample));
        raw_labels.push_back(fields[label_index]);
    }

    if (report.dataset.samples.empty())
        throw std::runtime_error("csv: no data rows survived loading");

    // Integer labels become class indices directly; otherwise strings map to
    // indices in order of first appearance.
    bool all_integer = true;
    long max_label = 0;
    std::vector<long> numeric(raw_labels.size());
    for (std::size_t i = 0; i < raw_labels.size(); ++i) {
        if (!detail::parse_index(raw_labels[i], numeric[i])) {
            all_integer = false;
            break;
        }
        max_label = std::max(max_label, numeric[i]);
    }
    if (all_integer) {
        for (std::size_t i = 0; i < raw_labels.size(); ++i)
            report.dataset.samples[i].label = static_cast<std::size_t>(numeric[i]);
        report.dataset.class_count = static_cast<std::size_t>(max_label) + 1;
    } else {
        std::map<std::string, std::size_t> label_of;
        for (std::size_t i = 0; i < raw_labels.size(); ++i) {
            auto [it, inserted] = label_of.try_emplace(raw_labels[i], report.label_names.size());
            if (inserted) report.label_names.push_back(raw_labels[i]);
            report.dataset.samples[i].label = it->second;
        }
        report.dataset.class_count = report.label_names.size();
    }
    report.dataset.validate();
    return report;
}

inline CsvLoadReport load_csv(const std::string& path, const CsvLoadOptions& options = {}) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("csv: cannot open '" + path + "'");
    return load_csv(in, options);
}

/// Writes features with shortest round-trip decimals and labels as integer
/// class indices; load_csv(write_csv(data)) reproduces the samples exactly.
inline void write_csv(const Dataset& data, std::ostream& out) {
    for (std::size_t j = 0; j < data.feature_width; ++j) out << 'f' << j << ',';
    out << "label\n";
    char buf[64];
    for (const LabeledSample& s : data.samples) {
        for (double v : s.features) {
            auto r = std::to_chars(buf, buf + sizeof(buf), v);
            out.write(buf, r.ptr - buf);
            out << ',';
        }
        out << s.label << '\n';
    }
    if (!out) throw std::runtime_error("csv: write failed");
}

inline void write_csv(const Dataset& data, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("csv: cannot open '" + path + "' for writing");
    write_csv(data, out);
}

}  // namespace icemlp
