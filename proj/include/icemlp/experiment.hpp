#pragma once

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <iomanip>
#include <mutex>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "icemlp/dataset.hpp"
#include "icemlp/ice.hpp"
#include "icemlp/lbfgs.hpp"
#include "icemlp/problem.hpp"
#include "icemlp/rng.hpp"

namespace icemlp {

enum class Estimator { mle, ice };

inline const char* to_string(Estimator e) { return e == Estimator::mle ? "mle" : "ice"; }

inline Estimator parse_estimator(const std::string& name) {
    if (name == "mle" || name == "MLE") return Estimator::mle;
    if (name == "ice" || name == "ICE") return Estimator::ice;
    throw std::invalid_argument("unknown estimator '" + name + "' (expected mle or ice)");
}

struct ExperimentConfig {
    std::vector<NetworkTopology> topologies = benchmark_topologies();
    std::vector<std::size_t> fit_sizes = {128, 256, 512, 1024, 2048, 4096, 8192};
    std::size_t repetitions = 10;
    double p_fit = 0.25;
    std::uint64_t base_seed = 1;
    std::vector<Estimator> estimators = {Estimator::ice, Estimator::mle};
    OptimizerConfig optimizer;
    /// Redraw the fit/test split for every repetition instead of only
    /// redrawing the fit subsample from one fixed split.
    bool redraw_split_per_repetition = false;
    /// Worker threads for repetitions; 0 picks the hardware count. Results
    /// are byte-identical for any thread count: every repetition owns its
    /// seeds and rows aggregate in repetition order.
    std::size_t threads = 0;

    void ensure_valid() const {
        if (repetitions < 1) throw std::invalid_argument("experiment: repetitions must be >= 1");
        if (topologies.empty() || fit_sizes.empty() || estimators.empty())
            throw std::invalid_argument("experiment: topologies, sizes, estimators must be non-empty");
        for (const NetworkTopology& t : topologies) t.ensure_valid();
        for (std::size_t i = 1; i < fit_sizes.size(); ++i)
            if (fit_sizes[i] <= fit_sizes[i - 1])
                throw std::invalid_argument("experiment: fit sizes must be ascending");
        if (!(p_fit > 0.0) || !(p_fit < 1.0))
            throw std::invalid_argument("experiment: p_fit must lie in (0,1)");
        optimizer.ensure_valid();
    }
};

struct ExperimentRow {
    NetworkTopology topology;
    Estimator estimator = Estimator::mle;
    std::size_t fit_size = 0;
    double mean_test_loss = 0.0;
    double mean_fit_loss = 0.0;
    double std_test_loss = 0.0;
    double mean_fit_seconds = 0.0;
    std::size_t repetitions_completed = 0;

    friend bool operator==(const ExperimentRow&, const ExperimentRow&) = default;
};

/// test-minus-fit cross-entropy per result row; the quantity the corrected
/// objective is designed to shrink.
struct GapEntry {
    NetworkTopology topology;
    Estimator estimator = Estimator::mle;
    std::size_t fit_size = 0;
    double overfitting_gap = 0.0;
};

inline std::vector<GapEntry> gap_summary(const std::vector<ExperimentRow>& rows) {
    std::vector<GapEntry> gaps;
    gaps.reserve(rows.size());
    for (const ExperimentRow& r : rows)
        gaps.push_back({r.topology, r.estimator, r.fit_size,
                        r.mean_test_loss - r.mean_fit_loss});
    return gaps;
}

/// Aggregate telemetry across every fit of an experiment run.
struct ExperimentDiagnostics {
    std::size_t fits_attempted = 0;
    std::size_t fits_completed = 0;
    std::size_t descent_violations = 0;  // iterations that failed to decrease the loss
    IceInstrumentation ice;
};

namespace detail {

struct FitOutcome {
    bool completed = false;
    double fit_loss = 0.0;
    double test_loss = 0.0;
    double seconds = 0.0;
    std::size_t descent_violations = 0;
    IceInstrumentation ice;
};

inline FitOutcome run_single_fit(const Network& initial, const Dataset& fit_data,
                                 const Dataset& test_data, Estimator estimator,
                                 const OptimizerConfig& optimizer) {
    FitOutcome outcome;
    try {
        NetworkClassificationProblem problem(initial, fit_data);
        auto objective = [&](const std::vector<double>& theta) {
            problem.set_parameters(theta);
            return estimator == Estimator::mle
                       ? mle_objective(problem)
                       : ice_objective(problem, &outcome.ice);
        };
        double last_loss = 0.0;
        bool have_last = false;
        auto observer = [&](const IterationRecord& record) {
            if (have_last && !(record.loss < last_loss)) ++outcome.descent_violations;
            last_loss = record.loss;
            have_last = true;
        };

        std::vector<double> theta0(initial.parameters().begin(), initial.parameters().end());
        const auto start = std::chrono::steady_clock::now();
        OptimizerResult result = minimize(objective, std::move(theta0), optimizer, observer);
        const auto stop = std::chrono::steady_clock::now();
        outcome.seconds = std::chrono::duration<double>(stop - start).count();

        Network trained = initial;
        trained.set_parameters(result.theta);
        outcome.fit_loss = mean_cross_entropy(trained, fit_data);
        outcome.test_loss = mean_cross_entropy(trained, test_data);
        outcome.completed = true;
    } catch (const std::exception&) {
        outcome.completed = false;
    }
    return outcome;
}

}  // namespace detail

/// Runs the full grid: for every (topology, fit size, repetition), draw a
/// fresh fit subsample and a fresh initialization, fit every requested
/// estimator from that same initialization, and score mean cross-entropy on
/// the untouched test partition. Failed fits are skipped and counted;
/// everything else is deterministic in (config, seeds).
inline std::vector<ExperimentRow> run_experiment(const ExperimentConfig& config,
                                                 const Dataset& pool,
                                                 ExperimentDiagnostics* diagnostics = nullptr) {
    config.ensure_valid();
    pool.validate();

    // Seed streams: 1 subsample, 2 init, 3 per-repetition split.
    const std::pair<Dataset, Dataset> fixed_split =
        split(pool, config.p_fit, derive_seed(config.base_seed, 3, 0, 0));
    const Dataset& fixed_fit_pool = fixed_split.first;
    const Dataset& fixed_test = fixed_split.second;

    std::vector<ExperimentRow> rows;
    for (std::size_t ti = 0; ti < config.topologies.size(); ++ti) {
        const NetworkTopology& topology = config.topologies[ti];
        for (std::size_t si = 0; si < config.fit_sizes.size(); ++si) {
            const std::size_t fit_size = config.fit_sizes[si];
            const std::uint64_t cell = (ti << 20) | si;

            std::vector<std::vector<detail::FitOutcome>> outcomes(
                config.repetitions,
                std::vector<detail::FitOutcome>(config.estimators.size()));

            auto run_repetition = [&](std::size_t ri) {
                Dataset rep_fit_pool, rep_test;
                const Dataset* fit_pool = &fixed_fit_pool;
                const Dataset* test = &fixed_test;
                if (config.redraw_split_per_repetition) {
                    std::tie(rep_fit_pool, rep_test) =
                        split(pool, config.p_fit, derive_seed(config.base_seed, 3, cell, ri));
                    fit_pool = &rep_fit_pool;
                    test = &rep_test;
                }
                if (fit_size > fit_pool->size())
                    throw std::invalid_argument(
                        "experiment: fit size " + std::to_string(fit_size) +
                        " exceeds the fit partition (" + std::to_string(fit_pool->size()) + ")");
                const Dataset fit_data =
                    subsample(*fit_pool, fit_size, derive_seed(config.base_seed, 1, cell, ri));
                const Network initial =
                    init_network(topology, derive_seed(config.base_seed, 2, cell, ri));
                for (std::size_t ei = 0; ei < config.estimators.size(); ++ei)
                    outcomes[ri][ei] = detail::run_single_fit(
                        initial, fit_data, *test, config.estimators[ei], config.optimizer);
            };

            std::size_t workers = config.threads ? config.threads
                                                 : std::thread::hardware_concurrency();
            workers = std::max<std::size_t>(1, std::min(workers, config.repetitions));
            if (workers == 1) {
                for (std::size_t ri = 0; ri < config.repetitions; ++ri) run_repetition(ri);
            } else {
                std::exception_ptr first_error;
                std::vector<std::thread> threads;
                std::mutex error_mutex;
                for (std::size_t w = 0; w < workers; ++w)
                    threads.emplace_back([&, w] {
                        for (std::size_t ri = w; ri < config.repetitions; ri += workers) {
                            try {
                                run_repetition(ri);
                            } catch (...) {
                                std::lock_guard<std::mutex> lock(error_mutex);
                                if (!first_error) first_error = std::current_exception();
                            }
                        }
                    });
                for (std::thread& t : threads) t.join();
                if (first_error) std::rethrow_exception(first_error);
            }

            for (std::size_t ei = 0; ei < config.estimators.size(); ++ei) {
                ExperimentRow row;
                row.topology = topology;
                row.estimator = config.estimators[ei];
                row.fit_size = fit_size;

                std::vector<double> test_losses;
                for (std::size_t ri = 0; ri < config.repetitions; ++ri) {
                    const detail::FitOutcome& o = outcomes[ri][ei];
                    if (diagnostics) {
                        ++diagnostics->fits_attempted;
                        diagnostics->descent_violations += o.descent_violations;
                        diagnostics->ice.evaluations += o.ice.evaluations;
                        diagnostics->ice.nonneg_curvature_evaluations +=
                            o.ice.nonneg_curvature_evaluations;
                        diagnostics->ice.negative_penalty_violations +=
                            o.ice.negative_penalty_violations;
                    }
                    if (!o.completed) continue;
                    if (diagnostics) ++diagnostics->fits_completed;
                    ++row.repetitions_completed;
                    row.mean_fit_loss += o.fit_loss;
                    row.mean_test_loss += o.test_loss;
                    row.mean_fit_seconds += o.seconds;
                    test_losses.push_back(o.test_loss);
                }
                if (row.repetitions_completed > 0) {
                    const double m = static_cast<double>(row.repetitions_completed);
                    row.mean_fit_loss /= m;
                    row.mean_test_loss /= m;
                    row.mean_fit_seconds /= m;
                    if (row.repetitions_completed > 1) {
                        double ss = 0.0;
                        for (double x : test_losses) {
                            const double dev = x - row.mean_test_loss;
                            ss += dev * dev;
                        }
                        row.std_test_loss = std::sqrt(ss / (m - 1.0));
                    }
                }
                rows.push_back(std::move(row));
            }
        }
    }
    return rows;
}

/// Synthetic-data entry point. pool_size 0 sizes the pool so the expected
/// fit partition comfortably covers the largest requested fit size.
inline std::vector<ExperimentRow> run_experiment(const ExperimentConfig& config,
                                                 const SyntheticSpec& spec,
                                                 std::size_t pool_size = 0,
                                                 ExperimentDiagnostics* diagnostics = nullptr) {
    config.ensure_valid();
    if (pool_size == 0) {
        const std::size_t largest = config.fit_sizes.back();
        pool_size = static_cast<std::size_t>(
            std::ceil(1.25 * static_cast<double>(largest) / config.p_fit));
    }
    const Dataset pool =
        generate_synthetic(spec, pool_size, derive_seed(config.base_seed, 4, 0, 0));
    return run_experiment(config, pool, diagnostics);
}

// --- result tables -----------------------------------------------------------

enum class TableFormat { aligned_text, csv, json };

inline TableFormat parse_table_format(const std::string& name) {
    if (name == "text" || name == "aligned-text") return TableFormat::aligned_text;
    if (name == "csv") return TableFormat::csv;
    if (name == "json") return TableFormat::json;
    throw std::invalid_argument("unknown table format '" + name + "'");
}

namespace detail {

inline std::string shortest(double v) {
    char buf[64];
    auto r = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, r.ptr);
}

inline std::string fixed6(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.6f", v);
    return buf;
}

}  // namespace detail

/// Renders rows grouped per topology in the benchmark's column layout
/// (six decimals in text mode); csv and json carry full precision and the
/// per-row metadata. Timing columns appear only in csv/json and are the one
/// part of a result file that is not reproducible run to run.
inline std::string emit_table(const std::vector<ExperimentRow>& rows, TableFormat format) {
    if (rows.empty()) throw std::invalid_argument("emit_table: no rows");

    if (format == TableFormat::csv) {
        std::ostringstream out;
        out << "topology,estimator,fit_size,mean_test_loss,mean_fit_loss,std_test_loss,"
               "mean_fit_seconds,repetitions_completed\n";
        for (const ExperimentRow& r : rows) {
            out << r.topology.to_string() << ',' << to_string(r.estimator) << ','
                << r.fit_size << ',' << detail::shortest(r.mean_test_loss) << ','
                << detail::shortest(r.mean_fit_loss) << ','
                << detail::shortest(r.std_test_loss) << ','
                << detail::shortest(r.mean_fit_seconds) << ',' << r.repetitions_completed
                << '\n';
        }
        return out.str();
    }

    if (format == TableFormat::json) {
        nlohmann::json doc = nlohmann::json::array();
        for (const ExperimentRow& r : rows) {
            doc.push_back({{"topology", r.topology.to_string()},
                           {"estimator", to_string(r.estimator)},
                           {"fit_size", r.fit_size},
                           {"mean_test_loss", r.mean_test_loss},
                           {"mean_fit_loss", r.mean_fit_loss},
                           {"std_test_loss", r.std_test_loss},
                           {"mean_fit_seconds", r.mean_fit_seconds},
                           {"repetitions_completed", r.repetitions_completed}});
        }
        return doc.dump(2) + "\n";
    }

    // Aligned text, one block per topology:
    //   Fitting Set Size | ICE (test) | ICE (fit) | MLE (test) | MLE (fit)
    struct Cell {
        bool has_ice = false, has_mle = false;
        double ice_test = 0, ice_fit = 0, mle_test = 0, mle_fit = 0;
    };
    std::ostringstream out;
    std::vector<std::string> seen;
    for (const ExperimentRow& probe : rows) {
        const std::string name = probe.topology.to_string();
        bool done = false;
        for (const std::string& s : seen) done = done || s == name;
        if (done) continue;
        seen.push_back(name);

        std::vector<std::pair<std::size_t, Cell>> cells;
        for (const ExperimentRow& r : rows) {
            if (r.topology.to_string() != name) continue;
            Cell* cell = nullptr;
            for (auto& [size, c] : cells)
                if (size == r.fit_size) cell = &c;
            if (!cell) {
                cells.emplace_back(r.fit_size, Cell{});
                cell = &cells.back().second;
            }
            if (r.estimator == Estimator::ice) {
                cell->has_ice = true;
                cell->ice_test = r.mean_test_loss;
                cell->ice_fit = r.mean_fit_loss;
            } else {
                cell->has_mle = true;
                cell->mle_test = r.mean_test_loss;
                cell->mle_fit = r.mean_fit_loss;
            }
        }

        if (&probe != &rows.front()) out << '\n';
        out << "configuration " << name << " ("
            << parameter_count(probe.topology) << " parameters)\n";
        out << std::setw(16) << "Fitting Set Size" << std::setw(13) << "ICE (test)"
            << std::setw(13) << "ICE (fit)" << std::setw(13) << "MLE (test)"
            << std::setw(13) << "MLE (fit)" << '\n';
        for (const auto& [size, c] : cells) {
            out << std::setw(16) << size;
            out << std::setw(13) << (c.has_ice ? detail::fixed6(c.ice_test) : "-");
            out << std::setw(13) << (c.has_ice ? detail::fixed6(c.ice_fit) : "-");
            out << std::setw(13) << (c.has_mle ? detail::fixed6(c.mle_test) : "-");
            out << std::setw(13) << (c.has_mle ? detail::fixed6(c.mle_fit) : "-");
            out << '\n';
        }
    }
    return out.str();
}

/// Inverse of emit_table's json mode.
inline std::vector<ExperimentRow> parse_rows_json(const std::string& text) {
    const nlohmann::json doc = nlohmann::json::parse(text);
    std::vector<ExperimentRow> rows;
    for (const nlohmann::json& item : doc) {
        ExperimentRow r;
        r.topology = NetworkTopology::parse(item.at("topology").get<std::string>());
        r.estimator = parse_estimator(item.at("estimator").get<std::string>());
        r.fit_size = item.at("fit_size").get<std::size_t>();
        r.mean_test_loss = item.at("mean_test_loss").get<double>();
        r.mean_fit_loss = item.at("mean_fit_loss").get<double>();
        r.std_test_loss = item.at("std_test_loss").get<double>();
        r.mean_fit_seconds = item.at("mean_fit_seconds").get<double>();
        r.repetitions_completed = item.at("repetitions_completed").get<std::size_t>();
        rows.push_back(std::move(r));
    }
    return rows;
}

}  // namespace icemlp
