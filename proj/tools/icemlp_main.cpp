// Command-line front end: train and evaluate single models, run the
// overfitting benchmark grid, generate synthetic data, and run the oracle
// validation suite. Every subcommand echoes its fully resolved configuration
// (including every seed) so any run can be reproduced exactly.

#include <CLI11.hpp>

#include <charconv>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "icemlp/icemlp.hpp"

namespace {

using namespace icemlp;

std::string shortest(double v) {
    char buf[64];
    auto r = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, r.ptr);
}

struct DataOptions {
    bool synthetic = false;
    std::string csv_path;
    std::size_t samples = 1000;
    std::uint64_t data_seed = 1;
    // synthetic teacher
    std::string teacher_topology = "11,3";
    std::uint64_t teacher_seed = 1;
    double temperature = 1.0;
    bool scale_features = false;
    // csv shape
    std::string label_column = "label";
    std::string feature_columns;
    std::vector<std::string> filters;
    bool strict = false;
};

void add_synthetic_flags(CLI::App* cmd, DataOptions& o) {
    cmd->add_option("--teacher-topology", o.teacher_topology,
                    "Teacher network layer sizes, e.g. 11,3");
    cmd->add_option("--teacher-seed", o.teacher_seed, "Teacher weight seed");
    cmd->add_option("--temperature", o.temperature,
                    "Multiplier on teacher scores before the label draw");
    cmd->add_flag("--scale-features", o.scale_features,
                  "Stretch feature j by 10^(j mod 3)");
    cmd->add_option("-n,--samples", o.samples, "Sample count to generate");
    cmd->add_option("--data-seed", o.data_seed, "Seed for feature/label draws");
}

void add_data_flags(CLI::App* cmd, DataOptions& o) {
    cmd->add_flag("--synthetic", o.synthetic, "Use teacher-generated synthetic data");
    cmd->add_option("--data", o.csv_path, "CSV file with a header row");
    add_synthetic_flags(cmd, o);
    cmd->add_option("--label-column", o.label_column, "Label column name");
    cmd->add_option("--feature-columns", o.feature_columns,
                    "Comma-separated feature columns (default: all non-label)");
    cmd->add_option("--filter", o.filters,
                    "Row filter like 'age>=0' (repeatable)")
        ->expected(-1);
    cmd->add_flag("--strict", o.strict, "Abort on unparseable numerics");
}

ColumnFilter parse_filter(const std::string& text) {
    static const std::pair<const char*, int> ops[] = {
        {">=", 0}, {"<=", 1}, {">", 2}, {"<", 3}};
    for (const auto& [op, kind] : ops) {
        const std::size_t pos = text.find(op);
        if (pos == std::string::npos || pos == 0) continue;
        const std::string column = text.substr(0, pos);
        const std::string rhs = text.substr(pos + std::string(op).size());
        double value = 0.0;
        auto r = std::from_chars(rhs.data(), rhs.data() + rhs.size(), value);
        if (r.ec != std::errc{} || r.ptr != rhs.data() + rhs.size())
            throw std::invalid_argument("filter '" + text + "': bad numeric bound");
        switch (kind) {
            case 0: return {column, [value](double x) { return x >= value; }, text};
            case 1: return {column, [value](double x) { return x <= value; }, text};
            case 2: return {column, [value](double x) { return x > value; }, text};
            default: return {column, [value](double x) { return x < value; }, text};
        }
    }
    throw std::invalid_argument("filter '" + text + "': expected <column><op><value>");
}

SyntheticSpec synthetic_spec(const DataOptions& o) {
    SyntheticSpec spec;
    spec.teacher_topology = NetworkTopology::parse(o.teacher_topology);
    spec.feature_width = spec.teacher_topology.input_width();
    spec.class_count = spec.teacher_topology.class_count();
    spec.teacher_seed = o.teacher_seed;
    spec.noise_temperature = o.temperature;
    spec.scale_features = o.scale_features;
    return spec;
}

void echo_synthetic(const DataOptions& o) {
    std::cerr << "# data = synthetic\n"
              << "# teacher_topology = " << NetworkTopology::parse(o.teacher_topology).to_string()
              << "\n# teacher_seed = " << o.teacher_seed
              << "\n# temperature = " << o.temperature
              << "\n# scale_features = " << (o.scale_features ? "true" : "false")
              << "\n# samples = " << o.samples << "\n# data_seed = " << o.data_seed << "\n";
}

Dataset resolve_dataset(const DataOptions& o) {
    if (!o.synthetic && o.csv_path.empty())
        throw std::invalid_argument("choose a data source: --synthetic or --data <file>");
    if (o.synthetic && !o.csv_path.empty())
        throw std::invalid_argument("--synthetic and --data are mutually exclusive");

    if (o.synthetic) {
        echo_synthetic(o);
        return generate_synthetic(synthetic_spec(o), o.samples, o.data_seed);
    }

    CsvLoadOptions options;
    options.label_column = o.label_column;
    options.strict = o.strict;
    if (!o.feature_columns.empty()) {
        std::istringstream in(o.feature_columns);
        std::string name;
        while (std::getline(in, name, ','))
            if (!name.empty()) options.feature_columns.push_back(name);
    }
    for (const std::string& f : o.filters) options.filters.push_back(parse_filter(f));

    const CsvLoadReport report = load_csv(o.csv_path, options);
    std::cerr << "# data = " << o.csv_path << "\n# rows_read = " << report.rows_read
              << "\n# rows_dropped_by_filter = " << report.rows_dropped_by_filter
              << "\n# rows_dropped_unparseable = " << report.rows_dropped_unparseable
              << "\n# dropped_fraction = " << report.dropped_fraction() << "\n";
    return report.dataset;
}

struct OptimizerFlags {
    OptimizerConfig config;
    void attach(CLI::App* cmd) {
        cmd->add_option("--memory", config.memory, "L-BFGS history length");
        cmd->add_option("--max-iterations", config.max_iterations, "Iteration cap");
        cmd->add_option("--gradient-tolerance", config.gradient_tolerance,
                        "Stop when |g|_inf <= tol * max(1, |theta|_inf)");
        cmd->add_option("--loss-tolerance", config.relative_loss_tolerance,
                        "Stop when one iteration improves less than this, relatively");
        cmd->add_option("--c1", config.wolfe_c1, "Armijo constant");
        cmd->add_option("--c2", config.wolfe_c2, "Curvature constant");
        cmd->add_option("--max-line-search", config.max_line_search_steps,
                        "Objective evaluations per line search");
    }
    void echo() const {
        std::cerr << "# optimizer.memory = " << config.memory
                  << "\n# optimizer.max_iterations = " << config.max_iterations
                  << "\n# optimizer.gradient_tolerance = " << config.gradient_tolerance
                  << "\n# optimizer.relative_loss_tolerance = " << config.relative_loss_tolerance
                  << "\n# optimizer.wolfe_c1 = " << config.wolfe_c1
                  << "\n# optimizer.wolfe_c2 = " << config.wolfe_c2
                  << "\n# optimizer.max_line_search_steps = " << config.max_line_search_steps
                  << "\n";
    }
};

void write_document(const std::string& text, const std::string& out_path) {
    if (out_path.empty()) {
        std::cout << text;
        return;
    }
    std::ofstream out(out_path);
    if (!out) throw std::runtime_error("cannot open '" + out_path + "' for writing");
    out << text;
}

int run_train(const DataOptions& data_options, const OptimizerFlags& optimizer,
              const std::string& topology_text, const std::string& estimator_name,
              std::uint64_t init_seed, const std::string& out_path) {
    const NetworkTopology topology = NetworkTopology::parse(topology_text);
    const Estimator estimator = parse_estimator(estimator_name);

    std::cerr << "# command = train\n# topology = " << topology.to_string()
              << "\n# estimator = " << to_string(estimator)
              << "\n# init_seed = " << init_seed << "\n";
    optimizer.echo();
    const Dataset data = resolve_dataset(data_options);

    NetworkClassificationProblem problem(init_network(topology, init_seed), data);
    IceInstrumentation telemetry;
    auto objective = [&](const std::vector<double>& theta) {
        problem.set_parameters(theta);
        return estimator == Estimator::mle ? mle_objective(problem)
                                           : ice_objective(problem, &telemetry);
    };
    std::vector<double> theta0(problem.parameters().begin(), problem.parameters().end());
    const OptimizerResult result = minimize(objective, std::move(theta0), optimizer.config);

    Network trained(topology);
    trained.set_parameters(result.theta);
    if (!out_path.empty()) save_model(trained, out_path);

    std::cout << "final_objective " << shortest(result.loss) << "\n"
              << "fit_cross_entropy " << shortest(mean_cross_entropy(trained, data)) << "\n"
              << "iterations " << result.iterations << "\n"
              << "termination " << to_string(result.termination) << "\n";
    if (!out_path.empty()) std::cout << "model " << out_path << "\n";
    return 0;
}

int run_evaluate(const DataOptions& data_options, const std::string& model_path) {
    std::cerr << "# command = evaluate\n# model = " << model_path << "\n";
    const Network net = load_model(model_path);
    const Dataset data = resolve_dataset(data_options);
    std::cout << "cross_entropy " << shortest(mean_cross_entropy(net, data)) << "\n";
    return 0;
}

int run_generate(const DataOptions& data_options, const std::string& out_path) {
    std::cerr << "# command = generate\n";
    echo_synthetic(data_options);
    const Dataset data =
        generate_synthetic(synthetic_spec(data_options), data_options.samples,
                           data_options.data_seed);
    std::ostringstream out;
    write_csv(data, out);
    write_document(out.str(), out_path);
    return 0;
}

int run_validate() {
    std::cerr << "# command = validate\n";
    const std::vector<ValidationCheck> checks = run_validation_suite();
    std::size_t failed = 0;
    for (const ValidationCheck& check : checks) {
        std::printf("%-4s %-55s %s\n", check.passed ? "ok" : "FAIL", check.name.c_str(),
                    check.detail.c_str());
        failed += check.passed ? 0 : 1;
    }
    std::printf("%zu/%zu checks passed\n", checks.size() - failed, checks.size());
    return failed == 0 ? 0 : 1;
}

int run_experiment_cmd(const DataOptions& data_options, const OptimizerFlags& optimizer,
                       const std::string& topologies_text, const std::string& sizes_text,
                       const std::string& estimators_text, std::size_t repetitions,
                       double p_fit, std::uint64_t seed, bool redraw_split,
                       std::size_t threads, std::size_t pool, const std::string& format_name,
                       const std::string& out_path) {
    ExperimentConfig config;
    config.optimizer = optimizer.config;
    config.repetitions = repetitions;
    config.p_fit = p_fit;
    config.base_seed = seed;
    config.redraw_split_per_repetition = redraw_split;
    config.threads = threads;

    if (!topologies_text.empty()) {
        config.topologies.clear();
        std::istringstream in(topologies_text);
        std::string item;
        while (std::getline(in, item, ';'))
            if (!item.empty()) config.topologies.push_back(NetworkTopology::parse(item));
    }
    if (!sizes_text.empty()) {
        config.fit_sizes.clear();
        std::istringstream in(sizes_text);
        std::string item;
        while (std::getline(in, item, ','))
            if (!item.empty()) config.fit_sizes.push_back(std::stoul(item));
    }
    if (!estimators_text.empty()) {
        config.estimators.clear();
        std::istringstream in(estimators_text);
        std::string item;
        while (std::getline(in, item, ','))
            if (!item.empty()) config.estimators.push_back(parse_estimator(item));
    }

    std::cerr << "# command = experiment\n# topologies =";
    for (const NetworkTopology& t : config.topologies) std::cerr << ' ' << t.to_string();
    std::cerr << "\n# fit_sizes =";
    for (std::size_t s : config.fit_sizes) std::cerr << ' ' << s;
    std::cerr << "\n# estimators =";
    for (Estimator e : config.estimators) std::cerr << ' ' << to_string(e);
    std::cerr << "\n# repetitions = " << config.repetitions << "\n# p_fit = " << config.p_fit
              << "\n# base_seed = " << config.base_seed
              << "\n# redraw_split_per_repetition = "
              << (config.redraw_split_per_repetition ? "true" : "false")
              << "\n# threads = " << config.threads << "\n# pool = " << pool
              << " (0 = auto)\n";
    optimizer.echo();

    std::vector<ExperimentRow> rows;
    ExperimentDiagnostics diagnostics;
    if (data_options.csv_path.empty()) {
        echo_synthetic(data_options);
        rows = run_experiment(config, synthetic_spec(data_options), pool, &diagnostics);
    } else {
        const Dataset data = resolve_dataset(data_options);
        rows = run_experiment(config, data, &diagnostics);
    }

    write_document(emit_table(rows, parse_table_format(format_name)), out_path);
    std::cerr << "# fits = " << diagnostics.fits_completed << "/" << diagnostics.fits_attempted
              << ", descent_violations = " << diagnostics.descent_violations
              << ", ice_evaluations = " << diagnostics.ice.evaluations
              << ", negative_penalty_violations = "
              << diagnostics.ice.negative_penalty_violations << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Multilayer perceptron classifier with plain cross-entropy (mle) or "
                 "bias-corrected (ice) training"};
    app.require_subcommand(1);

    // train
    DataOptions train_data;
    OptimizerFlags train_optimizer;
    std::string train_topology = "11,3";
    std::string train_estimator = "ice";
    std::uint64_t train_seed = 1;
    std::string train_out;
    CLI::App* train = app.add_subcommand("train", "Fit one model and write a model file");
    add_data_flags(train, train_data);
    train_optimizer.attach(train);
    train->add_option("--topology", train_topology, "Layer sizes, e.g. 11,5,3");
    train->add_option("--estimator", train_estimator, "mle or ice");
    train->add_option("--init-seed", train_seed, "Weight initialization seed");
    train->add_option("--out", train_out, "Model file to write");

    // evaluate
    DataOptions eval_data;
    std::string eval_model;
    CLI::App* evaluate = app.add_subcommand("evaluate", "Mean cross-entropy of a model");
    add_data_flags(evaluate, eval_data);
    evaluate->add_option("--model", eval_model, "Model file")->required();

    // experiment
    DataOptions experiment_data;
    OptimizerFlags experiment_optimizer;
    std::string topologies_text, sizes_text, estimators_text, format_name = "text", out_path;
    std::size_t repetitions = 10, threads = 0, pool = 0;
    double p_fit = 0.25;
    std::uint64_t seed = 1;
    bool redraw_split = false;
    CLI::App* experiment =
        app.add_subcommand("experiment", "Fit/test grid over topologies and sample sizes");
    add_data_flags(experiment, experiment_data);
    experiment_optimizer.attach(experiment);
    experiment->add_option("--topologies", topologies_text,
                           "Semicolon-separated topologies, e.g. '11,3;11,5,3'");
    experiment->add_option("--sizes", sizes_text, "Comma-separated fitting set sizes");
    experiment->add_option("--estimators", estimators_text, "Comma-separated subset of mle,ice");
    experiment->add_option("--reps", repetitions, "Repetitions per cell");
    experiment->add_option("--p-fit", p_fit, "Probability a pool sample lands in the fit side");
    experiment->add_option("--seed", seed, "Base seed for every derived stream");
    experiment->add_flag("--redraw-split", redraw_split,
                         "Redraw the fit/test split every repetition");
    experiment->add_option("--threads", threads, "Repetition workers (0 = hardware)");
    experiment->add_option("--pool", pool, "Synthetic pool size (0 = auto)");
    experiment->add_option("--format", format_name, "text, csv, or json");
    experiment->add_option("--out", out_path, "Write the table here instead of stdout");

    // generate
    DataOptions generate_data;
    std::string generate_out;
    CLI::App* generate = app.add_subcommand("generate", "Write synthetic data as CSV");
    add_synthetic_flags(generate, generate_data);
    generate->add_option("--out", generate_out, "CSV path (default stdout)");

    // validate
    app.add_subcommand("validate", "Run the oracle suite and print a pass/fail table");

    CLI11_PARSE(app, argc, argv);

    try {
        if (train->parsed())
            return run_train(train_data, train_optimizer, train_topology, train_estimator,
                             train_seed, train_out);
        if (evaluate->parsed()) return run_evaluate(eval_data, eval_model);
        if (experiment->parsed())
            return run_experiment_cmd(experiment_data, experiment_optimizer, topologies_text,
                                      sizes_text, estimators_text, repetitions, p_fit, seed,
                                      redraw_split, threads, pool, format_name, out_path);
        if (generate->parsed()) return run_generate(generate_data, generate_out);
        return run_validate();
    } catch (const std::exception& error) {
        std::cerr << "error: " << error.what() << "\n";
        return 1;
    }
}
