// prefail: failure prediction pipeline for device telemetry.
//
// Subcommands cover the full flow: synth/ingest build a corpus, derive turns
// it into a labeled dataset, train/ensemble fit models, evaluate and sweep
// reproduce the comparison protocols, predict scores devices, render draws
// the event-matrix views and gradcheck verifies the backprop.

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "prefail/date.hpp"
#include "prefail/ensemble.hpp"
#include "prefail/eval.hpp"
#include "prefail/pipeline.hpp"
#include "prefail/synth.hpp"

namespace {

using namespace prefail;

// ---------------------------------------------------------------------------
// Feature set names.

struct FeatureSetSpec {
    std::string name;
    StackConfig config;
};

FeatureSetSpec parse_feature_set(const std::string& text) {
    FeatureSetSpec spec;
    spec.name = text;
    if (text == "original") return spec;
    if (text == "all") {
        spec.config = StackConfig::all();
        return spec;
    }
    if (text == "no-weak") {
        // Everything except the weak trio: smoothed, cumsum and CUSUM F1.
        for (FeatureId id : StackConfig::all().enabled) {
            if (id == FeatureId::Smoothed || id == FeatureId::CumulativeSum ||
                id == FeatureId::CusumF1Pos || id == FeatureId::CusumF1Neg) {
                continue;
            }
            spec.config.enabled.push_back(id);
        }
        return spec;
    }

    // A '+' separated channel list, e.g. original+edge+reversal.
    std::stringstream stream(text);
    std::string token;
    while (std::getline(stream, token, '+')) {
        if (token.empty() || token == "original") continue;
        if (token == "cusum-f1") {
            spec.config.enabled.push_back(FeatureId::CusumF1Pos);
            spec.config.enabled.push_back(FeatureId::CusumF1Neg);
            continue;
        }
        if (token == "cusum-f2") {
            spec.config.enabled.push_back(FeatureId::CusumF2Pos);
            spec.config.enabled.push_back(FeatureId::CusumF2Neg);
            continue;
        }
        const auto id = feature_from_name(token);
        if (!id) throw CLI::ValidationError("--features", "unknown feature '" + token + "'");
        if (*id != FeatureId::Original) spec.config.enabled.push_back(*id);
    }
    std::sort(spec.config.enabled.begin(), spec.config.enabled.end());
    spec.config.enabled.erase(std::unique(spec.config.enabled.begin(), spec.config.enabled.end()),
                              spec.config.enabled.end());
    return spec;
}

// ---------------------------------------------------------------------------
// Shared option blocks.

struct ModelOpts {
    std::size_t conv1_filters = 32;
    std::size_t conv2_filters = 32;
    std::size_t conv1_kernel = 3;
    std::size_t conv2_kernel = 3;
    std::size_t pool_width = 2;
    std::size_t dense_width = 32;
    bool paper_scale = false;

    ModelConfig base() const {
        ModelConfig config;
        if (paper_scale) {
            config.conv1_filters = 256;
            config.conv2_filters = 256;
            config.dense_width = 160;
        } else {
            config.conv1_filters = conv1_filters;
            config.conv2_filters = conv2_filters;
            config.dense_width = dense_width;
        }
        config.conv1_kernel = conv1_kernel;
        config.conv2_kernel = conv2_kernel;
        config.pool_width = pool_width;
        return config;
    }
};

void add_model_options(CLI::App& cmd, ModelOpts& opts) {
    cmd.add_option("--filters1", opts.conv1_filters, "Conv layer 1 filter count")->capture_default_str();
    cmd.add_option("--filters2", opts.conv2_filters, "Conv layer 2 filter count")->capture_default_str();
    cmd.add_option("--kernel1", opts.conv1_kernel, "Conv layer 1 kernel width")->capture_default_str();
    cmd.add_option("--kernel2", opts.conv2_kernel, "Conv layer 2 kernel width")->capture_default_str();
    cmd.add_option("--pool", opts.pool_width, "Max-pool width and stride")->capture_default_str();
    cmd.add_option("--dense", opts.dense_width, "Dense layer width")->capture_default_str();
    cmd.add_flag("--paper-scale", opts.paper_scale, "Use the 256/256/160 reference sizes");
}

struct TrainOpts {
    std::size_t epochs = 30;
    std::size_t batch_size = 32;
    double learning_rate = 1e-3;
    std::string optimizer = "adam";
    std::size_t patience = 5;
    double min_delta = 1e-4;

    TrainConfig config(std::uint64_t seed) const {
        TrainConfig tc;
        tc.epochs = epochs;
        tc.batch_size = batch_size;
        tc.learning_rate = learning_rate;
        tc.optimizer = optimizer == "sgd" ? OptimizerKind::Sgd : OptimizerKind::Adam;
        tc.plateau_patience = patience;
        tc.plateau_min_delta = min_delta;
        tc.seed = seed;
        return tc;
    }
};

void add_train_options(CLI::App& cmd, TrainOpts& opts) {
    cmd.add_option("--epochs", opts.epochs, "Training epochs")->capture_default_str();
    cmd.add_option("--batch", opts.batch_size, "Mini-batch size")->capture_default_str();
    cmd.add_option("--lr", opts.learning_rate, "Learning rate")->capture_default_str();
    cmd.add_option("--optimizer", opts.optimizer, "adam or sgd")
        ->check(CLI::IsMember({"adam", "sgd"}))
        ->capture_default_str();
    cmd.add_option("--patience", opts.patience, "Early-stop plateau patience (0 disables)")
        ->capture_default_str();
    cmd.add_option("--min-delta", opts.min_delta, "Early-stop minimum loss improvement")
        ->capture_default_str();
}

struct WindowOpts {
    std::size_t window_length = 30;
    std::size_t horizon = 0;
    std::size_t cutoff = 30;

    WindowSpec spec() const {
        WindowSpec s;
        s.window_length = window_length;
        s.horizon = horizon;
        s.turn_on_cutoff = cutoff;
        s.validate();
        return s;
    }
};

void add_window_options(CLI::App& cmd, WindowOpts& opts) {
    cmd.add_option("--window", opts.window_length, "Window length in days")->capture_default_str();
    cmd.add_option("--horizon", opts.horizon, "Days removed before windowing (predict n days ahead)")
        ->capture_default_str();
    cmd.add_option("--cutoff", opts.cutoff, "Turn-on cutoff: minimum lifetime in days")
        ->capture_default_str();
}

// ---------------------------------------------------------------------------
// Helpers.

std::vector<std::string> resolve_attribute_columns(const std::string& request,
                                                   const std::string& csv_path) {
    std::ifstream in(csv_path);
    if (!in) throw std::runtime_error("cannot open " + csv_path);
    std::string header_line;
    if (!std::getline(in, header_line)) throw std::runtime_error("csv: empty input, header row required");
    std::vector<std::string> header;
    std::stringstream stream(header_line);
    std::string column;
    while (std::getline(stream, column, ',')) {
        if (!column.empty() && column.back() == '\r') column.pop_back();
        header.push_back(column);
    }

    if (request == "table1") {
        auto selected = select_attribute_columns(header);
        if (selected.empty()) {
            throw std::runtime_error("--attributes: no default SMART columns found in the header");
        }
        return selected;
    }
    if (request == "auto") {
        std::vector<std::string> selected;
        for (const auto& name : header) {
            if (name.rfind("smart_", 0) == 0) selected.push_back(name);
        }
        if (selected.empty()) throw std::runtime_error("--attributes: no smart_* columns in the header");
        return selected;
    }
    std::vector<std::string> selected;
    std::stringstream list(request);
    while (std::getline(list, column, ',')) {
        if (!column.empty()) selected.push_back(column);
    }
    if (selected.empty()) throw std::runtime_error("--attributes: empty column list");
    return selected;
}

std::vector<TrainInstance> dataset_instances(const Dataset& dataset) {
    std::vector<TrainInstance> instances;
    instances.reserve(dataset.entries.size());
    for (const auto& entry : dataset.entries) {
        instances.push_back({entry.stack.to_input(), entry.label});
    }
    return instances;
}

PipelineConfig dataset_pipeline(const Dataset& dataset) {
    PipelineConfig pipeline;
    pipeline.window_spec = dataset.window_spec;
    pipeline.stack_config = dataset.stack_config;
    pipeline.normalizer = dataset.normalizer;
    pipeline.attribute_columns = dataset.attribute_columns;
    return pipeline;
}

ExperimentConfig make_experiment(const FeatureSetSpec& features, const WindowOpts& window,
                                 const ModelOpts& model, const TrainOpts& train, double test_fraction,
                                 std::size_t runs, std::uint64_t seed) {
    ExperimentConfig config;
    config.feature_set_name = features.name;
    config.stack_config = features.config;
    config.window_spec = window.spec();
    config.model_base = model.base();
    config.train_config = train.config(seed);
    config.test_fraction = test_fraction;
    config.runs = runs;
    config.master_seed = seed;
    return config;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"prefail: device failure prediction from multivariate telemetry"};
    app.require_subcommand(1);
    app.set_config("--config", "", "Read option defaults from a config file");

    // ---- synth ----
    auto* synth_cmd = app.add_subcommand("synth", "Generate a synthetic corpus from a preset");
    std::string synth_preset = "noisy-trend";
    std::string synth_out, synth_csv;
    std::uint64_t synth_seed = 0;
    ScenarioSpec synth_overrides;
    synth_cmd->add_option("--preset", synth_preset, "abrupt-near-failure | noisy-trend | wearout")
        ->capture_default_str();
    auto* devices_opt =
        synth_cmd->add_option("--devices", synth_overrides.devices, "Device count")->capture_default_str();
    synth_cmd->add_option("--failure-fraction", synth_overrides.failure_fraction, "Failed fraction");
    synth_cmd->add_option("--seed", synth_seed, "Corpus seed")->capture_default_str();
    synth_cmd->add_option("--out", synth_out, "Output corpus file")->required();
    synth_cmd->add_option("--csv", synth_csv, "Also write the daily-snapshot CSV layout");
    synth_cmd->callback([&]() {
        auto preset = preset_by_name(synth_preset);
        if (!preset) throw CLI::ValidationError("--preset", "unknown preset '" + synth_preset + "'");
        ScenarioSpec spec = *preset;
        if (devices_opt->count() > 0) spec.devices = synth_overrides.devices;
        if (synth_cmd->count("--failure-fraction") > 0) {
            spec.failure_fraction = synth_overrides.failure_fraction;
        }
        spec.seed = synth_seed;
        const Corpus corpus = generate_corpus(spec);
        save_corpus(corpus, synth_out);
        if (!synth_csv.empty()) write_corpus_csv(corpus, synth_csv);
        std::printf("synth: preset %s, %zu devices (%zu failed), seed %llu -> %s\n", spec.name.c_str(),
                    corpus.devices.size(), corpus.failed_count(),
                    static_cast<unsigned long long>(spec.seed), synth_out.c_str());
    });

    // ---- ingest ----
    auto* ingest_cmd = app.add_subcommand("ingest", "Parse daily-snapshot CSV into a corpus");
    std::string ingest_csv, ingest_out, ingest_report, ingest_attributes = "table1";
    ingest_cmd->add_option("--csv", ingest_csv, "Input CSV file")->required()->check(CLI::ExistingFile);
    ingest_cmd->add_option("--out", ingest_out, "Output corpus file")->required();
    ingest_cmd->add_option("--report", ingest_report, "Parse report path (default <out>.report.json)");
    ingest_cmd
        ->add_option("--attributes", ingest_attributes,
                     "table1 | auto | comma-separated column names")
        ->capture_default_str();
    ingest_cmd->callback([&]() {
        const auto columns = resolve_attribute_columns(ingest_attributes, ingest_csv);
        std::ifstream in(ingest_csv);
        if (!in) throw std::runtime_error("cannot open " + ingest_csv);
        ParseReport report;
        auto records = parse_snapshots(in, columns, report);
        Corpus corpus;
        corpus.attribute_columns = columns;
        corpus.devices = assemble_histories(std::move(records), columns.size(), report);
        save_corpus(corpus, ingest_out);

        const std::string report_path =
            ingest_report.empty() ? ingest_out + ".report.json" : ingest_report;
        std::ofstream report_out(report_path);
        if (!report_out) throw std::runtime_error("cannot open " + report_path + " for writing");
        report_out << report.to_json();
        std::printf("ingest: %llu rows -> %llu devices (%llu failed), %llu skipped, report %s\n",
                    static_cast<unsigned long long>(report.rows_total),
                    static_cast<unsigned long long>(report.devices),
                    static_cast<unsigned long long>(report.failed_devices),
                    static_cast<unsigned long long>(report.rows_skipped), report_path.c_str());
    });

    // ---- derive ----
    auto* derive_cmd = app.add_subcommand("derive", "Slice windows and build feature stacks");
    std::string derive_corpus, derive_out, derive_features = "all";
    WindowOpts derive_window;
    std::size_t derive_cusum_init = 0;
    bool derive_wide_edge = false;
    derive_cmd->add_option("--corpus", derive_corpus, "Input corpus file")->required()->check(CLI::ExistingFile);
    derive_cmd->add_option("--out", derive_out, "Output dataset file")->required();
    derive_cmd->add_option("--features", derive_features, "Feature set name or +-separated channels")
        ->capture_default_str();
    add_window_options(*derive_cmd, derive_window);
    derive_cmd->add_option("--cusum-init", derive_cusum_init, "CUSUM init period (0 = T/4)")
        ->capture_default_str();
    derive_cmd->add_flag("--wide-edge", derive_wide_edge, "Use the [-1, 0, 1] edge kernel");
    derive_cmd->callback([&]() {
        const Corpus corpus = load_corpus(derive_corpus);
        FeatureSetSpec features = parse_feature_set(derive_features);
        features.config.cusum_init_period = derive_cusum_init;
        features.config.wide_edge_kernel = derive_wide_edge;

        Dataset dataset;
        dataset.window_spec = derive_window.spec();
        dataset.stack_config = features.config;
        dataset.attribute_columns = corpus.attribute_columns;

        SliceStats stats;
        const auto windows = slice_windows(corpus.devices, dataset.window_spec, &stats);
        if (windows.empty()) throw std::runtime_error("derive: no device has enough history");
        dataset.normalizer = fit_window_normalizer(windows);
        for (const auto& window : windows) {
            DatasetEntry entry;
            entry.serial = window.serial;
            entry.label = window.label;
            entry.stack = build_feature_stack(dataset.normalizer.apply(window.values), features.config);
            dataset.entries.push_back(std::move(entry));
        }
        save_dataset(dataset, derive_out);
        std::printf("derive: %llu windows kept (%llu short, %llu turn-on), features %s -> %s\n",
                    static_cast<unsigned long long>(stats.kept),
                    static_cast<unsigned long long>(stats.skipped_short),
                    static_cast<unsigned long long>(stats.skipped_turn_on), features.name.c_str(),
                    derive_out.c_str());
    });

    // ---- render ----
    auto* render_cmd = app.add_subcommand("render", "Write event-matrix views as PGM images");
    std::string render_corpus, render_serial, render_features = "all", render_dir = ".";
    render_cmd->add_option("--corpus", render_corpus, "Input corpus file")->required()->check(CLI::ExistingFile);
    render_cmd->add_option("--serial", render_serial, "Device serial number")->required();
    render_cmd->add_option("--features", render_features, "Channels to render")->capture_default_str();
    render_cmd->add_option("--out-dir", render_dir, "Output directory")->capture_default_str();
    render_cmd->callback([&]() {
        const Corpus corpus = load_corpus(render_corpus);
        const auto device = std::find_if(corpus.devices.begin(), corpus.devices.end(),
                                         [&](const DeviceHistory& d) { return d.serial_number == render_serial; });
        if (device == corpus.devices.end()) {
            throw std::runtime_error("--serial: no device '" + render_serial + "' in the corpus");
        }
        const FeatureSetSpec features = parse_feature_set(render_features);
        const FeatureStack stack = build_feature_stack(device->values, features.config);
        std::filesystem::create_directories(render_dir);
        for (const auto& [id, matrix] : stack.channels) {
            const auto path =
                std::filesystem::path(render_dir) / (render_serial + "_" + feature_name(id) + ".pgm");
            save_pgm(matrix, path.string());
            std::printf("render: %s\n", path.string().c_str());
        }
    });

    // ---- train ----
    auto* train_cmd = app.add_subcommand("train", "Train a single classifier on a dataset");
    std::string train_data, train_out;
    std::uint64_t train_seed = 0;
    ModelOpts train_model;
    TrainOpts train_opts;
    train_cmd->add_option("--data", train_data, "Input dataset file")->required()->check(CLI::ExistingFile);
    train_cmd->add_option("--out", train_out, "Output model file")->required();
    train_cmd->add_option("--seed", train_seed, "Training seed")->capture_default_str();
    add_model_options(*train_cmd, train_model);
    add_train_options(*train_cmd, train_opts);
    train_cmd->callback([&]() {
        const Dataset dataset = load_dataset(train_data);
        if (dataset.entries.empty()) throw std::runtime_error("train: dataset is empty");
        const auto instances = dataset_instances(dataset);
        const ModelConfig config = resolve_model_config(
            train_model.base(), dataset.entries.front().stack.input_channels(),
            dataset.window_spec.window_length);
        const Classifier model = train(config, train_opts.config(train_seed), instances);

        std::size_t correct = 0;
        for (const auto& instance : instances) {
            correct += predict(model, instance.input).label == instance.label ? 1 : 0;
        }
        const PipelineConfig pipeline = dataset_pipeline(dataset);
        save_classifier(model, train_out, &pipeline);
        std::printf("train: %u epochs, final loss %.6f, train accuracy %.4f -> %s\n", model.epochs_run,
                    model.loss_curve.empty() ? 0.0 : model.loss_curve.back(),
                    static_cast<double>(correct) / static_cast<double>(instances.size()),
                    train_out.c_str());
    });

    // ---- ensemble ----
    auto* ensemble_cmd = app.add_subcommand("ensemble", "Fit a majority-vote bag of classifiers");
    std::string ensemble_data, ensemble_out;
    std::uint64_t ensemble_seed = 0;
    std::size_t ensemble_k = 25, ensemble_jobs = 1;
    ModelOpts ensemble_model;
    TrainOpts ensemble_train;
    ensemble_cmd->add_option("--data", ensemble_data, "Input dataset file")->required()->check(CLI::ExistingFile);
    ensemble_cmd->add_option("--out", ensemble_out, "Output ensemble directory")->required();
    ensemble_cmd->add_option("-k,--members", ensemble_k, "Number of classifiers")->capture_default_str();
    ensemble_cmd->add_option("--seed", ensemble_seed, "Master seed")->capture_default_str();
    ensemble_cmd->add_option("--jobs", ensemble_jobs, "Concurrent member fits")->capture_default_str();
    add_model_options(*ensemble_cmd, ensemble_model);
    add_train_options(*ensemble_cmd, ensemble_train);
    ensemble_cmd->callback([&]() {
        const Dataset dataset = load_dataset(ensemble_data);
        if (dataset.entries.empty()) throw std::runtime_error("ensemble: dataset is empty");
        const auto instances = dataset_instances(dataset);
        const ModelConfig config = resolve_model_config(
            ensemble_model.base(), dataset.entries.front().stack.input_channels(),
            dataset.window_spec.window_length);
        const EnsembleModel ensemble = fit_ensemble(ensemble_k, config, ensemble_train.config(0),
                                                    instances, ensemble_seed, ensemble_jobs);
        const PipelineConfig pipeline = dataset_pipeline(dataset);
        save_ensemble(ensemble, ensemble_out, &pipeline);
        std::printf("ensemble: %zu members, master seed %llu -> %s\n", ensemble.size(),
                    static_cast<unsigned long long>(ensemble_seed), ensemble_out.c_str());
    });

    // ---- evaluate ----
    auto* eval_cmd = app.add_subcommand("evaluate", "Repeated experiments per feature set");
    std::string eval_corpus, eval_out = "evaluate_report";
    std::vector<std::string> eval_features = {"all"};
    WindowOpts eval_window;
    ModelOpts eval_model;
    TrainOpts eval_train;
    double eval_test_fraction = 0.25;
    std::size_t eval_runs = 5;
    std::size_t eval_jobs = 1;
    std::uint64_t eval_seed = 0;
    eval_cmd->add_option("--corpus", eval_corpus, "Input corpus file")->required()->check(CLI::ExistingFile);
    eval_cmd->add_option("--features", eval_features, "Feature sets, one report row each")
        ->delimiter(',')
        ->capture_default_str();
    eval_cmd->add_option("--out", eval_out, "Report path prefix")->capture_default_str();
    eval_cmd->add_option("--runs", eval_runs, "Repetitions R per feature set")->capture_default_str();
    eval_cmd->add_option("--jobs", eval_jobs, "Concurrent runs")->capture_default_str();
    eval_cmd->add_option("--test-fraction", eval_test_fraction, "Held-out fraction")->capture_default_str();
    eval_cmd->add_option("--seed", eval_seed, "Master seed")->capture_default_str();
    add_window_options(*eval_cmd, eval_window);
    add_model_options(*eval_cmd, eval_model);
    add_train_options(*eval_cmd, eval_train);
    eval_cmd->callback([&]() {
        const Corpus corpus = load_corpus(eval_corpus);
        std::vector<ExperimentResult> results;
        nlohmann::ordered_json manifest;
        for (const auto& name : eval_features) {
            const FeatureSetSpec features = parse_feature_set(name);
            ExperimentConfig config = make_experiment(features, eval_window, eval_model, eval_train,
                                                      eval_test_fraction, eval_runs, eval_seed);
            config.jobs = eval_jobs;
            if (results.empty()) {
                manifest = experiment_manifest(config, corpus.devices.size(), corpus.failed_count(),
                                               corpus.attribute_columns.size());
                manifest["feature_sets"] = eval_features;
            }
            results.push_back(repeated_experiment(corpus.devices, config));
        }
        write_report(results, manifest, eval_out);
        std::fputs(report_table(results).c_str(), stdout);
        std::printf("evaluate: report written to %s.{json,txt,csv}\n", eval_out.c_str());
    });

    // ---- sweep ----
    auto* sweep_cmd = app.add_subcommand("sweep", "Horizon sweep at a fixed feature set");
    std::string sweep_corpus, sweep_out = "sweep_report", sweep_features = "all";
    std::vector<std::size_t> sweep_horizons = {1, 10, 15};
    WindowOpts sweep_window;
    ModelOpts sweep_model;
    TrainOpts sweep_train;
    double sweep_test_fraction = 0.25;
    std::size_t sweep_runs = 5;
    std::size_t sweep_jobs = 1;
    std::uint64_t sweep_seed = 0;
    sweep_cmd->add_option("--corpus", sweep_corpus, "Input corpus file")->required()->check(CLI::ExistingFile);
    sweep_cmd->add_option("--horizons", sweep_horizons, "Horizons n to evaluate")
        ->delimiter(',')
        ->capture_default_str();
    sweep_cmd->add_option("--features", sweep_features, "Feature set")->capture_default_str();
    sweep_cmd->add_option("--out", sweep_out, "Report path prefix")->capture_default_str();
    sweep_cmd->add_option("--runs", sweep_runs, "Repetitions R per horizon")->capture_default_str();
    sweep_cmd->add_option("--jobs", sweep_jobs, "Concurrent runs")->capture_default_str();
    sweep_cmd->add_option("--test-fraction", sweep_test_fraction, "Held-out fraction")->capture_default_str();
    sweep_cmd->add_option("--seed", sweep_seed, "Master seed")->capture_default_str();
    add_window_options(*sweep_cmd, sweep_window);
    add_model_options(*sweep_cmd, sweep_model);
    add_train_options(*sweep_cmd, sweep_train);
    sweep_cmd->callback([&]() {
        const Corpus corpus = load_corpus(sweep_corpus);
        const FeatureSetSpec features = parse_feature_set(sweep_features);
        ExperimentConfig base = make_experiment(features, sweep_window, sweep_model, sweep_train,
                                                sweep_test_fraction, sweep_runs, sweep_seed);
        base.jobs = sweep_jobs;
        auto manifest = experiment_manifest(base, corpus.devices.size(), corpus.failed_count(),
                                            corpus.attribute_columns.size());
        manifest["horizons"] = sweep_horizons;
        const auto results = horizon_sweep(corpus.devices, base, sweep_horizons);
        write_report(results, manifest, sweep_out);
        std::fputs(report_table(results).c_str(), stdout);
        std::printf("sweep: report written to %s.{json,txt,csv}\n", sweep_out.c_str());
    });

    // ---- predict ----
    auto* predict_cmd = app.add_subcommand("predict", "Score a corpus with a model or ensemble");
    std::string predict_model, predict_corpus, predict_out;
    predict_cmd->add_option("--model", predict_model, "Model file or ensemble directory")
        ->required()
        ->check(CLI::ExistingPath);
    predict_cmd->add_option("--corpus", predict_corpus, "Input corpus file")->required()->check(CLI::ExistingFile);
    predict_cmd->add_option("--out", predict_out, "Optional CSV output path");
    predict_cmd->callback([&]() {
        const Corpus corpus = load_corpus(predict_corpus);

        std::optional<PipelineConfig> pipeline;
        Classifier single;
        EnsembleModel ensemble;
        const bool is_ensemble = std::filesystem::is_directory(predict_model);
        if (is_ensemble) {
            ensemble = load_ensemble(predict_model, &pipeline);
        } else {
            single = load_classifier(predict_model, &pipeline);
        }
        if (!pipeline) {
            throw std::runtime_error("--model: file carries no pipeline block; cannot score a raw corpus");
        }
        if (pipeline->attribute_columns.size() != corpus.attribute_columns.size()) {
            throw std::runtime_error("--corpus: attribute count differs from the model's (" +
                                     std::to_string(corpus.attribute_columns.size()) + " vs " +
                                     std::to_string(pipeline->attribute_columns.size()) + ")");
        }

        SliceStats stats;
        const auto windows = slice_windows(corpus.devices, pipeline->window_spec, &stats);
        if (windows.empty()) throw std::runtime_error("predict: no device has enough history");
        const auto instances = featurize_windows(windows, pipeline->normalizer, pipeline->stack_config);

        std::ostringstream csv;
        csv << "serial,label,predicted,p_failure\n";
        std::printf("%-14s %6s %10s %10s\n", "serial", "label", "predicted", "p_failure");
        char row[128];
        for (std::size_t i = 0; i < windows.size(); ++i) {
            int predicted;
            double p_failure;
            if (is_ensemble) {
                const auto vote = vote_predict(ensemble, instances[i].input);
                predicted = vote.label;
                p_failure = vote.proportions[1];
            } else {
                const auto prediction = predict(single, instances[i].input);
                predicted = prediction.label;
                p_failure = prediction.probabilities[1];
            }
            std::snprintf(row, sizeof(row), "%s,%d,%d,%.6f\n", windows[i].serial.c_str(),
                          windows[i].label, predicted, p_failure);
            csv << row;
            std::printf("%-14s %6d %10d %10.6f\n", windows[i].serial.c_str(), windows[i].label,
                        predicted, p_failure);
        }
        if (!predict_out.empty()) {
            std::ofstream out(predict_out, std::ios::binary);
            if (!out) throw std::runtime_error("cannot open " + predict_out + " for writing");
            out << csv.str();
        }
    });

    // ---- gradcheck ----
    auto* grad_cmd = app.add_subcommand("gradcheck", "Verify backprop against finite differences");
    std::uint64_t grad_seed = 0;
    double grad_tolerance = 1e-4;
    grad_cmd->add_option("--seed", grad_seed, "Base seed")->capture_default_str();
    grad_cmd->add_option("--tolerance", grad_tolerance, "Max relative error allowed")->capture_default_str();
    grad_cmd->callback([&]() {
        struct GradCase {
            std::size_t channels, length, filters1, filters2, dense, pool;
        };
        const GradCase cases[] = {
            {4, 12, 3, 3, 5, 2},
            {2, 10, 2, 3, 4, 2},
            {6, 9, 3, 2, 6, 3},
        };
        double worst = 0.0;
        for (std::size_t i = 0; i < 3; ++i) {
            ModelConfig config;
            config.input_channels = cases[i].channels;
            config.input_length = cases[i].length;
            config.conv1_filters = cases[i].filters1;
            config.conv2_filters = cases[i].filters2;
            config.dense_width = cases[i].dense;
            config.pool_width = cases[i].pool;
            const double err = gradient_check(config, grad_seed + i);
            worst = std::max(worst, err);
            std::printf("gradcheck: config %zu (C=%zu T=%zu) max relative error %.3e\n", i + 1,
                        cases[i].channels, cases[i].length, err);
        }
        std::printf("gradcheck: worst %.3e (tolerance %.1e)\n", worst, grad_tolerance);
        if (worst >= grad_tolerance) {
            throw std::runtime_error("gradcheck: max relative error above tolerance");
        }
    });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
