#include "prefail/eval.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <mutex>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "prefail/pipeline.hpp"
#include "prefail/rng.hpp"

namespace prefail {

Metrics compute_metrics(const std::vector<int>& predictions, const std::vector<int>& labels) {
    if (predictions.empty()) throw std::invalid_argument("metrics: empty input");
    if (predictions.size() != labels.size()) throw std::invalid_argument("metrics: length mismatch");

    Metrics m;
    for (std::size_t i = 0; i < predictions.size(); ++i) {
        const bool p = predictions[i] == 1;
        const bool l = labels[i] == 1;
        if (p && l) ++m.tp;
        else if (p && !l) ++m.fp;
        else if (!p && l) ++m.fn;
        else ++m.tn;
    }
    m.precision = (m.tp + m.fp) > 0 ? static_cast<double>(m.tp) / static_cast<double>(m.tp + m.fp) : 0.0;
    m.recall = (m.tp + m.fn) > 0 ? static_cast<double>(m.tp) / static_cast<double>(m.tp + m.fn) : 0.0;
    m.f1 = (m.precision + m.recall) > 0.0 ? 2.0 * m.precision * m.recall / (m.precision + m.recall) : 0.0;
    m.accuracy = static_cast<double>(m.tp + m.tn) / static_cast<double>(predictions.size());
    return m;
}

namespace {

SummaryStat summarize(const std::vector<Metrics>& runs, double Metrics::*field) {
    double mean = 0.0;
    for (const auto& r : runs) mean += r.*field;
    mean /= static_cast<double>(runs.size());
    double var = 0.0;
    for (const auto& r : runs) {
        const double d = r.*field - mean;
        var += d * d;
    }
    var /= static_cast<double>(runs.size());
    return {mean, std::sqrt(var)};
}

}  // namespace

MetricsSummary MetricsSummary::from_runs(std::vector<Metrics> runs) {
    if (runs.empty()) throw std::invalid_argument("summary: no runs");
    MetricsSummary s;
    s.runs = runs.size();
    s.precision = summarize(runs, &Metrics::precision);
    s.recall = summarize(runs, &Metrics::recall);
    s.f1 = summarize(runs, &Metrics::f1);
    s.accuracy = summarize(runs, &Metrics::accuracy);
    s.per_run = std::move(runs);
    return s;
}

ExperimentResult repeated_experiment(const std::vector<DeviceHistory>& devices,
                                     const ExperimentConfig& config) {
    if (config.runs == 0) throw std::invalid_argument("experiment: runs must be positive");

    ExperimentResult result;
    result.feature_set = config.feature_set_name;
    result.horizon = config.window_spec.horizon;
    result.runs = config.runs;
    result.master_seed = config.master_seed;

    const std::vector<EventWindow> windows = slice_windows(devices, config.window_spec, &result.slice_stats);

    std::vector<Metrics> runs(config.runs);
    auto execute_run = [&](std::size_t r) {
        const std::uint64_t run_seed = derive_seed(config.master_seed, r);

        auto balanced = balance_sample(windows, derive_seed(run_seed, 0));
        if (r == 0) result.balanced_count = balanced.size();

        auto [train_windows, test_windows] =
            split_windows(std::move(balanced), config.test_fraction, derive_seed(run_seed, 1));
        if (r == 0) {
            result.train_count = train_windows.size();
            result.test_count = test_windows.size();
        }

        const Normalizer normalizer = fit_window_normalizer(train_windows);
        const auto train_instances = featurize_windows(train_windows, normalizer, config.stack_config);
        const auto test_instances = featurize_windows(test_windows, normalizer, config.stack_config);

        const std::size_t channels =
            stacked_channel_count(config.stack_config, train_windows.front().values.cols());
        const ModelConfig model_config =
            resolve_model_config(config.model_base, channels, config.window_spec.window_length);

        TrainConfig train_config = config.train_config;
        train_config.seed = derive_seed(run_seed, 2);
        const Classifier model = train(model_config, train_config, train_instances);

        std::vector<int> predictions, labels;
        predictions.reserve(test_instances.size());
        labels.reserve(test_instances.size());
        for (const auto& instance : test_instances) {
            predictions.push_back(predict(model, instance.input).label);
            labels.push_back(instance.label);
        }
        runs[r] = compute_metrics(predictions, labels);
    };

    if (config.jobs <= 1 || config.runs == 1) {
        for (std::size_t r = 0; r < config.runs; ++r) execute_run(r);
    } else {
        // Runs are seeded independently and write into their own slot, so
        // the summary does not depend on scheduling.
        std::atomic<std::size_t> next{0};
        std::exception_ptr failure;
        std::mutex failure_mutex;
        auto worker = [&]() {
            for (;;) {
                const std::size_t r = next.fetch_add(1);
                if (r >= config.runs) return;
                try {
                    execute_run(r);
                } catch (...) {
                    std::lock_guard<std::mutex> lock(failure_mutex);
                    if (!failure) failure = std::current_exception();
                    return;
                }
            }
        };
        std::vector<std::thread> threads;
        for (std::size_t j = 0; j < std::min(config.jobs, config.runs); ++j) threads.emplace_back(worker);
        for (auto& t : threads) t.join();
        if (failure) std::rethrow_exception(failure);
    }

    result.summary = MetricsSummary::from_runs(std::move(runs));
    return result;
}

std::vector<ExperimentResult> horizon_sweep(const std::vector<DeviceHistory>& devices,
                                            const ExperimentConfig& base,
                                            const std::vector<std::size_t>& horizons) {
    if (horizons.empty()) throw std::invalid_argument("sweep: no horizons");
    std::vector<ExperimentResult> results;
    results.reserve(horizons.size());
    for (std::size_t horizon : horizons) {
        ExperimentConfig config = base;
        config.window_spec.horizon = horizon;
        results.push_back(repeated_experiment(devices, config));
    }
    return results;
}

nlohmann::ordered_json experiment_manifest(const ExperimentConfig& config,
                                           std::size_t corpus_devices, std::size_t corpus_failed,
                                           std::size_t attribute_count) {
    nlohmann::ordered_json manifest;
    manifest["corpus"] = {{"devices", corpus_devices},
                          {"failed_devices", corpus_failed},
                          {"attributes", attribute_count}};
    manifest["window"] = {{"window_length", config.window_spec.window_length},
                          {"horizon", config.window_spec.horizon},
                          {"turn_on_cutoff", config.window_spec.turn_on_cutoff}};

    nlohmann::ordered_json channels = nlohmann::ordered_json::array();
    channels.push_back(feature_name(FeatureId::Original));
    for (std::size_t i = 1; i < kFeatureIdCount; ++i) {
        const auto id = static_cast<FeatureId>(i);
        if (config.stack_config.is_enabled(id)) channels.push_back(feature_name(id));
    }
    manifest["features"] = {
        {"set", config.feature_set_name},
        {"channels", channels},
        {"cusum_init_period", config.stack_config.cusum_init_period},
        {"cusum_slack", config.stack_config.cusum_slack},
        {"wide_edge_kernel", config.stack_config.wide_edge_kernel},
    };
    manifest["model"] = {
        {"conv1_filters", config.model_base.conv1_filters},
        {"conv1_kernel", config.model_base.conv1_kernel},
        {"conv2_filters", config.model_base.conv2_filters},
        {"conv2_kernel", config.model_base.conv2_kernel},
        {"pool_width", config.model_base.pool_width},
        {"dense_width", config.model_base.dense_width},
        {"classes", config.model_base.classes},
    };
    manifest["train"] = {
        {"epochs", config.train_config.epochs},
        {"batch_size", config.train_config.batch_size},
        {"learning_rate", config.train_config.learning_rate},
        {"optimizer", config.train_config.optimizer == OptimizerKind::Adam ? "adam" : "sgd"},
        {"plateau_patience", config.train_config.plateau_patience},
        {"plateau_min_delta", config.train_config.plateau_min_delta},
    };
    manifest["test_fraction"] = config.test_fraction;
    manifest["runs"] = config.runs;
    manifest["master_seed"] = config.master_seed;
    // Both the normal-device subsample and the split are redrawn every run;
    // the normalizer is refitted on each run's training side.
    manifest["protocol"] = "per run: balance resample, stratified split, normalizer fit on train, train, test";
    return manifest;
}

namespace {

nlohmann::ordered_json metrics_json(const Metrics& m) {
    return {{"precision", m.precision}, {"recall", m.recall},   {"f1", m.f1},
            {"accuracy", m.accuracy},   {"tp", m.tp},           {"fp", m.fp},
            {"tn", m.tn},               {"fn", m.fn}};
}

}  // namespace

nlohmann::ordered_json report_json(const std::vector<ExperimentResult>& results,
                                   const nlohmann::ordered_json& manifest) {
    if (results.empty()) throw std::invalid_argument("report: no results");

    nlohmann::ordered_json report;
    report["manifest"] = manifest;
    nlohmann::ordered_json rows = nlohmann::ordered_json::array();
    for (const auto& r : results) {
        nlohmann::ordered_json metrics = nlohmann::ordered_json::array();
        const std::pair<const char*, const SummaryStat*> stats[] = {
            {"precision", &r.summary.precision},
            {"recall", &r.summary.recall},
            {"f1", &r.summary.f1},
            {"accuracy", &r.summary.accuracy},
        };
        for (const auto& [name, stat] : stats) {
            metrics.push_back({{"metric", name}, {"mean", stat->mean}, {"std", stat->stddev}});
        }

        nlohmann::ordered_json per_run = nlohmann::ordered_json::array();
        for (const auto& m : r.summary.per_run) per_run.push_back(metrics_json(m));

        rows.push_back({{"feature_set", r.feature_set},
                        {"horizon", r.horizon},
                        {"R", r.runs},
                        {"seed", r.master_seed},
                        {"metrics", metrics},
                        {"per_run", per_run},
                        {"slice",
                         {{"kept", r.slice_stats.kept},
                          {"skipped_short", r.slice_stats.skipped_short},
                          {"skipped_turn_on", r.slice_stats.skipped_turn_on}}},
                        {"sizes",
                         {{"balanced", r.balanced_count},
                          {"train", r.train_count},
                          {"test", r.test_count}}}});
    }
    report["rows"] = rows;
    return report;
}

std::string report_table(const std::vector<ExperimentResult>& results) {
    if (results.empty()) throw std::invalid_argument("report: no results");
    std::ostringstream out;
    char line[256];
    std::snprintf(line, sizeof(line), "%-14s %7s %4s %12s %17s %17s %17s %17s\n", "feature_set",
                  "horizon", "R", "seed", "f1", "recall", "precision", "accuracy");
    out << line;
    for (const auto& r : results) {
        auto cell = [](const SummaryStat& s) {
            char buf[32];
            std::snprintf(buf, sizeof(buf), "%.4f +- %.4f", s.mean, s.stddev);
            return std::string(buf);
        };
        std::snprintf(line, sizeof(line), "%-14s %7zu %4zu %12llu %17s %17s %17s %17s\n",
                      r.feature_set.c_str(), r.horizon, r.runs,
                      static_cast<unsigned long long>(r.master_seed), cell(r.summary.f1).c_str(),
                      cell(r.summary.recall).c_str(), cell(r.summary.precision).c_str(),
                      cell(r.summary.accuracy).c_str());
        out << line;
    }
    return out.str();
}

std::string report_csv(const std::vector<ExperimentResult>& results) {
    if (results.empty()) throw std::invalid_argument("report: no results");
    std::ostringstream out;
    out << "feature_set,horizon,metric,mean,std,R,seed\n";
    char buf[160];
    for (const auto& r : results) {
        const std::pair<const char*, const SummaryStat*> stats[] = {
            {"precision", &r.summary.precision},
            {"recall", &r.summary.recall},
            {"f1", &r.summary.f1},
            {"accuracy", &r.summary.accuracy},
        };
        for (const auto& [name, stat] : stats) {
            std::snprintf(buf, sizeof(buf), "%s,%zu,%s,%.17g,%.17g,%zu,%llu\n", r.feature_set.c_str(),
                          r.horizon, name, stat->mean, stat->stddev, r.runs,
                          static_cast<unsigned long long>(r.master_seed));
            out << buf;
        }
    }
    return out.str();
}

void write_report(const std::vector<ExperimentResult>& results,
                  const nlohmann::ordered_json& manifest, const std::string& prefix) {
    const auto json = report_json(results, manifest);
    const auto table = report_table(results);
    const auto csv = report_csv(results);

    auto write_file = [](const std::string& path, const std::string& payload) {
        std::ofstream out(path, std::ios::binary);
        if (!out) throw std::runtime_error("cannot open " + path + " for writing");
        out << payload;
        out.flush();
        if (!out) throw std::runtime_error("write failed: " + path);
    };
    write_file(prefix + ".json", json.dump(2) + "\n");
    write_file(prefix + ".txt", table);
    write_file(prefix + ".csv", csv);
}

}  // namespace prefail
