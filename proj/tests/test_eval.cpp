#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "prefail/eval.hpp"
#include "prefail/rng.hpp"
#include "prefail/synth.hpp"

using namespace prefail;

namespace {

void append(std::vector<int>& predictions, std::vector<int>& labels, int p, int l, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) {
        predictions.push_back(p);
        labels.push_back(l);
    }
}

ExperimentConfig fast_experiment(std::uint64_t seed) {
    ExperimentConfig config;
    config.feature_set_name = "original";
    config.window_spec.window_length = 8;
    config.window_spec.horizon = 0;
    config.window_spec.turn_on_cutoff = 0;
    config.stack_config = StackConfig::original();
    config.model_base.conv1_filters = 4;
    config.model_base.conv2_filters = 4;
    config.model_base.dense_width = 6;
    config.train_config.epochs = 4;
    config.runs = 2;
    config.master_seed = seed;
    return config;
}

Corpus fast_corpus(std::uint64_t seed) {
    ScenarioSpec spec;
    spec.devices = 40;
    spec.failure_fraction = 0.4;
    spec.min_lifetime = 12;
    spec.max_lifetime = 16;
    spec.attributes = 3;
    spec.trend_slope = 0.1;
    spec.seed = seed;
    return generate_corpus(spec);
}

}  // namespace

TEST_CASE("compute_metrics on a symmetric confusion") {
    std::vector<int> predictions, labels;
    append(predictions, labels, 1, 1, 9);  // TP
    append(predictions, labels, 1, 0, 1);  // FP
    append(predictions, labels, 0, 1, 1);  // FN
    append(predictions, labels, 0, 0, 9);  // TN
    const Metrics m = compute_metrics(predictions, labels);
    CHECK(m.tp == 9);
    CHECK(m.fp == 1);
    CHECK(m.fn == 1);
    CHECK(m.tn == 9);
    CHECK(m.precision == doctest::Approx(0.9).epsilon(1e-12));
    CHECK(m.recall == doctest::Approx(0.9).epsilon(1e-12));
    CHECK(m.f1 == doctest::Approx(0.9).epsilon(1e-12));
    CHECK(m.accuracy == doctest::Approx(0.9).epsilon(1e-12));
}

TEST_CASE("compute_metrics reproduces F1 ~ 0.7858 from P = 0.95, R = 0.67") {
    // TP = 1273, FP = 67 gives P = 0.95 exactly; FN = 627 gives R = 0.67 exactly.
    std::vector<int> predictions, labels;
    append(predictions, labels, 1, 1, 1273);
    append(predictions, labels, 1, 0, 67);
    append(predictions, labels, 0, 1, 627);
    append(predictions, labels, 0, 0, 33);
    const Metrics m = compute_metrics(predictions, labels);
    CHECK(m.precision == doctest::Approx(0.95).epsilon(1e-12));
    CHECK(m.recall == doctest::Approx(0.67).epsilon(1e-12));
    CHECK(std::abs(m.f1 - 0.7858) < 1e-4);
}

TEST_CASE("compute_metrics zero-denominator conventions") {
    std::vector<int> predictions, labels;
    append(predictions, labels, 0, 1, 5);
    append(predictions, labels, 0, 0, 5);
    const Metrics m = compute_metrics(predictions, labels);
    CHECK(m.precision == 0.0);
    CHECK(m.recall == 0.0);
    CHECK(m.f1 == 0.0);
    CHECK(m.accuracy == 0.5);
}

TEST_CASE("compute_metrics rejects bad inputs") {
    CHECK_THROWS_AS(compute_metrics({}, {}), std::invalid_argument);
    CHECK_THROWS_AS(compute_metrics({1}, {1, 0}), std::invalid_argument);
}

TEST_CASE("compute_metrics matches a brute-force confusion oracle") {
    Rng rng(404);
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t n = 1 + rng.next_below(50);
        std::vector<int> predictions(n), labels(n);
        for (std::size_t i = 0; i < n; ++i) {
            predictions[i] = static_cast<int>(rng.next_below(2));
            labels[i] = static_cast<int>(rng.next_below(2));
        }
        std::uint64_t tp = 0, fp = 0, tn = 0, fn = 0;
        for (std::size_t i = 0; i < n; ++i) {
            if (predictions[i] == 1 && labels[i] == 1) ++tp;
            if (predictions[i] == 1 && labels[i] == 0) ++fp;
            if (predictions[i] == 0 && labels[i] == 0) ++tn;
            if (predictions[i] == 0 && labels[i] == 1) ++fn;
        }
        const Metrics m = compute_metrics(predictions, labels);
        CHECK(m.tp == tp);
        CHECK(m.fp == fp);
        CHECK(m.tn == tn);
        CHECK(m.fn == fn);
        CHECK(m.tp + m.fp + m.tn + m.fn == n);
        // F1 is the harmonic mean wherever both parts are positive.
        if (m.precision > 0.0 && m.recall > 0.0) {
            CHECK(m.f1 == doctest::Approx(2.0 * m.precision * m.recall / (m.precision + m.recall))
                              .epsilon(1e-12));
        }
    }
}

TEST_CASE("summary statistics match a direct recomputation") {
    std::vector<Metrics> runs(4);
    runs[0].f1 = 0.8;
    runs[1].f1 = 0.9;
    runs[2].f1 = 0.85;
    runs[3].f1 = 0.95;
    const MetricsSummary summary = MetricsSummary::from_runs(runs);
    double mean = 0.0;
    for (const auto& r : runs) mean += r.f1;
    mean /= 4.0;
    double var = 0.0;
    for (const auto& r : runs) var += (r.f1 - mean) * (r.f1 - mean);
    var /= 4.0;
    CHECK(summary.f1.mean == doctest::Approx(mean).epsilon(1e-15));
    CHECK(summary.f1.stddev == doctest::Approx(std::sqrt(var)).epsilon(1e-15));
    CHECK(summary.runs == 4);
    // Mean lies within the run range.
    CHECK(summary.f1.mean >= 0.8);
    CHECK(summary.f1.mean <= 0.95);
}

TEST_CASE("a single run has exactly zero spread") {
    std::vector<Metrics> runs(1);
    runs[0].f1 = 0.77;
    const MetricsSummary summary = MetricsSummary::from_runs(runs);
    CHECK(summary.f1.stddev == 0.0);
    CHECK(summary.f1.mean == 0.77);
}

TEST_CASE("repeated_experiment is deterministic in the master seed") {
    const Corpus corpus = fast_corpus(1);
    const auto a = repeated_experiment(corpus.devices, fast_experiment(77));
    const auto b = repeated_experiment(corpus.devices, fast_experiment(77));
    CHECK(a.summary.f1.mean == b.summary.f1.mean);
    CHECK(a.summary.precision.mean == b.summary.precision.mean);
    CHECK(a.summary.recall.stddev == b.summary.recall.stddev);
    REQUIRE(a.summary.per_run.size() == b.summary.per_run.size());
    for (std::size_t i = 0; i < a.summary.per_run.size(); ++i) {
        CHECK(a.summary.per_run[i].tp == b.summary.per_run[i].tp);
        CHECK(a.summary.per_run[i].fn == b.summary.per_run[i].fn);
    }
}

TEST_CASE("concurrent runs match sequential runs") {
    const Corpus corpus = fast_corpus(4);
    ExperimentConfig config = fast_experiment(13);
    config.runs = 4;
    const auto sequential = repeated_experiment(corpus.devices, config);
    config.jobs = 2;
    const auto threaded = repeated_experiment(corpus.devices, config);
    REQUIRE(sequential.summary.per_run.size() == threaded.summary.per_run.size());
    for (std::size_t i = 0; i < sequential.summary.per_run.size(); ++i) {
        CHECK(sequential.summary.per_run[i].tp == threaded.summary.per_run[i].tp);
        CHECK(sequential.summary.per_run[i].fp == threaded.summary.per_run[i].fp);
        CHECK(sequential.summary.per_run[i].f1 == threaded.summary.per_run[i].f1);
    }
    CHECK(sequential.summary.f1.mean == threaded.summary.f1.mean);
}

TEST_CASE("horizon_sweep produces one summary per horizon") {
    const Corpus corpus = fast_corpus(2);
    const auto results = horizon_sweep(corpus.devices, fast_experiment(5), {0, 2});
    REQUIRE(results.size() == 2);
    CHECK(results[0].horizon == 0);
    CHECK(results[1].horizon == 2);
    CHECK(results[0].runs == 2);
}

TEST_CASE("report files are written, reproducible and complete") {
    const Corpus corpus = fast_corpus(3);
    const auto config = fast_experiment(9);
    std::vector<ExperimentResult> results = {repeated_experiment(corpus.devices, config)};
    const auto manifest = experiment_manifest(config, corpus.devices.size(), corpus.failed_count(),
                                              corpus.attribute_columns.size());

    const auto dir = std::filesystem::temp_directory_path() / "prefail_report_test";
    std::filesystem::create_directories(dir);
    const std::string prefix = (dir / "report").string();
    write_report(results, manifest, prefix);
    write_report(results, manifest, prefix + "_again");

    auto slurp = [](const std::string& path) {
        std::ifstream in(path, std::ios::binary);
        std::ostringstream buffer;
        buffer << in.rdbuf();
        return buffer.str();
    };
    // Report generation is a pure function of its inputs.
    CHECK(slurp(prefix + ".json") == slurp(prefix + "_again.json"));
    CHECK(slurp(prefix + ".csv") == slurp(prefix + "_again.csv"));
    CHECK(slurp(prefix + ".txt") == slurp(prefix + "_again.txt"));

    const std::string csv = slurp(prefix + ".csv");
    CHECK(csv.rfind("feature_set,horizon,metric,mean,std,R,seed\n", 0) == 0);
    CHECK(csv.find("original,0,f1,") != std::string::npos);

    // The JSON carries the manifest knobs and per-run records sufficient to
    // recompute the summary.
    const auto json = nlohmann::json::parse(slurp(prefix + ".json"));
    CHECK(json["manifest"]["train"]["epochs"] == 4);
    CHECK(json["manifest"]["window"]["window_length"] == 8);
    CHECK(json["manifest"]["features"]["set"] == "original");
    CHECK(json["manifest"]["runs"] == 2);
    CHECK(json["manifest"]["master_seed"] == 9);

    std::vector<Metrics> per_run;
    for (const auto& run : json["rows"][0]["per_run"]) {
        Metrics m;
        m.precision = run["precision"];
        m.recall = run["recall"];
        m.f1 = run["f1"];
        m.accuracy = run["accuracy"];
        per_run.push_back(m);
    }
    const MetricsSummary recomputed = MetricsSummary::from_runs(per_run);
    for (const auto& metric : json["rows"][0]["metrics"]) {
        if (metric["metric"] == "f1") {
            CHECK(recomputed.f1.mean == doctest::Approx(metric["mean"].get<double>()).epsilon(1e-12));
            CHECK(recomputed.f1.stddev == doctest::Approx(metric["std"].get<double>()).epsilon(1e-12));
        }
    }

    std::filesystem::remove_all(dir);
}

TEST_CASE("report rejects empty results") {
    nlohmann::ordered_json manifest;
    CHECK_THROWS_AS(write_report({}, manifest, "/tmp/prefail_no_report"), std::invalid_argument);
}
