#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "prefail/dataset.hpp"
#include "prefail/ingest.hpp"
#include "prefail/nn.hpp"

namespace prefail {

// Failure is the positive class throughout.
struct Metrics {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    double accuracy = 0.0;
    std::uint64_t tp = 0, fp = 0, tn = 0, fn = 0;
};

// Zero-denominator conventions: precision 0 when tp+fp = 0, recall 0 when
// tp+fn = 0, f1 = 0 when precision + recall = 0.
Metrics compute_metrics(const std::vector<int>& predictions, const std::vector<int>& labels);

struct SummaryStat {
    double mean = 0.0;
    double stddev = 0.0;  // population; one run gives exactly zero
};

struct MetricsSummary {
    std::size_t runs = 0;
    SummaryStat precision, recall, f1, accuracy;
    std::vector<Metrics> per_run;

    static MetricsSummary from_runs(std::vector<Metrics> runs);
};

struct ExperimentConfig {
    std::string feature_set_name = "all";
    WindowSpec window_spec;
    StackConfig stack_config;
    ModelConfig model_base;   // input dims resolved from the data per run
    TrainConfig train_config;
    double test_fraction = 0.25;
    std::size_t runs = 5;     // the reference protocol uses 50
    std::uint64_t master_seed = 0;
    std::size_t jobs = 1;     // concurrent runs; results independent of execution order
};

struct ExperimentResult {
    std::string feature_set;
    std::size_t horizon = 0;
    std::size_t runs = 0;
    std::uint64_t master_seed = 0;
    MetricsSummary summary;
    SliceStats slice_stats;
    std::size_t balanced_count = 0;
    std::size_t train_count = 0;
    std::size_t test_count = 0;
};

// R independent iterations of balance -> split -> fit normalizer on the
// train side -> featurize -> train -> test metrics, with all seeds derived
// from the master seed. Both the normal-device subsample and the split are
// redrawn each run.
ExperimentResult repeated_experiment(const std::vector<DeviceHistory>& devices,
                                     const ExperimentConfig& config);

// repeated_experiment per horizon with windows re-sliced.
std::vector<ExperimentResult> horizon_sweep(const std::vector<DeviceHistory>& devices,
                                            const ExperimentConfig& base,
                                            const std::vector<std::size_t>& horizons);

// Every knob that affects results, echoed into each report.
nlohmann::ordered_json experiment_manifest(const ExperimentConfig& config,
                                           std::size_t corpus_devices, std::size_t corpus_failed,
                                           std::size_t attribute_count);

nlohmann::ordered_json report_json(const std::vector<ExperimentResult>& results,
                                   const nlohmann::ordered_json& manifest);
std::string report_table(const std::vector<ExperimentResult>& results);
std::string report_csv(const std::vector<ExperimentResult>& results);

// Writes <prefix>.json, <prefix>.txt and <prefix>.csv. Throws on empty input.
void write_report(const std::vector<ExperimentResult>& results,
                  const nlohmann::ordered_json& manifest, const std::string& prefix);

}  // namespace prefail
