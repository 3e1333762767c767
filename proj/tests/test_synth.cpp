#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "prefail/features.hpp"
#include "prefail/synth.hpp"

using namespace prefail;

namespace {

ScenarioSpec quiet_spec() {
    // No noise, no oscillation: signatures are exactly recoverable.
    ScenarioSpec spec;
    spec.devices = 10;
    spec.failure_fraction = 0.5;
    spec.min_lifetime = 20;
    spec.max_lifetime = 25;
    spec.attributes = 4;
    spec.noise_amplitude = 0.0;
    spec.oscillation_amplitude = 0.0;
    spec.baseline_spread = 0.3;
    spec.signature_attributes = 2;
    spec.seed = 5;
    return spec;
}

}  // namespace

TEST_CASE("zero-noise abrupt change leaves exactly one edge spike per signature attribute") {
    ScenarioSpec spec = quiet_spec();
    spec.abrupt_magnitude = 5.0;
    spec.abrupt_lead_days = 3;
    const Corpus corpus = generate_corpus(spec);

    for (const auto& device : corpus.devices) {
        const Matrix edge = conv_time(device.values, kEdgeKernel, Padding::Causal);
        std::size_t attrs_with_step = 0;
        for (std::size_t f = 0; f < edge.cols(); ++f) {
            std::size_t nonzero = 0;
            std::size_t where = 0;
            for (std::size_t t = 0; t < edge.rows(); ++t) {
                if (edge(t, f) != 0.0) {
                    ++nonzero;
                    where = t;
                }
            }
            if (!device.failed) {
                CHECK(nonzero == 0);
                continue;
            }
            if (nonzero > 0) {
                ++attrs_with_step;
                CHECK(nonzero == 1);
                CHECK(edge(where, f) == 5.0);
                CHECK(where == device.length() - 1 - 3);
            }
        }
        if (device.failed) CHECK(attrs_with_step == spec.signature_attributes);
    }
}

TEST_CASE("zero-noise trend devices have reversal counts equal to t") {
    ScenarioSpec spec = quiet_spec();
    spec.trend_slope = 0.05;
    const Corpus corpus = generate_corpus(spec);

    bool checked = false;
    for (const auto& device : corpus.devices) {
        if (!device.failed) continue;
        const Matrix counts = reversal_counts(device.values);
        for (std::size_t f = 0; f < counts.cols(); ++f) {
            // Signature attributes rise strictly; the rest are constant.
            const bool trending = device.values(1, f) != device.values(0, f);
            for (std::size_t t = 0; t < counts.rows(); ++t) {
                CHECK(counts(t, f) == (trending ? static_cast<double>(t) : 0.0));
            }
            checked = checked || trending;
        }
    }
    CHECK(checked);
}

TEST_CASE("class counts follow the failure fraction exactly") {
    ScenarioSpec spec = quiet_spec();
    spec.devices = 400;
    spec.failure_fraction = 0.5;
    const Corpus corpus = generate_corpus(spec);
    CHECK(corpus.devices.size() == 400);
    CHECK(corpus.failed_count() == 200);
}

TEST_CASE("lifetimes stay inside the configured range") {
    ScenarioSpec spec = quiet_spec();
    spec.devices = 60;
    const Corpus corpus = generate_corpus(spec);
    bool saw_min = false, saw_max = false;
    for (const auto& device : corpus.devices) {
        CHECK(device.length() >= spec.min_lifetime);
        CHECK(device.length() <= spec.max_lifetime);
        saw_min = saw_min || device.length() == spec.min_lifetime;
        saw_max = saw_max || device.length() == spec.max_lifetime;
        if (device.failed) CHECK(device.failure_index == device.length() - 1);
    }
    CHECK(saw_min);
    CHECK(saw_max);
}

TEST_CASE("generation is bit-identical for the same seed") {
    ScenarioSpec spec = quiet_spec();
    spec.noise_amplitude = 0.4;
    spec.oscillation_amplitude = 0.3;
    spec.trend_slope = 0.02;
    const Corpus a = generate_corpus(spec);
    const Corpus b = generate_corpus(spec);
    REQUIRE(a.devices.size() == b.devices.size());
    for (std::size_t i = 0; i < a.devices.size(); ++i) {
        CHECK(a.devices[i].serial_number == b.devices[i].serial_number);
        CHECK(a.devices[i].dates == b.devices[i].dates);
        CHECK(a.devices[i].values == b.devices[i].values);
    }

    spec.seed = 6;
    const Corpus c = generate_corpus(spec);
    bool identical = true;
    for (std::size_t i = 0; i < a.devices.size() && identical; ++i) {
        identical = a.devices[i].values == c.devices[i].values;
    }
    CHECK_FALSE(identical);
}

TEST_CASE("presets exist under stable names and generate at scale") {
    const auto presets = scenario_presets();
    REQUIRE(presets.size() == 3);
    CHECK(presets[0].name == "abrupt-near-failure");
    CHECK(presets[1].name == "noisy-trend");
    CHECK(presets[2].name == "wearout");
    for (const auto& preset : presets) {
        ScenarioSpec spec = preset;
        spec.devices = 400;
        const Corpus corpus = generate_corpus(spec);
        CHECK(corpus.devices.size() == 400);
        CHECK(corpus.failed_count() ==
              static_cast<std::size_t>(std::llround(400 * spec.failure_fraction)));
    }
    CHECK(preset_by_name("noisy-trend").has_value());
    CHECK_FALSE(preset_by_name("nope").has_value());
}

TEST_CASE("noisy-trend classes overlap pointwise up to the slope accumulation") {
    ScenarioSpec spec = *preset_by_name("noisy-trend");
    spec.devices = 200;
    spec.seed = 9;
    const Corpus corpus = generate_corpus(spec);

    // Mean over devices and attributes at day t differs between classes by at
    // most the per-day drift times t (only signature attributes drift), plus
    // sampling noise.
    const std::size_t probe = spec.min_lifetime;
    std::vector<double> mean_failed(probe, 0.0), mean_normal(probe, 0.0);
    std::size_t failed = 0, normal = 0;
    for (const auto& device : corpus.devices) {
        (device.failed ? failed : normal) += 1;
        for (std::size_t t = 0; t < probe; ++t) {
            double row = 0.0;
            for (std::size_t f = 0; f < device.values.cols(); ++f) row += device.values(t, f);
            (device.failed ? mean_failed : mean_normal)[t] += row / static_cast<double>(device.values.cols());
        }
    }
    for (std::size_t t = 0; t < probe; ++t) {
        mean_failed[t] /= static_cast<double>(failed);
        mean_normal[t] /= static_cast<double>(normal);
        // Worst-case drift accumulation at day t: the trend runs over the
        // last trend_lead_days of each life (whole life when 0).
        const double active_days =
            spec.trend_lead_days == 0
                ? static_cast<double>(t)
                : std::max(0.0, static_cast<double>(t) -
                                    (static_cast<double>(spec.min_lifetime) -
                                     static_cast<double>(spec.trend_lead_days)));
        const double drift = spec.trend_slope * active_days *
                             static_cast<double>(spec.signature_attributes) /
                             static_cast<double>(spec.attributes);
        const double tolerance = 0.45;  // spike and baseline sampling noise at 200 devices
        CHECK(std::abs(mean_failed[t] - mean_normal[t]) <= drift + tolerance);
    }
}

TEST_CASE("infeasible scenarios are rejected") {
    ScenarioSpec spec = quiet_spec();
    spec.abrupt_magnitude = 1.0;
    spec.abrupt_lead_days = spec.min_lifetime;
    CHECK_THROWS_AS(generate_corpus(spec), std::invalid_argument);

    spec = quiet_spec();
    spec.failure_fraction = 0.0;
    CHECK_THROWS_AS(generate_corpus(spec), std::invalid_argument);

    spec = quiet_spec();
    spec.signature_attributes = 99;
    CHECK_THROWS_AS(generate_corpus(spec), std::invalid_argument);
}

TEST_CASE("a corpus round-trips through the CSV layout") {
    ScenarioSpec spec = quiet_spec();
    spec.devices = 12;
    spec.noise_amplitude = 0.25;
    spec.oscillation_amplitude = 0.2;
    spec.abrupt_magnitude = 2.0;
    spec.abrupt_lead_days = 4;
    const Corpus corpus = generate_corpus(spec);

    const auto path = std::filesystem::temp_directory_path() / "prefail_synth_roundtrip.csv";
    write_corpus_csv(corpus, path.string());

    std::ifstream in(path);
    ParseReport report;
    auto records = parse_snapshots(in, corpus.attribute_columns, report);
    auto devices = assemble_histories(std::move(records), corpus.attribute_columns.size(), report);
    std::filesystem::remove(path);

    REQUIRE(devices.size() == corpus.devices.size());
    for (std::size_t i = 0; i < devices.size(); ++i) {
        CHECK(devices[i].serial_number == corpus.devices[i].serial_number);
        CHECK(devices[i].failed == corpus.devices[i].failed);
        CHECK(devices[i].dates == corpus.devices[i].dates);
        // %.17g formatting preserves doubles bit-exactly.
        CHECK(devices[i].values == corpus.devices[i].values);
    }
    CHECK(report.rows_skipped == 0);
    CHECK(report.duplicate_pairs == 0);
}
