#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "prefail/ingest.hpp"

namespace prefail {

// Seeded telemetry generator. Every device gets a baseline level, an
// oscillation and uniform noise; failed devices additionally carry the
// failure signatures whose parameters are nonzero, on a seeded subset of
// attributes. Zero-noise configurations keep the signatures exactly
// recoverable by the matching transform.
struct ScenarioSpec {
    std::string name = "custom";
    std::size_t devices = 400;
    double failure_fraction = 0.25;
    std::size_t min_lifetime = 60;  // T_total range, inclusive
    std::size_t max_lifetime = 90;
    std::size_t attributes = 6;

    double noise_amplitude = 0.35;       // uniform, zero mean
    double oscillation_amplitude = 0.25;
    double oscillation_period = 9.0;     // jittered +-25% per attribute
    double baseline_spread = 0.5;  // per-device level offset, both classes
    // Heavy-tailed common-mode noise: occasional large spikes of random sign
    // on every device, the "rare event" pattern normal telemetry also shows.
    double common_spike_rate = 0.0;
    double common_spike_magnitude = 0.0;

    // Failure signatures; zero magnitude/rate disables a pattern.
    double abrupt_magnitude = 0.0;      // persistent step this many days before the end
    std::size_t abrupt_lead_days = 5;
    double trend_slope = 0.0;           // linear drift; see trend_lead_days
    std::size_t trend_lead_days = 0;    // drift over the last n days only; 0 = whole life
    double rare_event_rate = 0.0;       // per-day spike probability
    double rare_event_magnitude = 0.0;
    double wear_uplift = 0.0;           // small constant offset, visible only cumulatively

    std::size_t signature_attributes = 3;  // how many attributes carry the signatures
    std::uint64_t seed = 0;

    void validate() const;
};

Corpus generate_corpus(const ScenarioSpec& spec);

// Named presets:
//   abrupt-near-failure: persistent step a few days before failure, so the
//     signal dies once the horizon passes the lead time.
//   noisy-trend: classes overlap pointwise and differ only in a slow
//     monotone drift, which the trend channels pick up.
//   wearout: a small uplift plus rare spikes; visible to the cumulative sum.
std::vector<ScenarioSpec> scenario_presets();
std::optional<ScenarioSpec> preset_by_name(const std::string& name);

// Round-trips a corpus through the daily-snapshot CSV layout.
void write_corpus_csv(const Corpus& corpus, const std::string& path);

}  // namespace prefail
