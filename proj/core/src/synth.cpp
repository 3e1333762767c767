#include "prefail/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <stdexcept>

#include "prefail/date.hpp"
#include "prefail/rng.hpp"

namespace prefail {

void ScenarioSpec::validate() const {
    if (devices == 0) throw std::invalid_argument("scenario: devices must be positive");
    if (!(failure_fraction > 0.0 && failure_fraction < 1.0)) {
        throw std::invalid_argument("scenario: failure_fraction must be in (0, 1)");
    }
    if (min_lifetime == 0 || max_lifetime < min_lifetime) {
        throw std::invalid_argument("scenario: lifetime range invalid");
    }
    if (attributes == 0) throw std::invalid_argument("scenario: attributes must be positive");
    if (signature_attributes == 0 || signature_attributes > attributes) {
        throw std::invalid_argument("scenario: signature_attributes must be in [1, attributes]");
    }
    if (abrupt_magnitude != 0.0 && abrupt_lead_days >= min_lifetime) {
        throw std::invalid_argument("scenario: abrupt_lead_days must be below the shortest lifetime");
    }
    if (rare_event_rate < 0.0 || rare_event_rate > 1.0) {
        throw std::invalid_argument("scenario: rare_event_rate must be in [0, 1]");
    }
}

Corpus generate_corpus(const ScenarioSpec& spec) {
    spec.validate();

    Corpus corpus;
    for (std::size_t f = 0; f < spec.attributes; ++f) {
        corpus.attribute_columns.push_back("smart_" + std::to_string(f + 1) + "_raw");
    }

    const std::size_t failed_count =
        static_cast<std::size_t>(std::llround(static_cast<double>(spec.devices) * spec.failure_fraction));
    const std::int32_t start_day = days_from_civil(2017, 1, 1);

    corpus.devices.reserve(spec.devices);
    for (std::size_t d = 0; d < spec.devices; ++d) {
        Rng rng(derive_seed(spec.seed, d));
        const bool failed = d < failed_count;

        DeviceHistory device;
        char serial[32];
        std::snprintf(serial, sizeof(serial), "SYN%06zu", d);
        device.serial_number = serial;
        device.model = "SYNTH01";
        device.failed = failed;

        const std::size_t lifetime =
            spec.min_lifetime + static_cast<std::size_t>(rng.next_below(spec.max_lifetime - spec.min_lifetime + 1));
        device.dates.resize(lifetime);
        for (std::size_t t = 0; t < lifetime; ++t) device.dates[t] = start_day + static_cast<std::int32_t>(t);
        if (failed) device.failure_index = lifetime - 1;

        // Per-attribute baseline, phase and period, both classes alike. The
        // period jitters around its configured value so the oscillation
        // cannot be averaged out the same way across devices.
        std::vector<double> baseline(spec.attributes), phase(spec.attributes), period(spec.attributes);
        for (std::size_t f = 0; f < spec.attributes; ++f) {
            baseline[f] = rng.next_double(-spec.baseline_spread, spec.baseline_spread);
            phase[f] = rng.next_double(0.0, 2.0 * std::numbers::pi);
            period[f] = spec.oscillation_period * rng.next_double(0.75, 1.25);
        }

        // Signature attributes: seeded choice of signature_attributes out of F.
        std::vector<std::size_t> attr_order(spec.attributes);
        for (std::size_t f = 0; f < spec.attributes; ++f) attr_order[f] = f;
        rng.shuffle(attr_order);
        std::vector<bool> carries_signature(spec.attributes, false);
        for (std::size_t i = 0; i < spec.signature_attributes; ++i) carries_signature[attr_order[i]] = true;

        device.values = Matrix(lifetime, spec.attributes);
        const std::size_t step_index =
            spec.abrupt_lead_days < lifetime ? lifetime - 1 - spec.abrupt_lead_days : 0;
        const std::size_t trend_start =
            spec.trend_lead_days > 0 && spec.trend_lead_days < lifetime ? lifetime - spec.trend_lead_days
                                                                        : 0;
        for (std::size_t f = 0; f < spec.attributes; ++f) {
            const bool inject = failed && carries_signature[f];
            for (std::size_t t = 0; t < lifetime; ++t) {
                double v = baseline[f];
                if (spec.oscillation_amplitude != 0.0) {
                    v += spec.oscillation_amplitude *
                         std::sin(2.0 * std::numbers::pi * static_cast<double>(t) / period[f] + phase[f]);
                }
                if (spec.noise_amplitude != 0.0) {
                    v += rng.next_double(-spec.noise_amplitude, spec.noise_amplitude);
                }
                if (spec.common_spike_rate > 0.0 && rng.next_double() < spec.common_spike_rate) {
                    v += rng.next_below(2) == 0 ? spec.common_spike_magnitude
                                                : -spec.common_spike_magnitude;
                }
                if (inject) {
                    if (spec.abrupt_magnitude != 0.0 && t >= step_index) v += spec.abrupt_magnitude;
                    if (spec.trend_slope != 0.0 && t >= trend_start) {
                        v += spec.trend_slope * static_cast<double>(t - trend_start);
                    }
                    if (spec.wear_uplift != 0.0) v += spec.wear_uplift;
                    if (spec.rare_event_rate > 0.0 && rng.next_double() < spec.rare_event_rate) {
                        v += spec.rare_event_magnitude;
                    }
                }
                device.values(t, f) = v;
            }
        }
        corpus.devices.push_back(std::move(device));
    }
    return corpus;
}

std::vector<ScenarioSpec> scenario_presets() {
    std::vector<ScenarioSpec> presets;

    {
        ScenarioSpec s;
        s.name = "abrupt-near-failure";
        s.failure_fraction = 0.5;
        s.abrupt_magnitude = 2.0;
        s.abrupt_lead_days = 5;
        presets.push_back(s);
    }
    {
        // Classes overlap pointwise: the level offset hides under the
        // baseline spread and common-mode spikes drown mean contrasts on the
        // raw channels. Only the monotone drift separates the classes, and
        // rank-based channels see it through the spikes.
        ScenarioSpec s;
        s.name = "noisy-trend";
        s.failure_fraction = 0.5;
        s.trend_slope = 0.07;
        s.trend_lead_days = 45;
        s.baseline_spread = 3.5;
        s.oscillation_amplitude = 0.25;
        s.oscillation_period = 9.0;
        s.noise_amplitude = 0.3;
        s.common_spike_rate = 0.04;
        s.common_spike_magnitude = 12.0;
        presets.push_back(s);
    }
    {
        ScenarioSpec s;
        s.name = "wearout";
        s.wear_uplift = 0.08;
        s.rare_event_rate = 0.05;
        s.rare_event_magnitude = 1.5;
        presets.push_back(s);
    }
    return presets;
}

std::optional<ScenarioSpec> preset_by_name(const std::string& name) {
    for (const auto& preset : scenario_presets()) {
        if (preset.name == name) return preset;
    }
    return std::nullopt;
}

void write_corpus_csv(const Corpus& corpus, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open " + path + " for writing");

    out << "date,serial_number,model,capacity_bytes,failure";
    for (const auto& name : corpus.attribute_columns) out << ',' << name;
    out << '\n';

    // Rows ordered by (date, device) like concatenated daily exports.
    bool any = false;
    std::int32_t lo = 0, hi = 0;
    for (const auto& d : corpus.devices) {
        if (d.dates.empty()) continue;
        if (!any) {
            lo = d.dates.front();
            hi = d.dates.back();
            any = true;
        } else {
            lo = std::min(lo, d.dates.front());
            hi = std::max(hi, d.dates.back());
        }
    }
    if (!any) return;

    char cell[40];
    for (std::int32_t day = lo; day <= hi; ++day) {
        for (const auto& d : corpus.devices) {
            const auto it = std::lower_bound(d.dates.begin(), d.dates.end(), day);
            if (it == d.dates.end() || *it != day) continue;
            const std::size_t t = static_cast<std::size_t>(it - d.dates.begin());
            const bool failure_row = d.failed && t == d.dates.size() - 1;
            out << format_date(day) << ',' << d.serial_number << ',' << d.model << ",,"
                << (failure_row ? '1' : '0');
            for (std::size_t f = 0; f < d.values.cols(); ++f) {
                std::snprintf(cell, sizeof(cell), "%.17g", d.values(t, f));
                out << ',' << cell;
            }
            out << '\n';
        }
    }
    out.flush();
    if (!out) throw std::runtime_error("write failed: " + path);
}

}  // namespace prefail
