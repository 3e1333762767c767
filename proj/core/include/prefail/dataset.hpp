#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "prefail/features.hpp"
#include "prefail/ingest.hpp"
#include "prefail/matrix.hpp"

namespace prefail {

// How histories become fixed-length labeled instances. The horizon n drops
// the most recent n rows before windowing, so a trained classifier predicts
// failure n days ahead.
struct WindowSpec {
    std::size_t window_length = 30;
    std::size_t horizon = 0;
    std::size_t turn_on_cutoff = 30;  // minimum lifetime in days for inclusion

    void validate() const;
};

struct EventWindow {
    std::string serial;
    int label = 0;  // 1 = failed
    Matrix values;  // window_length x F, pre-featurization
};

struct SliceStats {
    std::uint64_t kept = 0;
    std::uint64_t skipped_short = 0;    // fewer than window_length + horizon rows
    std::uint64_t skipped_turn_on = 0;  // lifetime below the cutoff
};

// Takes the most recent window after dropping the last `horizon` rows; the
// same anchoring applies to normal devices so both classes see identically
// aged data. Returns nothing when the device is skipped.
std::optional<EventWindow> slice_window(const DeviceHistory& history, const WindowSpec& spec);

std::vector<EventWindow> slice_windows(const std::vector<DeviceHistory>& histories,
                                       const WindowSpec& spec, SliceStats* stats = nullptr);

// Keeps every failed window and a seeded uniform subset of normal windows of
// equal count. Throws when there are no failed windows or not enough normals.
std::vector<EventWindow> balance_sample(std::vector<EventWindow> windows, std::uint64_t seed);

// Stratified by label, disjoint by serial, deterministic given seed.
std::pair<std::vector<EventWindow>, std::vector<EventWindow>> split_windows(
    std::vector<EventWindow> windows, double test_fraction, std::uint64_t seed);

// Dataset container: derived feature stacks plus everything needed to
// reproduce a run bit-exactly.
struct DatasetEntry {
    std::string serial;
    int label = 0;
    FeatureStack stack;
};

struct Dataset {
    WindowSpec window_spec;
    StackConfig stack_config;
    Normalizer normalizer;
    std::vector<std::string> attribute_columns;
    std::vector<DatasetEntry> entries;
};

void save_dataset(const Dataset& dataset, const std::string& path);
Dataset load_dataset(const std::string& path);

// Shared serialization for the stack configuration (also used by model files).
namespace io_detail {
void write_window_spec(std::ostream& out, const WindowSpec& spec);
WindowSpec read_window_spec(std::istream& in);
void write_stack_config(std::ostream& out, const StackConfig& config);
StackConfig read_stack_config(std::istream& in);
void write_normalizer(std::ostream& out, const Normalizer& normalizer);
Normalizer read_normalizer(std::istream& in);
void write_matrix(std::ostream& out, const Matrix& m);
Matrix read_matrix(std::istream& in);
}  // namespace io_detail

}  // namespace prefail
