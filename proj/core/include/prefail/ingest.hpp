#pragma once

#include <cstdint>
#include <functional>
#include <istream>
#include <optional>
#include <string>
#include <vector>

#include "prefail/matrix.hpp"

namespace prefail {

// One daily-snapshot CSV row, restricted to the requested attribute columns.
struct SnapshotRecord {
    std::int32_t date = 0;  // days since 1970-01-01
    std::string serial_number;
    std::string model;
    std::optional<std::int64_t> capacity_bytes;
    int failure = 0;  // 0 or 1
    // Parallel to the attribute column list handed to parse_snapshots.
    std::vector<std::optional<double>> attributes;
};

// A device's date-sorted event matrix. If the device failed, the failure
// snapshot is the final row.
struct DeviceHistory {
    std::string serial_number;
    std::string model;
    std::vector<std::int32_t> dates;  // strictly increasing
    Matrix values;                    // T_total x F, no missing entries
    bool failed = false;
    std::size_t failure_index = 0;  // last row index when failed

    std::size_t length() const { return dates.size(); }
    std::size_t lifetime_days() const {
        return dates.empty() ? 0 : static_cast<std::size_t>(dates.back() - dates.front()) + 1;
    }
};

struct ParseReport {
    std::uint64_t rows_total = 0;
    std::uint64_t rows_skipped = 0;
    std::uint64_t absent_cells = 0;
    std::uint64_t duplicate_pairs = 0;
    std::uint64_t rows_after_failure = 0;
    std::uint64_t devices = 0;
    std::uint64_t failed_devices = 0;

    std::string to_json() const;
};

// Required leading columns of the daily-snapshot layout.
extern const std::vector<std::string> kRequiredColumns;

// Table 1 SMART ids; the default attribute set takes both the raw and the
// normalized column for each id.
extern const std::vector<int> kDefaultSmartIds;
std::vector<std::string> default_attribute_columns();

// The default set restricted to columns the header actually provides.
std::vector<std::string> select_attribute_columns(const std::vector<std::string>& header_columns);

// Streams records out of a daily-snapshot CSV. The header must contain the
// required columns; requested attribute columns may be missing (their cells
// come back absent). Malformed rows are skipped and counted.
void parse_snapshots(std::istream& csv, const std::vector<std::string>& attribute_columns,
                     ParseReport& report, const std::function<void(SnapshotRecord&&)>& sink);

std::vector<SnapshotRecord> parse_snapshots(std::istream& csv,
                                            const std::vector<std::string>& attribute_columns,
                                            ParseReport& report);

// Groups records by serial, sorts by date, keeps the last record of any
// duplicate (serial, date), replaces absent values with zero and drops rows
// past the first failure flag. Output is sorted by serial.
std::vector<DeviceHistory> assemble_histories(std::vector<SnapshotRecord> records,
                                              std::size_t attribute_count, ParseReport& report);

// Per-attribute min-max scaling to [0, 1] with clipping. Fit on the training
// corpus and persisted with the model.
class Normalizer {
public:
    Normalizer() = default;

    static Normalizer fit(const std::vector<DeviceHistory>& histories);
    static Normalizer fit_matrices(const std::vector<const Matrix*>& matrices);

    Matrix apply(const Matrix& m) const;

    std::size_t attribute_count() const { return ranges_.size(); }
    std::pair<double, double> range(std::size_t i) const { return ranges_[i]; }
    // Constant columns map to 0 everywhere.
    bool degenerate(std::size_t i) const { return ranges_[i].first >= ranges_[i].second; }

    const std::vector<std::pair<double, double>>& ranges() const { return ranges_; }
    void set_ranges(std::vector<std::pair<double, double>> ranges) { ranges_ = std::move(ranges); }

private:
    std::vector<std::pair<double, double>> ranges_;
};

// Corpus container: attribute names plus per-device histories.
struct Corpus {
    std::vector<std::string> attribute_columns;
    std::vector<DeviceHistory> devices;

    std::size_t failed_count() const;
};

void save_corpus(const Corpus& corpus, const std::string& path);
Corpus load_corpus(const std::string& path);

}  // namespace prefail
