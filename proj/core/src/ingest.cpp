#include "prefail/ingest.hpp"

#include <algorithm>
#include <cerrno>
#include <cstdlib>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

#include "prefail/binary_io.hpp"
#include "prefail/date.hpp"

namespace prefail {

const std::vector<std::string> kRequiredColumns = {"date", "serial_number", "model",
                                                   "capacity_bytes", "failure"};

const std::vector<int> kDefaultSmartIds = {1,   4,   5,   7,   9,   10,  12,  183, 184, 187, 188,
                                           189, 190, 191, 192, 193, 194, 197, 198, 199, 240, 241};

std::vector<std::string> default_attribute_columns() {
    std::vector<std::string> columns;
    for (int id : kDefaultSmartIds) {
        columns.push_back("smart_" + std::to_string(id) + "_normalized");
        columns.push_back("smart_" + std::to_string(id) + "_raw");
    }
    return columns;
}

std::vector<std::string> select_attribute_columns(const std::vector<std::string>& header_columns) {
    std::vector<std::string> selected;
    for (const auto& column : default_attribute_columns()) {
        if (std::find(header_columns.begin(), header_columns.end(), column) != header_columns.end()) {
            selected.push_back(column);
        }
    }
    return selected;
}

namespace {

// Splits one CSV line. Handles quoted fields with doubled quotes; embedded
// newlines are not part of the snapshot layout.
std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string field;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    field += '"';
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                field += c;
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            fields.push_back(std::move(field));
            field.clear();
        } else if (c != '\r') {
            field += c;
        }
    }
    fields.push_back(std::move(field));
    return fields;
}

std::optional<double> parse_cell(const std::string& text) {
    if (text.empty()) return std::nullopt;
    errno = 0;
    char* end = nullptr;
    const double v = std::strtod(text.c_str(), &end);
    if (end != text.c_str() + text.size() || errno == ERANGE || !std::isfinite(v)) return std::nullopt;
    return v;
}

}  // namespace

void parse_snapshots(std::istream& csv, const std::vector<std::string>& attribute_columns,
                     ParseReport& report, const std::function<void(SnapshotRecord&&)>& sink) {
    std::string line;
    if (!std::getline(csv, line)) throw std::runtime_error("csv: empty input, header row required");
    const auto header = split_csv_line(line);

    std::vector<std::size_t> required_idx;
    for (const auto& name : kRequiredColumns) {
        const auto it = std::find(header.begin(), header.end(), name);
        if (it == header.end()) throw std::runtime_error("csv: header missing required column '" + name + "'");
        required_idx.push_back(static_cast<std::size_t>(it - header.begin()));
    }

    // Missing attribute columns are allowed and yield absent values.
    std::vector<std::ptrdiff_t> attr_idx;
    for (const auto& name : attribute_columns) {
        const auto it = std::find(header.begin(), header.end(), name);
        attr_idx.push_back(it == header.end() ? -1 : it - header.begin());
    }

    while (std::getline(csv, line)) {
        if (line.empty() || line == "\r") continue;
        ++report.rows_total;
        const auto fields = split_csv_line(line);

        std::size_t max_required = 0;
        for (std::size_t idx : required_idx) max_required = std::max(max_required, idx);
        if (fields.size() <= max_required) {
            ++report.rows_skipped;
            continue;
        }

        SnapshotRecord record;
        if (!parse_date(fields[required_idx[0]], record.date)) {
            ++report.rows_skipped;
            continue;
        }
        record.serial_number = fields[required_idx[1]];
        record.model = fields[required_idx[2]];
        if (record.serial_number.empty()) {
            ++report.rows_skipped;
            continue;
        }

        const std::string& capacity = fields[required_idx[3]];
        if (!capacity.empty()) {
            errno = 0;
            char* end = nullptr;
            const long long v = std::strtoll(capacity.c_str(), &end, 10);
            if (end == capacity.c_str() + capacity.size() && errno != ERANGE) record.capacity_bytes = v;
        }

        const std::string& failure = fields[required_idx[4]];
        if (failure == "0") {
            record.failure = 0;
        } else if (failure == "1") {
            record.failure = 1;
        } else {
            ++report.rows_skipped;
            continue;
        }

        record.attributes.resize(attr_idx.size());
        for (std::size_t a = 0; a < attr_idx.size(); ++a) {
            const std::ptrdiff_t idx = attr_idx[a];
            if (idx >= 0 && static_cast<std::size_t>(idx) < fields.size()) {
                record.attributes[a] = parse_cell(fields[static_cast<std::size_t>(idx)]);
            }
            if (!record.attributes[a]) ++report.absent_cells;
        }
        sink(std::move(record));
    }
}

std::vector<SnapshotRecord> parse_snapshots(std::istream& csv,
                                            const std::vector<std::string>& attribute_columns,
                                            ParseReport& report) {
    std::vector<SnapshotRecord> records;
    parse_snapshots(csv, attribute_columns, report,
                    [&records](SnapshotRecord&& r) { records.push_back(std::move(r)); });
    return records;
}

std::vector<DeviceHistory> assemble_histories(std::vector<SnapshotRecord> records,
                                              std::size_t attribute_count, ParseReport& report) {
    // Ordered map so corpus output is byte-stable regardless of input order.
    std::map<std::string, std::vector<SnapshotRecord>> by_serial;
    for (auto& record : records) by_serial[record.serial_number].push_back(std::move(record));
    records.clear();

    std::vector<DeviceHistory> histories;
    histories.reserve(by_serial.size());
    for (auto& [serial, rows] : by_serial) {
        // Stable sort keeps input order within a date, so the last occurrence
        // of a duplicate (serial, date) wins.
        std::stable_sort(rows.begin(), rows.end(),
                         [](const SnapshotRecord& a, const SnapshotRecord& b) { return a.date < b.date; });
        std::vector<const SnapshotRecord*> kept;
        for (const auto& row : rows) {
            if (!kept.empty() && kept.back()->date == row.date) {
                kept.back() = &row;
                ++report.duplicate_pairs;
            } else {
                kept.push_back(&row);
            }
        }

        // The failure snapshot is the terminal event; stray later rows are dropped.
        std::size_t end = kept.size();
        bool failed = false;
        for (std::size_t i = 0; i < kept.size(); ++i) {
            if (kept[i]->failure == 1) {
                failed = true;
                report.rows_after_failure += kept.size() - i - 1;
                end = i + 1;
                break;
            }
        }

        DeviceHistory history;
        history.serial_number = serial;
        history.model = kept.empty() ? "" : kept[end - 1]->model;
        history.failed = failed;
        history.dates.reserve(end);
        history.values = Matrix(end, attribute_count);
        for (std::size_t i = 0; i < end; ++i) {
            history.dates.push_back(kept[i]->date);
            for (std::size_t a = 0; a < attribute_count && a < kept[i]->attributes.size(); ++a) {
                history.values(i, a) = kept[i]->attributes[a].value_or(0.0);
            }
        }
        if (failed) history.failure_index = end - 1;
        ++report.devices;
        if (failed) ++report.failed_devices;
        histories.push_back(std::move(history));
    }
    return histories;
}

std::string ParseReport::to_json() const {
    std::ostringstream out;
    out << "{\n"
        << "  \"rows_total\": " << rows_total << ",\n"
        << "  \"rows_skipped\": " << rows_skipped << ",\n"
        << "  \"absent_cells\": " << absent_cells << ",\n"
        << "  \"duplicate_pairs\": " << duplicate_pairs << ",\n"
        << "  \"rows_after_failure\": " << rows_after_failure << ",\n"
        << "  \"devices\": " << devices << ",\n"
        << "  \"failed_devices\": " << failed_devices << "\n"
        << "}\n";
    return out.str();
}

Normalizer Normalizer::fit(const std::vector<DeviceHistory>& histories) {
    if (histories.empty()) throw std::invalid_argument("normalizer: no histories to fit");
    std::vector<const Matrix*> matrices;
    matrices.reserve(histories.size());
    for (const auto& h : histories) matrices.push_back(&h.values);
    return fit_matrices(matrices);
}

Normalizer Normalizer::fit_matrices(const std::vector<const Matrix*>& matrices) {
    if (matrices.empty()) throw std::invalid_argument("normalizer: no data to fit");
    const std::size_t F = matrices.front()->cols();
    for (const auto* m : matrices) {
        if (m->cols() != F) throw std::invalid_argument("normalizer: inconsistent attribute counts");
    }

    Normalizer n;
    n.ranges_.assign(F, {0.0, 0.0});
    std::vector<bool> seen(F, false);
    for (const auto* m : matrices) {
        for (std::size_t t = 0; t < m->rows(); ++t) {
            for (std::size_t f = 0; f < F; ++f) {
                const double v = (*m)(t, f);
                if (!seen[f]) {
                    n.ranges_[f] = {v, v};
                    seen[f] = true;
                } else {
                    n.ranges_[f].first = std::min(n.ranges_[f].first, v);
                    n.ranges_[f].second = std::max(n.ranges_[f].second, v);
                }
            }
        }
    }
    return n;
}

Matrix Normalizer::apply(const Matrix& m) const {
    if (m.cols() != ranges_.size()) {
        throw std::invalid_argument("normalizer: matrix has " + std::to_string(m.cols()) +
                                    " attributes, fitted for " + std::to_string(ranges_.size()));
    }
    Matrix out(m.rows(), m.cols());
    for (std::size_t f = 0; f < m.cols(); ++f) {
        const auto [lo, hi] = ranges_[f];
        const double span = hi - lo;
        for (std::size_t t = 0; t < m.rows(); ++t) {
            if (span <= 0.0) {
                out(t, f) = 0.0;
            } else {
                double v = (m(t, f) - lo) / span;
                out(t, f) = v < 0.0 ? 0.0 : (v > 1.0 ? 1.0 : v);
            }
        }
    }
    return out;
}

std::size_t Corpus::failed_count() const {
    std::size_t n = 0;
    for (const auto& d : devices) n += d.failed ? 1 : 0;
    return n;
}

namespace {
constexpr char kCorpusMagic[8] = {'P', 'F', 'C', 'O', 'R', 'P', '0', '1'};
constexpr std::uint32_t kCorpusVersion = 1;
}  // namespace

void save_corpus(const Corpus& corpus, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open " + path + " for writing");

    io::write_magic(out, kCorpusMagic);
    io::write_u32(out, kCorpusVersion);
    io::write_u32(out, static_cast<std::uint32_t>(corpus.attribute_columns.size()));
    for (const auto& name : corpus.attribute_columns) io::write_string(out, name);

    io::write_u64(out, corpus.devices.size());
    for (const auto& d : corpus.devices) {
        io::write_string(out, d.serial_number);
        io::write_string(out, d.model);
        io::write_u8(out, d.failed ? 1 : 0);
        io::write_u64(out, d.dates.size());
        for (std::int32_t date : d.dates) io::write_i32(out, date);
        for (double v : d.values.data()) io::write_f64(out, v);
    }
    out.flush();
    if (!out) throw std::runtime_error("write failed: " + path);
}

Corpus load_corpus(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path);

    io::expect_magic(in, kCorpusMagic, "corpus");
    io::expect_version(in, kCorpusVersion, "corpus");

    Corpus corpus;
    const std::uint32_t F = io::read_u32(in);
    corpus.attribute_columns.reserve(F);
    for (std::uint32_t i = 0; i < F; ++i) corpus.attribute_columns.push_back(io::read_string(in));

    const std::uint64_t device_count = io::read_u64(in);
    corpus.devices.reserve(device_count);
    for (std::uint64_t i = 0; i < device_count; ++i) {
        DeviceHistory d;
        d.serial_number = io::read_string(in);
        d.model = io::read_string(in);
        d.failed = io::read_u8(in) != 0;
        const std::uint64_t T = io::read_u64(in);
        d.dates.reserve(T);
        for (std::uint64_t t = 0; t < T; ++t) d.dates.push_back(io::read_i32(in));
        d.values = Matrix(T, F);
        for (double& v : d.values.data()) v = io::read_f64(in);
        if (d.failed && T > 0) d.failure_index = T - 1;
        corpus.devices.push_back(std::move(d));
    }
    return corpus;
}

}  // namespace prefail
