#include "prefail/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

#include "prefail/binary_io.hpp"
#include "prefail/rng.hpp"

namespace prefail {

void WindowSpec::validate() const {
    // The blur kernel needs 5 samples, nothing in the stack needs more.
    if (window_length < 5) throw std::invalid_argument("window_length: must be at least 5");
}

std::optional<EventWindow> slice_window(const DeviceHistory& history, const WindowSpec& spec) {
    spec.validate();
    const std::size_t T = spec.window_length;
    const std::size_t n = spec.horizon;
    if (history.length() < T + n) return std::nullopt;
    if (history.lifetime_days() < spec.turn_on_cutoff) return std::nullopt;

    const std::size_t last_usable = history.length() - 1 - n;
    const std::size_t first = last_usable + 1 - T;

    EventWindow window;
    window.serial = history.serial_number;
    window.label = history.failed ? 1 : 0;
    window.values = Matrix(T, history.values.cols());
    for (std::size_t t = 0; t < T; ++t) {
        for (std::size_t f = 0; f < history.values.cols(); ++f) {
            window.values(t, f) = history.values(first + t, f);
        }
    }
    return window;
}

std::vector<EventWindow> slice_windows(const std::vector<DeviceHistory>& histories,
                                       const WindowSpec& spec, SliceStats* stats) {
    std::vector<EventWindow> windows;
    for (const auto& history : histories) {
        if (history.length() < spec.window_length + spec.horizon) {
            if (stats) ++stats->skipped_short;
            continue;
        }
        if (history.lifetime_days() < spec.turn_on_cutoff) {
            if (stats) ++stats->skipped_turn_on;
            continue;
        }
        auto window = slice_window(history, spec);
        if (window) {
            windows.push_back(std::move(*window));
            if (stats) ++stats->kept;
        }
    }
    return windows;
}

std::vector<EventWindow> balance_sample(std::vector<EventWindow> windows, std::uint64_t seed) {
    std::vector<std::size_t> failed, normal;
    for (std::size_t i = 0; i < windows.size(); ++i) {
        (windows[i].label == 1 ? failed : normal).push_back(i);
    }
    if (failed.empty()) throw std::invalid_argument("balance_sample: no failed windows");
    if (normal.size() < failed.size()) {
        throw std::invalid_argument("balance_sample: fewer normal windows (" +
                                    std::to_string(normal.size()) + ") than failed (" +
                                    std::to_string(failed.size()) + ")");
    }

    Rng rng(seed);
    rng.shuffle(normal);
    normal.resize(failed.size());
    std::sort(normal.begin(), normal.end());

    std::vector<EventWindow> balanced;
    balanced.reserve(2 * failed.size());
    for (std::size_t i : failed) balanced.push_back(std::move(windows[i]));
    for (std::size_t i : normal) balanced.push_back(std::move(windows[i]));
    return balanced;
}

std::pair<std::vector<EventWindow>, std::vector<EventWindow>> split_windows(
    std::vector<EventWindow> windows, double test_fraction, std::uint64_t seed) {
    if (!(test_fraction > 0.0 && test_fraction < 1.0)) {
        throw std::invalid_argument("test_fraction: must be in (0, 1)");
    }

    std::vector<std::size_t> classes[2];
    for (std::size_t i = 0; i < windows.size(); ++i) {
        classes[windows[i].label == 1 ? 1 : 0].push_back(i);
    }
    for (const auto& members : classes) {
        if (members.size() < 2) {
            throw std::invalid_argument("split: each class needs at least 2 members");
        }
    }

    std::vector<bool> in_test(windows.size(), false);
    for (int label = 0; label < 2; ++label) {
        auto members = classes[label];
        Rng rng(derive_seed(seed, static_cast<std::uint64_t>(label)));
        rng.shuffle(members);
        std::size_t test_count = static_cast<std::size_t>(
            std::llround(static_cast<double>(members.size()) * test_fraction));
        test_count = std::clamp<std::size_t>(test_count, 1, members.size() - 1);
        for (std::size_t i = 0; i < test_count; ++i) in_test[members[i]] = true;
    }

    std::vector<EventWindow> train, test;
    for (std::size_t i = 0; i < windows.size(); ++i) {
        (in_test[i] ? test : train).push_back(std::move(windows[i]));
    }
    return {std::move(train), std::move(test)};
}

namespace io_detail {

void write_window_spec(std::ostream& out, const WindowSpec& spec) {
    io::write_u32(out, static_cast<std::uint32_t>(spec.window_length));
    io::write_u32(out, static_cast<std::uint32_t>(spec.horizon));
    io::write_u32(out, static_cast<std::uint32_t>(spec.turn_on_cutoff));
}

WindowSpec read_window_spec(std::istream& in) {
    WindowSpec spec;
    spec.window_length = io::read_u32(in);
    spec.horizon = io::read_u32(in);
    spec.turn_on_cutoff = io::read_u32(in);
    return spec;
}

void write_stack_config(std::ostream& out, const StackConfig& config) {
    io::write_u32(out, static_cast<std::uint32_t>(config.enabled.size()));
    for (FeatureId id : config.enabled) io::write_u32(out, static_cast<std::uint32_t>(id));
    io::write_u32(out, static_cast<std::uint32_t>(config.cusum_init_period));
    io::write_f64(out, config.cusum_slack);
    io::write_u8(out, config.wide_edge_kernel ? 1 : 0);
}

StackConfig read_stack_config(std::istream& in) {
    StackConfig config;
    const std::uint32_t n = io::read_u32(in);
    for (std::uint32_t i = 0; i < n; ++i) {
        const std::uint32_t raw = io::read_u32(in);
        if (raw >= kFeatureIdCount) throw std::runtime_error("stack config: unknown feature id");
        config.enabled.push_back(static_cast<FeatureId>(raw));
    }
    config.cusum_init_period = io::read_u32(in);
    config.cusum_slack = io::read_f64(in);
    config.wide_edge_kernel = io::read_u8(in) != 0;
    return config;
}

void write_normalizer(std::ostream& out, const Normalizer& normalizer) {
    io::write_u32(out, static_cast<std::uint32_t>(normalizer.attribute_count()));
    for (const auto& [lo, hi] : normalizer.ranges()) {
        io::write_f64(out, lo);
        io::write_f64(out, hi);
    }
}

Normalizer read_normalizer(std::istream& in) {
    const std::uint32_t n = io::read_u32(in);
    std::vector<std::pair<double, double>> ranges(n);
    for (auto& [lo, hi] : ranges) {
        lo = io::read_f64(in);
        hi = io::read_f64(in);
    }
    Normalizer normalizer;
    normalizer.set_ranges(std::move(ranges));
    return normalizer;
}

void write_matrix(std::ostream& out, const Matrix& m) {
    io::write_u32(out, static_cast<std::uint32_t>(m.rows()));
    io::write_u32(out, static_cast<std::uint32_t>(m.cols()));
    for (double v : m.data()) io::write_f64(out, v);
}

Matrix read_matrix(std::istream& in) {
    const std::uint32_t rows = io::read_u32(in);
    const std::uint32_t cols = io::read_u32(in);
    Matrix m(rows, cols);
    for (double& v : m.data()) v = io::read_f64(in);
    return m;
}

}  // namespace io_detail

namespace {
constexpr char kDatasetMagic[8] = {'P', 'F', 'D', 'S', 'E', 'T', '0', '1'};
constexpr std::uint32_t kDatasetVersion = 1;
}  // namespace

void save_dataset(const Dataset& dataset, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open " + path + " for writing");

    io::write_magic(out, kDatasetMagic);
    io::write_u32(out, kDatasetVersion);
    io_detail::write_window_spec(out, dataset.window_spec);
    io_detail::write_stack_config(out, dataset.stack_config);
    io_detail::write_normalizer(out, dataset.normalizer);
    io::write_u32(out, static_cast<std::uint32_t>(dataset.attribute_columns.size()));
    for (const auto& name : dataset.attribute_columns) io::write_string(out, name);

    io::write_u64(out, dataset.entries.size());
    for (const auto& entry : dataset.entries) {
        io::write_string(out, entry.serial);
        io::write_u8(out, static_cast<std::uint8_t>(entry.label));
        io::write_u32(out, static_cast<std::uint32_t>(entry.stack.channels.size()));
        for (const auto& [id, m] : entry.stack.channels) {
            io::write_u32(out, static_cast<std::uint32_t>(id));
            io_detail::write_matrix(out, m);
        }
    }
    out.flush();
    if (!out) throw std::runtime_error("write failed: " + path);
}

Dataset load_dataset(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path);

    io::expect_magic(in, kDatasetMagic, "dataset");
    io::expect_version(in, kDatasetVersion, "dataset");

    Dataset dataset;
    dataset.window_spec = io_detail::read_window_spec(in);
    dataset.stack_config = io_detail::read_stack_config(in);
    dataset.normalizer = io_detail::read_normalizer(in);
    const std::uint32_t A = io::read_u32(in);
    for (std::uint32_t i = 0; i < A; ++i) dataset.attribute_columns.push_back(io::read_string(in));

    const std::uint64_t count = io::read_u64(in);
    dataset.entries.reserve(count);
    for (std::uint64_t i = 0; i < count; ++i) {
        DatasetEntry entry;
        entry.serial = io::read_string(in);
        entry.label = io::read_u8(in);
        const std::uint32_t channels = io::read_u32(in);
        for (std::uint32_t c = 0; c < channels; ++c) {
            const std::uint32_t raw = io::read_u32(in);
            if (raw >= kFeatureIdCount) throw std::runtime_error("dataset: unknown feature id");
            entry.stack.channels.emplace_back(static_cast<FeatureId>(raw), io_detail::read_matrix(in));
        }
        dataset.entries.push_back(std::move(entry));
    }
    return dataset;
}

}  // namespace prefail
