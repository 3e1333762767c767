#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <filesystem>
#include <set>

#include "prefail/dataset.hpp"
#include "prefail/rng.hpp"

using namespace prefail;

namespace {

DeviceHistory make_history(const std::string& serial, std::size_t days, bool failed,
                           double base = 0.0) {
    DeviceHistory h;
    h.serial_number = serial;
    h.model = "M";
    h.failed = failed;
    h.dates.resize(days);
    h.values = Matrix(days, 2);
    for (std::size_t t = 0; t < days; ++t) {
        h.dates[t] = static_cast<std::int32_t>(t);
        h.values(t, 0) = base + static_cast<double>(t);
        h.values(t, 1) = base - static_cast<double>(t);
    }
    if (failed) h.failure_index = days - 1;
    return h;
}

std::vector<EventWindow> make_windows(std::size_t failed, std::size_t normal) {
    std::vector<EventWindow> windows;
    for (std::size_t i = 0; i < failed + normal; ++i) {
        EventWindow w;
        w.serial = "S" + std::to_string(i);
        w.label = i < failed ? 1 : 0;
        w.values = Matrix(5, 1, static_cast<double>(i));
        windows.push_back(std::move(w));
    }
    return windows;
}

}  // namespace

TEST_CASE("slice_window picks the most recent rows before the horizon") {
    // T_total = 20, T = 7, n = 10: rows 3..9 inclusive.
    const auto history = make_history("A", 20, true);
    WindowSpec spec;
    spec.window_length = 7;
    spec.horizon = 10;
    spec.turn_on_cutoff = 0;
    const auto window = slice_window(history, spec);
    REQUIRE(window.has_value());
    CHECK(window->label == 1);
    CHECK(window->values.rows() == 7);
    CHECK(window->values(0, 0) == 3.0);
    CHECK(window->values(6, 0) == 9.0);
}

TEST_CASE("slice_window skips devices with insufficient data") {
    const auto history = make_history("A", 16, false);
    WindowSpec spec;
    spec.window_length = 7;
    spec.horizon = 10;
    spec.turn_on_cutoff = 0;
    CHECK_FALSE(slice_window(history, spec).has_value());
}

TEST_CASE("slice_window with zero horizon and full-length window keeps everything") {
    const auto history = make_history("A", 12, false);
    WindowSpec spec;
    spec.window_length = 12;
    spec.horizon = 0;
    spec.turn_on_cutoff = 0;
    const auto window = slice_window(history, spec);
    REQUIRE(window.has_value());
    CHECK(window->values.rows() == 12);
    CHECK(window->values(0, 0) == 0.0);
    CHECK(window->values(11, 0) == 11.0);
}

TEST_CASE("slice_window applies the turn-on cutoff") {
    const auto history = make_history("A", 20, true);
    WindowSpec spec;
    spec.window_length = 5;
    spec.horizon = 0;
    spec.turn_on_cutoff = 30;
    CHECK_FALSE(slice_window(history, spec).has_value());
}

TEST_CASE("slice_window never overlaps the final horizon days") {
    Rng rng(17);
    for (int trial = 0; trial < 50; ++trial) {
        const std::size_t days = 10 + rng.next_below(60);
        const std::size_t T = 5 + rng.next_below(10);
        const std::size_t n = rng.next_below(20);
        const auto history = make_history("A", days, true);
        WindowSpec spec;
        spec.window_length = T;
        spec.horizon = n;
        spec.turn_on_cutoff = 0;
        const auto window = slice_window(history, spec);
        if (days < T + n) {
            CHECK_FALSE(window.has_value());
        } else {
            REQUIRE(window.has_value());
            // Last value in the window is row T_total - 1 - n.
            CHECK(window->values(T - 1, 0) == static_cast<double>(days - 1 - n));
        }
    }
}

TEST_CASE("slice_windows counts skips") {
    std::vector<DeviceHistory> histories = {make_history("A", 40, true), make_history("B", 10, false),
                                            make_history("C", 40, false)};
    WindowSpec spec;
    spec.window_length = 20;
    spec.horizon = 0;
    spec.turn_on_cutoff = 30;
    SliceStats stats;
    const auto windows = slice_windows(histories, spec, &stats);
    CHECK(windows.size() == 2);
    CHECK(stats.kept == 2);
    CHECK(stats.skipped_short == 1);
}

TEST_CASE("balance_sample keeps all failed and samples equal normals") {
    auto windows = make_windows(100, 900);
    const auto balanced = balance_sample(windows, 7);
    CHECK(balanced.size() == 200);
    std::size_t failed = 0;
    for (const auto& w : balanced) failed += w.label;
    CHECK(failed == 100);
    // All failed serials retained.
    std::set<std::string> serials;
    for (const auto& w : balanced) serials.insert(w.serial);
    for (std::size_t i = 0; i < 100; ++i) CHECK(serials.count("S" + std::to_string(i)) == 1);
}

TEST_CASE("balance_sample leaves an already balanced set unchanged") {
    auto windows = make_windows(50, 50);
    const auto balanced = balance_sample(windows, 7);
    CHECK(balanced.size() == 100);
}

TEST_CASE("balance_sample is deterministic in the seed") {
    const auto a = balance_sample(make_windows(10, 90), 42);
    const auto b = balance_sample(make_windows(10, 90), 42);
    const auto c = balance_sample(make_windows(10, 90), 43);
    REQUIRE(a.size() == b.size());
    bool same = true, same_other_seed = true;
    for (std::size_t i = 0; i < a.size(); ++i) {
        same = same && a[i].serial == b[i].serial;
        same_other_seed = same_other_seed && a[i].serial == c[i].serial;
    }
    CHECK(same);
    CHECK_FALSE(same_other_seed);
}

TEST_CASE("balance_sample requires failed windows") {
    CHECK_THROWS_AS(balance_sample(make_windows(0, 10), 1), std::invalid_argument);
}

TEST_CASE("split is stratified and preserves the class ratio") {
    // 200 windows at fraction 0.25: 150 train / 50 test with the ratio kept.
    auto windows = make_windows(100, 100);
    const auto [train, test] = split_windows(std::move(windows), 0.25, 3);
    CHECK(train.size() == 150);
    CHECK(test.size() == 50);
    std::size_t train_failed = 0, test_failed = 0;
    for (const auto& w : train) train_failed += w.label;
    for (const auto& w : test) test_failed += w.label;
    CHECK(train_failed == 75);
    CHECK(test_failed == 25);
}

TEST_CASE("split of 2+2 at fraction 0.5 gives 1+1 per side per class") {
    const auto [train, test] = split_windows(make_windows(2, 2), 0.5, 9);
    CHECK(train.size() == 2);
    CHECK(test.size() == 2);
    std::size_t train_failed = 0, test_failed = 0;
    for (const auto& w : train) train_failed += w.label;
    for (const auto& w : test) test_failed += w.label;
    CHECK(train_failed == 1);
    CHECK(test_failed == 1);
}

TEST_CASE("split sides are disjoint by serial and cover the input") {
    auto windows = make_windows(20, 20);
    const auto [train, test] = split_windows(std::move(windows), 0.3, 5);
    std::set<std::string> train_serials, test_serials;
    for (const auto& w : train) train_serials.insert(w.serial);
    for (const auto& w : test) test_serials.insert(w.serial);
    for (const auto& s : test_serials) CHECK(train_serials.count(s) == 0);
    CHECK(train_serials.size() + test_serials.size() == 40);
}

TEST_CASE("split is deterministic in the seed") {
    const auto [train_a, test_a] = split_windows(make_windows(10, 10), 0.5, 77);
    const auto [train_b, test_b] = split_windows(make_windows(10, 10), 0.5, 77);
    REQUIRE(train_a.size() == train_b.size());
    for (std::size_t i = 0; i < train_a.size(); ++i) CHECK(train_a[i].serial == train_b[i].serial);
}

TEST_CASE("split rejects bad fractions and tiny classes") {
    CHECK_THROWS_AS(split_windows(make_windows(5, 5), 0.0, 1), std::invalid_argument);
    CHECK_THROWS_AS(split_windows(make_windows(5, 5), 1.0, 1), std::invalid_argument);
    CHECK_THROWS_AS(split_windows(make_windows(1, 5), 0.5, 1), std::invalid_argument);
}

TEST_CASE("window spec enforces the kernel-compatible minimum") {
    WindowSpec spec;
    spec.window_length = 4;
    CHECK_THROWS_AS(spec.validate(), std::invalid_argument);
}

TEST_CASE("dataset container round-trips") {
    Dataset dataset;
    dataset.window_spec.window_length = 6;
    dataset.window_spec.horizon = 2;
    dataset.window_spec.turn_on_cutoff = 10;
    dataset.stack_config = StackConfig::all();
    dataset.stack_config.cusum_init_period = 2;
    dataset.attribute_columns = {"smart_1_raw", "smart_2_raw"};

    Rng rng(13);
    Matrix values(6, 2);
    for (double& v : values.data()) v = rng.next_double(0, 1);
    DeviceHistory fit_source;
    fit_source.values = values;
    dataset.normalizer = Normalizer::fit({fit_source});

    DatasetEntry entry;
    entry.serial = "X";
    entry.label = 1;
    entry.stack = build_feature_stack(values, dataset.stack_config);
    dataset.entries.push_back(std::move(entry));

    const std::string path = (std::filesystem::temp_directory_path() / "prefail_dataset_test.bin").string();
    save_dataset(dataset, path);
    const Dataset loaded = load_dataset(path);
    std::filesystem::remove(path);

    CHECK(loaded.window_spec.window_length == 6);
    CHECK(loaded.window_spec.horizon == 2);
    CHECK(loaded.stack_config.enabled == dataset.stack_config.enabled);
    CHECK(loaded.attribute_columns == dataset.attribute_columns);
    REQUIRE(loaded.entries.size() == 1);
    CHECK(loaded.entries[0].serial == "X");
    CHECK(loaded.entries[0].label == 1);
    REQUIRE(loaded.entries[0].stack.channels.size() == dataset.entries[0].stack.channels.size());
    for (std::size_t c = 0; c < loaded.entries[0].stack.channels.size(); ++c) {
        CHECK(loaded.entries[0].stack.channels[c].second == dataset.entries[0].stack.channels[c].second);
    }
    CHECK(loaded.normalizer.ranges() == dataset.normalizer.ranges());
}
