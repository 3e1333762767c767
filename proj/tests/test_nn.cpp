#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "prefail/nn.hpp"
#include "prefail/rng.hpp"

using namespace prefail;

namespace {

ModelConfig tiny_config() {
    ModelConfig config;
    config.input_channels = 2;
    config.input_length = 10;
    config.conv1_filters = 4;
    config.conv2_filters = 4;
    config.pool_width = 2;
    config.dense_width = 6;
    return config;
}

// Two linearly separable clusters: class 1 sits high, class 0 sits low.
std::vector<TrainInstance> separable_toy(const ModelConfig& config, std::size_t per_class,
                                         std::uint64_t seed) {
    Rng rng(seed);
    std::vector<TrainInstance> instances;
    for (std::size_t i = 0; i < 2 * per_class; ++i) {
        TrainInstance inst;
        inst.label = i < per_class ? 1 : 0;
        const double level = inst.label == 1 ? 0.8 : -0.8;
        inst.input.resize(config.input_size());
        for (double& v : inst.input) v = level + rng.next_double(-0.1, 0.1);
        instances.push_back(std::move(inst));
    }
    return instances;
}

Classifier zero_classifier(const ModelConfig& config) {
    Classifier model;
    model.config = config;
    model.conv1_w.assign(config.conv1_filters * config.input_channels * config.conv1_kernel, 0.0);
    model.conv1_b.assign(config.conv1_filters, 0.0);
    model.conv2_w.assign(config.conv2_filters * config.conv1_filters * config.conv2_kernel, 0.0);
    model.conv2_b.assign(config.conv2_filters, 0.0);
    model.dense1_w.assign(config.dense_width * config.flat_size(), 0.0);
    model.dense1_b.assign(config.dense_width, 0.0);
    model.dense2_w.assign(config.classes * config.dense_width, 0.0);
    model.dense2_b.assign(config.classes, 0.0);
    return model;
}

}  // namespace

TEST_CASE("conv1d_forward computes valid cross-correlation") {
    // input [1,2,3,4], kernel [1,0,-1]: dot products -2, -2.
    const auto out = conv1d_forward({1, 2, 3, 4}, 1, 4, {1, 0, -1}, 1, 3, {0});
    CHECK(out == std::vector<double>{-2, -2});
}

TEST_CASE("conv1d_forward with the identity kernel returns the input") {
    const std::vector<double> input = {3, -1, 2, 7};
    const auto out = conv1d_forward(input, 1, 4, {1}, 1, 1, {0});
    CHECK(out == input);
}

TEST_CASE("conv1d_forward with zero kernels returns the bias") {
    const auto out = conv1d_forward({1, 2, 3, 4}, 1, 4, {0, 0}, 1, 2, {2.5});
    CHECK(out == std::vector<double>{2.5, 2.5, 2.5});
}

TEST_CASE("conv1d_forward rejects an input shorter than the kernel") {
    CHECK_THROWS_AS(conv1d_forward({1, 2}, 1, 2, {1, 0, -1}, 1, 3, {0}), std::invalid_argument);
}

TEST_CASE("conv1d_forward is translation consistent on the interior") {
    Rng rng(31);
    std::vector<double> series(12), kernels(3), bias = {0.3};
    for (double& v : series) v = rng.next_double(-1, 1);
    for (double& v : kernels) v = rng.next_double(-1, 1);
    const std::vector<double> base(series.begin(), series.begin() + 11);
    const std::vector<double> shifted(series.begin() + 1, series.end());
    const auto out_base = conv1d_forward(base, 1, 11, kernels, 1, 3, bias);
    const auto out_shifted = conv1d_forward(shifted, 1, 11, kernels, 1, 3, bias);
    for (std::size_t t = 0; t + 1 < out_base.size(); ++t) {
        CHECK(out_base[t + 1] == doctest::Approx(out_shifted[t]).epsilon(1e-15));
    }
}

TEST_CASE("maxpool1d examples") {
    CHECK(maxpool1d({1, 3, 2, 5}, 1, 4, 2) == std::vector<double>{3, 5});
    CHECK(maxpool1d({2, 2, 2, 2}, 1, 4, 2) == std::vector<double>{2, 2});
    // Trailing remainder is dropped.
    CHECK(maxpool1d({4, 1, 1, 1, 9}, 1, 5, 2) == std::vector<double>{4, 1});
}

TEST_CASE("model config validation catches impossible shapes") {
    ModelConfig config = tiny_config();
    config.input_length = 4;  // conv1 -> 2, conv2 -> 0
    CHECK_THROWS_AS(config.validate(), std::invalid_argument);
    config = tiny_config();
    config.pool_width = 10;
    CHECK_THROWS_AS(config.validate(), std::invalid_argument);
    CHECK_NOTHROW(tiny_config().validate());
}

TEST_CASE("forward with all-zero weights yields the uniform distribution") {
    const auto model = zero_classifier(tiny_config());
    const auto probs = forward(model, std::vector<double>(model.config.input_size(), 0.7));
    REQUIRE(probs.size() == 2);
    CHECK(probs[0] == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(probs[1] == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("softmax of logits [ln 2, 0] is [2/3, 1/3]") {
    auto model = zero_classifier(tiny_config());
    model.dense2_b = {std::log(2.0), 0.0};
    const auto probs = forward(model, std::vector<double>(model.config.input_size(), 0.0));
    CHECK(probs[0] == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
    CHECK(probs[1] == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
}

TEST_CASE("forward outputs sum to one for random inputs") {
    ModelConfig config = tiny_config();
    Rng rng(41);
    auto instances = separable_toy(config, 4, 2);
    TrainConfig tc;
    tc.epochs = 2;
    tc.seed = 11;
    const auto model = train(config, tc, instances);
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<double> input(config.input_size());
        for (double& v : input) v = rng.next_double(-3, 3);
        const auto probs = forward(model, input);
        double sum = 0.0;
        for (double p : probs) {
            CHECK(p > 0.0);
            CHECK(p < 1.0);
            sum += p;
        }
        CHECK(std::abs(sum - 1.0) < 1e-9);
    }
}

TEST_CASE("forward rejects shape mismatches") {
    const auto model = zero_classifier(tiny_config());
    CHECK_THROWS_AS(forward(model, std::vector<double>(3, 0.0)), std::invalid_argument);
}

TEST_CASE("cross entropy examples") {
    CHECK(cross_entropy({0.5, 0.5}, 0) == doctest::Approx(std::log(2.0)).epsilon(1e-12));
    // Clamped at p >= 1e-12, so a perfect or degenerate prediction stays finite.
    CHECK(std::isfinite(cross_entropy({1.0, 0.0}, 1)));
    CHECK(cross_entropy({1.0, 0.0}, 1) == doctest::Approx(-std::log(1e-12)));
    CHECK(cross_entropy({1.0 - 1e-15, 1e-15}, 0) == doctest::Approx(0.0).epsilon(1e-9));
    CHECK_THROWS_AS(cross_entropy({0.5, 0.5}, 2), std::invalid_argument);
}

TEST_CASE("predict breaks exact ties toward the failure class") {
    const auto model = zero_classifier(tiny_config());
    const auto prediction = predict(model, std::vector<double>(model.config.input_size(), 0.0));
    CHECK(prediction.label == 1);  // uniform probabilities tie
}

TEST_CASE("training separates a linearly separable toy within 200 epochs") {
    const ModelConfig config = tiny_config();
    const auto instances = separable_toy(config, 16, 5);
    TrainConfig tc;
    tc.epochs = 200;
    tc.batch_size = 8;
    tc.learning_rate = 1e-3;
    tc.seed = 7;
    const auto model = train(config, tc, instances);
    std::size_t correct = 0;
    for (const auto& inst : instances) {
        correct += predict(model, inst.input).label == inst.label ? 1 : 0;
    }
    CHECK(correct == instances.size());
}

TEST_CASE("full-batch SGD loss is non-increasing on the separable toy") {
    const ModelConfig config = tiny_config();
    const auto instances = separable_toy(config, 8, 3);
    TrainConfig tc;
    tc.epochs = 40;
    tc.batch_size = instances.size();
    tc.learning_rate = 0.01;
    tc.optimizer = OptimizerKind::Sgd;
    tc.plateau_patience = 0;
    tc.seed = 13;
    const auto model = train(config, tc, instances);
    REQUIRE(model.loss_curve.size() == 40);
    for (std::size_t i = 1; i < model.loss_curve.size(); ++i) {
        CHECK(model.loss_curve[i] <= model.loss_curve[i - 1] + 1e-6);
    }
}

TEST_CASE("training is deterministic given the seed") {
    const ModelConfig config = tiny_config();
    const auto instances = separable_toy(config, 8, 9);
    TrainConfig tc;
    tc.epochs = 5;
    tc.seed = 1234;
    const auto a = train(config, tc, instances);
    const auto b = train(config, tc, instances);
    CHECK(a.conv1_w == b.conv1_w);
    CHECK(a.conv2_w == b.conv2_w);
    CHECK(a.dense1_w == b.dense1_w);
    CHECK(a.dense2_w == b.dense2_w);
    CHECK(a.loss_curve == b.loss_curve);
}

TEST_CASE("training rejects zero epochs and empty data") {
    const ModelConfig config = tiny_config();
    const auto instances = separable_toy(config, 4, 9);
    TrainConfig tc;
    tc.epochs = 0;
    CHECK_THROWS_AS(train(config, tc, instances), std::invalid_argument);
    tc.epochs = 1;
    CHECK_THROWS_AS(train(config, tc, {}), std::invalid_argument);
}

TEST_CASE("training reports divergence instead of emitting garbage") {
    const ModelConfig config = tiny_config();
    const auto instances = separable_toy(config, 8, 21);
    TrainConfig tc;
    tc.epochs = 50;
    tc.learning_rate = 1e308;
    tc.optimizer = OptimizerKind::Sgd;
    tc.plateau_patience = 0;
    tc.seed = 3;
    CHECK_THROWS_AS(train(config, tc, instances), std::runtime_error);
}

TEST_CASE("training handles all-zero inputs with the fixed ReLU subgradient") {
    const ModelConfig config = tiny_config();
    std::vector<TrainInstance> instances(4);
    for (std::size_t i = 0; i < instances.size(); ++i) {
        instances[i].input.assign(config.input_size(), 0.0);
        instances[i].label = static_cast<int>(i % 2);
    }
    TrainConfig tc;
    tc.epochs = 3;
    tc.seed = 5;
    const auto model = train(config, tc, instances);
    for (double loss : model.loss_curve) CHECK(std::isfinite(loss));
}

TEST_CASE("gradient check on the documented tiny configuration") {
    ModelConfig config;
    config.input_channels = 4;
    config.input_length = 12;
    config.conv1_filters = 3;
    config.conv2_filters = 3;
    config.dense_width = 5;
    config.pool_width = 2;
    const double err = gradient_check(config, 2024);
    CHECK(err < 1e-4);
}

TEST_CASE("gradient check is deterministic") {
    CHECK(gradient_check(tiny_config(), 55) == gradient_check(tiny_config(), 55));
}

TEST_CASE("model save/load round-trips bit-exactly") {
    const ModelConfig config = tiny_config();
    const auto instances = separable_toy(config, 6, 77);
    TrainConfig tc;
    tc.epochs = 3;
    tc.seed = 99;
    const auto model = train(config, tc, instances);

    PipelineConfig pipeline;
    pipeline.window_spec.window_length = 10;
    pipeline.stack_config = StackConfig::all();
    pipeline.attribute_columns = {"smart_1_raw"};
    Matrix fit(2, 1);
    fit(0, 0) = 0.0;
    fit(1, 0) = 2.0;
    pipeline.normalizer = Normalizer::fit_matrices({&fit});

    const std::string path = (std::filesystem::temp_directory_path() / "prefail_model_test.bin").string();
    save_classifier(model, path, &pipeline);
    std::optional<PipelineConfig> loaded_pipeline;
    const auto loaded = load_classifier(path, &loaded_pipeline);

    CHECK(loaded.conv1_w == model.conv1_w);
    CHECK(loaded.conv2_w == model.conv2_w);
    CHECK(loaded.dense1_w == model.dense1_w);
    CHECK(loaded.dense2_w == model.dense2_w);
    CHECK(loaded.loss_curve == model.loss_curve);
    CHECK(loaded.seed == model.seed);
    REQUIRE(loaded_pipeline.has_value());
    CHECK(loaded_pipeline->window_spec.window_length == 10);
    CHECK(loaded_pipeline->attribute_columns == pipeline.attribute_columns);
    CHECK(loaded_pipeline->normalizer.ranges() == pipeline.normalizer.ranges());

    // Same forward outputs, bit for bit.
    std::vector<double> input(config.input_size(), 0.25);
    CHECK(forward(model, input) == forward(loaded, input));

    std::filesystem::remove(path);
}

TEST_CASE("model load rejects a version mismatch") {
    const ModelConfig config = tiny_config();
    const auto model = zero_classifier(config);
    const std::string path = (std::filesystem::temp_directory_path() / "prefail_model_vers.bin").string();
    save_classifier(model, path);
    {
        std::fstream file(path, std::ios::in | std::ios::out | std::ios::binary);
        file.seekp(8);  // version field follows the 8-byte magic
        const char bogus[4] = {99, 0, 0, 0};
        file.write(bogus, 4);
    }
    CHECK_THROWS_WITH_AS(static_cast<void>(load_classifier(path)),
                         doctest::Contains("version mismatch"), std::runtime_error);
    std::filesystem::remove(path);
}

TEST_CASE("model load rejects a truncated file") {
    const ModelConfig config = tiny_config();
    const auto model = zero_classifier(config);
    const std::string path = (std::filesystem::temp_directory_path() / "prefail_model_trunc.bin").string();
    save_classifier(model, path);
    const auto size = std::filesystem::file_size(path);
    std::filesystem::resize_file(path, size / 2);
    CHECK_THROWS_AS(static_cast<void>(load_classifier(path)), std::runtime_error);
    std::filesystem::remove(path);
}

TEST_CASE("paper-scale configuration matches the published sizes") {
    const auto config = paper_scale_config(410, 30);
    CHECK(config.conv1_filters == 256);
    CHECK(config.conv2_filters == 256);
    CHECK(config.conv1_kernel == 3);
    CHECK(config.conv2_kernel == 3);
    CHECK(config.dense_width == 160);
    CHECK(config.classes == 2);
    CHECK_NOTHROW(config.validate());
}
