#include "prefail/pipeline.hpp"

#include <stdexcept>

namespace prefail {

std::vector<TrainInstance> featurize_windows(const std::vector<EventWindow>& windows,
                                             const Normalizer& normalizer,
                                             const StackConfig& stack_config) {
    std::vector<TrainInstance> instances;
    instances.reserve(windows.size());
    for (const auto& window : windows) {
        const Matrix normalized = normalizer.apply(window.values);
        const FeatureStack stack = build_feature_stack(normalized, stack_config);
        TrainInstance instance;
        instance.input = stack.to_input();
        instance.label = window.label;
        instances.push_back(std::move(instance));
    }
    return instances;
}

Normalizer fit_window_normalizer(const std::vector<EventWindow>& train_windows) {
    if (train_windows.empty()) throw std::invalid_argument("normalizer: no training windows");
    std::vector<const Matrix*> matrices;
    matrices.reserve(train_windows.size());
    for (const auto& w : train_windows) matrices.push_back(&w.values);
    return Normalizer::fit_matrices(matrices);
}

std::size_t stacked_channel_count(const StackConfig& config, std::size_t attribute_count) {
    std::size_t channels = 1;  // Original
    for (std::size_t i = 1; i < kFeatureIdCount; ++i) {
        if (config.is_enabled(static_cast<FeatureId>(i))) ++channels;
    }
    return channels * attribute_count;
}

ModelConfig resolve_model_config(ModelConfig base, std::size_t input_channels,
                                 std::size_t input_length) {
    base.input_channels = input_channels;
    base.input_length = input_length;
    base.validate();
    return base;
}

}  // namespace prefail
