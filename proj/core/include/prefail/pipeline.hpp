#pragma once

#include <vector>

#include "prefail/dataset.hpp"
#include "prefail/nn.hpp"

namespace prefail {

// Glue between raw event windows and network inputs, shared by training,
// evaluation and prediction paths.

// Normalize with the given (already fitted) normalizer, build the feature
// stack and flatten. Order of instances matches the order of windows.
std::vector<TrainInstance> featurize_windows(const std::vector<EventWindow>& windows,
                                             const Normalizer& normalizer,
                                             const StackConfig& stack_config);

// Fits the normalizer on the training windows only.
Normalizer fit_window_normalizer(const std::vector<EventWindow>& train_windows);

// Channels the network sees for a given attribute count and feature set.
std::size_t stacked_channel_count(const StackConfig& config, std::size_t attribute_count);

// Fills input_channels / input_length on a base config.
ModelConfig resolve_model_config(ModelConfig base, std::size_t input_channels,
                                 std::size_t input_length);

}  // namespace prefail
