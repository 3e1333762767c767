#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "prefail/dataset.hpp"

namespace prefail {

// conv1d + ReLU -> conv1d + ReLU -> maxpool -> dense + ReLU -> dense -> softmax.
// Convolutions run along the time axis only; channels are attributes times
// stacked feature channels.
struct ModelConfig {
    std::size_t input_channels = 0;  // C = attributes x stacked channels
    std::size_t input_length = 0;    // T
    std::size_t conv1_filters = 32;
    std::size_t conv1_kernel = 3;
    std::size_t conv2_filters = 32;
    std::size_t conv2_kernel = 3;
    std::size_t pool_width = 2;
    std::size_t dense_width = 32;
    std::size_t classes = 2;

    std::size_t conv1_out() const { return input_length - conv1_kernel + 1; }
    std::size_t conv2_out() const { return conv1_out() - conv2_kernel + 1; }
    std::size_t pooled_out() const { return conv2_out() / pool_width; }
    std::size_t flat_size() const { return conv2_filters * pooled_out(); }
    std::size_t input_size() const { return input_channels * input_length; }

    void validate() const;
};

// The sizes the reference architecture fixes; desk-scale runs use the
// smaller defaults above.
ModelConfig paper_scale_config(std::size_t input_channels, std::size_t input_length);

enum class OptimizerKind : std::uint8_t { Sgd = 0, Adam = 1 };

struct TrainConfig {
    std::size_t epochs = 30;
    std::size_t batch_size = 32;
    double learning_rate = 1e-3;
    OptimizerKind optimizer = OptimizerKind::Adam;
    std::uint64_t seed = 0;
    // Early stop once the epoch loss has not improved by min_delta for
    // patience consecutive epochs. patience 0 disables.
    std::size_t plateau_patience = 5;
    double plateau_min_delta = 1e-4;

    void validate() const;
};

struct TrainInstance {
    std::vector<double> input;  // C x T, channel-major, time contiguous
    int label = 0;
};

struct Classifier {
    ModelConfig config;
    // Weight layouts: conv W[n][c][k], dense W[out][in], row-major.
    std::vector<double> conv1_w, conv1_b;
    std::vector<double> conv2_w, conv2_b;
    std::vector<double> dense1_w, dense1_b;
    std::vector<double> dense2_w, dense2_b;

    // Training metadata.
    std::uint64_t seed = 0;
    TrainConfig train_config;
    std::uint32_t epochs_run = 0;
    std::vector<double> loss_curve;  // mean training loss per epoch

    bool weights_finite() const;
};

// Valid cross-correlation along time, summed over channels, plus bias.
// input is C x L, kernels N x C x K, output N x (L - K + 1).
std::vector<double> conv1d_forward(const std::vector<double>& input, std::size_t channels,
                                   std::size_t length, const std::vector<double>& kernels,
                                   std::size_t filters, std::size_t kernel_width,
                                   const std::vector<double>& bias);

// Per non-overlapping window of `width`, the maximum; trailing remainder dropped.
std::vector<double> maxpool1d(const std::vector<double>& input, std::size_t channels,
                              std::size_t length, std::size_t width);

std::vector<double> softmax(const std::vector<double>& logits);

// Negative log probability of the true class, clamped at p >= 1e-12.
double cross_entropy(const std::vector<double>& probs, int label);

// Probability vector over classes. Throws on shape mismatch.
std::vector<double> forward(const Classifier& model, const std::vector<double>& input);

struct Prediction {
    int label = 0;
    std::vector<double> probabilities;
};

// Argmax of forward; an exact tie goes to the failure class.
Prediction predict(const Classifier& model, const std::vector<double>& input);

// Mini-batch gradient descent on cross-entropy. Deterministic given the
// seed: weight init and the per-epoch batch permutation both derive from it.
// Throws if the loss or any weight becomes non-finite.
Classifier train(const ModelConfig& model_config, const TrainConfig& train_config,
                 const std::vector<TrainInstance>& instances);

// Analytic gradients against central finite differences (step 1e-5) on a
// random batch; returns the max relative error over a sampled parameter
// subset covering every tensor.
double gradient_check(const ModelConfig& config, std::uint64_t seed);

// Everything a saved model needs to score a raw corpus.
struct PipelineConfig {
    WindowSpec window_spec;
    StackConfig stack_config;
    Normalizer normalizer;
    std::vector<std::string> attribute_columns;
};

// Model file: magic, format version, config block, little-endian float64
// weight blobs, training metadata, optional pipeline block.
void save_classifier(const Classifier& model, const std::string& path,
                     const PipelineConfig* pipeline = nullptr);
Classifier load_classifier(const std::string& path,
                           std::optional<PipelineConfig>* pipeline = nullptr);

// Stream-level forms used by the ensemble container.
void write_classifier(std::ostream& out, const Classifier& model, const PipelineConfig* pipeline);
Classifier read_classifier(std::istream& in, std::optional<PipelineConfig>* pipeline);

}  // namespace prefail
