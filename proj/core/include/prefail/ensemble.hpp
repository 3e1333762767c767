#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "prefail/nn.hpp"

namespace prefail {

// Bag of independently bootstrap-trained classifiers combined by majority
// vote. Member i draws its resample and weight-init seeds from
// derive_seed(master_seed, 2i) and derive_seed(master_seed, 2i + 1), so
// fitting order and thread count cannot change the result.
struct EnsembleModel {
    std::uint64_t master_seed = 0;
    ModelConfig config;
    std::vector<Classifier> members;

    std::size_t size() const { return members.size(); }
};

// Trains k members, each on a bootstrap resample (with replacement, same
// size as the input). jobs > 1 fits members concurrently.
EnsembleModel fit_ensemble(std::size_t k, const ModelConfig& model_config,
                           const TrainConfig& train_config,
                           const std::vector<TrainInstance>& instances, std::uint64_t master_seed,
                           std::size_t jobs = 1);

struct VoteResult {
    int label = 0;
    std::vector<std::size_t> votes;      // per class, sums to k
    std::vector<double> proportions;     // votes / k
};

// Each member votes its argmax class; plurality wins, ties go to the
// failure class like the single-model rule.
VoteResult vote_predict(const EnsembleModel& ensemble, const std::vector<double>& input);

// On-disk layout: a directory holding manifest.json plus one model file per
// member.
void save_ensemble(const EnsembleModel& ensemble, const std::string& dir_path,
                   const PipelineConfig* pipeline = nullptr);
EnsembleModel load_ensemble(const std::string& dir_path,
                            std::optional<PipelineConfig>* pipeline = nullptr);

}  // namespace prefail
