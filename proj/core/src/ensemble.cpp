#include "prefail/ensemble.hpp"

#include <atomic>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <stdexcept>
#include <thread>

#include <nlohmann/json.hpp>

#include "prefail/rng.hpp"

namespace prefail {

namespace {

Classifier fit_member(std::size_t index, const ModelConfig& model_config,
                      const TrainConfig& train_config, const std::vector<TrainInstance>& instances,
                      std::uint64_t master_seed) {
    Rng rng(derive_seed(master_seed, 2 * index));
    std::vector<TrainInstance> resample;
    resample.reserve(instances.size());
    for (std::size_t i = 0; i < instances.size(); ++i) {
        resample.push_back(instances[rng.next_below(instances.size())]);
    }

    TrainConfig member_config = train_config;
    member_config.seed = derive_seed(master_seed, 2 * index + 1);
    try {
        return train(model_config, member_config, resample);
    } catch (const std::exception& e) {
        throw std::runtime_error("ensemble member " + std::to_string(index) + ": " + e.what());
    }
}

}  // namespace

EnsembleModel fit_ensemble(std::size_t k, const ModelConfig& model_config,
                           const TrainConfig& train_config,
                           const std::vector<TrainInstance>& instances, std::uint64_t master_seed,
                           std::size_t jobs) {
    if (k < 1) throw std::invalid_argument("ensemble: k must be at least 1");
    if (instances.empty()) throw std::invalid_argument("ensemble: no training instances");

    EnsembleModel ensemble;
    ensemble.master_seed = master_seed;
    ensemble.config = model_config;
    ensemble.members.resize(k);

    if (jobs <= 1) {
        for (std::size_t i = 0; i < k; ++i) {
            ensemble.members[i] = fit_member(i, model_config, train_config, instances, master_seed);
        }
        return ensemble;
    }

    std::atomic<std::size_t> next{0};
    std::atomic<bool> failed{false};
    std::string error_message;
    std::mutex error_mutex;

    auto worker = [&]() {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= k || failed.load()) return;
            try {
                ensemble.members[i] = fit_member(i, model_config, train_config, instances, master_seed);
            } catch (const std::exception& e) {
                std::lock_guard<std::mutex> lock(error_mutex);
                failed.store(true);
                if (error_message.empty()) error_message = e.what();
                return;
            }
        }
    };

    std::vector<std::thread> threads;
    for (std::size_t j = 0; j < std::min(jobs, k); ++j) threads.emplace_back(worker);
    for (auto& t : threads) t.join();
    if (failed.load()) throw std::runtime_error(error_message);
    return ensemble;
}

VoteResult vote_predict(const EnsembleModel& ensemble, const std::vector<double>& input) {
    if (ensemble.members.empty()) throw std::invalid_argument("ensemble: no members");
    const std::size_t classes = ensemble.config.classes;

    VoteResult result;
    result.votes.assign(classes, 0);
    for (const auto& member : ensemble.members) {
        result.votes[static_cast<std::size_t>(predict(member, input).label)] += 1;
    }

    std::size_t best = 0;
    for (std::size_t c = 1; c < classes; ++c) {
        if (result.votes[c] >= result.votes[best]) best = c;
    }
    result.label = static_cast<int>(best);

    result.proportions.resize(classes);
    for (std::size_t c = 0; c < classes; ++c) {
        result.proportions[c] =
            static_cast<double>(result.votes[c]) / static_cast<double>(ensemble.members.size());
    }
    return result;
}

namespace {

std::string member_file_name(std::size_t index) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "model_%03zu.bin", index);
    return buf;
}

}  // namespace

void save_ensemble(const EnsembleModel& ensemble, const std::string& dir_path,
                   const PipelineConfig* pipeline) {
    namespace fs = std::filesystem;
    fs::create_directories(dir_path);

    nlohmann::ordered_json manifest;
    manifest["format"] = "prefail-ensemble";
    manifest["version"] = 1;
    manifest["k"] = ensemble.members.size();
    manifest["master_seed"] = ensemble.master_seed;
    manifest["model_config"] = {
        {"input_channels", ensemble.config.input_channels},
        {"input_length", ensemble.config.input_length},
        {"conv1_filters", ensemble.config.conv1_filters},
        {"conv1_kernel", ensemble.config.conv1_kernel},
        {"conv2_filters", ensemble.config.conv2_filters},
        {"conv2_kernel", ensemble.config.conv2_kernel},
        {"pool_width", ensemble.config.pool_width},
        {"dense_width", ensemble.config.dense_width},
        {"classes", ensemble.config.classes},
    };
    nlohmann::ordered_json members = nlohmann::ordered_json::array();
    for (std::size_t i = 0; i < ensemble.members.size(); ++i) members.push_back(member_file_name(i));
    manifest["members"] = members;

    std::ofstream out(fs::path(dir_path) / "manifest.json");
    if (!out) throw std::runtime_error("cannot write ensemble manifest in " + dir_path);
    out << manifest.dump(2) << "\n";
    out.flush();
    if (!out) throw std::runtime_error("write failed: ensemble manifest");

    for (std::size_t i = 0; i < ensemble.members.size(); ++i) {
        // Pipeline block only on the first member; all members share it.
        save_classifier(ensemble.members[i], (fs::path(dir_path) / member_file_name(i)).string(),
                        i == 0 ? pipeline : nullptr);
    }
}

EnsembleModel load_ensemble(const std::string& dir_path, std::optional<PipelineConfig>* pipeline) {
    namespace fs = std::filesystem;
    std::ifstream in(fs::path(dir_path) / "manifest.json");
    if (!in) throw std::runtime_error("cannot open ensemble manifest in " + dir_path);
    nlohmann::json manifest;
    in >> manifest;
    if (manifest.value("format", "") != "prefail-ensemble") {
        throw std::runtime_error("not an ensemble directory: " + dir_path);
    }
    if (manifest.value("version", 0) != 1) {
        throw std::runtime_error("ensemble manifest version mismatch");
    }

    EnsembleModel ensemble;
    ensemble.master_seed = manifest.value("master_seed", std::uint64_t{0});
    bool first = true;
    for (const auto& name : manifest.at("members")) {
        std::optional<PipelineConfig> member_pipeline;
        ensemble.members.push_back(load_classifier((fs::path(dir_path) / name.get<std::string>()).string(),
                                                   first ? &member_pipeline : nullptr));
        if (first) {
            if (pipeline) *pipeline = std::move(member_pipeline);
            ensemble.config = ensemble.members.front().config;
            first = false;
        }
    }
    if (ensemble.members.empty()) throw std::runtime_error("ensemble manifest lists no members");
    return ensemble;
}

}  // namespace prefail
