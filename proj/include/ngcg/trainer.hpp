#pragma once

#include <cstdint>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "ngcg/checkpoint.hpp"
#include "ngcg/datagen.hpp"

namespace ngcg {

enum class TrainMode { Lora, Full };

TrainMode train_mode_from_string(const std::string& name);
std::string to_string(TrainMode m);

struct TrainConfig {
    TrainMode mode = TrainMode::Lora;
    int epochs = 30;
    int batch_size = 32;
    double lr = 1e-3;
    double weight_decay = 0.01;
    std::uint64_t seed = 42;
    int lora_rank = 16;
    double lora_alpha = 128.0;
    std::uint64_t lora_seed = 99;
    PoolStrategy pooling = PoolStrategy::Eos;
    TemperatureConfig temp = TemperatureConfig::fixed(0.03);
    LossDirection direction = LossDirection::Symmetric;

    void validate() const;
};

struct TrainLog {
    std::vector<double> step_losses;
    std::vector<int> step_epochs;
    std::vector<double> epoch_r_at_1;  // held-out, one entry per epoch
    double wall_seconds = 0.0;
    std::string checkpoint_path;
};

struct TrainResult {
    Checkpoint model;
    TrainLog log;
};

// Trainable vs frozen parameter names for the given mode. LoRA mode trains the
// adapters (plus pooling query and log-temperature when present) and freezes
// every base matrix; full mode trains everything.
std::pair<std::set<std::string>, std::set<std::string>> param_partition(
    const TrainConfig& cfg, const EncoderParams& params, const LoRASet* adapters,
    const PoolingConfig& pooling);

// Adam with decoupled weight decay over seeded without-replacement batches.
// log_path, when non-empty, receives one JSON line per step.
TrainResult train(const Corpus& corpus, const ModelConfig& model_cfg, const TrainConfig& cfg,
                  const std::string& log_path = "", std::uint64_t config_hash = 0);

}  // namespace ngcg
