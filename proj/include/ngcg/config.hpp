#pragma once

#include <cstdint>
#include <string>

#include "ngcg/datagen.hpp"
#include "ngcg/trainer.hpp"

namespace ngcg {

// Resolved experiment configuration. Sections: data, model, lora, pooling,
// loss, train, eval. Unknown keys are rejected; absent keys take defaults.
struct ExperimentConfig {
    // data
    std::string corpus_path;  // empty: generate in memory from the fields below
    GenParams data;
    // model
    ModelConfig model;
    // lora
    int lora_rank = 16;
    double lora_alpha = 128.0;
    std::uint64_t lora_seed = 99;
    // pooling
    PoolStrategy pooling = PoolStrategy::Eos;
    // loss
    TempMode temp_mode = TempMode::Fixed;
    double temperature = 0.03;
    LossDirection direction = LossDirection::Symmetric;
    // train
    TrainMode mode = TrainMode::Lora;
    int epochs = 30;
    int batch_size = 32;
    double lr = 1e-3;
    double weight_decay = 0.01;
    std::uint64_t train_seed = 42;
    // eval
    bool strict_loc = false;

    TrainConfig train_config() const;
    std::string to_json() const;       // canonical, sorted keys
    std::uint64_t config_hash() const;
    std::string config_hash_hex() const;
};

ExperimentConfig parse_config(const std::string& json_text);
ExperimentConfig load_config(const std::string& path);

}  // namespace ngcg
