#include "ngcg/trainer.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <iostream>
#include <map>

#include <json.hpp>

#include "ngcg/embedder.hpp"
#include "ngcg/rng.hpp"

namespace ngcg {

namespace g = graph;

TrainMode train_mode_from_string(const std::string& name) {
    if (name == "lora") return TrainMode::Lora;
    if (name == "full") return TrainMode::Full;
    throw ConfigError("unknown train mode '" + name + "'");
}

std::string to_string(TrainMode m) { return m == TrainMode::Lora ? "lora" : "full"; }

void TrainConfig::validate() const {
    if (epochs < 0) throw ConfigError("train: epochs must be >= 0");
    if (batch_size < 1) throw ConfigError("train: batch_size must be >= 1");
    if (batch_size == 1)
        std::cerr << "warning: batch_size 1 gives no in-batch negatives\n";
    if (!(lr > 0.0)) throw ConfigError("train: lr must be > 0");
    if (weight_decay < 0.0) throw ConfigError("train: weight_decay must be >= 0");
    if (mode == TrainMode::Lora && lora_rank < 1)
        throw ConfigError("train: lora rank must be >= 1");
    if (mode == TrainMode::Lora && !(lora_alpha > 0.0))
        throw ConfigError("train: lora alpha must be > 0");
    if (!(temperature_value(temp) > 0.0)) throw ConfigError("train: tau must be > 0");
}

std::pair<std::set<std::string>, std::set<std::string>> param_partition(
    const TrainConfig& cfg, const EncoderParams& params, const LoRASet* adapters,
    const PoolingConfig& pooling) {
    std::set<std::string> trainable, frozen;
    if (cfg.mode == TrainMode::Lora) {
        if (!adapters) throw ContractError("param_partition: lora mode without adapters");
        for (const std::string& name : trainable_parameters(*adapters, pooling))
            trainable.insert(name);
        for (const auto& [name, mat] : named_params(params)) {
            (void)mat;
            frozen.insert(name);
        }
    } else {
        for (const auto& [name, mat] : named_params(params)) {
            (void)mat;
            trainable.insert(name);
        }
        if (pooling.strategy == PoolStrategy::Query) trainable.insert("pool.query");
    }
    if (cfg.temp.mode == TempMode::Learnable) trainable.insert("loss.log_tau");
    return {trainable, frozen};
}

namespace {

struct AdamState {
    Matrix m, v;
};

struct ParamSlot {
    Matrix* storage = nullptr;
    bool decay = true;
};

// storage pointers for every trainable name
std::map<std::string, ParamSlot> slot_map(const std::set<std::string>& trainable,
                                          EncoderParams& params, LoRASet* adapters,
                                          PoolingConfig& pooling, Matrix& log_tau) {
    std::map<std::string, ParamSlot> slots;
    auto named = named_params(params);
    for (const std::string& name : trainable) {
        ParamSlot slot;
        if (name == "loss.log_tau") {
            slot.storage = &log_tau;
            slot.decay = false;  // never decay the temperature
        } else if (name == "pool.query") {
            slot.storage = &pooling.query;
        } else if (name.rfind("lora.", 0) == 0) {
            const bool is_a = name.size() > 2 && name.compare(name.size() - 2, 2, ".A") == 0;
            const std::string target = name.substr(5, name.size() - 7);
            auto it = adapters->adapters.find(target);
            if (it == adapters->adapters.end())
                throw ContractError("train: unknown adapter target " + target);
            slot.storage = is_a ? &it->second.a : &it->second.b;
        } else {
            for (auto& [pname, mat] : named)
                if (pname == name) slot.storage = mat;
            if (!slot.storage) throw ContractError("train: unknown parameter " + name);
        }
        slots.emplace(name, slot);
    }
    return slots;
}

}  // namespace

TrainResult train(const Corpus& corpus, const ModelConfig& model_cfg, const TrainConfig& cfg,
                  const std::string& log_path, std::uint64_t config_hash) {
    cfg.validate();
    const auto t0 = std::chrono::steady_clock::now();

    TrainResult result;
    Checkpoint& model = result.model;
    model.params = init_encoder(model_cfg);
    model.pooling.strategy = cfg.pooling;
    if (cfg.pooling == PoolStrategy::Query)
        model.pooling.query = Matrix(1, model_cfg.dim);  // zero init: starts as average
    model.temp = cfg.temp;
    model.direction = cfg.direction;
    model.config_hash = config_hash;
    if (cfg.mode == TrainMode::Lora)
        model.adapters = attach(model.params, cfg.lora_rank, cfg.lora_alpha, cfg.lora_seed);

    auto train_items = corpus.split_items("train");
    const int n_train = static_cast<int>(train_items.size());
    if (n_train < cfg.batch_size)
        throw DataError("train: corpus has " + std::to_string(n_train) +
                        " training pairs, batch needs " + std::to_string(cfg.batch_size));

    auto [trainable, frozen] = param_partition(
        cfg, model.params, model.adapter_ptr(), model.pooling);
    (void)frozen;

    Matrix log_tau(1, 1);
    log_tau.data[0] = model.temp.log_tau;
    LoRASet* adapters = model.adapters ? &*model.adapters : nullptr;
    auto slots = slot_map(trainable, model.params, adapters, model.pooling, log_tau);

    std::map<std::string, AdamState> adam;
    for (auto& [name, slot] : slots)
        adam[name] = {Matrix(slot.storage->rows, slot.storage->cols),
                      Matrix(slot.storage->rows, slot.storage->cols)};

    std::ofstream log_file;
    if (!log_path.empty()) {
        log_file.open(log_path);
        if (!log_file) throw DataError("train: cannot open log " + log_path);
    }

    constexpr double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
    Rng rng(cfg.seed);
    int step = 0;
    const int steps_per_epoch = n_train / cfg.batch_size;

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        std::vector<int> order(n_train);
        for (int i = 0; i < n_train; ++i) order[i] = i;
        rng.shuffle(order);

        for (int bi = 0; bi < steps_per_epoch; ++bi) {
            BoundParams bp = bind_params(model.params, adapters, trainable);
            g::NodePtr query_node;
            if (model.pooling.strategy == PoolStrategy::Query) {
                query_node = trainable.count("pool.query") ? g::parameter(model.pooling.query)
                                                           : g::constant(model.pooling.query);
                bp.nodes["pool.query"] = query_node;
            }
            g::NodePtr log_tau_node;
            if (model.temp.mode == TempMode::Learnable) {
                log_tau_node = trainable.count("loss.log_tau") ? g::parameter(log_tau)
                                                               : g::constant(log_tau);
                bp.nodes["loss.log_tau"] = log_tau_node;
            }

            g::NodePtr q_rows, s_rows;
            for (int k = 0; k < cfg.batch_size; ++k) {
                const SceneRecord* rec = train_items[order[bi * cfg.batch_size + k]];
                g::NodePtr ht = encode_text_graph(bp, rec->text);
                g::NodePtr qi = pool_graph(ht, rec->text.mask, rec->text.eos_index,
                                           model.pooling.strategy, query_node);
                SceneGrid grid{rec->grid, rec->geo};
                g::NodePtr hi = encode_image_graph(bp, grid);
                std::vector<int> imask(model_cfg.patches + 1, 1);
                g::NodePtr si = pool_graph(hi, imask, model_cfg.patches,
                                           model.pooling.strategy, query_node);
                q_rows = q_rows ? g::concat_rows(q_rows, qi) : qi;
                s_rows = s_rows ? g::concat_rows(s_rows, si) : si;
            }

            g::NodePtr inv_tau = inv_tau_node(model.temp, log_tau_node);
            g::NodePtr loss = info_nce_graph(q_rows, s_rows, inv_tau, cfg.direction);
            const double loss_value = loss->value.scalar();
            if (!std::isfinite(loss_value))
                throw NumericError("train: loss diverged (non-finite) at step " +
                                   std::to_string(step) + ", epoch " + std::to_string(epoch));
            g::backward(loss);

            ++step;
            const double bc1 = 1.0 - std::pow(beta1, step);
            const double bc2 = 1.0 - std::pow(beta2, step);
            for (auto& [name, slot] : slots) {
                const Matrix grad = g::grad_of(bp.at(name));
                AdamState& st = adam[name];
                Matrix& theta = *slot.storage;
                for (std::size_t i = 0; i < theta.data.size(); ++i) {
                    st.m.data[i] = beta1 * st.m.data[i] + (1.0 - beta1) * grad.data[i];
                    st.v.data[i] =
                        beta2 * st.v.data[i] + (1.0 - beta2) * grad.data[i] * grad.data[i];
                    const double mhat = st.m.data[i] / bc1;
                    const double vhat = st.v.data[i] / bc2;
                    theta.data[i] -= cfg.lr * mhat / (std::sqrt(vhat) + eps);
                    if (slot.decay) theta.data[i] -= cfg.lr * cfg.weight_decay * theta.data[i];
                }
            }
            model.temp.log_tau = log_tau.data[0];

            result.log.step_losses.push_back(loss_value);
            result.log.step_epochs.push_back(epoch);
            if (log_file) {
                nlohmann::json j;
                j["step"] = step;
                j["loss"] = loss_value;
                j["epoch"] = epoch;
                log_file << j.dump() << "\n";
            }
        }

        const double r1 = split_r_at_1(model, corpus, "test");
        result.log.epoch_r_at_1.push_back(r1);
        if (log_file) {
            nlohmann::json j;
            j["epoch"] = epoch;
            j["heldout_r_at_1"] = r1;
            log_file << j.dump() << "\n";
        }
    }

    result.log.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (log_file) {
        nlohmann::json j;
        j["wall_seconds"] = result.log.wall_seconds;
        j["steps"] = step;
        j["config_hash"] = config_hash;
        log_file << j.dump() << "\n";
    }
    return result;
}

}  // namespace ngcg
