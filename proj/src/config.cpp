#include "ngcg/config.hpp"

#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>

#include <json.hpp>

namespace ngcg {

using nlohmann::json;

namespace {

void reject_unknown(const json& section, const std::string& name,
                    const std::set<std::string>& known) {
    if (!section.is_object()) throw ConfigError("config: section '" + name + "' is not an object");
    for (auto it = section.begin(); it != section.end(); ++it)
        if (!known.count(it.key()))
            throw ConfigError("config: unknown key '" + name + "." + it.key() + "'");
}

template <class T>
void take(const json& section, const char* key, T& out) {
    if (section.contains(key)) out = section.at(key).get<T>();
}

}  // namespace

TrainConfig ExperimentConfig::train_config() const {
    TrainConfig t;
    t.mode = mode;
    t.epochs = epochs;
    t.batch_size = batch_size;
    t.lr = lr;
    t.weight_decay = weight_decay;
    t.seed = train_seed;
    t.lora_rank = lora_rank;
    t.lora_alpha = lora_alpha;
    t.lora_seed = lora_seed;
    t.pooling = pooling;
    t.temp = temp_mode == TempMode::Learnable ? TemperatureConfig::learnable(temperature)
                                              : TemperatureConfig::fixed(temperature);
    t.direction = direction;
    return t;
}

std::string ExperimentConfig::to_json() const {
    json j;
    j["data"] = {{"corpus", corpus_path},
                 {"scenes", data.n_scenes},
                 {"seed", data.seed},
                 {"noise", data.noise},
                 {"latent_dim", data.latent_dim},
                 {"spacing_m", data.spacing_m},
                 {"train_fraction", data.train_fraction}};
    j["model"] = {{"dim", model.dim},
                  {"layers", model.layers},
                  {"heads", model.heads},
                  {"vocab", model.vocab},
                  {"max_len", model.max_len},
                  {"patches", model.patches},
                  {"patch_features", model.patch_features},
                  {"init_seed", model.init_seed}};
    j["lora"] = {{"rank", lora_rank}, {"alpha", lora_alpha}, {"seed", lora_seed}};
    j["pooling"] = {{"strategy", to_string(pooling)}};
    j["loss"] = {{"temperature", temperature},
                 {"temperature_mode", temp_mode == TempMode::Learnable ? "learnable" : "fixed"},
                 {"direction", to_string(direction)}};
    j["train"] = {{"mode", to_string(mode)},
                  {"epochs", epochs},
                  {"batch_size", batch_size},
                  {"lr", lr},
                  {"weight_decay", weight_decay},
                  {"seed", train_seed}};
    j["eval"] = {{"strict_loc", strict_loc}};
    return j.dump();
}

std::uint64_t ExperimentConfig::config_hash() const {
    const std::string text = to_json();
    return fnv1a(text.data(), text.size());
}

std::string ExperimentConfig::config_hash_hex() const {
    std::ostringstream out;
    out << std::hex << std::setw(16) << std::setfill('0') << config_hash();
    return out.str();
}

ExperimentConfig parse_config(const std::string& json_text) {
    json j = json::parse(json_text, nullptr, false);
    if (j.is_discarded()) throw ConfigError("config: invalid JSON");
    if (!j.is_object()) throw ConfigError("config: top level must be an object");
    reject_unknown(j, "config",
                   {"data", "model", "lora", "pooling", "loss", "train", "eval"});

    ExperimentConfig cfg;
    if (j.contains("data")) {
        const json& s = j["data"];
        reject_unknown(s, "data",
                       {"corpus", "scenes", "seed", "noise", "latent_dim", "spacing_m",
                        "train_fraction"});
        take(s, "corpus", cfg.corpus_path);
        take(s, "scenes", cfg.data.n_scenes);
        take(s, "seed", cfg.data.seed);
        take(s, "noise", cfg.data.noise);
        take(s, "latent_dim", cfg.data.latent_dim);
        take(s, "spacing_m", cfg.data.spacing_m);
        take(s, "train_fraction", cfg.data.train_fraction);
    }
    if (j.contains("model")) {
        const json& s = j["model"];
        reject_unknown(s, "model",
                       {"dim", "layers", "heads", "vocab", "max_len", "patches",
                        "patch_features", "init_seed"});
        take(s, "dim", cfg.model.dim);
        take(s, "layers", cfg.model.layers);
        take(s, "heads", cfg.model.heads);
        take(s, "vocab", cfg.model.vocab);
        take(s, "max_len", cfg.model.max_len);
        take(s, "patches", cfg.model.patches);
        take(s, "patch_features", cfg.model.patch_features);
        take(s, "init_seed", cfg.model.init_seed);
    }
    if (j.contains("lora")) {
        const json& s = j["lora"];
        reject_unknown(s, "lora", {"rank", "alpha", "seed"});
        take(s, "rank", cfg.lora_rank);
        take(s, "alpha", cfg.lora_alpha);
        take(s, "seed", cfg.lora_seed);
    }
    if (j.contains("pooling")) {
        const json& s = j["pooling"];
        reject_unknown(s, "pooling", {"strategy"});
        std::string strategy = to_string(cfg.pooling);
        take(s, "strategy", strategy);
        cfg.pooling = pool_strategy_from_string(strategy);
    }
    if (j.contains("loss")) {
        const json& s = j["loss"];
        reject_unknown(s, "loss", {"temperature", "temperature_mode", "direction"});
        take(s, "temperature", cfg.temperature);
        std::string mode = cfg.temp_mode == TempMode::Learnable ? "learnable" : "fixed";
        take(s, "temperature_mode", mode);
        if (mode == "fixed") cfg.temp_mode = TempMode::Fixed;
        else if (mode == "learnable") cfg.temp_mode = TempMode::Learnable;
        else throw ConfigError("config: loss.temperature_mode must be fixed|learnable");
        std::string dir = to_string(cfg.direction);
        take(s, "direction", dir);
        cfg.direction = direction_from_string(dir);
    }
    if (j.contains("train")) {
        const json& s = j["train"];
        reject_unknown(s, "train",
                       {"mode", "epochs", "batch_size", "lr", "weight_decay", "seed"});
        std::string mode = to_string(cfg.mode);
        take(s, "mode", mode);
        cfg.mode = train_mode_from_string(mode);
        take(s, "epochs", cfg.epochs);
        take(s, "batch_size", cfg.batch_size);
        take(s, "lr", cfg.lr);
        take(s, "weight_decay", cfg.weight_decay);
        take(s, "seed", cfg.train_seed);
    }
    if (j.contains("eval")) {
        const json& s = j["eval"];
        reject_unknown(s, "eval", {"strict_loc"});
        take(s, "strict_loc", cfg.strict_loc);
    }
    if (!(cfg.temperature > 0.0)) throw ConfigError("config: loss.temperature must be > 0");
    cfg.data.patches = cfg.model.patches;
    cfg.data.patch_features = cfg.model.patch_features;
    return cfg;
}

ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("config: cannot open " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_config(buf.str());
}

}  // namespace ngcg
