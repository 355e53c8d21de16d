#include "ngcg/checkpoint.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>

namespace ngcg {

namespace {

constexpr std::uint32_t kFormatVersion = 1;

static_assert(std::endian::native == std::endian::little,
              "checkpoint format is little-endian");

void put_u32(std::ofstream& out, std::uint32_t v) {
    out.write(reinterpret_cast<const char*>(&v), 4);
}

std::uint32_t get_u32(std::ifstream& in) {
    std::uint32_t v = 0;
    in.read(reinterpret_cast<char*>(&v), 4);
    if (!in) throw DataError("checkpoint: truncated");
    return v;
}

void put_tensor(std::ofstream& out, const std::string& name, const Matrix& m) {
    put_u32(out, static_cast<std::uint32_t>(name.size()));
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    put_u32(out, static_cast<std::uint32_t>(m.rows));
    put_u32(out, static_cast<std::uint32_t>(m.cols));
    out.write(reinterpret_cast<const char*>(m.data.data()),
              static_cast<std::streamsize>(m.data.size() * sizeof(double)));
}

Matrix scalar_tensor(double v) {
    Matrix m(1, 1);
    m.data[0] = v;
    return m;
}

double want_scalar(const std::map<std::string, Matrix>& tensors, const std::string& name) {
    auto it = tensors.find(name);
    if (it == tensors.end()) throw DataError("checkpoint: missing tensor " + name);
    return it->second.scalar();
}

const Matrix& want_tensor(const std::map<std::string, Matrix>& tensors,
                          const std::string& name) {
    auto it = tensors.find(name);
    if (it == tensors.end()) throw DataError("checkpoint: missing tensor " + name);
    return it->second;
}

}  // namespace

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("save_checkpoint: cannot open " + path);
    out.write("NGCGCKPT", 8);
    put_u32(out, kFormatVersion);

    const ModelConfig& cfg = ckpt.params.cfg;
    put_tensor(out, "meta.dim", scalar_tensor(cfg.dim));
    put_tensor(out, "meta.layers", scalar_tensor(cfg.layers));
    put_tensor(out, "meta.heads", scalar_tensor(cfg.heads));
    put_tensor(out, "meta.vocab", scalar_tensor(cfg.vocab));
    put_tensor(out, "meta.max_len", scalar_tensor(cfg.max_len));
    put_tensor(out, "meta.patches", scalar_tensor(cfg.patches));
    put_tensor(out, "meta.patch_features", scalar_tensor(cfg.patch_features));
    put_tensor(out, "meta.init_seed", scalar_tensor(static_cast<double>(cfg.init_seed)));
    Matrix hash(1, 2);
    hash.at(0, 0) = static_cast<double>(ckpt.config_hash >> 32);
    hash.at(0, 1) = static_cast<double>(ckpt.config_hash & 0xffffffffULL);
    put_tensor(out, "meta.config_hash", hash);

    for (const auto& [name, mat] : named_params(ckpt.params)) put_tensor(out, name, *mat);

    if (ckpt.adapters) {
        put_tensor(out, "lora.rank", scalar_tensor(ckpt.adapters->rank));
        put_tensor(out, "lora.alpha", scalar_tensor(ckpt.adapters->alpha));
        for (const auto& [target, ad] : ckpt.adapters->adapters) {
            put_tensor(out, "lora." + target + ".A", ad.a);
            put_tensor(out, "lora." + target + ".B", ad.b);
        }
    }

    put_tensor(out, "pool.strategy",
               scalar_tensor(static_cast<double>(static_cast<int>(ckpt.pooling.strategy))));
    if (ckpt.pooling.strategy == PoolStrategy::Query)
        put_tensor(out, "pool.query", ckpt.pooling.query);

    put_tensor(out, "loss.temp_mode",
               scalar_tensor(ckpt.temp.mode == TempMode::Learnable ? 1.0 : 0.0));
    put_tensor(out, "loss.tau", scalar_tensor(ckpt.temp.value));
    put_tensor(out, "loss.log_tau", scalar_tensor(ckpt.temp.log_tau));
    put_tensor(out, "loss.direction",
               scalar_tensor(ckpt.direction == LossDirection::Symmetric ? 1.0 : 0.0));
    if (!out) throw DataError("save_checkpoint: write failed");
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("load_checkpoint: cannot open " + path);
    char magic[8];
    in.read(magic, 8);
    if (!in || std::memcmp(magic, "NGCGCKPT", 8) != 0)
        throw DataError("load_checkpoint: bad magic");
    const std::uint32_t version = get_u32(in);
    if (version != kFormatVersion)
        throw DataError("load_checkpoint: unsupported version " + std::to_string(version));

    std::map<std::string, Matrix> tensors;
    while (true) {
        std::uint32_t name_len = 0;
        in.read(reinterpret_cast<char*>(&name_len), 4);
        if (!in) break;  // clean EOF
        std::string name(name_len, '\0');
        in.read(name.data(), name_len);
        const std::uint32_t rows = get_u32(in);
        const std::uint32_t cols = get_u32(in);
        Matrix m(static_cast<int>(rows), static_cast<int>(cols));
        in.read(reinterpret_cast<char*>(m.data.data()),
                static_cast<std::streamsize>(m.data.size() * sizeof(double)));
        if (!in) throw DataError("load_checkpoint: truncated tensor " + name);
        tensors.emplace(std::move(name), std::move(m));
    }

    Checkpoint ckpt;
    ModelConfig cfg;
    cfg.dim = static_cast<int>(want_scalar(tensors, "meta.dim"));
    cfg.layers = static_cast<int>(want_scalar(tensors, "meta.layers"));
    cfg.heads = static_cast<int>(want_scalar(tensors, "meta.heads"));
    cfg.vocab = static_cast<int>(want_scalar(tensors, "meta.vocab"));
    cfg.max_len = static_cast<int>(want_scalar(tensors, "meta.max_len"));
    cfg.patches = static_cast<int>(want_scalar(tensors, "meta.patches"));
    cfg.patch_features = static_cast<int>(want_scalar(tensors, "meta.patch_features"));
    cfg.init_seed = static_cast<std::uint64_t>(want_scalar(tensors, "meta.init_seed"));
    const Matrix& hash = want_tensor(tensors, "meta.config_hash");
    if (hash.rows != 1 || hash.cols != 2) throw DataError("load_checkpoint: bad hash tensor");
    ckpt.config_hash = (static_cast<std::uint64_t>(hash.at(0, 0)) << 32) |
                       static_cast<std::uint64_t>(hash.at(0, 1));

    ckpt.params = init_encoder(cfg);
    for (auto& [name, mat] : named_params(ckpt.params)) {
        const Matrix& t = want_tensor(tensors, name);
        if (!t.same_shape(*mat))
            throw DataError("load_checkpoint: shape mismatch for " + name);
        *mat = t;
    }

    if (tensors.count("lora.rank")) {
        LoRASet set;
        set.rank = static_cast<int>(want_scalar(tensors, "lora.rank"));
        set.alpha = want_scalar(tensors, "lora.alpha");
        for (const std::string& target : lora_target_names(cfg)) {
            const Matrix& a = want_tensor(tensors, "lora." + target + ".A");
            const Matrix& b = want_tensor(tensors, "lora." + target + ".B");
            set.adapters.emplace(target, LoRAAdapter(target, a, b, set.alpha, set.rank));
        }
        ckpt.adapters = std::move(set);
        for (auto& [name, flag] : ckpt.params.trainable) {
            (void)name;
            flag = false;
        }
    }

    ckpt.pooling.strategy =
        static_cast<PoolStrategy>(static_cast<int>(want_scalar(tensors, "pool.strategy")));
    if (ckpt.pooling.strategy == PoolStrategy::Query)
        ckpt.pooling.query = want_tensor(tensors, "pool.query");
    ckpt.pooling.validate(cfg.dim);

    const bool learnable = want_scalar(tensors, "loss.temp_mode") != 0.0;
    const double tau = want_scalar(tensors, "loss.tau");
    ckpt.temp = learnable ? TemperatureConfig::learnable(tau) : TemperatureConfig::fixed(tau);
    ckpt.temp.log_tau = want_scalar(tensors, "loss.log_tau");
    ckpt.direction = want_scalar(tensors, "loss.direction") != 0.0 ? LossDirection::Symmetric
                                                                   : LossDirection::T2I;
    return ckpt;
}

}  // namespace ngcg
