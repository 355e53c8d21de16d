#include "ngcg/lora.hpp"

#include <algorithm>

#include "ngcg/encoder.hpp"
#include "ngcg/pooling.hpp"
#include "ngcg/rng.hpp"

namespace ngcg {

LoRAAdapter::LoRAAdapter(std::string target_name, Matrix a_init, Matrix b_init,
                         double alpha_val, int rank_val)
    : target(std::move(target_name)),
      a(std::move(a_init)),
      b(std::move(b_init)),
      alpha(alpha_val),
      rank(rank_val) {
    if (rank < 1) throw ContractError("LoRAAdapter: rank must be >= 1");
    if (!(alpha > 0.0)) throw ContractError("LoRAAdapter: alpha must be > 0");
    if (a.rows != rank || b.cols != rank)
        throw DimensionError("LoRAAdapter: A must be r x in and B out x r");
    const int in = a.cols, out = b.rows;
    if (rank > std::min(in, out))
        throw ContractError("LoRAAdapter: rank exceeds min(in, out) for " + target);
    require_finite(a, "LoRA A");
    require_finite(b, "LoRA B");
}

LoRASet attach(EncoderParams& params, int rank, double alpha, std::uint64_t seed) {
    if (rank < 1) throw ContractError("attach: rank must be >= 1");
    if (!(alpha > 0.0)) throw ContractError("attach: alpha must be > 0");
    Rng rng(seed);
    LoRASet set;
    set.rank = rank;
    set.alpha = alpha;
    const double a_sd = 1.0 / std::sqrt(static_cast<double>(rank));
    auto names = named_params(params);
    for (const std::string& target : lora_target_names(params.cfg)) {
        const Matrix* w = nullptr;
        for (auto& [name, mat] : names)
            if (name == target) w = mat;
        if (!w) throw ContractError("attach: missing target " + target);
        // stored weights are (in x out); A spans the input side, B the output side
        const int in = w->rows, out = w->cols;
        if (rank > std::min(in, out))
            throw ContractError("attach: rank " + std::to_string(rank) + " too large for " +
                                target);
        Matrix a = random_normal(rank, in, a_sd, rng);
        Matrix b = Matrix(out, rank);
        set.adapters.emplace(target, LoRAAdapter(target, std::move(a), std::move(b), alpha, rank));
        params.trainable[target] = false;
    }
    // input embedders and layernorms stay untouched by LoRA but freeze as base
    for (auto& [name, flag] : params.trainable) flag = false;
    return set;
}

Matrix adapted_forward(const Matrix& w0, const LoRAAdapter& adapter, const Matrix& x) {
    if (w0.cols != x.rows) throw DimensionError("adapted_forward: W0/x shape mismatch");
    if (adapter.a.cols != x.rows || adapter.b.rows != w0.rows)
        throw DimensionError("adapted_forward: adapter/W0 shape mismatch");
    Matrix y = matmul(w0, x);
    Matrix ax = matmul(adapter.a, x);        // r x n
    Matrix bax = matmul(adapter.b, ax);      // out x n
    const double s = adapter.scaling();
    for (std::size_t i = 0; i < y.data.size(); ++i) y.data[i] += s * bax.data[i];
    return y;
}

Matrix merge(const Matrix& w0, const LoRAAdapter& adapter) {
    if (adapter.b.rows != w0.rows || adapter.a.cols != w0.cols)
        throw DimensionError("merge: adapter/W0 shape mismatch");
    Matrix delta = matmul(adapter.b, adapter.a);  // out x in
    Matrix merged = w0;
    const double s = adapter.scaling();
    for (std::size_t i = 0; i < merged.data.size(); ++i) merged.data[i] += s * delta.data[i];
    return merged;
}

std::vector<std::string> trainable_parameters(const LoRASet& set,
                                              const PoolingConfig& pooling) {
    std::vector<std::string> names;
    for (const auto& [target, ad] : set.adapters) {
        (void)ad;
        names.push_back("lora." + target + ".A");
        names.push_back("lora." + target + ".B");
    }
    if (pooling.strategy == PoolStrategy::Query) names.push_back("pool.query");
    return names;
}

}  // namespace ngcg
