#include "ngcg/encoder.hpp"

#include <cmath>

#include "ngcg/rng.hpp"

namespace ngcg {

namespace g = graph;

TokenSequence make_token_sequence(std::vector<int> tokens, int eos_index) {
    TokenSequence seq;
    seq.tokens = std::move(tokens);
    seq.eos_index = eos_index;
    seq.mask.assign(seq.tokens.size(), 0);
    for (int i = 0; i <= eos_index && i < static_cast<int>(seq.mask.size()); ++i)
        seq.mask[i] = 1;
    validate_token_sequence(seq);
    return seq;
}

void validate_token_sequence(const TokenSequence& seq) {
    const int n = static_cast<int>(seq.tokens.size());
    if (n < 1) throw ContractError("TokenSequence: empty");
    if (seq.eos_index < 0 || seq.eos_index >= n)
        throw ContractError("TokenSequence: eos_index out of range");
    if (static_cast<int>(seq.mask.size()) != n)
        throw ContractError("TokenSequence: mask length mismatch");
    for (int i = 0; i < n; ++i) {
        const int expect = i <= seq.eos_index ? 1 : 0;
        if (seq.mask[i] != expect) throw ContractError("TokenSequence: mask/eos inconsistent");
    }
    if (seq.tokens[seq.eos_index] != kEosId)
        throw ContractError("TokenSequence: token at eos_index is not EOS");
}

EncoderParams init_encoder(const ModelConfig& cfg) {
    if (cfg.dim <= 0 || cfg.layers <= 0 || cfg.heads <= 0 || cfg.vocab <= 1 ||
        cfg.max_len <= 0 || cfg.patches <= 0 || cfg.patch_features <= 0)
        throw ConfigError("init_encoder: non-positive model dimension");
    if (cfg.dim % cfg.heads != 0) throw ConfigError("init_encoder: dim not divisible by heads");
    if (cfg.max_len <= cfg.patches)
        throw ConfigError("init_encoder: max_len must exceed patch count");

    Rng rng(cfg.init_seed);
    const double trunk_sd = 1.0 / std::sqrt(static_cast<double>(cfg.dim));
    const double emb_sd = 0.02;

    EncoderParams p;
    p.cfg = cfg;
    p.tok_emb = random_normal(cfg.vocab, cfg.dim, emb_sd, rng);
    p.pos_emb = random_normal(cfg.max_len, cfg.dim, emb_sd, rng);
    p.patch_proj = random_normal(cfg.patch_features, cfg.dim, emb_sd, rng);
    p.layers.resize(cfg.layers);
    for (auto& layer : p.layers) {
        layer.ln1_g = Matrix(1, cfg.dim);
        layer.ln1_b = Matrix(1, cfg.dim);
        layer.ln2_g = Matrix(1, cfg.dim);
        layer.ln2_b = Matrix(1, cfg.dim);
        for (int j = 0; j < cfg.dim; ++j) layer.ln1_g.at(0, j) = layer.ln2_g.at(0, j) = 1.0;
        layer.wq = random_normal(cfg.dim, cfg.dim, trunk_sd, rng);
        layer.wk = random_normal(cfg.dim, cfg.dim, trunk_sd, rng);
        layer.wv = random_normal(cfg.dim, cfg.dim, trunk_sd, rng);
        layer.wo = random_normal(cfg.dim, cfg.dim, trunk_sd, rng);
        layer.w1 = random_normal(cfg.dim, cfg.mlp_dim(), trunk_sd, rng);
        layer.w2 = random_normal(cfg.mlp_dim(), cfg.dim, trunk_sd, rng);
    }
    p.lnf_g = Matrix(1, cfg.dim);
    p.lnf_b = Matrix(1, cfg.dim);
    for (int j = 0; j < cfg.dim; ++j) p.lnf_g.at(0, j) = 1.0;

    EncoderParams* self = &p;
    for (auto& [name, mat] : named_params(*self)) {
        (void)mat;
        p.trainable[name] = true;
    }
    return p;
}

namespace {

template <class Params, class MatrixPtr>
std::vector<std::pair<std::string, MatrixPtr>> named_params_impl(Params& p) {
    std::vector<std::pair<std::string, MatrixPtr>> out;
    out.emplace_back("tok_emb", &p.tok_emb);
    out.emplace_back("pos_emb", &p.pos_emb);
    out.emplace_back("patch_proj", &p.patch_proj);
    for (std::size_t i = 0; i < p.layers.size(); ++i) {
        const std::string base = "layers." + std::to_string(i) + ".";
        auto& layer = p.layers[i];
        out.emplace_back(base + "ln1.g", &layer.ln1_g);
        out.emplace_back(base + "ln1.b", &layer.ln1_b);
        out.emplace_back(base + "attn.wq", &layer.wq);
        out.emplace_back(base + "attn.wk", &layer.wk);
        out.emplace_back(base + "attn.wv", &layer.wv);
        out.emplace_back(base + "attn.wo", &layer.wo);
        out.emplace_back(base + "ln2.g", &layer.ln2_g);
        out.emplace_back(base + "ln2.b", &layer.ln2_b);
        out.emplace_back(base + "mlp.w1", &layer.w1);
        out.emplace_back(base + "mlp.w2", &layer.w2);
    }
    out.emplace_back("ln_f.g", &p.lnf_g);
    out.emplace_back("ln_f.b", &p.lnf_b);
    return out;
}

}  // namespace

std::vector<std::pair<std::string, Matrix*>> named_params(EncoderParams& p) {
    return named_params_impl<EncoderParams, Matrix*>(p);
}

std::vector<std::pair<std::string, const Matrix*>> named_params(const EncoderParams& p) {
    return named_params_impl<const EncoderParams, const Matrix*>(p);
}

std::vector<std::string> lora_target_names(const ModelConfig& cfg) {
    std::vector<std::string> names;
    for (int i = 0; i < cfg.layers; ++i) {
        const std::string base = "layers." + std::to_string(i) + ".";
        for (const char* leaf : {"attn.wq", "attn.wk", "attn.wv", "attn.wo", "mlp.w1", "mlp.w2"})
            names.push_back(base + leaf);
    }
    return names;
}

const g::NodePtr& BoundParams::at(const std::string& name) const {
    auto it = nodes.find(name);
    if (it == nodes.end()) throw ContractError("BoundParams: unknown parameter " + name);
    return it->second;
}

BoundParams bind_params(const EncoderParams& params, const LoRASet* adapters,
                        const std::set<std::string>& trainable_names) {
    BoundParams bp;
    bp.cfg = params.cfg;
    auto bind_one = [&](const std::string& name, const Matrix& m) {
        bp.nodes[name] =
            trainable_names.count(name) ? g::parameter(m) : g::constant(m);
    };
    for (const auto& [name, mat] : named_params(params)) bind_one(name, *mat);
    if (adapters) {
        bp.has_adapters = true;
        bp.lora_scaling = adapters->alpha / adapters->rank;
        for (const auto& [target, ad] : adapters->adapters) {
            bind_one("lora." + target + ".A", ad.a);
            bind_one("lora." + target + ".B", ad.b);
        }
    }
    const int dh = params.cfg.head_dim();
    for (int h = 0; h < params.cfg.heads; ++h) {
        Matrix sel(params.cfg.dim, dh);
        for (int j = 0; j < dh; ++j) sel.at(h * dh + j, j) = 1.0;
        bp.head_selector.push_back(g::constant(sel));
        bp.head_selector_t.push_back(g::constant(transposed(sel)));
    }
    return bp;
}

namespace {

// X*W plus the low-rank update (alpha/r) * (X*A^T)*B^T when an adapter exists.
g::NodePtr adapted_linear(const BoundParams& bp, const g::NodePtr& x,
                          const std::string& target) {
    g::NodePtr y = g::matmul(x, bp.at(target));
    if (!bp.has_adapters) return y;
    auto a_it = bp.nodes.find("lora." + target + ".A");
    if (a_it == bp.nodes.end()) return y;
    const auto& a = a_it->second;
    const auto& b = bp.at("lora." + target + ".B");
    g::NodePtr delta = g::matmul(g::matmul(x, g::transpose(a)), g::transpose(b));
    return g::add(y, g::scale(delta, bp.lora_scaling));
}

g::NodePtr trunk(const BoundParams& bp, g::NodePtr x, const std::vector<int>& mask) {
    const ModelConfig& cfg = bp.cfg;
    const double att_scale = 1.0 / std::sqrt(static_cast<double>(cfg.head_dim()));
    for (int li = 0; li < cfg.layers; ++li) {
        const std::string base = "layers." + std::to_string(li) + ".";
        g::NodePtr n1 = g::layernorm(x, bp.at(base + "ln1.g"), bp.at(base + "ln1.b"));
        g::NodePtr q = adapted_linear(bp, n1, base + "attn.wq");
        g::NodePtr k = adapted_linear(bp, n1, base + "attn.wk");
        g::NodePtr v = adapted_linear(bp, n1, base + "attn.wv");
        g::NodePtr ctx;
        for (int h = 0; h < cfg.heads; ++h) {
            g::NodePtr qh = g::matmul(q, bp.head_selector[h]);
            g::NodePtr kh = g::matmul(k, bp.head_selector[h]);
            g::NodePtr vh = g::matmul(v, bp.head_selector[h]);
            g::NodePtr scores = g::scale(g::matmul(qh, g::transpose(kh)), att_scale);
            g::NodePtr weights = g::masked_softmax_rows(scores, mask);
            g::NodePtr head = g::matmul(g::matmul(weights, vh), bp.head_selector_t[h]);
            ctx = ctx ? g::add(ctx, head) : head;
        }
        x = g::add(x, adapted_linear(bp, ctx, base + "attn.wo"));
        g::NodePtr n2 = g::layernorm(x, bp.at(base + "ln2.g"), bp.at(base + "ln2.b"));
        g::NodePtr m1 = g::gelu(adapted_linear(bp, n2, base + "mlp.w1"));
        x = g::add(x, adapted_linear(bp, m1, base + "mlp.w2"));
    }
    return g::layernorm(x, bp.at("ln_f.g"), bp.at("ln_f.b"));
}

std::vector<int> iota_ids(int n) {
    std::vector<int> ids(n);
    for (int i = 0; i < n; ++i) ids[i] = i;
    return ids;
}

}  // namespace

g::NodePtr encode_text_graph(const BoundParams& bp, const TokenSequence& seq) {
    validate_token_sequence(seq);
    const int n = static_cast<int>(seq.tokens.size());
    if (n > bp.cfg.max_len) throw ContractError("encode_text: sequence longer than max_len");
    for (int id : seq.tokens)
        if (id < 0 || id >= bp.cfg.vocab)
            throw ContractError("encode_text: token id outside vocabulary");
    g::NodePtr tok = g::embedding_lookup(bp.at("tok_emb"), seq.tokens);
    g::NodePtr pos = g::embedding_lookup(bp.at("pos_emb"), iota_ids(n));
    return trunk(bp, g::add(tok, pos), seq.mask);
}

g::NodePtr encode_image_graph(const BoundParams& bp, const SceneGrid& grid) {
    if (grid.patches.rows != bp.cfg.patches || grid.patches.cols != bp.cfg.patch_features)
        throw DimensionError("encode_image: grid shape mismatch");
    require_finite(grid.patches, "scene grid");
    g::NodePtr patch_emb = g::matmul(g::constant(grid.patches), bp.at("patch_proj"));
    g::NodePtr eos_emb = g::embedding_lookup(bp.at("tok_emb"), {kEosId});
    g::NodePtr x = g::concat_rows(patch_emb, eos_emb);  // (P+1) x d, EOS last
    g::NodePtr pos = g::embedding_lookup(bp.at("pos_emb"), iota_ids(bp.cfg.patches + 1));
    std::vector<int> mask(bp.cfg.patches + 1, 1);
    return trunk(bp, g::add(x, pos), mask);
}

HiddenStates encode_text(const EncoderParams& params, const LoRASet* adapters,
                         const TokenSequence& seq) {
    BoundParams bp = bind_params(params, adapters, {});
    HiddenStates hs;
    hs.h = encode_text_graph(bp, seq)->value;
    hs.mask = seq.mask;
    hs.eos_index = seq.eos_index;
    return hs;
}

HiddenStates encode_image(const EncoderParams& params, const LoRASet* adapters,
                          const SceneGrid& grid) {
    BoundParams bp = bind_params(params, adapters, {});
    HiddenStates hs;
    hs.h = encode_image_graph(bp, grid)->value;
    hs.mask.assign(params.cfg.patches + 1, 1);
    hs.eos_index = params.cfg.patches;
    return hs;
}

}  // namespace ngcg
