#include "ngcg/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "ngcg/embedder.hpp"
#include "ngcg/pooling.hpp"
#include "ngcg/rng.hpp"

namespace ngcg {

namespace g = graph;

EvalReport eval_split(const Checkpoint& model, const Corpus& corpus, const std::string& split,
                      bool strict_loc) {
    const auto queries = embed_split(model, corpus, split, "text");
    const auto candidates = embed_split(model, corpus, split, "image");
    EmbeddingIndex index = build_index(candidates);
    const int k_max = *std::max_element(kRecallKs.begin(), kRecallKs.end());
    std::vector<RetrievalResult> results;
    std::vector<std::string> truth_ids;
    std::vector<GeoPoint> truth_geo;
    results.reserve(queries.size());
    for (const auto& q : queries) {
        results.push_back(query_topk(index, q.vec, k_max));
        truth_ids.push_back(q.id);
        truth_geo.push_back(q.geo);
    }
    return evaluate(index, results, truth_ids, truth_geo, strict_loc);
}

namespace {

std::string trim_number(double v) {
    std::ostringstream out;
    out << v;
    return out.str();
}

AblationRow run_cell(const ExperimentConfig& cfg, const Corpus& corpus,
                     const std::string& axis_value) {
    TrainResult tr = train(corpus, cfg.model, cfg.train_config(), "", cfg.config_hash());
    AblationRow row;
    row.axis_value = axis_value;
    row.report = eval_split(tr.model, corpus, "test", cfg.strict_loc);
    row.seed = cfg.train_seed;
    row.config_hash = cfg.config_hash_hex();
    return row;
}

}  // namespace

std::vector<AblationRow> run_ablation(const std::string& axis, const ExperimentConfig& base) {
    Corpus corpus =
        base.corpus_path.empty() ? generate(base.data) : read_corpus(base.corpus_path);

    std::vector<AblationRow> rows;
    if (axis == "tau") {
        for (double tau : {0.02, 0.03, 0.05, 0.07, 0.1}) {
            ExperimentConfig cfg = base;
            cfg.temp_mode = TempMode::Fixed;
            cfg.temperature = tau;
            rows.push_back(run_cell(cfg, corpus, trim_number(tau)));
        }
        ExperimentConfig cfg = base;
        cfg.temp_mode = TempMode::Learnable;
        cfg.temperature = 0.07;  // conventional learnable init
        rows.push_back(run_cell(cfg, corpus, "learnable"));
    } else if (axis == "alpha") {
        for (double alpha : {16.0, 32.0, 64.0, 128.0}) {
            ExperimentConfig cfg = base;
            cfg.mode = TrainMode::Lora;
            cfg.lora_rank = 16;
            cfg.lora_alpha = alpha;
            rows.push_back(run_cell(cfg, corpus, trim_number(alpha)));
        }
    } else if (axis == "pooling") {
        for (PoolStrategy s : {PoolStrategy::Eos, PoolStrategy::Query, PoolStrategy::Average}) {
            ExperimentConfig cfg = base;
            cfg.pooling = s;
            rows.push_back(run_cell(cfg, corpus, to_string(s)));
        }
    } else if (axis == "mode") {
        for (TrainMode m : {TrainMode::Lora, TrainMode::Full}) {
            ExperimentConfig cfg = base;
            cfg.mode = m;
            rows.push_back(run_cell(cfg, corpus, to_string(m)));
        }
    } else {
        throw ConfigError("run_ablation: unknown axis '" + axis + "'");
    }
    return rows;
}

std::string ablation_csv(const std::vector<AblationRow>& rows) {
    std::ostringstream out;
    out << "axis_value,R@1,R@5,R@10,L@50,L@100,L@150,seed,config_hash\n";
    out.setf(std::ios::fixed);
    out.precision(6);
    for (const auto& row : rows) {
        row.report.validate();
        out << row.axis_value;
        for (int k : kRecallKs) out << "," << row.report.r_at_k.at(k);
        for (int d : kLocDs) out << "," << row.report.l_at_d.at(d);
        out << "," << row.seed << "," << row.config_hash << "\n";
    }
    return out.str();
}

namespace {

struct CompositeFixture {
    ModelConfig cfg;
    EncoderParams params;
    std::optional<LoRASet> adapters;
    PoolingConfig pooling;
    std::vector<TokenSequence> texts;
    std::vector<Matrix> grids;
    std::vector<std::string> names;     // trainable, ordered
    std::vector<Matrix> values;         // current value per name
    double init_log_tau = 0.0;
};

CompositeFixture make_fixture(std::uint64_t seed, TrainMode mode) {
    CompositeFixture fx;
    fx.cfg.dim = 8;
    fx.cfg.layers = 1;
    fx.cfg.heads = 2;
    fx.cfg.vocab = 16;
    fx.cfg.max_len = 12;
    fx.cfg.patches = 2;
    fx.cfg.patch_features = 3;
    fx.cfg.init_seed = seed;
    fx.params = init_encoder(fx.cfg);
    if (mode == TrainMode::Lora)
        fx.adapters = attach(fx.params, 2, 4.0, seed ^ 0x9e3779b97f4a7c15ULL);

    Rng rng(seed + 17);
    fx.pooling.strategy = PoolStrategy::Query;
    fx.pooling.query = random_normal(1, fx.cfg.dim, 0.5, rng);
    fx.init_log_tau = std::log(0.07);

    for (int item = 0; item < 2; ++item) {
        std::vector<int> tokens;
        const int len = 3 + static_cast<int>(rng.integer(3));
        for (int i = 0; i < len; ++i)
            tokens.push_back(2 + static_cast<int>(rng.integer(fx.cfg.vocab - 2)));
        tokens.push_back(kEosId);
        fx.texts.push_back(make_token_sequence(std::move(tokens), len));
        fx.grids.push_back(
            random_uniform(fx.cfg.patches, fx.cfg.patch_features, -1.0, 1.0, rng));
    }

    TrainConfig tc;
    tc.mode = mode;
    tc.pooling = PoolStrategy::Query;
    tc.temp = TemperatureConfig::learnable(0.07);
    auto [trainable, frozen] =
        param_partition(tc, fx.params, fx.adapters ? &*fx.adapters : nullptr, fx.pooling);
    (void)frozen;
    fx.names.assign(trainable.begin(), trainable.end());

    for (const std::string& name : fx.names) {
        if (name == "loss.log_tau") {
            Matrix m(1, 1);
            m.data[0] = fx.init_log_tau;
            fx.values.push_back(m);
        } else if (name == "pool.query") {
            fx.values.push_back(fx.pooling.query);
        } else if (name.rfind("lora.", 0) == 0) {
            const bool is_a = name.compare(name.size() - 2, 2, ".A") == 0;
            const std::string target = name.substr(5, name.size() - 7);
            const LoRAAdapter& ad = fx.adapters->adapters.at(target);
            fx.values.push_back(is_a ? ad.a : ad.b);
        } else {
            bool found = false;
            for (const auto& [pname, mat] : named_params(fx.params)) {
                if (pname == name) {
                    fx.values.push_back(*mat);
                    found = true;
                }
            }
            if (!found) throw ContractError("composite fixture: missing " + name);
        }
    }
    return fx;
}

g::NodePtr composite_loss(const CompositeFixture& fx,
                          const std::vector<g::NodePtr>& leaves,
                          BoundParams* bound_out = nullptr) {
    BoundParams bp =
        bind_params(fx.params, fx.adapters ? &*fx.adapters : nullptr, {});
    g::NodePtr query_node = g::constant(fx.pooling.query);
    Matrix lt(1, 1);
    lt.data[0] = fx.init_log_tau;
    g::NodePtr log_tau = g::constant(lt);
    for (std::size_t i = 0; i < fx.names.size(); ++i) {
        const std::string& name = fx.names[i];
        if (name == "pool.query") query_node = leaves[i];
        else if (name == "loss.log_tau") log_tau = leaves[i];
        else bp.nodes[name] = leaves[i];
    }
    g::NodePtr q_rows, s_rows;
    for (std::size_t item = 0; item < fx.texts.size(); ++item) {
        g::NodePtr ht = encode_text_graph(bp, fx.texts[item]);
        g::NodePtr qi = pool_graph(ht, fx.texts[item].mask, fx.texts[item].eos_index,
                                   PoolStrategy::Query, query_node);
        SceneGrid grid{fx.grids[item], GeoPoint(0.0, 0.0)};
        g::NodePtr hi = encode_image_graph(bp, grid);
        std::vector<int> imask(fx.cfg.patches + 1, 1);
        g::NodePtr si =
            pool_graph(hi, imask, fx.cfg.patches, PoolStrategy::Query, query_node);
        q_rows = q_rows ? g::concat_rows(q_rows, qi) : qi;
        s_rows = s_rows ? g::concat_rows(s_rows, si) : si;
    }
    g::NodePtr inv_tau = g::exp(g::scale(log_tau, -1.0));
    if (bound_out) *bound_out = bp;
    return info_nce_graph(q_rows, s_rows, inv_tau, LossDirection::Symmetric);
}

}  // namespace

GradCheckReport composite_gradcheck(std::uint64_t seed, TrainMode mode, double step,
                                    double tol) {
    CompositeFixture fx = make_fixture(seed, mode);
    auto builder = [&fx](const std::vector<g::NodePtr>& leaves) {
        return composite_loss(fx, leaves);
    };
    return gradcheck(builder, fx.values, step, tol, fx.names);
}

std::vector<std::pair<std::string, double>> frozen_gradient_report(std::uint64_t seed) {
    CompositeFixture fx = make_fixture(seed, TrainMode::Lora);
    std::vector<g::NodePtr> leaves;
    for (const auto& v : fx.values) leaves.push_back(g::parameter(v));
    BoundParams bound;
    g::NodePtr loss = composite_loss(fx, leaves, &bound);
    g::backward(loss);
    // base matrices enter the loss graph as constants in LoRA mode, so the
    // gradient reaching them is identically zero
    std::vector<std::pair<std::string, double>> out;
    for (const auto& [name, mat] : named_params(fx.params)) {
        (void)mat;
        const Matrix grad = g::grad_of(bound.at(name));
        double mx = 0.0;
        for (double v : grad.data) mx = std::max(mx, std::fabs(v));
        out.emplace_back(name, mx);
    }
    return out;
}

}  // namespace ngcg
