#include "ngcg/pooling.hpp"

#include <cmath>

namespace ngcg {

namespace g = graph;

PoolStrategy pool_strategy_from_string(const std::string& name) {
    if (name == "eos") return PoolStrategy::Eos;
    if (name == "query") return PoolStrategy::Query;
    if (name == "average") return PoolStrategy::Average;
    throw ConfigError("unknown pooling strategy '" + name + "'");
}

std::string to_string(PoolStrategy s) {
    switch (s) {
        case PoolStrategy::Eos: return "eos";
        case PoolStrategy::Query: return "query";
        case PoolStrategy::Average: return "average";
    }
    throw ContractError("invalid pooling strategy value");
}

void PoolingConfig::validate(int dim) const {
    if (strategy == PoolStrategy::Query) {
        if (query.rows != 1 || query.cols != dim)
            throw DimensionError("PoolingConfig: query must be 1 x dim");
        require_finite(query, "pooling query");
    }
}

g::NodePtr pool_graph(const g::NodePtr& h, const std::vector<int>& mask, int eos_index,
                      PoolStrategy strategy, const g::NodePtr& query_node) {
    const int n = h->value.rows;
    if (static_cast<int>(mask.size()) != n)
        throw DimensionError("pool: mask length != hidden rows");
    int nvalid = 0;
    for (int m : mask) nvalid += (m != 0);
    if (nvalid == 0) throw ContractError("pool: no valid positions");

    g::NodePtr pooled;
    switch (strategy) {
        case PoolStrategy::Eos:
            if (eos_index < 0 || eos_index >= n || !mask[eos_index])
                throw ContractError("pool: EOS index outside the valid region");
            pooled = g::slice_row(h, eos_index);
            break;
        case PoolStrategy::Query: {
            if (!query_node) throw ContractError("pool: query strategy without query vector");
            const double s = 1.0 / std::sqrt(static_cast<double>(h->value.cols));
            // logits over positions: (Q . h_i) / sqrt(d), softmax over valid only
            g::NodePtr logits = g::scale(g::transpose(g::matmul(h, g::transpose(query_node))), s);
            g::NodePtr weights = g::masked_softmax_rows(logits, mask);  // 1 x T
            pooled = g::matmul(weights, h);
            break;
        }
        case PoolStrategy::Average:
            pooled = g::masked_mean_rows(h, mask);
            break;
    }
    return g::l2_normalize_rows(pooled);
}

Matrix pool(const HiddenStates& h, const PoolingConfig& cfg) {
    cfg.validate(h.h.cols);
    g::NodePtr hidden = g::constant(h.h);
    g::NodePtr query =
        cfg.strategy == PoolStrategy::Query ? g::constant(cfg.query) : nullptr;
    return pool_graph(hidden, h.mask, h.eos_index, cfg.strategy, query)->value;
}

}  // namespace ngcg
