#pragma once

#include <string>

#include "ngcg/encoder.hpp"
#include "ngcg/graph.hpp"
#include "ngcg/matrix.hpp"

namespace ngcg {

enum class PoolStrategy { Eos, Query, Average };

PoolStrategy pool_strategy_from_string(const std::string& name);
std::string to_string(PoolStrategy s);

struct PoolingConfig {
    PoolStrategy strategy = PoolStrategy::Eos;
    Matrix query;  // 1 x d, present iff strategy == Query

    void validate(int dim) const;
};

// Aggregates hidden states into a unit-norm embedding node.
//   eos:     hidden state at the EOS position
//   query:   attention over valid positions, logits (Q . h_i) / sqrt(d)
//   average: mean over valid positions
// query_node must be the bound 1 x d query for the Query strategy.
graph::NodePtr pool_graph(const graph::NodePtr& h, const std::vector<int>& mask, int eos_index,
                          PoolStrategy strategy, const graph::NodePtr& query_node);

// Value-level pooling; returns a unit-norm 1 x d embedding.
Matrix pool(const HiddenStates& h, const PoolingConfig& cfg);

}  // namespace ngcg
