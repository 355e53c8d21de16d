#pragma once

#include <string>

#include "ngcg/graph.hpp"
#include "ngcg/matrix.hpp"

namespace ngcg {

enum class TempMode { Fixed, Learnable };

struct TemperatureConfig {
    TempMode mode = TempMode::Fixed;
    double value = 0.03;    // tau, or its initial value when learnable
    double log_tau = 0.0;   // current log-temperature, tracked in learnable mode

    static TemperatureConfig fixed(double tau);
    static TemperatureConfig learnable(double initial_tau);
};

// Current tau; exp(log-temperature) in learnable mode.
double temperature_value(const TemperatureConfig& temp);

enum class LossDirection { T2I, Symmetric };

LossDirection direction_from_string(const std::string& name);
std::string to_string(LossDirection d);

// In-batch pairs: query i's positive is satellite i. Rows must be unit-norm.
struct Batch {
    Matrix q;  // B x d
    Matrix s;  // B x d
};

// InfoNCE over a B x B similarity matrix node (pre-temperature). inv_tau is a
// 1 x 1 node holding 1/tau. Row reductions are order-invariant, so permuting
// the negatives (with pairing re-indexed) leaves the loss bit-identical.
graph::NodePtr info_nce_from_sims(const graph::NodePtr& sims, const graph::NodePtr& inv_tau,
                                  LossDirection direction);

graph::NodePtr info_nce_graph(const graph::NodePtr& q, const graph::NodePtr& s,
                              const graph::NodePtr& inv_tau, LossDirection direction);

// Builds 1/tau from the temperature config: a constant for fixed mode, or
// exp(-log_tau) of the given trainable 1 x 1 log-temperature node.
graph::NodePtr inv_tau_node(const TemperatureConfig& temp,
                            const graph::NodePtr& log_tau_param = nullptr);

// Value-level entry point; validates the batch invariants.
graph::NodePtr info_nce(const Batch& batch, const TemperatureConfig& temp,
                        LossDirection direction);

}  // namespace ngcg
