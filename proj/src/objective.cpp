#include "ngcg/objective.hpp"

#include <cmath>

namespace ngcg {

namespace g = graph;

TemperatureConfig TemperatureConfig::fixed(double tau) {
    if (!(tau > 0.0)) throw ContractError("temperature must be > 0");
    return {TempMode::Fixed, tau, std::log(tau)};
}

TemperatureConfig TemperatureConfig::learnable(double initial_tau) {
    if (!(initial_tau > 0.0)) throw ContractError("temperature must be > 0");
    return {TempMode::Learnable, initial_tau, std::log(initial_tau)};
}

double temperature_value(const TemperatureConfig& temp) {
    return temp.mode == TempMode::Fixed ? temp.value : std::exp(temp.log_tau);
}

LossDirection direction_from_string(const std::string& name) {
    if (name == "t2i") return LossDirection::T2I;
    if (name == "symmetric") return LossDirection::Symmetric;
    throw ConfigError("unknown loss direction '" + name + "'");
}

std::string to_string(LossDirection d) {
    return d == LossDirection::T2I ? "t2i" : "symmetric";
}

g::NodePtr inv_tau_node(const TemperatureConfig& temp, const g::NodePtr& log_tau_param) {
    if (temp.mode == TempMode::Fixed) {
        Matrix m(1, 1);
        m.data[0] = 1.0 / temp.value;
        return g::constant(m);
    }
    g::NodePtr log_tau = log_tau_param;
    if (!log_tau) {
        Matrix m(1, 1);
        m.data[0] = temp.log_tau;
        log_tau = g::constant(m);
    }
    return g::exp(g::scale(log_tau, -1.0));
}

g::NodePtr info_nce_from_sims(const g::NodePtr& sims, const g::NodePtr& inv_tau,
                              LossDirection direction) {
    const int b = sims->value.rows;
    if (b < 1) throw ContractError("info_nce: empty batch");
    if (sims->value.cols != b) throw DimensionError("info_nce: similarity matrix not square");
    g::NodePtr scaled = g::scalar_mul(sims, inv_tau);
    g::NodePtr diag_mask = g::constant(identity(b));
    // sum of positive-pair logits, shared by both directions
    g::NodePtr pos_sum = g::sum_all(g::mul(scaled, diag_mask));
    g::NodePtr t2i = g::add(g::sum_all(g::logsumexp_rows(scaled)), g::scale(pos_sum, -1.0));
    if (direction == LossDirection::T2I) return g::scale(t2i, 1.0 / b);
    g::NodePtr i2t = g::add(g::sum_all(g::logsumexp_rows(g::transpose(scaled))),
                            g::scale(pos_sum, -1.0));
    return g::scale(g::add(t2i, i2t), 0.5 / b);
}

g::NodePtr info_nce_graph(const g::NodePtr& q, const g::NodePtr& s,
                          const g::NodePtr& inv_tau, LossDirection direction) {
    if (!q->value.same_shape(s->value))
        throw DimensionError("info_nce: query/satellite shape mismatch");
    return info_nce_from_sims(g::matmul(q, g::transpose(s)), inv_tau, direction);
}

g::NodePtr info_nce(const Batch& batch, const TemperatureConfig& temp,
                    LossDirection direction) {
    if (batch.q.rows < 1) throw ContractError("info_nce: empty batch");
    if (!batch.q.same_shape(batch.s))
        throw DimensionError("info_nce: query/satellite shape mismatch");
    for (const Matrix* m : {&batch.q, &batch.s}) {
        for (int i = 0; i < m->rows; ++i) {
            double sq = 0.0;
            for (int j = 0; j < m->cols; ++j) sq += m->at(i, j) * m->at(i, j);
            if (std::fabs(std::sqrt(sq) - 1.0) > 1e-9)
                throw NumericError("info_nce: batch row " + std::to_string(i) +
                                   " is not unit-norm");
        }
    }
    if (!(temperature_value(temp) > 0.0)) throw ContractError("info_nce: tau must be > 0");
    return info_nce_graph(g::parameter(batch.q), g::parameter(batch.s), inv_tau_node(temp),
                          direction);
}

}  // namespace ngcg
