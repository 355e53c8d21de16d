#include "ngcg/graph.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>

namespace ngcg::graph {

namespace {

NodePtr make_node(Matrix value, std::string op, std::vector<NodePtr> parents,
                  std::function<void(Node&)> backprop) {
    auto n = std::make_shared<Node>();
    n->value = std::move(value);
    n->op = std::move(op);
    n->parents = std::move(parents);
    for (const auto& p : n->parents)
        if (p->requires_grad) n->requires_grad = true;
    if (n->requires_grad) n->backprop = std::move(backprop);
    return n;
}

bool wants_grad(const Node& n) { return n.requires_grad; }

Matrix& gref(Node& n) {
    if (n.grad.rows == 0 && n.grad.cols == 0) n.grad = Matrix(n.value.rows, n.value.cols);
    return n.grad;
}

// Sums values in ascending order so the result does not depend on input order.
double ordered_sum(std::vector<double> xs) {
    std::sort(xs.begin(), xs.end());
    double s = 0.0;
    for (double x : xs) s += x;
    return s;
}

double gelu_scalar(double x) { return 0.5 * x * (1.0 + std::erf(x * M_SQRT1_2)); }

double gelu_deriv(double x) {
    const double phi = std::exp(-0.5 * x * x) / std::sqrt(2.0 * M_PI);
    return 0.5 * (1.0 + std::erf(x * M_SQRT1_2)) + x * phi;
}

}  // namespace

NodePtr constant(Matrix value) {
    require_finite(value, "constant node");
    return make_node(std::move(value), "const", {}, {});
}

NodePtr parameter(Matrix value) {
    require_finite(value, "parameter node");
    auto n = make_node(std::move(value), "param", {}, {});
    n->requires_grad = true;
    return n;
}

NodePtr matmul(const NodePtr& a, const NodePtr& b) {
    if (a->value.cols != b->value.rows) throw DimensionError("matmul: inner dims differ");
    Matrix out(a->value.rows, b->value.cols);
    gemm_nn(a->value, b->value, out);
    return make_node(std::move(out), "matmul", {a, b}, [](Node& self) {
        Node& pa = *self.parents[0];
        Node& pb = *self.parents[1];
        if (wants_grad(pa)) gemm_nt(self.grad, pb.value, gref(pa));  // dA += G*B^T
        if (wants_grad(pb)) gemm_tn(pa.value, self.grad, gref(pb));  // dB += A^T*G
    });
}

NodePtr add(const NodePtr& a, const NodePtr& b) {
    if (!a->value.same_shape(b->value)) throw DimensionError("add: shape mismatch");
    Matrix out = a->value;
    for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] += b->value.data[i];
    return make_node(std::move(out), "add", {a, b}, [](Node& self) {
        for (int k = 0; k < 2; ++k) {
            Node& p = *self.parents[k];
            if (!wants_grad(p)) continue;
            Matrix& g = gref(p);
            for (std::size_t i = 0; i < g.data.size(); ++i) g.data[i] += self.grad.data[i];
        }
    });
}

NodePtr scale(const NodePtr& a, double c) {
    if (!std::isfinite(c)) throw NumericError("scale: non-finite factor");
    Matrix out = a->value;
    for (double& v : out.data) v *= c;
    return make_node(std::move(out), "scale", {a}, [c](Node& self) {
        Node& p = *self.parents[0];
        if (!wants_grad(p)) return;
        Matrix& g = gref(p);
        for (std::size_t i = 0; i < g.data.size(); ++i) g.data[i] += c * self.grad.data[i];
    });
}

NodePtr mul(const NodePtr& a, const NodePtr& b) {
    if (!a->value.same_shape(b->value)) throw DimensionError("mul: shape mismatch");
    Matrix out = a->value;
    for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] *= b->value.data[i];
    return make_node(std::move(out), "mul", {a, b}, [](Node& self) {
        Node& pa = *self.parents[0];
        Node& pb = *self.parents[1];
        if (wants_grad(pa)) {
            Matrix& g = gref(pa);
            for (std::size_t i = 0; i < g.data.size(); ++i)
                g.data[i] += self.grad.data[i] * pb.value.data[i];
        }
        if (wants_grad(pb)) {
            Matrix& g = gref(pb);
            for (std::size_t i = 0; i < g.data.size(); ++i)
                g.data[i] += self.grad.data[i] * pa.value.data[i];
        }
    });
}

namespace {

// Shared forward for masked/unmasked row softmax. Masked columns get weight
// exactly 0, so masked content can never leak into the output.
Matrix softmax_rows_value(const Matrix& x, const std::vector<int>* key_mask) {
    Matrix y(x.rows, x.cols);
    for (int i = 0; i < x.rows; ++i) {
        double m = -HUGE_VAL;
        for (int j = 0; j < x.cols; ++j)
            if (!key_mask || (*key_mask)[j]) m = std::max(m, x.at(i, j));
        if (m == -HUGE_VAL) throw ContractError("softmax row with no valid entries");
        double denom = 0.0;
        for (int j = 0; j < x.cols; ++j) {
            if (!key_mask || (*key_mask)[j]) {
                y.at(i, j) = std::exp(x.at(i, j) - m);
                denom += y.at(i, j);
            } else {
                y.at(i, j) = 0.0;
            }
        }
        for (int j = 0; j < x.cols; ++j) y.at(i, j) /= denom;
    }
    return y;
}

std::function<void(Node&)> softmax_backprop(std::vector<int> key_mask) {
    return [key_mask = std::move(key_mask)](Node& self) {
        Node& p = *self.parents[0];
        if (!wants_grad(p)) return;
        Matrix& g = gref(p);
        const Matrix& y = self.value;
        for (int i = 0; i < y.rows; ++i) {
            double dotgy = 0.0;
            for (int j = 0; j < y.cols; ++j) dotgy += self.grad.at(i, j) * y.at(i, j);
            for (int j = 0; j < y.cols; ++j) {
                if (!key_mask.empty() && !key_mask[j]) continue;
                g.at(i, j) += y.at(i, j) * (self.grad.at(i, j) - dotgy);
            }
        }
    };
}

}  // namespace

NodePtr softmax_rows(const NodePtr& a) {
    return make_node(softmax_rows_value(a->value, nullptr), "softmax-rows", {a},
                     softmax_backprop({}));
}

NodePtr masked_softmax_rows(const NodePtr& a, const std::vector<int>& key_mask) {
    if (static_cast<int>(key_mask.size()) != a->value.cols)
        throw DimensionError("masked-softmax-rows: mask length != cols");
    return make_node(softmax_rows_value(a->value, &key_mask), "masked-softmax-rows", {a},
                     softmax_backprop(key_mask));
}

NodePtr layernorm(const NodePtr& x, const NodePtr& gain, const NodePtr& bias) {
    const int d = x->value.cols;
    if (gain->value.rows != 1 || gain->value.cols != d || bias->value.rows != 1 ||
        bias->value.cols != d)
        throw DimensionError("layernorm: gain/bias must be 1 x cols");
    Matrix out(x->value.rows, d);
    for (int i = 0; i < x->value.rows; ++i) {
        double mean = 0.0;
        for (int j = 0; j < d; ++j) mean += x->value.at(i, j);
        mean /= d;
        double var = 0.0;
        for (int j = 0; j < d; ++j) {
            double c = x->value.at(i, j) - mean;
            var += c * c;
        }
        var /= d;
        const double inv = 1.0 / std::sqrt(var + kLayerNormEps);
        for (int j = 0; j < d; ++j)
            out.at(i, j) = (x->value.at(i, j) - mean) * inv * gain->value.at(0, j) +
                           bias->value.at(0, j);
    }
    return make_node(std::move(out), "layernorm", {x, gain, bias}, [d](Node& self) {
        Node& px = *self.parents[0];
        Node& pg = *self.parents[1];
        Node& pb = *self.parents[2];
        for (int i = 0; i < px.value.rows; ++i) {
            double mean = 0.0;
            for (int j = 0; j < d; ++j) mean += px.value.at(i, j);
            mean /= d;
            double var = 0.0;
            for (int j = 0; j < d; ++j) {
                double c = px.value.at(i, j) - mean;
                var += c * c;
            }
            var /= d;
            const double inv = 1.0 / std::sqrt(var + kLayerNormEps);
            // xhat and the two row sums the input gradient needs
            double sum_dxh = 0.0, sum_dxh_xh = 0.0;
            std::vector<double> dxh(d), xh(d);
            for (int j = 0; j < d; ++j) {
                xh[j] = (px.value.at(i, j) - mean) * inv;
                dxh[j] = self.grad.at(i, j) * pg.value.at(0, j);
                sum_dxh += dxh[j];
                sum_dxh_xh += dxh[j] * xh[j];
            }
            if (wants_grad(px)) {
                Matrix& gx = gref(px);
                for (int j = 0; j < d; ++j)
                    gx.at(i, j) += inv * (dxh[j] - sum_dxh / d - xh[j] * sum_dxh_xh / d);
            }
            if (wants_grad(pg)) {
                Matrix& gg = gref(pg);
                for (int j = 0; j < d; ++j) gg.at(0, j) += self.grad.at(i, j) * xh[j];
            }
            if (wants_grad(pb)) {
                Matrix& gb = gref(pb);
                for (int j = 0; j < d; ++j) gb.at(0, j) += self.grad.at(i, j);
            }
        }
    });
}

NodePtr gelu(const NodePtr& a) {
    Matrix out = a->value;
    for (double& v : out.data) v = gelu_scalar(v);
    return make_node(std::move(out), "gelu", {a}, [](Node& self) {
        Node& p = *self.parents[0];
        if (!wants_grad(p)) return;
        Matrix& g = gref(p);
        for (std::size_t i = 0; i < g.data.size(); ++i)
            g.data[i] += self.grad.data[i] * gelu_deriv(p.value.data[i]);
    });
}

NodePtr embedding_lookup(const NodePtr& table, const std::vector<int>& ids) {
    const int v = table->value.rows, d = table->value.cols;
    for (int id : ids)
        if (id < 0 || id >= v) throw ContractError("embedding-lookup: id out of range");
    Matrix out(static_cast<int>(ids.size()), d);
    for (std::size_t i = 0; i < ids.size(); ++i)
        for (int j = 0; j < d; ++j) out.at(static_cast<int>(i), j) = table->value.at(ids[i], j);
    return make_node(std::move(out), "embedding-lookup", {table}, [ids, d](Node& self) {
        Node& p = *self.parents[0];
        if (!wants_grad(p)) return;
        Matrix& g = gref(p);
        for (std::size_t i = 0; i < ids.size(); ++i)
            for (int j = 0; j < d; ++j) g.at(ids[i], j) += self.grad.at(static_cast<int>(i), j);
    });
}

NodePtr masked_mean_rows(const NodePtr& a, const std::vector<int>& mask) {
    if (static_cast<int>(mask.size()) != a->value.rows)
        throw DimensionError("masked-mean-rows: mask length != rows");
    int nvalid = 0;
    for (int m : mask) nvalid += (m != 0);
    if (nvalid == 0) throw ContractError("masked-mean-rows: no valid rows");
    Matrix out(1, a->value.cols);
    for (int i = 0; i < a->value.rows; ++i) {
        if (!mask[i]) continue;
        for (int j = 0; j < a->value.cols; ++j) out.at(0, j) += a->value.at(i, j);
    }
    for (double& v : out.data) v /= nvalid;
    return make_node(std::move(out), "masked-mean-rows", {a}, [mask, nvalid](Node& self) {
        Node& p = *self.parents[0];
        if (!wants_grad(p)) return;
        Matrix& g = gref(p);
        for (int i = 0; i < g.rows; ++i) {
            if (!mask[i]) continue;
            for (int j = 0; j < g.cols; ++j) g.at(i, j) += self.grad.at(0, j) / nvalid;
        }
    });
}

NodePtr concat_rows(const NodePtr& a, const NodePtr& b) {
    if (a->value.cols != b->value.cols) throw DimensionError("concat-rows: cols differ");
    Matrix out(a->value.rows + b->value.rows, a->value.cols);
    std::copy(a->value.data.begin(), a->value.data.end(), out.data.begin());
    std::copy(b->value.data.begin(), b->value.data.end(),
              out.data.begin() + a->value.data.size());
    return make_node(std::move(out), "concat-rows", {a, b}, [](Node& self) {
        Node& pa = *self.parents[0];
        Node& pb = *self.parents[1];
        const std::size_t na = pa.value.data.size();
        if (wants_grad(pa)) {
            Matrix& g = gref(pa);
            for (std::size_t i = 0; i < na; ++i) g.data[i] += self.grad.data[i];
        }
        if (wants_grad(pb)) {
            Matrix& g = gref(pb);
            for (std::size_t i = 0; i < g.data.size(); ++i) g.data[i] += self.grad.data[na + i];
        }
    });
}

NodePtr slice_row(const NodePtr& a, int row) {
    if (row < 0 || row >= a->value.rows) throw ContractError("slice-row: row out of range");
    Matrix out(1, a->value.cols);
    for (int j = 0; j < a->value.cols; ++j) out.at(0, j) = a->value.at(row, j);
    return make_node(std::move(out), "slice-row", {a}, [row](Node& self) {
        Node& p = *self.parents[0];
        if (!wants_grad(p)) return;
        Matrix& g = gref(p);
        for (int j = 0; j < g.cols; ++j) g.at(row, j) += self.grad.at(0, j);
    });
}

NodePtr dot(const NodePtr& a, const NodePtr& b) {
    if (!a->value.same_shape(b->value)) throw DimensionError("dot: shape mismatch");
    Matrix out(1, 1);
    for (std::size_t i = 0; i < a->value.data.size(); ++i)
        out.data[0] += a->value.data[i] * b->value.data[i];
    return make_node(std::move(out), "dot", {a, b}, [](Node& self) {
        Node& pa = *self.parents[0];
        Node& pb = *self.parents[1];
        const double g = self.grad.data[0];
        if (wants_grad(pa)) {
            Matrix& ga = gref(pa);
            for (std::size_t i = 0; i < ga.data.size(); ++i) ga.data[i] += g * pb.value.data[i];
        }
        if (wants_grad(pb)) {
            Matrix& gb = gref(pb);
            for (std::size_t i = 0; i < gb.data.size(); ++i) gb.data[i] += g * pa.value.data[i];
        }
    });
}

NodePtr log(const NodePtr& a) {
    Matrix out = a->value;
    for (double& v : out.data) {
        if (v <= 0.0) throw NumericError("log: non-positive input");
        v = std::log(v);
    }
    return make_node(std::move(out), "log", {a}, [](Node& self) {
        Node& p = *self.parents[0];
        if (!wants_grad(p)) return;
        Matrix& g = gref(p);
        for (std::size_t i = 0; i < g.data.size(); ++i)
            g.data[i] += self.grad.data[i] / p.value.data[i];
    });
}

NodePtr exp(const NodePtr& a) {
    Matrix out = a->value;
    for (double& v : out.data) v = std::exp(v);
    require_finite(out, "exp output");
    return make_node(std::move(out), "exp", {a}, [](Node& self) {
        Node& p = *self.parents[0];
        if (!wants_grad(p)) return;
        Matrix& g = gref(p);
        for (std::size_t i = 0; i < g.data.size(); ++i)
            g.data[i] += self.grad.data[i] * self.value.data[i];
    });
}

NodePtr l2_normalize_rows(const NodePtr& a) {
    Matrix out(a->value.rows, a->value.cols);
    for (int i = 0; i < a->value.rows; ++i) {
        double sq = 0.0;
        for (int j = 0; j < a->value.cols; ++j) sq += a->value.at(i, j) * a->value.at(i, j);
        const double norm = std::sqrt(sq);
        if (norm < 1e-154) throw NumericError("l2-normalize-rows: zero-norm row");
        for (int j = 0; j < a->value.cols; ++j) out.at(i, j) = a->value.at(i, j) / norm;
    }
    return make_node(std::move(out), "l2-normalize-rows", {a}, [](Node& self) {
        Node& p = *self.parents[0];
        if (!wants_grad(p)) return;
        Matrix& g = gref(p);
        for (int i = 0; i < p.value.rows; ++i) {
            double sq = 0.0;
            for (int j = 0; j < p.value.cols; ++j) sq += p.value.at(i, j) * p.value.at(i, j);
            const double norm = std::sqrt(sq);
            double gy = 0.0;
            for (int j = 0; j < p.value.cols; ++j) gy += self.grad.at(i, j) * self.value.at(i, j);
            for (int j = 0; j < p.value.cols; ++j)
                g.at(i, j) += (self.grad.at(i, j) - gy * self.value.at(i, j)) / norm;
        }
    });
}

NodePtr transpose(const NodePtr& a) {
    return make_node(transposed(a->value), "transpose", {a}, [](Node& self) {
        Node& p = *self.parents[0];
        if (!wants_grad(p)) return;
        Matrix& g = gref(p);
        for (int i = 0; i < g.rows; ++i)
            for (int j = 0; j < g.cols; ++j) g.at(i, j) += self.grad.at(j, i);
    });
}

NodePtr logsumexp_rows(const NodePtr& a) {
    Matrix out(a->value.rows, 1);
    for (int i = 0; i < a->value.rows; ++i) {
        double m = -HUGE_VAL;
        for (int j = 0; j < a->value.cols; ++j) m = std::max(m, a->value.at(i, j));
        std::vector<double> exps(a->value.cols);
        for (int j = 0; j < a->value.cols; ++j) exps[j] = std::exp(a->value.at(i, j) - m);
        out.at(i, 0) = m + std::log(ordered_sum(std::move(exps)));
    }
    return make_node(std::move(out), "logsumexp-rows", {a}, [](Node& self) {
        Node& p = *self.parents[0];
        if (!wants_grad(p)) return;
        Matrix& g = gref(p);
        for (int i = 0; i < p.value.rows; ++i) {
            double m = -HUGE_VAL;
            for (int j = 0; j < p.value.cols; ++j) m = std::max(m, p.value.at(i, j));
            std::vector<double> exps(p.value.cols);
            for (int j = 0; j < p.value.cols; ++j) exps[j] = std::exp(p.value.at(i, j) - m);
            const double denom = ordered_sum(exps);
            for (int j = 0; j < p.value.cols; ++j)
                g.at(i, j) += self.grad.at(i, 0) * exps[j] / denom;
        }
    });
}

NodePtr scalar_mul(const NodePtr& a, const NodePtr& s) {
    if (!s->value.is_scalar()) throw DimensionError("scalar-mul: multiplier must be 1x1");
    const double sv = s->value.data[0];
    Matrix out = a->value;
    for (double& v : out.data) v *= sv;
    return make_node(std::move(out), "scalar-mul", {a, s}, [](Node& self) {
        Node& pa = *self.parents[0];
        Node& ps = *self.parents[1];
        const double sv = ps.value.data[0];
        if (wants_grad(pa)) {
            Matrix& g = gref(pa);
            for (std::size_t i = 0; i < g.data.size(); ++i) g.data[i] += sv * self.grad.data[i];
        }
        if (wants_grad(ps)) {
            double acc = 0.0;
            for (std::size_t i = 0; i < pa.value.data.size(); ++i)
                acc += self.grad.data[i] * pa.value.data[i];
            gref(ps).data[0] += acc;
        }
    });
}

NodePtr sum_all(const NodePtr& a) {
    Matrix out(1, 1);
    out.data[0] = ordered_sum(a->value.data);
    return make_node(std::move(out), "sum-all", {a}, [](Node& self) {
        Node& p = *self.parents[0];
        if (!wants_grad(p)) return;
        Matrix& g = gref(p);
        for (double& v : g.data) v += self.grad.data[0];
    });
}

NodePtr forward_op(const std::string& tag, const std::vector<NodePtr>& inputs,
                   const OpAttrs& attrs) {
    auto arity = [&](std::size_t n) {
        if (inputs.size() != n)
            throw ContractError("forward_op " + tag + ": expected " + std::to_string(n) +
                                " inputs");
    };
    for (const auto& in : inputs) require_finite(in->value, "forward_op input");
    if (tag == "matmul") { arity(2); return matmul(inputs[0], inputs[1]); }
    if (tag == "add") { arity(2); return add(inputs[0], inputs[1]); }
    if (tag == "scale") { arity(1); return scale(inputs[0], attrs.scalar); }
    if (tag == "elementwise-mul") { arity(2); return mul(inputs[0], inputs[1]); }
    if (tag == "softmax-rows") { arity(1); return softmax_rows(inputs[0]); }
    if (tag == "masked-softmax-rows") { arity(1); return masked_softmax_rows(inputs[0], attrs.mask); }
    if (tag == "layernorm") { arity(3); return layernorm(inputs[0], inputs[1], inputs[2]); }
    if (tag == "gelu") { arity(1); return gelu(inputs[0]); }
    if (tag == "embedding-lookup") { arity(1); return embedding_lookup(inputs[0], attrs.ids); }
    if (tag == "masked-mean-rows") { arity(1); return masked_mean_rows(inputs[0], attrs.mask); }
    if (tag == "concat-rows") { arity(2); return concat_rows(inputs[0], inputs[1]); }
    if (tag == "slice-row") { arity(1); return slice_row(inputs[0], attrs.index); }
    if (tag == "dot") { arity(2); return dot(inputs[0], inputs[1]); }
    if (tag == "log") { arity(1); return log(inputs[0]); }
    if (tag == "exp") { arity(1); return exp(inputs[0]); }
    if (tag == "l2-normalize-rows") { arity(1); return l2_normalize_rows(inputs[0]); }
    if (tag == "transpose") { arity(1); return transpose(inputs[0]); }
    if (tag == "logsumexp-rows") { arity(1); return logsumexp_rows(inputs[0]); }
    if (tag == "scalar-mul") { arity(2); return scalar_mul(inputs[0], inputs[1]); }
    if (tag == "sum-all") { arity(1); return sum_all(inputs[0]); }
    throw ContractError("forward_op: unknown operator tag '" + tag + "'");
}

namespace {

// Iterative post-order over the subgraph that requires grad.
std::vector<Node*> topo_order(Node* root) {
    std::vector<Node*> order;
    std::unordered_set<Node*> visited;
    std::vector<std::pair<Node*, std::size_t>> stack;
    stack.emplace_back(root, 0);
    visited.insert(root);
    while (!stack.empty()) {
        auto& [node, next] = stack.back();
        bool descended = false;
        while (next < node->parents.size()) {
            Node* p = node->parents[next++].get();
            if (p->requires_grad && !visited.count(p)) {
                visited.insert(p);
                stack.emplace_back(p, 0);
                descended = true;
                break;
            }
        }
        if (!descended && stack.back().second >= stack.back().first->parents.size()) {
            order.push_back(stack.back().first);
            stack.pop_back();
        }
    }
    return order;
}

}  // namespace

void backward(const NodePtr& loss) {
    if (!loss->value.is_scalar()) throw ContractError("backward: loss must be scalar (1x1)");
    if (!loss->requires_grad) return;  // nothing trainable below
    std::vector<Node*> order = topo_order(loss.get());
    for (Node* n : order) n->grad = Matrix(n->value.rows, n->value.cols);
    loss->grad.data[0] = 1.0;
    for (auto it = order.rbegin(); it != order.rend(); ++it)
        if ((*it)->backprop) (*it)->backprop(**it);
}

Matrix grad_of(const NodePtr& node) {
    if (node->grad.rows == node->value.rows && node->grad.cols == node->value.cols)
        return node->grad;
    return Matrix(node->value.rows, node->value.cols);
}

GradMap backward_map(const NodePtr& loss, const std::vector<NodePtr>& params) {
    backward(loss);
    GradMap out;
    for (const auto& p : params) out[p.get()] = grad_of(p);
    return out;
}

}  // namespace ngcg::graph
