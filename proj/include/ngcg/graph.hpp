#pragma once

#include <functional>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "ngcg/matrix.hpp"

namespace ngcg::graph {

struct Node;
using NodePtr = std::shared_ptr<Node>;

// One vertex of a reverse-mode computation graph. `backprop` reads this node's
// accumulated gradient and adds each parent's share into parent->grad.
struct Node {
    Matrix value;
    Matrix grad;  // empty until backward() reaches the node
    std::vector<NodePtr> parents;
    std::function<void(Node&)> backprop;
    std::string op;
    bool requires_grad = false;

    bool is_leaf() const { return parents.empty(); }
};

NodePtr constant(Matrix value);
NodePtr parameter(Matrix value);

// Fixed operator set. Backward rules are hand-derived per operator.
NodePtr matmul(const NodePtr& a, const NodePtr& b);
NodePtr add(const NodePtr& a, const NodePtr& b);
NodePtr scale(const NodePtr& a, double c);
NodePtr mul(const NodePtr& a, const NodePtr& b);  // elementwise
NodePtr softmax_rows(const NodePtr& a);
NodePtr masked_softmax_rows(const NodePtr& a, const std::vector<int>& key_mask);
NodePtr layernorm(const NodePtr& x, const NodePtr& gain, const NodePtr& bias);
NodePtr gelu(const NodePtr& a);
NodePtr embedding_lookup(const NodePtr& table, const std::vector<int>& ids);
NodePtr masked_mean_rows(const NodePtr& a, const std::vector<int>& mask);
NodePtr concat_rows(const NodePtr& a, const NodePtr& b);
NodePtr slice_row(const NodePtr& a, int row);
NodePtr dot(const NodePtr& a, const NodePtr& b);  // full contraction, 1x1
NodePtr log(const NodePtr& a);
NodePtr exp(const NodePtr& a);
NodePtr l2_normalize_rows(const NodePtr& a);
NodePtr transpose(const NodePtr& a);
NodePtr logsumexp_rows(const NodePtr& a);      // Tx1, row-max subtracted
NodePtr scalar_mul(const NodePtr& a, const NodePtr& s);  // s is 1x1
NodePtr sum_all(const NodePtr& a);             // 1x1, order-invariant reduction

constexpr double kLayerNormEps = 1e-5;

// Optional attributes for tag-dispatched construction.
struct OpAttrs {
    double scalar = 0.0;
    int index = 0;
    std::vector<int> ids;
    std::vector<int> mask;
};

// Builds a node from an operator tag; throws ContractError on unknown tags.
NodePtr forward_op(const std::string& tag, const std::vector<NodePtr>& inputs,
                   const OpAttrs& attrs = {});

// Propagates d(loss)/d(node) into every reachable node that requires grad.
// Gradients of nodes not reached stay empty (read as zero via grad_of).
void backward(const NodePtr& loss);

Matrix grad_of(const NodePtr& node);

using GradMap = std::map<const Node*, Matrix>;
GradMap backward_map(const NodePtr& loss, const std::vector<NodePtr>& params);

}  // namespace ngcg::graph
