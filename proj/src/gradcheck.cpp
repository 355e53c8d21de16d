#include "ngcg/gradcheck.hpp"

#include <cmath>

#include "ngcg/rng.hpp"

namespace ngcg {

namespace {

double eval_scalar(const GraphBuilder& f, const std::vector<Matrix>& params) {
    std::vector<graph::NodePtr> leaves;
    leaves.reserve(params.size());
    for (const auto& p : params) leaves.push_back(graph::constant(p));
    auto out = f(leaves);
    if (!out->value.is_scalar()) throw ContractError("gradcheck: builder output is not scalar");
    return out->value.scalar();
}

double rel_err(double analytic, double numeric) {
    const double denom = std::max({1e-6, std::fabs(analytic), std::fabs(numeric)});
    return std::fabs(analytic - numeric) / denom;
}

}  // namespace

GradCheckReport gradcheck(const GraphBuilder& f, const std::vector<Matrix>& params,
                          double step, double tol, std::vector<std::string> names) {
    if (step <= 0.0 || tol <= 0.0) throw ContractError("gradcheck: step and tol must be > 0");
    std::vector<graph::NodePtr> leaves;
    leaves.reserve(params.size());
    for (const auto& p : params) leaves.push_back(graph::parameter(p));
    auto loss = f(leaves);
    if (!loss->value.is_scalar()) throw ContractError("gradcheck: builder output is not scalar");
    graph::backward(loss);

    GradCheckReport report;
    std::vector<Matrix> work = params;
    for (std::size_t pi = 0; pi < params.size(); ++pi) {
        const Matrix analytic = graph::grad_of(leaves[pi]);
        double worst = 0.0;
        for (std::size_t k = 0; k < work[pi].data.size(); ++k) {
            const double orig = work[pi].data[k];
            work[pi].data[k] = orig + step;
            const double up = eval_scalar(f, work);
            work[pi].data[k] = orig - step;
            const double down = eval_scalar(f, work);
            work[pi].data[k] = orig;
            const double numeric = (up - down) / (2.0 * step);
            worst = std::max(worst, rel_err(analytic.data[k], numeric));
        }
        GradCheckEntry e;
        e.name = pi < names.size() ? names[pi] : "param" + std::to_string(pi);
        e.max_rel_err = worst;
        e.pass = worst <= tol;
        report.entries.push_back(std::move(e));
    }
    return report;
}

namespace {

struct OpCase {
    std::string name;
    GraphBuilder builder;
    std::vector<Matrix> params;
};

std::vector<OpCase> make_op_cases(std::uint64_t seed) {
    namespace g = graph;
    Rng rng(seed);
    auto uni = [&](int r, int c) { return random_uniform(r, c, -1.0, 1.0, rng); };
    // Contract op outputs to a scalar against a fixed random matrix so every
    // output entry influences the loss.
    auto against = [&](int r, int c) { return g::constant(random_uniform(r, c, -1.0, 1.0, rng)); };

    std::vector<OpCase> cases;
    auto add_case = [&](std::string name, std::vector<Matrix> params, GraphBuilder b) {
        cases.push_back({std::move(name), std::move(b), std::move(params)});
    };

    {
        auto w = against(3, 2);
        add_case("matmul", {uni(3, 4), uni(4, 2)},
                 [w](const auto& p) { return g::dot(g::matmul(p[0], p[1]), w); });
    }
    {
        auto w = against(3, 4);
        add_case("add", {uni(3, 4), uni(3, 4)},
                 [w](const auto& p) { return g::dot(g::add(p[0], p[1]), w); });
    }
    {
        auto w = against(3, 4);
        add_case("scale", {uni(3, 4)},
                 [w](const auto& p) { return g::dot(g::scale(p[0], 1.7), w); });
    }
    {
        auto w = against(3, 4);
        add_case("elementwise-mul", {uni(3, 4), uni(3, 4)},
                 [w](const auto& p) { return g::dot(g::mul(p[0], p[1]), w); });
    }
    {
        auto w = against(3, 5);
        add_case("softmax-rows", {uni(3, 5)},
                 [w](const auto& p) { return g::dot(g::softmax_rows(p[0]), w); });
    }
    {
        auto w = against(3, 5);
        const std::vector<int> mask = {1, 0, 1, 1, 0};
        add_case("masked-softmax-rows", {uni(3, 5)}, [w, mask](const auto& p) {
            return g::dot(g::masked_softmax_rows(p[0], mask), w);
        });
    }
    {
        auto w = against(3, 6);
        add_case("layernorm", {uni(3, 6), uni(1, 6), uni(1, 6)}, [w](const auto& p) {
            return g::dot(g::layernorm(p[0], p[1], p[2]), w);
        });
    }
    {
        auto w = against(3, 4);
        add_case("gelu", {uni(3, 4)},
                 [w](const auto& p) { return g::dot(g::gelu(p[0]), w); });
    }
    {
        auto w = against(4, 4);
        const std::vector<int> ids = {2, 5, 2, 0};  // repeated id exercises scatter-add
        add_case("embedding-lookup", {uni(7, 4)}, [w, ids](const auto& p) {
            return g::dot(g::embedding_lookup(p[0], ids), w);
        });
    }
    {
        auto w = against(1, 3);
        const std::vector<int> mask = {1, 0, 1, 1};
        add_case("masked-mean-rows", {uni(4, 3)}, [w, mask](const auto& p) {
            return g::dot(g::masked_mean_rows(p[0], mask), w);
        });
    }
    {
        auto w = against(5, 3);
        add_case("concat-rows", {uni(2, 3), uni(3, 3)}, [w](const auto& p) {
            return g::dot(g::concat_rows(p[0], p[1]), w);
        });
    }
    {
        auto w = against(1, 3);
        add_case("slice-row", {uni(4, 3)},
                 [w](const auto& p) { return g::dot(g::slice_row(p[0], 2), w); });
    }
    add_case("dot", {uni(3, 4), uni(3, 4)},
             [](const auto& p) { return g::dot(p[0], p[1]); });
    {
        auto w = against(3, 4);
        add_case("log", {random_uniform(3, 4, 0.5, 1.5, rng)},
                 [w](const auto& p) { return g::dot(g::log(p[0]), w); });
    }
    {
        auto w = against(3, 4);
        add_case("exp", {uni(3, 4)},
                 [w](const auto& p) { return g::dot(g::exp(p[0]), w); });
    }
    {
        auto w = against(3, 4);
        Matrix x = uni(3, 4);
        // keep rows away from the degenerate zero norm
        for (int i = 0; i < x.rows; ++i) {
            double sq = 0.0;
            for (int j = 0; j < x.cols; ++j) sq += x.at(i, j) * x.at(i, j);
            if (std::sqrt(sq) < 0.3) x.at(i, 0) += 0.5;
        }
        add_case("l2-normalize-rows", {x},
                 [w](const auto& p) { return g::dot(g::l2_normalize_rows(p[0]), w); });
    }
    {
        auto w = against(4, 3);
        add_case("transpose", {uni(3, 4)},
                 [w](const auto& p) { return g::dot(g::transpose(p[0]), w); });
    }
    {
        auto w = against(3, 1);
        add_case("logsumexp-rows", {uni(3, 5)},
                 [w](const auto& p) { return g::dot(g::logsumexp_rows(p[0]), w); });
    }
    {
        auto w = against(3, 4);
        add_case("scalar-mul", {uni(3, 4), uni(1, 1)},
                 [w](const auto& p) { return g::dot(g::scalar_mul(p[0], p[1]), w); });
    }
    add_case("sum-all", {uni(3, 4)}, [](const auto& p) { return g::sum_all(p[0]); });
    return cases;
}

}  // namespace

GradCheckReport operator_gradcheck_suite(std::uint64_t seed, double step, double tol) {
    GradCheckReport report;
    for (auto& c : make_op_cases(seed)) {
        GradCheckReport sub = gradcheck(c.builder, c.params, step, tol);
        double worst = 0.0;
        bool pass = true;
        for (const auto& e : sub.entries) {
            worst = std::max(worst, e.max_rel_err);
            pass = pass && e.pass;
        }
        report.entries.push_back({c.name, worst, pass});
    }
    return report;
}

}  // namespace ngcg
