#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "ngcg/gradcheck.hpp"
#include "ngcg/graph.hpp"
#include "ngcg/rng.hpp"

using namespace ngcg;
namespace g = ngcg::graph;

TEST_CASE("matrix basics") {
    Matrix m{{1, 2}, {3, 4}};
    CHECK(m.rows == 2);
    CHECK(m.at(1, 0) == 3.0);
    CHECK_THROWS_AS((Matrix{{1, 2}, {3}}), DimensionError);
    CHECK(identity(2).at(0, 0) == 1.0);
    CHECK(identity(2).at(0, 1) == 0.0);

    Matrix a{{1, 2}, {3, 4}};
    Matrix prod = matmul(a, identity(2));
    CHECK(max_abs_diff(prod, a) == 0.0);
    CHECK_THROWS_AS(matmul(a, Matrix(3, 2)), DimensionError);
}

TEST_CASE("matrix hash detects any change") {
    Rng rng(3);
    Matrix a = random_uniform(4, 5, -1.0, 1.0, rng);
    Matrix b = a;
    CHECK(matrix_hash(a) == matrix_hash(b));
    b.at(3, 4) = std::nextafter(b.at(3, 4), 1.0);
    CHECK(matrix_hash(a) != matrix_hash(b));
}

TEST_CASE("forward_op identity and symmetry examples") {
    auto a = g::constant(Matrix{{1, 2}, {3, 4}});
    auto id = g::constant(identity(2));
    auto prod = g::forward_op("matmul", {a, id});
    CHECK(max_abs_diff(prod->value, Matrix{{1, 2}, {3, 4}}) == 0.0);

    auto sm = g::forward_op("softmax-rows", {g::constant(Matrix{{0, 0}})});
    CHECK(sm->value.at(0, 0) == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(sm->value.at(0, 1) == doctest::Approx(0.5).epsilon(1e-15));

    auto norm = g::forward_op("l2-normalize-rows", {g::constant(Matrix{{3, 4}})});
    CHECK(norm->value.at(0, 0) == doctest::Approx(0.6).epsilon(1e-15));
    CHECK(norm->value.at(0, 1) == doctest::Approx(0.8).epsilon(1e-15));
}

TEST_CASE("forward_op rejects unknown tags and bad shapes") {
    auto a = g::constant(Matrix{{1, 2}});
    CHECK_THROWS_AS(g::forward_op("convolve", {a}), ContractError);
    CHECK_THROWS_AS(g::forward_op("add", {a, g::constant(Matrix{{1, 2, 3}})}), DimensionError);
    Matrix bad(1, 2);
    bad.data[0] = std::nan("");
    CHECK_THROWS_AS(g::constant(bad), NumericError);
}

TEST_CASE("backward: dot(x, x) gives 2x") {
    auto x = g::parameter(Matrix{{1, 2}});
    auto loss = g::dot(x, x);
    g::backward(loss);
    CHECK(max_abs_diff(g::grad_of(x), Matrix{{2, 4}}) == 0.0);
}

TEST_CASE("backward: loss scaled by zero zeroes the gradient") {
    auto x = g::parameter(Matrix{{1.5, -2}});
    auto loss = g::sum_all(g::scale(x, 0.0));
    g::backward(loss);
    CHECK(max_abs_diff(g::grad_of(x), Matrix(1, 2)) == 0.0);
}

TEST_CASE("backward rejects non-scalar loss") {
    auto x = g::parameter(Matrix{{1, 2}});
    CHECK_THROWS_AS(g::backward(g::scale(x, 2.0)), ContractError);
}

TEST_CASE("backward: random 3-layer composite matches finite differences") {
    Rng rng(11);
    std::vector<Matrix> params = {random_uniform(3, 4, -1.0, 1.0, rng),
                                  random_uniform(4, 4, -1.0, 1.0, rng),
                                  random_uniform(4, 2, -1.0, 1.0, rng)};
    auto builder = [](const std::vector<g::NodePtr>& p) {
        auto h1 = g::gelu(g::matmul(p[0], p[1]));
        auto h2 = g::softmax_rows(g::matmul(h1, p[2]));
        return g::sum_all(g::mul(h2, h2));
    };
    auto report = gradcheck(builder, params, 1e-5, 1e-4);
    for (const auto& e : report.entries) {
        INFO(e.name, " rel err ", e.max_rel_err);
        CHECK(e.pass);
    }
}

TEST_CASE("backward is linear in the loss") {
    Rng rng(5);
    Matrix xv = random_uniform(2, 3, -1.0, 1.0, rng);
    Matrix wv = random_uniform(3, 3, -1.0, 1.0, rng);

    auto grads_for = [&](int which) {
        auto x = g::parameter(xv);
        auto w = g::constant(wv);
        auto f = g::sum_all(g::gelu(g::matmul(x, w)));
        auto gq = g::dot(x, x);
        auto loss = which == 0 ? f : which == 1 ? gq : g::add(f, gq);
        g::backward(loss);
        return g::grad_of(x);
    };
    Matrix gf = grads_for(0), gg = grads_for(1), gsum = grads_for(2);
    for (std::size_t i = 0; i < gf.data.size(); ++i)
        CHECK(gsum.data[i] == doctest::Approx(gf.data[i] + gg.data[i]).epsilon(1e-14));
}

TEST_CASE("unreachable parameters get exactly zero gradient") {
    auto x = g::parameter(Matrix{{1, 2}});
    auto y = g::parameter(Matrix{{3, 4}});
    auto loss = g::dot(x, x);
    auto grads = g::backward_map(loss, {x, y});
    CHECK(max_abs_diff(grads.at(y.get()), Matrix(1, 2)) == 0.0);
    CHECK(max_abs_diff(grads.at(x.get()), Matrix{{2, 4}}) == 0.0);
}

TEST_CASE("every operator passes the finite-difference suite") {
    for (std::uint64_t seed : {1, 2, 3}) {
        auto report = operator_gradcheck_suite(seed);
        CHECK(report.entries.size() >= 20);
        for (const auto& e : report.entries) {
            INFO("seed ", seed, " op ", e.name, " rel err ", e.max_rel_err);
            CHECK(e.pass);
        }
    }
}

TEST_CASE("gradcheck: dot passes, wrong backward fails") {
    Rng rng(7);
    Matrix x = random_uniform(1, 4, -1.0, 1.0, rng);
    auto ok = gradcheck([](const auto& p) { return g::dot(p[0], p[0]); }, {x}, 1e-5, 1e-4);
    CHECK(ok.all_pass());

    // negative control: forward 3x, backward claims 6x
    auto broken = [](const std::vector<g::NodePtr>& p) {
        auto bad = std::make_shared<g::Node>();
        Matrix v = p[0]->value;
        for (double& e : v.data) e *= 3.0;
        bad->value = v;
        bad->op = "bad-scale";
        bad->parents = {p[0]};
        bad->requires_grad = p[0]->requires_grad;
        bad->backprop = [](g::Node& self) {
            g::Node& parent = *self.parents[0];
            if (!parent.requires_grad) return;
            if (parent.grad.rows == 0) parent.grad = Matrix(parent.value.rows, parent.value.cols);
            for (std::size_t i = 0; i < parent.grad.data.size(); ++i)
                parent.grad.data[i] += 6.0 * self.grad.data[i];
        };
        return g::sum_all(bad);
    };
    auto fail = gradcheck(broken, {x}, 1e-5, 1e-4);
    CHECK_FALSE(fail.all_pass());
}

TEST_CASE("gradcheck: InfoNCE-style loss over 4 pairs of dim 8") {
    Rng rng(13);
    auto unit_rows = [&](int n, int d) {
        Matrix m = random_uniform(n, d, -1.0, 1.0, rng);
        for (int i = 0; i < n; ++i) {
            double sq = 0.0;
            for (int j = 0; j < d; ++j) sq += m.at(i, j) * m.at(i, j);
            for (int j = 0; j < d; ++j) m.at(i, j) /= std::sqrt(sq);
        }
        return m;
    };
    std::vector<Matrix> params = {unit_rows(4, 8), unit_rows(4, 8)};
    auto builder = [](const std::vector<g::NodePtr>& p) {
        auto sims = g::matmul(p[0], g::transpose(p[1]));
        auto scaled = g::scale(sims, 1.0 / 0.07);
        auto lse = g::logsumexp_rows(scaled);
        auto pos = g::sum_all(g::mul(scaled, g::constant(identity(4))));
        return g::scale(g::add(g::sum_all(lse), g::scale(pos, -1.0)), 0.25);
    };
    auto report = gradcheck(builder, params, 1e-5, 1e-4);
    for (const auto& e : report.entries) {
        INFO(e.name, " rel err ", e.max_rel_err);
        CHECK(e.pass);
    }
}

TEST_CASE("gradcheck validates its preconditions") {
    Matrix x(1, 2);
    auto vec_out = [](const std::vector<g::NodePtr>& p) { return g::scale(p[0], 2.0); };
    CHECK_THROWS_AS(gradcheck(vec_out, {x}, 1e-5, 1e-4), ContractError);
    auto ok = [](const std::vector<g::NodePtr>& p) { return g::dot(p[0], p[0]); };
    CHECK_THROWS_AS(gradcheck(ok, {x}, 0.0, 1e-4), ContractError);
    CHECK_THROWS_AS(gradcheck(ok, {x}, 1e-5, -1.0), ContractError);
}

TEST_CASE("masked softmax ignores masked columns exactly") {
    Rng rng(23);
    Matrix base = random_uniform(3, 5, -1.0, 1.0, rng);
    Matrix tweaked = base;
    tweaked.at(0, 1) = 99.0;  // masked column
    tweaked.at(2, 4) = -55.0;
    const std::vector<int> mask = {1, 0, 1, 1, 0};
    auto w1 = g::masked_softmax_rows(g::constant(base), mask);
    auto w2 = g::masked_softmax_rows(g::constant(tweaked), mask);
    CHECK(max_abs_diff(w1->value, w2->value) == 0.0);
    CHECK(w1->value.at(0, 1) == 0.0);
    CHECK(w1->value.at(0, 4) == 0.0);
    for (int i = 0; i < 3; ++i) {
        double s = 0.0;
        for (int j = 0; j < 5; ++j) s += w1->value.at(i, j);
        CHECK(s == doctest::Approx(1.0).epsilon(1e-15));
    }
}

TEST_CASE("log rejects non-positive input, exp rejects overflow") {
    CHECK_THROWS_AS(g::log(g::constant(Matrix{{-1.0}})), NumericError);
    CHECK_THROWS_AS(g::log(g::constant(Matrix{{0.0}})), NumericError);
    CHECK_THROWS_AS(g::exp(g::constant(Matrix{{1000.0}})), NumericError);
    CHECK_THROWS_AS(g::l2_normalize_rows(g::constant(Matrix{{0.0, 0.0}})), NumericError);
}

TEST_CASE("dot acts as full contraction with shared node counted twice") {
    auto x = g::parameter(Matrix{{1, 2}, {3, 4}});
    auto loss = g::dot(x, x);
    CHECK(loss->value.scalar() == doctest::Approx(30.0));
    g::backward(loss);
    CHECK(max_abs_diff(g::grad_of(x), Matrix{{2, 4}, {6, 8}}) == 0.0);
}

TEST_CASE("embedding lookup gathers and scatters") {
    auto table = g::parameter(Matrix{{1, 2}, {3, 4}, {5, 6}});
    auto rows = g::embedding_lookup(table, {2, 0, 2});
    CHECK(max_abs_diff(rows->value, Matrix{{5, 6}, {1, 2}, {5, 6}}) == 0.0);
    auto loss = g::sum_all(rows);
    g::backward(loss);
    CHECK(max_abs_diff(g::grad_of(table), Matrix{{1, 1}, {0, 0}, {2, 2}}) == 0.0);
    CHECK_THROWS_AS(g::embedding_lookup(table, {3}), ContractError);
}
