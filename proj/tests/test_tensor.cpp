#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "diffmn/nn.hpp"
#include "diffmn/rng.hpp"
#include "diffmn/tensor.hpp"
#include "test_util.hpp"

using namespace diffmn;

TEST_CASE("tensor invariants") {
    Tensor t({2, 3});
    CHECK(t.size() == 6);
    CHECK_THROWS_AS(Tensor({2, 0}), ShapeError);
    CHECK_THROWS_AS(Tensor(2, 2, {1.0, 2.0, 3.0}), ShapeError);
}

TEST_CASE("backward: loss = sum(x) gives all-ones gradient") {
    Tape tape;
    Tensor x = Tensor::row({1.5, -2.0, 7.0, 0.0});
    NodeId xi = tape.leaf(x);
    tape.backward(tape.reduce_sum(xi));
    for (double g : tape.grad(xi)) CHECK(g == doctest::Approx(1.0));
}

TEST_CASE("backward: loss = x*x at x=3 gives gradient 6") {
    Tape tape;
    NodeId x = tape.scalar_leaf(3.0);
    NodeId loss = tape.mul(x, x);
    tape.backward(loss);
    CHECK(tape.grad(x)[0] == doctest::Approx(6.0));
}

TEST_CASE("backward rejects non-scalar loss") {
    Tape tape;
    NodeId x = tape.leaf(Tensor::row({1.0, 2.0}));
    CHECK_THROWS_AS(tape.backward(x), ContractError);
}

TEST_CASE("matmul shape error names both dimensions") {
    Tape tape;
    NodeId a = tape.leaf(Tensor(2, 3, {1, 2, 3, 4, 5, 6}));
    NodeId b = tape.leaf(Tensor(4, 2, std::vector<double>(8, 1.0)));
    CHECK_THROWS_WITH_AS(tape.matmul(a, b), doctest::Contains("3 vs 4"), ShapeError);
}

TEST_CASE("softmax sums to one and is shift invariant") {
    Rng rng(42);
    for (int it = 0; it < 50; ++it) {
        std::vector<double> logits(6);
        for (auto& v : logits) v = rng.uniform(-4.0, 4.0);
        std::vector<std::vector<double>> outs;
        for (double shift : {-100.0, 0.0, 100.0}) {
            Tape tape;
            std::vector<double> shifted = logits;
            for (auto& v : shifted) v += shift;
            NodeId s = tape.softmax_row(tape.leaf(Tensor::row(shifted)));
            auto val = tape.value(s);
            double sum = 0.0;
            for (double v : val) {
                CHECK(v >= 0.0);
                sum += v;
            }
            CHECK(std::abs(sum - 1.0) <= 1e-12);
            outs.emplace_back(val.begin(), val.end());
        }
        for (size_t i = 0; i < outs[0].size(); ++i) {
            CHECK(outs[1][i] == doctest::Approx(outs[0][i]).epsilon(1e-10));
            CHECK(outs[1][i] == doctest::Approx(outs[2][i]).epsilon(1e-10));
        }
    }
}

namespace {

// Builds a scalar loss from a mix of primitive ops over leaf x; used to probe
// gradients of every op against finite differences.
double op_soup_loss(Tape& tape, const std::vector<double>& xdata, NodeId* x_out = nullptr) {
    NodeId x = tape.leaf(std::span<const double>(xdata.data(), 8), 2, 4);
    if (x_out) *x_out = x;
    NodeId w = tape.leaf(Tensor(4, 3, {0.3, -0.2, 0.5, 0.1, 0.7, -0.4, -0.6, 0.2, 0.9, 0.4, -0.1, 0.8}));
    NodeId h = tape.tanh_(tape.matmul(x, w));                       // [2,3]
    NodeId sm = tape.softmax_row(h);                                // [2,3]
    NodeId s1 = tape.sigmoid_(tape.scale(h, 0.5));                  // [2,3]
    NodeId r = tape.relu_(tape.sub(sm, s1));                        // [2,3]
    NodeId e = tape.exp_(tape.scale(r, 0.3));                       // [2,3]
    NodeId l = tape.log_(tape.add_const(e, 1.0));                   // [2,3]
    NodeId cat = tape.concat(l, tape.mul(sm, s1));                  // [1,12]
    NodeId sl = tape.slice(cat, 2, 7);                              // [1,7]
    NodeId sc = tape.mul_scalar(sl, tape.slice(cat, 0, 1));         // [1,7]
    std::vector<double> maskv = {1, 0, 1, 1, 0, 1, 1};
    NodeId masked = tape.mul_const(sc, maskv);
    return tape.value(tape.reduce_sum(masked))[0];
}

}  // namespace

TEST_CASE("gradients of composite op graph match central finite differences") {
    Rng rng(7);
    int cases = 0;
    for (int it = 0; it < 100; ++it) {
        std::vector<double> x(8);
        for (auto& v : x) v = rng.uniform(-1.5, 1.5);

        Tape tape;
        NodeId xid;
        op_soup_loss(tape, x, &xid);
        NodeId last = static_cast<NodeId>(tape.node_count() - 1);
        tape.backward(last);
        auto g = tape.grad(xid);
        std::vector<double> analytic(g.begin(), g.end());

        auto f = [&]() {
            Tape t2;
            return op_soup_loss(t2, x);
        };
        CHECK(testutil::max_grad_rel_err(x, f, analytic) < 1e-4);
        ++cases;
    }
    CHECK(cases == 100);
}

TEST_CASE("tape determinism: same inputs give bit-identical values and gradients") {
    std::vector<double> x = {0.1, -0.4, 0.9, 1.3, -0.2, 0.5, 0.7, -1.1};
    auto run = [&](std::vector<double>& vals, std::vector<double>& grads) {
        Tape tape;
        NodeId xid;
        op_soup_loss(tape, x, &xid);
        tape.backward(static_cast<NodeId>(tape.node_count() - 1));
        auto v = tape.value(xid);
        auto g = tape.grad(xid);
        vals.assign(v.begin(), v.end());
        grads.assign(g.begin(), g.end());
    };
    std::vector<double> v1, g1, v2, g2;
    run(v1, g1);
    run(v2, g2);
    CHECK(v1 == v2);
    CHECK(g1 == g2);
}

TEST_CASE("tape reuse after reset matches a fresh tape") {
    std::vector<double> x = {0.3, 0.1, -0.7, 0.2, 1.0, -0.5, 0.8, 0.4};
    Tape tape;
    double first = op_soup_loss(tape, x);
    tape.reset();
    double second = op_soup_loss(tape, x);
    CHECK(first == second);
}

TEST_CASE("checksum is order- and content-sensitive") {
    Tensor a(1, 3, {1.0, 2.0, 3.0});
    Tensor b(1, 3, {1.0, 2.0, 3.000001});
    CHECK(checksum(a) == checksum(a));
    CHECK(checksum(a) != checksum(b));
}
