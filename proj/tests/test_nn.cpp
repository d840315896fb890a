#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "diffmn/nn.hpp"
#include "diffmn/rng.hpp"
#include "test_util.hpp"

using namespace diffmn;

namespace {

MlpParams identity_mlp(int n) {
    MlpParams p;
    MlpParams::Layer l;
    l.weight = Tensor({n, n});
    for (int i = 0; i < n; ++i) l.weight.at(i, i) = 1.0;
    l.bias = Tensor({1, n});
    l.act = Activation::Identity;
    p.layers.push_back(std::move(l));
    return p;
}

}  // namespace

TEST_CASE("mlp_forward: identity 1-layer returns the input") {
    MlpParams p = identity_mlp(3);
    Tape tape;
    Tensor out = mlp_forward(p, Tensor::row({1.0, 2.0, 3.0}), tape);
    CHECK(out.data == std::vector<double>{1.0, 2.0, 3.0});
}

TEST_CASE("mlp_forward: zero weights return the bias for any input") {
    MlpParams p;
    MlpParams::Layer l;
    l.weight = Tensor({4, 2});
    l.bias = Tensor(1, 2, {0.7, -1.3});
    p.layers.push_back(l);
    Rng rng(3);
    for (int it = 0; it < 10; ++it) {
        std::vector<double> x(4);
        for (auto& v : x) v = rng.uniform(-5.0, 5.0);
        Tape tape;
        Tensor out = mlp_forward(p, Tensor::row(x), tape);
        CHECK(out.data[0] == doctest::Approx(0.7));
        CHECK(out.data[1] == doctest::Approx(-1.3));
    }
}

TEST_CASE("mlp_forward: 2-layer tanh matches straight-line recomputation") {
    Rng rng(11);
    MlpParams p = make_mlp({3, 5, 2}, Activation::Tanh, rng);
    Tensor x = Tensor::row({0.3, -0.8, 1.1});

    Tape tape;
    Tensor out = mlp_forward(p, x, tape);

    // Independent re-computation of W2^T tanh(W1^T x + b1) + b2.
    std::vector<double> h(5, 0.0);
    for (int j = 0; j < 5; ++j) {
        double acc = p.layers[0].bias.data[j];
        for (int i = 0; i < 3; ++i) acc += x.data[i] * p.layers[0].weight.at(i, j);
        h[j] = std::tanh(acc);
    }
    for (int j = 0; j < 2; ++j) {
        double acc = p.layers[1].bias.data[j];
        for (int i = 0; i < 5; ++i) acc += h[i] * p.layers[1].weight.at(i, j);
        CHECK(out.data[j] == doctest::Approx(acc).epsilon(1e-12));
    }
}

TEST_CASE("mlp_forward rejects dimension mismatch naming both dims") {
    Rng rng(1);
    MlpParams p = make_mlp({3, 4, 2}, Activation::Tanh, rng);
    Tape tape;
    CHECK_THROWS_WITH_AS(mlp_forward(p, Tensor::row({1.0, 2.0}), tape),
                         doctest::Contains("2"), ShapeError);
}

TEST_CASE("mlp_eval agrees with taped forward") {
    Rng rng(5);
    MlpParams p = make_mlp({4, 8, 8, 3}, Activation::Tanh, rng);
    Tensor x(2, 4, {0.1, -0.2, 0.3, 0.4, 1.0, 0.0, -1.0, 0.5});
    Tape tape;
    Tensor a = mlp_forward(p, x, tape);
    Tensor b = mlp_eval(p, x);
    for (int i = 0; i < a.size(); ++i) CHECK(a.data[i] == doctest::Approx(b.data[i]).epsilon(1e-14));
}

TEST_CASE("3-layer MLP MSE gradients match finite differences on 100 seeded draws") {
    Rng seeds(2024);
    for (int trial = 0; trial < 100; ++trial) {
        Rng rng(seeds.next_u64());
        MlpParams p = make_mlp({3, 4, 4, 2}, Activation::Tanh, rng);
        Tensor x(1, 3, {rng.normal(), rng.normal(), rng.normal()});
        Tensor target(1, 2, {rng.normal(), rng.normal()});

        auto loss_of = [&]() {
            Tensor out = mlp_eval(p, x);
            double acc = 0.0;
            for (int i = 0; i < 2; ++i) acc += (out.data[i] - target.data[i]) * (out.data[i] - target.data[i]);
            return acc / 2.0;
        };

        Tape tape;
        TapedMlp tm;
        tm.stage(tape, p);
        NodeId out = tm.forward(tape, tape.leaf(x));
        NodeId diff = tape.sub(out, tape.leaf(target));
        NodeId loss = tape.scale(tape.reduce_sum(tape.mul(diff, diff)), 0.5);
        tape.backward(loss);

        auto refs = mlp_params(p, "mlp");
        for (size_t li = 0; li < p.layers.size(); ++li) {
            auto gw = tape.grad(tm.weights[li]);
            std::vector<double> analytic(gw.begin(), gw.end());
            CHECK(testutil::max_grad_rel_err(p.layers[li].weight.data, loss_of, analytic) < 1e-4);
            auto gb = tape.grad(tm.biases[li]);
            std::vector<double> analytic_b(gb.begin(), gb.end());
            CHECK(testutil::max_grad_rel_err(p.layers[li].bias.data, loss_of, analytic_b) < 1e-4);
        }
        (void)refs;
    }
}

TEST_CASE("adam: zero gradient leaves params unchanged, increments step") {
    Tensor w(1, 3, {1.0, -2.0, 3.0});
    std::vector<ParamRef> params = {{"w", &w}};
    AdamState st = AdamState::init(params, 1e-3);
    adam_step(st, params, {{0.0, 0.0, 0.0}});
    CHECK(st.step == 1);
    CHECK(w.data == std::vector<double>{1.0, -2.0, 3.0});
}

TEST_CASE("adam: first step moves scalar param by ~lr against the gradient sign") {
    // With bias correction, the very first update is exactly lr * g/|g| up to eps.
    for (double g : {2.5, -0.3}) {
        Tensor w(1, 1, {0.0});
        std::vector<ParamRef> params = {{"w", &w}};
        AdamState st = AdamState::init(params, 1e-3);
        adam_step(st, params, {{g}});
        const double expected = -1e-3 * (g > 0 ? 1.0 : -1.0);
        CHECK(w.data[0] == doctest::Approx(expected).epsilon(1e-6));
    }
}

TEST_CASE("adam: quadratic bowl loss drops at least 10x in 200 steps") {
    Rng rng(17);
    Tensor w(1, 4, {2.0, -1.5, 0.8, -2.2});
    std::vector<ParamRef> params = {{"w", &w}};
    AdamState st = AdamState::init(params, 5e-2);
    auto loss = [&]() {
        double acc = 0.0;
        for (double x : w.data) acc += x * x;
        return acc;
    };
    const double initial = loss();
    for (int i = 0; i < 200; ++i) {
        std::vector<double> g(4);
        for (int j = 0; j < 4; ++j) g[j] = 2.0 * w.data[j];
        adam_step(st, params, {g});
    }
    CHECK(loss() < initial / 10.0);
    (void)rng;
}

TEST_CASE("adam: NaN gradient raises divergence error naming the parameter") {
    Tensor w(1, 2, {0.0, 0.0});
    std::vector<ParamRef> params = {{"router.w0", &w}};
    AdamState st = AdamState::init(params, 1e-3);
    try {
        adam_step(st, params, {{1.0, std::nan("")}});
        FAIL("expected DivergenceError");
    } catch (const DivergenceError& e) {
        CHECK(e.param_name == "router.w0");
    }
}

TEST_CASE("gru_cell: zero input, hidden and params give zero hidden") {
    GruParams p;
    p.Wz = Tensor({2, 3});
    p.Uz = Tensor({3, 3});
    p.bz = Tensor({1, 3});
    p.Wr = Tensor({2, 3});
    p.Ur = Tensor({3, 3});
    p.br = Tensor({1, 3});
    p.Wh = Tensor({2, 3});
    p.Uh = Tensor({3, 3});
    p.bh = Tensor({1, 3});
    Tensor h = gru_cell(p, Tensor({1, 3}), Tensor({1, 2}));
    for (double v : h.data) CHECK(v == doctest::Approx(0.0));
}

TEST_CASE("gru_cell: saturated update gate copies the candidate state") {
    Rng rng(23);
    GruParams p = make_gru(2, 3, rng);
    for (double& b : p.bz.data) b = 50.0;  // z ~= 1 everywhere
    Tensor hidden(1, 3, {0.4, -0.2, 0.9});
    Tensor input(1, 2, {0.3, -1.0});
    Tensor h = gru_cell(p, hidden, input);

    // Candidate recomputed independently: tanh(Wh^T x + Uh^T (r*h) + bh).
    auto matvec = [](const Tensor& W, const std::vector<double>& x) {
        std::vector<double> y(W.cols(), 0.0);
        for (int i = 0; i < W.rows(); ++i)
            for (int j = 0; j < W.cols(); ++j) y[j] += x[i] * W.at(i, j);
        return y;
    };
    auto rz = matvec(p.Wr, input.data);
    auto rh = matvec(p.Ur, hidden.data);
    std::vector<double> r(3), rxh(3);
    for (int j = 0; j < 3; ++j) {
        r[j] = 1.0 / (1.0 + std::exp(-(rz[j] + rh[j] + p.br.data[j])));
        rxh[j] = r[j] * hidden.data[j];
    }
    auto cx = matvec(p.Wh, input.data);
    auto ch = matvec(p.Uh, rxh);
    for (int j = 0; j < 3; ++j) {
        const double cand = std::tanh(cx[j] + ch[j] + p.bh.data[j]);
        CHECK(h.data[j] == doctest::Approx(cand).epsilon(1e-8));
    }
}

TEST_CASE("gru_cell: fixed-seed step matches element-wise recomputation and stays in (-1,1)") {
    Rng rng(31);
    GruParams p = make_gru(3, 4, rng);
    Tensor hidden(1, 4, {0.1, -0.6, 0.3, 0.8});
    Tensor input(1, 3, {1.2, -0.4, 0.5});
    Tensor out = gru_cell(p, hidden, input);

    auto dot_col = [](const Tensor& W, const std::vector<double>& x, int j) {
        double acc = 0.0;
        for (int i = 0; i < W.rows(); ++i) acc += x[i] * W.at(i, j);
        return acc;
    };
    for (int j = 0; j < 4; ++j) {
        const double z = 1.0 / (1.0 + std::exp(-(dot_col(p.Wz, input.data, j) +
                                                 dot_col(p.Uz, hidden.data, j) + p.bz.data[j])));
        const double r = 1.0 / (1.0 + std::exp(-(dot_col(p.Wr, input.data, j) +
                                                 dot_col(p.Ur, hidden.data, j) + p.br.data[j])));
        std::vector<double> rxh(4);
        for (int i = 0; i < 4; ++i) rxh[i] = hidden.data[i];
        for (int i = 0; i < 4; ++i) {
            const double ri = 1.0 / (1.0 + std::exp(-(dot_col(p.Wr, input.data, i) +
                                                      dot_col(p.Ur, hidden.data, i) + p.br.data[i])));
            rxh[i] *= ri;
        }
        const double cand = std::tanh(dot_col(p.Wh, input.data, j) + dot_col(p.Uh, rxh, j) + p.bh.data[j]);
        const double expect = (1.0 - z) * hidden.data[j] + z * cand;
        CHECK(out.data[j] == doctest::Approx(expect).epsilon(1e-10));
        CHECK(out.data[j] > -1.0);
        CHECK(out.data[j] < 1.0);
        (void)r;
    }
}

TEST_CASE("gru gradients through an unrolled sequence match finite differences") {
    Rng seeds(99);
    for (int trial = 0; trial < 20; ++trial) {
        Rng rng(seeds.next_u64());
        GruParams p = make_gru(2, 3, rng);
        std::vector<Tensor> xs;
        for (int t = 0; t < 4; ++t) xs.push_back(Tensor(1, 2, {rng.normal(), rng.normal()}));
        Tensor target(1, 3, {rng.normal(), rng.normal(), rng.normal()});

        auto loss_of = [&]() {
            Tensor h({1, 3});
            for (const auto& x : xs) h = gru_cell(p, h, x);
            double acc = 0.0;
            for (int i = 0; i < 3; ++i) acc += (h.data[i] - target.data[i]) * (h.data[i] - target.data[i]);
            return acc;
        };

        Tape tape;
        TapedGru tg;
        tg.stage(tape, p);
        NodeId h = tape.leaf(Tensor({1, 3}));
        for (const auto& x : xs) h = tg.step(tape, h, tape.leaf(x));
        NodeId diff = tape.sub(h, tape.leaf(target));
        tape.backward(tape.reduce_sum(tape.mul(diff, diff)));

        auto check = [&](Tensor& t, NodeId id) {
            auto g = tape.grad(id);
            std::vector<double> analytic(g.begin(), g.end());
            CHECK(testutil::max_grad_rel_err(t.data, loss_of, analytic) < 1e-4);
        };
        check(p.Wz, tg.Wz);
        check(p.Uh, tg.Uh);
        check(p.bh, tg.bh);
        check(p.Wr, tg.Wr);
    }
}
