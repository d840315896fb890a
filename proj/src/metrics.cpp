#include "diffmn/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "diffmn/nn.hpp"
#include "diffmn/rng.hpp"

namespace diffmn {

namespace {

void require_same_shape(const std::vector<IrregularSeries>& a,
                        const std::vector<IrregularSeries>& b, const char* who) {
    if (a.empty() || b.empty()) throw ContractError(std::string(who) + ": empty dataset");
    const int T = a.front().steps(), M = a.front().channels;
    for (const auto* ds : {&a, &b})
        for (const auto& s : *ds)
            if (s.steps() != T || s.channels != M)
                throw ShapeError(std::string(who) + ": datasets must share [steps, channels]");
}

std::vector<double> flat_values(const std::vector<IrregularSeries>& ds) {
    std::vector<double> out;
    for (const auto& s : ds) out.insert(out.end(), s.values.begin(), s.values.end());
    return out;
}

std::vector<double> histogram(const std::vector<double>& xs, double lo, double hi, int bins) {
    std::vector<double> h(bins, 0.0);
    const double width = hi - lo;
    for (double x : xs) {
        int b = width > 0.0 ? static_cast<int>((x - lo) / width * bins) : 0;
        b = std::clamp(b, 0, bins - 1);
        h[b] += 1.0;
    }
    const double n = static_cast<double>(xs.size());
    if (n > 0)
        for (double& v : h) v /= n;
    return h;
}

// Returns per-sequence hidden states after running the GRU over all steps.
// Inputs are [n, T*M] row-major; the result is [n, hidden].
struct SequenceBatch {
    std::vector<const IrregularSeries*> items;
    int steps, channels;
};

// Shared trainer for the two supervised metrics: a single-layer GRU over the
// first `in_steps` timesteps followed by a linear head.
struct GruHead {
    GruParams gru;
    MlpParams head;

    static GruHead init(int channels, int hidden, int out, Rng& rng) {
        GruHead m;
        m.gru = make_gru(channels, hidden, rng);
        m.head = make_mlp({hidden, out}, Activation::Identity, rng);
        return m;
    }

    std::vector<ParamRef> params() {
        auto refs = gru_params(gru, "gru");
        auto hr = mlp_params(head, "head");
        refs.insert(refs.end(), hr.begin(), hr.end());
        return refs;
    }

    // Forward over a batch on a tape; returns the head output node [B, out].
    NodeId forward(Tape& tape, const TapedGru& tg, const TapedMlp& th,
                   const std::vector<const IrregularSeries*>& batch, int in_steps) const {
        const int B = static_cast<int>(batch.size());
        const int M = batch.front()->channels;
        NodeId h = tape.leaf(Tensor({B, gru.hidden_dim()}));
        std::vector<double> step(static_cast<size_t>(B) * M);
        for (int t = 0; t < in_steps; ++t) {
            for (int i = 0; i < B; ++i)
                for (int ch = 0; ch < M; ++ch)
                    step[static_cast<size_t>(i) * M + ch] = batch[i]->value_at(t, ch);
            h = tg.step(tape, h, tape.leaf(std::span<const double>(step), B, M));
        }
        return th.forward(tape, h);
    }

    Tensor eval(const std::vector<const IrregularSeries*>& batch, int in_steps) const {
        const int B = static_cast<int>(batch.size());
        const int M = batch.front()->channels;
        Tensor h({B, gru.hidden_dim()});
        Tensor step({B, M});
        for (int t = 0; t < in_steps; ++t) {
            for (int i = 0; i < B; ++i)
                for (int ch = 0; ch < M; ++ch) step.at(i, ch) = batch[i]->value_at(t, ch);
            h = gru_cell(gru, h, step);
        }
        return mlp_eval(head, h);
    }
};

}  // namespace

void MetricsReport::set(const std::string& name, double v) {
    for (auto& [k, val] : values)
        if (k == name) {
            val = v;
            return;
        }
    values.emplace_back(name, v);
}

double MetricsReport::get(const std::string& name) const {
    for (const auto& [k, v] : values)
        if (k == name) return v;
    throw ContractError("MetricsReport: no metric named " + name);
}

bool MetricsReport::has(const std::string& name) const {
    for (const auto& [k, v] : values)
        if (k == name) return true;
    return false;
}

double discriminative_score(const std::vector<IrregularSeries>& real,
                            const std::vector<IrregularSeries>& synthetic,
                            const MetricConfig& config, uint64_t seed) {
    require_same_shape(real, synthetic, "discriminative_score");
    const int T = real.front().steps();
    const int M = real.front().channels;

    struct Labeled {
        const IrregularSeries* s;
        double y;
    };
    std::vector<Labeled> all;
    for (const auto& s : real) all.push_back({&s, 1.0});
    for (const auto& s : synthetic) all.push_back({&s, 0.0});
    Rng rng(Rng::mix(seed, 0xD5));
    rng.shuffle(all);
    const size_t n_train = static_cast<size_t>(config.train_frac * all.size());
    if (n_train == 0 || n_train == all.size())
        throw ContractError("discriminative_score: degenerate split");
    // Both classes must appear on both sides of the split.
    double train_pos = 0, test_pos = 0;
    for (size_t i = 0; i < all.size(); ++i) (i < n_train ? train_pos : test_pos) += all[i].y;
    if (train_pos == 0 || train_pos == static_cast<double>(n_train) || test_pos == 0 ||
        test_pos == static_cast<double>(all.size() - n_train))
        throw ContractError("discriminative_score: degenerate split");

    GruHead model = GruHead::init(M, config.ds_hidden, 1, rng);
    auto params = model.params();
    AdamState adam = AdamState::init(params, config.ds_lr);
    GradBuffer grads(params);

    Tape tape;
    std::vector<size_t> order(n_train);
    std::iota(order.begin(), order.end(), 0);
    for (int epoch = 0; epoch < config.ds_epochs; ++epoch) {
        rng.shuffle(order);
        for (size_t start = 0; start < n_train; start += config.ds_batch) {
            const size_t stop = std::min(n_train, start + config.ds_batch);
            std::vector<const IrregularSeries*> batch;
            std::vector<double> labels;
            for (size_t i = start; i < stop; ++i) {
                batch.push_back(all[order[i]].s);
                labels.push_back(all[order[i]].y);
            }
            const int B = static_cast<int>(batch.size());

            tape.reset();
            TapedGru tg;
            tg.stage(tape, model.gru);
            TapedMlp th;
            th.stage(tape, model.head);
            NodeId logit = model.forward(tape, tg, th, batch, T);
            // Smoothly clamped logits keep the cross-entropy finite.
            NodeId clamped = tape.scale(tape.tanh_(tape.scale(logit, 1.0 / 20.0)), 20.0);
            NodeId p = tape.sigmoid_(clamped);
            NodeId y = tape.leaf(std::span<const double>(labels), B, 1);
            NodeId one_minus_y = tape.add_const(tape.scale(y, -1.0), 1.0);
            NodeId one_minus_p = tape.add_const(tape.scale(p, -1.0), 1.0);
            NodeId ll = tape.add(tape.mul(y, tape.log_(tape.add_const(p, 1e-12))),
                                 tape.mul(one_minus_y, tape.log_(tape.add_const(one_minus_p, 1e-12))));
            NodeId loss = tape.scale(tape.reduce_sum(ll), -1.0 / B);
            tape.backward(loss);

            grads.zero();
            size_t pi = 0;
            for (NodeId id : {tg.Wz, tg.Uz, tg.bz, tg.Wr, tg.Ur, tg.br, tg.Wh, tg.Uh, tg.bh})
                grads.accumulate(pi++, tape.grad(id));
            for (size_t li = 0; li < th.weights.size(); ++li) {
                grads.accumulate(pi++, tape.grad(th.weights[li]));
                grads.accumulate(pi++, tape.grad(th.biases[li]));
            }
            adam_step(adam, params, grads.grads);
        }
    }

    std::vector<const IrregularSeries*> test;
    std::vector<double> test_y;
    for (size_t i = n_train; i < all.size(); ++i) {
        test.push_back(all[i].s);
        test_y.push_back(all[i].y);
    }
    Tensor logits = model.eval(test, T);
    double correct = 0.0;
    for (size_t i = 0; i < test.size(); ++i) {
        const double pred = logits.data[i] > 0.0 ? 1.0 : 0.0;
        correct += pred == test_y[i];
    }
    const double acc = correct / static_cast<double>(test.size());
    return std::abs(acc - 0.5);
}

double mdd(const std::vector<IrregularSeries>& real, const std::vector<IrregularSeries>& synthetic,
           int bins) {
    require_same_shape(real, synthetic, "mdd");
    const int T = real.front().steps();
    const int M = real.front().channels;
    double total = 0.0;
    std::vector<double> rv, sv;
    for (int t = 0; t < T; ++t) {
        for (int ch = 0; ch < M; ++ch) {
            rv.clear();
            sv.clear();
            for (const auto& s : real) rv.push_back(s.value_at(t, ch));
            for (const auto& s : synthetic) sv.push_back(s.value_at(t, ch));
            const double lo = std::min(*std::min_element(rv.begin(), rv.end()),
                                       *std::min_element(sv.begin(), sv.end()));
            const double hi = std::max(*std::max_element(rv.begin(), rv.end()),
                                       *std::max_element(sv.begin(), sv.end()));
            auto hr = histogram(rv, lo, hi, bins);
            auto hs = histogram(sv, lo, hi, bins);
            double l1 = 0.0;
            for (int b = 0; b < bins; ++b) l1 += std::abs(hr[b] - hs[b]);
            total += l1;
        }
    }
    return total / (static_cast<double>(T) * M);
}

double kl_divergence(const std::vector<IrregularSeries>& real,
                     const std::vector<IrregularSeries>& synthetic, int bins, double eps_smooth) {
    require_same_shape(real, synthetic, "kl_divergence");
    auto rv = flat_values(real);
    auto sv = flat_values(synthetic);
    const double lo = std::min(*std::min_element(rv.begin(), rv.end()),
                               *std::min_element(sv.begin(), sv.end()));
    const double hi = std::max(*std::max_element(rv.begin(), rv.end()),
                               *std::max_element(sv.begin(), sv.end()));
    auto p = histogram(rv, lo, hi, bins);
    auto q = histogram(sv, lo, hi, bins);
    double psum = 0.0, qsum = 0.0;
    for (int b = 0; b < bins; ++b) {
        p[b] += eps_smooth;
        q[b] += eps_smooth;
        psum += p[b];
        qsum += q[b];
    }
    double kl = 0.0;
    for (int b = 0; b < bins; ++b) {
        p[b] /= psum;
        q[b] /= qsum;
        kl += p[b] * std::log(p[b] / q[b]);
    }
    return std::max(kl, 0.0);
}

double mir(const std::vector<IrregularSeries>& real_train,
           const std::vector<IrregularSeries>& real_holdout,
           const std::vector<IrregularSeries>& synthetic) {
    require_same_shape(real_train, synthetic, "mir");
    require_same_shape(real_holdout, synthetic, "mir");

    auto nn_dist = [&](const IrregularSeries& s) {
        double best = std::numeric_limits<double>::infinity();
        for (const auto& g : synthetic) {
            double acc = 0.0;
            for (size_t i = 0; i < s.values.size(); ++i) {
                const double d = s.values[i] - g.values[i];
                acc += d * d;
            }
            best = std::min(best, acc);
        }
        return std::sqrt(best);
    };

    std::vector<double> d_train, d_holdout, pooled;
    for (const auto& s : real_train) d_train.push_back(nn_dist(s));
    for (const auto& s : real_holdout) d_holdout.push_back(nn_dist(s));
    pooled = d_train;
    pooled.insert(pooled.end(), d_holdout.begin(), d_holdout.end());
    std::sort(pooled.begin(), pooled.end());
    const double threshold = pooled[pooled.size() / 2];

    double correct = 0.0;
    for (double d : d_train) correct += d < threshold ? 1.0 : 0.0;
    for (double d : d_holdout) correct += d >= threshold ? 1.0 : 0.0;
    return correct / static_cast<double>(d_train.size() + d_holdout.size());
}

std::pair<double, double> downstream_forecast(const std::vector<IrregularSeries>& dataset,
                                              const MetricConfig& config, uint64_t seed) {
    if (dataset.size() < 5) throw ContractError("downstream_forecast: insufficient samples");
    const int T = dataset.front().steps();
    const int M = dataset.front().channels;
    if (T < 3) throw ContractError("downstream_forecast: sequences must have length >= 3");
    for (const auto& s : dataset)
        if (s.steps() != T || s.channels != M)
            throw ShapeError("downstream_forecast: inconsistent shapes");

    Rng rng(Rng::mix(seed, 0xF0CA));
    std::vector<const IrregularSeries*> all;
    for (const auto& s : dataset) all.push_back(&s);
    rng.shuffle(all);
    const size_t n_train = static_cast<size_t>(config.train_frac * all.size());
    if (n_train == 0 || n_train == all.size())
        throw ContractError("downstream_forecast: degenerate split");

    GruHead model = GruHead::init(M, config.forecast_hidden, M, rng);
    auto params = model.params();
    AdamState adam = AdamState::init(params, config.forecast_lr);
    GradBuffer grads(params);

    auto last_step = [&](const std::vector<const IrregularSeries*>& batch) {
        std::vector<double> y(batch.size() * static_cast<size_t>(M));
        for (size_t i = 0; i < batch.size(); ++i)
            for (int ch = 0; ch < M; ++ch) y[i * M + ch] = batch[i]->value_at(T - 1, ch);
        return y;
    };

    Tape tape;
    std::vector<size_t> order(n_train);
    std::iota(order.begin(), order.end(), 0);
    for (int epoch = 0; epoch < config.forecast_epochs; ++epoch) {
        rng.shuffle(order);
        for (size_t start = 0; start < n_train; start += config.forecast_batch) {
            const size_t stop = std::min(n_train, start + config.forecast_batch);
            std::vector<const IrregularSeries*> batch;
            for (size_t i = start; i < stop; ++i) batch.push_back(all[order[i]]);
            const int B = static_cast<int>(batch.size());
            auto y = last_step(batch);

            tape.reset();
            TapedGru tg;
            tg.stage(tape, model.gru);
            TapedMlp th;
            th.stage(tape, model.head);
            NodeId pred = model.forward(tape, tg, th, batch, T - 1);
            NodeId diff = tape.sub(pred, tape.leaf(std::span<const double>(y), B, M));
            NodeId loss = tape.scale(tape.reduce_sum(tape.mul(diff, diff)),
                                     1.0 / (static_cast<double>(B) * M));
            tape.backward(loss);

            grads.zero();
            size_t pi = 0;
            for (NodeId id : {tg.Wz, tg.Uz, tg.bz, tg.Wr, tg.Ur, tg.br, tg.Wh, tg.Uh, tg.bh})
                grads.accumulate(pi++, tape.grad(id));
            for (size_t li = 0; li < th.weights.size(); ++li) {
                grads.accumulate(pi++, tape.grad(th.weights[li]));
                grads.accumulate(pi++, tape.grad(th.biases[li]));
            }
            adam_step(adam, params, grads.grads);
        }
    }

    std::vector<const IrregularSeries*> test(all.begin() + n_train, all.end());
    Tensor pred = model.eval(test, T - 1);
    auto y = last_step(test);
    double mse = 0.0, mae = 0.0;
    for (size_t i = 0; i < y.size(); ++i) {
        const double d = pred.data[i] - y[i];
        mse += d * d;
        mae += std::abs(d);
    }
    mse /= static_cast<double>(y.size());
    mae /= static_cast<double>(y.size());
    return {mse, mae};
}

std::array<double, 4> polyfit3(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size() || x.size() < 4)
        throw ContractError("polyfit3: need at least 4 points");
    // Normal equations for the Vandermonde design [x^3 x^2 x 1].
    double S[7] = {0};
    double b[4] = {0};
    for (size_t i = 0; i < x.size(); ++i) {
        double xp = 1.0;
        double pows[7];
        for (int k = 0; k <= 6; ++k) {
            pows[k] = xp;
            xp *= x[i];
        }
        for (int k = 0; k <= 6; ++k) S[k] += pows[k];
        for (int k = 0; k <= 3; ++k) b[k] += y[i] * pows[k];
    }
    // A[r][c] = S[ (3-r) + (3-c) ] so coefficients come out as {a, b, c, d}.
    double A[4][5];
    for (int r = 0; r < 4; ++r) {
        for (int c = 0; c < 4; ++c) A[r][c] = S[(3 - r) + (3 - c)];
        A[r][4] = b[3 - r];
    }
    for (int col = 0; col < 4; ++col) {
        int piv = col;
        for (int r = col + 1; r < 4; ++r)
            if (std::abs(A[r][col]) > std::abs(A[piv][col])) piv = r;
        if (std::abs(A[piv][col]) < 1e-12) throw ContractError("polyfit3: rank-deficient fit");
        std::swap(A[col], A[piv]);
        for (int r = 0; r < 4; ++r) {
            if (r == col) continue;
            const double f = A[r][col] / A[col][col];
            for (int c = col; c < 5; ++c) A[r][c] -= f * A[col][c];
        }
    }
    return {A[0][4] / A[0][0], A[1][4] / A[1][1], A[2][4] / A[2][2], A[3][4] / A[3][3]};
}

double wasserstein1(std::vector<double> a, std::vector<double> b, int quantiles) {
    if (a.empty() || b.empty()) throw ContractError("wasserstein1: empty sample");
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    auto quantile = [](const std::vector<double>& v, double p) {
        const double idx = p * (static_cast<double>(v.size()) - 1.0);
        const size_t lo = static_cast<size_t>(idx);
        const size_t hi = std::min(lo + 1, v.size() - 1);
        const double w = idx - static_cast<double>(lo);
        return v[lo] * (1.0 - w) + v[hi] * w;
    };
    double acc = 0.0;
    for (int k = 0; k < quantiles; ++k) {
        const double p = (k + 0.5) / quantiles;
        acc += std::abs(quantile(a, p) - quantile(b, p));
    }
    return acc / quantiles;
}

CubicRecovery cubic_recovery(const std::vector<IrregularSeries>& generated,
                             const CubicSpec& truth, uint64_t seed) {
    if (generated.empty()) throw ContractError("cubic_recovery: empty dataset");
    std::array<std::vector<double>, 4> refit;
    std::vector<double> x, y;
    for (const auto& s : generated) {
        if (s.channels != 1) throw ShapeError("cubic_recovery: expected single-channel series");
        x.clear();
        y.clear();
        for (int t = 0; t < s.steps(); ++t) {
            x.push_back(cubic_x_of_time(s.times[t]));
            y.push_back(s.value_at(t, 0));
        }
        auto c = polyfit3(x, y);
        for (int k = 0; k < 4; ++k) refit[k].push_back(c[k]);
    }

    const std::array<std::pair<double, double>, 4> dist = {{{truth.mu_a, truth.sigma_a},
                                                            {truth.mu_b, truth.sigma_b},
                                                            {truth.mu_c, truth.sigma_c},
                                                            {truth.mu_d, truth.sigma_d}}};
    CubicRecovery out;
    Rng rng(Rng::mix(seed, 0xCB1C));
    for (int k = 0; k < 4; ++k) {
        const auto& v = refit[k];
        const double n = static_cast<double>(v.size());
        const double mean = std::accumulate(v.begin(), v.end(), 0.0) / n;
        double var = 0.0;
        for (double w : v) var += (w - mean) * (w - mean);
        const double sd = std::sqrt(var / std::max(n - 1.0, 1.0));
        out.mean_err[k] = std::abs(mean - dist[k].first);
        out.std_err[k] = std::abs(sd - dist[k].second);

        std::vector<double> ref(10000);
        for (auto& r : ref) r = rng.normal(dist[k].first, dist[k].second);
        out.w1[k] = wasserstein1(v, ref);
        out.w1_rel[k] = dist[k].second > 0.0 ? out.w1[k] / dist[k].second : out.w1[k];
    }
    return out;
}

}  // namespace diffmn
