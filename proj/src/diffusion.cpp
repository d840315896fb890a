#include "diffmn/diffusion.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace diffmn {

NoiseSchedule make_schedule(int T_d, double beta_start, double beta_end) {
    if (T_d < 1) throw ContractError("make_schedule: T_d must be >= 1");
    if (!(beta_start > 0.0) || !(beta_start <= beta_end) || !(beta_end < 1.0))
        throw ContractError("make_schedule: need 0 < beta_start <= beta_end < 1");
    NoiseSchedule s;
    s.T_d = T_d;
    s.beta.resize(T_d);
    s.alpha.resize(T_d);
    s.alpha_bar.resize(T_d + 1);
    s.alpha_bar[0] = 1.0;
    for (int t = 1; t <= T_d; ++t) {
        s.beta[t - 1] = T_d == 1 ? beta_start
                                 : beta_start + (beta_end - beta_start) * (t - 1) / (T_d - 1);
        s.alpha[t - 1] = 1.0 - s.beta[t - 1];
        s.alpha_bar[t] = s.alpha_bar[t - 1] * s.alpha[t - 1];
    }
    return s;
}

std::vector<double> q_sample(const NoiseSchedule& schedule, std::span<const double> x0, int t,
                             std::span<const double> eps) {
    if (t < 1 || t > schedule.T_d)
        throw ContractError("q_sample: t=" + std::to_string(t) + " outside [1, " +
                            std::to_string(schedule.T_d) + "]");
    if (x0.size() != eps.size()) throw ShapeError("q_sample: x0/eps sizes disagree");
    const double ab = schedule.alpha_bar_at(t);
    const double c0 = std::sqrt(ab);
    const double c1 = std::sqrt(1.0 - ab);
    std::vector<double> out(x0.size());
    for (size_t i = 0; i < x0.size(); ++i) out[i] = c0 * x0[i] + c1 * eps[i];
    return out;
}

void time_embedding(int t, int T_d, int emb_dim, double* out) {
    // Transformer-style sinusoidal embedding of the integer step.
    const int half = emb_dim / 2;
    for (int i = 0; i < half; ++i) {
        const double freq = std::pow(10000.0, -static_cast<double>(i) / half);
        out[2 * i] = std::sin(t * freq);
        out[2 * i + 1] = std::cos(t * freq);
    }
    if (emb_dim % 2 == 1) out[emb_dim - 1] = static_cast<double>(t) / std::max(T_d, 1);
}

std::vector<double> Denoiser::predict(std::span<const double> x_t, int t, int T_d) const {
    if (static_cast<int>(x_t.size()) != dim)
        throw ShapeError("denoiser: input size " + std::to_string(x_t.size()) +
                         " does not match " + std::to_string(dim));
    std::vector<double> in(static_cast<size_t>(dim) + time_emb_dim);
    std::copy(x_t.begin(), x_t.end(), in.begin());
    time_embedding(t, T_d, time_emb_dim, in.data() + dim);
    std::vector<double> out(dim), scratch;
    mlp_eval_row(net, in.data(), out.data(), scratch);
    return out;
}

Denoiser train_diffusion(const Tensor& samples, const NoiseSchedule& schedule,
                         const DiffusionConfig& config, DiffusionTrainReport* report) {
    if (samples.rows() < 1) throw ContractError("train_diffusion: empty dataset");
    const int D = samples.cols();
    const int n = samples.rows();

    Rng rng(Rng::mix(config.seed, 0xD1FF));
    Denoiser den;
    den.dim = D;
    den.time_emb_dim = config.time_emb_dim;
    den.net = make_mlp({D + config.time_emb_dim, config.hidden, config.hidden, D},
                       Activation::Tanh, rng);

    auto params = mlp_params(den.net, "denoiser");
    AdamState adam = AdamState::init(params, config.lr);
    GradBuffer grads(params);

    DiffusionTrainReport local;
    DiffusionTrainReport& rep = report ? *report : local;
    rep.epoch_loss.clear();

    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);

    Tape tape;
    const int in_dim = D + config.time_emb_dim;
    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        rng.shuffle(order);
        double epoch_loss = 0.0;
        long batches = 0;
        for (int start = 0; start < n; start += config.batch_size) {
            const int B = std::min(config.batch_size, n - start);
            std::vector<double> in(static_cast<size_t>(B) * in_dim);
            std::vector<double> target(static_cast<size_t>(B) * D);
            for (int i = 0; i < B; ++i) {
                const int r = order[start + i];
                const int t = 1 + rng.uniform_int(schedule.T_d);
                std::vector<double> eps(D);
                for (auto& e : eps) e = rng.normal();
                auto xt = q_sample(schedule,
                                   std::span<const double>(
                                       samples.data.data() + static_cast<size_t>(r) * D, D),
                                   t, eps);
                double* row = in.data() + static_cast<size_t>(i) * in_dim;
                std::copy(xt.begin(), xt.end(), row);
                time_embedding(t, schedule.T_d, config.time_emb_dim, row + D);
                std::copy(eps.begin(), eps.end(), target.data() + static_cast<size_t>(i) * D);
            }

            tape.reset();
            TapedMlp net;
            net.stage(tape, den.net);
            NodeId pred = net.forward(tape, tape.leaf(std::span<const double>(in), B, in_dim));
            NodeId diff = tape.sub(pred, tape.leaf(std::span<const double>(target), B, D));
            NodeId loss = tape.scale(tape.reduce_sum(tape.mul(diff, diff)), 1.0 / B);
            const double lv = tape.value(loss)[0];
            if (!std::isfinite(lv)) {
                rep.diverged = true;
                throw DivergenceError("train_diffusion: non-finite loss at epoch " +
                                          std::to_string(epoch),
                                      "denoiser");
            }
            tape.backward(loss);
            grads.zero();
            size_t pi = 0;
            for (size_t li = 0; li < net.weights.size(); ++li) {
                grads.accumulate(pi++, tape.grad(net.weights[li]));
                grads.accumulate(pi++, tape.grad(net.biases[li]));
            }
            adam_step(adam, params, grads.grads);
            epoch_loss += lv;
            ++batches;
        }
        rep.epoch_loss.push_back(epoch_loss / std::max<long>(batches, 1));
    }
    rep.diverged = rep.epoch_loss.size() > 1 && !(rep.epoch_loss.back() < rep.epoch_loss.front());
    return den;
}

namespace {

bool reverse_chain(const Denoiser& denoiser, const NoiseSchedule& schedule, Rng& rng,
                   std::vector<double>& x) {
    const int D = denoiser.dim;
    x.resize(D);
    for (auto& v : x) v = rng.normal();
    for (int t = schedule.T_d; t >= 1; --t) {
        auto eps_hat = denoiser.predict(x, t, schedule.T_d);
        const double a = schedule.alpha_at(t);
        const double ab = schedule.alpha_bar_at(t);
        const double coef = schedule.beta_at(t) / std::sqrt(1.0 - ab);
        const double sigma = t > 1 ? std::sqrt(schedule.beta_at(t)) : 0.0;
        for (int i = 0; i < D; ++i) {
            x[i] = (x[i] - coef * eps_hat[i]) / std::sqrt(a);
            if (sigma > 0.0) x[i] += sigma * rng.normal();
        }
    }
    return std::all_of(x.begin(), x.end(), [](double v) { return std::isfinite(v); });
}

}  // namespace

Tensor sample_diffusion(const Denoiser& denoiser, const NoiseSchedule& schedule, int n, Rng& rng) {
    if (n < 1) throw ContractError("sample_diffusion: n must be positive");
    Tensor out(n, denoiser.dim);
    std::vector<double> x;
    for (int j = 0; j < n; ++j) {
        if (!reverse_chain(denoiser, schedule, rng, x) &&
            !reverse_chain(denoiser, schedule, rng, x))
            throw DivergenceError("sample_diffusion: non-finite sample after one retry",
                                  "denoiser");
        std::copy(x.begin(), x.end(), out.data.begin() + static_cast<size_t>(j) * denoiser.dim);
    }
    return out;
}

void project_to_simplex(std::span<double> w) {
    double sum = 0.0;
    for (double& v : w) {
        if (v < 0.0) v = 0.0;
        sum += v;
    }
    if (sum < 1e-8) {
        const double u = 1.0 / static_cast<double>(w.size());
        for (double& v : w) v = u;
        return;
    }
    for (double& v : w) v /= sum;
}

}  // namespace diffmn
