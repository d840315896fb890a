#include "diffmn/nn.hpp"

#include <cmath>

namespace diffmn {

namespace {

Tensor xavier_uniform(int in, int out, Rng& rng) {
    Tensor w({in, out});
    const double limit = std::sqrt(6.0 / (in + out));
    for (double& x : w.data) x = rng.uniform(-limit, limit);
    return w;
}

NodeId apply_activation(Tape& tape, NodeId x, Activation act) {
    switch (act) {
        case Activation::Identity: return x;
        case Activation::Tanh: return tape.tanh_(x);
        case Activation::Relu: return tape.relu_(x);
        case Activation::Sigmoid: return tape.sigmoid_(x);
    }
    return x;
}

void activate_inplace(double* x, int n, Activation act) {
    switch (act) {
        case Activation::Identity: return;
        case Activation::Tanh:
            for (int i = 0; i < n; ++i) x[i] = std::tanh(x[i]);
            return;
        case Activation::Relu:
            for (int i = 0; i < n; ++i) x[i] = x[i] > 0.0 ? x[i] : 0.0;
            return;
        case Activation::Sigmoid:
            for (int i = 0; i < n; ++i) x[i] = 1.0 / (1.0 + std::exp(-x[i]));
            return;
    }
}

}  // namespace

MlpParams make_mlp(const std::vector<int>& dims, Activation hidden_act, Rng& rng) {
    if (dims.size() < 2) throw ShapeError("make_mlp: need at least [in, out] dimensions");
    MlpParams p;
    for (size_t i = 0; i + 1 < dims.size(); ++i) {
        MlpParams::Layer layer;
        layer.weight = xavier_uniform(dims[i], dims[i + 1], rng);
        layer.bias = Tensor({1, dims[i + 1]});
        layer.act = (i + 2 < dims.size()) ? hidden_act : Activation::Identity;
        p.layers.push_back(std::move(layer));
    }
    return p;
}

void TapedMlp::stage(Tape& tape, const MlpParams& p) {
    params = &p;
    weights.clear();
    biases.clear();
    for (const auto& layer : p.layers) {
        weights.push_back(tape.leaf(layer.weight));
        biases.push_back(tape.leaf(layer.bias));
    }
}

NodeId TapedMlp::forward(Tape& tape, NodeId input) const {
    NodeId x = input;
    for (size_t i = 0; i < params->layers.size(); ++i) {
        if (tape.cols(x) != params->layers[i].weight.rows())
            throw ShapeError("mlp_forward: input width " + std::to_string(tape.cols(x)) +
                             " does not match layer input " +
                             std::to_string(params->layers[i].weight.rows()));
        x = tape.add_bias(tape.matmul(x, weights[i]), biases[i]);
        x = apply_activation(tape, x, params->layers[i].act);
    }
    return x;
}

NodeId mlp_forward(const MlpParams& params, NodeId input, Tape& tape) {
    TapedMlp m;
    m.stage(tape, params);
    return m.forward(tape, input);
}

Tensor mlp_forward(const MlpParams& params, const Tensor& input, Tape& tape) {
    NodeId out = mlp_forward(params, tape.leaf(input), tape);
    return tape.value_tensor(out);
}

Tensor mlp_eval(const MlpParams& params, const Tensor& input) {
    if (input.cols() != params.in_dim())
        throw ShapeError("mlp_eval: input width " + std::to_string(input.cols()) +
                         " does not match layer input " + std::to_string(params.in_dim()));
    const int B = input.rows();
    std::vector<double> cur(input.data);
    std::vector<double> nxt;
    int cur_dim = input.cols();
    for (const auto& layer : params.layers) {
        const int out_dim = layer.weight.cols();
        nxt.assign(static_cast<size_t>(B) * out_dim, 0.0);
        for (int i = 0; i < B; ++i) {
            const double* xi = cur.data() + static_cast<size_t>(i) * cur_dim;
            double* yi = nxt.data() + static_cast<size_t>(i) * out_dim;
            for (int j = 0; j < out_dim; ++j) yi[j] = layer.bias.data[j];
            for (int k = 0; k < cur_dim; ++k) {
                const double x = xi[k];
                const double* wk = layer.weight.data.data() + static_cast<size_t>(k) * out_dim;
                for (int j = 0; j < out_dim; ++j) yi[j] += x * wk[j];
            }
            activate_inplace(yi, out_dim, layer.act);
        }
        cur.swap(nxt);
        cur_dim = out_dim;
    }
    return Tensor(B, cur_dim, std::move(cur));
}

void mlp_eval_row(const MlpParams& params, const double* in, double* out,
                  std::vector<double>& scratch) {
    int cur_dim = params.in_dim();
    scratch.assign(in, in + cur_dim);
    std::vector<double> tmp;
    for (const auto& layer : params.layers) {
        const int out_dim = layer.weight.cols();
        tmp.assign(out_dim, 0.0);
        for (int j = 0; j < out_dim; ++j) tmp[j] = layer.bias.data[j];
        for (int k = 0; k < cur_dim; ++k) {
            const double x = scratch[k];
            const double* wk = layer.weight.data.data() + static_cast<size_t>(k) * out_dim;
            for (int j = 0; j < out_dim; ++j) tmp[j] += x * wk[j];
        }
        activate_inplace(tmp.data(), out_dim, layer.act);
        scratch.swap(tmp);
        cur_dim = out_dim;
    }
    std::copy(scratch.begin(), scratch.end(), out);
}

GruParams make_gru(int input_dim, int hidden_dim, Rng& rng) {
    GruParams p;
    p.Wz = xavier_uniform(input_dim, hidden_dim, rng);
    p.Uz = xavier_uniform(hidden_dim, hidden_dim, rng);
    p.bz = Tensor({1, hidden_dim});
    p.Wr = xavier_uniform(input_dim, hidden_dim, rng);
    p.Ur = xavier_uniform(hidden_dim, hidden_dim, rng);
    p.br = Tensor({1, hidden_dim});
    p.Wh = xavier_uniform(input_dim, hidden_dim, rng);
    p.Uh = xavier_uniform(hidden_dim, hidden_dim, rng);
    p.bh = Tensor({1, hidden_dim});
    return p;
}

Tensor gru_cell(const GruParams& params, const Tensor& hidden, const Tensor& input) {
    if (input.cols() != params.input_dim() || hidden.cols() != params.hidden_dim())
        throw ShapeError("gru_cell: input " + std::to_string(input.cols()) + "/hidden " +
                         std::to_string(hidden.cols()) + " do not match params " +
                         std::to_string(params.input_dim()) + "/" + std::to_string(params.hidden_dim()));
    Tape tape;
    TapedGru g;
    g.stage(tape, params);
    NodeId h = tape.leaf(hidden);
    NodeId x = tape.leaf(input);
    return tape.value_tensor(g.step(tape, h, x));
}

void TapedGru::stage(Tape& tape, const GruParams& p) {
    params = &p;
    Wz = tape.leaf(p.Wz);
    Uz = tape.leaf(p.Uz);
    bz = tape.leaf(p.bz);
    Wr = tape.leaf(p.Wr);
    Ur = tape.leaf(p.Ur);
    br = tape.leaf(p.br);
    Wh = tape.leaf(p.Wh);
    Uh = tape.leaf(p.Uh);
    bh = tape.leaf(p.bh);
}

NodeId TapedGru::step(Tape& tape, NodeId hidden, NodeId input) const {
    if (tape.cols(input) != params->input_dim() || tape.cols(hidden) != params->hidden_dim())
        throw ShapeError("gru step: input " + std::to_string(tape.cols(input)) + "/hidden " +
                         std::to_string(tape.cols(hidden)) + " do not match params " +
                         std::to_string(params->input_dim()) + "/" +
                         std::to_string(params->hidden_dim()));
    NodeId z = tape.sigmoid_(
        tape.add_bias(tape.add(tape.matmul(input, Wz), tape.matmul(hidden, Uz)), bz));
    NodeId r = tape.sigmoid_(
        tape.add_bias(tape.add(tape.matmul(input, Wr), tape.matmul(hidden, Ur)), br));
    NodeId cand = tape.tanh_(tape.add_bias(
        tape.add(tape.matmul(input, Wh), tape.matmul(tape.mul(r, hidden), Uh)), bh));
    // h' = (1 - z) * h + z * cand
    NodeId one_minus_z = tape.add_const(tape.scale(z, -1.0), 1.0);
    return tape.add(tape.mul(one_minus_z, hidden), tape.mul(z, cand));
}

std::vector<ParamRef> mlp_params(MlpParams& p, const std::string& prefix) {
    std::vector<ParamRef> out;
    for (size_t i = 0; i < p.layers.size(); ++i) {
        out.push_back({prefix + ".w" + std::to_string(i), &p.layers[i].weight});
        out.push_back({prefix + ".b" + std::to_string(i), &p.layers[i].bias});
    }
    return out;
}

std::vector<ParamRef> gru_params(GruParams& p, const std::string& prefix) {
    return {
        {prefix + ".Wz", &p.Wz}, {prefix + ".Uz", &p.Uz}, {prefix + ".bz", &p.bz},
        {prefix + ".Wr", &p.Wr}, {prefix + ".Ur", &p.Ur}, {prefix + ".br", &p.br},
        {prefix + ".Wh", &p.Wh}, {prefix + ".Uh", &p.Uh}, {prefix + ".bh", &p.bh},
    };
}

uint64_t params_checksum(const std::vector<ParamRef>& params) {
    uint64_t h = 1469598103934665603ULL;
    for (const auto& p : params) h = checksum(*p.tensor, h);
    return h;
}

AdamState AdamState::init(const std::vector<ParamRef>& params, double lr) {
    AdamState st;
    st.lr = lr;
    for (const auto& p : params) {
        st.m.emplace_back(p.tensor->data.size(), 0.0);
        st.v.emplace_back(p.tensor->data.size(), 0.0);
    }
    return st;
}

void adam_step(AdamState& state, const std::vector<ParamRef>& params,
               const std::vector<std::vector<double>>& grads) {
    if (params.size() != grads.size() || params.size() != state.m.size())
        throw ShapeError("adam_step: parameter/gradient/state counts disagree");
    state.step += 1;
    const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
    for (size_t i = 0; i < params.size(); ++i) {
        auto& p = params[i].tensor->data;
        const auto& g = grads[i];
        auto& m = state.m[i];
        auto& v = state.v[i];
        if (p.size() != g.size())
            throw ShapeError("adam_step: gradient size mismatch for " + params[i].name);
        for (size_t j = 0; j < p.size(); ++j) {
            if (!std::isfinite(g[j]))
                throw DivergenceError("adam_step: non-finite gradient in " + params[i].name,
                                      params[i].name);
            m[j] = state.beta1 * m[j] + (1.0 - state.beta1) * g[j];
            v[j] = state.beta2 * v[j] + (1.0 - state.beta2) * g[j] * g[j];
            const double mhat = m[j] / bc1;
            const double vhat = v[j] / bc2;
            p[j] -= state.lr * mhat / (std::sqrt(vhat) + state.eps);
        }
    }
}

GradBuffer::GradBuffer(const std::vector<ParamRef>& params) {
    for (const auto& p : params) grads.emplace_back(p.tensor->data.size(), 0.0);
}

void GradBuffer::zero() {
    for (auto& g : grads) std::fill(g.begin(), g.end(), 0.0);
}

void GradBuffer::accumulate(size_t i, std::span<const double> g, double scale) {
    auto& dst = grads[i];
    if (g.size() != dst.size())
        throw ShapeError("GradBuffer: gradient size mismatch at index " + std::to_string(i));
    for (size_t j = 0; j < dst.size(); ++j) dst[j] += scale * g[j];
}

void GradBuffer::scale_all(double s) {
    for (auto& g : grads)
        for (double& x : g) x *= s;
}

}  // namespace diffmn
