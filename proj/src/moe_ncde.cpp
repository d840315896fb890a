#include "diffmn/moe_ncde.hpp"

#include <algorithm>
#include <cmath>

#include "diffmn/rng.hpp"

namespace diffmn {

namespace {

constexpr double kSnapTol = 1e-12;

std::vector<double> uniform_grid(int len) {
    std::vector<double> t(len);
    for (int i = 0; i < len; ++i) t[i] = len == 1 ? 0.0 : static_cast<double>(i) / (len - 1);
    return t;
}

std::vector<int> expert_dims(int latent_dim, int channels_plus_time, const MoeNcdeConfig& cfg) {
    std::vector<int> dims = {latent_dim};
    for (int i = 0; i < cfg.expert_layers - 1; ++i) dims.push_back(cfg.expert_hidden);
    dims.push_back(latent_dim * channels_plus_time);
    return dims;
}

}  // namespace

void check_simplex(std::span<const double> s, double tol) {
    double sum = 0.0;
    for (double v : s) {
        if (v < -tol)
            throw ContractError("weights off the simplex: entry " + std::to_string(v) + " < 0");
        sum += v;
    }
    if (std::abs(sum - 1.0) > tol)
        throw ContractError("weights off the simplex: sum " + std::to_string(sum) + " != 1");
}

MoeNcdeModel MoeNcdeModel::init(int data_channels, const ChannelAutoencoder& ae,
                                const MoeNcdeConfig& config) {
    if (config.n_experts < 1) throw ContractError("MoeNcdeModel: need at least one expert");
    if (config.decoupled && ae.input_dim() != data_channels)
        throw ShapeError("MoeNcdeModel: autoencoder input dim " + std::to_string(ae.input_dim()) +
                         " does not match data channels " + std::to_string(data_channels));

    MoeNcdeModel m;
    m.ae_ = ae;
    m.config_ = config;
    m.data_channels_ = data_channels;
    m.latent_dim_ = ae.latent_dim();
    m.grid_ = uniform_grid(config.grid_len);

    Rng rng(Rng::mix(config.seed, 0xCDE));
    const auto dims = expert_dims(m.latent_dim_, data_channels + 1, config);
    for (int e = 0; e < config.n_experts; ++e)
        m.experts.push_back(make_mlp(dims, Activation::Tanh, rng));
    m.router = make_mlp({config.grid_len * data_channels, config.router_hidden, config.n_experts},
                        Activation::Tanh, rng);
    if (!config.decoupled) {
        const int hidden = std::max(ae.encoder.layers.empty() ? 32 : ae.encoder.layers[0].weight.cols(), 8);
        m.init_net = make_mlp({data_channels, hidden, m.latent_dim_}, Activation::Tanh, rng);
        m.readout_net = make_mlp({m.latent_dim_, hidden, data_channels}, Activation::Tanh, rng);
    }
    return m;
}

RouterOutput MoeNcdeModel::route(const IrregularSeries& series) const {
    return route(fit_control_path(series));
}

RouterOutput MoeNcdeModel::route(const ControlPath& path) const {
    if (path.data_channels() != data_channels_)
        throw ShapeError("route: sample has " + std::to_string(path.data_channels()) +
                         " channels, model expects " + std::to_string(data_channels_));
    std::vector<double> input(grid_.size() * static_cast<size_t>(data_channels_));
    for (size_t t = 0; t < grid_.size(); ++t)
        for (int ch = 0; ch < data_channels_; ++ch)
            input[t * data_channels_ + ch] = path.eval_channel(ch, grid_[t]);
    if (static_cast<int>(input.size()) != router.in_dim())
        throw ShapeError("route: grid input length " + std::to_string(input.size()) +
                         " does not match router input " + std::to_string(router.in_dim()));

    RouterOutput out;
    out.logits.resize(config_.n_experts);
    std::vector<double> scratch;
    mlp_eval_row(router, input.data(), out.logits.data(), scratch);

    out.weights.resize(out.logits.size());
    double mx = out.logits[0];
    for (double v : out.logits) mx = std::max(mx, v);
    double sum = 0.0;
    for (size_t i = 0; i < out.logits.size(); ++i) {
        out.weights[i] = std::exp(out.logits[i] - mx);
        sum += out.weights[i];
    }
    for (double& w : out.weights) w /= sum;
    return out;
}

Tensor MoeNcdeModel::moe_dynamics(std::span<const double> z, std::span<const double> s) const {
    check_simplex(s);
    if (static_cast<int>(s.size()) != config_.n_experts)
        throw ShapeError("moe_dynamics: got " + std::to_string(s.size()) + " weights for " +
                         std::to_string(config_.n_experts) + " experts");
    const int out_len = latent_dim_ * (data_channels_ + 1);
    Tensor acc(latent_dim_, data_channels_ + 1, std::vector<double>(out_len, 0.0));
    std::vector<double> expert_out(out_len), scratch;
    for (int e = 0; e < config_.n_experts; ++e) {
        mlp_eval_row(experts[e], z.data(), expert_out.data(), scratch);
        for (int i = 0; i < out_len; ++i) acc.data[i] += s[e] * expert_out[i];
    }
    return acc;
}

SolveMesh SolveMesh::build(const ControlPath& path, std::span<const double> query_times,
                           int substeps) {
    if (query_times.empty()) throw ContractError("cde_solve: no query times");
    for (size_t i = 0; i + 1 < query_times.size(); ++i)
        if (!(query_times[i] <= query_times[i + 1]))
            throw ContractError("cde_solve: query times must be sorted");
    for (double t : query_times)
        if (std::isnan(t)) throw ContractError("cde_solve: query time is NaN");

    const double t0 = query_times.front();
    const double t1 = query_times.back();

    std::vector<double> anchors = {t0};
    for (double k : path.knot_union())
        if (k > t0 + kSnapTol && k < t1 - kSnapTol) anchors.push_back(k);
    if (t1 > t0 + kSnapTol) anchors.push_back(t1);

    SolveMesh mesh;
    mesh.nodes.push_back(anchors.front());
    for (size_t i = 0; i + 1 < anchors.size(); ++i) {
        const double a = anchors[i], b = anchors[i + 1];
        for (int k = 1; k <= substeps; ++k)
            mesh.nodes.push_back(a + (b - a) * static_cast<double>(k) / substeps);
    }

    // Snap queries onto existing nodes or insert them.
    for (double q : query_times) {
        auto it = std::lower_bound(mesh.nodes.begin(), mesh.nodes.end(), q - kSnapTol);
        if (it == mesh.nodes.end() || std::abs(*it - q) > kSnapTol)
            mesh.nodes.insert(it, q);
    }
    for (double q : query_times) {
        auto it = std::lower_bound(mesh.nodes.begin(), mesh.nodes.end(), q - kSnapTol);
        mesh.query_index.push_back(static_cast<int>(it - mesh.nodes.begin()));
    }
    return mesh;
}

std::vector<double> MoeNcdeModel::initial_latent(const ControlPath& path, double t0) const {
    std::vector<double> x0(path.channels());
    path.eval(t0, x0.data());
    x0.resize(data_channels_);  // the init map never sees the time channel
    if (config_.decoupled) return ae_.encode(x0);
    std::vector<double> z0(latent_dim_), scratch;
    mlp_eval_row(init_net, x0.data(), z0.data(), scratch);
    return z0;
}

std::vector<double> MoeNcdeModel::readout(std::span<const double> z) const {
    if (config_.decoupled) return ae_.decode(z);
    std::vector<double> x(data_channels_), scratch;
    mlp_eval_row(readout_net, z.data(), x.data(), scratch);
    return x;
}

LatentTrajectory MoeNcdeModel::cde_solve(std::span<const double> s, const ControlPath& path,
                                         std::span<const double> query_times) const {
    check_simplex(s);
    SolveMesh mesh = SolveMesh::build(path, query_times, config_.substeps);

    const int d = latent_dim_;
    const int C = data_channels_ + 1;
    std::vector<double> z = initial_latent(path, mesh.nodes.front());
    std::vector<double> k1(d), k2(d), k3(d), k4(d), ztmp(d), xp(C);
    std::vector<double> expert_out(static_cast<size_t>(d) * C), scratch;

    auto dynamics = [&](const std::vector<double>& zin, double t, std::vector<double>& dz) {
        path.deriv(t, xp.data());
        std::fill(dz.begin(), dz.end(), 0.0);
        for (int e = 0; e < config_.n_experts; ++e) {
            mlp_eval_row(experts[e], zin.data(), expert_out.data(), scratch);
            const double w = s[e];
            for (int r = 0; r < d; ++r) {
                double acc = 0.0;
                const double* row = expert_out.data() + static_cast<size_t>(r) * C;
                for (int c = 0; c < C; ++c) acc += row[c] * xp[c];
                dz[r] += w * acc;
            }
        }
    };

    LatentTrajectory traj;
    traj.times.assign(query_times.begin(), query_times.end());
    traj.states = Tensor(static_cast<int>(query_times.size()), d);

    size_t qi = 0;
    auto record = [&](int node) {
        while (qi < mesh.query_index.size() && mesh.query_index[qi] == node) {
            std::copy(z.begin(), z.end(), traj.states.data.begin() + static_cast<long>(qi) * d);
            ++qi;
        }
    };
    record(0);

    for (size_t i = 0; i + 1 < mesh.nodes.size(); ++i) {
        const double t = mesh.nodes[i];
        const double h = mesh.nodes[i + 1] - t;
        dynamics(z, t, k1);
        for (int r = 0; r < d; ++r) ztmp[r] = z[r] + 0.5 * h * k1[r];
        dynamics(ztmp, t + 0.5 * h, k2);
        for (int r = 0; r < d; ++r) ztmp[r] = z[r] + 0.5 * h * k2[r];
        dynamics(ztmp, t + 0.5 * h, k3);
        for (int r = 0; r < d; ++r) ztmp[r] = z[r] + h * k3[r];
        dynamics(ztmp, t + h, k4);
        for (int r = 0; r < d; ++r)
            z[r] += h / 6.0 * (k1[r] + 2.0 * k2[r] + 2.0 * k3[r] + k4[r]);
        for (double v : z)
            if (!std::isfinite(v))
                throw SolverBlowupError("cde_solve: non-finite latent state at t=" +
                                            std::to_string(mesh.nodes[i + 1]),
                                        mesh.nodes[i + 1]);
        record(static_cast<int>(i + 1));
    }
    return traj;
}

IrregularSeries MoeNcdeModel::impute(const IrregularSeries& series) const {
    ControlPath path = fit_control_path(series);
    RouterOutput r = route(path);
    return continuous_generate(r.weights, path, grid_, series.id);
}

IrregularSeries MoeNcdeModel::continuous_generate(std::span<const double> s,
                                                  const ControlPath& path,
                                                  std::span<const double> query_times,
                                                  const std::string& id) const {
    LatentTrajectory traj = cde_solve(s, path, query_times);
    IrregularSeries out;
    out.id = id;
    out.times.assign(query_times.begin(), query_times.end());
    out.channels = data_channels_;
    out.values.resize(query_times.size() * static_cast<size_t>(data_channels_));
    out.mask.assign(out.values.size(), 1);
    for (size_t q = 0; q < query_times.size(); ++q) {
        auto x = readout(std::span<const double>(
            traj.states.data.data() + static_cast<long>(q) * latent_dim_, latent_dim_));
        std::copy(x.begin(), x.end(), out.values.begin() + static_cast<long>(q) * data_channels_);
    }
    return out;
}

std::vector<ParamRef> MoeNcdeModel::trainable_params() {
    std::vector<ParamRef> refs;
    for (size_t e = 0; e < experts.size(); ++e) {
        auto er = mlp_params(experts[e], "experts[" + std::to_string(e) + "]");
        refs.insert(refs.end(), er.begin(), er.end());
    }
    auto rr = mlp_params(router, "router");
    refs.insert(refs.end(), rr.begin(), rr.end());
    if (!config_.decoupled) {
        auto ir = mlp_params(init_net, "init_net");
        refs.insert(refs.end(), ir.begin(), ir.end());
        auto or_ = mlp_params(readout_net, "readout_net");
        refs.insert(refs.end(), or_.begin(), or_.end());
    }
    return refs;
}

namespace {

// One sample's forward pass on the tape: routing, the RK4 solve with every
// stage recorded, readout and observed-entries MSE.
struct TapedSolve {
    NodeId loss = -1;
    double loss_value = 0.0;
};

TapedSolve taped_sample_loss(Tape& tape, MoeNcdeModel& model, const IrregularSeries& series,
                             const ControlPath& path, const std::vector<TapedMlp>& experts_t,
                             const TapedMlp& router_t, const TapedMlp& decoder_t,
                             const TapedMlp* init_t) {
    const auto& cfg = model.config();
    const int d = model.latent_dim();
    const int M = model.data_channels();
    const int C = M + 1;

    // Router input: spline-filled values on the reference grid.
    const auto& grid = model.reference_grid();
    std::vector<double> rin(grid.size() * static_cast<size_t>(M));
    for (size_t t = 0; t < grid.size(); ++t)
        for (int ch = 0; ch < M; ++ch) rin[t * M + ch] = path.eval_channel(ch, grid[t]);
    NodeId s_node = tape.softmax_row(
        router_t.forward(tape, tape.leaf(std::span<const double>(rin), 1, static_cast<int>(rin.size()))));
    std::vector<NodeId> s_scalars(cfg.n_experts);
    for (int e = 0; e < cfg.n_experts; ++e) s_scalars[e] = tape.slice(s_node, e, 1);

    SolveMesh mesh = SolveMesh::build(path, series.times, cfg.substeps);

    NodeId z;
    {
        std::vector<double> x0(path.channels());
        path.eval(mesh.nodes.front(), x0.data());
        x0.resize(M);
        if (init_t) {
            z = init_t->forward(tape, tape.leaf(std::span<const double>(x0), 1, M));
        } else {
            auto z0 = model.autoencoder().encode(x0);
            z = tape.leaf(std::span<const double>(z0), 1, d);
        }
    }

    std::vector<double> xp(C);
    auto dynamics = [&](NodeId zin, double t) {
        path.deriv(t, xp.data());
        NodeId fz = -1;
        for (int e = 0; e < cfg.n_experts; ++e) {
            NodeId out = tape.mul_scalar(experts_t[e].forward(tape, zin), s_scalars[e]);
            fz = e == 0 ? out : tape.add(fz, out);
        }
        NodeId mat = tape.reshape(fz, d, C);
        NodeId xp_leaf = tape.leaf(std::span<const double>(xp), C, 1);
        return tape.reshape(tape.matmul(mat, xp_leaf), 1, d);
    };

    std::vector<NodeId> recorded(mesh.query_index.size(), -1);
    size_t qi = 0;
    auto record = [&](int node) {
        while (qi < mesh.query_index.size() && mesh.query_index[qi] == node) recorded[qi++] = z;
    };
    record(0);

    for (size_t i = 0; i + 1 < mesh.nodes.size(); ++i) {
        const double t = mesh.nodes[i];
        const double h = mesh.nodes[i + 1] - t;
        NodeId k1 = dynamics(z, t);
        NodeId k2 = dynamics(tape.add(z, tape.scale(k1, 0.5 * h)), t + 0.5 * h);
        NodeId k3 = dynamics(tape.add(z, tape.scale(k2, 0.5 * h)), t + 0.5 * h);
        NodeId k4 = dynamics(tape.add(z, tape.scale(k3, h)), t + h);
        NodeId sum = tape.add(tape.add(k1, k4), tape.scale(tape.add(k2, k3), 2.0));
        z = tape.add(z, tape.scale(sum, h / 6.0));
        for (double v : tape.value(z))
            if (!std::isfinite(v))
                throw SolverBlowupError("train: non-finite latent state at t=" +
                                            std::to_string(mesh.nodes[i + 1]),
                                        mesh.nodes[i + 1]);
        record(static_cast<int>(i + 1));
    }

    // Stack query latents, decode in one batch, mask to observed entries.
    NodeId stacked = recorded[0];
    for (size_t q = 1; q < recorded.size(); ++q) stacked = tape.concat(stacked, recorded[q]);
    stacked = tape.reshape(stacked, static_cast<int>(recorded.size()), d);
    NodeId recon = decoder_t.forward(tape, stacked);

    std::vector<double> mask(series.values.size());
    double observed = 0.0;
    for (size_t i = 0; i < mask.size(); ++i) {
        mask[i] = series.mask[i] ? 1.0 : 0.0;
        observed += mask[i];
    }
    NodeId target = tape.leaf(std::span<const double>(series.values), series.steps(), M);
    NodeId diff = tape.mul_const(tape.sub(recon, target), mask);
    NodeId loss = tape.scale(tape.reduce_sum(tape.mul(diff, diff)), 1.0 / std::max(observed, 1.0));

    TapedSolve out;
    out.loss = loss;
    out.loss_value = tape.value(loss)[0];
    return out;
}

}  // namespace

NcdeTrainReport train_moe_ncde(MoeNcdeModel& model, const std::vector<IrregularSeries>& dataset,
                               const MoeNcdeConfig& config) {
    if (dataset.empty()) throw ContractError("train_moe_ncde: empty dataset");
    if (model.config().decoupled && !model.autoencoder().frozen)
        throw ContractError("train_moe_ncde: autoencoder must be pretrained and frozen");

    const uint64_t ae_checksum_before = model.autoencoder().param_checksum();

    auto params = model.trainable_params();
    AdamState adam = AdamState::init(params, config.lr);
    GradBuffer grads(params);

    // Paths are immutable per sample; fit them once.
    std::vector<ControlPath> paths;
    paths.reserve(dataset.size());
    for (const auto& s : dataset) paths.push_back(fit_control_path(s));

    NcdeTrainReport report;
    Rng rng(Rng::mix(config.seed, 0x7EA1));
    std::vector<int> order(dataset.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);

    // Last-good snapshot for the divergence abort path.
    auto snapshot = [&]() {
        std::vector<Tensor> snap;
        snap.reserve(params.size());
        for (auto& p : params) snap.push_back(*p.tensor);
        return snap;
    };
    std::vector<Tensor> last_good = snapshot();

    Tape tape;
    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        rng.shuffle(order);
        double epoch_loss = 0.0;
        long counted = 0;
        bool diverged = false;

        for (size_t start = 0; start < order.size() && !diverged;
             start += static_cast<size_t>(config.batch_size)) {
            const size_t stop = std::min(order.size(), start + config.batch_size);
            const double inv = 1.0 / static_cast<double>(stop - start);
            grads.zero();
            for (size_t bi = start; bi < stop; ++bi) {
                const int j = order[bi];
                tape.reset();
                std::vector<TapedMlp> experts_t(config.n_experts);
                for (int e = 0; e < config.n_experts; ++e)
                    experts_t[e].stage(tape, model.experts[e]);
                TapedMlp router_t, decoder_t, init_t;
                router_t.stage(tape, model.router);
                const bool decoupled = model.config().decoupled;
                decoder_t.stage(tape, decoupled ? model.autoencoder().decoder : model.readout_net);
                if (!decoupled) init_t.stage(tape, model.init_net);

                TapedSolve fwd;
                try {
                    fwd = taped_sample_loss(tape, model, dataset[j], paths[j], experts_t, router_t,
                                            decoder_t, decoupled ? nullptr : &init_t);
                } catch (const SolverBlowupError&) {
                    diverged = true;
                    break;
                }
                if (!std::isfinite(fwd.loss_value)) {
                    diverged = true;
                    break;
                }
                epoch_loss += fwd.loss_value;
                ++counted;
                tape.backward(fwd.loss);

                size_t pi = 0;
                for (int e = 0; e < config.n_experts; ++e)
                    for (size_t li = 0; li < experts_t[e].weights.size(); ++li) {
                        grads.accumulate(pi++, tape.grad(experts_t[e].weights[li]), inv);
                        grads.accumulate(pi++, tape.grad(experts_t[e].biases[li]), inv);
                    }
                for (size_t li = 0; li < router_t.weights.size(); ++li) {
                    grads.accumulate(pi++, tape.grad(router_t.weights[li]), inv);
                    grads.accumulate(pi++, tape.grad(router_t.biases[li]), inv);
                }
                if (!decoupled) {
                    for (size_t li = 0; li < init_t.weights.size(); ++li) {
                        grads.accumulate(pi++, tape.grad(init_t.weights[li]), inv);
                        grads.accumulate(pi++, tape.grad(init_t.biases[li]), inv);
                    }
                    for (size_t li = 0; li < decoder_t.weights.size(); ++li) {
                        grads.accumulate(pi++, tape.grad(decoder_t.weights[li]), inv);
                        grads.accumulate(pi++, tape.grad(decoder_t.biases[li]), inv);
                    }
                }
            }
            if (!diverged) adam_step(adam, params, grads.grads);
        }

        if (diverged || counted == 0) {
            for (size_t i = 0; i < params.size(); ++i) *params[i].tensor = last_good[i];
            report.aborted = true;
            break;
        }
        report.epoch_loss.push_back(epoch_loss / static_cast<double>(counted));
        last_good = snapshot();
    }

    if (model.config().decoupled &&
        model.autoencoder().param_checksum() != ae_checksum_before)
        throw ContractError("train_moe_ncde: frozen autoencoder was modified during training");

    report.weight_table.reserve(dataset.size());
    for (size_t j = 0; j < dataset.size(); ++j) {
        RouterOutput r = model.route(paths[j]);
        report.weight_table.emplace_back(dataset[j].id, r.weights);
    }
    return report;
}

}  // namespace diffmn
