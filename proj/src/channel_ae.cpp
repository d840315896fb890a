#include "diffmn/channel_ae.hpp"

#include <cmath>
#include <numeric>

#include "diffmn/rng.hpp"

namespace diffmn {

std::vector<double> ChannelAutoencoder::encode(std::span<const double> x) const {
    if (static_cast<int>(x.size()) != input_dim())
        throw ShapeError("encode: input size " + std::to_string(x.size()) + " does not match " +
                         std::to_string(input_dim()));
    std::vector<double> out(latent_dim());
    std::vector<double> scratch;
    mlp_eval_row(encoder, x.data(), out.data(), scratch);
    return out;
}

std::vector<double> ChannelAutoencoder::decode(std::span<const double> h) const {
    if (static_cast<int>(h.size()) != latent_dim())
        throw ShapeError("decode: input size " + std::to_string(h.size()) + " does not match " +
                         std::to_string(latent_dim()));
    std::vector<double> out(input_dim());
    std::vector<double> scratch;
    mlp_eval_row(decoder, h.data(), out.data(), scratch);
    return out;
}

Tensor ChannelAutoencoder::encode_rows(const Tensor& x) const { return mlp_eval(encoder, x); }

Tensor ChannelAutoencoder::decode_rows(const Tensor& h) const { return mlp_eval(decoder, h); }

uint64_t ChannelAutoencoder::param_checksum() const {
    uint64_t h = 1469598103934665603ULL;
    for (const auto& l : encoder.layers) {
        h = checksum(l.weight, h);
        h = checksum(l.bias, h);
    }
    for (const auto& l : decoder.layers) {
        h = checksum(l.weight, h);
        h = checksum(l.bias, h);
    }
    return h;
}

Tensor spline_filled_values(const IrregularSeries& series, const ControlPath& path) {
    Tensor out(series.steps(), series.channels, series.values);
    for (int t = 0; t < series.steps(); ++t)
        for (int ch = 0; ch < series.channels; ++ch)
            if (!series.observed(t, ch)) out.at(t, ch) = path.eval_channel(ch, series.times[t]);
    return out;
}

ChannelAutoencoder pretrain_autoencoder(const std::vector<IrregularSeries>& dataset,
                                        const AeConfig& config, AeTrainReport* report) {
    if (dataset.empty()) throw ContractError("pretrain_autoencoder: empty dataset");
    const int M = dataset.front().channels;

    // Flatten every sample to spline-filled rows; the loss only sees entries
    // that were actually observed.
    std::vector<double> rows, row_mask;
    for (const auto& s : dataset) {
        if (s.channels != M) throw ShapeError("pretrain_autoencoder: inconsistent channel counts");
        ControlPath path = fit_control_path(s);
        Tensor filled = spline_filled_values(s, path);
        rows.insert(rows.end(), filled.data.begin(), filled.data.end());
        for (uint8_t m : s.mask) row_mask.push_back(m ? 1.0 : 0.0);
    }
    const int n_rows = static_cast<int>(rows.size()) / M;

    Rng rng(config.seed);
    ChannelAutoencoder ae;
    ae.encoder = make_mlp({M, config.hidden, config.latent_dim}, Activation::Tanh, rng);
    ae.decoder = make_mlp({config.latent_dim, config.hidden, M}, Activation::Tanh, rng);

    auto params = mlp_params(ae.encoder, "channel_ae.encoder");
    auto dec_params = mlp_params(ae.decoder, "channel_ae.decoder");
    params.insert(params.end(), dec_params.begin(), dec_params.end());
    AdamState adam = AdamState::init(params, config.lr);
    GradBuffer grads(params);

    auto dataset_loss = [&]() {
        Tensor in(n_rows, M, rows);
        Tensor recon = ae.decode_rows(ae.encode_rows(in));
        double sse = 0.0;
        double count = 0.0;
        for (size_t i = 0; i < rows.size(); ++i) {
            if (row_mask[i] == 0.0) continue;
            const double d = recon.data[i] - rows[i];
            sse += d * d;
            count += 1.0;
        }
        return sse / std::max(count, 1.0);
    };

    AeTrainReport local;
    AeTrainReport& rep = report ? *report : local;
    rep.epoch_loss.clear();
    rep.epoch_loss.push_back(dataset_loss());

    std::vector<int> order(n_rows);
    std::iota(order.begin(), order.end(), 0);

    Tape tape;
    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        rng.shuffle(order);
        for (int start = 0; start < n_rows; start += config.batch_size) {
            const int B = std::min(config.batch_size, n_rows - start);
            std::vector<double> in(static_cast<size_t>(B) * M), mask(static_cast<size_t>(B) * M);
            double observed = 0.0;
            for (int i = 0; i < B; ++i) {
                const int r = order[start + i];
                for (int c = 0; c < M; ++c) {
                    in[static_cast<size_t>(i) * M + c] = rows[static_cast<size_t>(r) * M + c];
                    const double m = row_mask[static_cast<size_t>(r) * M + c];
                    mask[static_cast<size_t>(i) * M + c] = m;
                    observed += m;
                }
            }
            if (observed == 0.0) continue;

            tape.reset();
            TapedMlp enc, dec;
            enc.stage(tape, ae.encoder);
            dec.stage(tape, ae.decoder);
            NodeId x = tape.leaf(std::span<const double>(in), B, M);
            NodeId recon = dec.forward(tape, enc.forward(tape, x));
            NodeId diff = tape.mul_const(tape.sub(recon, x), mask);
            NodeId loss = tape.scale(tape.reduce_sum(tape.mul(diff, diff)), 1.0 / observed);
            tape.backward(loss);

            grads.zero();
            size_t pi = 0;
            for (const auto& mlp : {&enc, &dec}) {
                for (size_t li = 0; li < mlp->weights.size(); ++li) {
                    grads.accumulate(pi++, tape.grad(mlp->weights[li]));
                    grads.accumulate(pi++, tape.grad(mlp->biases[li]));
                }
            }
            adam_step(adam, params, grads.grads);
        }
        rep.epoch_loss.push_back(dataset_loss());
    }

    rep.diverged = !(rep.epoch_loss.back() < rep.epoch_loss.front());
    ae.frozen = true;
    return ae;
}

}  // namespace diffmn
