#pragma once

#include <span>
#include <vector>

#include "diffmn/nn.hpp"
#include "diffmn/spline.hpp"

namespace diffmn {

struct AeConfig {
    int latent_dim = 16;  // desk-scale default; 64 matches the full-scale setup
    int hidden = 32;
    int epochs = 200;
    int batch_size = 256;
    double lr = 1e-3;
    uint64_t seed = 0;
};

struct AeTrainReport {
    std::vector<double> epoch_loss;  // [0] is the pre-training loss
    bool diverged = false;
};

// Channel-wise encoder/decoder pair. Operates strictly per timestep row, so
// it can stand in for the state-initialization and readout networks. Once
// frozen it must not change for the rest of the pipeline; freezing is
// enforced by checksum in the training code and its tests.
struct ChannelAutoencoder {
    MlpParams encoder;  // M -> hidden -> d
    MlpParams decoder;  // d -> hidden -> M
    bool frozen = false;

    int input_dim() const { return encoder.in_dim(); }
    int latent_dim() const { return encoder.out_dim(); }

    std::vector<double> encode(std::span<const double> x) const;
    std::vector<double> decode(std::span<const double> h) const;
    Tensor encode_rows(const Tensor& x) const;
    Tensor decode_rows(const Tensor& h) const;

    uint64_t param_checksum() const;
};

// Spline-fills the missing entries of one sample at its own timestamps.
// Returns a [steps, channels] matrix.
Tensor spline_filled_values(const IrregularSeries& series, const ControlPath& path);

// Pretrains the autoencoder on all spline-filled rows of the dataset with an
// observed-entries-only MSE, then freezes it.
ChannelAutoencoder pretrain_autoencoder(const std::vector<IrregularSeries>& dataset,
                                        const AeConfig& config, AeTrainReport* report = nullptr);

}  // namespace diffmn
