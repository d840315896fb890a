#pragma once

#include <string>
#include <vector>

#include "diffmn/rng.hpp"
#include "diffmn/tensor.hpp"

namespace diffmn {

enum class Activation { Identity, Tanh, Relu, Sigmoid };

// Fully connected stack: x -> x*W0 + b0 -> act0 -> ... Weights are [in, out].
struct MlpParams {
    struct Layer {
        Tensor weight;  // [in, out]
        Tensor bias;    // [1, out]
        Activation act = Activation::Identity;
    };
    std::vector<Layer> layers;

    int in_dim() const { return layers.empty() ? 0 : layers.front().weight.rows(); }
    int out_dim() const { return layers.empty() ? 0 : layers.back().weight.cols(); }
};

// Xavier-uniform initialized MLP; hidden layers use `hidden_act`, the output
// layer is linear.
MlpParams make_mlp(const std::vector<int>& dims, Activation hidden_act, Rng& rng);

// Forward pass recorded on the tape; input is [B, in_dim].
NodeId mlp_forward(const MlpParams& params, NodeId input, Tape& tape);
Tensor mlp_forward(const MlpParams& params, const Tensor& input, Tape& tape);

// Plain forward pass with no tape, for inference paths.
Tensor mlp_eval(const MlpParams& params, const Tensor& input);
void mlp_eval_row(const MlpParams& params, const double* in, double* out,
                  std::vector<double>& scratch);

// Stages an MLP's parameters on a tape once so several forward calls share the
// leaves; gradients are read back per layer after backward().
struct TapedMlp {
    const MlpParams* params = nullptr;
    std::vector<NodeId> weights, biases;

    void stage(Tape& tape, const MlpParams& p);
    NodeId forward(Tape& tape, NodeId input) const;
};

// Standard GRU cell. Weights W* are [in, hidden], U* are [hidden, hidden].
struct GruParams {
    Tensor Wz, Uz, bz;
    Tensor Wr, Ur, br;
    Tensor Wh, Uh, bh;

    int input_dim() const { return Wz.rows(); }
    int hidden_dim() const { return Wz.cols(); }
};

GruParams make_gru(int input_dim, int hidden_dim, Rng& rng);

// One recurrence step: update gate, reset gate, candidate state.
Tensor gru_cell(const GruParams& params, const Tensor& hidden, const Tensor& input);

struct TapedGru {
    const GruParams* params = nullptr;
    NodeId Wz, Uz, bz, Wr, Ur, br, Wh, Uh, bh;

    void stage(Tape& tape, const GruParams& p);
    NodeId step(Tape& tape, NodeId hidden, NodeId input) const;
};

// Named view over a module's trainable tensors, shared by the optimizer,
// checkpointing and checksums.
struct ParamRef {
    std::string name;
    Tensor* tensor;
};

std::vector<ParamRef> mlp_params(MlpParams& p, const std::string& prefix);
std::vector<ParamRef> gru_params(GruParams& p, const std::string& prefix);
uint64_t params_checksum(const std::vector<ParamRef>& params);

struct AdamState {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    long step = 0;
    std::vector<std::vector<double>> m, v;

    static AdamState init(const std::vector<ParamRef>& params, double lr);
};

// Bias-corrected Adam update. Gradients are aligned with `params`; a NaN
// gradient aborts with the offending parameter's name.
void adam_step(AdamState& state, const std::vector<ParamRef>& params,
               const std::vector<std::vector<double>>& grads);

// Gradient accumulator aligned with a ParamRef list.
struct GradBuffer {
    std::vector<std::vector<double>> grads;

    explicit GradBuffer(const std::vector<ParamRef>& params);
    void zero();
    void accumulate(size_t i, std::span<const double> g, double scale = 1.0);
    void scale_all(double s);
};

}  // namespace diffmn
