#pragma once

#include <span>
#include <string>
#include <utility>
#include <vector>

#include "diffmn/channel_ae.hpp"
#include "diffmn/nn.hpp"
#include "diffmn/spline.hpp"

namespace diffmn {

struct RouterOutput {
    std::vector<double> logits;
    std::vector<double> weights;  // softmax(logits), on the simplex
};

struct LatentTrajectory {
    std::vector<double> times;
    Tensor states;  // [times.size(), latent_dim]
};

struct MoeNcdeConfig {
    int n_experts = 4;
    int expert_hidden = 32;
    int expert_layers = 2;  // linear layers per expert; 8 for the depth-matched single expert
    int router_hidden = 32;
    int grid_len = 24;      // reference grid length, a per-dataset constant
    int substeps = 4;       // RK4 steps per inter-anchor interval
    int epochs = 40;
    double lr = 1e-3;
    int batch_size = 256;
    uint64_t seed = 0;
    bool decoupled = true;  // false trains fresh init/readout nets jointly instead of frozen CE/CD
};

struct NcdeTrainReport {
    std::vector<double> epoch_loss;
    std::vector<std::pair<std::string, std::vector<double>>> weight_table;  // id -> s
    bool aborted = false;
};

// Mixture-of-experts NCDE: N_e matrix-valued expert networks combined by
// softmax routing weights drive dz/dt = f(z) * dX/dt through a fixed-step RK4
// integrator. Init/readout go through the frozen channel-wise autoencoder.
class MoeNcdeModel {
public:
    static MoeNcdeModel init(int data_channels, const ChannelAutoencoder& ae,
                             const MoeNcdeConfig& config);

    // Softmax routing over the sample's spline-filled values on the reference grid.
    RouterOutput route(const IrregularSeries& series) const;
    RouterOutput route(const ControlPath& path) const;

    // Convex combination of expert outputs, reshaped to [d, M+1].
    Tensor moe_dynamics(std::span<const double> z, std::span<const double> s) const;

    // RK4 integration of the controlled dynamics along `path`, recording the
    // latent state at every query time. Query times must be sorted.
    LatentTrajectory cde_solve(std::span<const double> s, const ControlPath& path,
                               std::span<const double> query_times) const;

    // Latent trajectory decoded back to observation space on the reference grid.
    IrregularSeries impute(const IrregularSeries& series) const;

    // Decode at arbitrary query times with externally supplied weights
    // (a training sample's own, or diffusion-generated ones).
    IrregularSeries continuous_generate(std::span<const double> s, const ControlPath& path,
                                        std::span<const double> query_times,
                                        const std::string& id = "gen") const;

    const std::vector<double>& reference_grid() const { return grid_; }
    int data_channels() const { return data_channels_; }
    int latent_dim() const { return latent_dim_; }
    int n_experts() const { return config_.n_experts; }
    const MoeNcdeConfig& config() const { return config_; }
    const ChannelAutoencoder& autoencoder() const { return ae_; }

    std::vector<double> initial_latent(const ControlPath& path, double t0) const;
    std::vector<double> readout(std::span<const double> z) const;

    // Trainable parameters (experts + router, plus init/readout when not
    // decoupled). The frozen autoencoder is never part of this list.
    std::vector<ParamRef> trainable_params();

    std::vector<MlpParams> experts;
    MlpParams router;
    MlpParams init_net, readout_net;  // used only when !config().decoupled

private:
    friend NcdeTrainReport train_moe_ncde(MoeNcdeModel&, const std::vector<IrregularSeries>&,
                                          const MoeNcdeConfig&);
    MoeNcdeModel() = default;

    ChannelAutoencoder ae_;
    MoeNcdeConfig config_;
    std::vector<double> grid_;
    int data_channels_ = 0;
    int latent_dim_ = 0;
};

// Integration mesh shared by the solver and its taped twin: each interval
// between consecutive anchors (first query, interior path knots, last query)
// is split into `substeps` RK4 steps; query times not already on the mesh are
// snapped in within 1e-12 or inserted.
struct SolveMesh {
    std::vector<double> nodes;
    std::vector<int> query_index;  // position of each query time in nodes

    static SolveMesh build(const ControlPath& path, std::span<const double> query_times,
                           int substeps);
};

void check_simplex(std::span<const double> s, double tol = 1e-6);

// Decoupled optimization: only experts and router receive updates; the frozen
// autoencoder's checksum is asserted unchanged. Returns the final per-sample
// MoE weights, which become the diffusion targets.
NcdeTrainReport train_moe_ncde(MoeNcdeModel& model, const std::vector<IrregularSeries>& dataset,
                               const MoeNcdeConfig& config);

}  // namespace diffmn
