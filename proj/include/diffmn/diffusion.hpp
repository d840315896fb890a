#pragma once

#include <span>
#include <vector>

#include "diffmn/nn.hpp"
#include "diffmn/rng.hpp"

namespace diffmn {

// Linear-ramp DDPM noise schedule. alpha_bar is indexed so that
// alpha_bar[0] = 1 and alpha_bar[t] = prod_{i<=t} (1 - beta_i) for t in [1, T_d].
struct NoiseSchedule {
    int T_d = 0;
    std::vector<double> beta;       // [T_d], beta[t-1] belongs to step t
    std::vector<double> alpha;      // 1 - beta
    std::vector<double> alpha_bar;  // [T_d + 1], alpha_bar[0] = 1

    double beta_at(int t) const { return beta[t - 1]; }
    double alpha_at(int t) const { return alpha[t - 1]; }
    double alpha_bar_at(int t) const { return alpha_bar[t]; }
};

NoiseSchedule make_schedule(int T_d, double beta_start, double beta_end);

// Closed-form forward corruption x_t = sqrt(ab_t) x0 + sqrt(1 - ab_t) eps.
std::vector<double> q_sample(const NoiseSchedule& schedule, std::span<const double> x0, int t,
                             std::span<const double> eps);

// Epsilon-prediction network over (x_t, sinusoidal embedding of t).
struct Denoiser {
    MlpParams net;
    int dim = 0;           // D_joint
    int time_emb_dim = 16;

    std::vector<double> predict(std::span<const double> x_t, int t, int T_d) const;
};

void time_embedding(int t, int T_d, int emb_dim, double* out);

struct DiffusionConfig {
    int T_d = 200;
    double beta_start = 1e-4;
    double beta_end = 0.05;
    int hidden = 128;
    int time_emb_dim = 16;
    int epochs = 200;       // desk-scale stand-in for the full-scale 600-epoch run
    int batch_size = 256;
    double lr = 1e-3;       // full-scale setup uses 1e-4; small nets tolerate more
    uint64_t seed = 0;
};

struct DiffusionTrainReport {
    std::vector<double> epoch_loss;
    bool diverged = false;
};

// Standard epsilon-matching training on rows of `samples` ([n, D_joint]).
Denoiser train_diffusion(const Tensor& samples, const NoiseSchedule& schedule,
                         const DiffusionConfig& config, DiffusionTrainReport* report = nullptr);

// Ancestral DDPM sampling from x_T ~ N(0, I); returns [n, D_joint]. A
// non-finite chain is resampled once before failing.
Tensor sample_diffusion(const Denoiser& denoiser, const NoiseSchedule& schedule, int n, Rng& rng);

// Clamp-to-nonnegative then renormalize; falls back to uniform when the mass
// is below 1e-8. Applied to generated weight blocks.
void project_to_simplex(std::span<double> w);

}  // namespace diffmn
