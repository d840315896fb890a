#pragma once

#include <string>
#include <vector>

#include "diffmn/checkpoint.hpp"
#include "diffmn/config.hpp"
#include "diffmn/diffusion.hpp"
#include "diffmn/moe_ncde.hpp"

namespace diffmn {

// Everything learned by `train`, in dependency order: frozen autoencoder,
// MoE-NCDE dynamics, then the joint diffusion model over (imputed series,
// MoE weights).
struct Pipeline {
    PipelineConfig config;

    ChannelAutoencoder ae;
    MoeNcdeModel model;
    Denoiser denoiser;
    NoiseSchedule schedule;
    std::vector<double> norm_mean, norm_std;  // per-channel stats of the imputed series

    bool has_ae = false;
    bool has_ncde = false;
    bool has_diffusion = false;

    int joint_dim() const;
};

struct SynthResult {
    std::vector<IrregularSeries> dataset;
    std::vector<CubicCoeffs> truth;  // cubic kind only
};

// Pure function of the config: generates the synthetic dataset and applies
// observation dropping.
SynthResult make_dataset(const PipelineConfig& config);

struct StageReports {
    AeTrainReport ae;
    NcdeTrainReport ncde;
    DiffusionTrainReport diffusion;
};

void run_ae_stage(Pipeline& p, const std::vector<IrregularSeries>& dataset, StageReports& reports);
void run_ncde_stage(Pipeline& p, const std::vector<IrregularSeries>& dataset,
                    StageReports& reports);
void run_diffusion_stage(Pipeline& p, const std::vector<IrregularSeries>& dataset,
                         StageReports& reports);
void run_all_stages(Pipeline& p, const std::vector<IrregularSeries>& dataset,
                    StageReports& reports);

struct GeneratedSample {
    IrregularSeries series;
    std::vector<double> weights;
};

// Irregular-to-regular: diffusion samples split into a de-normalized series
// block and a simplex-projected weight block.
std::vector<GeneratedSample> generate_regular(const Pipeline& p, int n, uint64_t seed);

// Irregular-to-continuous: the same diffusion draws pushed through the
// trained dynamics at a refine_factor-times denser grid.
std::vector<GeneratedSample> generate_refined(const Pipeline& p, int n, uint64_t seed,
                                              int refine_factor);

// Query times for a refined grid: refine_factor*(L-1)+1 points over base.
std::vector<double> refined_times(const std::vector<double>& base, int refine_factor);

Checkpoint to_checkpoint(const Pipeline& p);
Pipeline from_checkpoint(const Checkpoint& ck);

std::vector<IrregularSeries> series_of(const std::vector<GeneratedSample>& samples);

}  // namespace diffmn
