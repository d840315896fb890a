#pragma once

#include <array>
#include <string>
#include <utility>
#include <vector>

#include "diffmn/spline.hpp"
#include "diffmn/synthgen.hpp"

namespace diffmn {

struct MetricConfig {
    int bins = 50;
    double kl_smooth = 1e-6;
    int ds_hidden = 16;
    int ds_epochs = 30;
    int ds_batch = 128;
    double ds_lr = 1e-2;
    int forecast_hidden = 16;
    int forecast_epochs = 40;
    int forecast_batch = 128;
    double forecast_lr = 1e-2;
    double train_frac = 0.8;
};

struct MetricsReport {
    std::vector<std::pair<std::string, double>> values;
    uint64_t seed = 0;
    uint64_t config_hash = 0;

    void set(const std::string& name, double v);
    double get(const std::string& name) const;
    bool has(const std::string& name) const;
};

// Post-hoc real-vs-synthetic classifier (1-layer GRU + linear head) on an
// 80/20 split; DS = |test accuracy - 0.5|, in [0, 0.5].
double discriminative_score(const std::vector<IrregularSeries>& real,
                            const std::vector<IrregularSeries>& synthetic,
                            const MetricConfig& config, uint64_t seed);

// Mean L1 distance between per-(channel, timestep) marginal histograms over
// the pooled value range. In [0, 2].
double mdd(const std::vector<IrregularSeries>& real,
           const std::vector<IrregularSeries>& synthetic, int bins = 50);

// Histogram KL(real || synthetic) over pooled flattened values with additive
// smoothing, renormalized.
double kl_divergence(const std::vector<IrregularSeries>& real,
                     const std::vector<IrregularSeries>& synthetic, int bins = 50,
                     double eps_smooth = 1e-6);

// Nearest-neighbor membership attack: classify train vs holdout membership by
// "distance to nearest synthetic sample below the pooled median". Returns the
// attack accuracy in [0, 1]; 0.5 is chance.
double mir(const std::vector<IrregularSeries>& real_train,
           const std::vector<IrregularSeries>& real_holdout,
           const std::vector<IrregularSeries>& synthetic);

// Train a GRU on the first L-1 steps to predict the last step; returns test
// (MSE, MAE) on a held-out split.
std::pair<double, double> downstream_forecast(const std::vector<IrregularSeries>& dataset,
                                              const MetricConfig& config, uint64_t seed);

struct CubicRecovery {
    // Order: a, b, c, d.
    std::array<double, 4> mean_err;
    std::array<double, 4> std_err;
    std::array<double, 4> w1;      // empirical refit distribution vs reference draws
    std::array<double, 4> w1_rel;  // w1 / sigma (w1 when sigma == 0)
};

// Degree-3 least-squares refit of every generated series on its own grid,
// compared against the generating coefficient distributions.
CubicRecovery cubic_recovery(const std::vector<IrregularSeries>& generated,
                             const CubicSpec& truth, uint64_t seed);

// Exact normal-equations fit of y = a x^3 + b x^2 + c x + d; returns {a,b,c,d}.
std::array<double, 4> polyfit3(const std::vector<double>& x, const std::vector<double>& y);

// First Wasserstein distance between two samples via matched quantiles.
double wasserstein1(std::vector<double> a, std::vector<double> b, int quantiles = 10000);

}  // namespace diffmn
