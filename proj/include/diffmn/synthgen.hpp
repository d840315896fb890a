#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "diffmn/spline.hpp"

namespace diffmn {

// Cubic polynomial family y = a*x^3 + b*x^2 + c*x + d with per-coefficient
// normal distributions, evaluated on a uniform grid over [-1, 1].
struct CubicSpec {
    double mu_a = 1.0, sigma_a = 0.3;
    double mu_b = -0.5, sigma_b = 0.3;
    double mu_c = 0.5, sigma_c = 0.2;
    double mu_d = 0.0, sigma_d = 0.2;
    int grid_len = 24;

    void validate() const;
};

struct CubicCoeffs {
    std::string id;
    double a, b, c, d;
};

struct SineSpec {
    int channels = 2;
    int grid_len = 24;
    double freq_lo = 1.0, freq_hi = 3.0;  // cycles over the unit interval
    double phase_lo = 0.0, phase_hi = 2.0 * M_PI;

    void validate() const;
};

enum class SignalKind { Sawtooth, Piecewise, SineMix };

SignalKind signal_kind_from(const std::string& name);

// All generators are pure functions of (spec, n, seed) and emit fully
// observed series on a uniform grid over [0, 1].
std::vector<IrregularSeries> gen_sines(const SineSpec& spec, int n, uint64_t seed);

struct CubicDataset {
    std::vector<IrregularSeries> series;
    std::vector<CubicCoeffs> truth;
};
CubicDataset gen_cubic(const CubicSpec& spec, int n, uint64_t seed);

std::vector<IrregularSeries> gen_signals(SignalKind kind, int n, int grid_len, uint64_t seed);

// Maps a time in [0, 1] onto the cubic family's x domain [-1, 1].
inline double cubic_x_of_time(double t) { return 2.0 * t - 1.0; }

// Masks floor(rate * steps) whole timesteps, uniformly without replacement.
// With entry_wise set, entries are masked independently instead. The mask is
// re-drawn (up to 10 times) if any channel would keep fewer than 2 points.
IrregularSeries drop_observations(const IrregularSeries& series, double rate, uint64_t seed,
                                  bool entry_wise = false);

std::vector<IrregularSeries> drop_observations(const std::vector<IrregularSeries>& dataset,
                                               double rate, uint64_t seed, bool entry_wise = false);

}  // namespace diffmn
