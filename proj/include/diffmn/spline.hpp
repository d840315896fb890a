#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "diffmn/errors.hpp"

namespace diffmn {

// One irregularly observed multivariate sample. `times` is the sample's
// nominal grid in [0, 1]; `mask` marks which (timestep, channel) entries were
// actually observed. Values at masked-out entries are never read by the
// pipeline (they are kept only as held-out ground truth for evaluation).
struct IrregularSeries {
    std::string id;
    std::vector<double> times;    // strictly increasing
    int channels = 0;             // M
    std::vector<double> values;   // steps x channels, row-major
    std::vector<uint8_t> mask;    // steps x channels, 1 = observed

    int steps() const { return static_cast<int>(times.size()); }
    double value_at(int t, int ch) const { return values[static_cast<size_t>(t) * channels + ch]; }
    double& value_at(int t, int ch) { return values[static_cast<size_t>(t) * channels + ch]; }
    bool observed(int t, int ch) const { return mask[static_cast<size_t>(t) * channels + ch] != 0; }
    int observed_count() const;
    void validate() const;
};

// Natural cubic spline through one channel's observed points. A channel with
// a single observation degrades to a constant path with zero derivative.
class ChannelSpline {
public:
    static ChannelSpline fit(std::vector<double> knots, std::vector<double> values);

    double eval(double t) const;
    double deriv(double t) const;

    const std::vector<double>& knots() const { return knots_; }
    // Polynomial coefficients on [knots[i], knots[i+1]]: value(t) =
    // a + b*dt + c*dt^2 + d*dt^3 with dt = t - knots[i].
    struct Coeffs { double a, b, c, d; };
    const std::vector<Coeffs>& coeffs() const { return coeffs_; }

private:
    int segment_of(double t) const;

    std::vector<double> knots_;
    std::vector<Coeffs> coeffs_;  // knots-1 segments (empty for constant path)
    double const_value_ = 0.0;
};

// The continuous control path X: per-channel natural cubic splines over the
// observed points plus an appended identity time channel, so eval() returns
// an (M+1)-vector whose last component is t itself.
class ControlPath {
public:
    static ControlPath fit(const IrregularSeries& series);

    int data_channels() const { return static_cast<int>(channels_.size()); }
    int channels() const { return data_channels() + 1; }

    // Evaluation outside [first knot, last knot] extends linearly with the
    // boundary slope; NaN times are rejected.
    void eval(double t, double* out) const;   // out size channels()
    void deriv(double t, double* out) const;  // last component is always 1
    std::vector<double> eval(double t) const;
    std::vector<double> deriv(double t) const;
    double eval_channel(int ch, double t) const { return channels_[ch].eval(t); }

    const ChannelSpline& channel(int ch) const { return channels_[ch]; }
    // Sorted unique union of all channels' knot times.
    const std::vector<double>& knot_union() const { return knot_union_; }
    double t_min() const { return knot_union_.front(); }
    double t_max() const { return knot_union_.back(); }

private:
    std::vector<ChannelSpline> channels_;
    std::vector<double> knot_union_;
};

ControlPath fit_control_path(const IrregularSeries& series);

}  // namespace diffmn
