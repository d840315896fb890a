#include "diffmn/spline.hpp"

#include <algorithm>
#include <cmath>

namespace diffmn {

int IrregularSeries::observed_count() const {
    int n = 0;
    for (uint8_t m : mask) n += m != 0;
    return n;
}

void IrregularSeries::validate() const {
    const size_t n = times.size() * static_cast<size_t>(channels);
    if (values.size() != n || mask.size() != n)
        throw ShapeError("series " + id + ": values/mask sizes do not match steps x channels");
    for (size_t i = 1; i < times.size(); ++i)
        if (!(times[i] > times[i - 1]))
            throw ContractError("series " + id + ": times must be strictly increasing");
    for (int t = 0; t < steps(); ++t)
        for (int c = 0; c < channels; ++c)
            if (observed(t, c) && !std::isfinite(value_at(t, c)))
                throw ContractError("series " + id + ": non-finite observed value");
}

ChannelSpline ChannelSpline::fit(std::vector<double> knots, std::vector<double> values) {
    ChannelSpline s;
    s.knots_ = std::move(knots);
    const auto& t = s.knots_;
    const auto& y = values;
    const int n = static_cast<int>(t.size());
    if (n == 0) throw ContractError("ChannelSpline: no knots");
    if (n == 1) {
        s.const_value_ = y[0];
        return s;
    }
    if (n == 2) {
        const double b = (y[1] - y[0]) / (t[1] - t[0]);
        s.coeffs_.push_back({y[0], b, 0.0, 0.0});
        return s;
    }

    // Second derivatives M_i from the natural-boundary tridiagonal system,
    // solved with the Thomas algorithm. M_0 = M_{n-1} = 0.
    std::vector<double> h(n - 1);
    for (int i = 0; i < n - 1; ++i) h[i] = t[i + 1] - t[i];

    const int m = n - 2;  // interior unknowns
    std::vector<double> diag(m), upper(m), rhs(m);
    for (int i = 0; i < m; ++i) {
        diag[i] = 2.0 * (h[i] + h[i + 1]);
        upper[i] = h[i + 1];
        rhs[i] = 6.0 * ((y[i + 2] - y[i + 1]) / h[i + 1] - (y[i + 1] - y[i]) / h[i]);
    }
    for (int i = 1; i < m; ++i) {
        const double w = h[i] / diag[i - 1];
        diag[i] -= w * upper[i - 1];
        rhs[i] -= w * rhs[i - 1];
    }
    std::vector<double> M(n, 0.0);
    M[m] = rhs[m - 1] / diag[m - 1];
    for (int i = m - 2; i >= 0; --i) M[i + 1] = (rhs[i] - upper[i] * M[i + 2]) / diag[i];

    s.coeffs_.resize(n - 1);
    for (int i = 0; i < n - 1; ++i) {
        const double hi = h[i];
        s.coeffs_[i].a = y[i];
        s.coeffs_[i].b = (y[i + 1] - y[i]) / hi - hi * (2.0 * M[i] + M[i + 1]) / 6.0;
        s.coeffs_[i].c = M[i] / 2.0;
        s.coeffs_[i].d = (M[i + 1] - M[i]) / (6.0 * hi);
    }
    return s;
}

int ChannelSpline::segment_of(double t) const {
    // Rightmost segment whose start is <= t, clamped to valid segments.
    const auto it = std::upper_bound(knots_.begin(), knots_.end(), t);
    int i = static_cast<int>(it - knots_.begin()) - 1;
    i = std::clamp(i, 0, static_cast<int>(coeffs_.size()) - 1);
    return i;
}

double ChannelSpline::eval(double t) const {
    if (std::isnan(t)) throw ContractError("spline eval: time is NaN");
    if (coeffs_.empty()) return const_value_;
    if (t <= knots_.front()) {
        const auto& c = coeffs_.front();
        return c.a + c.b * (t - knots_.front());  // linear extension, boundary slope
    }
    if (t >= knots_.back()) {
        const auto& c = coeffs_.back();
        const double h = knots_[knots_.size() - 1] - knots_[knots_.size() - 2];
        const double end_val = c.a + h * (c.b + h * (c.c + h * c.d));
        const double end_slope = c.b + h * (2.0 * c.c + 3.0 * h * c.d);
        return end_val + end_slope * (t - knots_.back());
    }
    const int i = segment_of(t);
    const double dt = t - knots_[i];
    const auto& c = coeffs_[i];
    return c.a + dt * (c.b + dt * (c.c + dt * c.d));
}

double ChannelSpline::deriv(double t) const {
    if (std::isnan(t)) throw ContractError("spline deriv: time is NaN");
    if (coeffs_.empty()) return 0.0;
    if (t <= knots_.front()) return coeffs_.front().b;
    if (t >= knots_.back()) {
        const auto& c = coeffs_.back();
        const double h = knots_[knots_.size() - 1] - knots_[knots_.size() - 2];
        return c.b + h * (2.0 * c.c + 3.0 * h * c.d);
    }
    const int i = segment_of(t);
    const double dt = t - knots_[i];
    const auto& c = coeffs_[i];
    return c.b + dt * (2.0 * c.c + 3.0 * dt * c.d);
}

ControlPath ControlPath::fit(const IrregularSeries& series) {
    series.validate();
    ControlPath path;
    path.channels_.reserve(series.channels);
    for (int ch = 0; ch < series.channels; ++ch) {
        std::vector<double> kt, kv;
        for (int t = 0; t < series.steps(); ++t) {
            if (series.observed(t, ch)) {
                kt.push_back(series.times[t]);
                kv.push_back(series.value_at(t, ch));
            }
        }
        if (kt.empty())
            throw UnfitChannelError(
                "series " + series.id + ": channel " + std::to_string(ch) + " has no observed points",
                ch);
        path.channels_.push_back(ChannelSpline::fit(std::move(kt), std::move(kv)));
    }
    for (const auto& ch : path.channels_)
        path.knot_union_.insert(path.knot_union_.end(), ch.knots().begin(), ch.knots().end());
    std::sort(path.knot_union_.begin(), path.knot_union_.end());
    path.knot_union_.erase(std::unique(path.knot_union_.begin(), path.knot_union_.end()),
                           path.knot_union_.end());
    return path;
}

void ControlPath::eval(double t, double* out) const {
    for (size_t ch = 0; ch < channels_.size(); ++ch) out[ch] = channels_[ch].eval(t);
    out[channels_.size()] = t;  // identity time channel
}

void ControlPath::deriv(double t, double* out) const {
    for (size_t ch = 0; ch < channels_.size(); ++ch) out[ch] = channels_[ch].deriv(t);
    out[channels_.size()] = 1.0;
}

std::vector<double> ControlPath::eval(double t) const {
    std::vector<double> out(channels());
    eval(t, out.data());
    return out;
}

std::vector<double> ControlPath::deriv(double t) const {
    std::vector<double> out(channels());
    deriv(t, out.data());
    return out;
}

ControlPath fit_control_path(const IrregularSeries& series) { return ControlPath::fit(series); }

}  // namespace diffmn
