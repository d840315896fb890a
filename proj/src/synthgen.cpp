#include "diffmn/synthgen.hpp"

#include <algorithm>
#include <cmath>

#include "diffmn/rng.hpp"

namespace diffmn {

namespace {

std::vector<double> uniform_grid(int len) {
    std::vector<double> t(len);
    for (int i = 0; i < len; ++i) t[i] = len == 1 ? 0.0 : static_cast<double>(i) / (len - 1);
    return t;
}

IrregularSeries blank_series(const std::string& id, int grid_len, int channels) {
    IrregularSeries s;
    s.id = id;
    s.times = uniform_grid(grid_len);
    s.channels = channels;
    s.values.assign(static_cast<size_t>(grid_len) * channels, 0.0);
    s.mask.assign(s.values.size(), 1);
    return s;
}

}  // namespace

void CubicSpec::validate() const {
    if (sigma_a < 0 || sigma_b < 0 || sigma_c < 0 || sigma_d < 0)
        throw ContractError("CubicSpec: negative sigma");
    if (grid_len < 4) throw ContractError("CubicSpec: grid must have at least 4 points for a cubic");
}

void SineSpec::validate() const {
    if (channels < 1) throw ContractError("SineSpec: channels must be positive");
    if (!(freq_lo > 0.0) || freq_hi < freq_lo) throw ContractError("SineSpec: empty frequency range");
    if (phase_hi < phase_lo) throw ContractError("SineSpec: empty phase range");
}

SignalKind signal_kind_from(const std::string& name) {
    if (name == "sawtooth") return SignalKind::Sawtooth;
    if (name == "piecewise") return SignalKind::Piecewise;
    if (name == "sine-mix") return SignalKind::SineMix;
    throw ContractError("unknown signal kind: " + name);
}

std::vector<IrregularSeries> gen_sines(const SineSpec& spec, int n, uint64_t seed) {
    spec.validate();
    if (n <= 0) throw ContractError("gen_sines: n must be positive");
    std::vector<IrregularSeries> out;
    out.reserve(n);
    for (int j = 0; j < n; ++j) {
        Rng rng = Rng(seed).fork(j);
        IrregularSeries s = blank_series("sine_" + std::to_string(j), spec.grid_len, spec.channels);
        for (int ch = 0; ch < spec.channels; ++ch) {
            const double f = rng.uniform(spec.freq_lo, spec.freq_hi);
            const double phi = rng.uniform(spec.phase_lo, spec.phase_hi);
            for (int t = 0; t < spec.grid_len; ++t)
                s.value_at(t, ch) = std::sin(2.0 * M_PI * f * s.times[t] + phi);
        }
        out.push_back(std::move(s));
    }
    return out;
}

CubicDataset gen_cubic(const CubicSpec& spec, int n, uint64_t seed) {
    spec.validate();
    if (n <= 0) throw ContractError("gen_cubic: n must be positive");
    CubicDataset ds;
    ds.series.reserve(n);
    ds.truth.reserve(n);
    for (int j = 0; j < n; ++j) {
        Rng rng = Rng(seed).fork(j);
        CubicCoeffs c;
        c.id = "cubic_" + std::to_string(j);
        c.a = rng.normal(spec.mu_a, spec.sigma_a);
        c.b = rng.normal(spec.mu_b, spec.sigma_b);
        c.c = rng.normal(spec.mu_c, spec.sigma_c);
        c.d = rng.normal(spec.mu_d, spec.sigma_d);
        IrregularSeries s = blank_series(c.id, spec.grid_len, 1);
        for (int t = 0; t < spec.grid_len; ++t) {
            const double x = cubic_x_of_time(s.times[t]);
            s.value_at(t, 0) = ((c.a * x + c.b) * x + c.c) * x + c.d;
        }
        ds.series.push_back(std::move(s));
        ds.truth.push_back(std::move(c));
    }
    return ds;
}

std::vector<IrregularSeries> gen_signals(SignalKind kind, int n, int grid_len, uint64_t seed) {
    if (n <= 0) throw ContractError("gen_signals: n must be positive");
    std::vector<IrregularSeries> out;
    out.reserve(n);
    for (int j = 0; j < n; ++j) {
        Rng rng = Rng(seed).fork(j);
        IrregularSeries s = blank_series("sig_" + std::to_string(j), grid_len, 1);
        switch (kind) {
            case SignalKind::Sawtooth: {
                const double period = rng.uniform(0.3, 0.8);
                const double t0 = rng.uniform(0.0, period);
                for (int t = 0; t < grid_len; ++t) {
                    const double phase = (s.times[t] - t0) / period;
                    s.value_at(t, 0) = 2.0 * (phase - std::floor(phase)) - 1.0;
                }
                s.id = "sawtooth_" + std::to_string(j);
                break;
            }
            case SignalKind::Piecewise: {
                const int segments = 1 + rng.uniform_int(4);
                std::vector<double> edges = {0.0};
                for (int k = 1; k < segments; ++k) edges.push_back(rng.uniform(0.05, 0.95));
                edges.push_back(1.0 + 1e-9);
                std::sort(edges.begin(), edges.end());
                std::vector<double> levels(segments);
                for (auto& l : levels) l = rng.uniform(-1.0, 1.0);
                for (int t = 0; t < grid_len; ++t) {
                    int seg = 0;
                    while (seg + 1 < segments && s.times[t] >= edges[seg + 1]) ++seg;
                    s.value_at(t, 0) = levels[seg];
                }
                s.id = "piecewise_" + std::to_string(j);
                break;
            }
            case SignalKind::SineMix: {
                const double f1 = rng.uniform(1.0, 2.0);
                const double f2 = rng.uniform(2.0, 4.0);
                const double p1 = rng.uniform(0.0, 2.0 * M_PI);
                const double p2 = rng.uniform(0.0, 2.0 * M_PI);
                for (int t = 0; t < grid_len; ++t)
                    s.value_at(t, 0) = 0.5 * std::sin(2.0 * M_PI * f1 * s.times[t] + p1) +
                                       0.5 * std::sin(2.0 * M_PI * f2 * s.times[t] + p2);
                s.id = "sinemix_" + std::to_string(j);
                break;
            }
        }
        out.push_back(std::move(s));
    }
    return out;
}

IrregularSeries drop_observations(const IrregularSeries& series, double rate, uint64_t seed,
                                  bool entry_wise) {
    if (rate < 0.0 || rate >= 1.0) throw ContractError("drop rate must be in [0, 1)");
    IrregularSeries out = series;
    if (rate == 0.0) return out;

    const int steps = series.steps();
    const int drop = static_cast<int>(std::floor(rate * steps));
    for (int attempt = 0; attempt < 10; ++attempt) {
        Rng rng = Rng(seed).fork(0xD509 + attempt);
        out.mask = series.mask;
        if (entry_wise) {
            // Independent per-entry dropping with the same expected count.
            for (size_t i = 0; i < out.mask.size(); ++i)
                if (out.mask[i] && rng.uniform() < rate) out.mask[i] = 0;
        } else {
            std::vector<int> idx(steps);
            for (int i = 0; i < steps; ++i) idx[i] = i;
            rng.shuffle(idx);
            for (int k = 0; k < drop; ++k)
                for (int ch = 0; ch < series.channels; ++ch)
                    out.mask[static_cast<size_t>(idx[k]) * series.channels + ch] = 0;
        }
        bool ok = true;
        for (int ch = 0; ch < series.channels && ok; ++ch) {
            int observed = 0;
            for (int t = 0; t < steps; ++t) observed += out.observed(t, ch);
            ok = observed >= 2;
        }
        if (ok) return out;
    }
    throw ContractError("drop_observations: cannot keep >=2 observed points per channel at rate " +
                        std::to_string(rate));
}

std::vector<IrregularSeries> drop_observations(const std::vector<IrregularSeries>& dataset,
                                               double rate, uint64_t seed, bool entry_wise) {
    std::vector<IrregularSeries> out;
    out.reserve(dataset.size());
    for (size_t j = 0; j < dataset.size(); ++j)
        out.push_back(drop_observations(dataset[j], rate, Rng::mix(seed, j), entry_wise));
    return out;
}

}  // namespace diffmn
