#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "diffmn/channel_ae.hpp"
#include "diffmn/diffusion.hpp"
#include "diffmn/metrics.hpp"
#include "diffmn/moe_ncde.hpp"
#include "diffmn/synthgen.hpp"

namespace diffmn {

struct DatasetSpec {
    std::string kind = "sines";  // sines | cubic | sawtooth | piecewise | sine-mix | mixed
    int n = 200;
    int grid_len = 24;
    int channels = 2;  // sines only; single-channel kinds ignore it
    double drop_rate = 0.3;
    bool entry_wise_drop = false;
};

// Fully resolved run configuration. Every field has a default; the resolved
// JSON is written beside every output and its hash is embedded in artifacts.
struct PipelineConfig {
    DatasetSpec dataset;
    uint64_t seed = 7;
    AeConfig ae;
    MoeNcdeConfig ncde;
    DiffusionConfig diffusion;
    double weight_scale = 1.0;  // weight block scaling inside the joint vector
    MetricConfig metrics;
    CubicSpec cubic;
    SineSpec sine;

    static PipelineConfig from_json(const nlohmann::json& overrides);
    static PipelineConfig load(const std::string& path);
    nlohmann::json to_json() const;
    void save(const std::string& path) const;
    uint64_t hash() const;

    // no-moe: one expert with the total depth matched to the expert pool;
    // no-decoupled: init/readout networks trained jointly, frozen CE/CD unused.
    void apply_ablation(const std::string& flag);
};

}  // namespace diffmn
