#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "diffmn/nn.hpp"

namespace diffmn {

// Self-describing binary checkpoint with named, versioned sections of named
// tensors (raw little-endian float64, so round trips are bit-exact) plus an
// optional JSON metadata string per section.
struct CheckpointSection {
    std::string name;
    std::string meta;
    std::vector<std::pair<std::string, Tensor>> tensors;

    const Tensor* find_tensor(const std::string& tname) const;
};

struct Checkpoint {
    static constexpr uint32_t kVersion = 1;

    uint64_t config_hash = 0;
    uint64_t seed = 0;
    std::vector<CheckpointSection> sections;

    void save(const std::string& path) const;
    static Checkpoint load(const std::string& path);

    const CheckpointSection* find(const std::string& name) const;
    CheckpointSection& add(const std::string& name, const std::string& meta = "");
};

// MLPs round-trip through sections as w0/b0/w1/b1... plus activation metadata.
CheckpointSection mlp_to_section(const std::string& name, const MlpParams& mlp);
MlpParams mlp_from_section(const CheckpointSection& section);

}  // namespace diffmn
