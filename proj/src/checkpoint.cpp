#include "diffmn/checkpoint.hpp"

#include <cstring>
#include <fstream>

#include <json.hpp>

namespace diffmn {

namespace {

constexpr char kMagic[8] = {'D', 'M', 'N', 'C', 'K', 'P', 'T', '1'};

void put_u32(std::ostream& out, uint32_t v) { out.write(reinterpret_cast<const char*>(&v), 4); }
void put_u64(std::ostream& out, uint64_t v) { out.write(reinterpret_cast<const char*>(&v), 8); }

void put_string(std::ostream& out, const std::string& s) {
    put_u32(out, static_cast<uint32_t>(s.size()));
    out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

uint32_t get_u32(std::istream& in) {
    uint32_t v = 0;
    in.read(reinterpret_cast<char*>(&v), 4);
    return v;
}

uint64_t get_u64(std::istream& in) {
    uint64_t v = 0;
    in.read(reinterpret_cast<char*>(&v), 8);
    return v;
}

std::string get_string(std::istream& in) {
    const uint32_t n = get_u32(in);
    std::string s(n, '\0');
    in.read(s.data(), n);
    return s;
}

Activation activation_from(const std::string& name) {
    if (name == "identity") return Activation::Identity;
    if (name == "tanh") return Activation::Tanh;
    if (name == "relu") return Activation::Relu;
    if (name == "sigmoid") return Activation::Sigmoid;
    throw IoError("unknown activation in checkpoint: " + name);
}

std::string activation_name(Activation a) {
    switch (a) {
        case Activation::Identity: return "identity";
        case Activation::Tanh: return "tanh";
        case Activation::Relu: return "relu";
        case Activation::Sigmoid: return "sigmoid";
    }
    return "identity";
}

}  // namespace

const Tensor* CheckpointSection::find_tensor(const std::string& tname) const {
    for (const auto& [n, t] : tensors)
        if (n == tname) return &t;
    return nullptr;
}

const CheckpointSection* Checkpoint::find(const std::string& name) const {
    for (const auto& s : sections)
        if (s.name == name) return &s;
    return nullptr;
}

CheckpointSection& Checkpoint::add(const std::string& name, const std::string& meta) {
    for (auto& s : sections)
        if (s.name == name) {
            s.meta = meta;
            s.tensors.clear();
            return s;
        }
    sections.push_back({name, meta, {}});
    return sections.back();
}

void Checkpoint::save(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open " + path + " for writing");
    out.write(kMagic, 8);
    put_u32(out, kVersion);
    put_u64(out, config_hash);
    put_u64(out, seed);
    put_u32(out, static_cast<uint32_t>(sections.size()));
    for (const auto& sec : sections) {
        put_string(out, sec.name);
        put_string(out, sec.meta);
        put_u32(out, static_cast<uint32_t>(sec.tensors.size()));
        for (const auto& [name, t] : sec.tensors) {
            put_string(out, name);
            put_u32(out, static_cast<uint32_t>(t.shape.size()));
            for (int d : t.shape) put_u32(out, static_cast<uint32_t>(d));
            out.write(reinterpret_cast<const char*>(t.data.data()),
                      static_cast<std::streamsize>(t.data.size() * sizeof(double)));
        }
    }
    if (!out) throw IoError("failed writing " + path);
}

Checkpoint Checkpoint::load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path);
    char magic[8];
    in.read(magic, 8);
    if (!in || std::memcmp(magic, kMagic, 8) != 0)
        throw IoError(path + ": not a checkpoint file");
    const uint32_t version = get_u32(in);
    if (version != kVersion)
        throw IoError(path + ": checkpoint version " + std::to_string(version) +
                      " != " + std::to_string(kVersion));
    Checkpoint ck;
    ck.config_hash = get_u64(in);
    ck.seed = get_u64(in);
    const uint32_t n_sections = get_u32(in);
    for (uint32_t i = 0; i < n_sections; ++i) {
        CheckpointSection sec;
        sec.name = get_string(in);
        sec.meta = get_string(in);
        const uint32_t n_tensors = get_u32(in);
        for (uint32_t j = 0; j < n_tensors; ++j) {
            std::string tname = get_string(in);
            const uint32_t ndim = get_u32(in);
            std::vector<int> shape(ndim);
            size_t total = 1;
            for (uint32_t k = 0; k < ndim; ++k) {
                shape[k] = static_cast<int>(get_u32(in));
                total *= static_cast<size_t>(shape[k]);
            }
            Tensor t;
            t.shape = std::move(shape);
            t.data.resize(total);
            in.read(reinterpret_cast<char*>(t.data.data()),
                    static_cast<std::streamsize>(total * sizeof(double)));
            sec.tensors.emplace_back(std::move(tname), std::move(t));
        }
        if (!in) throw IoError(path + ": truncated checkpoint");
        ck.sections.push_back(std::move(sec));
    }
    return ck;
}

CheckpointSection mlp_to_section(const std::string& name, const MlpParams& mlp) {
    CheckpointSection sec;
    sec.name = name;
    nlohmann::json meta;
    meta["activations"] = nlohmann::json::array();
    for (size_t i = 0; i < mlp.layers.size(); ++i) {
        meta["activations"].push_back(activation_name(mlp.layers[i].act));
        sec.tensors.emplace_back("w" + std::to_string(i), mlp.layers[i].weight);
        sec.tensors.emplace_back("b" + std::to_string(i), mlp.layers[i].bias);
    }
    sec.meta = meta.dump();
    return sec;
}

MlpParams mlp_from_section(const CheckpointSection& section) {
    MlpParams mlp;
    auto meta = nlohmann::json::parse(section.meta);
    const auto& acts = meta.at("activations");
    for (size_t i = 0; i < acts.size(); ++i) {
        const Tensor* w = section.find_tensor("w" + std::to_string(i));
        const Tensor* b = section.find_tensor("b" + std::to_string(i));
        if (!w || !b) throw IoError("section " + section.name + ": missing layer " + std::to_string(i));
        MlpParams::Layer layer;
        layer.weight = *w;
        layer.bias = *b;
        layer.act = activation_from(acts[i].get<std::string>());
        mlp.layers.push_back(std::move(layer));
    }
    return mlp;
}

}  // namespace diffmn
