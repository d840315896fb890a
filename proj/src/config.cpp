#include "diffmn/config.hpp"

#include <fstream>

#include "diffmn/tensor.hpp"

namespace diffmn {

using nlohmann::json;

namespace {

template <typename T>
void maybe(const json& j, const char* key, T& field) {
    if (j.contains(key)) field = j.at(key).get<T>();
}

}  // namespace

PipelineConfig PipelineConfig::from_json(const json& j) {
    PipelineConfig c;
    if (j.contains("dataset")) {
        const auto& d = j.at("dataset");
        maybe(d, "kind", c.dataset.kind);
        maybe(d, "n", c.dataset.n);
        maybe(d, "grid_len", c.dataset.grid_len);
        maybe(d, "channels", c.dataset.channels);
        maybe(d, "drop_rate", c.dataset.drop_rate);
        maybe(d, "entry_wise_drop", c.dataset.entry_wise_drop);
    }
    maybe(j, "seed", c.seed);
    maybe(j, "weight_scale", c.weight_scale);
    if (j.contains("ae")) {
        const auto& a = j.at("ae");
        maybe(a, "latent_dim", c.ae.latent_dim);
        maybe(a, "hidden", c.ae.hidden);
        maybe(a, "epochs", c.ae.epochs);
        maybe(a, "batch_size", c.ae.batch_size);
        maybe(a, "lr", c.ae.lr);
    }
    if (j.contains("ncde")) {
        const auto& m = j.at("ncde");
        maybe(m, "n_experts", c.ncde.n_experts);
        maybe(m, "expert_hidden", c.ncde.expert_hidden);
        maybe(m, "expert_layers", c.ncde.expert_layers);
        maybe(m, "router_hidden", c.ncde.router_hidden);
        maybe(m, "substeps", c.ncde.substeps);
        maybe(m, "epochs", c.ncde.epochs);
        maybe(m, "lr", c.ncde.lr);
        maybe(m, "batch_size", c.ncde.batch_size);
        maybe(m, "decoupled", c.ncde.decoupled);
    }
    if (j.contains("diffusion")) {
        const auto& d = j.at("diffusion");
        maybe(d, "T_d", c.diffusion.T_d);
        maybe(d, "beta_start", c.diffusion.beta_start);
        maybe(d, "beta_end", c.diffusion.beta_end);
        maybe(d, "hidden", c.diffusion.hidden);
        maybe(d, "time_emb_dim", c.diffusion.time_emb_dim);
        maybe(d, "epochs", c.diffusion.epochs);
        maybe(d, "batch_size", c.diffusion.batch_size);
        maybe(d, "lr", c.diffusion.lr);
    }
    if (j.contains("metrics")) {
        const auto& m = j.at("metrics");
        maybe(m, "bins", c.metrics.bins);
        maybe(m, "kl_smooth", c.metrics.kl_smooth);
        maybe(m, "ds_hidden", c.metrics.ds_hidden);
        maybe(m, "ds_epochs", c.metrics.ds_epochs);
        maybe(m, "ds_batch", c.metrics.ds_batch);
        maybe(m, "ds_lr", c.metrics.ds_lr);
        maybe(m, "forecast_hidden", c.metrics.forecast_hidden);
        maybe(m, "forecast_epochs", c.metrics.forecast_epochs);
        maybe(m, "forecast_batch", c.metrics.forecast_batch);
        maybe(m, "forecast_lr", c.metrics.forecast_lr);
        maybe(m, "train_frac", c.metrics.train_frac);
    }
    if (j.contains("cubic")) {
        const auto& q = j.at("cubic");
        maybe(q, "mu_a", c.cubic.mu_a);
        maybe(q, "sigma_a", c.cubic.sigma_a);
        maybe(q, "mu_b", c.cubic.mu_b);
        maybe(q, "sigma_b", c.cubic.sigma_b);
        maybe(q, "mu_c", c.cubic.mu_c);
        maybe(q, "sigma_c", c.cubic.sigma_c);
        maybe(q, "mu_d", c.cubic.mu_d);
        maybe(q, "sigma_d", c.cubic.sigma_d);
    }
    if (j.contains("sine")) {
        const auto& s = j.at("sine");
        maybe(s, "freq_lo", c.sine.freq_lo);
        maybe(s, "freq_hi", c.sine.freq_hi);
        maybe(s, "phase_lo", c.sine.phase_lo);
        maybe(s, "phase_hi", c.sine.phase_hi);
    }
    return c;
}

PipelineConfig PipelineConfig::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config " + path);
    json j = json::parse(in, nullptr, false);
    if (j.is_discarded()) throw IoError("invalid JSON in config " + path);
    return from_json(j);
}

json PipelineConfig::to_json() const {
    json j;
    j["dataset"] = {{"kind", dataset.kind},
                    {"n", dataset.n},
                    {"grid_len", dataset.grid_len},
                    {"channels", dataset.channels},
                    {"drop_rate", dataset.drop_rate},
                    {"entry_wise_drop", dataset.entry_wise_drop}};
    j["seed"] = seed;
    j["weight_scale"] = weight_scale;
    j["ae"] = {{"latent_dim", ae.latent_dim},
               {"hidden", ae.hidden},
               {"epochs", ae.epochs},
               {"batch_size", ae.batch_size},
               {"lr", ae.lr}};
    j["ncde"] = {{"n_experts", ncde.n_experts},
                 {"expert_hidden", ncde.expert_hidden},
                 {"expert_layers", ncde.expert_layers},
                 {"router_hidden", ncde.router_hidden},
                 {"substeps", ncde.substeps},
                 {"epochs", ncde.epochs},
                 {"lr", ncde.lr},
                 {"batch_size", ncde.batch_size},
                 {"decoupled", ncde.decoupled}};
    j["diffusion"] = {{"T_d", diffusion.T_d},
                      {"beta_start", diffusion.beta_start},
                      {"beta_end", diffusion.beta_end},
                      {"hidden", diffusion.hidden},
                      {"time_emb_dim", diffusion.time_emb_dim},
                      {"epochs", diffusion.epochs},
                      {"batch_size", diffusion.batch_size},
                      {"lr", diffusion.lr}};
    j["metrics"] = {{"bins", metrics.bins},
                    {"kl_smooth", metrics.kl_smooth},
                    {"ds_hidden", metrics.ds_hidden},
                    {"ds_epochs", metrics.ds_epochs},
                    {"ds_batch", metrics.ds_batch},
                    {"ds_lr", metrics.ds_lr},
                    {"forecast_hidden", metrics.forecast_hidden},
                    {"forecast_epochs", metrics.forecast_epochs},
                    {"forecast_batch", metrics.forecast_batch},
                    {"forecast_lr", metrics.forecast_lr},
                    {"train_frac", metrics.train_frac}};
    j["cubic"] = {{"mu_a", cubic.mu_a},     {"sigma_a", cubic.sigma_a}, {"mu_b", cubic.mu_b},
                  {"sigma_b", cubic.sigma_b}, {"mu_c", cubic.mu_c},     {"sigma_c", cubic.sigma_c},
                  {"mu_d", cubic.mu_d},     {"sigma_d", cubic.sigma_d}};
    j["sine"] = {{"freq_lo", sine.freq_lo},
                 {"freq_hi", sine.freq_hi},
                 {"phase_lo", sine.phase_lo},
                 {"phase_hi", sine.phase_hi}};
    return j;
}

void PipelineConfig::save(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open " + path + " for writing");
    out << to_json().dump(2) << "\n";
}

uint64_t PipelineConfig::hash() const {
    const std::string dump = to_json().dump();
    return fnv1a(dump.data(), dump.size());
}

void PipelineConfig::apply_ablation(const std::string& flag) {
    if (flag == "no-moe") {
        // Depth-matched single expert: the expert pool's total linear layers
        // collapse into one stack.
        ncde.expert_layers = ncde.n_experts * ncde.expert_layers;
        ncde.n_experts = 1;
    } else if (flag == "no-decoupled") {
        ncde.decoupled = false;
    } else if (!flag.empty()) {
        throw ContractError("unknown ablation flag: " + flag);
    }
}

}  // namespace diffmn
