#include "diffmn/dataset_io.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

namespace diffmn {

using nlohmann::json;

void write_jsonl(const std::string& path, const std::vector<IrregularSeries>& dataset) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open " + path + " for writing");
    for (const auto& s : dataset) {
        json j;
        j["id"] = s.id;
        j["times"] = s.times;
        j["values"] = s.values;
        j["mask"] = json::array();
        for (uint8_t m : s.mask) j["mask"].push_back(m ? 1 : 0);
        out << j.dump() << "\n";
    }
    if (!out) throw IoError("failed writing " + path);
}

std::vector<IrregularSeries> read_jsonl(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path);
    std::vector<IrregularSeries> dataset;
    std::string line;
    size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        json j = json::parse(line, nullptr, false);
        if (j.is_discarded())
            throw IoError(path + ":" + std::to_string(lineno) + ": invalid JSON");
        IrregularSeries s;
        s.id = j.at("id").get<std::string>();
        s.times = j.at("times").get<std::vector<double>>();
        s.values = j.at("values").get<std::vector<double>>();
        for (const auto& m : j.at("mask")) s.mask.push_back(m.get<int>() ? 1 : 0);
        if (s.times.empty() || s.values.size() % s.times.size() != 0)
            throw IoError(path + ":" + std::to_string(lineno) + ": values/times size mismatch");
        s.channels = static_cast<int>(s.values.size() / s.times.size());
        s.validate();
        dataset.push_back(std::move(s));
    }
    return dataset;
}

void write_cubic_truth(const std::string& path, const std::vector<CubicCoeffs>& truth) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open " + path + " for writing");
    out << "id,a,b,c,d\n";
    out.precision(17);
    for (const auto& c : truth)
        out << c.id << "," << c.a << "," << c.b << "," << c.c << "," << c.d << "\n";
}

std::vector<CubicCoeffs> read_cubic_truth(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path);
    std::vector<CubicCoeffs> truth;
    std::string line;
    std::getline(in, line);  // header
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::stringstream ss(line);
        CubicCoeffs c;
        std::string field;
        std::getline(ss, c.id, ',');
        std::getline(ss, field, ',');
        c.a = std::stod(field);
        std::getline(ss, field, ',');
        c.b = std::stod(field);
        std::getline(ss, field, ',');
        c.c = std::stod(field);
        std::getline(ss, field, ',');
        c.d = std::stod(field);
        truth.push_back(std::move(c));
    }
    return truth;
}

void write_weight_table(const std::string& path,
                        const std::vector<std::pair<std::string, std::vector<double>>>& table) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open " + path + " for writing");
    const size_t ne = table.empty() ? 0 : table.front().second.size();
    out << "sample_id";
    for (size_t i = 0; i < ne; ++i) out << ",s_" << i;
    out << "\n";
    out.precision(17);
    for (const auto& [id, s] : table) {
        out << id;
        for (double v : s) out << "," << v;
        out << "\n";
    }
}

std::vector<std::pair<std::string, std::vector<double>>> read_weight_table(
    const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path);
    std::vector<std::pair<std::string, std::vector<double>>> table;
    std::string line;
    std::getline(in, line);  // header
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string id, field;
        std::getline(ss, id, ',');
        std::vector<double> s;
        while (std::getline(ss, field, ',')) s.push_back(std::stod(field));
        table.emplace_back(std::move(id), std::move(s));
    }
    return table;
}

void write_loss_csv(const std::string& path, const std::vector<double>& losses) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open " + path + " for writing");
    out << "epoch,loss\n";
    out.precision(17);
    for (size_t i = 0; i < losses.size(); ++i) out << i << "," << losses[i] << "\n";
}

void write_svg_preview(const std::string& path, const std::vector<IrregularSeries>& dataset,
                       int max_samples) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open " + path + " for writing");
    const int W = 640, H = 320, pad = 24;
    double lo = 0.0, hi = 1.0;
    bool first = true;
    const int n = std::min<int>(max_samples, static_cast<int>(dataset.size()));
    for (int j = 0; j < n; ++j)
        for (int t = 0; t < dataset[j].steps(); ++t)
            for (int ch = 0; ch < dataset[j].channels; ++ch)
                if (dataset[j].observed(t, ch)) {
                    const double v = dataset[j].value_at(t, ch);
                    if (first) {
                        lo = hi = v;
                        first = false;
                    }
                    lo = std::min(lo, v);
                    hi = std::max(hi, v);
                }
    if (hi <= lo) hi = lo + 1.0;

    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H
        << "\" viewBox=\"0 0 " << W << " " << H << "\">\n";
    out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    const char* colors[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728",
                            "#9467bd", "#8c564b", "#e377c2", "#7f7f7f"};
    for (int j = 0; j < n; ++j) {
        const auto& s = dataset[j];
        const double t0 = s.times.front(), t1 = s.times.back();
        for (int ch = 0; ch < s.channels; ++ch) {
            out << "<polyline fill=\"none\" stroke=\"" << colors[j % 8]
                << "\" stroke-width=\"1\" opacity=\"0.8\" points=\"";
            for (int t = 0; t < s.steps(); ++t) {
                if (!s.observed(t, ch)) continue;
                const double x = pad + (W - 2 * pad) * (s.times[t] - t0) / std::max(t1 - t0, 1e-12);
                const double y = H - pad - (H - 2 * pad) * (s.value_at(t, ch) - lo) / (hi - lo);
                out << x << "," << y << " ";
            }
            out << "\"/>\n";
        }
    }
    out << "</svg>\n";
}

}  // namespace diffmn
