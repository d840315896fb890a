#pragma once

#include <string>
#include <vector>

#include "diffmn/spline.hpp"
#include "diffmn/synthgen.hpp"

namespace diffmn {

// JSONL dataset format: one sample per line with fields id, times, values
// (row-major steps x channels) and mask. Missingness lives in the mask; NaN
// is never serialized.
void write_jsonl(const std::string& path, const std::vector<IrregularSeries>& dataset);
std::vector<IrregularSeries> read_jsonl(const std::string& path);

// Ground-truth sidecar for the cubic dataset: CSV of id,a,b,c,d.
void write_cubic_truth(const std::string& path, const std::vector<CubicCoeffs>& truth);
std::vector<CubicCoeffs> read_cubic_truth(const std::string& path);

// Per-sample MoE weight table: CSV of sample_id,s_0..s_{Ne-1}.
void write_weight_table(const std::string& path,
                        const std::vector<std::pair<std::string, std::vector<double>>>& table);
std::vector<std::pair<std::string, std::vector<double>>> read_weight_table(
    const std::string& path);

void write_loss_csv(const std::string& path, const std::vector<double>& losses);

// Minimal SVG line plot of the first few samples, for offline inspection.
void write_svg_preview(const std::string& path, const std::vector<IrregularSeries>& dataset,
                       int max_samples = 8);

}  // namespace diffmn
