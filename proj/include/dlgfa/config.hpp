#pragma once

#include <string>

#include "dlgfa/data.hpp"
#include "dlgfa/optim.hpp"

namespace dlgfa {

struct DataConfig {
    std::string source;  // "synthetic" or "csv"
    std::string path;    // csv only
    std::size_t n = 2000;
    std::size_t size = 8;
    double noise_sd = 0.05;
    std::uint64_t seed = 0;
    std::string mode = "row_as_time";  // or "replicate_T"
    std::size_t replicate_t = 20;
    SplitSpec split;
};

struct RunConfig {
    ModelConfig model;  // group_spec and T filled from the data when left empty
    OptimConfig optim;
    DataConfig data;
    std::string output_dir = "out";
    bool seed_given = false;  // optim.seed explicitly present in the file

    void validate() const;
};

// Flat `section.key = value` text config (comments with #, quoted or bare
// strings). Unknown keys are rejected with their line number.
RunConfig parse_config(const std::string& path);
RunConfig parse_config_text(const std::string& text, const std::string& origin);

// Inverse of parse_config; used for run manifests.
std::string render_config(const RunConfig& config);

}  // namespace dlgfa
