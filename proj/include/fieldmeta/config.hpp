#pragma once

// Flat "key = value" run configuration for meta-training.

#include "fieldmeta/metatrain.hpp"

#include <filesystem>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace fieldmeta::config {

/// Every problem found in a config file, reported together.
class ConfigError : public std::invalid_argument {
public:
    explicit ConfigError(std::vector<std::string> problems);
    const std::vector<std::string>& problems() const { return problems_; }

private:
    std::vector<std::string> problems_;
};

struct TrainConfig {
    std::filesystem::path dataset;     // required
    std::filesystem::path output_dir;  // required
    std::string preset = "paper";
    nf::ModelSpec model;               // input/output dims come from the data
    meta::Hyper hyper;
    double alpha_init = 1e-2;
    int outer_steps = 150000;
    int batch_size = 4;
    scoring::Scorer scorer = scoring::Scorer::gradncp;
    bool first_order = false;
    int checkpoint_every = 1000;
    std::uint64_t seed = 0;
    int jobs = 1;
};

/// Applies a named preset ("paper" or "desk") to the defaults.
void apply_preset(TrainConfig& cfg, std::string_view preset);

/// Parses config text. Lines are `key = value`; `#` starts a comment and
/// string values may be double-quoted. A `preset` key is applied before
/// every other key regardless of position. Unknown or repeated keys are
/// errors, and all problems are collected into one ConfigError.
TrainConfig parse_config(std::string_view text);
TrainConfig load_config(const std::filesystem::path& path);

/// Names of every key parse_config accepts.
std::vector<std::string_view> known_keys();

}  // namespace fieldmeta::config
