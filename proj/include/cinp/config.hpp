#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "cinp/encoders.hpp"
#include "cinp/evalkit.hpp"
#include "cinp/synthdata.hpp"

namespace cinp {

struct TrainHyper {
    std::size_t epochs = 50;
    std::size_t batch_size = 16;
    double lr_initial = 7e-4;
    double lr_min = 1e-5;
    double weight_decay = 1e-5;
    double alpha = 1.0;  // MIM weight
    double beta = 1.0;   // INM weight
    double mask_ratio = 0.30;
    AugmentCfg augment{};
};

struct EvalSpec {
    std::array<double, 3> split{0.70, 0.10, 0.20};
    bool stratified = true;
    ProbeCfg probe{};
    std::vector<std::size_t> prompt_r{1, 5, 10};
    double fcn_fraction = 0.10;
};

struct Config {
    std::uint64_t seed = 0;
    CohortSpec cohort{};  // cohort.seed is derived from `seed`, never read from JSON
    ModelCfg model{};
    TrainHyper hyper{};
    EvalSpec eval{};
};

// Desk-scale defaults: 16^3 volumes, 16 ROIs, embed 64, batch 16, 50 epochs.
Config desk_config();
// Published full-scale settings: 96^3, 116 ROIs, embed 768, batch 256, 400 epochs.
Config paper_config();

// Re-derives every seed that hangs off the global seed.
void apply_seed(Config& cfg, std::uint64_t seed);

Config config_from_json(const nlohmann::json& j);
nlohmann::json config_to_json(const Config& cfg);
Config load_config(const std::filesystem::path& path);
void validate_config(const Config& cfg);

SplitSpec split_spec(const Config& cfg);

}  // namespace cinp
