#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "cinp/checkpoint.hpp"
#include "cinp/config.hpp"
#include "cinp/evalkit.hpp"
#include "cinp/objectives.hpp"
#include "cinp/prompting.hpp"

namespace cinp {

// Paired image and network embeddings of a cohort, row-aligned by subject.
struct EmbeddingSet {
    std::size_t n = 0;
    std::size_t d = 0;
    std::vector<std::string> subject_ids;
    std::vector<int> labels;
    std::vector<double> image;    // n x d
    std::vector<double> network;  // n x d
    nlohmann::json config;        // config of the producing checkpoint

    std::span<const double> image_row(std::size_t i) const { return std::span<const double>(image).subspan(i * d, d); }
    std::span<const double> network_row(std::size_t i) const {
        return std::span<const double>(network).subspan(i * d, d);
    }
};

// Volumes are resized to the encoder grid first; no augmentation.
EmbeddingSet embed_cohort(std::span<const PairedSample> cohort, const ModelParams& params, const Config& cfg);

// File: one line of JSON header, '\n', then image rows and network rows as
// little-endian f64.
void save_embeddings(const std::filesystem::path& path, const EmbeddingSet& set);
EmbeddingSet load_embeddings(const std::filesystem::path& path);

EmbeddingSet subset(const EmbeddingSet& set, std::span<const std::size_t> rows);

// Indices the encoders may be pretrained on: everything outside the test split.
std::vector<std::size_t> pretrain_indices(std::span<const int> labels, const Config& cfg);

// Images whose most similar network (over the given rows) is their own.
std::size_t retrieval_top1(const EmbeddingSet& set);

struct ProbeRun {
    MetricsReport metrics;
    LinearProbe probe;
};

// Fit on the train split of `set`, score the test split.
ProbeRun run_probe(const EmbeddingSet& set, const Config& cfg);

struct PromptRun {
    MetricsReport metrics;
    ReferenceSet references;
    std::vector<PromptResult> results;  // one per test image
    std::vector<std::size_t> test_rows;
};

// Draws ceil(fcn_fraction * n_c) training FCN embeddings per class, builds r
// references per class, and classifies every test image by mean similarity.
PromptRun run_prompt(const EmbeddingSet& set, const Config& cfg, std::size_t r, double fcn_fraction);

nlohmann::json metrics_to_json(const MetricsReport& m);
MetricsReport metrics_from_json(const nlohmann::json& j);

struct AblationRow {
    std::string name;
    double alpha = 0.0;
    double beta = 0.0;
    double final_loss = 0.0;
    std::size_t retrieval_hits = 0;
    std::size_t retrieval_n = 0;
    MetricsReport prompt;
    MetricsReport probe;
};

using ProgressFn = std::function<void(const std::string&)>;

// INC, INC+MIM, INC+INM, INC+MIM+INM, all pretrained from the same init
// and data; alpha/beta take the config's values when switched on. The
// embeddings of each row are appended to `embeddings` when given.
std::vector<AblationRow> run_ablation(std::span<const PairedSample> cohort, const Config& cfg, std::size_t r,
                                      const ProgressFn& progress = {},
                                      std::vector<EmbeddingSet>* embeddings = nullptr);

nlohmann::json ablation_to_json(const std::vector<AblationRow>& rows, std::size_t r);
std::string format_ablation(const std::vector<AblationRow>& rows);

std::vector<LossReport> load_history(const std::filesystem::path& path);

// Human-readable summary of history logs, metrics and ablation files.
std::string render_report(std::span<const std::filesystem::path> inputs);

}  // namespace cinp
