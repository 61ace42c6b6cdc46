#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace cinp {

struct SplitSpec {
    std::array<double, 3> ratios{0.70, 0.10, 0.20};  // train, val, test
    std::uint64_t seed = 0;
    bool stratified = true;
};

struct SplitIndices {
    std::vector<std::size_t> train;
    std::vector<std::size_t> val;
    std::vector<std::size_t> test;
};

// Seeded split of sample indices by label. Stratified: per class, a seeded
// shuffle, then round(ratio * n_class) train and val, remainder test.
SplitIndices split_dataset(std::span<const int> labels, const SplitSpec& spec);
void validate_split_spec(const SplitSpec& spec);

struct ProbeCfg {
    double l2 = 1e-3;
    std::size_t epochs = 3000;  // iteration cap
    double lr = 0.5;
    std::uint64_t seed = 0;
};

// Multinomial logistic regression on standardized, frozen features.
struct LinearProbe {
    std::size_t k = 0;
    std::size_t d = 0;
    std::vector<double> feature_mean;  // d
    std::vector<double> feature_scale; // d, 1 / std (1 for constant features)
    std::vector<double> weights;       // k x d
    std::vector<double> bias;          // k
    std::size_t iterations = 0;
    double final_loss = 0.0;

    std::vector<double> logits(std::span<const double> x) const;
    int predict(std::span<const double> x) const;
};

// Mean cross-entropy + 0.5 * l2 * ||W||^2 over rows of `x` (n x d, already
// standardized) and its gradient w.r.t. (W, b) laid out as [W..., b...].
double probe_objective(std::span<const double> x, std::span<const int> labels, std::size_t n, std::size_t d,
                       std::size_t k, std::span<const double> weights, std::span<const double> bias, double l2,
                       std::vector<double>* grad);

// Full-batch gradient descent until the gradient norm drops below 1e-6 or
// the iteration cap. Throws DegenerateLabels if a class has no sample.
LinearProbe linear_probe_fit(std::span<const double> embeddings, std::size_t n, std::size_t d,
                             std::span<const int> labels, std::size_t k, const ProbeCfg& cfg);

struct MetricsReport {
    double acc = 0.0;
    std::optional<double> auc;
    double mcc = 0.0;
    std::size_t n = 0;
    std::size_t k = 0;
    std::vector<std::vector<std::size_t>> confusion;  // [true][pred]
};

// ACC and multiclass MCC from predictions; AUC (Mann-Whitney, ties 0.5) when
// `scores` is given, which requires binary labels.
MetricsReport metrics_compute(std::span<const int> preds, std::span<const int> labels, std::size_t k,
                              std::optional<std::span<const double>> scores = std::nullopt);

double auc_score(std::span<const double> scores, std::span<const int> labels);
double mcc_from_confusion(const std::vector<std::vector<std::size_t>>& confusion);

}  // namespace cinp
