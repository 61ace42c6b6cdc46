#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "cinp/checkpoint.hpp"
#include "cinp/config.hpp"
#include "cinp/encoders.hpp"
#include "cinp/optim.hpp"
#include "cinp/synthdata.hpp"
#include "cinp/tensor.hpp"

namespace cinp {

struct LossReport {
    std::uint64_t step = 0;
    std::uint64_t epoch = 0;
    double lr = 0.0;
    double inc = 0.0;
    double mim = 0.0;  // 0 when the MIM term is switched off (alpha == 0)
    double inm = 0.0;  // 0 when the INM term is switched off (beta == 0)
    double total = 0.0;
    double tau = 0.0;
};

// For image i, network_for_image[i] != i; for network j, image_for_network[j] != j.
struct HardNegativePairs {
    std::vector<std::size_t> network_for_image;
    std::vector<std::size_t> image_for_network;
};

// S = V W^T for K x d image and network embeddings.
Tensor similarity_matrix(const Tensor& v, const Tensor& w);

// Symmetric InfoNCE over S / tau with the diagonal as positives:
//   0.5 * (mean_i -log softmax_row(S/tau)[i,i] + mean_j -log softmax_col(S/tau)[j,j])
// `tau` is a one-element tensor so the temperature can be learned.
Tensor inc_loss(const Tensor& v, const Tensor& w, const Tensor& tau);
Tensor inc_loss(const Tensor& v, const Tensor& w, double tau);

// Mean absolute voxel difference.
Tensor mim_loss(const Tensor& raw, const Tensor& recon);
double mim_loss(const Volume3D& raw, const Volume3D& recon);

// One negative per image (over its row of S) and per network (over its
// column), drawn with probability proportional to exp(S / tau) off the diagonal.
HardNegativePairs sample_hard_negatives(std::span<const double> similarity, std::size_t k, double tau,
                                        std::uint64_t seed);

// Mean 2-way cross-entropy of an affine head over [v, w] pairs: K positives
// (target 1), then K image-side and K network-side hard negatives (target 0).
Tensor inm_loss(const Tensor& v, const Tensor& w, const HardNegativePairs& pairs, const Tensor& head_w,
                const Tensor& head_b);

struct TotalLoss {
    Tensor loss;
    LossReport report;
    Tensor image_embeddings;    // K x d
    Tensor network_embeddings;  // K x d
};

// Full forward on one batch: augment -> resize -> encode (raw and masked) ->
// decode -> INC + alpha * MIM + beta * INM. All randomness hangs off `seed`.
TotalLoss total_loss(std::span<const PairedSample* const> batch, const ModelParams& params, const ModelCfg& model,
                     const TrainHyper& hyper, std::uint64_t seed);

struct TrainResult {
    Checkpoint checkpoint;
    std::vector<LossReport> history;
};

// Cosine schedule spanning the whole run for a cohort of `cohort_size`.
LrSchedule training_schedule(const Config& cfg, std::size_t cohort_size);

using StepCallback = std::function<void(const LossReport&)>;

// Seeded shuffle per epoch, full batches only, Adam with cosine decay over
// epochs * floor(n / batch) steps, temperature clamped after every update.
TrainResult pretrain(std::span<const PairedSample> cohort, const Config& cfg, const StepCallback& on_step = {});

std::string loss_report_jsonl(const LossReport& r);

}  // namespace cinp
