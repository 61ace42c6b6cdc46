#include "cinp/objectives.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "cinp/error.hpp"
#include "cinp/rng.hpp"

namespace cinp {

namespace {

void require_pair(const Tensor& v, const Tensor& w, const char* op) {
    if (v.rank() != 2 || w.rank() != 2 || v.shape() != w.shape()) {
        fail(ErrorCode::ShapeMismatch, std::string(op) + ": V and W must both be K x d, got " +
                                           shape_str(v.shape()) + " and " + shape_str(w.shape()));
    }
}

Tensor diagonal(const Tensor& square) {
    const std::size_t k = square.rows();
    std::vector<std::size_t> idx(k);
    for (std::size_t i = 0; i < k; ++i) idx[i] = i * k + i;
    return gather(square, std::move(idx), {k});
}

std::size_t draw_weighted(Rng& rng, const std::vector<double>& weights) {
    const double total = std::accumulate(weights.begin(), weights.end(), 0.0);
    const double u = rng.uniform() * total;
    double acc = 0.0;
    std::size_t last = 0;
    for (std::size_t j = 0; j < weights.size(); ++j) {
        if (weights[j] <= 0.0) continue;
        last = j;
        acc += weights[j];
        if (u < acc) return j;
    }
    return last;
}

// exp((s_j - max) / tau) over j != skip, 0 at skip.
std::vector<double> negative_weights(const std::vector<double>& sims, std::size_t skip, double tau) {
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < sims.size(); ++j) {
        if (j != skip) mx = std::max(mx, sims[j]);
    }
    std::vector<double> w(sims.size(), 0.0);
    for (std::size_t j = 0; j < sims.size(); ++j) {
        if (j != skip) w[j] = std::exp((sims[j] - mx) / tau);
    }
    return w;
}

}  // namespace

Tensor similarity_matrix(const Tensor& v, const Tensor& w) {
    require_pair(v, w, "similarity_matrix");
    return matmul(v, transpose(w));
}

Tensor inc_loss(const Tensor& v, const Tensor& w, const Tensor& tau) {
    require_pair(v, w, "inc_loss");
    if (v.rows() < 2) fail(ErrorCode::ShapeMismatch, "inc_loss needs a batch of at least 2 pairs");
    if (tau.numel() != 1 || !(tau.item() > 0.0) || !std::isfinite(tau.item())) {
        fail(ErrorCode::BadTemperature, "temperature must be a positive finite scalar");
    }
    const Tensor logits = div(similarity_matrix(v, w), tau);
    const Tensor image_to_network = neg(mean(diagonal(log_softmax_rows(logits))));
    const Tensor network_to_image = neg(mean(diagonal(log_softmax_rows(transpose(logits)))));
    return scale(add(image_to_network, network_to_image), 0.5);
}

Tensor inc_loss(const Tensor& v, const Tensor& w, double tau) { return inc_loss(v, w, Tensor::scalar(tau)); }

Tensor mim_loss(const Tensor& raw, const Tensor& recon) {
    if (raw.shape() != recon.shape()) {
        fail(ErrorCode::ShapeMismatch, "mim_loss: " + shape_str(raw.shape()) + " vs " + shape_str(recon.shape()));
    }
    return mean(abs(sub(raw, recon)));
}

double mim_loss(const Volume3D& raw, const Volume3D& recon) {
    if (!(raw.dims == recon.dims) || raw.voxels.size() != recon.voxels.size()) {
        fail(ErrorCode::ShapeMismatch, "mim_loss: volume dims differ");
    }
    const Shape shape{raw.voxels.size()};
    return mim_loss(Tensor(shape, raw.voxels), Tensor(shape, recon.voxels)).item();
}

HardNegativePairs sample_hard_negatives(std::span<const double> similarity, std::size_t k, double tau,
                                        std::uint64_t seed) {
    if (k < 2 || similarity.size() != k * k) {
        fail(ErrorCode::ShapeMismatch, "sample_hard_negatives needs a K x K matrix with K >= 2");
    }
    if (!(tau > 0.0)) fail(ErrorCode::BadTemperature, "temperature must be positive");
    Rng rng(seed);
    HardNegativePairs pairs;
    pairs.network_for_image.resize(k);
    pairs.image_for_network.resize(k);
    std::vector<double> line(k);
    for (std::size_t i = 0; i < k; ++i) {
        for (std::size_t j = 0; j < k; ++j) line[j] = similarity[i * k + j];
        pairs.network_for_image[i] = draw_weighted(rng, negative_weights(line, i, tau));
    }
    for (std::size_t j = 0; j < k; ++j) {
        for (std::size_t i = 0; i < k; ++i) line[i] = similarity[i * k + j];
        pairs.image_for_network[j] = draw_weighted(rng, negative_weights(line, j, tau));
    }
    return pairs;
}

Tensor inm_loss(const Tensor& v, const Tensor& w, const HardNegativePairs& pairs, const Tensor& head_w,
                const Tensor& head_b) {
    require_pair(v, w, "inm_loss");
    const std::size_t k = v.rows();
    const std::size_t d = v.cols();
    if (pairs.network_for_image.size() != k || pairs.image_for_network.size() != k) {
        fail(ErrorCode::ShapeMismatch, "inm_loss: hard negatives do not match the batch size");
    }
    if (head_w.rank() != 2 || head_w.rows() != 2 * d || head_w.cols() != 2 || head_b.numel() != 2) {
        fail(ErrorCode::ShapeMismatch, "inm_loss: head must map 2d -> 2");
    }
    std::vector<std::size_t> image_rows, network_rows;
    image_rows.reserve(3 * k);
    network_rows.reserve(3 * k);
    for (std::size_t i = 0; i < k; ++i) {
        image_rows.push_back(i);
        network_rows.push_back(i);
    }
    for (std::size_t i = 0; i < k; ++i) {
        image_rows.push_back(i);
        network_rows.push_back(pairs.network_for_image[i]);
    }
    for (std::size_t j = 0; j < k; ++j) {
        image_rows.push_back(pairs.image_for_network[j]);
        network_rows.push_back(j);
    }
    const std::vector<Tensor> halves{index_rows(v, image_rows), index_rows(w, network_rows)};
    const Tensor logits = add(matmul(concat_cols(halves), head_w), head_b);
    const Tensor logp = log_softmax_rows(logits);
    std::vector<std::size_t> target(3 * k);
    for (std::size_t r = 0; r < 3 * k; ++r) target[r] = r * 2 + (r < k ? 1 : 0);
    return neg(mean(gather(logp, std::move(target), {3 * k})));
}

TotalLoss total_loss(std::span<const PairedSample* const> batch, const ModelParams& params, const ModelCfg& model,
                     const TrainHyper& hyper, std::uint64_t seed) {
    if (batch.size() < 2) fail(ErrorCode::BadHyper, "a training batch needs at least 2 samples");
    if (!(hyper.alpha >= 0.0) || !(hyper.beta >= 0.0)) fail(ErrorCode::BadHyper, "alpha and beta must be >= 0");

    const bool use_mim = hyper.alpha > 0.0;
    const bool use_inm = hyper.beta > 0.0;
    std::vector<Tensor> image_rows, network_rows, mim_terms;
    for (std::size_t i = 0; i < batch.size(); ++i) {
        const PairedSample& s = *batch[i];
        AugmentCfg aug = hyper.augment;
        aug.seed = derive_seed(seed, "augment", i);
        const Volume3D image = resize_volume(augment_volume(s.volume, aug), model.visual.dims);
        image_rows.push_back(visual_encode(image, params, model.visual).embedding);
        if (use_mim) {
            const MaskedVolume masked = mask_volume(image, {hyper.mask_ratio, derive_seed(seed, "mask", i)});
            const Tensor tokens = visual_encode(masked.masked, params, model.visual).tokens;
            const Tensor recon = visual_decode(tokens, params, model.visual);
            mim_terms.push_back(mim_loss(Tensor({image.voxels.size(), 1}, image.voxels), recon));
        }
        network_rows.push_back(network_encode(s.fcn, params, model.network));
    }

    TotalLoss out;
    out.image_embeddings = concat_rows(image_rows);
    out.network_embeddings = concat_rows(network_rows);
    const Tensor tau = exp(params.log_temperature);
    const Tensor inc = inc_loss(out.image_embeddings, out.network_embeddings, tau);
    Tensor total = inc;
    LossReport& r = out.report;
    r.inc = inc.item();
    r.tau = tau.item();
    if (use_mim) {
        const Tensor mim = mean(concat_rows(mim_terms));
        r.mim = mim.item();
        total = add(total, scale(mim, hyper.alpha));
    }
    if (use_inm) {
        const Tensor sim = similarity_matrix(out.image_embeddings.detach(), out.network_embeddings.detach());
        const auto pairs = sample_hard_negatives(sim.data(), batch.size(), r.tau, derive_seed(seed, "hard-negatives"));
        const Tensor inm = inm_loss(out.image_embeddings, out.network_embeddings, pairs, params.inm_w, params.inm_b);
        r.inm = inm.item();
        total = add(total, scale(inm, hyper.beta));
    }
    r.total = total.item();
    out.loss = total;
    return out;
}

std::string loss_report_jsonl(const LossReport& r) {
    nlohmann::json j = {{"step", r.step}, {"epoch", r.epoch}, {"lr", r.lr},  {"inc", r.inc},
                        {"mim", r.mim},   {"inm", r.inm},     {"total", r.total}, {"tau", r.tau}};
    return j.dump();
}

}  // namespace cinp
