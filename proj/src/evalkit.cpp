#include "cinp/evalkit.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "cinp/error.hpp"
#include "cinp/rng.hpp"

namespace cinp {

namespace {

void shuffle_in_place(std::vector<std::size_t>& v, std::uint64_t seed) {
    Rng rng(seed);
    for (std::size_t i = 0; i + 1 < v.size(); ++i) std::swap(v[i], v[i + rng.index(v.size() - i)]);
}

void assign_split(const std::vector<std::size_t>& shuffled, const SplitSpec& spec, SplitIndices& out) {
    const double n = static_cast<double>(shuffled.size());
    std::size_t n_train = static_cast<std::size_t>(std::llround(spec.ratios[0] * n));
    std::size_t n_val = static_cast<std::size_t>(std::llround(spec.ratios[1] * n));
    n_train = std::min(n_train, shuffled.size());
    n_val = std::min(n_val, shuffled.size() - n_train);
    for (std::size_t i = 0; i < shuffled.size(); ++i) {
        auto& dst = i < n_train ? out.train : (i < n_train + n_val ? out.val : out.test);
        dst.push_back(shuffled[i]);
    }
}

std::vector<double> softmax(std::vector<double> z) {
    const double mx = *std::max_element(z.begin(), z.end());
    double s = 0.0;
    for (double& v : z) s += (v = std::exp(v - mx));
    for (double& v : z) v /= s;
    return z;
}

}  // namespace

void validate_split_spec(const SplitSpec& spec) {
    for (double r : spec.ratios) {
        if (!(r >= 0.0 && r <= 1.0)) fail(ErrorCode::ValidationError, "split ratios must lie in [0, 1]");
    }
    const double total = spec.ratios[0] + spec.ratios[1] + spec.ratios[2];
    if (std::abs(total - 1.0) > 1e-12) fail(ErrorCode::ValidationError, "split ratios must sum to 1");
}

SplitIndices split_dataset(std::span<const int> labels, const SplitSpec& spec) {
    validate_split_spec(spec);
    if (spec.stratified && labels.size() < 10) {
        fail(ErrorCode::TooFewSamples, "stratified split needs at least 10 samples, got " +
                                           std::to_string(labels.size()));
    }
    SplitIndices out;
    if (spec.stratified) {
        const int max_label = labels.empty() ? -1 : *std::max_element(labels.begin(), labels.end());
        for (int cls = 0; cls <= max_label; ++cls) {
            std::vector<std::size_t> members;
            for (std::size_t i = 0; i < labels.size(); ++i) {
                if (labels[i] == cls) members.push_back(i);
            }
            if (members.empty()) continue;
            shuffle_in_place(members, derive_seed(spec.seed, "split", static_cast<std::uint64_t>(cls)));
            assign_split(members, spec, out);
        }
    } else {
        std::vector<std::size_t> all(labels.size());
        std::iota(all.begin(), all.end(), 0);
        shuffle_in_place(all, derive_seed(spec.seed, "split"));
        assign_split(all, spec, out);
    }
    std::sort(out.train.begin(), out.train.end());
    std::sort(out.val.begin(), out.val.end());
    std::sort(out.test.begin(), out.test.end());
    return out;
}

std::vector<double> LinearProbe::logits(std::span<const double> x) const {
    if (x.size() != d) fail(ErrorCode::ShapeMismatch, "probe input has the wrong dimension");
    std::vector<double> z(bias);
    for (std::size_t c = 0; c < k; ++c) {
        for (std::size_t j = 0; j < d; ++j) {
            z[c] += weights[c * d + j] * (x[j] - feature_mean[j]) * feature_scale[j];
        }
    }
    return z;
}

int LinearProbe::predict(std::span<const double> x) const {
    const auto z = logits(x);
    return static_cast<int>(std::max_element(z.begin(), z.end()) - z.begin());
}

double probe_objective(std::span<const double> x, std::span<const int> labels, std::size_t n, std::size_t d,
                       std::size_t k, std::span<const double> weights, std::span<const double> bias, double l2,
                       std::vector<double>* grad) {
    if (grad) grad->assign(k * d + k, 0.0);
    double loss = 0.0;
    std::vector<double> z(k);
    for (std::size_t i = 0; i < n; ++i) {
        const double* row = x.data() + i * d;
        for (std::size_t c = 0; c < k; ++c) {
            double acc = bias[c];
            for (std::size_t j = 0; j < d; ++j) acc += weights[c * d + j] * row[j];
            z[c] = acc;
        }
        const auto p = softmax(z);
        const auto y = static_cast<std::size_t>(labels[i]);
        loss -= std::log(std::max(p[y], 1e-300));
        if (grad) {
            for (std::size_t c = 0; c < k; ++c) {
                const double g = (p[c] - (c == y ? 1.0 : 0.0)) / static_cast<double>(n);
                for (std::size_t j = 0; j < d; ++j) (*grad)[c * d + j] += g * row[j];
                (*grad)[k * d + c] += g;
            }
        }
    }
    loss /= static_cast<double>(n);
    double sq = 0.0;
    for (std::size_t i = 0; i < k * d; ++i) {
        sq += weights[i] * weights[i];
        if (grad) (*grad)[i] += l2 * weights[i];
    }
    return loss + 0.5 * l2 * sq;
}

LinearProbe linear_probe_fit(std::span<const double> embeddings, std::size_t n, std::size_t d,
                             std::span<const int> labels, std::size_t k, const ProbeCfg& cfg) {
    if (embeddings.size() != n * d || labels.size() != n) {
        fail(ErrorCode::LengthMismatch, "probe inputs have inconsistent sizes");
    }
    if (n < k || k < 2) fail(ErrorCode::DegenerateLabels, "need at least k >= 2 samples");
    std::vector<std::size_t> counts(k, 0);
    for (int y : labels) {
        if (y < 0 || static_cast<std::size_t>(y) >= k) fail(ErrorCode::DegenerateLabels, "label out of range");
        ++counts[static_cast<std::size_t>(y)];
    }
    for (std::size_t c = 0; c < k; ++c) {
        if (counts[c] == 0) fail(ErrorCode::DegenerateLabels, "class " + std::to_string(c) + " has no samples");
    }
    if (!(cfg.l2 >= 0.0) || !(cfg.lr > 0.0)) fail(ErrorCode::BadHyper, "probe needs l2 >= 0 and lr > 0");

    LinearProbe probe;
    probe.k = k;
    probe.d = d;
    probe.feature_mean.assign(d, 0.0);
    probe.feature_scale.assign(d, 1.0);
    for (std::size_t j = 0; j < d; ++j) {
        double mu = 0.0;
        for (std::size_t i = 0; i < n; ++i) mu += embeddings[i * d + j];
        mu /= static_cast<double>(n);
        double var = 0.0;
        for (std::size_t i = 0; i < n; ++i) var += (embeddings[i * d + j] - mu) * (embeddings[i * d + j] - mu);
        var /= static_cast<double>(n);
        probe.feature_mean[j] = mu;
        probe.feature_scale[j] = var > 1e-24 ? 1.0 / std::sqrt(var) : 1.0;
    }
    std::vector<double> x(n * d);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < d; ++j) {
            x[i * d + j] = (embeddings[i * d + j] - probe.feature_mean[j]) * probe.feature_scale[j];
        }
    }

    const std::size_t m = k * d + k;
    std::vector<double> theta(m, 0.0);
    Rng rng(cfg.seed);
    for (std::size_t i = 0; i < k * d; ++i) theta[i] = 0.01 * rng.normal();
    auto objective = [&](const std::vector<double>& t, std::vector<double>* g) {
        return probe_objective(x, labels, n, d, k, std::span(t).first(k * d), std::span(t).subspan(k * d),
                               cfg.l2, g);
    };

    // Damped Newton descent with Armijo backtracking; the objective is
    // convex, so this reaches the same optimum from any start.
    std::vector<double> grad;
    double loss = objective(theta, &grad);
    Eigen::MatrixXd hess(m, m);
    std::vector<double> z(k);
    std::size_t iter = 0;
    for (; iter < cfg.epochs; ++iter) {
        const double gnorm = std::sqrt(std::inner_product(grad.begin(), grad.end(), grad.begin(), 0.0));
        if (gnorm < 1e-6) break;

        hess.setZero();
        for (std::size_t i = 0; i < n; ++i) {
            const double* row = x.data() + i * d;
            for (std::size_t c = 0; c < k; ++c) {
                double acc = theta[k * d + c];
                for (std::size_t j = 0; j < d; ++j) acc += theta[c * d + j] * row[j];
                z[c] = acc;
            }
            const auto p = softmax(z);
            for (std::size_t a = 0; a < k; ++a) {
                for (std::size_t b = 0; b < k; ++b) {
                    const double w = ((a == b ? p[a] : 0.0) - p[a] * p[b]) / static_cast<double>(n);
                    if (w == 0.0) continue;
                    for (std::size_t j = 0; j <= d; ++j) {
                        const double xj = j < d ? row[j] : 1.0;
                        const std::size_t ra = j < d ? a * d + j : k * d + a;
                        for (std::size_t l = 0; l <= d; ++l) {
                            const double xl = l < d ? row[l] : 1.0;
                            const std::size_t cb = l < d ? b * d + l : k * d + b;
                            hess(static_cast<Eigen::Index>(ra), static_cast<Eigen::Index>(cb)) += w * xj * xl;
                        }
                    }
                }
            }
        }
        for (std::size_t i = 0; i < m; ++i) {
            hess(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i)) += i < k * d ? cfg.l2 : 1e-10;
        }
        Eigen::Map<const Eigen::VectorXd> g(grad.data(), static_cast<Eigen::Index>(m));
        Eigen::VectorXd step = hess.ldlt().solve(-g);
        double slope = g.dot(step);
        if (!(slope < 0.0) || !step.allFinite()) {
            step = -g;
            slope = -g.squaredNorm();
        }

        double t = cfg.lr > 1.0 ? 1.0 : cfg.lr;
        std::vector<double> trial(m);
        std::vector<double> trial_grad;
        double trial_loss = loss;
        bool accepted = false;
        for (int bt = 0; bt < 60; ++bt) {
            for (std::size_t i = 0; i < m; ++i) trial[i] = theta[i] + t * step(static_cast<Eigen::Index>(i));
            trial_loss = objective(trial, &trial_grad);
            if (trial_loss <= loss + 1e-4 * t * slope) {
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if (!accepted) break;
        theta.swap(trial);
        grad.swap(trial_grad);
        loss = trial_loss;
    }

    probe.weights.assign(theta.begin(), theta.begin() + static_cast<std::ptrdiff_t>(k * d));
    probe.bias.assign(theta.begin() + static_cast<std::ptrdiff_t>(k * d), theta.end());
    probe.iterations = iter;
    probe.final_loss = loss;
    return probe;
}

double auc_score(std::span<const double> scores, std::span<const int> labels) {
    if (scores.size() != labels.size()) fail(ErrorCode::LengthMismatch, "scores and labels differ in length");
    const std::size_t n = scores.size();
    std::size_t n_pos = 0;
    for (int y : labels) {
        if (y != 0 && y != 1) fail(ErrorCode::AucOnMulticlass, "AUC needs binary labels");
        n_pos += static_cast<std::size_t>(y);
    }
    const std::size_t n_neg = n - n_pos;
    if (n_pos == 0 || n_neg == 0) return 0.5;

    // Mann-Whitney U from mid-ranks; tied scores share their average rank.
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
    double rank_sum_pos = 0.0;
    for (std::size_t i = 0; i < n;) {
        std::size_t j = i;
        while (j + 1 < n && scores[order[j + 1]] == scores[order[i]]) ++j;
        const double mid_rank = 0.5 * static_cast<double>(i + j) + 1.0;
        for (std::size_t t = i; t <= j; ++t) {
            if (labels[order[t]] == 1) rank_sum_pos += mid_rank;
        }
        i = j + 1;
    }
    const double np = static_cast<double>(n_pos);
    return (rank_sum_pos - np * (np + 1.0) / 2.0) / (np * static_cast<double>(n_neg));
}

double mcc_from_confusion(const std::vector<std::vector<std::size_t>>& confusion) {
    const std::size_t k = confusion.size();
    double s = 0.0, c = 0.0;
    std::vector<double> t(k, 0.0), p(k, 0.0);
    for (std::size_t i = 0; i < k; ++i) {
        for (std::size_t j = 0; j < k; ++j) {
            const double v = static_cast<double>(confusion[i][j]);
            s += v;
            t[i] += v;
            p[j] += v;
            if (i == j) c += v;
        }
    }
    double tp = 0.0, pp = 0.0, tt = 0.0;
    for (std::size_t i = 0; i < k; ++i) {
        tp += t[i] * p[i];
        pp += p[i] * p[i];
        tt += t[i] * t[i];
    }
    const double denom = std::sqrt(s * s - pp) * std::sqrt(s * s - tt);
    if (denom == 0.0) return 0.0;
    return (c * s - tp) / denom;
}

MetricsReport metrics_compute(std::span<const int> preds, std::span<const int> labels, std::size_t k,
                              std::optional<std::span<const double>> scores) {
    if (preds.size() != labels.size()) fail(ErrorCode::LengthMismatch, "predictions and labels differ in length");
    if (preds.empty()) fail(ErrorCode::LengthMismatch, "no samples to evaluate");
    MetricsReport r;
    r.n = preds.size();
    r.k = k;
    r.confusion.assign(k, std::vector<std::size_t>(k, 0));
    std::size_t correct = 0;
    for (std::size_t i = 0; i < preds.size(); ++i) {
        if (preds[i] < 0 || labels[i] < 0 || static_cast<std::size_t>(preds[i]) >= k ||
            static_cast<std::size_t>(labels[i]) >= k) {
            fail(ErrorCode::ValidationError, "class index out of range");
        }
        ++r.confusion[static_cast<std::size_t>(labels[i])][static_cast<std::size_t>(preds[i])];
        correct += preds[i] == labels[i];
    }
    r.acc = static_cast<double>(correct) / static_cast<double>(r.n);
    r.mcc = mcc_from_confusion(r.confusion);
    if (scores) {
        if (k != 2) fail(ErrorCode::AucOnMulticlass, "AUC is only defined here for k = 2");
        r.auc = auc_score(*scores, labels);
    }
    return r;
}

}  // namespace cinp
