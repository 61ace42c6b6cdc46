#include <numeric>

#include "cinp/error.hpp"
#include "cinp/objectives.hpp"
#include "cinp/optim.hpp"
#include "cinp/rng.hpp"

namespace cinp {

LrSchedule training_schedule(const Config& cfg, std::size_t cohort_size) {
    const std::size_t batches = cfg.hyper.batch_size ? cohort_size / cfg.hyper.batch_size : 0;
    return {cfg.hyper.lr_initial, cfg.hyper.lr_min, std::max<std::uint64_t>(1, cfg.hyper.epochs * batches)};
}

TrainResult pretrain(std::span<const PairedSample> cohort, const Config& cfg, const StepCallback& on_step) {
    validate_model_cfg(cfg.model);
    const TrainHyper& hyper = cfg.hyper;
    if (hyper.batch_size < 2 || cohort.size() < hyper.batch_size) {
        fail(ErrorCode::BadHyper, "need cohort size >= batch_size >= 2 (cohort " + std::to_string(cohort.size()) +
                                      ", batch " + std::to_string(hyper.batch_size) + ")");
    }
    if (!(hyper.lr_initial > 0.0) || !(hyper.lr_min > 0.0) || hyper.lr_min > hyper.lr_initial) {
        fail(ErrorCode::BadHyper, "learning rates must satisfy 0 < lr_min <= lr_initial");
    }

    TrainResult result;
    Checkpoint& ckpt = result.checkpoint;
    ckpt.config = cfg;
    ckpt.params = init_params(cfg.model, derive_seed(cfg.seed, "init"));
    std::vector<Tensor> params = ckpt.params.tensors();
    ckpt.optimizer = AdamState::for_params(params, hyper.weight_decay);

    const std::size_t batches_per_epoch = cohort.size() / hyper.batch_size;
    const LrSchedule schedule = training_schedule(cfg, cohort.size());
    const std::uint64_t train_seed = derive_seed(cfg.seed, "train");

    std::vector<std::size_t> order(cohort.size());
    std::vector<const PairedSample*> batch(hyper.batch_size);
    for (std::size_t epoch = 0; epoch < hyper.epochs; ++epoch) {
        std::iota(order.begin(), order.end(), 0);
        Rng shuffle(derive_seed(train_seed, "epoch-shuffle", epoch));
        for (std::size_t i = 0; i + 1 < order.size(); ++i) {
            std::swap(order[i], order[i + shuffle.index(order.size() - i)]);
        }
        for (std::size_t b = 0; b < batches_per_epoch; ++b) {
            for (std::size_t i = 0; i < hyper.batch_size; ++i) {
                batch[i] = &cohort[order[b * hyper.batch_size + i]];
            }
            const double lr = cosine_lr(ckpt.step, schedule);
            TotalLoss tl = total_loss(batch, ckpt.params, cfg.model, hyper, derive_seed(train_seed, "step", ckpt.step));
            for (auto& p : params) p.zero_grad();
            tl.loss.backward();
            adam_step(params, ckpt.optimizer, lr);
            ckpt.params.clamp_temperature();

            tl.report.step = ckpt.step;
            tl.report.epoch = epoch;
            tl.report.lr = lr;
            result.history.push_back(tl.report);
            if (on_step) on_step(tl.report);
            ++ckpt.step;
        }
    }
    return result;
}

}  // namespace cinp
