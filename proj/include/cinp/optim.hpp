#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cinp/tensor.hpp"

namespace cinp {

struct AdamState {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    double weight_decay = 1e-5;
    std::uint64_t step_count = 0;
    // One moment buffer per registered parameter, same order and length.
    std::vector<std::vector<double>> first_moment;
    std::vector<std::vector<double>> second_moment;

    static AdamState for_params(const std::vector<Tensor>& params, double weight_decay = 1e-5);
};

// Adam with bias correction and decoupled weight decay:
//   p <- p * (1 - lr * wd) - lr * m_hat / (sqrt(v_hat) + eps)
// Throws MissingGradient if any parameter has no grad buffer.
void adam_step(std::vector<Tensor>& params, AdamState& state, double lr);

struct LrSchedule {
    double lr_initial = 1e-5;
    double lr_min = 1e-6;
    std::uint64_t total_steps = 1;
};

// lr_min + (lr_initial - lr_min) * (1 + cos(pi * step / total_steps)) / 2
double cosine_lr(std::uint64_t step, const LrSchedule& schedule);

}  // namespace cinp
