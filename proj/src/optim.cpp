#include "cinp/optim.hpp"

#include <cmath>
#include <numbers>

#include "cinp/error.hpp"

namespace cinp {

AdamState AdamState::for_params(const std::vector<Tensor>& params, double weight_decay) {
    AdamState state;
    state.weight_decay = weight_decay;
    for (const auto& p : params) {
        state.first_moment.emplace_back(p.numel(), 0.0);
        state.second_moment.emplace_back(p.numel(), 0.0);
    }
    return state;
}

void adam_step(std::vector<Tensor>& params, AdamState& state, double lr) {
    if (!(lr >= 0.0)) fail(ErrorCode::BadHyper, "learning rate must be non-negative");
    if (state.first_moment.size() != params.size() || state.second_moment.size() != params.size()) {
        fail(ErrorCode::ShapeMismatch, "optimizer state does not match the parameter set");
    }
    for (std::size_t k = 0; k < params.size(); ++k) {
        if (!params[k].has_grad()) {
            fail(ErrorCode::MissingGradient, "parameter " + std::to_string(k) + " has no gradient");
        }
        if (state.first_moment[k].size() != params[k].numel()) {
            fail(ErrorCode::ShapeMismatch, "moment buffer size mismatch for parameter " + std::to_string(k));
        }
    }

    state.step_count += 1;
    const double t = static_cast<double>(state.step_count);
    const double bc1 = 1.0 - std::pow(state.beta1, t);
    const double bc2 = 1.0 - std::pow(state.beta2, t);
    const double decay = 1.0 - lr * state.weight_decay;

    for (std::size_t k = 0; k < params.size(); ++k) {
        auto g = params[k].grad();
        auto p = params[k].mutable_data();
        auto& m = state.first_moment[k];
        auto& v = state.second_moment[k];
        for (std::size_t i = 0; i < p.size(); ++i) {
            m[i] = state.beta1 * m[i] + (1.0 - state.beta1) * g[i];
            v[i] = state.beta2 * v[i] + (1.0 - state.beta2) * g[i] * g[i];
            const double m_hat = m[i] / bc1;
            const double v_hat = v[i] / bc2;
            p[i] = p[i] * decay - lr * m_hat / (std::sqrt(v_hat) + state.epsilon);
        }
    }
}

double cosine_lr(std::uint64_t step, const LrSchedule& schedule) {
    if (schedule.total_steps == 0) fail(ErrorCode::BadHyper, "schedule needs total_steps > 0");
    if (step > schedule.total_steps) {
        fail(ErrorCode::StepOutOfRange,
             "step " + std::to_string(step) + " beyond total_steps " + std::to_string(schedule.total_steps));
    }
    if (step == schedule.total_steps) return schedule.lr_min;
    const double frac = static_cast<double>(step) / static_cast<double>(schedule.total_steps);
    return schedule.lr_min +
           0.5 * (schedule.lr_initial - schedule.lr_min) * (1.0 + std::cos(std::numbers::pi * frac));
}

}  // namespace cinp
