#pragma once

#include <functional>

#include "cinp/tensor.hpp"

namespace cinp {

// Max over coordinates of |g_ad - g_fd| / max(1, |g_ad|, |g_fd|), with g_fd
// from central differences of step h.
double grad_check(const std::function<Tensor(const Tensor&)>& f, const Tensor& x, double h = 1e-6);

// Same measure against an existing leaf (typically a model parameter) that
// `loss` reads. The leaf's data is perturbed in place and restored.
double grad_check_leaf(const std::function<Tensor()>& loss, Tensor leaf, double h = 1e-6);

}  // namespace cinp
