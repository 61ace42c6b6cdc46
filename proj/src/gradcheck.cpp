#include "cinp/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "cinp/error.hpp"

namespace cinp {

double grad_check_leaf(const std::function<Tensor()>& loss, Tensor leaf, double h) {
    if (!(h > 0.0 && h <= 1e-3)) fail(ErrorCode::BadHyper, "grad_check step must lie in (0, 1e-3]");
    if (!leaf.is_leaf() || !leaf.requires_grad()) {
        fail(ErrorCode::MissingGradient, "grad_check needs a requires_grad leaf");
    }
    Tensor out = loss();
    if (out.numel() != 1) fail(ErrorCode::NonScalarLoss, "grad_check: f must be scalar-valued");
    leaf.clear_grad();
    out.backward();
    std::vector<double> analytic = leaf.has_grad() ? std::vector<double>(leaf.grad().begin(), leaf.grad().end())
                                                   : std::vector<double>(leaf.numel(), 0.0);

    auto data = leaf.mutable_data();
    double worst = 0.0;
    for (std::size_t i = 0; i < data.size(); ++i) {
        const double saved = data[i];
        data[i] = saved + h;
        const double up = loss().item();
        data[i] = saved - h;
        const double down = loss().item();
        data[i] = saved;
        const double fd = (up - down) / (2.0 * h);
        const double denom = std::max({1.0, std::abs(analytic[i]), std::abs(fd)});
        worst = std::max(worst, std::abs(analytic[i] - fd) / denom);
    }
    return worst;
}

double grad_check(const std::function<Tensor(const Tensor&)>& f, const Tensor& x, double h) {
    Tensor leaf(x.shape(), std::vector<double>(x.data().begin(), x.data().end()), true);
    return grad_check_leaf([&] { return f(leaf); }, leaf, h);
}

}  // namespace cinp
