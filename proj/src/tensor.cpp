#include "cinp/tensor.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <unordered_set>

#include "cinp/error.hpp"

namespace cinp {

namespace {

using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMajor>;
using MutMap = Eigen::Map<RowMajor>;

using Node = detail::Node;

void require_rank2(const Tensor& t, const char* op) {
    if (t.rank() != 2) {
        fail(ErrorCode::ShapeMismatch,
             std::string(op) + " requires a rank-2 tensor, got " + shape_str(t.shape()));
    }
}

// Grad buffers are sized by backward() before any closure runs.
inline std::vector<double>& grad_of(Node& n) { return n.grad; }

enum class Broadcast { Same, Scalar, Row };

Broadcast broadcast_kind(const Tensor& a, const Tensor& b, const char* op) {
    if (a.shape() == b.shape()) return Broadcast::Same;
    if (b.numel() == 1) return Broadcast::Scalar;
    if (a.rank() == 2 && b.rank() == 2 && b.shape()[0] == 1 && b.shape()[1] == a.shape()[1]) {
        return Broadcast::Row;
    }
    fail(ErrorCode::ShapeMismatch, std::string(op) + ": cannot broadcast " + shape_str(b.shape()) +
                                       " onto " + shape_str(a.shape()));
}

inline std::size_t bidx(Broadcast kind, std::size_t i, std::size_t cols) {
    switch (kind) {
        case Broadcast::Same: return i;
        case Broadcast::Scalar: return 0;
        case Broadcast::Row: return i % cols;
    }
    return i;
}

template <typename Fwd, typename DA, typename DB>
Tensor binary(const Tensor& a, const Tensor& b, const char* op, Fwd fwd, DA da, DB db) {
    const Broadcast kind = broadcast_kind(a, b, op);
    const std::size_t n = a.numel();
    const std::size_t cols = a.rank() == 2 ? a.shape()[1] : 1;
    auto ad = a.data();
    auto bd = b.data();
    std::vector<double> out(n);
    for (std::size_t i = 0; i < n; ++i) out[i] = fwd(ad[i], bd[bidx(kind, i, cols)]);
    return make_result(a.shape(), std::move(out), {a, b}, [=](Node& self) {
        Node& pa = *self.parents[0];
        Node& pb = *self.parents[1];
        const auto& g = self.grad;
        for (std::size_t i = 0; i < n; ++i) {
            const std::size_t j = bidx(kind, i, cols);
            const double x = pa.data[i];
            const double y = pb.data[j];
            if (pa.requires_grad) grad_of(pa)[i] += g[i] * da(x, y);
            if (pb.requires_grad) grad_of(pb)[j] += g[i] * db(x, y);
        }
    });
}

template <typename Fwd, typename Deriv>
Tensor unary(const Tensor& a, Fwd fwd, Deriv deriv) {
    const std::size_t n = a.numel();
    auto ad = a.data();
    std::vector<double> out(n);
    for (std::size_t i = 0; i < n; ++i) out[i] = fwd(ad[i]);
    return make_result(a.shape(), std::move(out), {a}, [=](Node& self) {
        Node& p = *self.parents[0];
        for (std::size_t i = 0; i < n; ++i) {
            p.grad[i] += self.grad[i] * deriv(p.data[i], self.data[i]);
        }
    });
}

}  // namespace

std::size_t shape_numel(const Shape& shape) {
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_str(const Shape& shape) {
    std::string s = "[";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) s += "x";
        s += std::to_string(shape[i]);
    }
    return s + "]";
}

std::shared_ptr<Node> node_of(const Tensor& t) { return t.node_; }

Tensor::Tensor(Shape shape, std::vector<double> data, bool requires_grad) {
    if (shape.empty()) fail(ErrorCode::ShapeMismatch, "tensor shape must have at least one extent");
    for (std::size_t e : shape) {
        if (e == 0) fail(ErrorCode::ShapeMismatch, "tensor extents must be positive: " + shape_str(shape));
    }
    if (shape_numel(shape) != data.size()) {
        fail(ErrorCode::ShapeMismatch, "data length " + std::to_string(data.size()) +
                                           " does not match shape " + shape_str(shape));
    }
    node_ = std::make_shared<Node>();
    node_->shape = std::move(shape);
    node_->data = std::move(data);
    node_->requires_grad = requires_grad;
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) { return full(std::move(shape), 0.0, requires_grad); }

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
    const std::size_t n = shape_numel(shape);
    return Tensor(std::move(shape), std::vector<double>(n, value), requires_grad);
}

Tensor Tensor::scalar(double value, bool requires_grad) { return Tensor({1}, {value}, requires_grad); }

Tensor Tensor::matrix(std::size_t rows, std::size_t cols, std::vector<double> data, bool requires_grad) {
    return Tensor({rows, cols}, std::move(data), requires_grad);
}

const Shape& Tensor::shape() const { return node_->shape; }
std::size_t Tensor::numel() const { return node_->data.size(); }

std::size_t Tensor::rows() const { return rank() == 2 ? shape()[0] : 1; }
std::size_t Tensor::cols() const { return rank() == 2 ? shape()[1] : numel(); }

std::span<const double> Tensor::data() const { return node_->data; }

double Tensor::item() const {
    if (numel() != 1) fail(ErrorCode::NonScalarLoss, "item() on tensor of shape " + shape_str(shape()));
    return node_->data[0];
}

double Tensor::at(std::size_t row, std::size_t col) const { return node_->data[row * cols() + col]; }

bool Tensor::requires_grad() const { return node_->requires_grad; }
bool Tensor::has_grad() const { return node_->grad.size() == node_->data.size(); }
std::span<const double> Tensor::grad() const { return node_->grad; }
void Tensor::zero_grad() { node_->grad.assign(node_->data.size(), 0.0); }
void Tensor::clear_grad() { node_->grad.clear(); }

bool Tensor::is_leaf() const { return node_->parents.empty(); }

std::span<double> Tensor::mutable_data() {
    if (!is_leaf()) fail(ErrorCode::ShapeMismatch, "only leaf tensors may be mutated");
    return node_->data;
}

void Tensor::set_data(std::span<const double> values) {
    auto dst = mutable_data();
    if (values.size() != dst.size()) {
        fail(ErrorCode::ShapeMismatch, "set_data length mismatch for " + shape_str(shape()));
    }
    std::copy(values.begin(), values.end(), dst.begin());
}

Tensor Tensor::detach() const { return Tensor(shape(), node_->data, false); }

void Tensor::backward() const { cinp::backward(*this); }

Tensor make_result(Shape shape, std::vector<double> data, std::vector<Tensor> parents,
                   std::function<void(Node&)> bwd) {
    auto node = std::make_shared<Node>();
    node->shape = std::move(shape);
    node->data = std::move(data);
    const bool any = std::any_of(parents.begin(), parents.end(),
                                 [](const Tensor& p) { return p.requires_grad(); });
    if (any) {
        node->requires_grad = true;
        node->parents.reserve(parents.size());
        for (auto& p : parents) node->parents.push_back(p.node_);
        node->backward = std::move(bwd);
    }
    return Tensor(std::move(node));
}

void backward(const Tensor& loss) {
    if (!loss.defined() || loss.numel() != 1) {
        fail(ErrorCode::NonScalarLoss,
             "backward needs a one-element loss, got " + (loss.defined() ? shape_str(loss.shape()) : "undefined"));
    }
    auto root = node_of(loss);
    if (!root->requires_grad) return;

    // Iterative post-order DFS; reversed it is a valid topological order.
    std::vector<Node*> order;
    std::unordered_set<Node*> seen;
    std::vector<std::pair<Node*, std::size_t>> stack{{root.get(), 0}};
    seen.insert(root.get());
    while (!stack.empty()) {
        auto& [node, next] = stack.back();
        if (next < node->parents.size()) {
            Node* p = node->parents[next++].get();
            if (p->requires_grad && seen.insert(p).second) stack.emplace_back(p, 0);
        } else {
            order.push_back(node);
            stack.pop_back();
        }
    }
    for (Node* n : order) n->grad.assign(n->data.size(), 0.0);
    root->grad[0] = 1.0;
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        if ((*it)->backward) (*it)->backward(**it);
    }
}

Tensor add(const Tensor& a, const Tensor& b) {
    return binary(a, b, "add", [](double x, double y) { return x + y; },
                  [](double, double) { return 1.0; }, [](double, double) { return 1.0; });
}

Tensor sub(const Tensor& a, const Tensor& b) {
    return binary(a, b, "sub", [](double x, double y) { return x - y; },
                  [](double, double) { return 1.0; }, [](double, double) { return -1.0; });
}

Tensor mul(const Tensor& a, const Tensor& b) {
    return binary(a, b, "mul", [](double x, double y) { return x * y; },
                  [](double, double y) { return y; }, [](double x, double) { return x; });
}

Tensor div(const Tensor& a, const Tensor& b) {
    return binary(a, b, "div", [](double x, double y) { return x / y; },
                  [](double, double y) { return 1.0 / y; },
                  [](double x, double y) { return -x / (y * y); });
}

Tensor scale(const Tensor& a, double factor) {
    return unary(a, [factor](double x) { return factor * x; },
                 [factor](double, double) { return factor; });
}

Tensor neg(const Tensor& a) { return scale(a, -1.0); }

Tensor exp(const Tensor& a) {
    return unary(a, [](double x) { return std::exp(x); }, [](double, double y) { return y; });
}

Tensor log(const Tensor& a) {
    return unary(a, [](double x) { return std::log(x); }, [](double x, double) { return 1.0 / x; });
}

Tensor abs(const Tensor& a) {
    return unary(a, [](double x) { return std::abs(x); },
                 [](double x, double) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); });
}

Tensor gelu(const Tensor& a) {
    constexpr double inv_sqrt2 = 0.70710678118654752440;
    const double inv_sqrt_2pi = 1.0 / std::sqrt(2.0 * std::numbers::pi);
    return unary(
        a, [](double x) { return 0.5 * x * (1.0 + std::erf(x * inv_sqrt2)); },
        [inv_sqrt_2pi](double x, double) {
            const double cdf = 0.5 * (1.0 + std::erf(x * inv_sqrt2));
            return cdf + x * inv_sqrt_2pi * std::exp(-0.5 * x * x);
        });
}

Tensor sum(const Tensor& a) {
    auto d = a.data();
    const double s = std::accumulate(d.begin(), d.end(), 0.0);
    return make_result({1}, {s}, {a}, [](Node& self) {
        Node& p = *self.parents[0];
        for (double& g : p.grad) g += self.grad[0];
    });
}

Tensor mean(const Tensor& a) {
    auto d = a.data();
    const double inv = 1.0 / static_cast<double>(d.size());
    const double s = std::accumulate(d.begin(), d.end(), 0.0) * inv;
    return make_result({1}, {s}, {a}, [inv](Node& self) {
        Node& p = *self.parents[0];
        for (double& g : p.grad) g += self.grad[0] * inv;
    });
}

Tensor matmul(const Tensor& a, const Tensor& b) {
    require_rank2(a, "matmul");
    require_rank2(b, "matmul");
    const std::size_t m = a.shape()[0], k = a.shape()[1], n = b.shape()[1];
    if (b.shape()[0] != k) {
        fail(ErrorCode::ShapeMismatch, "matmul " + shape_str(a.shape()) + " x " + shape_str(b.shape()));
    }
    std::vector<double> out(m * n);
    MutMap(out.data(), m, n).noalias() = ConstMap(a.data().data(), m, k) * ConstMap(b.data().data(), k, n);
    return make_result({m, n}, std::move(out), {a, b}, [m, k, n](Node& self) {
        Node& pa = *self.parents[0];
        Node& pb = *self.parents[1];
        ConstMap g(self.grad.data(), m, n);
        if (pa.requires_grad) {
            MutMap(pa.grad.data(), m, k).noalias() += g * ConstMap(pb.data.data(), k, n).transpose();
        }
        if (pb.requires_grad) {
            MutMap(pb.grad.data(), k, n).noalias() += ConstMap(pa.data.data(), m, k).transpose() * g;
        }
    });
}

Tensor transpose(const Tensor& a) {
    require_rank2(a, "transpose");
    const std::size_t m = a.shape()[0], n = a.shape()[1];
    std::vector<double> out(m * n);
    MutMap(out.data(), n, m) = ConstMap(a.data().data(), m, n).transpose();
    return make_result({n, m}, std::move(out), {a}, [m, n](Node& self) {
        Node& p = *self.parents[0];
        MutMap(p.grad.data(), m, n) += ConstMap(self.grad.data(), n, m).transpose();
    });
}

Tensor softmax_rows(const Tensor& a) {
    require_rank2(a, "softmax_rows");
    const std::size_t m = a.shape()[0], n = a.shape()[1];
    auto x = a.data();
    std::vector<double> out(m * n);
    for (std::size_t i = 0; i < m; ++i) {
        const double* row = x.data() + i * n;
        double* y = out.data() + i * n;
        const double mx = *std::max_element(row, row + n);
        double z = 0.0;
        for (std::size_t j = 0; j < n; ++j) z += (y[j] = std::exp(row[j] - mx));
        for (std::size_t j = 0; j < n; ++j) y[j] /= z;
    }
    return make_result(a.shape(), std::move(out), {a}, [m, n](Node& self) {
        Node& p = *self.parents[0];
        for (std::size_t i = 0; i < m; ++i) {
            const double* y = self.data.data() + i * n;
            const double* g = self.grad.data() + i * n;
            double dot = 0.0;
            for (std::size_t j = 0; j < n; ++j) dot += g[j] * y[j];
            for (std::size_t j = 0; j < n; ++j) p.grad[i * n + j] += y[j] * (g[j] - dot);
        }
    });
}

Tensor log_softmax_rows(const Tensor& a) {
    require_rank2(a, "log_softmax_rows");
    const std::size_t m = a.shape()[0], n = a.shape()[1];
    auto x = a.data();
    std::vector<double> out(m * n);
    for (std::size_t i = 0; i < m; ++i) {
        const double* row = x.data() + i * n;
        const double mx = *std::max_element(row, row + n);
        double z = 0.0;
        for (std::size_t j = 0; j < n; ++j) z += std::exp(row[j] - mx);
        const double lse = mx + std::log(z);
        for (std::size_t j = 0; j < n; ++j) out[i * n + j] = row[j] - lse;
    }
    return make_result(a.shape(), std::move(out), {a}, [m, n](Node& self) {
        Node& p = *self.parents[0];
        for (std::size_t i = 0; i < m; ++i) {
            const double* y = self.data.data() + i * n;
            const double* g = self.grad.data() + i * n;
            const double gs = std::accumulate(g, g + n, 0.0);
            for (std::size_t j = 0; j < n; ++j) p.grad[i * n + j] += g[j] - std::exp(y[j]) * gs;
        }
    });
}

Tensor l2_normalize_rows(const Tensor& a) {
    require_rank2(a, "l2_normalize_rows");
    const std::size_t m = a.shape()[0], n = a.shape()[1];
    auto x = a.data();
    std::vector<double> out(m * n);
    std::vector<double> norms(m);
    for (std::size_t i = 0; i < m; ++i) {
        const double* row = x.data() + i * n;
        double ss = 0.0;
        for (std::size_t j = 0; j < n; ++j) ss += row[j] * row[j];
        if (ss == 0.0) fail(ErrorCode::ZeroNorm, "l2_normalize_rows: row " + std::to_string(i) + " is all zero");
        norms[i] = std::sqrt(ss);
        for (std::size_t j = 0; j < n; ++j) out[i * n + j] = row[j] / norms[i];
    }
    return make_result(a.shape(), std::move(out), {a}, [m, n, norms = std::move(norms)](Node& self) {
        Node& p = *self.parents[0];
        for (std::size_t i = 0; i < m; ++i) {
            const double* y = self.data.data() + i * n;
            const double* g = self.grad.data() + i * n;
            double dot = 0.0;
            for (std::size_t j = 0; j < n; ++j) dot += g[j] * y[j];
            for (std::size_t j = 0; j < n; ++j) p.grad[i * n + j] += (g[j] - y[j] * dot) / norms[i];
        }
    });
}

Tensor mean_rows(const Tensor& a) {
    require_rank2(a, "mean_rows");
    const std::size_t m = a.shape()[0], n = a.shape()[1];
    std::vector<double> out(n);
    MutMap(out.data(), 1, n) = ConstMap(a.data().data(), m, n).colwise().mean();
    return make_result({1, n}, std::move(out), {a}, [m, n](Node& self) {
        Node& p = *self.parents[0];
        const double inv = 1.0 / static_cast<double>(m);
        for (std::size_t i = 0; i < m; ++i) {
            for (std::size_t j = 0; j < n; ++j) p.grad[i * n + j] += self.grad[j] * inv;
        }
    });
}

Tensor layer_norm_rows(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps) {
    require_rank2(x, "layer_norm_rows");
    const std::size_t m = x.shape()[0], n = x.shape()[1];
    if (gain.numel() != n || bias.numel() != n) {
        fail(ErrorCode::ShapeMismatch, "layer_norm_rows: gain/bias must have " + std::to_string(n) + " entries");
    }
    auto xd = x.data();
    auto gd = gain.data();
    auto bd = bias.data();
    std::vector<double> out(m * n), xhat(m * n), inv_std(m);
    for (std::size_t i = 0; i < m; ++i) {
        const double* row = xd.data() + i * n;
        const double mu = std::accumulate(row, row + n, 0.0) / static_cast<double>(n);
        double var = 0.0;
        for (std::size_t j = 0; j < n; ++j) var += (row[j] - mu) * (row[j] - mu);
        var /= static_cast<double>(n);
        inv_std[i] = 1.0 / std::sqrt(var + eps);
        for (std::size_t j = 0; j < n; ++j) {
            xhat[i * n + j] = (row[j] - mu) * inv_std[i];
            out[i * n + j] = xhat[i * n + j] * gd[j] + bd[j];
        }
    }
    return make_result(
        x.shape(), std::move(out), {x, gain, bias},
        [m, n, xhat = std::move(xhat), inv_std = std::move(inv_std)](Node& self) {
            Node& px = *self.parents[0];
            Node& pg = *self.parents[1];
            Node& pb = *self.parents[2];
            std::vector<double> dxhat(n);
            for (std::size_t i = 0; i < m; ++i) {
                const double* g = self.grad.data() + i * n;
                const double* xh = xhat.data() + i * n;
                if (pg.requires_grad) {
                    for (std::size_t j = 0; j < n; ++j) pg.grad[j] += g[j] * xh[j];
                }
                if (pb.requires_grad) {
                    for (std::size_t j = 0; j < n; ++j) pb.grad[j] += g[j];
                }
                if (!px.requires_grad) continue;
                double mean_d = 0.0, mean_dx = 0.0;
                for (std::size_t j = 0; j < n; ++j) {
                    dxhat[j] = g[j] * pg.data[j];
                    mean_d += dxhat[j];
                    mean_dx += dxhat[j] * xh[j];
                }
                mean_d /= static_cast<double>(n);
                mean_dx /= static_cast<double>(n);
                for (std::size_t j = 0; j < n; ++j) {
                    px.grad[i * n + j] += inv_std[i] * (dxhat[j] - mean_d - xh[j] * mean_dx);
                }
            }
        });
}

Tensor concat_rows(std::span<const Tensor> parts) {
    if (parts.empty()) fail(ErrorCode::ShapeMismatch, "concat_rows of nothing");
    const std::size_t n = parts[0].cols();
    std::size_t m = 0;
    for (const auto& p : parts) {
        if (p.cols() != n) fail(ErrorCode::ShapeMismatch, "concat_rows: column count mismatch");
        m += p.rows();
    }
    std::vector<double> out;
    out.reserve(m * n);
    for (const auto& p : parts) out.insert(out.end(), p.data().begin(), p.data().end());
    return make_result({m, n}, std::move(out), {parts.begin(), parts.end()}, [](Node& self) {
        std::size_t offset = 0;
        for (auto& p : self.parents) {
            const std::size_t len = p->data.size();
            if (p->requires_grad) {
                for (std::size_t i = 0; i < len; ++i) p->grad[i] += self.grad[offset + i];
            }
            offset += len;
        }
    });
}

Tensor concat_cols(std::span<const Tensor> parts) {
    if (parts.empty()) fail(ErrorCode::ShapeMismatch, "concat_cols of nothing");
    const std::size_t m = parts[0].rows();
    std::size_t n = 0;
    std::vector<std::size_t> widths;
    for (const auto& p : parts) {
        if (p.rows() != m) fail(ErrorCode::ShapeMismatch, "concat_cols: row count mismatch");
        widths.push_back(p.cols());
        n += p.cols();
    }
    std::vector<double> out(m * n);
    std::size_t c0 = 0;
    for (std::size_t k = 0; k < parts.size(); ++k) {
        auto d = parts[k].data();
        for (std::size_t i = 0; i < m; ++i) {
            std::copy_n(d.data() + i * widths[k], widths[k], out.data() + i * n + c0);
        }
        c0 += widths[k];
    }
    return make_result({m, n}, std::move(out), {parts.begin(), parts.end()},
                       [m, n, widths = std::move(widths)](Node& self) {
                           std::size_t c = 0;
                           for (std::size_t k = 0; k < self.parents.size(); ++k) {
                               Node& p = *self.parents[k];
                               const std::size_t w = widths[k];
                               if (p.requires_grad) {
                                   for (std::size_t i = 0; i < m; ++i) {
                                       for (std::size_t j = 0; j < w; ++j) {
                                           p.grad[i * w + j] += self.grad[i * n + c + j];
                                       }
                                   }
                               }
                               c += w;
                           }
                       });
}

Tensor slice_cols(const Tensor& a, std::size_t start, std::size_t count) {
    require_rank2(a, "slice_cols");
    const std::size_t m = a.shape()[0], n = a.shape()[1];
    if (count == 0 || start + count > n) {
        fail(ErrorCode::ShapeMismatch, "slice_cols out of range for " + shape_str(a.shape()));
    }
    auto d = a.data();
    std::vector<double> out(m * count);
    for (std::size_t i = 0; i < m; ++i) std::copy_n(d.data() + i * n + start, count, out.data() + i * count);
    return make_result({m, count}, std::move(out), {a}, [m, n, start, count](Node& self) {
        Node& p = *self.parents[0];
        for (std::size_t i = 0; i < m; ++i) {
            for (std::size_t j = 0; j < count; ++j) p.grad[i * n + start + j] += self.grad[i * count + j];
        }
    });
}

Tensor index_rows(const Tensor& a, std::span<const std::size_t> rows) {
    require_rank2(a, "index_rows");
    const std::size_t m = a.shape()[0], n = a.shape()[1];
    if (rows.empty()) fail(ErrorCode::ShapeMismatch, "index_rows with no rows");
    std::vector<std::size_t> sel(rows.begin(), rows.end());
    for (std::size_t r : sel) {
        if (r >= m) fail(ErrorCode::ShapeMismatch, "index_rows: row " + std::to_string(r) + " out of range");
    }
    auto d = a.data();
    std::vector<double> out(sel.size() * n);
    for (std::size_t i = 0; i < sel.size(); ++i) std::copy_n(d.data() + sel[i] * n, n, out.data() + i * n);
    const std::size_t k = sel.size();
    return make_result({k, n}, std::move(out), {a}, [n, sel = std::move(sel)](Node& self) {
        Node& p = *self.parents[0];
        for (std::size_t i = 0; i < sel.size(); ++i) {
            for (std::size_t j = 0; j < n; ++j) p.grad[sel[i] * n + j] += self.grad[i * n + j];
        }
    });
}

Tensor gather(const Tensor& a, std::vector<std::size_t> index, Shape shape) {
    if (shape_numel(shape) != index.size()) {
        fail(ErrorCode::ShapeMismatch, "gather: index length does not match " + shape_str(shape));
    }
    auto d = a.data();
    std::vector<double> out(index.size());
    for (std::size_t i = 0; i < index.size(); ++i) {
        if (index[i] >= d.size()) fail(ErrorCode::ShapeMismatch, "gather: index out of range");
        out[i] = d[index[i]];
    }
    return make_result(std::move(shape), std::move(out), {a}, [index = std::move(index)](Node& self) {
        Node& p = *self.parents[0];
        for (std::size_t i = 0; i < index.size(); ++i) p.grad[index[i]] += self.grad[i];
    });
}

Tensor reshape(const Tensor& a, Shape shape) {
    if (shape_numel(shape) != a.numel()) {
        fail(ErrorCode::ShapeMismatch, "reshape " + shape_str(a.shape()) + " -> " + shape_str(shape));
    }
    std::vector<double> out(a.data().begin(), a.data().end());
    return make_result(std::move(shape), std::move(out), {a}, [](Node& self) {
        Node& p = *self.parents[0];
        for (std::size_t i = 0; i < p.grad.size(); ++i) p.grad[i] += self.grad[i];
    });
}

Tensor tensor_op(OpKind kind, std::span<const Tensor> inputs, double factor) {
    auto need = [&](std::size_t n) {
        if (inputs.size() != n) fail(ErrorCode::ShapeMismatch, "tensor_op: wrong number of inputs");
    };
    switch (kind) {
        case OpKind::Add: need(2); return add(inputs[0], inputs[1]);
        case OpKind::Sub: need(2); return sub(inputs[0], inputs[1]);
        case OpKind::Mul: need(2); return mul(inputs[0], inputs[1]);
        case OpKind::Scale: need(1); return scale(inputs[0], factor);
        case OpKind::Matmul: need(2); return matmul(inputs[0], inputs[1]);
        case OpKind::Exp: need(1); return exp(inputs[0]);
        case OpKind::Log: need(1); return log(inputs[0]);
        case OpKind::Sum: need(1); return sum(inputs[0]);
        case OpKind::Mean: need(1); return mean(inputs[0]);
        case OpKind::Abs: need(1); return abs(inputs[0]);
        case OpKind::ConcatRows: return concat_rows(inputs);
        case OpKind::SoftmaxRows: need(1); return softmax_rows(inputs[0]);
        case OpKind::L2NormalizeRows: need(1); return l2_normalize_rows(inputs[0]);
        case OpKind::Transpose: need(1); return transpose(inputs[0]);
    }
    fail(ErrorCode::ShapeMismatch, "tensor_op: unknown kind");
}

}  // namespace cinp
