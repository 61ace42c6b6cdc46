#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace cinp {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

namespace detail {

struct Node {
    Shape shape;
    std::vector<double> data;
    std::vector<double> grad;
    bool requires_grad = false;
    std::vector<std::shared_ptr<Node>> parents;
    // Accumulates this node's grad into the grads of its parents.
    std::function<void(Node&)> backward;
};

}  // namespace detail

// Dense f64 tensor, row-major, participating in a define-by-run graph.
//
// A Tensor is a cheap shared handle. Tensors produced by ops are immutable;
// only leaves (no parents) may have their data rewritten, and only while no
// graph that reads them is being differentiated.
class Tensor {
public:
    Tensor() = default;
    Tensor(Shape shape, std::vector<double> data, bool requires_grad = false);

    static Tensor zeros(Shape shape, bool requires_grad = false);
    static Tensor full(Shape shape, double value, bool requires_grad = false);
    static Tensor scalar(double value, bool requires_grad = false);
    static Tensor matrix(std::size_t rows, std::size_t cols, std::vector<double> data,
                         bool requires_grad = false);

    bool defined() const { return static_cast<bool>(node_); }
    const Shape& shape() const;
    std::size_t rank() const { return shape().size(); }
    std::size_t numel() const;
    // Rank-2 extents; rank-1 tensors read as a single row.
    std::size_t rows() const;
    std::size_t cols() const;

    std::span<const double> data() const;
    double item() const;
    double at(std::size_t row, std::size_t col) const;

    bool requires_grad() const;
    bool has_grad() const;
    std::span<const double> grad() const;
    void zero_grad();
    void clear_grad();

    bool is_leaf() const;
    std::span<double> mutable_data();
    void set_data(std::span<const double> values);

    // Same values, no history.
    Tensor detach() const;

    // Overwrites the grad of every requires_grad tensor reachable from this one.
    void backward() const;

    bool same_node(const Tensor& other) const { return node_ == other.node_; }

private:
    explicit Tensor(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}
    friend Tensor make_result(Shape, std::vector<double>, std::vector<Tensor>,
                              std::function<void(detail::Node&)>);
    friend std::shared_ptr<detail::Node> node_of(const Tensor& t);

    std::shared_ptr<detail::Node> node_;
};

// Builds an op result. `backward` is dropped when no parent requires grad.
Tensor make_result(Shape shape, std::vector<double> data, std::vector<Tensor> parents,
                   std::function<void(detail::Node&)> backward);

void backward(const Tensor& loss);

// Elementwise binary ops. `b` may match `a`'s shape, hold one element
// (scalar broadcast), or be a 1 x cols row broadcast against rank-2 `a`.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor div(const Tensor& a, const Tensor& b);

Tensor scale(const Tensor& a, double factor);
Tensor neg(const Tensor& a);
Tensor exp(const Tensor& a);
Tensor log(const Tensor& a);
Tensor abs(const Tensor& a);
Tensor gelu(const Tensor& a);

// Full reductions to a one-element tensor of shape {1}.
Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);

// Rank-2 ops.
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);
Tensor softmax_rows(const Tensor& a);
Tensor log_softmax_rows(const Tensor& a);
Tensor l2_normalize_rows(const Tensor& a);
Tensor mean_rows(const Tensor& a);  // n x m -> 1 x m
Tensor layer_norm_rows(const Tensor& x, const Tensor& gain, const Tensor& bias,
                       double eps = 1e-5);
Tensor concat_rows(std::span<const Tensor> parts);
Tensor concat_cols(std::span<const Tensor> parts);
Tensor slice_cols(const Tensor& a, std::size_t start, std::size_t count);
Tensor index_rows(const Tensor& a, std::span<const std::size_t> rows);

// out.flat[i] = a.flat[index[i]]; backward scatter-adds. Covers reshape,
// permutations, and element picks.
Tensor gather(const Tensor& a, std::vector<std::size_t> index, Shape shape);
Tensor reshape(const Tensor& a, Shape shape);

// Kind-dispatched entry point for the primitive set.
enum class OpKind {
    Add, Sub, Mul, Scale, Matmul, Exp, Log, Sum, Mean, Abs,
    ConcatRows, SoftmaxRows, L2NormalizeRows, Transpose,
};
Tensor tensor_op(OpKind kind, std::span<const Tensor> inputs, double factor = 1.0);

}  // namespace cinp
