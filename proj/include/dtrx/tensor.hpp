#pragma once

// Dense double-precision tensors and a tape-based reverse-mode autodiff
// engine. Only the operations the neural receiver needs are provided.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <span>
#include <vector>

namespace dtrx::ad {

using Shape = std::vector<std::size_t>;

/// Row-major tensor of rank 1..3.
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(Shape shape, double fill = 0.0);
    Tensor(Shape shape, std::vector<double> values);

    static Tensor scalar(double v) { return Tensor({1}, {v}); }
    static Tensor matrix(std::size_t rows, std::size_t cols, std::initializer_list<double> values);

    const Shape& shape() const noexcept { return shape_; }
    std::size_t rank() const noexcept { return shape_.size(); }
    std::size_t dim(std::size_t i) const { return shape_.at(i); }
    std::size_t size() const noexcept { return values_.size(); }
    bool empty() const noexcept { return values_.empty(); }

    /// Leading dimension, and the product of the remaining ones.
    std::size_t rows() const noexcept { return shape_.empty() ? 0 : shape_[0]; }
    std::size_t cols() const noexcept { return rows() == 0 ? 0 : values_.size() / rows(); }

    std::span<double> data() noexcept { return values_; }
    std::span<const double> data() const noexcept { return values_; }
    std::vector<double>& values() noexcept { return values_; }
    const std::vector<double>& values() const noexcept { return values_; }

    double& operator[](std::size_t i) { return values_[i]; }
    double operator[](std::size_t i) const { return values_[i]; }
    double& at(std::size_t r, std::size_t c) { return values_[r * cols() + c]; }
    double at(std::size_t r, std::size_t c) const { return values_[r * cols() + c]; }

    bool all_finite() const noexcept;
    void fill(double v);

    friend bool operator==(const Tensor&, const Tensor&) = default;

private:
    Shape shape_;
    std::vector<double> values_;
};

std::size_t shape_size(const Shape& shape);

using NodeId = std::uint32_t;

enum class Op : std::uint8_t {
    leaf,
    matmul,
    matmul_nt,
    add,
    sub,
    mul,
    scale,
    scale_by,
    add_bias,
    relu,
    sigmoid,
    softmax_rows,
    layer_norm,
    concat_cols,
    gather,
    sum,
    mean,
    bce_llr,
};

/// Gradients produced by Tape::backward, indexed by node id. Nodes the loss
/// does not depend on have no entry.
class GradientMap {
public:
    explicit GradientMap(std::vector<Tensor> grads) : grads_(std::move(grads)) {}
    bool has(NodeId id) const { return id < grads_.size() && !grads_[id].empty(); }
    const Tensor& operator[](NodeId id) const;

private:
    std::vector<Tensor> grads_;
};

/// Records forward operations in topological order. Parent ids always
/// precede child ids, so backward is a single reverse sweep.
class Tape {
public:
    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;
    Tape(Tape&&) = default;
    Tape& operator=(Tape&&) = default;

    /// Leaf owning its value.
    NodeId input(Tensor value);
    /// Leaf borrowing a value that must outlive the tape and stay unchanged.
    NodeId parameter(const Tensor& value);

    NodeId matmul(NodeId a, NodeId b);
    /// a * b^T
    NodeId matmul_nt(NodeId a, NodeId b);
    NodeId add(NodeId a, NodeId b);
    NodeId sub(NodeId a, NodeId b);
    /// Hadamard product.
    NodeId mul(NodeId a, NodeId b);
    NodeId scale(NodeId a, double factor);
    /// a * s for a learnable scalar s of shape [1].
    NodeId scale_by(NodeId a, NodeId s);
    /// a[N x M] + bias[M] added to every row.
    NodeId add_bias(NodeId a, NodeId bias);
    /// Subgradient at 0 is 0.
    NodeId relu(NodeId a);
    NodeId sigmoid(NodeId a);
    /// Row-wise softmax, stabilised by subtracting the row max.
    NodeId softmax_rows(NodeId a);
    NodeId layer_norm(NodeId a, NodeId gain, NodeId bias, double eps = 1e-5);
    /// Horizontal concatenation of matrices with equal row counts.
    NodeId concat_cols(std::span<const NodeId> parts);
    /// Flat rank-1 selection of a's values.
    NodeId gather(NodeId a, std::vector<std::size_t> flat_indices);
    NodeId sum(NodeId a);
    NodeId mean(NodeId a);
    /// Mean binary cross-entropy of LLRs (positive favours bit 0) against bits.
    NodeId bce_llr(NodeId llrs, std::span<const std::uint8_t> bits);

    const Tensor& value(NodeId id) const;
    Op op(NodeId id) const { return nodes_.at(id).op; }
    std::size_t size() const noexcept { return nodes_.size(); }

    /// Reverse sweep from a scalar loss node. Does not modify the tape.
    GradientMap backward(NodeId loss) const;

    /// Hash of every relu on/off pattern recorded so far. Two evaluations of
    /// the same graph with equal signatures lie on the same linear piece.
    std::uint64_t activation_signature() const noexcept { return relu_signature_; }

private:
    struct Node {
        Op op = Op::leaf;
        std::vector<NodeId> parents;
        Tensor value;
        const Tensor* borrowed = nullptr;
        Tensor saved;                     // layer_norm: normalised input
        Tensor saved_aux;                 // layer_norm: per-row inverse std
        std::vector<std::size_t> indices; // gather
        std::vector<std::uint8_t> bits;   // bce_llr
        double factor = 0.0;              // scale
        const Tensor& val() const { return borrowed ? *borrowed : value; }
    };

    NodeId push(Node node);
    const Node& node(NodeId id) const;

    std::vector<Node> nodes_;
    std::uint64_t relu_signature_ = 0xcbf29ce484222325ULL;
};

/// Builds a scalar loss on `tape` from leaves created for each input.
using LossBuilder = std::function<NodeId(Tape& tape, std::span<const NodeId> inputs)>;

struct GradCheckReport {
    double max_rel_error = 0.0;
    std::size_t probes = 0;
    /// Probes dropped because +step and -step evaluations crossed a relu kink.
    std::size_t kink_skips = 0;
};

/// Central-difference check of every input element. Relative error uses
/// max(|analytic|, |numeric|, 1e-8) as denominator.
GradCheckReport grad_check(const LossBuilder& f, const std::vector<Tensor>& inputs, double step = 1e-5);

/// Same check on `probes` randomly chosen elements: a tensor is drawn
/// uniformly, then an element within it.
GradCheckReport grad_check_sampled(const LossBuilder& f, const std::vector<Tensor>& inputs, double step,
                                   std::size_t probes, std::uint64_t seed);

} // namespace dtrx::ad
