#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "odm/tensor.hpp"

namespace odm {

using NodeId = std::uint32_t;

enum class OpKind : std::uint8_t {
    leaf,
    add, sub, mul, div_,          // tensor (+) tensor, equal shapes
    add_s, sub_s, rsub_s,         // tensor (+) scalar, scalar - tensor
    mul_s, div_s,                 // tensor (*) scalar
    matmul,
    reduce_mean,
    select_row,                   // one row of a matrix, kept as [1 x n]
    concat_cols,                  // column-wise concat of two matrices
    sqrt_, tanh_, silu,
};

enum class EwOp { add, sub, mul, div };

/// One autograd graph node. Gradients live next to values and start at zero;
/// backward() accumulates into them.
struct Node {
    Tensor value;
    Tensor grad;
    OpKind op{OpKind::leaf};
    NodeId a{0};
    NodeId b{0};
    double scalar{0.0};
    std::size_t aux{0};  // select_row: row index; concat_cols: left width
};

/// Append-only computation tape. Node creation order is a topological order,
/// so backward is a reverse scan. Single-threaded by contract.
class Tape {
public:
    NodeId leaf(Tensor v);

    NodeId add(NodeId a, NodeId b);
    NodeId sub(NodeId a, NodeId b);
    NodeId mul(NodeId a, NodeId b);
    NodeId div(NodeId a, NodeId b);
    NodeId add(NodeId a, double s);
    NodeId sub(NodeId a, double s);
    NodeId sub(double s, NodeId a);
    NodeId mul(NodeId a, double s);
    NodeId div(NodeId a, double s);

    /// Dispatch form of the four binary ops.
    NodeId elementwise(EwOp op, NodeId a, NodeId b);
    NodeId elementwise(EwOp op, NodeId a, double s);

    NodeId matmul(NodeId a, NodeId b);
    NodeId reduce_mean(NodeId a);
    NodeId select_row(NodeId a, std::size_t row);
    NodeId concat_cols(NodeId a, NodeId b);
    NodeId sqrt(NodeId a);
    NodeId tanh(NodeId a);
    NodeId silu(NodeId a);

    /// Reverse-mode sweep from a scalar loss; accumulates into grads.
    void backward(NodeId loss);

    void zero_grad();
    void clear();
    void reserve(std::size_t nodes) { nodes_.reserve(nodes); }

    const Tensor& value(NodeId id) const { return nodes_[id].value; }
    const Tensor& grad(NodeId id) const { return nodes_[id].grad; }
    std::size_t size() const { return nodes_.size(); }

private:
    NodeId push(Node n);
    std::vector<Node> nodes_;
};

struct GradCheckEntry {
    std::size_t param;       // index into the params vector
    std::size_t elem;        // flat element index
    double analytic{0.0};
    double numeric{0.0};
    double abs_err{0.0};
    bool non_finite{false};
};

struct GradCheckReport {
    bool all_pass{true};
    std::size_t checked{0};
    std::vector<GradCheckEntry> failures;
};

/// Builds a scalar loss from leaves bound to the given parameter tensors.
using ScalarFn = std::function<NodeId(Tape&, const std::vector<NodeId>&)>;

/// Compares analytic gradients against central differences, one parameter
/// element at a time. An element passes when
///   |analytic - numeric| <= atol + rtol * max(|analytic|, |numeric|)
/// and both values are finite; non-finite evaluations are flagged.
GradCheckReport grad_check(const ScalarFn& f, const std::vector<Tensor>& params,
                           double h = 1e-5, double rtol = 1e-4, double atol = 1e-7);

}  // namespace odm
