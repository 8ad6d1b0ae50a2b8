#pragma once

// Differentiable computation graph over dense 2-D arrays.
//
// Every gradient produced by Tape::grad is itself a node on the same tape, so
// a loss that depends on parameters produced by gradient steps can be
// differentiated again (second-order meta-gradients). Nodes are evaluated
// lazily and memoized.

#include <Eigen/Dense>

#include <compare>
#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace fieldmeta::graph {

struct NodeId {
    std::uint32_t index = 0;
    friend constexpr auto operator<=>(NodeId, NodeId) = default;
};

struct Shape {
    Eigen::Index rows = 1;
    Eigen::Index cols = 1;

    constexpr Eigen::Index size() const { return rows * cols; }
    constexpr bool is_scalar() const { return rows == 1 && cols == 1; }
    friend constexpr bool operator==(Shape, Shape) = default;
};

std::string to_string(Shape s);

enum class Op : std::uint8_t {
    constant,
    parameter,
    add,
    sub,
    mul,
    matmul,
    transpose,
    sine,
    cosine,
    sigmoid,
    relu,
    step,  // Heaviside, zero derivative everywhere
    square,
    sum,
    mean,
    scale,
    broadcast,
    sum_to,
    reshape,  // row-major reinterpretation
    concat,   // along columns
    slice,    // column range
    pad,      // inverse of slice
    norm2,
    reciprocal,  // 1/x, defined as 0 at x == 0
    stop_gradient,
};

std::string_view op_name(Op op);

/// Raised when an operation is applied to inputs of incompatible shapes.
class ShapeError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

template <class Real>
class Tape {
public:
    using Array = Eigen::Matrix<Real, Eigen::Dynamic, Eigen::Dynamic>;

    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;
    Tape(Tape&&) noexcept = default;
    Tape& operator=(Tape&&) noexcept = default;

    NodeId constant(Array value);
    NodeId zeros(Shape shape);
    NodeId ones(Shape shape);
    /// A differentiable leaf; recorded in roots().
    NodeId parameter(Array value);

    NodeId add(NodeId a, NodeId b);
    NodeId sub(NodeId a, NodeId b);
    NodeId mul(NodeId a, NodeId b);
    NodeId matmul(NodeId a, NodeId b);
    NodeId transpose(NodeId a);
    NodeId sine(NodeId a);
    NodeId cosine(NodeId a);
    NodeId sigmoid(NodeId a);
    NodeId relu(NodeId a);
    NodeId step(NodeId a);
    NodeId square(NodeId a);
    NodeId sum(NodeId a);
    NodeId mean(NodeId a);
    NodeId scale(NodeId a, Real factor);
    NodeId broadcast(NodeId a, Shape to);
    NodeId sum_to(NodeId a, Shape to);
    NodeId reshape(NodeId a, Shape to);
    NodeId concat(std::span<const NodeId> parts);
    NodeId slice(NodeId a, Eigen::Index col_offset, Eigen::Index width);
    NodeId pad(NodeId a, Eigen::Index col_offset, Eigen::Index total_width);
    NodeId norm2(NodeId a);
    NodeId reciprocal(NodeId a);
    NodeId stop_gradient(NodeId a);

    /// Multiplies every element of `a` by the 1x1 node `s`.
    NodeId mul_scalar(NodeId s, NodeId a);

    const Array& evaluate(NodeId node);

    /// Gradient nodes of `scalar` with respect to each node in `wrt`.
    ///
    /// Contributions to an adjoint are summed in ascending order of the
    /// consuming node's id. A wrt node that `scalar` does not depend on
    /// receives a zero constant of matching shape.
    std::vector<NodeId> grad(NodeId scalar, std::span<const NodeId> wrt);

    Shape shape(NodeId node) const { return at(node).shape; }
    Op op(NodeId node) const { return at(node).op; }
    std::span<const NodeId> inputs(NodeId node) const { return at(node).inputs; }
    bool evaluated(NodeId node) const { return at(node).evaluated; }

    std::size_t size() const { return nodes_.size(); }
    /// Total number of array elements across all nodes; the memory proxy.
    std::size_t element_count() const { return elements_; }
    std::span<const NodeId> roots() const { return roots_; }

private:
    struct Node {
        Op op = Op::constant;
        Shape shape;
        std::vector<NodeId> inputs;
        Real factor = Real(1);
        Eigen::Index offset = 0;
        bool evaluated = false;
        Array value;
    };

    static Node make_node(Op op, Shape shape, std::vector<NodeId> inputs) {
        Node n;
        n.op = op;
        n.shape = shape;
        n.inputs = std::move(inputs);
        return n;
    }

    const Node& at(NodeId id) const;
    NodeId push(Node node);
    NodeId unary(Op op, NodeId a, Shape out);
    void compute(Node& node);
    void vjp(NodeId id, NodeId adjoint, std::vector<std::vector<NodeId>>& contributions,
             const std::vector<char>& depends);

    std::vector<Node> nodes_;
    std::vector<NodeId> roots_;
    std::size_t elements_ = 0;
};

extern template class Tape<float>;
extern template class Tape<double>;

}  // namespace fieldmeta::graph
