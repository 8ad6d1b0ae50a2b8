#include "fieldmeta/graph.hpp"

#include <algorithm>
#include <cmath>
#include <utility>

namespace fieldmeta::graph {

std::string to_string(Shape s) {
    return "[" + std::to_string(s.rows) + "x" + std::to_string(s.cols) + "]";
}

std::string_view op_name(Op op) {
    switch (op) {
    case Op::constant: return "constant";
    case Op::parameter: return "parameter";
    case Op::add: return "add";
    case Op::sub: return "sub";
    case Op::mul: return "mul";
    case Op::matmul: return "matmul";
    case Op::transpose: return "transpose";
    case Op::sine: return "sine";
    case Op::cosine: return "cosine";
    case Op::sigmoid: return "sigmoid";
    case Op::relu: return "relu";
    case Op::step: return "step";
    case Op::square: return "square";
    case Op::sum: return "sum";
    case Op::mean: return "mean";
    case Op::scale: return "scale";
    case Op::broadcast: return "broadcast";
    case Op::sum_to: return "sum_to";
    case Op::reshape: return "reshape";
    case Op::concat: return "concat";
    case Op::slice: return "slice";
    case Op::pad: return "pad";
    case Op::norm2: return "norm2";
    case Op::reciprocal: return "reciprocal";
    case Op::stop_gradient: return "stop_gradient";
    }
    return "unknown";
}

namespace {

std::string describe(NodeId id, Shape s) {
    return "node " + std::to_string(id.index) + " " + to_string(s);
}

[[noreturn]] void shape_error(std::string_view what, NodeId a, Shape sa, NodeId b, Shape sb) {
    throw ShapeError(std::string(what) + ": " + describe(a, sa) + " vs " + describe(b, sb));
}

bool broadcastable(Shape from, Shape to) {
    return (from.rows == 1 || from.rows == to.rows) && (from.cols == 1 || from.cols == to.cols);
}

}  // namespace

template <class Real>
auto Tape<Real>::at(NodeId id) const -> const Node& {
    if (id.index >= nodes_.size()) {
        throw std::out_of_range("node " + std::to_string(id.index) + " is not on this tape");
    }
    return nodes_[id.index];
}

template <class Real>
NodeId Tape<Real>::push(Node node) {
    elements_ += static_cast<std::size_t>(node.shape.size());
    nodes_.push_back(std::move(node));
    return NodeId{static_cast<std::uint32_t>(nodes_.size() - 1)};
}

template <class Real>
NodeId Tape<Real>::unary(Op op, NodeId a, Shape out) {
    at(a);
    Node n;
    n.op = op;
    n.shape = out;
    n.inputs = {a};
    return push(std::move(n));
}

template <class Real>
NodeId Tape<Real>::constant(Array value) {
    Node n;
    n.op = Op::constant;
    n.shape = {value.rows(), value.cols()};
    n.value = std::move(value);
    n.evaluated = true;
    return push(std::move(n));
}

template <class Real>
NodeId Tape<Real>::zeros(Shape shape) {
    return constant(Array::Zero(shape.rows, shape.cols));
}

template <class Real>
NodeId Tape<Real>::ones(Shape shape) {
    return constant(Array::Ones(shape.rows, shape.cols));
}

template <class Real>
NodeId Tape<Real>::parameter(Array value) {
    Node n;
    n.op = Op::parameter;
    n.shape = {value.rows(), value.cols()};
    n.value = std::move(value);
    n.evaluated = true;
    const NodeId id = push(std::move(n));
    roots_.push_back(id);
    return id;
}

template <class Real>
NodeId Tape<Real>::add(NodeId a, NodeId b) {
    if (shape(a) != shape(b)) shape_error("add", a, shape(a), b, shape(b));
    Node n = make_node(Op::add, shape(a), {a, b});
    return push(std::move(n));
}

template <class Real>
NodeId Tape<Real>::sub(NodeId a, NodeId b) {
    if (shape(a) != shape(b)) shape_error("sub", a, shape(a), b, shape(b));
    Node n = make_node(Op::sub, shape(a), {a, b});
    return push(std::move(n));
}

template <class Real>
NodeId Tape<Real>::mul(NodeId a, NodeId b) {
    if (shape(a) != shape(b)) shape_error("mul", a, shape(a), b, shape(b));
    Node n = make_node(Op::mul, shape(a), {a, b});
    return push(std::move(n));
}

template <class Real>
NodeId Tape<Real>::matmul(NodeId a, NodeId b) {
    const Shape sa = shape(a);
    const Shape sb = shape(b);
    if (sa.cols != sb.rows) shape_error("matmul", a, sa, b, sb);
    Node n = make_node(Op::matmul, {sa.rows, sb.cols}, {a, b});
    return push(std::move(n));
}

template <class Real>
NodeId Tape<Real>::transpose(NodeId a) {
    const Shape s = shape(a);
    return unary(Op::transpose, a, {s.cols, s.rows});
}

template <class Real>
NodeId Tape<Real>::sine(NodeId a) { return unary(Op::sine, a, shape(a)); }

template <class Real>
NodeId Tape<Real>::cosine(NodeId a) { return unary(Op::cosine, a, shape(a)); }

template <class Real>
NodeId Tape<Real>::sigmoid(NodeId a) { return unary(Op::sigmoid, a, shape(a)); }

template <class Real>
NodeId Tape<Real>::relu(NodeId a) { return unary(Op::relu, a, shape(a)); }

template <class Real>
NodeId Tape<Real>::step(NodeId a) { return unary(Op::step, a, shape(a)); }

template <class Real>
NodeId Tape<Real>::square(NodeId a) { return unary(Op::square, a, shape(a)); }

template <class Real>
NodeId Tape<Real>::sum(NodeId a) { return unary(Op::sum, a, {1, 1}); }

template <class Real>
NodeId Tape<Real>::mean(NodeId a) { return unary(Op::mean, a, {1, 1}); }

template <class Real>
NodeId Tape<Real>::scale(NodeId a, Real factor) {
    const NodeId id = unary(Op::scale, a, shape(a));
    nodes_[id.index].factor = factor;
    return id;
}

template <class Real>
NodeId Tape<Real>::broadcast(NodeId a, Shape to) {
    if (!broadcastable(shape(a), to)) {
        throw ShapeError("broadcast: " + describe(a, shape(a)) + " cannot expand to " + to_string(to));
    }
    if (shape(a) == to) return a;
    return unary(Op::broadcast, a, to);
}

template <class Real>
NodeId Tape<Real>::sum_to(NodeId a, Shape to) {
    if (!broadcastable(to, shape(a))) {
        throw ShapeError("sum_to: " + describe(a, shape(a)) + " cannot reduce to " + to_string(to));
    }
    if (shape(a) == to) return a;
    return unary(Op::sum_to, a, to);
}

template <class Real>
NodeId Tape<Real>::reshape(NodeId a, Shape to) {
    if (shape(a).size() != to.size()) {
        throw ShapeError("reshape: " + describe(a, shape(a)) + " has a different element count than " +
                         to_string(to));
    }
    if (shape(a) == to) return a;
    return unary(Op::reshape, a, to);
}

template <class Real>
NodeId Tape<Real>::concat(std::span<const NodeId> parts) {
    if (parts.empty()) throw ShapeError("concat: no inputs");
    const Shape first = shape(parts.front());
    Eigen::Index cols = 0;
    for (const NodeId p : parts) {
        if (shape(p).rows != first.rows) shape_error("concat", parts.front(), first, p, shape(p));
        cols += shape(p).cols;
    }
    Node n = make_node(Op::concat, {first.rows, cols}, {parts.begin(), parts.end()});
    return push(std::move(n));
}

template <class Real>
NodeId Tape<Real>::slice(NodeId a, Eigen::Index col_offset, Eigen::Index width) {
    const Shape s = shape(a);
    if (col_offset < 0 || width <= 0 || col_offset + width > s.cols) {
        throw ShapeError("slice: columns [" + std::to_string(col_offset) + ", " +
                         std::to_string(col_offset + width) + ") out of range for " + describe(a, s));
    }
    const NodeId id = unary(Op::slice, a, {s.rows, width});
    nodes_[id.index].offset = col_offset;
    return id;
}

template <class Real>
NodeId Tape<Real>::pad(NodeId a, Eigen::Index col_offset, Eigen::Index total_width) {
    const Shape s = shape(a);
    if (col_offset < 0 || col_offset + s.cols > total_width) {
        throw ShapeError("pad: " + describe(a, s) + " does not fit at column " + std::to_string(col_offset) +
                         " of width " + std::to_string(total_width));
    }
    const NodeId id = unary(Op::pad, a, {s.rows, total_width});
    nodes_[id.index].offset = col_offset;
    return id;
}

template <class Real>
NodeId Tape<Real>::norm2(NodeId a) { return unary(Op::norm2, a, {1, 1}); }

template <class Real>
NodeId Tape<Real>::reciprocal(NodeId a) { return unary(Op::reciprocal, a, shape(a)); }

template <class Real>
NodeId Tape<Real>::stop_gradient(NodeId a) { return unary(Op::stop_gradient, a, shape(a)); }

template <class Real>
NodeId Tape<Real>::mul_scalar(NodeId s, NodeId a) {
    if (!shape(s).is_scalar()) shape_error("mul_scalar", s, shape(s), a, shape(a));
    return mul(broadcast(s, shape(a)), a);
}

template <class Real>
void Tape<Real>::compute(Node& n) {
    auto in = [&](std::size_t i) -> const Array& { return nodes_[n.inputs[i].index].value; };
    switch (n.op) {
    case Op::constant:
    case Op::parameter:
        break;
    case Op::add: n.value = in(0) + in(1); break;
    case Op::sub: n.value = in(0) - in(1); break;
    case Op::mul: n.value = in(0).cwiseProduct(in(1)); break;
    case Op::matmul:
        n.value.resize(n.shape.rows, n.shape.cols);
        n.value.noalias() = in(0) * in(1);
        break;
    case Op::transpose: n.value = in(0).transpose(); break;
    case Op::sine: n.value = in(0).array().sin().matrix(); break;
    case Op::cosine: n.value = in(0).array().cos().matrix(); break;
    case Op::sigmoid:
        n.value = in(0).unaryExpr([](Real x) { return Real(1) / (Real(1) + std::exp(-x)); });
        break;
    case Op::relu: n.value = in(0).cwiseMax(Real(0)); break;
    case Op::step:
        n.value = in(0).unaryExpr([](Real x) { return x > Real(0) ? Real(1) : Real(0); });
        break;
    case Op::square: n.value = in(0).array().square().matrix(); break;
    case Op::sum: n.value = Array::Constant(1, 1, in(0).sum()); break;
    case Op::mean: n.value = Array::Constant(1, 1, in(0).mean()); break;
    case Op::scale: n.value = in(0) * n.factor; break;
    case Op::broadcast: {
        const Array& a = in(0);
        if (a.rows() == 1 && a.cols() == 1) {
            n.value = Array::Constant(n.shape.rows, n.shape.cols, a(0, 0));
        } else if (a.rows() == 1) {
            n.value = a.replicate(n.shape.rows, 1);
        } else {
            n.value = a.replicate(1, n.shape.cols);
        }
        break;
    }
    case Op::sum_to: {
        const Array& a = in(0);
        if (n.shape.is_scalar()) {
            n.value = Array::Constant(1, 1, a.sum());
        } else if (n.shape.rows == 1) {
            n.value = a.colwise().sum();
        } else {
            n.value = a.rowwise().sum();
        }
        break;
    }
    case Op::reshape: {
        const Array& a = in(0);
        n.value.resize(n.shape.rows, n.shape.cols);
        const Eigen::Index src_cols = a.cols();
        for (Eigen::Index i = 0; i < n.shape.size(); ++i) {
            n.value(i / n.shape.cols, i % n.shape.cols) = a(i / src_cols, i % src_cols);
        }
        break;
    }
    case Op::concat: {
        n.value.resize(n.shape.rows, n.shape.cols);
        Eigen::Index col = 0;
        for (const NodeId p : n.inputs) {
            const Array& part = nodes_[p.index].value;
            n.value.middleCols(col, part.cols()) = part;
            col += part.cols();
        }
        break;
    }
    case Op::slice: n.value = in(0).middleCols(n.offset, n.shape.cols); break;
    case Op::pad:
        n.value = Array::Zero(n.shape.rows, n.shape.cols);
        n.value.middleCols(n.offset, in(0).cols()) = in(0);
        break;
    case Op::norm2: n.value = Array::Constant(1, 1, in(0).norm()); break;
    case Op::reciprocal:
        n.value = in(0).unaryExpr([](Real x) { return x == Real(0) ? Real(0) : Real(1) / x; });
        break;
    case Op::stop_gradient: n.value = in(0); break;
    }
    n.evaluated = true;
}

template <class Real>
auto Tape<Real>::evaluate(NodeId node) -> const Array& {
    at(node);
    if (nodes_[node.index].evaluated) return nodes_[node.index].value;

    // Collect the unevaluated ancestors, then compute them in id order; inputs
    // always have smaller ids than their consumers.
    std::vector<std::uint32_t> pending;
    std::vector<std::uint32_t> stack{node.index};
    std::vector<char> seen(node.index + 1, 0);
    seen[node.index] = 1;
    while (!stack.empty()) {
        const std::uint32_t id = stack.back();
        stack.pop_back();
        pending.push_back(id);
        for (const NodeId in : nodes_[id].inputs) {
            if (!seen[in.index] && !nodes_[in.index].evaluated) {
                seen[in.index] = 1;
                stack.push_back(in.index);
            }
        }
    }
    std::sort(pending.begin(), pending.end());
    for (const std::uint32_t id : pending) compute(nodes_[id]);
    return nodes_[node.index].value;
}

template <class Real>
void Tape<Real>::vjp(NodeId id, NodeId g, std::vector<std::vector<NodeId>>& contributions,
                     const std::vector<char>& depends) {
    // Copy what we need: pushing nodes may reallocate nodes_.
    const Op op = nodes_[id.index].op;
    const std::vector<NodeId> in = nodes_[id.index].inputs;
    const Real factor = nodes_[id.index].factor;
    const Eigen::Index offset = nodes_[id.index].offset;

    auto wants = [&](std::size_t slot) { return depends[in[slot].index] != 0; };
    auto give = [&](std::size_t slot, NodeId value) { contributions[in[slot].index].push_back(value); };
    // Unary rules only run when their single input lies on a path to a wrt node.
    if (in.size() == 1 && !wants(0)) return;

    switch (op) {
    case Op::constant:
    case Op::parameter:
    case Op::step:
    case Op::stop_gradient:
        break;
    case Op::add:
        if (wants(0)) give(0, g);
        if (wants(1)) give(1, g);
        break;
    case Op::sub:
        if (wants(0)) give(0, g);
        if (wants(1)) give(1, scale(g, Real(-1)));
        break;
    case Op::mul:
        if (wants(0)) give(0, mul(g, in[1]));
        if (wants(1)) give(1, mul(g, in[0]));
        break;
    case Op::matmul:
        if (wants(0)) give(0, matmul(g, transpose(in[1])));
        if (wants(1)) give(1, matmul(transpose(in[0]), g));
        break;
    case Op::transpose:
        give(0, transpose(g));
        break;
    case Op::sine:
        give(0, mul(g, cosine(in[0])));
        break;
    case Op::cosine:
        give(0, mul(g, scale(sine(in[0]), Real(-1))));
        break;
    case Op::sigmoid:
        give(0, mul(g, sub(id, square(id))));
        break;
    case Op::relu:
        give(0, mul(g, step(in[0])));
        break;
    case Op::square:
        give(0, mul(g, scale(in[0], Real(2))));
        break;
    case Op::sum:
        give(0, broadcast(g, shape(in[0])));
        break;
    case Op::mean:
        give(0, scale(broadcast(g, shape(in[0])), Real(1) / static_cast<Real>(shape(in[0]).size())));
        break;
    case Op::scale:
        give(0, scale(g, factor));
        break;
    case Op::broadcast:
        give(0, sum_to(g, shape(in[0])));
        break;
    case Op::sum_to:
        give(0, broadcast(g, shape(in[0])));
        break;
    case Op::reshape:
        give(0, reshape(g, shape(in[0])));
        break;
    case Op::concat: {
        Eigen::Index col = 0;
        for (std::size_t i = 0; i < in.size(); ++i) {
            const Eigen::Index width = shape(in[i]).cols;
            if (wants(i)) give(i, slice(g, col, width));
            col += width;
        }
        break;
    }
    case Op::slice:
        give(0, pad(g, offset, shape(in[0]).cols));
        break;
    case Op::pad:
        give(0, slice(g, offset, shape(in[0]).cols));
        break;
    case Op::norm2:
        // d|x|/dx = x / |x|, taken as 0 at x == 0.
        give(0, mul(broadcast(mul(g, reciprocal(id)), shape(in[0])), in[0]));
        break;
    case Op::reciprocal:
        give(0, mul(g, scale(square(id), Real(-1))));
        break;
    }
}

template <class Real>
std::vector<NodeId> Tape<Real>::grad(NodeId scalar, std::span<const NodeId> wrt) {
    if (!shape(scalar).is_scalar()) {
        throw ShapeError("grad: " + describe(scalar, shape(scalar)) + " is not scalar-shaped");
    }
    for (const NodeId w : wrt) at(w);

    const std::size_t count = static_cast<std::size_t>(scalar.index) + 1;
    std::vector<char> depends(count, 0);
    std::uint32_t lowest = scalar.index;
    for (const NodeId w : wrt) {
        if (w.index < count) {
            depends[w.index] = 1;
            lowest = std::min(lowest, w.index);
        }
    }
    for (std::uint32_t id = lowest; id < count; ++id) {
        if (depends[id] || nodes_[id].op == Op::stop_gradient) continue;
        for (const NodeId in : nodes_[id].inputs) {
            if (depends[in.index]) {
                depends[id] = 1;
                break;
            }
        }
    }

    std::vector<NodeId> adjoint(count);
    std::vector<char> has_adjoint(count, 0);
    std::vector<std::vector<NodeId>> contributions(count);
    if (depends[scalar.index]) contributions[scalar.index].push_back(ones({1, 1}));

    for (std::uint32_t id = scalar.index + 1; id-- > lowest;) {
        auto& parts = contributions[id];
        if (parts.empty()) continue;
        // Consumers were visited in descending id order; sum ascending.
        std::reverse(parts.begin(), parts.end());
        NodeId total = parts.front();
        for (std::size_t i = 1; i < parts.size(); ++i) total = add(total, parts[i]);
        parts.clear();
        parts.shrink_to_fit();
        adjoint[id] = total;
        has_adjoint[id] = 1;
        vjp(NodeId{id}, total, contributions, depends);
    }

    std::vector<NodeId> out;
    out.reserve(wrt.size());
    for (const NodeId w : wrt) {
        if (w.index < count && has_adjoint[w.index]) {
            out.push_back(adjoint[w.index]);
        } else {
            out.push_back(zeros(shape(w)));
        }
    }
    return out;
}

template class Tape<float>;
template class Tape<double>;

}  // namespace fieldmeta::graph
