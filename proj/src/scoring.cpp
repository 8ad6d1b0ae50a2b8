#include "fieldmeta/scoring.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>
#include <string>

namespace fieldmeta::scoring {

using graph::NodeId;

std::string_view to_string(Scorer s) {
    switch (s) {
    case Scorer::gradncp: return "gradncp";
    case Scorer::loss: return "loss";
    case Scorer::random: return "random";
    }
    return "unknown";
}

Scorer parse_scorer(std::string_view text) {
    if (text == "gradncp") return Scorer::gradncp;
    if (text == "loss") return Scorer::loss;
    if (text == "random") return Scorer::random;
    throw std::invalid_argument("unknown scorer '" + std::string(text) + "' (expected gradncp, loss or random)");
}

namespace {

template <class Real>
using Matrix = Eigen::Matrix<Real, Eigen::Dynamic, Eigen::Dynamic>;

template <class Real>
std::vector<Real> gradncp_linear(const nf::ForwardResult<Real>& fwd, const signals::ContextSet& ctx, bool bias) {
    const Real one = bias ? Real(1) : Real(0);
    const Matrix<Real> residual = ctx.values.cast<Real>() - fwd.outputs;
    std::vector<Real> out(static_cast<std::size_t>(residual.rows()));
    for (Eigen::Index j = 0; j < residual.rows(); ++j) {
        out[j] = residual.row(j).norm() * std::sqrt(fwd.penult.row(j).squaredNorm() + one);
    }
    return out;
}

template <class Real>
std::vector<Real> gradncp_sigmoid(const nf::ForwardResult<Real>& fwd, const signals::ContextSet& ctx, bool bias) {
    const Real one = bias ? Real(1) : Real(0);
    const Matrix<Real> residual = ctx.values.cast<Real>() - fwd.outputs;
    // s'(z) = s(z)(1 - s(z)), written in terms of z so saturation goes to 0.
    const Matrix<Real> slope = fwd.preact.unaryExpr([](Real z) {
        const Real e = std::exp(-std::abs(z));
        return e / ((Real(1) + e) * (Real(1) + e));
    });
    std::vector<Real> out(static_cast<std::size_t>(residual.rows()));
    for (Eigen::Index j = 0; j < residual.rows(); ++j) {
        out[j] = residual.row(j).cwiseProduct(slope.row(j)).norm() *
                 std::sqrt(fwd.penult.row(j).squaredNorm() + one);
    }
    return out;
}

template <class Real>
std::vector<Real> squared_error(const nf::ForwardResult<Real>& fwd, const signals::ContextSet& ctx) {
    const Matrix<Real> residual = ctx.values.cast<Real>() - fwd.outputs;
    std::vector<Real> out(static_cast<std::size_t>(residual.rows()));
    for (Eigen::Index j = 0; j < residual.rows(); ++j) out[j] = residual.row(j).squaredNorm();
    return out;
}

// One SGD step of size alpha on the squared error of `sample`, on all
// tensors or only on the last layer.
template <class Real>
nf::ParamVector<Real> single_example_step(const nf::ModelSpec& spec, const nf::ParamVector<Real>& params,
                                          const Matrix<Real>& features, const Matrix<Real>& target, Real alpha,
                                          UpdateMode mode) {
    graph::Tape<Real> tape;
    const auto last = params.last_layer_slots();
    std::vector<NodeId> nodes;
    std::vector<NodeId> trainable;
    std::vector<std::size_t> trainable_slots;
    for (std::size_t s = 0; s < params.slots().size(); ++s) {
        const bool train = mode == UpdateMode::full || std::find(last.begin(), last.end(), s) != last.end();
        nodes.push_back(train ? tape.parameter(params.tensor_matrix(s)) : tape.constant(params.tensor_matrix(s)));
        if (train) {
            trainable.push_back(nodes.back());
            trainable_slots.push_back(s);
        }
    }
    const nf::FieldNodes field = nf::forward_graph(tape, spec, nodes, tape.constant(features));
    const NodeId loss = tape.sum(tape.square(tape.sub(field.outputs, tape.constant(target))));
    const std::vector<NodeId> grads = tape.grad(loss, trainable);

    nf::ParamVector<Real> updated = params;
    for (std::size_t i = 0; i < trainable.size(); ++i) {
        const nf::TensorSlot& slot = params.slots()[trainable_slots[i]];
        const auto& g = tape.evaluate(grads[i]);
        typename nf::ParamVector<Real>::MutView view(updated.flat().data() + slot.offset, slot.rows, slot.cols);
        view -= alpha * g;
    }
    return updated;
}

template <class Real>
Real row_sq_error(const Matrix<Real>& out, const Matrix<Real>& target, Eigen::Index j) {
    return (target.row(j) - out.row(j)).squaredNorm();
}

}  // namespace

template <class Real>
std::vector<Real> score_gradncp(const nf::ModelSpec& spec, const nf::ParamVector<Real>& params,
                                const signals::ContextSet& ctx) {
    if (spec.head != nf::Head::linear) {
        throw std::invalid_argument("score_gradncp needs a linear head; use score_gradncp_nonlinear for sigmoid heads");
    }
    return gradncp_linear(nf::forward(spec, params, ctx.coords), ctx, spec.bias);
}

template <class Real>
std::vector<Real> score_gradncp_nonlinear(const nf::ModelSpec& spec, const nf::ParamVector<Real>& params,
                                          const signals::ContextSet& ctx) {
    if (spec.head != nf::Head::sigmoid) {
        throw std::invalid_argument("score_gradncp_nonlinear needs a sigmoid head; use score_gradncp for linear heads");
    }
    return gradncp_sigmoid(nf::forward(spec, params, ctx.coords), ctx, spec.bias);
}

template <class Real>
std::vector<Real> score_loss(const nf::ModelSpec& spec, const nf::ParamVector<Real>& params,
                             const signals::ContextSet& ctx) {
    return squared_error(nf::forward(spec, params, ctx.coords), ctx);
}

template <class Real>
std::vector<Real> score_spg(const nf::ModelSpec& spec, const nf::ParamVector<Real>& params,
                            const signals::ContextSet& ctx, double alpha, UpdateMode mode) {
    if (!(alpha > 0.0)) throw std::invalid_argument("score_spg: alpha must be positive");
    const Matrix<Real> features = nf::input_features(spec, ctx.coords).cast<Real>();
    const Matrix<Real> targets = ctx.values.cast<Real>();
    std::vector<Real> out(static_cast<std::size_t>(ctx.size()));
    for (Eigen::Index j = 0; j < ctx.size(); ++j) {
        const Matrix<Real> x = features.row(j);
        const Matrix<Real> y = targets.row(j);
        const Real before = row_sq_error<Real>(nf::forward_features(spec, params, x).outputs, y, 0);
        const auto updated = single_example_step(spec, params, x, y, static_cast<Real>(alpha), mode);
        const Real after = row_sq_error<Real>(nf::forward_features(spec, updated, x).outputs, y, 0);
        out[static_cast<std::size_t>(j)] = before - after;
    }
    return out;
}

template <class Real>
std::vector<Real> score_tpg(const nf::ModelSpec& spec, const nf::ParamVector<Real>& params,
                            const signals::ContextSet& ctx, double alpha, UpdateMode mode, std::size_t max_context) {
    if (!(alpha > 0.0)) throw std::invalid_argument("score_tpg: alpha must be positive");
    const auto m = static_cast<std::size_t>(ctx.size());
    if (m > max_context) {
        throw std::invalid_argument("score_tpg: context of " + std::to_string(m) + " examples exceeds the bound of " +
                                    std::to_string(max_context) + " (O(M^2) cost); use score_spg instead");
    }
    const Matrix<Real> features = nf::input_features(spec, ctx.coords).cast<Real>();
    const Matrix<Real> targets = ctx.values.cast<Real>();
    const Matrix<Real> base_out = nf::forward_features(spec, params, features).outputs;
    std::vector<Real> out(m, Real(0));
    if (m < 2) return out;
    for (std::size_t j = 0; j < m; ++j) {
        const auto row = static_cast<Eigen::Index>(j);
        const Matrix<Real> x = features.row(row);
        const Matrix<Real> y = targets.row(row);
        const auto updated = single_example_step(spec, params, x, y, static_cast<Real>(alpha), mode);
        const Matrix<Real> new_out = nf::forward_features(spec, updated, features).outputs;
        Real before = 0;
        Real after = 0;
        for (Eigen::Index i = 0; i < static_cast<Eigen::Index>(m); ++i) {
            if (i == row) continue;
            before += row_sq_error<Real>(base_out, targets, i);
            after += row_sq_error<Real>(new_out, targets, i);
        }
        out[j] = (before - after) / static_cast<Real>(m - 1);
    }
    return out;
}

std::vector<double> score_random(std::size_t m, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::vector<double> out(m);
    for (auto& v : out) v = unit(rng);
    return out;
}

template <class Real>
std::vector<Real> score_from_forward(Scorer scorer, const nf::ModelSpec& spec, const nf::ForwardResult<Real>& fwd,
                                     const signals::ContextSet& ctx, std::uint64_t seed) {
    switch (scorer) {
    case Scorer::gradncp:
        return spec.head == nf::Head::sigmoid ? gradncp_sigmoid(fwd, ctx, spec.bias) : gradncp_linear(fwd, ctx, spec.bias);
    case Scorer::loss: return squared_error(fwd, ctx);
    case Scorer::random: {
        const auto r = score_random(static_cast<std::size_t>(ctx.size()), seed);
        return {r.begin(), r.end()};
    }
    }
    throw std::logic_error("unhandled scorer");
}

std::size_t selection_size(std::size_t m, double gamma) {
    if (!(gamma > 0.0 && gamma <= 1.0)) {
        throw std::invalid_argument("selection ratio gamma must lie in (0, 1], got " + std::to_string(gamma));
    }
    // The small slack keeps products such as 0.1 * 30 from rounding up.
    const double raw = std::ceil(gamma * static_cast<double>(m) - 1e-9);
    return std::clamp<std::size_t>(static_cast<std::size_t>(std::max(raw, 0.0)), m == 0 ? 0 : 1, m);
}

template <class T>
std::vector<std::uint32_t> topk(std::span<const T> scores, double gamma) {
    const std::size_t k = selection_size(scores.size(), gamma);
    std::vector<std::uint32_t> order(scores.size());
    std::iota(order.begin(), order.end(), 0U);
    auto higher = [&](std::uint32_t a, std::uint32_t b) {
        const T sa = scores[a];
        const T sb = scores[b];
        const bool na = std::isnan(sa);
        const bool nb = std::isnan(sb);
        if (na != nb) return nb;
        if (!na && sa != sb) return sa > sb;
        return a < b;
    };
    if (k < order.size()) {
        std::nth_element(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k), order.end(), higher);
        order.resize(k);
    }
    std::sort(order.begin(), order.end());
    return order;
}

template std::vector<std::uint32_t> topk<float>(std::span<const float>, double);
template std::vector<std::uint32_t> topk<double>(std::span<const double>, double);

#define FIELDMETA_INSTANTIATE(Real)                                                                                \
    template std::vector<Real> score_gradncp<Real>(const nf::ModelSpec&, const nf::ParamVector<Real>&,            \
                                                   const signals::ContextSet&);                                   \
    template std::vector<Real> score_gradncp_nonlinear<Real>(const nf::ModelSpec&, const nf::ParamVector<Real>&,  \
                                                             const signals::ContextSet&);                         \
    template std::vector<Real> score_loss<Real>(const nf::ModelSpec&, const nf::ParamVector<Real>&,               \
                                                const signals::ContextSet&);                                      \
    template std::vector<Real> score_spg<Real>(const nf::ModelSpec&, const nf::ParamVector<Real>&,                \
                                               const signals::ContextSet&, double, UpdateMode);                   \
    template std::vector<Real> score_tpg<Real>(const nf::ModelSpec&, const nf::ParamVector<Real>&,                \
                                               const signals::ContextSet&, double, UpdateMode, std::size_t);      \
    template std::vector<Real> score_from_forward<Real>(Scorer, const nf::ModelSpec&, const nf::ForwardResult<Real>&, \
                                                        const signals::ContextSet&, std::uint64_t);

FIELDMETA_INSTANTIATE(float)
FIELDMETA_INSTANTIATE(double)

#undef FIELDMETA_INSTANTIATE

}  // namespace fieldmeta::scoring
