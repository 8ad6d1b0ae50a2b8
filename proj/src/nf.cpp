#include "fieldmeta/nf.hpp"

#include <cmath>
#include <numbers>
#include <random>
#include <stdexcept>

namespace fieldmeta::nf {

std::string_view to_string(Activation a) {
    switch (a) {
    case Activation::sine: return "sine";
    case Activation::relu_fourier: return "relu_fourier";
    case Activation::identity: return "identity";
    }
    return "unknown";
}

std::string_view to_string(Head h) { return h == Head::linear ? "linear" : "sigmoid"; }

Activation parse_activation(std::string_view text) {
    if (text == "sine") return Activation::sine;
    if (text == "relu_fourier") return Activation::relu_fourier;
    if (text == "identity") return Activation::identity;
    throw std::invalid_argument("unknown activation '" + std::string(text) +
                                "' (expected sine, relu_fourier or identity)");
}

Head parse_head(std::string_view text) {
    if (text == "linear") return Head::linear;
    if (text == "sigmoid") return Head::sigmoid;
    throw std::invalid_argument("unknown head '" + std::string(text) + "' (expected linear or sigmoid)");
}

void ModelSpec::validate() const {
    if (input_dim < 1) throw std::invalid_argument("model: input_dim must be positive");
    if (output_dim < 1) throw std::invalid_argument("model: output_dim must be positive");
    if (hidden_dim < 1) throw std::invalid_argument("model: hidden_dim must be positive");
    if (depth < 1) throw std::invalid_argument("model: depth must be at least 1");
    if (activation == Activation::sine && !(omega0 > 0.0)) {
        throw std::invalid_argument("model: omega0 must be positive for sine activations");
    }
    if (activation == Activation::relu_fourier) {
        if (ff_features < 1) throw std::invalid_argument("model: ff_features must be positive");
        if (!(ff_sigma > 0.0)) throw std::invalid_argument("model: ff_sigma must be positive");
    }
}

int ModelSpec::feature_dim() const {
    return activation == Activation::relu_fourier ? 2 * ff_features : input_dim;
}

int ModelSpec::penult_dim() const { return depth == 1 ? feature_dim() : hidden_dim; }

template <class Real>
ParamVector<Real>::ParamVector(const ModelSpec& spec) {
    spec.validate();
    std::vector<TensorSlot> slots;
    std::size_t offset = 0;
    for (int l = 0; l < spec.depth; ++l) {
        const Eigen::Index fan_in = l == 0 ? spec.feature_dim() : spec.hidden_dim;
        const Eigen::Index fan_out = l + 1 == spec.depth ? spec.output_dim : spec.hidden_dim;
        slots.push_back({fan_in, fan_out, offset});
        offset += static_cast<std::size_t>(fan_in * fan_out);
        if (spec.bias) {
            slots.push_back({1, fan_out, offset});
            offset += static_cast<std::size_t>(fan_out);
        }
    }
    assign_layout(std::move(slots), static_cast<std::size_t>(spec.depth), spec.bias);
}

template <class Real>
void ParamVector<Real>::assign_layout(std::vector<TensorSlot> slots, std::size_t layers, bool bias) {
    std::size_t total = 0;
    for (const auto& s : slots) total += s.size();
    slots_ = std::move(slots);
    layers_ = layers;
    bias_ = bias;
    flat_.assign(total, Real(0));
}

template <class Real>
auto ParamVector<Real>::tensor(std::size_t slot) const -> View {
    const TensorSlot& s = slots_.at(slot);
    return View(flat_.data() + s.offset, s.rows, s.cols);
}

template <class Real>
auto ParamVector<Real>::weight(std::size_t layer) const -> View {
    return tensor(bias_ ? 2 * layer : layer);
}

template <class Real>
auto ParamVector<Real>::weight(std::size_t layer) -> MutView {
    const TensorSlot& s = slots_.at(bias_ ? 2 * layer : layer);
    return MutView(flat_.data() + s.offset, s.rows, s.cols);
}

template <class Real>
auto ParamVector<Real>::bias(std::size_t layer) const -> View {
    if (!bias_) throw std::logic_error("model has no bias parameters");
    return tensor(2 * layer + 1);
}

template <class Real>
auto ParamVector<Real>::bias(std::size_t layer) -> MutView {
    if (!bias_) throw std::logic_error("model has no bias parameters");
    const TensorSlot& s = slots_.at(2 * layer + 1);
    return MutView(flat_.data() + s.offset, s.rows, s.cols);
}

template <class Real>
std::vector<std::size_t> ParamVector<Real>::last_layer_slots() const {
    if (layers_ == 0) return {};
    if (bias_) return {2 * (layers_ - 1), 2 * (layers_ - 1) + 1};
    return {layers_ - 1};
}

template <class Real>
ParamVector<Real> init_params(const ModelSpec& spec, std::uint64_t seed) {
    ParamVector<Real> params(spec);
    std::mt19937_64 rng(seed);
    for (std::size_t l = 0; l < params.layer_count(); ++l) {
        auto w = params.weight(l);
        const double fan_in = static_cast<double>(w.rows());
        double bound = 1.0 / std::sqrt(fan_in);
        if (spec.activation == Activation::sine) {
            bound = l == 0 ? 1.0 / fan_in : std::sqrt(6.0 / fan_in) / spec.omega0;
        }
        std::uniform_real_distribution<double> weight_dist(-bound, bound);
        for (Eigen::Index i = 0; i < w.rows(); ++i) {
            for (Eigen::Index j = 0; j < w.cols(); ++j) w(i, j) = static_cast<Real>(weight_dist(rng));
        }
        if (params.has_bias()) {
            const double bias_bound = 1.0 / std::sqrt(fan_in);
            std::uniform_real_distribution<double> bias_dist(-bias_bound, bias_bound);
            auto b = params.bias(l);
            for (Eigen::Index j = 0; j < b.cols(); ++j) b(0, j) = static_cast<Real>(bias_dist(rng));
        }
    }
    return params;
}

Eigen::MatrixXd fourier_features(const Eigen::MatrixXd& coords, double sigma, int n, std::uint64_t seed) {
    if (n < 1) throw std::invalid_argument("fourier_features: n must be at least 1");
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, sigma);
    Eigen::MatrixXd freqs(coords.cols(), n);
    for (Eigen::Index i = 0; i < freqs.rows(); ++i) {
        for (Eigen::Index j = 0; j < n; ++j) freqs(i, j) = normal(rng);
    }
    const Eigen::MatrixXd phase = 2.0 * std::numbers::pi * (coords * freqs);
    Eigen::MatrixXd out(coords.rows(), 2 * n);
    out.leftCols(n) = phase.array().sin().matrix();
    out.rightCols(n) = phase.array().cos().matrix();
    return out;
}

Eigen::MatrixXd input_features(const ModelSpec& spec, const Eigen::MatrixXd& coords) {
    if (coords.cols() != spec.input_dim) {
        throw std::invalid_argument("coordinates have " + std::to_string(coords.cols()) +
                                    " columns, model expects " + std::to_string(spec.input_dim));
    }
    if (!coords.allFinite()) throw std::invalid_argument("coordinates contain non-finite values");
    if (spec.activation == Activation::relu_fourier) {
        return fourier_features(coords, spec.ff_sigma, spec.ff_features, spec.ff_seed);
    }
    return coords;
}

template <class Real>
ForwardResult<Real> forward_features(const ModelSpec& spec, const ParamVector<Real>& params,
                                     const Eigen::Matrix<Real, Eigen::Dynamic, Eigen::Dynamic>& features) {
    using Matrix = typename ForwardResult<Real>::Matrix;
    if (features.cols() != spec.feature_dim()) {
        throw std::invalid_argument("features have " + std::to_string(features.cols()) + " columns, model expects " +
                                    std::to_string(spec.feature_dim()));
    }
    const Real omega = static_cast<Real>(spec.omega0);
    Matrix h = features;
    ForwardResult<Real> out;
    for (std::size_t l = 0; l < params.layer_count(); ++l) {
        Matrix z(h.rows(), params.weight(l).cols());
        z.noalias() = h * params.weight(l);
        if (params.has_bias()) z += params.bias(l).replicate(z.rows(), 1);
        if (l + 1 == params.layer_count()) {
            out.penult = std::move(h);
            out.preact = z;
            if (spec.head == Head::sigmoid) {
                out.outputs = z.unaryExpr([](Real x) { return Real(1) / (Real(1) + std::exp(-x)); });
            } else {
                out.outputs = std::move(z);
            }
            break;
        }
        switch (spec.activation) {
        case Activation::sine: h = (z * omega).array().sin().matrix(); break;
        case Activation::relu_fourier: h = z.cwiseMax(Real(0)); break;
        case Activation::identity: h = std::move(z); break;
        }
    }
    return out;
}

template <class Real>
ForwardResult<Real> forward(const ModelSpec& spec, const ParamVector<Real>& params, const Eigen::MatrixXd& coords) {
    return forward_features<Real>(spec, params, input_features(spec, coords).cast<Real>());
}

template <class Real>
std::vector<graph::NodeId> to_nodes(graph::Tape<Real>& tape, const ParamVector<Real>& params, bool as_parameters) {
    std::vector<graph::NodeId> nodes;
    nodes.reserve(params.slots().size());
    for (std::size_t s = 0; s < params.slots().size(); ++s) {
        auto value = params.tensor_matrix(s);
        nodes.push_back(as_parameters ? tape.parameter(std::move(value)) : tape.constant(std::move(value)));
    }
    return nodes;
}

template <class Real>
ParamVector<Real> from_nodes(graph::Tape<Real>& tape, std::span<const graph::NodeId> nodes,
                             const ParamVector<Real>& like) {
    if (nodes.size() != like.slots().size()) {
        throw std::invalid_argument("from_nodes: expected " + std::to_string(like.slots().size()) + " nodes, got " +
                                    std::to_string(nodes.size()));
    }
    ParamVector<Real> out = like;
    for (std::size_t s = 0; s < nodes.size(); ++s) {
        const TensorSlot& slot = like.slots()[s];
        const auto& value = tape.evaluate(nodes[s]);
        if (value.rows() != slot.rows || value.cols() != slot.cols) {
            throw graph::ShapeError("from_nodes: slot " + std::to_string(s) + " shape mismatch");
        }
        typename ParamVector<Real>::MutView(out.flat().data() + slot.offset, slot.rows, slot.cols) = value;
    }
    return out;
}

template <class Real>
FieldNodes forward_graph(graph::Tape<Real>& tape, const ModelSpec& spec, std::span<const graph::NodeId> params,
                         graph::NodeId features) {
    const std::size_t per_layer = spec.bias ? 2 : 1;
    if (params.size() != per_layer * static_cast<std::size_t>(spec.depth)) {
        throw std::invalid_argument("forward_graph: parameter node count does not match the model");
    }
    graph::NodeId h = features;
    FieldNodes out{};
    for (int l = 0; l < spec.depth; ++l) {
        const graph::NodeId w = params[per_layer * l];
        graph::NodeId z = tape.matmul(h, w);
        if (spec.bias) z = tape.add(z, tape.broadcast(params[per_layer * l + 1], tape.shape(z)));
        if (l + 1 == spec.depth) {
            out.penult = h;
            out.preact = z;
            out.outputs = spec.head == Head::sigmoid ? tape.sigmoid(z) : z;
            break;
        }
        switch (spec.activation) {
        case Activation::sine: h = tape.sine(tape.scale(z, static_cast<Real>(spec.omega0))); break;
        case Activation::relu_fourier: h = tape.relu(z); break;
        case Activation::identity: h = z; break;
        }
    }
    return out;
}

#define FIELDMETA_INSTANTIATE(Real)                                                                          \
    template class ParamVector<Real>;                                                                        \
    template ParamVector<Real> init_params<Real>(const ModelSpec&, std::uint64_t);                          \
    template ForwardResult<Real> forward<Real>(const ModelSpec&, const ParamVector<Real>&,                  \
                                               const Eigen::MatrixXd&);                                     \
    template ForwardResult<Real> forward_features<Real>(const ModelSpec&, const ParamVector<Real>&,         \
                                                        const Eigen::Matrix<Real, -1, -1>&);                \
    template std::vector<graph::NodeId> to_nodes<Real>(graph::Tape<Real>&, const ParamVector<Real>&, bool); \
    template ParamVector<Real> from_nodes<Real>(graph::Tape<Real>&, std::span<const graph::NodeId>,         \
                                                const ParamVector<Real>&);                                  \
    template FieldNodes forward_graph<Real>(graph::Tape<Real>&, const ModelSpec&,                           \
                                            std::span<const graph::NodeId>, graph::NodeId);

FIELDMETA_INSTANTIATE(float)
FIELDMETA_INSTANTIATE(double)

#undef FIELDMETA_INSTANTIATE

}  // namespace fieldmeta::nf
