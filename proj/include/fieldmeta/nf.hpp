#pragma once

// Coordinate MLPs (SIREN, Fourier-feature ReLU, plain affine) expressed both as
// graph expressions and as a direct value-only forward pass.

#include "fieldmeta/graph.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace fieldmeta::nf {

enum class Activation : std::uint8_t { sine = 0, relu_fourier = 1, identity = 2 };
enum class Head : std::uint8_t { linear = 0, sigmoid = 1 };

std::string_view to_string(Activation a);
std::string_view to_string(Head h);
Activation parse_activation(std::string_view text);
Head parse_head(std::string_view text);

/// Architecture of a coordinate network. `depth` counts linear layers; the
/// input of the last layer is the penultimate feature. With depth 1 that
/// feature is the (possibly Fourier-mapped) coordinate itself.
struct ModelSpec {
    int input_dim = 2;
    int output_dim = 1;
    int hidden_dim = 256;
    int depth = 5;
    Activation activation = Activation::sine;
    double omega0 = 30.0;
    double ff_sigma = 10.0;
    int ff_features = 128;
    std::uint64_t ff_seed = 0;
    Head head = Head::linear;
    bool bias = true;

    /// Throws std::invalid_argument describing the first violated constraint.
    void validate() const;
    /// Width of the input to the first linear layer.
    int feature_dim() const;
    /// Width of the penultimate feature.
    int penult_dim() const;

    friend bool operator==(const ModelSpec&, const ModelSpec&) = default;
};

/// Shape and flat offset of one weight or bias tensor.
struct TensorSlot {
    Eigen::Index rows = 0;
    Eigen::Index cols = 0;
    std::size_t offset = 0;
    std::size_t size() const { return static_cast<std::size_t>(rows * cols); }
};

/// Flat, layer-addressable parameters. Layer i contributes a weight of shape
/// [fan_in x fan_out] (row-major in the flat view) followed by a bias row
/// [1 x fan_out] when the model has biases.
template <class Real>
class ParamVector {
public:
    using Matrix = Eigen::Matrix<Real, Eigen::Dynamic, Eigen::Dynamic>;
    using RowMajor = Eigen::Matrix<Real, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
    using View = Eigen::Map<const RowMajor>;
    using MutView = Eigen::Map<RowMajor>;

    ParamVector() = default;
    explicit ParamVector(const ModelSpec& spec);

    std::size_t layer_count() const { return layers_; }
    bool has_bias() const { return bias_; }
    std::span<const TensorSlot> slots() const { return slots_; }

    View weight(std::size_t layer) const;
    MutView weight(std::size_t layer);
    /// Bias row of `layer`; throws if the model has no biases.
    View bias(std::size_t layer) const;
    MutView bias(std::size_t layer);

    View tensor(std::size_t slot) const;
    Matrix tensor_matrix(std::size_t slot) const { return Matrix(tensor(slot)); }

    /// Slot indices of the final layer's weight (and bias, if present).
    std::vector<std::size_t> last_layer_slots() const;

    std::span<Real> flat() { return flat_; }
    std::span<const Real> flat() const { return flat_; }
    std::size_t size() const { return flat_.size(); }

    template <class To>
    ParamVector<To> cast() const {
        ParamVector<To> out;
        out.assign_layout(slots_, layers_, bias_);
        for (std::size_t i = 0; i < flat_.size(); ++i) out.flat()[i] = static_cast<To>(flat_[i]);
        return out;
    }

    void assign_layout(std::vector<TensorSlot> slots, std::size_t layers, bool bias);

    friend bool operator==(const ParamVector& a, const ParamVector& b) {
        return a.layers_ == b.layers_ && a.bias_ == b.bias_ && a.flat_ == b.flat_;
    }

private:
    std::vector<TensorSlot> slots_;
    std::vector<Real> flat_;
    std::size_t layers_ = 0;
    bool bias_ = true;
};

/// SIREN-style uniform initialization; deterministic in `seed`.
///
/// Sine nets: first layer U(-1/fan_in, 1/fan_in), later layers
/// U(-sqrt(6/fan_in)/omega0, +sqrt(6/fan_in)/omega0). Other activations use
/// U(-1/sqrt(fan_in), 1/sqrt(fan_in)) for weights. Biases always use
/// U(-1/sqrt(fan_in), 1/sqrt(fan_in)).
template <class Real>
ParamVector<Real> init_params(const ModelSpec& spec, std::uint64_t seed);

/// [sin(2 pi x B), cos(2 pi x B)] with B ~ Normal(0, sigma^2) of shape
/// [C x n] drawn from `seed`.
Eigen::MatrixXd fourier_features(const Eigen::MatrixXd& coords, double sigma, int n, std::uint64_t seed);

/// Coordinates after the spec's fixed input mapping (identity unless the
/// activation uses Fourier features).
Eigen::MatrixXd input_features(const ModelSpec& spec, const Eigen::MatrixXd& coords);

template <class Real>
struct ForwardResult {
    using Matrix = Eigen::Matrix<Real, Eigen::Dynamic, Eigen::Dynamic>;
    Matrix outputs;    // [M x D]
    Matrix penult;     // [M x H]
    Matrix preact;     // [M x D], equal to outputs for a linear head
};

/// Value-only forward pass. Throws std::invalid_argument on non-finite or
/// mis-shaped coordinates.
template <class Real>
ForwardResult<Real> forward(const ModelSpec& spec, const ParamVector<Real>& params, const Eigen::MatrixXd& coords);

/// Same as forward() but on coordinates already passed through input_features().
template <class Real>
ForwardResult<Real> forward_features(const ModelSpec& spec, const ParamVector<Real>& params,
                                     const Eigen::Matrix<Real, Eigen::Dynamic, Eigen::Dynamic>& features);

struct FieldNodes {
    graph::NodeId outputs;
    graph::NodeId penult;
    graph::NodeId preact;
};

/// Puts every tensor of `params` on the tape, as parameters or as constants.
template <class Real>
std::vector<graph::NodeId> to_nodes(graph::Tape<Real>& tape, const ParamVector<Real>& params, bool as_parameters);

/// Reads evaluated node values back into a ParamVector with the layout of `like`.
template <class Real>
ParamVector<Real> from_nodes(graph::Tape<Real>& tape, std::span<const graph::NodeId> nodes,
                             const ParamVector<Real>& like);

/// Builds the network on the tape. `features` must already be mapped by
/// input_features(); `params` holds one node per ParamVector slot.
template <class Real>
FieldNodes forward_graph(graph::Tape<Real>& tape, const ModelSpec& spec, std::span<const graph::NodeId> params,
                         graph::NodeId features);

}  // namespace fieldmeta::nf
