#pragma once

// Meta-training: pruned inner-loop adaptation, bootstrap targets, the total
// meta-objective and the outer Adam update of the initialization and the
// per-step inner learning rates.

#include "fieldmeta/graph.hpp"
#include "fieldmeta/nf.hpp"
#include "fieldmeta/scoring.hpp"
#include "fieldmeta/signals.hpp"

#include <cstdint>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace fieldmeta::meta {

inline constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
inline constexpr double kMinInnerLr = 1e-8;
inline constexpr double kAdamBeta1 = 0.9;
inline constexpr double kAdamBeta2 = 0.999;
inline constexpr double kAdamEps = 1e-8;

/// One adaptation step, measured before its update is applied.
struct StepRecord {
    double loss = kNaN;           // MSE on the full context
    double psnr = kNaN;           // full context
    double loss_selected = kNaN;  // MSE on the selected subset
    double grad_norm_high = kNaN; // |grad| on the selected subset
    double grad_norm_full = kNaN; // |grad| on the full context, when computed
    double scale = 1.0;           // multiplier applied to the gradient
    std::vector<std::uint32_t> selected;
    std::size_t tape_nodes = 0;    // nodes recorded for this step's subgraph
    std::size_t tape_elements = 0; // array elements recorded for it
};

template <class Real>
struct AdaptReport {
    std::vector<StepRecord> steps;
    nf::ParamVector<Real> final_params;
    double final_loss = kNaN;
    double final_psnr = kNaN;

    std::size_t steps_taken() const { return steps.size(); }
};

/// Raised when an adaptation produces a non-finite loss or gradient.
class DivergenceError : public std::runtime_error {
public:
    DivergenceError(int step, const std::string& what);
    int step() const { return step_; }

private:
    int step_;
};

struct Hyper {
    int inner_steps = 16;      // K
    int bootstrap_steps = 5;   // L
    double gamma = 0.25;       // kept fraction of the context
    double lambda = 100.0;     // bootstrap weight
    double meta_lr = 1e-5;     // outer Adam learning rate

    void validate() const;
    friend bool operator==(const Hyper&, const Hyper&) = default;
};

template <class Real>
struct MetaState {
    nf::ModelSpec spec;
    nf::ParamVector<Real> theta0;
    std::vector<Real> inner_lrs;  // one per inner step
    Hyper hyper;
    std::vector<Real> adam_m;     // over [theta0, inner_lrs]
    std::vector<Real> adam_v;
    std::uint64_t outer_step = 0;
    std::uint64_t rng_seed = 0;

    void validate() const;
    friend bool operator==(const MetaState&, const MetaState&) = default;
};

template <class Real>
MetaState<Real> make_state(const nf::ModelSpec& spec, const Hyper& hyper, double alpha_init, std::uint64_t seed);

struct InnerOptions {
    scoring::Scorer scorer = scoring::Scorer::gradncp;
    double gamma = 1.0;
    std::uint64_t seed = 0;    // random scorer stream
    bool first_order = false;  // detach inner gradients from the outer graph
};

/// MSE (1/M) sum_j |f(x_j) - y_j|^2 of the network on a context, as a node.
template <class Real>
graph::NodeId mse_node(graph::Tape<Real>& tape, const nf::ModelSpec& spec, std::span<const graph::NodeId> params,
                       graph::NodeId features, graph::NodeId targets);

template <class Real>
struct InnerGraph {
    std::vector<graph::NodeId> params;  // theta_K, one node per ParamVector slot
    AdaptReport<Real> report;
};

/// Differentiable inner loop: each step rescores with the current parameters,
/// keeps the top gamma fraction, and records
/// theta_{k+1} = theta_k - lr_k * grad MSE(theta_k; selected) on the tape.
template <class Real>
InnerGraph<Real> inner_adapt_graph(graph::Tape<Real>& tape, const nf::ModelSpec& spec,
                                   std::span<const graph::NodeId> theta0, std::span<const graph::NodeId> lrs,
                                   const signals::ContextSet& ctx, int steps, const InnerOptions& options);

/// The same loop on plain values (a fresh tape per step). Step t uses
/// lrs[min(t, lrs.size() - 1)].
template <class Real>
AdaptReport<Real> inner_adapt(const nf::ModelSpec& spec, const nf::ParamVector<Real>& theta0,
                              std::span<const Real> lrs, const signals::ContextSet& ctx, int steps,
                              const InnerOptions& options);

template <class Real>
struct BootstrapTarget {
    nf::ParamVector<Real> params;
    int steps = 0;
    double initial_loss = kNaN;  // full-context MSE of theta_K
    double final_loss = kNaN;    // full-context MSE of the target
};

/// `steps` plain full-context SGD steps from theta_K.
template <class Real>
BootstrapTarget<Real> make_bootstrap(const nf::ModelSpec& spec, const nf::ParamVector<Real>& theta_k,
                                     const signals::ContextSet& ctx, Real lr, int steps);

/// MSE(theta_K; full context) + lambda * |theta_K - stop_gradient(target)|_2.
template <class Real>
graph::NodeId total_loss(graph::Tape<Real>& tape, const nf::ModelSpec& spec, std::span<const graph::NodeId> theta_k,
                         const nf::ParamVector<Real>& target, const signals::ContextSet& ctx, double lambda);

struct OuterOptions {
    scoring::Scorer scorer = scoring::Scorer::gradncp;
    bool first_order = false;
    int jobs = 1;
};

struct SignalOutcome {
    bool ok = false;
    std::string error;
    double total_loss = kNaN;
    double theta_k_loss = kNaN;  // full-context MSE after K pruned steps
    double theta_k_psnr = kNaN;
    double boot_loss = kNaN;     // full-context MSE of the bootstrap target
    double boot_distance = kNaN; // |theta_K - target|
    std::size_t tape_nodes = 0;
    std::size_t tape_elements = 0;
    std::vector<StepRecord> inner_steps;
};

template <class Real>
struct MetaGradient {
    std::vector<Real> gradient;  // d total / d [theta0 flat, inner_lrs]
    SignalOutcome outcome;
};

/// Meta-gradient of one signal's total loss. Throws DivergenceError on a
/// non-finite loss or gradient.
template <class Real>
MetaGradient<Real> meta_gradient(const MetaState<Real>& state, const signals::ContextSet& ctx,
                                 const OuterOptions& options, std::uint64_t signal_seed);

template <class Real>
struct OuterResult {
    MetaState<Real> state;
    std::vector<SignalOutcome> signals;
    std::vector<Real> mean_gradient;
    std::size_t used = 0;  // signals that contributed to the update
};

/// One outer step over a batch. Signals whose inner loop diverges are skipped;
/// if every signal diverges a DivergenceError is thrown. Per-signal work may
/// run on `options.jobs` threads; the reduction always runs in batch order.
template <class Real>
OuterResult<Real> outer_step(const MetaState<Real>& state, std::span<const signals::ContextSet> batch,
                             const OuterOptions& options);

/// Seed of signal `index` of the batch processed at `outer_step`.
std::uint64_t signal_seed(std::uint64_t root, std::uint64_t outer_step, std::size_t index);

}  // namespace fieldmeta::meta
