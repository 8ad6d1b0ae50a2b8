#include "fieldmeta/metatrain.hpp"

#include "adapt_common.hpp"
#include "fieldmeta/parallel.hpp"
#include "fieldmeta/rng.hpp"

#include <cmath>
#include <optional>

namespace fieldmeta::meta {

using graph::NodeId;
using graph::Tape;
using namespace detail;

DivergenceError::DivergenceError(int step, const std::string& what)
    : std::runtime_error(step >= 0 ? "diverged at inner step " + std::to_string(step) + ": " + what : what),
      step_(step) {}

void Hyper::validate() const {
    if (inner_steps < 1) throw std::invalid_argument("inner_steps (K) must be at least 1");
    if (bootstrap_steps < 0) throw std::invalid_argument("bootstrap_steps (L) must be non-negative");
    if (!(gamma > 0.0 && gamma <= 1.0)) throw std::invalid_argument("gamma must lie in (0, 1]");
    if (!(lambda >= 0.0)) throw std::invalid_argument("lambda must be non-negative");
    if (!(meta_lr >= 0.0)) throw std::invalid_argument("meta_lr (beta) must be non-negative");
}

template <class Real>
void MetaState<Real>::validate() const {
    spec.validate();
    hyper.validate();
    const std::size_t expected = nf::ParamVector<Real>(spec).size();
    if (theta0.size() != expected) {
        throw std::invalid_argument("theta0 has " + std::to_string(theta0.size()) + " values, the model needs " +
                                    std::to_string(expected));
    }
    if (inner_lrs.size() != static_cast<std::size_t>(hyper.inner_steps)) {
        throw std::invalid_argument("inner_lrs must hold one step size per inner step");
    }
    for (const Real lr : inner_lrs) {
        if (!(lr > Real(0)) || !std::isfinite(lr)) throw std::invalid_argument("inner step sizes must be positive");
    }
    const std::size_t total = expected + inner_lrs.size();
    if (adam_m.size() != total || adam_v.size() != total) {
        throw std::invalid_argument("Adam moments must cover theta0 and the inner step sizes");
    }
}

template <class Real>
MetaState<Real> make_state(const nf::ModelSpec& spec, const Hyper& hyper, double alpha_init, std::uint64_t seed) {
    hyper.validate();
    if (!(alpha_init > 0.0)) throw std::invalid_argument("alpha_init must be positive");
    MetaState<Real> state;
    state.spec = spec;
    state.theta0 = nf::init_params<Real>(spec, split_seed(seed, Stream::init, 0));
    state.inner_lrs.assign(static_cast<std::size_t>(hyper.inner_steps), static_cast<Real>(alpha_init));
    state.hyper = hyper;
    state.adam_m.assign(state.theta0.size() + state.inner_lrs.size(), Real(0));
    state.adam_v = state.adam_m;
    state.rng_seed = seed;
    return state;
}

std::uint64_t signal_seed(std::uint64_t root, std::uint64_t outer_step, std::size_t index) {
    return split_seed(root, Stream::random_scorer, splitmix64(outer_step) ^ static_cast<std::uint64_t>(index));
}

template <class Real>
NodeId mse_node(Tape<Real>& tape, const nf::ModelSpec& spec, std::span<const NodeId> params, NodeId features,
                NodeId targets) {
    const nf::FieldNodes field = nf::forward_graph(tape, spec, params, features);
    const NodeId sq = tape.sum(tape.square(tape.sub(field.outputs, targets)));
    return tape.scale(sq, Real(1) / static_cast<Real>(tape.shape(features).rows));
}

namespace {

// One pruned inner step on `tape`, starting from nodes `params` whose values
// are `values`. Returns the nodes of the updated parameters.
template <class Real>
std::vector<NodeId> pruned_step(Tape<Real>& tape, const nf::ModelSpec& spec, std::span<const NodeId> params,
                                const nf::ParamVector<Real>& values, NodeId lr, const ContextArrays<Real>& data,
                                const signals::ContextSet& ctx, const InnerOptions& options, int k, StepRecord& rec) {
    const nf::ForwardResult<Real> fwd = nf::forward_features(spec, values, data.features);
    record_fit(rec, fwd, data.targets);
    if (!std::isfinite(rec.loss)) throw DivergenceError(k, "non-finite full-context loss");

    const auto scores =
        scoring::score_from_forward(options.scorer, spec, fwd, ctx, split_seed(options.seed, Stream::random_scorer, k));
    rec.selected = scoring::topk<Real>(scores, options.gamma);

    const std::size_t nodes_before = tape.size();
    const std::size_t elements_before = tape.element_count();
    const NodeId features = tape.constant(gather_rows(data.features, rec.selected));
    const NodeId targets = tape.constant(gather_rows(data.targets, rec.selected));
    const NodeId loss = mse_node(tape, spec, params, features, targets);
    std::vector<NodeId> grads = tape.grad(loss, params);
    if (options.first_order) {
        for (auto& g : grads) g = tape.stop_gradient(g);
    }
    std::vector<NodeId> next;
    next.reserve(params.size());
    for (std::size_t i = 0; i < params.size(); ++i) next.push_back(tape.sub(params[i], tape.mul_scalar(lr, grads[i])));
    rec.tape_nodes = tape.size() - nodes_before;
    rec.tape_elements = tape.element_count() - elements_before;

    rec.loss_selected = static_cast<double>(tape.evaluate(loss)(0, 0));
    rec.grad_norm_high = grad_norm(tape, std::span<const NodeId>(grads));
    if (!std::isfinite(rec.loss_selected) || !std::isfinite(rec.grad_norm_high)) {
        throw DivergenceError(k, "non-finite loss or gradient on the selected context");
    }
    return next;
}

template <class Real>
void finish_report(AdaptReport<Real>& report, const nf::ModelSpec& spec, nf::ParamVector<Real> params,
                   const ContextArrays<Real>& data, int steps) {
    StepRecord last;
    record_fit(last, nf::forward_features(spec, params, data.features), data.targets);
    if (!std::isfinite(last.loss)) throw DivergenceError(steps, "non-finite loss after adaptation");
    report.final_loss = last.loss;
    report.final_psnr = last.psnr;
    report.final_params = std::move(params);
}

}  // namespace

template <class Real>
InnerGraph<Real> inner_adapt_graph(Tape<Real>& tape, const nf::ModelSpec& spec, std::span<const NodeId> theta0,
                                   std::span<const NodeId> lrs, const signals::ContextSet& ctx, int steps,
                                   const InnerOptions& options) {
    if (steps > 0 && lrs.empty()) throw std::invalid_argument("inner_adapt_graph: no step sizes");
    const ContextArrays<Real> data = context_arrays<Real>(spec, ctx);
    const nf::ParamVector<Real> layout(spec);

    InnerGraph<Real> out;
    out.params.assign(theta0.begin(), theta0.end());
    for (int k = 0; k < steps; ++k) {
        const nf::ParamVector<Real> values = nf::from_nodes(tape, std::span<const NodeId>(out.params), layout);
        const NodeId lr = lrs[std::min<std::size_t>(static_cast<std::size_t>(k), lrs.size() - 1)];
        StepRecord rec;
        out.params = pruned_step(tape, spec, std::span<const NodeId>(out.params), values, lr, data, ctx, options, k, rec);
        out.report.steps.push_back(std::move(rec));
    }
    finish_report(out.report, spec, nf::from_nodes(tape, std::span<const NodeId>(out.params), layout), data, steps);
    return out;
}

template <class Real>
AdaptReport<Real> inner_adapt(const nf::ModelSpec& spec, const nf::ParamVector<Real>& theta0,
                              std::span<const Real> lrs, const signals::ContextSet& ctx, int steps,
                              const InnerOptions& options) {
    if (steps > 0 && lrs.empty()) throw std::invalid_argument("inner_adapt: no step sizes");
    const ContextArrays<Real> data = context_arrays<Real>(spec, ctx);

    AdaptReport<Real> report;
    nf::ParamVector<Real> params = theta0;
    for (int k = 0; k < steps; ++k) {
        Tape<Real> tape;
        const std::vector<NodeId> nodes = nf::to_nodes(tape, params, true);
        const Real alpha = lrs[std::min<std::size_t>(static_cast<std::size_t>(k), lrs.size() - 1)];
        const NodeId lr = tape.parameter(Matrix<Real>::Constant(1, 1, alpha));
        StepRecord rec;
        const auto next = pruned_step(tape, spec, std::span<const NodeId>(nodes), params, lr, data, ctx, options, k, rec);
        params = nf::from_nodes(tape, std::span<const NodeId>(next), params);
        report.steps.push_back(std::move(rec));
    }
    finish_report(report, spec, std::move(params), data, steps);
    return report;
}

template <class Real>
BootstrapTarget<Real> make_bootstrap(const nf::ModelSpec& spec, const nf::ParamVector<Real>& theta_k,
                                     const signals::ContextSet& ctx, Real lr, int steps) {
    if (steps < 0) throw std::invalid_argument("make_bootstrap: negative step count");
    const std::vector<Real> lrs{lr};
    InnerOptions options;
    options.gamma = 1.0;
    AdaptReport<Real> report = inner_adapt(spec, theta_k, std::span<const Real>(lrs), ctx, steps, options);
    BootstrapTarget<Real> target;
    target.steps = steps;
    target.initial_loss = steps > 0 ? report.steps.front().loss : report.final_loss;
    target.final_loss = report.final_loss;
    target.params = std::move(report.final_params);
    return target;
}

template <class Real>
NodeId total_loss(Tape<Real>& tape, const nf::ModelSpec& spec, std::span<const NodeId> theta_k,
                  const nf::ParamVector<Real>& target, const signals::ContextSet& ctx, double lambda) {
    if (theta_k.size() != target.slots().size()) {
        throw std::invalid_argument("total_loss: theta_K and the bootstrap target have different layouts");
    }
    const ContextArrays<Real> data = context_arrays<Real>(spec, ctx);
    const NodeId mse = mse_node(tape, spec, theta_k, tape.constant(data.features), tape.constant(data.targets));
    if (lambda == 0.0) return mse;

    std::vector<NodeId> rows;
    rows.reserve(theta_k.size());
    for (std::size_t i = 0; i < theta_k.size(); ++i) {
        const NodeId fixed = tape.stop_gradient(tape.constant(target.tensor_matrix(i)));
        const NodeId diff = tape.sub(theta_k[i], fixed);
        rows.push_back(tape.reshape(diff, {1, tape.shape(diff).size()}));
    }
    const NodeId distance = tape.norm2(tape.concat(rows));
    return tape.add(mse, tape.scale(distance, static_cast<Real>(lambda)));
}

template <class Real>
MetaGradient<Real> meta_gradient(const MetaState<Real>& state, const signals::ContextSet& ctx,
                                 const OuterOptions& options, std::uint64_t seed) {
    const Hyper& hp = state.hyper;
    Tape<Real> tape;
    const std::vector<NodeId> theta0 = nf::to_nodes(tape, state.theta0, true);
    std::vector<NodeId> lrs;
    for (const Real lr : state.inner_lrs) lrs.push_back(tape.parameter(Matrix<Real>::Constant(1, 1, lr)));

    InnerOptions inner_options;
    inner_options.scorer = options.scorer;
    inner_options.gamma = hp.gamma;
    inner_options.seed = seed;
    inner_options.first_order = options.first_order;
    InnerGraph<Real> inner = inner_adapt_graph(tape, state.spec, std::span<const NodeId>(theta0),
                                               std::span<const NodeId>(lrs), ctx, hp.inner_steps, inner_options);

    const nf::ParamVector<Real>& theta_k = inner.report.final_params;
    const BootstrapTarget<Real> target =
        make_bootstrap(state.spec, theta_k, ctx, state.inner_lrs.back(), hp.bootstrap_steps);
    const NodeId total =
        total_loss(tape, state.spec, std::span<const NodeId>(inner.params), target.params, ctx, hp.lambda);

    std::vector<NodeId> wrt = theta0;
    wrt.insert(wrt.end(), lrs.begin(), lrs.end());
    const std::vector<NodeId> grads = tape.grad(total, wrt);

    MetaGradient<Real> out;
    out.gradient.assign(state.theta0.size() + lrs.size(), Real(0));
    for (std::size_t s = 0; s < theta0.size(); ++s) {
        const nf::TensorSlot& slot = state.theta0.slots()[s];
        typename nf::ParamVector<Real>::MutView(out.gradient.data() + slot.offset, slot.rows, slot.cols) =
            tape.evaluate(grads[s]);
    }
    for (std::size_t k = 0; k < lrs.size(); ++k) {
        out.gradient[state.theta0.size() + k] = tape.evaluate(grads[theta0.size() + k])(0, 0);
    }

    SignalOutcome& o = out.outcome;
    o.total_loss = static_cast<double>(tape.evaluate(total)(0, 0));
    for (const Real g : out.gradient) {
        if (!std::isfinite(g)) throw DivergenceError(-1, "non-finite meta-gradient");
    }
    if (!std::isfinite(o.total_loss)) throw DivergenceError(-1, "non-finite total loss");
    o.ok = true;
    o.theta_k_loss = inner.report.final_loss;
    o.theta_k_psnr = inner.report.final_psnr;
    o.boot_loss = target.final_loss;
    double dist = 0.0;
    for (std::size_t i = 0; i < theta_k.size(); ++i) {
        const double d = static_cast<double>(theta_k.flat()[i]) - static_cast<double>(target.params.flat()[i]);
        dist += d * d;
    }
    o.boot_distance = std::sqrt(dist);
    o.tape_nodes = tape.size();
    o.tape_elements = tape.element_count();
    o.inner_steps = std::move(inner.report.steps);
    return out;
}

template <class Real>
OuterResult<Real> outer_step(const MetaState<Real>& state, std::span<const signals::ContextSet> batch,
                             const OuterOptions& options) {
    if (batch.empty()) throw std::invalid_argument("outer_step: empty batch");
    std::vector<std::optional<MetaGradient<Real>>> results(batch.size());
    std::vector<SignalOutcome> outcomes(batch.size());
    parallel_for(batch.size(), options.jobs, [&](std::size_t i) {
        try {
            results[i] = meta_gradient(state, batch[i], options, signal_seed(state.rng_seed, state.outer_step, i));
            outcomes[i] = results[i]->outcome;
        } catch (const DivergenceError& e) {
            outcomes[i].ok = false;
            outcomes[i].error = "signal '" + batch[i].source + "' (#" + std::to_string(i) + "): " + e.what();
        }
    });

    OuterResult<Real> out;
    out.state = state;
    out.mean_gradient.assign(state.adam_m.size(), Real(0));
    for (std::size_t i = 0; i < results.size(); ++i) {
        if (!results[i]) continue;
        ++out.used;
        for (std::size_t p = 0; p < out.mean_gradient.size(); ++p) out.mean_gradient[p] += results[i]->gradient[p];
    }
    if (out.used == 0) {
        std::string why = "every signal in the batch diverged";
        if (!outcomes.empty()) why += "; first: " + outcomes.front().error;
        throw DivergenceError(-1, why);
    }
    for (auto& g : out.mean_gradient) g /= static_cast<Real>(out.used);

    MetaState<Real>& next = out.state;
    const double t = static_cast<double>(next.outer_step + 1);
    const double correction1 = 1.0 - std::pow(kAdamBeta1, t);
    const double correction2 = 1.0 - std::pow(kAdamBeta2, t);
    const std::size_t n_theta = next.theta0.size();
    for (std::size_t p = 0; p < out.mean_gradient.size(); ++p) {
        const double g = static_cast<double>(out.mean_gradient[p]);
        const double m = kAdamBeta1 * static_cast<double>(next.adam_m[p]) + (1.0 - kAdamBeta1) * g;
        const double v = kAdamBeta2 * static_cast<double>(next.adam_v[p]) + (1.0 - kAdamBeta2) * g * g;
        next.adam_m[p] = static_cast<Real>(m);
        next.adam_v[p] = static_cast<Real>(v);
        const double update = next.hyper.meta_lr * (m / correction1) / (std::sqrt(v / correction2) + kAdamEps);
        Real& target = p < n_theta ? next.theta0.flat()[p] : next.inner_lrs[p - n_theta];
        target = static_cast<Real>(static_cast<double>(target) - update);
    }
    for (Real& lr : next.inner_lrs) lr = std::max(lr, static_cast<Real>(kMinInnerLr));
    ++next.outer_step;
    out.signals = std::move(outcomes);
    return out;
}

#define FIELDMETA_INSTANTIATE(Real)                                                                              \
    template struct MetaState<Real>;                                                                             \
    template MetaState<Real> make_state<Real>(const nf::ModelSpec&, const Hyper&, double, std::uint64_t);        \
    template NodeId mse_node<Real>(Tape<Real>&, const nf::ModelSpec&, std::span<const NodeId>, NodeId, NodeId);  \
    template InnerGraph<Real> inner_adapt_graph<Real>(Tape<Real>&, const nf::ModelSpec&, std::span<const NodeId>, \
                                                      std::span<const NodeId>, const signals::ContextSet&, int,  \
                                                      const InnerOptions&);                                      \
    template AdaptReport<Real> inner_adapt<Real>(const nf::ModelSpec&, const nf::ParamVector<Real>&,             \
                                                 std::span<const Real>, const signals::ContextSet&, int,         \
                                                 const InnerOptions&);                                           \
    template BootstrapTarget<Real> make_bootstrap<Real>(const nf::ModelSpec&, const nf::ParamVector<Real>&,      \
                                                        const signals::ContextSet&, Real, int);                  \
    template NodeId total_loss<Real>(Tape<Real>&, const nf::ModelSpec&, std::span<const NodeId>,                 \
                                     const nf::ParamVector<Real>&, const signals::ContextSet&, double);          \
    template MetaGradient<Real> meta_gradient<Real>(const MetaState<Real>&, const signals::ContextSet&,          \
                                                    const OuterOptions&, std::uint64_t);                         \
    template OuterResult<Real> outer_step<Real>(const MetaState<Real>&, std::span<const signals::ContextSet>,    \
                                                const OuterOptions&);

FIELDMETA_INSTANTIATE(float)
FIELDMETA_INSTANTIATE(double)

#undef FIELDMETA_INSTANTIATE

}  // namespace fieldmeta::meta
