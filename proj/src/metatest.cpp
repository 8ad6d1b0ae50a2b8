#include "fieldmeta/metatest.hpp"

#include "adapt_common.hpp"
#include "fieldmeta/parallel.hpp"
#include "fieldmeta/rng.hpp"

#include <cmath>
#include <stdexcept>

namespace fieldmeta::meta {

using graph::NodeId;
using graph::Tape;
using namespace detail;

std::string_view to_string(ScaleMode m) {
    switch (m) {
        case ScaleMode::grad_norm: return "grad_norm";
        case ScaleMode::loss_ratio: return "loss_ratio";
        case ScaleMode::none: return "none";
    }
    return "?";
}

ScaleMode parse_scale_mode(std::string_view text) {
    if (text == "grad_norm") return ScaleMode::grad_norm;
    if (text == "loss_ratio") return ScaleMode::loss_ratio;
    if (text == "none") return ScaleMode::none;
    throw std::invalid_argument("unknown scale mode '" + std::string(text) + "' (grad_norm, loss_ratio, none)");
}

std::string_view to_string(Baseline b) {
    switch (b) {
        case Baseline::gradncp: return "gradncp";
        case Baseline::random: return "random";
        case Baseline::pruned: return "pruned";
        case Baseline::scratch: return "scratch";
    }
    return "?";
}

Baseline parse_baseline(std::string_view text) {
    if (text == "gradncp") return Baseline::gradncp;
    if (text == "random") return Baseline::random;
    if (text == "pruned") return Baseline::pruned;
    if (text == "scratch") return Baseline::scratch;
    throw std::invalid_argument("unknown baseline '" + std::string(text) + "' (gradncp, random, pruned, scratch)");
}

template <class Real>
AdaptReport<Real> adapt_rescaled(const nf::ModelSpec& spec, const nf::ParamVector<Real>& theta0,
                                 std::span<const Real> lrs, const signals::ContextSet& ctx, int steps,
                                 const RescaleOptions& options) {
    if (steps > 0 && lrs.empty()) throw std::invalid_argument("adapt_rescaled: no step sizes");
    scoring::selection_size(static_cast<std::size_t>(ctx.size()), options.gamma);
    const ContextArrays<Real> data = context_arrays<Real>(spec, ctx);
    const auto m = static_cast<std::size_t>(ctx.size());

    AdaptReport<Real> report;
    nf::ParamVector<Real> params = theta0;
    for (int t = 0; t < steps; ++t) {
        StepRecord rec;
        const nf::ForwardResult<Real> fwd = nf::forward_features(spec, params, data.features);
        record_fit(rec, fwd, data.targets);
        if (!std::isfinite(rec.loss)) throw DivergenceError(t, "non-finite full-context loss");
        const auto scores = scoring::score_from_forward(options.scorer, spec, fwd, ctx,
                                                        split_seed(options.seed, Stream::random_scorer, t));
        rec.selected = scoring::topk<Real>(scores, options.gamma);

        Tape<Real> tape;
        const std::vector<NodeId> nodes = nf::to_nodes(tape, params, true);
        const std::span<const NodeId> p(nodes);
        const NodeId full = mse_node(tape, spec, p, tape.constant(data.features), tape.constant(data.targets));
        const std::vector<NodeId> g_full = tape.grad(full, p);
        rec.grad_norm_full = grad_norm(tape, std::span<const NodeId>(g_full));

        const bool everything = rec.selected.size() == m;
        if (everything) {
            rec.loss_selected = rec.loss;
            rec.grad_norm_high = rec.grad_norm_full;
        } else if (options.mode != ScaleMode::none) {
            const NodeId high = mse_node(tape, spec, p, tape.constant(gather_rows(data.features, rec.selected)),
                                         tape.constant(gather_rows(data.targets, rec.selected)));
            rec.loss_selected = static_cast<double>(tape.evaluate(high)(0, 0));
            if (options.mode == ScaleMode::grad_norm) {
                const std::vector<NodeId> g_high = tape.grad(high, p);
                rec.grad_norm_high = grad_norm(tape, std::span<const NodeId>(g_high));
            }
        }

        rec.scale = 1.0;
        if (!everything) {
            if (options.mode == ScaleMode::grad_norm && rec.grad_norm_full != 0.0) {
                rec.scale = rec.grad_norm_high / rec.grad_norm_full;
            } else if (options.mode == ScaleMode::loss_ratio && rec.loss != 0.0) {
                rec.scale = rec.loss_selected / rec.loss;
            }
        }
        if (!std::isfinite(rec.grad_norm_full) || !std::isfinite(rec.scale)) {
            throw DivergenceError(t, "non-finite gradient or scale");
        }

        const Real alpha = lrs[std::min<std::size_t>(static_cast<std::size_t>(t), lrs.size() - 1)];
        const Real step = rec.scale == 1.0 ? alpha : static_cast<Real>(static_cast<double>(alpha) * rec.scale);
        const NodeId lr = tape.constant(Matrix<Real>::Constant(1, 1, step));
        std::vector<NodeId> next;
        next.reserve(nodes.size());
        for (std::size_t i = 0; i < nodes.size(); ++i) next.push_back(tape.sub(nodes[i], tape.mul_scalar(lr, g_full[i])));
        params = nf::from_nodes(tape, std::span<const NodeId>(next), params);
        report.steps.push_back(std::move(rec));
    }

    StepRecord last;
    record_fit(last, nf::forward_features(spec, params, data.features), data.targets);
    if (!std::isfinite(last.loss)) throw DivergenceError(steps, "non-finite loss after adaptation");
    report.final_loss = last.loss;
    report.final_psnr = last.psnr;
    report.final_params = std::move(params);
    return report;
}

template <class Real>
AdaptReport<Real> adapt_pruned(const nf::ModelSpec& spec, const nf::ParamVector<Real>& theta0,
                               std::span<const Real> lrs, const signals::ContextSet& ctx, int steps,
                               scoring::Scorer scorer, double gamma, std::uint64_t seed) {
    InnerOptions options;
    options.scorer = scorer;
    options.gamma = gamma;
    options.seed = seed;
    return inner_adapt(spec, theta0, lrs, ctx, steps, options);
}

template <class Real>
AdaptReport<Real> fit_scratch(const nf::ModelSpec& spec, const signals::ContextSet& ctx, Real lr, int steps,
                              std::uint64_t seed) {
    const nf::ParamVector<Real> theta = nf::init_params<Real>(spec, split_seed(seed, Stream::init, 0));
    const std::vector<Real> lrs{lr};
    return inner_adapt(spec, theta, std::span<const Real>(lrs), ctx, steps, InnerOptions{});
}

namespace {

template <class Real>
AdaptReport<double> promote(AdaptReport<Real>&& r) {
    AdaptReport<double> out;
    out.steps = std::move(r.steps);
    out.final_params = r.final_params.template cast<double>();
    out.final_loss = r.final_loss;
    out.final_psnr = r.final_psnr;
    return out;
}

}  // namespace

template <class Real>
CorpusResult evaluate_corpus(const MetaState<Real>& state, std::span<const signals::ContextSet> corpus,
                             const TestOptions& options) {
    if (corpus.empty()) throw std::invalid_argument("evaluate_corpus: empty corpus");
    const int ktest = options.ktest < 0 ? state.hyper.inner_steps : options.ktest;
    const double gamma = options.gamma < 0.0 ? state.hyper.gamma : options.gamma;
    const std::span<const Real> lrs(state.inner_lrs);

    CorpusResult out;
    out.reports.resize(corpus.size());
    parallel_for(corpus.size(), options.jobs, [&](std::size_t i) {
        const std::uint64_t seed = split_seed(options.seed, Stream::random_scorer, i);
        const signals::ContextSet& ctx = corpus[i];
        AdaptReport<Real> r;
        switch (options.baseline) {
            case Baseline::gradncp:
            case Baseline::random: {
                RescaleOptions ro;
                ro.scorer = options.baseline == Baseline::random ? scoring::Scorer::random : scoring::Scorer::gradncp;
                ro.gamma = gamma;
                ro.mode = options.scale_mode;
                ro.seed = seed;
                r = adapt_rescaled(state.spec, state.theta0, lrs, ctx, ktest, ro);
                break;
            }
            case Baseline::pruned:
                r = adapt_pruned(state.spec, state.theta0, lrs, ctx, ktest, scoring::Scorer::gradncp, gamma, seed);
                break;
            case Baseline::scratch:
                r = fit_scratch(state.spec, ctx, static_cast<Real>(options.scratch_lr), ktest, seed);
                break;
        }
        out.reports[i] = promote(std::move(r));
    });

    double psnr = 0.0;
    double loss = 0.0;
    for (std::size_t i = 0; i < corpus.size(); ++i) {
        out.names.push_back(corpus[i].source);
        psnr += out.reports[i].final_psnr;
        loss += out.reports[i].final_loss;
    }
    out.mean_psnr = psnr / static_cast<double>(corpus.size());
    out.mean_loss = loss / static_cast<double>(corpus.size());
    return out;
}

#define FIELDMETA_INSTANTIATE(Real)                                                                             \
    template AdaptReport<Real> adapt_rescaled<Real>(const nf::ModelSpec&, const nf::ParamVector<Real>&,         \
                                                    std::span<const Real>, const signals::ContextSet&, int,     \
                                                    const RescaleOptions&);                                     \
    template AdaptReport<Real> adapt_pruned<Real>(const nf::ModelSpec&, const nf::ParamVector<Real>&,           \
                                                  std::span<const Real>, const signals::ContextSet&, int,       \
                                                  scoring::Scorer, double, std::uint64_t);                      \
    template AdaptReport<Real> fit_scratch<Real>(const nf::ModelSpec&, const signals::ContextSet&, Real, int,   \
                                                 std::uint64_t);                                                \
    template CorpusResult evaluate_corpus<Real>(const MetaState<Real>&, std::span<const signals::ContextSet>,   \
                                                const TestOptions&);

FIELDMETA_INSTANTIATE(float)
FIELDMETA_INSTANTIATE(double)

#undef FIELDMETA_INSTANTIATE

}  // namespace fieldmeta::meta
