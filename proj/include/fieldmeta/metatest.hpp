#pragma once

// Test-time adaptation from a meta-learned initialization: full-context
// updates with gradient rescaling, plus the pruned-context and scratch-fit
// baselines.

#include "fieldmeta/metatrain.hpp"

#include <string_view>

namespace fieldmeta::meta {

enum class ScaleMode : std::uint8_t { grad_norm, loss_ratio, none };

std::string_view to_string(ScaleMode m);
ScaleMode parse_scale_mode(std::string_view text);

struct RescaleOptions {
    scoring::Scorer scorer = scoring::Scorer::gradncp;
    double gamma = 0.25;
    ScaleMode mode = ScaleMode::grad_norm;
    std::uint64_t seed = 0;
};

/// Full-context SGD whose gradient is multiplied at every step by
/// |grad(selected)| / |grad(full)| (grad_norm), L(selected) / L(full)
/// (loss_ratio) or 1 (none). The scale is 1 when the selection is the whole
/// context or the denominator is zero. Step t uses lrs[min(t, K-1)].
template <class Real>
AdaptReport<Real> adapt_rescaled(const nf::ModelSpec& spec, const nf::ParamVector<Real>& theta0,
                                 std::span<const Real> lrs, const signals::ContextSet& ctx, int steps,
                                 const RescaleOptions& options);

/// The meta-training inner loop run detached at test time.
template <class Real>
AdaptReport<Real> adapt_pruned(const nf::ModelSpec& spec, const nf::ParamVector<Real>& theta0,
                               std::span<const Real> lrs, const signals::ContextSet& ctx, int steps,
                               scoring::Scorer scorer, double gamma, std::uint64_t seed);

/// Plain full-context SGD from a random initialization.
template <class Real>
AdaptReport<Real> fit_scratch(const nf::ModelSpec& spec, const signals::ContextSet& ctx, Real lr, int steps,
                              std::uint64_t seed);

enum class Baseline : std::uint8_t { gradncp, random, pruned, scratch };

std::string_view to_string(Baseline b);
Baseline parse_baseline(std::string_view text);

struct TestOptions {
    Baseline baseline = Baseline::gradncp;
    int ktest = -1;            // < 0: the meta-trained K
    ScaleMode scale_mode = ScaleMode::grad_norm;
    double gamma = -1.0;       // < 0: the meta-trained gamma
    double scratch_lr = 1e-2;
    std::uint64_t seed = 0;
    int jobs = 1;
};

struct CorpusResult {
    std::vector<std::string> names;
    std::vector<AdaptReport<double>> reports;  // promoted to double for reporting
    double mean_psnr = kNaN;
    double mean_loss = kNaN;
};

/// Adapts every context with the chosen baseline. Signal i uses the random
/// stream split_seed(seed, random_scorer, i); results keep input order.
template <class Real>
CorpusResult evaluate_corpus(const MetaState<Real>& state, std::span<const signals::ContextSet> corpus,
                             const TestOptions& options);

}  // namespace fieldmeta::meta
