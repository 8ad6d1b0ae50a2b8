#pragma once

// Per-example importance scores and TopK context pruning.

#include "fieldmeta/nf.hpp"
#include "fieldmeta/signals.hpp"

#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

namespace fieldmeta::scoring {

/// Scorers usable inside an adaptation loop.
enum class Scorer : std::uint8_t { gradncp = 0, loss = 1, random = 2 };

std::string_view to_string(Scorer s);
Scorer parse_scorer(std::string_view text);

/// Last-layer gradient norm of the single-example squared error, halved:
/// |y - f(x)| * sqrt(|phi(x)|^2 + 1). One forward pass, no backward pass.
/// Requires a linear head.
template <class Real>
std::vector<Real> score_gradncp(const nf::ModelSpec& spec, const nf::ParamVector<Real>& params,
                                const signals::ContextSet& ctx);

/// Sigmoid-head counterpart: |(y - f(x)) * s'(z)| * sqrt(|phi(x)|^2 + 1),
/// z being the head pre-activation.
template <class Real>
std::vector<Real> score_gradncp_nonlinear(const nf::ModelSpec& spec, const nf::ParamVector<Real>& params,
                                          const signals::ContextSet& ctx);

/// Squared error |y - f(x)|^2 per example.
template <class Real>
std::vector<Real> score_loss(const nf::ModelSpec& spec, const nf::ParamVector<Real>& params,
                             const signals::ContextSet& ctx);

enum class UpdateMode : std::uint8_t { full, last_layer };

/// Self-prediction gain: loss decrease on an example after one SGD step of
/// size `alpha` on that example alone. O(M) model updates; an analysis
/// oracle, not a training path.
template <class Real>
std::vector<Real> score_spg(const nf::ModelSpec& spec, const nf::ParamVector<Real>& params,
                            const signals::ContextSet& ctx, double alpha, UpdateMode mode);

inline constexpr std::size_t kDefaultTpgMaxContext = 256;

/// Target-prediction gain: after a step on example j, the mean loss decrease
/// over every other example. O(M^2); refuses contexts above `max_context`.
template <class Real>
std::vector<Real> score_tpg(const nf::ModelSpec& spec, const nf::ParamVector<Real>& params,
                            const signals::ContextSet& ctx, double alpha, UpdateMode mode = UpdateMode::full,
                            std::size_t max_context = kDefaultTpgMaxContext);

/// Uniform [0, 1) scores drawn from `seed`.
std::vector<double> score_random(std::size_t m, std::uint64_t seed);

/// Scores from an existing full-context forward pass.
template <class Real>
std::vector<Real> score_from_forward(Scorer scorer, const nf::ModelSpec& spec, const nf::ForwardResult<Real>& fwd,
                                     const signals::ContextSet& ctx, std::uint64_t seed);

/// ceil(gamma * m), clamped to [1, m]. Throws std::invalid_argument unless
/// 0 < gamma <= 1.
std::size_t selection_size(std::size_t m, double gamma);

/// Indices of the ceil(gamma*M) highest scores, returned in ascending index
/// order. Ties break towards the lower index; NaN ranks below everything.
template <class T>
std::vector<std::uint32_t> topk(std::span<const T> scores, double gamma);

struct ScoredContext {
    std::vector<double> scores;
    std::vector<std::uint32_t> selected;
    double gamma = 1.0;
};

}  // namespace fieldmeta::scoring
