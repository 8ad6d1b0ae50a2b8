#pragma once

// The meta-training driver: batching, checkpoints and the per-signal CSV log.

#include "fieldmeta/config.hpp"
#include "fieldmeta/metatrain.hpp"

#include <functional>
#include <iosfwd>

namespace fieldmeta::training {

/// One context per signal, in dataset order.
std::vector<signals::ContextSet> contexts(std::span<const signals::Signal> signals);

/// Indices of the signals processed at outer step `step`: a prefix of a
/// Fisher-Yates permutation of [0, n) drawn from split_seed(seed, batch, step).
std::vector<std::size_t> batch_indices(std::size_t n, std::size_t batch_size, std::uint64_t seed, std::uint64_t step);

/// Fixes input/output dims from the data and the Fourier seed from the root seed.
nf::ModelSpec resolve_spec(const config::TrainConfig& cfg, std::span<const signals::ContextSet> train);

inline constexpr const char* kLogHeader =
    "step,signal_id,loss,psnr,bootstrap_distance,bootstrap_loss,total_loss,status";

struct Hooks {
    /// Called after every outer step with the new state's step counter.
    std::function<void(std::uint64_t step, const std::vector<meta::SignalOutcome>&)> on_step;
};

/// Runs cfg.outer_steps outer steps from a fresh state. When cfg.output_dir
/// is non-empty it receives ckpt_<step>.fmc snapshots (at step 0, every
/// checkpoint_every steps and at the end), final.fmc and train_log.csv.
/// If an entire batch diverges the last good state is checkpointed and the
/// DivergenceError propagates.
template <class Real>
meta::MetaState<Real> metatrain(const config::TrainConfig& cfg, std::span<const signals::ContextSet> train,
                                const Hooks& hooks = {});

/// Continues an existing state for `steps` more outer steps (no files).
template <class Real>
meta::MetaState<Real> continue_training(meta::MetaState<Real> state, std::span<const signals::ContextSet> train,
                                        int steps, int batch_size, const meta::OuterOptions& options,
                                        const Hooks& hooks = {});

void write_log_rows(std::ostream& out, std::uint64_t step, std::span<const std::size_t> ids,
                    const std::vector<meta::SignalOutcome>& outcomes);

}  // namespace fieldmeta::training
