#include "fieldmeta/training.hpp"

#include "fieldmeta/checkpoint.hpp"
#include "fieldmeta/eval.hpp"
#include "fieldmeta/rng.hpp"

#include <cstdio>
#include <fstream>
#include <numeric>
#include <random>

namespace fieldmeta::training {

namespace fs = std::filesystem;

std::vector<signals::ContextSet> contexts(std::span<const signals::Signal> signals) {
    std::vector<signals::ContextSet> out;
    out.reserve(signals.size());
    for (const auto& s : signals) out.push_back(signals::grid_context(s));
    return out;
}

std::vector<std::size_t> batch_indices(std::size_t n, std::size_t batch_size, std::uint64_t seed, std::uint64_t step) {
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::mt19937_64 rng(split_seed(seed, Stream::batch, step));
    for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[rng() % i]);
    order.resize(std::min(n, batch_size));
    return order;
}

nf::ModelSpec resolve_spec(const config::TrainConfig& cfg, std::span<const signals::ContextSet> train) {
    if (train.empty()) throw std::invalid_argument("the training split is empty");
    nf::ModelSpec spec = cfg.model;
    spec.input_dim = static_cast<int>(train.front().input_dim());
    spec.output_dim = static_cast<int>(train.front().output_dim());
    for (const auto& c : train) {
        if (c.input_dim() != spec.input_dim || c.output_dim() != spec.output_dim) {
            throw std::invalid_argument("signal '" + c.source + "' has a different coordinate or channel count");
        }
    }
    spec.ff_seed = split_seed(cfg.seed, Stream::fourier, 0);
    spec.validate();
    return spec;
}

void write_log_rows(std::ostream& out, std::uint64_t step, std::span<const std::size_t> ids,
                    const std::vector<meta::SignalOutcome>& outcomes) {
    for (std::size_t i = 0; i < outcomes.size(); ++i) {
        const auto& o = outcomes[i];
        out << step << ',' << ids[i] << ',' << eval::format_metric(o.theta_k_loss) << ','
            << eval::format_metric(o.theta_k_psnr) << ',' << eval::format_metric(o.boot_distance) << ','
            << eval::format_metric(o.boot_loss) << ',' << eval::format_metric(o.total_loss) << ','
            << (o.ok ? "ok" : "diverged") << '\n';
    }
}

namespace {

template <class Real>
struct Driver {
    std::span<const signals::ContextSet> train;
    int batch_size;
    meta::OuterOptions options;
    const Hooks& hooks;
    std::ostream* log = nullptr;

    // One outer step; returns the new state.
    meta::MetaState<Real> step(const meta::MetaState<Real>& state) const {
        const auto ids = batch_indices(train.size(), static_cast<std::size_t>(batch_size), state.rng_seed,
                                       state.outer_step);
        std::vector<signals::ContextSet> batch;
        batch.reserve(ids.size());
        for (const std::size_t i : ids) batch.push_back(train[i]);
        meta::OuterResult<Real> r = meta::outer_step(state, std::span<const signals::ContextSet>(batch), options);
        if (log) {
            write_log_rows(*log, r.state.outer_step, ids, r.signals);
            log->flush();
        }
        if (hooks.on_step) hooks.on_step(r.state.outer_step, r.signals);
        return std::move(r.state);
    }
};

std::string snapshot_name(std::uint64_t step) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "ckpt_%08llu.fmc", static_cast<unsigned long long>(step));
    return buf;
}

}  // namespace

template <class Real>
meta::MetaState<Real> metatrain(const config::TrainConfig& cfg, std::span<const signals::ContextSet> train,
                                const Hooks& hooks) {
    const nf::ModelSpec spec = resolve_spec(cfg, train);
    meta::MetaState<Real> state = meta::make_state<Real>(spec, cfg.hyper, cfg.alpha_init, cfg.seed);

    const bool files = !cfg.output_dir.empty();
    std::ofstream log;
    if (files) {
        fs::create_directories(cfg.output_dir);
        log.open(cfg.output_dir / "train_log.csv", std::ios::trunc);
        if (!log) throw std::runtime_error("cannot write " + (cfg.output_dir / "train_log.csv").string());
        log << kLogHeader << '\n';
        persist::save_state(state, cfg.output_dir / snapshot_name(0));
    }

    meta::OuterOptions options;
    options.scorer = cfg.scorer;
    options.first_order = cfg.first_order;
    options.jobs = cfg.jobs;
    const Driver<Real> driver{train, cfg.batch_size, options, hooks, files ? &log : nullptr};

    for (int t = 0; t < cfg.outer_steps; ++t) {
        try {
            state = driver.step(state);
        } catch (const meta::DivergenceError&) {
            if (files) persist::save_state(state, cfg.output_dir / "final.fmc");
            throw;
        }
        const bool last = t + 1 == cfg.outer_steps;
        if (files && (last || state.outer_step % static_cast<std::uint64_t>(cfg.checkpoint_every) == 0)) {
            persist::save_state(state, cfg.output_dir / snapshot_name(state.outer_step));
        }
    }
    if (files) persist::save_state(state, cfg.output_dir / "final.fmc");
    return state;
}

template <class Real>
meta::MetaState<Real> continue_training(meta::MetaState<Real> state, std::span<const signals::ContextSet> train,
                                        int steps, int batch_size, const meta::OuterOptions& options,
                                        const Hooks& hooks) {
    if (train.empty()) throw std::invalid_argument("the training split is empty");
    const Driver<Real> driver{train, batch_size, options, hooks, nullptr};
    for (int t = 0; t < steps; ++t) state = driver.step(state);
    return state;
}

template meta::MetaState<float> metatrain<float>(const config::TrainConfig&, std::span<const signals::ContextSet>,
                                                 const Hooks&);
template meta::MetaState<double> metatrain<double>(const config::TrainConfig&, std::span<const signals::ContextSet>,
                                                   const Hooks&);
template meta::MetaState<float> continue_training<float>(meta::MetaState<float>, std::span<const signals::ContextSet>,
                                                         int, int, const meta::OuterOptions&, const Hooks&);
template meta::MetaState<double> continue_training<double>(meta::MetaState<double>,
                                                           std::span<const signals::ContextSet>, int, int,
                                                           const meta::OuterOptions&, const Hooks&);

}  // namespace fieldmeta::training
