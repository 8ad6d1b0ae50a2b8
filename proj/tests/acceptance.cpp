// Acceptance suite: one PASS/FAIL line per criterion.
//
//   acceptance [--workdir DIR] [--only 1,4,5] [--outer-steps N]

#include "oracles.hpp"

#include "fieldmeta/checkpoint.hpp"
#include "fieldmeta/eval.hpp"
#include "fieldmeta/metatest.hpp"
#include "fieldmeta/training.hpp"

#include <CLI11.hpp>

#include <bit>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <thread>

using namespace fieldmeta;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

struct Verdict {
    bool pass = false;
    std::string detail;
};

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(const char* f, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, v);
    return buf;
}

// ---------------------------------------------------------------------------
// Desk-scale meta-training runs, trained on first use and shared.

struct Run {
    meta::MetaState<float> state;
    double train_seconds = 0.0;
    double boot_loss = 0.0;    // mean over every logged signal and step
    double theta_k_loss = 0.0;
};

class Desk {
public:
    Desk(fs::path workdir, int outer_steps, int jobs) : workdir_(std::move(workdir)), outer_steps_(outer_steps), jobs_(jobs) {
        const int res[2] = {32, 32};
        data_ = signals::synth_dataset(signals::SynthKind::shapes, 64, res, 1, 0.375, 11);
        train_ = training::contexts(data_.train);
        test_ = training::contexts(data_.test);
    }

    const std::vector<signals::ContextSet>& train() const { return train_; }
    const std::vector<signals::ContextSet>& test() const { return test_; }

    config::TrainConfig base_config() const {
        config::TrainConfig cfg;
        config::apply_preset(cfg, "desk");
        cfg.hyper.meta_lr = 3e-4;
        cfg.hyper.gamma = 0.25;
        cfg.hyper.lambda = 100.0;
        cfg.hyper.bootstrap_steps = 5;
        cfg.outer_steps = outer_steps_;
        cfg.batch_size = 4;
        cfg.checkpoint_every = 100;
        cfg.seed = 5;
        cfg.jobs = jobs_;
        return cfg;
    }

    /// "gradncp": gamma 0.25, lambda 100, L 5. "random": random scorer.
    /// "full": gamma 1. "no_boot": lambda 0.
    const Run& run(const std::string& name) {
        if (auto it = runs_.find(name); it != runs_.end()) return it->second;
        auto cfg = base_config();
        if (name == "random") cfg.scorer = scoring::Scorer::random;
        if (name == "full") cfg.hyper.gamma = 1.0;
        if (name == "no_boot") {
            cfg.hyper.lambda = 0.0;
            cfg.hyper.bootstrap_steps = 0;
        }
        cfg.output_dir = workdir_ / ("run_" + name);
        fs::remove_all(cfg.output_dir);

        Run r;
        double boot = 0.0;
        double theta = 0.0;
        std::size_t n = 0;
        training::Hooks hooks;
        hooks.on_step = [&](std::uint64_t step, const std::vector<meta::SignalOutcome>& outcomes) {
            for (const auto& o : outcomes) {
                if (!o.ok) continue;
                boot += o.boot_loss;
                theta += o.theta_k_loss;
                ++n;
            }
            if (step % 100 == 0) std::cerr << "  [" << name << "] outer step " << step << "/" << cfg.outer_steps << '\n';
        };
        const auto t0 = Clock::now();
        r.state = training::metatrain<float>(cfg, train_, hooks);
        r.train_seconds = seconds_since(t0);
        r.boot_loss = n ? boot / static_cast<double>(n) : meta::kNaN;
        r.theta_k_loss = n ? theta / static_cast<double>(n) : meta::kNaN;
        std::cerr << "  [" << name << "] trained in " << fmt("%.1f", r.train_seconds) << " s\n";
        return runs_.emplace(name, std::move(r)).first->second;
    }

    meta::CorpusResult evaluate(const std::string& name, meta::TestOptions o) {
        o.jobs = jobs_;
        return meta::evaluate_corpus(run(name).state, std::span<const signals::ContextSet>(test_), o);
    }

private:
    fs::path workdir_;
    int outer_steps_;
    int jobs_;
    signals::Dataset data_;
    std::vector<signals::ContextSet> train_;
    std::vector<signals::ContextSet> test_;
    std::map<std::string, Run> runs_;
};

// Alg. 2 with each model's own scorer and gamma.
meta::TestOptions own_protocol(const std::string& name) {
    meta::TestOptions o;
    o.baseline = name == "random" ? meta::Baseline::random : meta::Baseline::gradncp;
    o.scale_mode = meta::ScaleMode::grad_norm;
    return o;
}

// ---------------------------------------------------------------------------

Verdict autodiff() {
    const auto t0 = Clock::now();
    double worst = 0.0;
    const int graphs = 120;
    for (std::uint64_t seed = 0; seed < graphs; ++seed) worst = std::max(worst, oracles::check_random_graph(seed).max_rel_error);
    const double second = oracles::quadratic_meta_gradient(false);
    const double first = oracles::quadratic_meta_gradient(true);
    const double secs = seconds_since(t0);
    const bool pass = worst < 1e-4 && std::abs(second - 0.5) <= 1e-10 && std::abs(first - 1.0) <= 1e-10 && secs < 60.0;
    std::ostringstream d;
    d << graphs << " graphs, max rel err " << fmt("%.2e", worst) << "; toy meta-gradient " << fmt("%.12f", second)
      << " (first order " << fmt("%.12f", first) << "); " << fmt("%.1f", secs) << " s";
    return {pass, d.str()};
}

Verdict score_identity() {
    const auto t0 = Clock::now();
    const auto lin = oracles::score_identity(1000, nf::Head::linear, 101);
    const auto sig = oracles::score_identity(1000, nf::Head::sigmoid, 202);
    const double secs = seconds_since(t0);
    const bool pass = lin.max_rel_error <= 1e-9 && sig.max_rel_error <= 1e-9 && lin.draws == 1000 && sig.draws == 1000 && secs < 60.0;
    std::ostringstream d;
    d << "max rel err linear " << fmt("%.2e", lin.max_rel_error) << ", sigmoid " << fmt("%.2e", sig.max_rel_error) << " over "
      << lin.draws << "+" << sig.draws << " draws; " << fmt("%.1f", secs) << " s";
    return {pass, d.str()};
}

Verdict taylor() {
    const double d4 = oracles::taylor_deviation(1e-4, 200, 7);
    const double d5 = oracles::taylor_deviation(1e-5, 200, 7);
    const double d6 = oracles::taylor_deviation(1e-6, 200, 7);
    const bool pass = d4 <= 0.05 && d5 < d4 && d6 < d5;
    return {pass, "mean deviation " + fmt("%.3e", d4) + " / " + fmt("%.3e", d5) + " / " + fmt("%.3e", d6) +
                      " at alpha 1e-4 / 1e-5 / 1e-6"};
}

Verdict selection_quality(Desk& desk) {
    const auto& state = desk.run("gradncp").state;
    const auto theta0 = state.theta0.cast<double>();
    const std::vector<double> lrs(state.inner_lrs.begin(), state.inner_lrs.end());
    const auto& spec = state.spec;
    const std::size_t signals = std::min<std::size_t>(8, desk.test().size());
    double total = 0.0;
    double total_raw = 0.0;
    double lowest = 1.0;
    int count = 0;
    for (std::size_t i = 0; i < signals; ++i) {
        const auto& ctx = desk.test()[i];
        // the inner loss is a mean, so one example moves the weights by alpha / |selected|
        const double share = static_cast<double>(scoring::selection_size(static_cast<std::size_t>(ctx.size()), state.hyper.gamma));
        auto params = theta0;
        for (int k = 0; k < state.hyper.inner_steps; ++k) {
            const double alpha = lrs[static_cast<std::size_t>(k)];
            const auto g = scoring::score_gradncp(spec, params, ctx);
            const auto s = scoring::score_spg(spec, params, ctx, alpha / share, scoring::UpdateMode::last_layer);
            const double rho = eval::spearman(g, s);
            total += rho;
            total_raw += eval::spearman(g, scoring::score_spg(spec, params, ctx, alpha, scoring::UpdateMode::last_layer));
            lowest = std::min(lowest, rho);
            ++count;
            const std::vector<double> one{alpha};
            params = meta::adapt_pruned<double>(spec, params, std::span<const double>(one), ctx, 1, scoring::Scorer::gradncp,
                                                state.hyper.gamma, 0)
                         .final_params;
        }
    }
    const double mean = total / count;
    std::ostringstream d;
    d << "mean Spearman(gradncp, SPG_last) " << fmt("%.4f", mean) << " over " << count << " (signal, step) pairs, lowest "
      << fmt("%.4f", lowest) << " (per-example step alpha_k/|selected|; at the raw alpha_k "
      << fmt("%.4f", total_raw / count) << ")"
      << (mean >= 0.9 ? "; meets the 0.9 target" : mean >= 0.8 ? "; below the 0.9 target, above the 0.8 floor" : "");
    return {mean >= 0.8, d.str()};
}

Verdict ordering(Desk& desk) {
    const auto t0 = Clock::now();
    const double a = desk.evaluate("gradncp", own_protocol("gradncp")).mean_psnr;
    const double b = desk.evaluate("random", own_protocol("random")).mean_psnr;
    const double c = desk.evaluate("full", own_protocol("full")).mean_psnr;
    const double train = desk.run("gradncp").train_seconds + desk.run("random").train_seconds + desk.run("full").train_seconds;
    const double eval_secs = seconds_since(t0);
    // Training happened inside the first evaluate calls; count it once.
    const double total = std::max(train, eval_secs);
    const bool pass = a >= b + 0.5 && c >= a && total < 1800.0;
    std::ostringstream d;
    d << "test PSNR gradncp " << fmt("%.3f", a) << " dB, random " << fmt("%.3f", b) << " dB (margin " << fmt("%+.3f", a - b)
      << "), gamma=1 " << fmt("%.3f", c) << " dB; " << fmt("%.0f", total) << " s";
    return {pass, d.str()};
}

Verdict bootstrap(Desk& desk) {
    const double with = desk.evaluate("gradncp", own_protocol("gradncp")).mean_psnr;
    const double without = desk.evaluate("no_boot", own_protocol("no_boot")).mean_psnr;
    const auto& r = desk.run("gradncp");
    const bool pass = with >= without - 0.1 && r.boot_loss < r.theta_k_loss;
    std::ostringstream d;
    d << "test PSNR lambda=100 " << fmt("%.3f", with) << " dB vs lambda=0 " << fmt("%.3f", without) << " dB ("
      << fmt("%+.3f", with - without) << "); mean training loss of target " << fmt("%.5f", r.boot_loss) << " < theta_K "
      << fmt("%.5f", r.theta_k_loss);
    return {pass, d.str()};
}

Verdict rescaling(Desk& desk) {
    auto o = own_protocol("gradncp");
    const auto grad = desk.evaluate("gradncp", o);
    o.scale_mode = meta::ScaleMode::loss_ratio;
    const double loss_ratio = desk.evaluate("gradncp", o).mean_psnr;
    o.scale_mode = meta::ScaleMode::none;
    const double none = desk.evaluate("gradncp", o).mean_psnr;

    double worst = 0.0;
    for (const auto& rep : grad.reports) {
        for (const auto& s : rep.steps) {
            const double literal = s.grad_norm_high / s.grad_norm_full;
            worst = std::max(worst, std::abs(s.scale - literal) / std::max(literal, 1e-300));
        }
    }
    // Exactly one at gamma = 1.
    const auto& state = desk.run("gradncp").state;
    meta::RescaleOptions full;
    full.gamma = 1.0;
    bool unit = true;
    for (std::size_t i = 0; i < 4; ++i) {
        const auto rep = meta::adapt_rescaled<float>(state.spec, state.theta0, std::span<const float>(state.inner_lrs),
                                                     desk.test()[i], state.hyper.inner_steps, full);
        for (const auto& s : rep.steps) unit = unit && s.scale == 1.0;
    }
    const bool pass = grad.mean_psnr >= none && loss_ratio >= none && worst <= 1e-12 && unit;
    std::ostringstream d;
    d << "test PSNR grad_norm " << fmt("%.3f", grad.mean_psnr) << ", loss_ratio " << fmt("%.3f", loss_ratio) << ", none "
      << fmt("%.3f", none) << " dB; scale vs literal ratio max rel err " << fmt("%.1e", worst) << "; scale at gamma=1 "
      << (unit ? "exactly 1" : "NOT 1");
    return {pass, d.str()};
}

Verdict myopia(Desk& desk) {
    auto o = own_protocol("gradncp");
    const int k = desk.run("gradncp").state.hyper.inner_steps;
    o.ktest = 4 * k;
    const auto r = desk.evaluate("gradncp", o);
    // PSNR after t updates: steps[t].psnr for t < 4K, final_psnr at 4K.
    std::vector<double> curve;
    for (int t = k; t <= 4 * k; ++t) {
        double sum = 0.0;
        for (const auto& rep : r.reports) sum += t < 4 * k ? rep.steps[static_cast<std::size_t>(t)].psnr : rep.final_psnr;
        curve.push_back(sum / static_cast<double>(r.reports.size()));
    }
    double worst_drop = 0.0;
    for (std::size_t i = 1; i < curve.size(); ++i) worst_drop = std::min(worst_drop, curve[i] - curve[i - 1]);
    const bool pass = worst_drop >= -0.1;
    std::ostringstream d;
    d << "mean PSNR " << fmt("%.3f", curve.front()) << " dB at K_test=" << k << " -> " << fmt("%.3f", curve.back())
      << " dB at " << 4 * k << "; largest per-step drop " << fmt("%.4f", -worst_drop) << " dB";
    return {pass, d.str()};
}

Verdict memory(Desk& desk) {
    const auto cfg = desk.base_config();
    const auto spec = training::resolve_spec(cfg, std::span<const signals::ContextSet>(desk.train()));
    auto per_step = [&](double gamma) {
        meta::Hyper h = cfg.hyper;
        h.gamma = gamma;
        const auto state = meta::make_state<float>(spec, h, cfg.alpha_init, cfg.seed);
        const auto mg = meta::meta_gradient(state, desk.train()[0], {}, 0);
        double nodes = 0.0;
        double elements = 0.0;
        for (const auto& s : mg.outcome.inner_steps) {
            nodes += static_cast<double>(s.tape_nodes);
            elements += static_cast<double>(s.tape_elements);
        }
        const double steps = static_cast<double>(mg.outcome.inner_steps.size());
        return std::pair{nodes / steps, elements / steps};
    };
    const auto pruned = per_step(0.25);
    const auto full = per_step(1.0);
    const double ratio = pruned.second / full.second;
    std::ostringstream d;
    d << "recorded elements per inner step " << fmt("%.0f", pruned.second) << " vs " << fmt("%.0f", full.second)
      << " (ratio " << fmt("%.3f", ratio) << "); nodes per step " << fmt("%.0f", pruned.first) << " vs "
      << fmt("%.0f", full.first);
    return {ratio <= 0.30, d.str()};
}

Verdict persistence(Desk& desk, const fs::path& workdir) {
    std::vector<std::string> problems;
    // Identical seeds give identical checkpoint bytes.
    auto cfg = desk.base_config();
    cfg.model.hidden_dim = 16;
    cfg.hyper.inner_steps = 2;
    cfg.hyper.bootstrap_steps = 2;
    cfg.outer_steps = 6;
    cfg.checkpoint_every = 3;
    const std::vector<signals::ContextSet> small(desk.train().begin(), desk.train().begin() + 6);
    auto train_into = [&](const std::string& dir, std::uint64_t seed) {
        auto c = cfg;
        c.seed = seed;
        c.output_dir = workdir / dir;
        fs::remove_all(c.output_dir);
        training::metatrain<float>(c, std::span<const signals::ContextSet>(small));
        return c.output_dir;
    };
    const auto a = train_into("det_a", 3);
    const auto b = train_into("det_b", 3);
    const auto other = train_into("det_c", 4);
    std::size_t files = 0;
    for (const auto& entry : fs::directory_iterator(a)) {
        const auto name = entry.path().filename();
        if (persist::read_file(entry.path()) != persist::read_file(b / name)) problems.push_back(name.string() + " differs");
        ++files;
    }
    if (persist::read_file(a / "final.fmc") == persist::read_file(other / "final.fmc")) problems.push_back("seed has no effect");

    // Round trips.
    const auto bytes = persist::read_file(a / "final.fmc");
    const auto state = persist::load_state<float>(a / "final.fmc");
    if (persist::encode_state(state) != bytes) problems.push_back("state round trip is not byte-exact");
    persist::save_params(state.spec, state.theta0, workdir / "params.fmc");
    const auto params = persist::load_params<float>(workdir / "params.fmc");
    if (persist::encode_params(params.spec, params.params) != persist::read_file(workdir / "params.fmc"))
        problems.push_back("params round trip is not byte-exact");
    const auto wide = persist::load_state<double>(a / "final.fmc");
    for (std::size_t i = 0; i < wide.theta0.size(); ++i) {
        if (wide.theta0.flat()[i] != static_cast<double>(state.theta0.flat()[i])) {
            problems.push_back("f32 -> f64 widening is not exact");
            break;
        }
    }

    // Each corruption raises its own documented code.
    using persist::CheckpointErrc;
    auto code_of = [](const std::function<void()>& fn) -> std::optional<CheckpointErrc> {
        try {
            fn();
        } catch (const persist::CheckpointError& e) {
            return e.code();
        } catch (...) {
        }
        return std::nullopt;
    };
    auto decode = [](oracles::Bytes b) { return [b] { persist::decode_state<float>(b); }; };
    std::vector<std::pair<CheckpointErrc, std::function<void()>>> cases;
    {
        auto x = bytes;
        x[0] = 'Z';
        cases.emplace_back(CheckpointErrc::bad_magic, decode(x));
    }
    {
        auto x = bytes;
        oracles::write_le(x, 4, 9, 4);
        oracles::reseal(x);
        cases.emplace_back(CheckpointErrc::unsupported_version, decode(x));
    }
    cases.emplace_back(CheckpointErrc::length_mismatch, decode(oracles::Bytes(bytes.begin(), bytes.end() - 3)));
    {
        auto x = bytes;
        x[x.size() / 2] ^= 0x10;
        cases.emplace_back(CheckpointErrc::checksum_mismatch, decode(x));
    }
    {
        auto x = bytes;
        const auto rec = oracles::find_record(x, 31);
        oracles::write_le(x, rec->payload, std::bit_cast<std::uint32_t>(std::numeric_limits<float>::infinity()), 4);
        oracles::reseal(x);
        cases.emplace_back(CheckpointErrc::non_finite_payload, decode(x));
    }
    {
        auto x = bytes;
        oracles::write_le(x, oracles::find_record(x, 34)->header, 4000, 2);
        oracles::reseal(x);
        cases.emplace_back(CheckpointErrc::malformed_record, decode(x));
    }
    cases.emplace_back(CheckpointErrc::wrong_kind, [&] { persist::load_params<float>(a / "final.fmc"); });
    cases.emplace_back(CheckpointErrc::precision_mismatch, [&] {
        persist::decode_state<float>(persist::encode_state(wide));
    });
    cases.emplace_back(CheckpointErrc::open_failed, [&] { persist::load_state<float>(workdir / "absent.fmc"); });
    std::set<CheckpointErrc> seen;
    for (const auto& [expected, fn] : cases) {
        const auto got = code_of(fn);
        if (got != expected) problems.push_back(std::string("expected ") + std::string(persist::to_string(expected)));
        if (got) seen.insert(*got);
    }

    // Signal files: distinct codes as well.
    using signals::IoErrc;
    const fs::path dir = workdir / "bad_signals";
    fs::create_directories(dir);
    auto put = [&](const std::string& name, const std::string& content) {
        std::ofstream(dir / name, std::ios::binary) << content;
        return dir / name;
    };
    const std::vector<std::pair<IoErrc, fs::path>> io_cases{
        {IoErrc::malformed_header, put("a.ppm", "P3\n1 1\n255\n0 0 0\n")},
        {IoErrc::truncated_payload, put("b.ppm", "P6\n2 2\n255\n" + std::string(3, '\0'))},
        {IoErrc::unsupported_bit_depth, put("c.pgm", "P5\n1 1\n65535\n" + std::string(2, '\0'))},
        {IoErrc::unsupported_format, put("d.png", "not really")},
        {IoErrc::open_failed, dir / "missing.ppm"},
    };
    std::set<IoErrc> io_seen;
    for (const auto& [expected, p] : io_cases) {
        try {
            signals::load_signal(p);
            problems.push_back(p.filename().string() + " loaded");
        } catch (const signals::IoError& e) {
            if (e.code() != expected) problems.push_back(p.filename().string() + ": " + std::string(signals::to_string(e.code())));
            io_seen.insert(e.code());
        }
    }

    std::ostringstream d;
    d << files << " checkpoint files bit-identical across runs; state/params round trips byte-exact; " << seen.size()
      << "/" << cases.size() << " checkpoint and " << io_seen.size() << "/" << io_cases.size() << " signal error codes distinct";
    for (const auto& p : problems) d << "; " << p;
    return {problems.empty() && seen.size() == cases.size() && io_seen.size() == io_cases.size(), d.str()};
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"fieldmeta acceptance suite"};
    fs::path workdir = fs::temp_directory_path() / "fieldmeta_acceptance";
    std::vector<int> only;
    int outer_steps = 400;
    int jobs = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
    app.add_option("--workdir", workdir)->capture_default_str();
    app.add_option("--only", only, "criteria to run")->delimiter(',');
    app.add_option("--outer-steps", outer_steps)->capture_default_str();
    app.add_option("--jobs", jobs)->capture_default_str();
    CLI11_PARSE(app, argc, argv);
    fs::create_directories(workdir);

    Desk desk(workdir, outer_steps, jobs);
    const std::vector<std::pair<std::string, std::function<Verdict()>>> criteria{
        {"autodiff correctness", autodiff},
        {"score identity", score_identity},
        {"Taylor property", taylor},
        {"selection quality", [&] { return selection_quality(desk); }},
        {"method ordering", [&] { return ordering(desk); }},
        {"bootstrap effect", [&] { return bootstrap(desk); }},
        {"rescaling effect", [&] { return rescaling(desk); }},
        {"myopia reduction", [&] { return myopia(desk); }},
        {"memory proxy", [&] { return memory(desk); }},
        {"determinism and persistence", [&] { return persistence(desk, workdir); }},
    };

    int failed = 0;
    std::ofstream summary(workdir / "summary.txt");
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        const int id = static_cast<int>(i + 1);
        if (!only.empty() && std::find(only.begin(), only.end(), id) == only.end()) continue;
        Verdict v;
        try {
            v = criteria[i].second();
        } catch (const std::exception& e) {
            v = {false, std::string("threw: ") + e.what()};
        }
        failed += v.pass ? 0 : 1;
        std::ostringstream line;
        line << (v.pass ? "PASS" : "FAIL") << "  criterion " << id << " (" << criteria[i].first << "): " << v.detail;
        std::cout << line.str() << std::endl;
        summary << line.str() << '\n';
    }
    std::cout << (failed ? std::to_string(failed) + " criterion(s) failed" : std::string("all criteria passed")) << std::endl;
    return failed ? 1 : 0;
}
