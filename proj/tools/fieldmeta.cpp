// fieldmeta command-line tool.

#include "fieldmeta/checkpoint.hpp"
#include "fieldmeta/config.hpp"
#include "fieldmeta/eval.hpp"
#include "fieldmeta/metatest.hpp"
#include "fieldmeta/parallel.hpp"
#include "fieldmeta/rng.hpp"
#include "fieldmeta/training.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

namespace fs = std::filesystem;
using namespace fieldmeta;

namespace {

constexpr int kExitError = 1;
constexpr int kExitDiverged = 3;

enum class Precision { f32, f64 };

std::optional<Precision> env_precision() {
    const char* v = std::getenv("FIELDMETA_PRECISION");
    if (v == nullptr || *v == '\0') return std::nullopt;
    const std::string s = v;
    if (s == "f32") return Precision::f32;
    if (s == "f64") return Precision::f64;
    throw std::invalid_argument("FIELDMETA_PRECISION must be f32 or f64, got '" + s + "'");
}

// The environment wins; otherwise follow the checkpoint.
Precision precision_for(const fs::path& checkpoint) {
    if (const auto p = env_precision()) return *p;
    return persist::read_header(checkpoint).precision == persist::Precision::f32 ? Precision::f32 : Precision::f64;
}

template <class Fn>
int dispatch(Precision p, Fn&& fn) {
    return p == Precision::f32 ? fn(float{}) : fn(double{});
}

std::ofstream open_csv(const fs::path& path) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    return out;
}

std::vector<int> parse_resolution(const std::string& text) {
    std::vector<int> res;
    std::stringstream ss(text);
    std::string part;
    while (std::getline(ss, part, 'x')) {
        const int v = std::stoi(part);
        if (v < 1) throw std::invalid_argument("resolution entries must be positive: " + text);
        res.push_back(v);
    }
    if (res.empty() || res.size() > 3) throw std::invalid_argument("resolution must look like 32x32: " + text);
    return res;
}

std::vector<signals::ContextSet> load_split(const fs::path& dir, const std::string& split) {
    const auto ds = signals::load_dataset(dir);
    std::vector<signals::Signal> chosen;
    if (split == "train" || split == "all") chosen.insert(chosen.end(), ds.train.begin(), ds.train.end());
    if (split == "test" || split == "all") chosen.insert(chosen.end(), ds.test.begin(), ds.test.end());
    if (chosen.empty()) throw std::runtime_error(dir.string() + ": the " + split + " split is empty");
    auto ctxs = training::contexts(chosen);
    for (std::size_t i = 0; i < ctxs.size(); ++i) ctxs[i].source = chosen[i].name;
    return ctxs;
}

void check_dims(const nf::ModelSpec& spec, const signals::ContextSet& ctx) {
    if (ctx.input_dim() != spec.input_dim || ctx.output_dim() != spec.output_dim) {
        throw std::runtime_error(ctx.source + ": signal dims (" + std::to_string(ctx.input_dim()) + " -> " +
                                 std::to_string(ctx.output_dim()) + ") do not match the checkpoint (" +
                                 std::to_string(spec.input_dim) + " -> " + std::to_string(spec.output_dim) + ")");
    }
}

// Rows step 0..K: losses measured before each update, then the final fit.
void write_report_rows(std::ostream& out, std::size_t id, const meta::AdaptReport<double>& r) {
    for (std::size_t k = 0; k < r.steps.size(); ++k) {
        const auto& s = r.steps[k];
        out << id << ',' << k << ',' << eval::format_metric(s.loss) << ',' << eval::format_metric(s.psnr) << ','
            << eval::format_metric(s.scale) << '\n';
    }
    out << id << ',' << r.steps.size() << ',' << eval::format_metric(r.final_loss) << ','
        << eval::format_metric(r.final_psnr) << ",\n";
}

// ---------------------------------------------------------------------------

struct SynthArgs {
    std::string kind = "shapes";
    int count = 64;
    std::string resolution = "32x32";
    int channels = 1;
    double test_fraction = 0.25;
    fs::path out;
};

int cmd_synth(const SynthArgs& a, std::uint64_t seed) {
    const auto res = parse_resolution(a.resolution);
    const auto ds = signals::synth_dataset(signals::parse_synth_kind(a.kind), a.count, res, a.channels, a.test_fraction, seed);
    signals::save_dataset(a.out, ds);
    std::cout << "wrote " << ds.train.size() << " train and " << ds.test.size() << " test signals to " << a.out.string()
              << '\n';
    return 0;
}

// ---------------------------------------------------------------------------

template <class Real>
int run_metatrain(const config::TrainConfig& cfg) {
    if (!fs::is_directory(cfg.dataset)) throw std::runtime_error("dataset directory not found: " + cfg.dataset.string());
    const auto ds = signals::load_dataset(cfg.dataset);
    if (ds.train.empty()) throw std::runtime_error(cfg.dataset.string() + ": dataset has no training signals");
    const auto train = training::contexts(ds.train);
    training::Hooks hooks;
    const auto every = static_cast<std::uint64_t>(cfg.checkpoint_every);
    hooks.on_step = [&](std::uint64_t step, const std::vector<meta::SignalOutcome>& outcomes) {
        if (step % every != 0 && step != static_cast<std::uint64_t>(cfg.outer_steps)) return;
        double psnr = 0.0;
        int ok = 0;
        for (const auto& o : outcomes) {
            if (!o.ok) continue;
            psnr += o.theta_k_psnr;
            ++ok;
        }
        std::cerr << "step " << step << "/" << cfg.outer_steps << "  batch psnr "
                  << (ok > 0 ? eval::format_metric(psnr / ok) : "nan") << '\n';
    };
    try {
        training::metatrain<Real>(cfg, train, hooks);
    } catch (const meta::DivergenceError& e) {
        std::cerr << "fieldmeta: meta-training diverged: " << e.what() << '\n';
        return kExitDiverged;
    }
    std::cout << "wrote " << (cfg.output_dir / "final.fmc").string() << '\n';
    return 0;
}

struct TrainArgs {
    fs::path config;
};

int cmd_metatrain(const TrainArgs& a, std::optional<std::uint64_t> seed, std::optional<int> jobs) {
    auto cfg = config::load_config(a.config);
    if (seed) cfg.seed = *seed;
    if (jobs) cfg.jobs = *jobs;
    return dispatch(env_precision().value_or(Precision::f32),
                    [&](auto tag) { return run_metatrain<decltype(tag)>(cfg); });
}

// ---------------------------------------------------------------------------

struct TestArgs {
    fs::path checkpoint;
    fs::path dataset;
    std::string split = "test";
    int ktest = -1;
    std::string scale_mode = "grad_norm";
    double gamma = -1.0;
    std::string baseline = "gradncp";
    double scratch_lr = 1e-2;
    fs::path out = "metatest.csv";
};

template <class Real>
int run_metatest(const TestArgs& a, std::uint64_t seed, int jobs) {
    const auto state = persist::load_state<Real>(a.checkpoint);
    const auto corpus = load_split(a.dataset, a.split);
    for (const auto& c : corpus) check_dims(state.spec, c);
    meta::TestOptions o;
    o.baseline = meta::parse_baseline(a.baseline);
    o.ktest = a.ktest;
    o.scale_mode = meta::parse_scale_mode(a.scale_mode);
    o.gamma = a.gamma;
    o.scratch_lr = a.scratch_lr;
    o.seed = seed;
    o.jobs = jobs;
    const auto r = meta::evaluate_corpus(state, std::span<const signals::ContextSet>(corpus), o);

    auto csv = open_csv(a.out);
    csv << "signal_id,step,loss,psnr,scale\n";
    for (std::size_t i = 0; i < r.reports.size(); ++i) write_report_rows(csv, i, r.reports[i]);

    std::cout << "signal_id,name,final_loss,final_psnr\n";
    for (std::size_t i = 0; i < r.reports.size(); ++i) {
        std::cout << i << ',' << r.names[i] << ',' << eval::format_metric(r.reports[i].final_loss) << ','
                  << eval::format_metric(r.reports[i].final_psnr) << '\n';
    }
    std::cout << "mean_psnr," << eval::format_metric(r.mean_psnr) << '\n';
    return 0;
}

// ---------------------------------------------------------------------------

struct FitArgs {
    fs::path signal;
    int steps = 100;
    double lr = 1e-2;
    int hidden = 64;
    int depth = 3;
    std::string activation = "sine";
    fs::path out = "fit.fmc";
    fs::path csv = "fit.csv";
};

template <class Real>
int run_fit(const FitArgs& a, std::uint64_t seed) {
    const auto ctx = signals::grid_context(signals::load_signal(a.signal));
    nf::ModelSpec spec;
    spec.input_dim = static_cast<int>(ctx.input_dim());
    spec.output_dim = static_cast<int>(ctx.output_dim());
    spec.hidden_dim = a.hidden;
    spec.depth = a.depth;
    spec.activation = nf::parse_activation(a.activation);
    spec.ff_seed = split_seed(seed, Stream::fourier, 0);
    spec.validate();
    const auto r = meta::fit_scratch<Real>(spec, ctx, static_cast<Real>(a.lr), a.steps, seed);
    persist::save_params(spec, r.final_params, a.out);
    auto csv = open_csv(a.csv);
    csv << "signal_id,step,loss,psnr,scale\n";
    meta::AdaptReport<double> wide{r.steps, r.final_params.template cast<double>(), r.final_loss, r.final_psnr};
    write_report_rows(csv, 0, wide);
    std::cout << "final_psnr," << eval::format_metric(r.final_psnr) << '\n';
    return 0;
}

// ---------------------------------------------------------------------------

struct VisArgs {
    fs::path checkpoint;
    fs::path signal;
    int steps = -1;
    double gamma = -1.0;
    std::string scorer = "gradncp";
    std::string scale_mode = "grad_norm";
    fs::path out = "visualize";
};

template <class Real>
int run_visualize(const VisArgs& a, std::uint64_t seed) {
    const auto state = persist::load_state<Real>(a.checkpoint);
    const auto sig = signals::load_signal(a.signal);
    auto ctx = signals::grid_context(sig);
    ctx.source = sig.name;
    check_dims(state.spec, ctx);
    if (ctx.resolution.size() != 2) throw std::runtime_error("visualize needs a 2-D signal");
    const int steps = a.steps < 0 ? state.hyper.inner_steps : a.steps;
    meta::RescaleOptions o;
    o.scorer = scoring::parse_scorer(a.scorer);
    o.gamma = a.gamma < 0 ? state.hyper.gamma : a.gamma;
    o.mode = meta::parse_scale_mode(a.scale_mode);
    fs::create_directories(a.out);

    auto csv = open_csv(a.out / "visualize.csv");
    csv << "step,loss,psnr,selected,max_residual\n";
    const auto features = nf::input_features(state.spec, ctx.coords);
    auto params = state.theta0;
    char name[32];
    for (int k = 0; k <= steps; ++k) {
        const auto fwd = nf::forward<Real>(state.spec, params, ctx.coords);
        const Eigen::MatrixXd pred = fwd.outputs.template cast<double>();
        const auto m = eval::psnr(pred, ctx.values);
        const std::uint64_t step_seed = split_seed(seed, Stream::random_scorer, static_cast<std::uint64_t>(k));
        const auto scores = scoring::score_from_forward<Real>(o.scorer, state.spec, fwd, ctx, step_seed);
        const auto selected = scoring::topk<Real>(scores, o.gamma);

        std::snprintf(name, sizeof name, "mask_%04d.ppm", k);
        eval::render_mask(ctx, selected, a.out / name);
        std::snprintf(name, sizeof name, "residual_%04d.pgm", k);
        const double peak = eval::render_residual(pred, ctx.values, ctx.resolution, a.out / name);
        std::snprintf(name, sizeof name, "recon_%04d.p%cm", k, pred.cols() == 1 ? 'g' : 'p');
        eval::render_prediction(pred, ctx.resolution, a.out / name);
        csv << k << ',' << eval::format_metric(m.mse) << ',' << eval::format_metric(m.psnr_db) << ',' << selected.size()
            << ',' << eval::format_metric(peak) << '\n';

        if (k == steps) {
            // Exact prediction of the last step, for checking the CSV row.
            auto raw = open_csv(a.out / "recon_final.csv");
            for (Eigen::Index r = 0; r < pred.rows(); ++r) {
                for (Eigen::Index c = 0; c < pred.cols(); ++c) raw << (c ? "," : "") << eval::format_metric(pred(r, c));
                raw << '\n';
            }
            break;
        }
        const auto k_lr = state.inner_lrs[std::min<std::size_t>(static_cast<std::size_t>(k), state.inner_lrs.size() - 1)];
        const std::vector<Real> lr{k_lr};
        meta::RescaleOptions one = o;
        one.seed = step_seed;
        params = meta::adapt_rescaled<Real>(state.spec, params, std::span<const Real>(lr), ctx, 1, one).final_params;
    }
    std::cout << "wrote " << steps + 1 << " frames to " << a.out.string() << '\n';
    return 0;
}

// ---------------------------------------------------------------------------

struct BenchArgs {
    fs::path checkpoint;
    fs::path dataset;
    std::string split = "test";
    int signals = 4;
    int steps = -1;
    double gamma = -1.0;
    std::vector<std::string> scorers{"gradncp", "loss", "spg", "random"};
    int tpg_max_context = static_cast<int>(scoring::kDefaultTpgMaxContext);
    fs::path out = "benchscorers.csv";
};

template <class Real>
std::vector<double> bench_scores(const std::string& name, const meta::MetaState<Real>& state,
                                 const nf::ParamVector<Real>& params, const signals::ContextSet& ctx, double alpha,
                                 std::size_t tpg_bound, std::uint64_t seed) {
    auto widen = [](const std::vector<Real>& v) { return std::vector<double>(v.begin(), v.end()); };
    if (name == "gradncp") {
        return widen(state.spec.head == nf::Head::linear ? scoring::score_gradncp(state.spec, params, ctx)
                                                         : scoring::score_gradncp_nonlinear(state.spec, params, ctx));
    }
    if (name == "loss") return widen(scoring::score_loss(state.spec, params, ctx));
    if (name == "spg") return widen(scoring::score_spg(state.spec, params, ctx, alpha, scoring::UpdateMode::last_layer));
    if (name == "spg_full") return widen(scoring::score_spg(state.spec, params, ctx, alpha, scoring::UpdateMode::full));
    if (name == "tpg") return widen(scoring::score_tpg(state.spec, params, ctx, alpha, scoring::UpdateMode::full, tpg_bound));
    if (name == "random") return scoring::score_random(static_cast<std::size_t>(ctx.size()), seed);
    throw std::invalid_argument("unknown scorer '" + name + "' (gradncp, loss, spg, spg_full, tpg, random)");
}

template <class Real>
int run_benchscorers(const BenchArgs& a, std::uint64_t seed, int jobs) {
    const auto state = persist::load_state<Real>(a.checkpoint);
    auto corpus = load_split(a.dataset, a.split);
    if (a.signals > 0 && corpus.size() > static_cast<std::size_t>(a.signals)) corpus.resize(static_cast<std::size_t>(a.signals));
    const auto bound = static_cast<std::size_t>(a.tpg_max_context);
    for (const auto& c : corpus) {
        check_dims(state.spec, c);
        const bool wants_tpg = std::find(a.scorers.begin(), a.scorers.end(), "tpg") != a.scorers.end();
        if (wants_tpg && static_cast<std::size_t>(c.size()) > bound) {
            throw std::runtime_error("tpg refused: " + c.source + " has " + std::to_string(c.size()) +
                                     " context points, above the bound of " + std::to_string(bound) +
                                     " (raise --tpg-max-context or drop tpg)");
        }
    }
    const int steps = a.steps < 0 ? state.hyper.inner_steps : a.steps;
    const double gamma = a.gamma < 0 ? state.hyper.gamma : a.gamma;

    // One block of rows per signal, joined in signal order.
    std::vector<std::string> blocks(corpus.size());
    parallel_for(corpus.size(), jobs, [&](std::size_t i) {
        const auto& ctx = corpus[i];
        std::ostringstream rows;
        auto params = state.theta0;
        for (int k = 0; k <= steps; ++k) {
            const double alpha = static_cast<double>(
                state.inner_lrs[std::min<std::size_t>(static_cast<std::size_t>(k), state.inner_lrs.size() - 1)]);
            const std::uint64_t s = split_seed(seed, Stream::random_scorer, splitmix64(i) ^ static_cast<std::uint64_t>(k));
            std::vector<std::vector<double>> scores;
            std::vector<std::vector<std::uint32_t>> tops;
            for (const auto& name : a.scorers) {
                scores.push_back(bench_scores(name, state, params, ctx, alpha, bound, s));
                tops.push_back(scoring::topk<double>(scores.back(), gamma));
            }
            for (std::size_t x = 0; x < a.scorers.size(); ++x) {
                for (std::size_t y = x; y < a.scorers.size(); ++y) {
                    rows << i << ',' << k << ',' << a.scorers[x] << ',' << a.scorers[y] << ','
                         << eval::format_metric(eval::spearman(scores[x], scores[y])) << ','
                         << eval::format_metric(eval::overlap_fraction(tops[x], tops[y])) << '\n';
                }
            }
            if (k == steps) break;
            // Advance along the meta-training inner loop.
            const std::vector<Real> lr{static_cast<Real>(alpha)};
            params = meta::adapt_pruned<Real>(state.spec, params, std::span<const Real>(lr), ctx, 1,
                                              scoring::Scorer::gradncp, gamma, s)
                         .final_params;
        }
        blocks[i] = rows.str();
    });
    auto csv = open_csv(a.out);
    csv << "signal_id,step,scorer_a,scorer_b,spearman,overlap\n";
    for (const auto& b : blocks) csv << b;
    std::cout << "wrote " << a.out.string() << '\n';
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Meta-learned neural fields with gradient-norm context pruning"};
    app.require_subcommand(1);

    std::uint64_t seed = 0;
    int jobs = 1;
    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--seed", seed, "root seed")->capture_default_str();
        sub->add_option("--jobs", jobs, "worker threads")->check(CLI::PositiveNumber)->capture_default_str();
    };

    SynthArgs synth_args;
    auto* synth = app.add_subcommand("synth", "write a synthetic dataset with a train/test split");
    synth->add_option("--kind", synth_args.kind, "sinmix or shapes")->capture_default_str();
    synth->add_option("--count", synth_args.count)->check(CLI::PositiveNumber)->capture_default_str();
    synth->add_option("--resolution", synth_args.resolution, "e.g. 32x32 or 1024")->capture_default_str();
    synth->add_option("--channels", synth_args.channels)->check(CLI::Range(1, 3))->capture_default_str();
    synth->add_option("--test-fraction", synth_args.test_fraction)->check(CLI::Range(0.0, 1.0))->capture_default_str();
    synth->add_option("--out", synth_args.out, "output directory")->required();
    add_common(synth);

    TrainArgs train_args;
    auto* train = app.add_subcommand("metatrain", "meta-train an initialization from a config file");
    train->add_option("config", train_args.config)->required()->check(CLI::ExistingFile);
    add_common(train);

    TestArgs test_args;
    auto* test = app.add_subcommand("metatest", "adapt every signal of a corpus from a checkpoint");
    test->add_option("--checkpoint", test_args.checkpoint)->required()->check(CLI::ExistingFile);
    test->add_option("--dataset", test_args.dataset)->required()->check(CLI::ExistingDirectory);
    test->add_option("--split", test_args.split)->check(CLI::IsMember({"train", "test", "all"}))->capture_default_str();
    test->add_option("--ktest", test_args.ktest, "adaptation steps (default: the meta-trained K)");
    test->add_option("--scale-mode", test_args.scale_mode)
        ->check(CLI::IsMember({"grad_norm", "loss_ratio", "none"}))
        ->capture_default_str();
    test->add_option("--gamma", test_args.gamma, "kept fraction (default: the meta-trained value)");
    test->add_option("--baseline", test_args.baseline)
        ->check(CLI::IsMember({"gradncp", "random", "pruned", "scratch"}))
        ->capture_default_str();
    test->add_option("--scratch-lr", test_args.scratch_lr)->capture_default_str();
    test->add_option("--out", test_args.out, "per-step CSV")->capture_default_str();
    add_common(test);

    FitArgs fit_args;
    auto* fit = app.add_subcommand("fit", "fit one signal from a random initialization");
    fit->add_option("--signal", fit_args.signal)->required()->check(CLI::ExistingFile);
    fit->add_option("--steps", fit_args.steps)->check(CLI::NonNegativeNumber)->capture_default_str();
    fit->add_option("--lr", fit_args.lr)->check(CLI::PositiveNumber)->capture_default_str();
    fit->add_option("--hidden", fit_args.hidden)->check(CLI::PositiveNumber)->capture_default_str();
    fit->add_option("--depth", fit_args.depth)->check(CLI::PositiveNumber)->capture_default_str();
    fit->add_option("--activation", fit_args.activation)->capture_default_str();
    fit->add_option("--out", fit_args.out, "parameter checkpoint")->capture_default_str();
    fit->add_option("--csv", fit_args.csv, "per-step CSV")->capture_default_str();
    add_common(fit);

    VisArgs vis_args;
    auto* vis = app.add_subcommand("visualize", "per-step mask, residual and reconstruction images");
    vis->add_option("--checkpoint", vis_args.checkpoint)->required()->check(CLI::ExistingFile);
    vis->add_option("--signal", vis_args.signal)->required()->check(CLI::ExistingFile);
    vis->add_option("--steps", vis_args.steps, "adaptation steps (default: the meta-trained K)");
    vis->add_option("--gamma", vis_args.gamma);
    vis->add_option("--scorer", vis_args.scorer)->check(CLI::IsMember({"gradncp", "loss", "random"}))->capture_default_str();
    vis->add_option("--scale-mode", vis_args.scale_mode)
        ->check(CLI::IsMember({"grad_norm", "loss_ratio", "none"}))
        ->capture_default_str();
    vis->add_option("--out", vis_args.out, "output directory")->capture_default_str();
    add_common(vis);

    BenchArgs bench_args;
    auto* bench = app.add_subcommand("benchscorers", "rank agreement between context scorers");
    bench->add_option("--checkpoint", bench_args.checkpoint)->required()->check(CLI::ExistingFile);
    bench->add_option("--dataset", bench_args.dataset)->required()->check(CLI::ExistingDirectory);
    bench->add_option("--split", bench_args.split)->check(CLI::IsMember({"train", "test", "all"}))->capture_default_str();
    bench->add_option("--signals", bench_args.signals, "signals to score (0: all)")->capture_default_str();
    bench->add_option("--steps", bench_args.steps, "adaptation steps (default: the meta-trained K)");
    bench->add_option("--gamma", bench_args.gamma);
    bench->add_option("--scorers", bench_args.scorers, "subset of gradncp,loss,spg,spg_full,tpg,random")
        ->delimiter(',')
        ->capture_default_str();
    bench->add_option("--tpg-max-context", bench_args.tpg_max_context)->check(CLI::PositiveNumber)->capture_default_str();
    bench->add_option("--out", bench_args.out)->capture_default_str();
    add_common(bench);

    CLI11_PARSE(app, argc, argv);

    try {
        if (*synth) return cmd_synth(synth_args, seed);
        if (*train) {
            const auto seed_opt = train->count("--seed") ? std::optional<std::uint64_t>(seed) : std::nullopt;
            const auto jobs_opt = train->count("--jobs") ? std::optional<int>(jobs) : std::nullopt;
            return cmd_metatrain(train_args, seed_opt, jobs_opt);
        }
        if (*test) {
            return dispatch(precision_for(test_args.checkpoint),
                            [&](auto tag) { return run_metatest<decltype(tag)>(test_args, seed, jobs); });
        }
        if (*fit) {
            return dispatch(env_precision().value_or(Precision::f64),
                            [&](auto tag) { return run_fit<decltype(tag)>(fit_args, seed); });
        }
        if (*vis) {
            return dispatch(precision_for(vis_args.checkpoint),
                            [&](auto tag) { return run_visualize<decltype(tag)>(vis_args, seed); });
        }
        if (*bench) {
            return dispatch(precision_for(bench_args.checkpoint),
                            [&](auto tag) { return run_benchscorers<decltype(tag)>(bench_args, seed, jobs); });
        }
    } catch (const config::ConfigError& e) {
        std::cerr << "fieldmeta: " << e.what() << '\n';
        return kExitError;
    } catch (const std::exception& e) {
        std::cerr << "fieldmeta: " << e.what() << '\n';
        return kExitError;
    }
    return kExitError;
}
