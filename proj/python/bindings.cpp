// Python bindings: double-precision views of the core library.

#include "fieldmeta/checkpoint.hpp"
#include "fieldmeta/eval.hpp"
#include "fieldmeta/metatest.hpp"
#include "fieldmeta/training.hpp"

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

namespace py = pybind11;
using namespace fieldmeta;

namespace {

using State = meta::MetaState<double>;

Eigen::VectorXd to_vector(std::span<const double> v) {
    return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

nf::ParamVector<double> from_vector(const nf::ModelSpec& spec, const Eigen::VectorXd& flat) {
    nf::ParamVector<double> p(spec);
    if (static_cast<std::size_t>(flat.size()) != p.size()) {
        throw std::invalid_argument("expected " + std::to_string(p.size()) + " parameters, got " + std::to_string(flat.size()));
    }
    std::copy(flat.data(), flat.data() + flat.size(), p.flat().begin());
    return p;
}

signals::ContextSet make_context(const Eigen::MatrixXd& coords, const Eigen::MatrixXd& values) {
    if (coords.rows() != values.rows()) throw std::invalid_argument("coords and values need the same number of rows");
    signals::ContextSet c;
    c.coords = coords;
    c.values = values;
    c.source = "python";
    return c;
}

py::dict report_dict(const meta::AdaptReport<double>& r) {
    py::list steps;
    for (const auto& s : r.steps) {
        py::dict d;
        d["loss"] = s.loss;
        d["psnr"] = s.psnr;
        d["loss_selected"] = s.loss_selected;
        d["grad_norm_high"] = s.grad_norm_high;
        d["grad_norm_full"] = s.grad_norm_full;
        d["scale"] = s.scale;
        d["selected"] = s.selected;
        steps.append(d);
    }
    py::dict out;
    out["steps"] = steps;
    out["final_loss"] = r.final_loss;
    out["final_psnr"] = r.final_psnr;
    out["final_params"] = to_vector(r.final_params.flat());
    return out;
}

}  // namespace

PYBIND11_MODULE(_fieldmeta, m) {
    m.doc() = "Meta-learned neural fields with gradient-norm context pruning";

    py::enum_<nf::Activation>(m, "Activation")
        .value("sine", nf::Activation::sine)
        .value("relu_fourier", nf::Activation::relu_fourier)
        .value("identity", nf::Activation::identity);
    py::enum_<nf::Head>(m, "Head").value("linear", nf::Head::linear).value("sigmoid", nf::Head::sigmoid);

    py::class_<nf::ModelSpec>(m, "ModelSpec")
        .def(py::init<>())
        .def_readwrite("input_dim", &nf::ModelSpec::input_dim)
        .def_readwrite("output_dim", &nf::ModelSpec::output_dim)
        .def_readwrite("hidden_dim", &nf::ModelSpec::hidden_dim)
        .def_readwrite("depth", &nf::ModelSpec::depth)
        .def_readwrite("activation", &nf::ModelSpec::activation)
        .def_readwrite("omega0", &nf::ModelSpec::omega0)
        .def_readwrite("ff_sigma", &nf::ModelSpec::ff_sigma)
        .def_readwrite("ff_features", &nf::ModelSpec::ff_features)
        .def_readwrite("ff_seed", &nf::ModelSpec::ff_seed)
        .def_readwrite("head", &nf::ModelSpec::head)
        .def_readwrite("bias", &nf::ModelSpec::bias)
        .def("validate", &nf::ModelSpec::validate)
        .def("param_count", [](const nf::ModelSpec& s) { return nf::ParamVector<double>(s).size(); })
        .def("__eq__", [](const nf::ModelSpec& a, const nf::ModelSpec& b) { return a == b; });

    py::class_<meta::Hyper>(m, "Hyper")
        .def(py::init<>())
        .def_readwrite("inner_steps", &meta::Hyper::inner_steps)
        .def_readwrite("bootstrap_steps", &meta::Hyper::bootstrap_steps)
        .def_readwrite("gamma", &meta::Hyper::gamma)
        .def_readwrite("lambda_", &meta::Hyper::lambda)
        .def_readwrite("meta_lr", &meta::Hyper::meta_lr);

    py::class_<State>(m, "MetaState")
        .def_readonly("spec", &State::spec)
        .def_readonly("hyper", &State::hyper)
        .def_readonly("outer_step", &State::outer_step)
        .def_property_readonly("theta0", [](const State& s) { return to_vector(s.theta0.flat()); })
        .def_property_readonly("inner_lrs", [](const State& s) { return s.inner_lrs; });

    m.def("init_params",
          [](const nf::ModelSpec& spec, std::uint64_t seed) { return to_vector(nf::init_params<double>(spec, seed).flat()); },
          py::arg("spec"), py::arg("seed") = 0);
    m.def("forward",
          [](const nf::ModelSpec& spec, const Eigen::VectorXd& params, const Eigen::MatrixXd& coords) {
              return Eigen::MatrixXd(nf::forward<double>(spec, from_vector(spec, params), coords).outputs);
          },
          py::arg("spec"), py::arg("params"), py::arg("coords"));

    m.def("synth",
          [](const std::string& kind, std::uint64_t seed, const std::vector<int>& resolution, int channels) {
              const auto s = signals::synth(signals::parse_synth_kind(kind), seed, resolution, channels);
              return s.values;
          },
          py::arg("kind"), py::arg("seed"), py::arg("resolution"), py::arg("channels") = 1,
          "Values of a synthetic signal, one row per lattice site.");
    m.def("write_synth_dataset",
          [](const std::filesystem::path& dir, const std::string& kind, int count, const std::vector<int>& resolution,
             int channels, double test_fraction, std::uint64_t seed) {
              signals::save_dataset(dir, signals::synth_dataset(signals::parse_synth_kind(kind), count, resolution, channels,
                                                                test_fraction, seed));
          },
          py::arg("dir"), py::arg("kind") = "shapes", py::arg("count") = 16, py::arg("resolution") = std::vector<int>{32, 32},
          py::arg("channels") = 1, py::arg("test_fraction") = 0.25, py::arg("seed") = 0,
          "Writes a synthetic corpus with split.txt, as the synth command does.");
    m.def("grid_coords",
          [](const std::vector<int>& resolution) {
              signals::Signal s;
              s.resolution = resolution;
              std::size_t n = 1;
              for (const int r : resolution) n *= static_cast<std::size_t>(r);
              s.values = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), 1);
              s.modality = resolution.size() == 1 ? signals::Modality::series1d
                           : resolution.size() == 3 ? signals::Modality::grid3d
                                                    : signals::Modality::image2d;
              return signals::grid_context(s).coords;
          },
          py::arg("resolution"), "Lattice coordinates in [-1, 1] (1-D series use [-50, 50]).");
    m.def("load_signal",
          [](const std::filesystem::path& path) {
              const auto s = signals::load_signal(path);
              return py::make_tuple(signals::grid_context(s).coords, s.values, s.resolution);
          },
          py::arg("path"), "(coords, values, resolution) of an image or audio file.");

    m.def("score",
          [](const std::string& name, const nf::ModelSpec& spec, const Eigen::VectorXd& params, const Eigen::MatrixXd& coords,
             const Eigen::MatrixXd& values, double alpha, std::uint64_t seed) {
              const auto p = from_vector(spec, params);
              const auto ctx = make_context(coords, values);
              std::vector<double> s;
              if (name == "gradncp") {
                  s = spec.head == nf::Head::linear ? scoring::score_gradncp(spec, p, ctx)
                                                    : scoring::score_gradncp_nonlinear(spec, p, ctx);
              } else if (name == "loss") {
                  s = scoring::score_loss(spec, p, ctx);
              } else if (name == "spg") {
                  s = scoring::score_spg(spec, p, ctx, alpha, scoring::UpdateMode::last_layer);
              } else if (name == "tpg") {
                  s = scoring::score_tpg(spec, p, ctx, alpha);
              } else if (name == "random") {
                  s = scoring::score_random(static_cast<std::size_t>(ctx.size()), seed);
              } else {
                  throw std::invalid_argument("unknown scorer '" + name + "'");
              }
              return to_vector(s);
          },
          py::arg("name"), py::arg("spec"), py::arg("params"), py::arg("coords"), py::arg("values"), py::arg("alpha") = 1e-2,
          py::arg("seed") = 0);
    m.def("topk", [](const std::vector<double>& scores, double gamma) { return scoring::topk<double>(scores, gamma); },
          py::arg("scores"), py::arg("gamma"));
    m.def("psnr", [](const Eigen::MatrixXd& pred, const Eigen::MatrixXd& truth) { return eval::psnr(pred, truth).psnr_db; },
          py::arg("pred"), py::arg("truth"));
    m.def("spearman", [](const std::vector<double>& a, const std::vector<double>& b) { return eval::spearman(a, b); });

    m.def("load_state", [](const std::filesystem::path& path) { return persist::load_state<double>(path); }, py::arg("path"),
          "Loads a meta-training checkpoint; float32 payloads widen exactly.");
    m.def("adapt",
          [](const State& state, const Eigen::MatrixXd& coords, const Eigen::MatrixXd& values, int steps, double gamma,
             const std::string& scale_mode, const std::string& scorer, std::uint64_t seed) {
              meta::RescaleOptions o;
              o.gamma = gamma < 0 ? state.hyper.gamma : gamma;
              o.mode = meta::parse_scale_mode(scale_mode);
              o.scorer = scoring::parse_scorer(scorer);
              o.seed = seed;
              const auto ctx = make_context(coords, values);
              py::gil_scoped_release release;
              auto r = meta::adapt_rescaled<double>(state.spec, state.theta0, std::span<const double>(state.inner_lrs), ctx,
                                                    steps < 0 ? state.hyper.inner_steps : steps, o);
              py::gil_scoped_acquire acquire;
              return report_dict(r);
          },
          py::arg("state"), py::arg("coords"), py::arg("values"), py::arg("steps") = -1, py::arg("gamma") = -1.0,
          py::arg("scale_mode") = "grad_norm", py::arg("scorer") = "gradncp", py::arg("seed") = 0,
          "Test-time adaptation with gradient rescaling from a meta-learned state.");
    m.def("fit_scratch",
          [](const nf::ModelSpec& spec, const Eigen::MatrixXd& coords, const Eigen::MatrixXd& values, double lr, int steps,
             std::uint64_t seed) {
              return report_dict(meta::fit_scratch<double>(spec, make_context(coords, values), lr, steps, seed));
          },
          py::arg("spec"), py::arg("coords"), py::arg("values"), py::arg("lr") = 1e-2, py::arg("steps") = 100,
          py::arg("seed") = 0);
    m.def("metatrain",
          [](const std::filesystem::path& config_path) {
              const auto cfg = config::load_config(config_path);
              const auto ds = signals::load_dataset(cfg.dataset);
              const auto train = training::contexts(ds.train);
              py::gil_scoped_release release;
              auto s = training::metatrain<double>(cfg, train);
              py::gil_scoped_acquire acquire;
              return s;
          },
          py::arg("config"), "Runs meta-training from a config file in double precision.");
}
