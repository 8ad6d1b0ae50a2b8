#include "fieldmeta/config.hpp"

#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>

using namespace fieldmeta;
using config::ConfigError;
using config::parse_config;
namespace fs = std::filesystem;

namespace {

std::vector<std::string> problems_of(std::string_view text) {
    try {
        parse_config(text);
    } catch (const ConfigError& e) {
        return e.problems();
    }
    FAIL("expected a ConfigError");
    return {};
}

bool mentions(const std::vector<std::string>& problems, std::string_view needle) {
    return std::any_of(problems.begin(), problems.end(), [&](const std::string& p) { return p.find(needle) != std::string::npos; });
}

const char* kMinimal = "dataset = data\noutput_dir = out\n";

}  // namespace

TEST_CASE("defaults come from the paper preset") {
    const auto c = parse_config(kMinimal);
    CHECK(c.preset == "paper");
    CHECK(c.dataset == "data");
    CHECK(c.hyper == meta::Hyper{});
    CHECK(c.hyper.inner_steps == 16);
    CHECK(c.hyper.gamma == 0.25);
    CHECK(c.hyper.lambda == 100.0);
    CHECK(c.hyper.bootstrap_steps == 5);
    CHECK(c.hyper.meta_lr == 1e-5);
    CHECK(c.outer_steps == 150000);
    CHECK(c.model.hidden_dim == 256);
    CHECK(c.model.depth == 5);
}

TEST_CASE("preset applies before other keys wherever it appears") {
    const auto c = parse_config("inner_steps = 4\n" + std::string(kMinimal) + "preset = desk\n");
    CHECK(c.preset == "desk");
    CHECK(c.hyper.inner_steps == 4);
    CHECK(c.model.hidden_dim == 64);
    CHECK(c.outer_steps == 300);
}

TEST_CASE("values, comments and quotes") {
    const auto c = parse_config(
        "# a run\n"
        "dataset = \"my data\"   # trailing comment\n"
        "output_dir = out\n"
        "\n"
        "gamma = 0.5\n"
        "scorer = random\n"
        "first_order = true\n"
        "activation = relu_fourier\n"
        "head = sigmoid\n"
        "seed = 18446744073709551615\n"
        "jobs = 3\n");
    CHECK(c.dataset == "my data");
    CHECK(c.hyper.gamma == 0.5);
    CHECK(c.scorer == scoring::Scorer::random);
    CHECK(c.first_order);
    CHECK(c.model.activation == nf::Activation::relu_fourier);
    CHECK(c.model.head == nf::Head::sigmoid);
    CHECK(c.seed == 18446744073709551615ULL);
    CHECK(c.jobs == 3);
}

TEST_CASE("a hash inside quotes is not a comment") {
    const auto c = parse_config("dataset = \"a # b\"\noutput_dir = out\n");
    CHECK(c.dataset == "a # b");
}

TEST_CASE("every problem is reported at once") {
    const auto p = problems_of(
        "gamma = 1.5\n"
        "lambda = -1\n"
        "colour = blue\n"
        "inner_steps = 3\n"
        "inner_steps = 4\n"
        "just words\n"
        "batch_size = two\n");
    CHECK(mentions(p, "gamma: must lie in (0, 1], got 1.5"));
    CHECK(mentions(p, "lambda"));
    CHECK(mentions(p, "colour: unknown key"));
    CHECK(mentions(p, "inner_steps: repeated"));
    CHECK(mentions(p, "line 6"));
    CHECK(mentions(p, "batch_size"));
    CHECK(mentions(p, "dataset: required"));
    CHECK(mentions(p, "output_dir: required"));
    CHECK(p.size() >= 8);
}

TEST_CASE("rejected values") {
    const std::string base = kMinimal;
    CHECK(mentions(problems_of(base + "gamma = 0\n"), "gamma"));
    CHECK(mentions(problems_of(base + "inner_steps = 0\n"), "inner_steps"));
    CHECK(mentions(problems_of(base + "bootstrap_steps = -1\n"), "bootstrap_steps"));
    CHECK(mentions(problems_of(base + "scorer = spg\n"), "scorer"));
    CHECK(mentions(problems_of(base + "first_order = yes\n"), "first_order"));
    CHECK(mentions(problems_of(base + "preset = huge\n"), "preset"));
    CHECK(mentions(problems_of(base + "alpha_init = 0\n"), "alpha_init"));
    CHECK(mentions(problems_of(base + "omega0 = nan\n"), "omega0"));
    CHECK_NOTHROW(parse_config(base + "bootstrap_steps = 0\nlambda = 0\nmeta_lr = 0\n"));
}

TEST_CASE("relative paths resolve against the config file") {
    const fs::path dir = fs::temp_directory_path() / "fieldmeta_config";
    fs::remove_all(dir);
    fs::create_directories(dir);
    {
        std::ofstream out(dir / "run.cfg");
        out << "dataset = data\noutput_dir = /abs/out\n";
    }
    const auto c = config::load_config(dir / "run.cfg");
    CHECK(c.dataset == dir / "data");
    CHECK(c.output_dir == "/abs/out");
    CHECK_THROWS_AS(config::load_config(dir / "missing.cfg"), std::runtime_error);
}

TEST_CASE("known keys") {
    const auto keys = config::known_keys();
    for (const char* k : {"dataset", "output_dir", "preset", "gamma", "lambda", "bootstrap_steps", "inner_steps", "meta_lr",
                          "scorer", "seed", "jobs"})
        CHECK(std::find(keys.begin(), keys.end(), k) != keys.end());
}
