#include "oracles.hpp"

#include "fieldmeta/eval.hpp"

#include <doctest.h>

using namespace fieldmeta;
using scoring::topk;

namespace {

std::vector<std::uint32_t> idx(std::initializer_list<std::uint32_t> v) { return v; }

// f(x) = w x with one scalar weight.
nf::ParamVector<double> weight(double w) {
    nf::ParamVector<double> p(oracles::scalar_linear_spec());
    p.flat()[0] = w;
    return p;
}

// Depth-1 linear head with the identity as the penultimate feature.
nf::ModelSpec affine(int c, int d) {
    nf::ModelSpec s;
    s.input_dim = c;
    s.output_dim = d;
    s.depth = 1;
    s.activation = nf::Activation::identity;
    return s;
}

}  // namespace

TEST_CASE("topk examples") {
    const std::vector<double> s{3, 1, 2, 5};
    CHECK(topk<double>(s, 0.5) == idx({0, 3}));
    const std::vector<double> flat(8, 1.0);
    CHECK(topk<double>(flat, 0.25) == idx({0, 1}));
    CHECK(topk<double>(s, 1.0) == idx({0, 1, 2, 3}));
    CHECK_THROWS_AS(topk<double>(s, 0.0), std::invalid_argument);
    CHECK_THROWS_AS(topk<double>(s, 1.5), std::invalid_argument);
    CHECK(scoring::selection_size(10, 0.01) == 1);
    CHECK(scoring::selection_size(10, 0.25) == 3);
    CHECK(scoring::selection_size(8, 0.25) == 2);
}

TEST_CASE("topk ranks NaN lowest") {
    const double nan = std::numeric_limits<double>::quiet_NaN();
    const std::vector<double> s{nan, 0.0, nan, -1.0};
    CHECK(topk<double>(s, 0.5) == idx({1, 3}));
}

TEST_CASE("topk properties on random scores") {
    std::mt19937_64 rng(4);
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t m = std::uniform_int_distribution<std::size_t>(1, 60)(rng);
        const double gamma = std::uniform_real_distribution<double>(0.01, 1.0)(rng);
        std::vector<double> s(m);
        for (auto& v : s) v = std::floor(std::uniform_real_distribution<double>(0, 6)(rng));  // many ties
        const auto sel = topk<double>(s, gamma);
        CHECK(sel.size() == static_cast<std::size_t>(std::ceil(gamma * static_cast<double>(m) - 1e-9)));
        CHECK(std::is_sorted(sel.begin(), sel.end()));
        std::vector<bool> in(m, false);
        for (const auto i : sel) in[i] = true;
        double lowest_in = 1e300;
        double highest_out = -1e300;
        for (std::size_t i = 0; i < m; ++i) (in[i] ? lowest_in : highest_out) = in[i] ? std::min(lowest_in, s[i]) : std::max(highest_out, s[i]);
        CHECK(lowest_in >= highest_out);
        std::vector<double> scaled = s;
        for (auto& v : scaled) v *= 3.7;
        CHECK(topk<double>(scaled, gamma) == sel);
    }
}

TEST_CASE("gradncp score examples") {
    // residual 2 with phi = [3, 4]: 2 * sqrt(26)
    const auto spec = affine(2, 1);
    nf::ParamVector<double> p(spec);  // zero weights and bias: f = 0
    auto ctx = oracles::pairs({});
    ctx.coords = Eigen::MatrixXd(1, 2);
    ctx.coords << 3, 4;
    ctx.values = Eigen::MatrixXd::Constant(1, 1, 2.0);
    CHECK(scoring::score_gradncp(spec, p, ctx)[0] == doctest::Approx(2.0 * std::sqrt(26.0)).epsilon(1e-15));

    ctx.values(0, 0) = 0.0;
    CHECK(scoring::score_gradncp(spec, p, ctx)[0] == 0.0);
}

TEST_CASE("gradncp equals half the last-layer gradient norm") {
    const auto lin = oracles::score_identity(300, nf::Head::linear, 1);
    CHECK(lin.max_rel_error <= 1e-9);
    const auto sig = oracles::score_identity(300, nf::Head::sigmoid, 2);
    CHECK(sig.max_rel_error <= 1e-9);
}

TEST_CASE("gradncp without biases drops the +1") {
    CHECK(oracles::score_identity(100, nf::Head::linear, 3, false).max_rel_error <= 1e-9);
    CHECK(oracles::score_identity(100, nf::Head::sigmoid, 4, false).max_rel_error <= 1e-9);
}

TEST_CASE("head mismatch is an error") {
    std::mt19937_64 rng(3);
    auto spec = oracles::random_small_spec(rng, nf::Head::sigmoid);
    const auto p = nf::init_params<double>(spec, 1);
    signals::ContextSet ctx;
    ctx.coords = oracles::uniform(rng, 2, spec.input_dim, -1, 1);
    ctx.values = oracles::uniform(rng, 2, spec.output_dim, 0, 1);
    CHECK_THROWS_AS(scoring::score_gradncp(spec, p, ctx), std::invalid_argument);
    spec.head = nf::Head::linear;
    CHECK_THROWS_AS(scoring::score_gradncp_nonlinear(spec, p, ctx), std::invalid_argument);
}

TEST_CASE("sigmoid saturation drives the score to zero") {
    auto spec = affine(1, 1);
    spec.head = nf::Head::sigmoid;
    nf::ParamVector<double> p(spec);
    p.bias(0)(0, 0) = 800.0;
    auto ctx = oracles::pairs({{0.5, 0.0}});
    const double s = scoring::score_gradncp_nonlinear(spec, p, ctx)[0];
    CHECK(s == 0.0);
    p.bias(0)(0, 0) = 0.0;
    ctx.values(0, 0) = 0.5;
    CHECK(scoring::score_gradncp_nonlinear(spec, p, ctx)[0] == 0.0);
}

TEST_CASE("loss score") {
    std::mt19937_64 rng(9);
    const auto spec = oracles::random_small_spec(rng, nf::Head::linear);
    const auto p = nf::init_params<double>(spec, 2);
    signals::ContextSet ctx;
    ctx.coords = oracles::uniform(rng, 12, spec.input_dim, -1, 1);
    ctx.values = oracles::uniform(rng, 12, spec.output_dim, 0, 1);
    const auto s = scoring::score_loss(spec, p, ctx);
    const auto out = nf::forward<double>(spec, p, ctx.coords).outputs;
    for (Eigen::Index m = 0; m < 12; ++m) {
        double e = 0.0;
        for (Eigen::Index d = 0; d < out.cols(); ++d) e += (ctx.values(m, d) - out(m, d)) * (ctx.values(m, d) - out(m, d));
        CHECK(s[static_cast<std::size_t>(m)] == doctest::Approx(e).epsilon(1e-14));
    }
    // With |[phi, 1]| constant across examples the loss and gradncp orders agree.
    const auto aff = affine(1, 1);
    nf::ParamVector<double> q(aff);
    auto same_phi = oracles::pairs({{1, 0.1}, {1, 0.9}, {1, 0.4}});
    const auto l = scoring::score_loss(aff, q, same_phi);
    const auto g = scoring::score_gradncp(aff, q, same_phi);
    CHECK(topk<double>(l, 0.34) == topk<double>(g, 0.34));
    CHECK(g[1] / std::sqrt(l[1]) == doctest::Approx(g[0] / std::sqrt(l[0])));
}

TEST_CASE("SPG hand case and zero residual") {
    const auto spec = oracles::scalar_linear_spec();
    const auto ctx = oracles::pairs({{1.0, 2.0}});
    CHECK(scoring::score_spg(spec, weight(1.0), ctx, 0.5, scoring::UpdateMode::full)[0] == doctest::Approx(1.0));
    CHECK(scoring::score_spg(spec, weight(2.0), ctx, 0.5, scoring::UpdateMode::full)[0] == 0.0);
}

TEST_CASE("Taylor property of SPG") {
    const double d4 = oracles::taylor_deviation(1e-4, 100, 5);
    const double d5 = oracles::taylor_deviation(1e-5, 100, 5);
    const double d6 = oracles::taylor_deviation(1e-6, 100, 5);
    CHECK(d4 <= 0.05);
    CHECK(d5 < d4);
    CHECK(d6 < d5);
}

TEST_CASE("TPG") {
    const auto spec = oracles::scalar_linear_spec();
    // Brute force for M = 2: update on one pair, measure the other.
    const auto ctx = oracles::pairs({{1.0, 2.0}, {2.0, 1.0}});
    const double w = 1.0;
    const double alpha = 0.1;
    auto loss = [](double w_, double x, double y) { return (w_ * x - y) * (w_ * x - y); };
    const double w0 = w - alpha * 2.0 * (w * 1.0 - 2.0) * 1.0;
    const double w1 = w - alpha * 2.0 * (w * 2.0 - 1.0) * 2.0;
    const auto t = scoring::score_tpg(spec, weight(w), ctx, alpha);
    CHECK(t[0] == doctest::Approx(loss(w, 2, 1) - loss(w0, 2, 1)).epsilon(1e-14));
    CHECK(t[1] == doctest::Approx(loss(w, 1, 2) - loss(w1, 1, 2)).epsilon(1e-14));

    const auto swapped = scoring::score_tpg(spec, weight(w), oracles::pairs({{2.0, 1.0}, {1.0, 2.0}}), alpha);
    CHECK(swapped[0] == t[1]);
    CHECK(swapped[1] == t[0]);

    const auto zero = scoring::score_tpg(spec, weight(2.0), oracles::pairs({{1.0, 2.0}, {2.0, 1.0}}), alpha);
    CHECK(zero[0] == 0.0);

    auto big = oracles::pairs({});
    big.coords = Eigen::MatrixXd::Zero(300, 1);
    big.values = Eigen::MatrixXd::Zero(300, 1);
    CHECK_THROWS_WITH_AS(scoring::score_tpg(spec, weight(w), big, alpha), doctest::Contains("score_spg"),
                         std::invalid_argument);
}

TEST_CASE("random scores are seeded") {
    const auto a = scoring::score_random(50, 1);
    CHECK(a == scoring::score_random(50, 1));
    CHECK_FALSE(a == scoring::score_random(50, 2));
    for (const double v : a) {
        CHECK(v >= 0.0);
        CHECK(v < 1.0);
    }
}

TEST_CASE("scorer names") {
    CHECK(scoring::parse_scorer("gradncp") == scoring::Scorer::gradncp);
    CHECK(scoring::parse_scorer("loss") == scoring::Scorer::loss);
    CHECK(scoring::parse_scorer("random") == scoring::Scorer::random);
    CHECK_THROWS_AS(scoring::parse_scorer("spg"), std::invalid_argument);
}
