#include "oracles.hpp"

#include <cstring>

#include <doctest.h>

using namespace fieldmeta::graph;
using Mat = Eigen::MatrixXd;

namespace {

Mat row(std::initializer_list<double> v) {
    Mat m(1, static_cast<Eigen::Index>(v.size()));
    Eigen::Index i = 0;
    for (const double x : v) m(0, i++) = x;
    return m;
}

double scalar(Tape<double>& t, NodeId n) { return t.evaluate(n)(0, 0); }

}  // namespace

TEST_CASE("forward examples") {
    Tape<double> t;
    CHECK(t.evaluate(t.add(t.constant(row({1, 2})), t.constant(row({3, 4})))) == row({4, 6}));

    Mat col(2, 1);
    col << 5, 7;
    CHECK(t.evaluate(t.matmul(t.constant(Mat::Identity(2, 2)), t.constant(col))) == col);
    CHECK(t.evaluate(t.sine(t.constant(row({0}))))(0, 0) == 0.0);
}

TEST_CASE("shape errors name both nodes") {
    Tape<double> t;
    const NodeId a = t.constant(Mat::Zero(2, 3));
    const NodeId b = t.constant(Mat::Zero(3, 2));
    try {
        t.add(a, b);
        FAIL("expected a shape error");
    } catch (const ShapeError& e) {
        const std::string what = e.what();
        CHECK(what.find("node 0") != std::string::npos);
        CHECK(what.find("node 1") != std::string::npos);
    }
    CHECK_THROWS_AS(t.matmul(a, a), ShapeError);
    CHECK_THROWS_AS(t.reshape(a, {4, 2}), ShapeError);
}

TEST_CASE("first derivative of (w x)^2") {
    Tape<double> t;
    const NodeId w = t.parameter(row({3}));
    const NodeId x = t.constant(row({2}));
    const NodeId y = t.sum(t.square(t.mul(w, x)));
    const auto g = t.grad(y, std::vector<NodeId>{w});
    CHECK(scalar(t, g[0]) == doctest::Approx(24.0).epsilon(1e-15));
}

TEST_CASE("second derivative of w^4") {
    Tape<double> t;
    const NodeId w = t.parameter(row({2}));
    const NodeId w2 = t.square(w);
    const NodeId y = t.sum(t.square(w2));
    const auto g = t.grad(y, std::vector<NodeId>{w});
    const auto gg = t.grad(t.sum(g[0]), std::vector<NodeId>{w});
    CHECK(scalar(t, g[0]) == doctest::Approx(32.0));
    CHECK(scalar(t, gg[0]) == doctest::Approx(48.0).epsilon(1e-15));
}

TEST_CASE("grad requires a scalar") {
    Tape<double> t;
    const NodeId w = t.parameter(row({1, 2}));
    CHECK_THROWS_AS(t.grad(t.square(w), std::vector<NodeId>{w}), ShapeError);
}

TEST_CASE("unreachable wrt yields a zero node") {
    Tape<double> t;
    const NodeId a = t.parameter(Mat::Ones(2, 3));
    const NodeId b = t.parameter(row({4}));
    const auto g = t.grad(t.sum(t.square(b)), std::vector<NodeId>{a, b});
    CHECK(t.evaluate(g[0]) == Mat::Zero(2, 3));
    CHECK(scalar(t, g[1]) == 8.0);
}

TEST_CASE("stop_gradient") {
    Tape<double> t;
    std::mt19937_64 rng(3);
    const Mat r = oracles::uniform(rng, 3, 4, -1, 1);
    const NodeId x = t.parameter(r);
    CHECK(t.evaluate(t.stop_gradient(x)) == r);

    const NodeId s = t.parameter(row({3}));
    const auto g = t.grad(t.sum(t.mul(t.stop_gradient(s), s)), std::vector<NodeId>{s});
    CHECK(scalar(t, g[0]) == 3.0);

    const auto g2 = t.grad(t.sum(t.stop_gradient(t.square(s))), std::vector<NodeId>{s});
    CHECK(scalar(t, g2[0]) == 0.0);
}

TEST_CASE("norm2 gradient is zero at the origin") {
    Tape<double> t;
    const NodeId x = t.parameter(Mat::Zero(1, 3));
    const auto g = t.grad(t.norm2(x), std::vector<NodeId>{x});
    CHECK(t.evaluate(g[0]) == Mat::Zero(1, 3));
    Tape<double> u;
    const NodeId y = u.parameter(row({3, 4}));
    const auto gy = u.grad(u.norm2(y), std::vector<NodeId>{y});
    CHECK(u.evaluate(gy[0]).isApprox(row({0.6, 0.8}), 1e-15));
}

TEST_CASE("finite differences on random graphs") {
    for (std::uint64_t seed = 0; seed < 120; ++seed) {
        const auto r = oracles::check_random_graph(seed);
        INFO("seed " << seed);
        CHECK(r.max_rel_error < 1e-4);
    }
}

TEST_CASE("Hessian-vector products match finite differences of the gradient") {
    for (std::uint64_t seed = 0; seed < 30; ++seed) {
        oracles::RandomGraph g = oracles::random_leaves(seed);
        auto gradient = [&](const oracles::RandomGraph& leaves) {
            Tape<double> t;
            std::vector<NodeId> p;
            for (const auto& v : leaves.values) p.push_back(t.parameter(v));
            const auto gr = t.grad(oracles::build_random_graph(t, p, seed), p);
            std::vector<Mat> out;
            for (const NodeId n : gr) out.push_back(t.evaluate(n));
            return out;
        };
        // Direction: the all-ones vector. Hv = grad(sum_i <g_i, 1>).
        Tape<double> t;
        std::vector<NodeId> p;
        for (const auto& v : g.values) p.push_back(t.parameter(v));
        const auto gr = t.grad(oracles::build_random_graph(t, p, seed), p);
        NodeId dot = t.sum(gr[0]);
        for (std::size_t i = 1; i < gr.size(); ++i) dot = t.add(dot, t.sum(gr[i]));
        const auto hv = t.grad(dot, p);

        const double h = 1e-5;
        oracles::RandomGraph up = g;
        oracles::RandomGraph down = g;
        for (auto& v : up.values) v.array() += h;
        for (auto& v : down.values) v.array() -= h;
        const auto gu = gradient(up);
        const auto gd = gradient(down);
        for (std::size_t i = 0; i < p.size(); ++i) {
            const Mat fd = (gu[i] - gd[i]) / (2 * h);
            const Mat ad = t.evaluate(hv[i]);
            for (Eigen::Index k = 0; k < fd.size(); ++k) {
                const double denom = std::max({std::abs(fd.data()[k]), std::abs(ad.data()[k]), 1e-2});
                INFO("seed " << seed);
                CHECK(std::abs(fd.data()[k] - ad.data()[k]) / denom < 1e-4);
            }
        }
    }
}

TEST_CASE("quadratic meta-gradient: second order 0.5, first order 1.0") {
    CHECK(std::abs(oracles::quadratic_meta_gradient(false) - 0.5) <= 1e-10);
    CHECK(std::abs(oracles::quadratic_meta_gradient(true) - 1.0) <= 1e-10);
}

TEST_CASE("evaluation is deterministic") {
    auto run = [] {
        oracles::RandomGraph g = oracles::random_leaves(42);
        Tape<double> t;
        std::vector<NodeId> p;
        for (const auto& v : g.values) p.push_back(t.parameter(v));
        const auto gr = t.grad(oracles::build_random_graph(t, p, 42), p);
        return Mat(t.evaluate(gr[0]));
    };
    const Mat a = run();
    const Mat b = run();
    CHECK(std::memcmp(a.data(), b.data(), sizeof(double) * a.size()) == 0);
}

TEST_CASE("memoized evaluation and element accounting") {
    Tape<double> t;
    const NodeId a = t.constant(Mat::Ones(2, 3));
    const NodeId b = t.square(a);
    CHECK_FALSE(t.evaluated(b));
    t.evaluate(b);
    CHECK(t.evaluated(b));
    CHECK(t.size() == 2);
    CHECK(t.element_count() == 12);
    CHECK(t.roots().empty());
}

TEST_CASE("float tapes run the same code path") {
    Tape<float> t;
    const NodeId w = t.parameter(Eigen::MatrixXf::Constant(1, 1, 3.0f));
    const auto g = t.grad(t.sum(t.square(w)), std::vector<NodeId>{w});
    CHECK(t.evaluate(g[0])(0, 0) == 6.0f);
}
