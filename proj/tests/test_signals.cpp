#include "fieldmeta/signals.hpp"

#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>

using namespace fieldmeta::signals;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / ("fieldmeta_signals_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

void write_bytes(const fs::path& p, const std::string& bytes) {
    std::ofstream out(p, std::ios::binary);
    out << bytes;
}

Signal image(int h, int w, int channels) {
    Signal s;
    s.resolution = {h, w};
    s.values = Eigen::MatrixXd::Zero(h * w, channels);
    return s;
}

IoErrc error_of(const fs::path& p) {
    try {
        load_signal(p);
    } catch (const IoError& e) {
        return e.code();
    }
    FAIL("expected an IoError");
    return IoErrc::open_failed;
}

}  // namespace

TEST_CASE("2x2 lattice") {
    const ContextSet c = grid_context(image(2, 2, 1));
    REQUIRE(c.size() == 4);
    Eigen::MatrixXd expected(4, 2);
    expected << -1, -1, -1, 1, 1, -1, 1, 1;
    CHECK(c.coords == expected);
}

TEST_CASE("series lattice spans [-50, 50]") {
    Signal s;
    s.modality = Modality::series1d;
    s.resolution = {3};
    s.values = Eigen::MatrixXd::Zero(3, 1);
    const ContextSet c = grid_context(s);
    CHECK(c.coords(0, 0) == -50.0);
    CHECK(c.coords(1, 0) == 0.0);
    CHECK(c.coords(2, 0) == 50.0);
}

TEST_CASE("3x3 centre maps to the origin") {
    const ContextSet c = grid_context(image(3, 3, 1));
    CHECK(c.coords(4, 0) == 0.0);
    CHECK(c.coords(4, 1) == 0.0);
}

TEST_CASE("index and pixel form a bijection") {
    const std::vector<int> res{5, 7};
    const ContextSet c = grid_context(image(5, 7, 1));
    for (std::size_t j = 0; j < 35; ++j) {
        const auto site = unravel(res, j);
        CHECK(ravel(res, site) == j);
        CHECK(c.coords(static_cast<Eigen::Index>(j), 0) == doctest::Approx(-1.0 + 2.0 * site[0] / 4.0));
        CHECK(c.coords(static_cast<Eigen::Index>(j), 1) == doctest::Approx(-1.0 + 2.0 * site[1] / 6.0));
    }
}

TEST_CASE("volumes") {
    Signal s;
    s.modality = Modality::grid3d;
    s.resolution = {2, 3, 4};
    s.values = Eigen::MatrixXd::Zero(24, 1);
    const ContextSet c = grid_context(s);
    CHECK(c.size() == 24);
    CHECK(c.input_dim() == 3);
    CHECK(c.coords.cwiseAbs().maxCoeff() == 1.0);
}

TEST_CASE("empty signal is an error") {
    CHECK_THROWS_AS(grid_context(image(0, 3, 1)), IoError);
}

TEST_CASE("sphere coordinates") {
    const int lat = 5;
    const int lon = 8;
    const ContextSet c = sphere_context(lat, lon, Eigen::MatrixXd::Zero(lat * lon, 1));
    CHECK(c.input_dim() == 3);
    // Equator row (rho = 0), first longitude (phi = 0).
    const Eigen::Index equator = 2 * lon;
    CHECK(c.coords(equator, 0) == doctest::Approx(1.0));
    CHECK(std::abs(c.coords(equator, 1)) < 1e-15);
    CHECK(std::abs(c.coords(equator, 2)) < 1e-15);
    // North pole row.
    for (int j = 0; j < lon; ++j) {
        const Eigen::Index r = 4 * lon + j;
        CHECK(std::abs(c.coords(r, 0)) < 1e-15);
        CHECK(std::abs(c.coords(r, 1)) < 1e-15);
        CHECK(c.coords(r, 2) == doctest::Approx(1.0));
    }
    for (Eigen::Index r = 0; r < c.size(); ++r) CHECK(std::abs(c.coords.row(r).norm() - 1.0) <= 1e-12);
}

TEST_CASE("black P6 image") {
    const fs::path dir = scratch_dir("black");
    std::string ppm = "P6\n4 4\n255\n" + std::string(48, '\0');
    write_bytes(dir / "black.ppm", ppm);
    const Signal s = load_image(dir / "black.ppm");
    CHECK(s.values.rows() == 16);
    CHECK(s.values.cols() == 3);
    CHECK(s.values.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("image write and read are bit-exact") {
    const fs::path dir = scratch_dir("roundtrip");
    Signal s = image(3, 5, 3);
    for (Eigen::Index k = 0; k < s.values.size(); ++k) s.values.data()[k] = static_cast<double>(k % 256) / 255.0;
    write_image(dir / "a.ppm", s);
    CHECK(load_image(dir / "a.ppm").values == s.values);
    Signal g = image(2, 2, 1);
    g.values << 0, 1, 0.2, 0.4;
    write_image(dir / "g.pgm", g);
    const Signal back = load_image(dir / "g.pgm");
    CHECK(back.values.cols() == 1);
    CHECK(back.values(1, 0) == 1.0);
}

TEST_CASE("PPM with comments") {
    const fs::path dir = scratch_dir("comments");
    write_bytes(dir / "c.ppm", "P6\n# a comment\n1 1\n255\n" + std::string("\xff\x00\x80", 3));
    const Signal s = load_image(dir / "c.ppm");
    CHECK(s.values(0, 0) == 1.0);
    CHECK(s.values(0, 2) == doctest::Approx(128.0 / 255.0));
}

TEST_CASE("image errors are distinct") {
    const fs::path dir = scratch_dir("errors");
    write_bytes(dir / "magic.ppm", "P3\n1 1\n255\n0 0 0\n");
    write_bytes(dir / "trunc.ppm", "P6\n2 2\n255\n" + std::string(5, '\0'));
    write_bytes(dir / "deep.ppm", "P6\n1 1\n65535\n" + std::string(6, '\0'));
    write_bytes(dir / "header.ppm", "P6\n2 x\n255\n");
    CHECK(error_of(dir / "magic.ppm") == IoErrc::malformed_header);
    CHECK(error_of(dir / "trunc.ppm") == IoErrc::truncated_payload);
    CHECK(error_of(dir / "deep.ppm") == IoErrc::unsupported_bit_depth);
    CHECK(error_of(dir / "header.ppm") == IoErrc::malformed_header);
    CHECK(error_of(dir / "missing.ppm") == IoErrc::open_failed);
    CHECK(error_of(dir / "file.jpg") == IoErrc::unsupported_format);
}

TEST_CASE("WAV mapping") {
    const fs::path dir = scratch_dir("wav");
    const std::vector<std::int16_t> samples{0, -32768, 32767};
    write_wav(dir / "a.wav", samples);
    const Signal s = load_series(dir / "a.wav");
    CHECK(s.modality == Modality::series1d);
    CHECK(s.values(0, 0) == doctest::Approx(32768.0 / 65535.0).epsilon(1e-15));
    CHECK(s.values(0, 0) == doctest::Approx(0.50001).epsilon(1e-5));
    CHECK(s.values(1, 0) == 0.0);
    CHECK(s.values(2, 0) == 1.0);
}

TEST_CASE("WAV errors") {
    const fs::path dir = scratch_dir("wav_errors");
    const std::vector<std::int16_t> samples{1, 2, 3, 4};
    write_wav(dir / "ok.wav", samples);
    std::ifstream in(dir / "ok.wav", std::ios::binary);
    std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    write_bytes(dir / "trunc.wav", bytes.substr(0, bytes.size() - 3));
    std::string eight = bytes;
    eight[34] = 8;  // bits per sample
    write_bytes(dir / "eight.wav", eight);
    write_bytes(dir / "junk.wav", "not a wave file at all");
    CHECK(error_of(dir / "trunc.wav") == IoErrc::truncated_payload);
    CHECK(error_of(dir / "eight.wav") == IoErrc::unsupported_bit_depth);
    CHECK(error_of(dir / "junk.wav") == IoErrc::malformed_header);
}

TEST_CASE("raw float32 series") {
    const fs::path dir = scratch_dir("f32");
    const float raw[3] = {-2.0f, 0.0f, 2.0f};
    write_bytes(dir / "a.f32", std::string(reinterpret_cast<const char*>(raw), sizeof raw));
    write_bytes(dir / "a.f32.len", "3\n");
    const Signal s = load_series(dir / "a.f32");
    CHECK(s.values(0, 0) == 0.0);
    CHECK(s.values(1, 0) == 0.5);
    CHECK(s.values(2, 0) == 1.0);
    write_bytes(dir / "b.f32", std::string(reinterpret_cast<const char*>(raw), 8));
    write_bytes(dir / "b.f32.len", "3\n");
    CHECK(error_of(dir / "b.f32") == IoErrc::truncated_payload);
}

TEST_CASE("synthetic signals") {
    const int res[2] = {16, 12};
    for (const SynthKind kind : {SynthKind::sinmix, SynthKind::shapes}) {
        const Signal a = synth(kind, 5, res, 3);
        const Signal b = synth(kind, 5, res, 3);
        CHECK(a.values == b.values);
        CHECK_FALSE(a.values == synth(kind, 6, res, 3).values);
        CHECK(a.values.minCoeff() >= 0.0);
        CHECK(a.values.maxCoeff() <= 1.0);
        CHECK(a.values.rows() == 16 * 12);
    }
    const int line[1] = {64};
    const Signal s = synth(SynthKind::sinmix, 1, line, 1);
    CHECK(s.modality == Modality::series1d);
}

TEST_CASE("dataset split and reload") {
    const fs::path dir = scratch_dir("dataset");
    const int res[2] = {4, 4};
    const Dataset ds = synth_dataset(SynthKind::sinmix, 5, res, 1, 0.4, 3);
    CHECK(ds.train.size() == 3);
    CHECK(ds.test.size() == 2);
    save_dataset(dir, ds);
    const Dataset back = load_dataset(dir);
    REQUIRE(back.train.size() == 3);
    CHECK(back.test.front().name == "synth_00003.pgm");

    write_split(dir, 0.25);
    const Dataset resplit = load_dataset(dir);
    CHECK(resplit.train.size() == 3);
    CHECK(resplit.test.size() == 2);
    CHECK(resplit.test.back().name == "synth_00004.pgm");
}

TEST_CASE("subset keeps the given order") {
    const ContextSet c = grid_context(image(2, 3, 1));
    const std::vector<std::uint32_t> idx{4, 1};
    const ContextSet s = c.subset(idx);
    CHECK(s.size() == 2);
    CHECK(s.coords.row(0) == c.coords.row(4));
    CHECK(s.coords.row(1) == c.coords.row(1));
}
