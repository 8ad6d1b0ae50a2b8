#include "oracles.hpp"

#include "fieldmeta/checkpoint.hpp"

#include <doctest.h>

#include <bit>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <limits>

using namespace fieldmeta;
using persist::CheckpointErrc;
using persist::CheckpointError;
using namespace oracles;
using oracles::Bytes;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / ("fieldmeta_ckpt_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

RecordAt record(const Bytes& b, std::uint16_t tag) {
    const auto r = oracles::find_record(b, tag);
    REQUIRE(r.has_value());
    return *r;
}

meta::MetaState<double> sample_state() {
    nf::ModelSpec spec;
    spec.input_dim = 2;
    spec.output_dim = 3;
    spec.hidden_dim = 5;
    spec.depth = 3;
    spec.activation = nf::Activation::relu_fourier;
    spec.ff_features = 4;
    spec.ff_seed = 123;
    spec.head = nf::Head::sigmoid;
    meta::Hyper h;
    h.inner_steps = 3;
    h.gamma = 0.3;
    h.lambda = 7.5;
    auto s = meta::make_state<double>(spec, h, 0.01, 99);
    s.inner_lrs = {0.1, 1.0 / 3.0, 1e-7};
    for (std::size_t i = 0; i < s.adam_m.size(); ++i) {
        s.adam_m[i] = 1e-3 * static_cast<double>(i);
        s.adam_v[i] = 1e-9 * static_cast<double>(i * i);
    }
    s.outer_step = 4242;
    return s;
}

CheckpointErrc decode_error(const Bytes& b) {
    try {
        persist::decode_state<double>(b);
    } catch (const CheckpointError& e) {
        return e.code();
    }
    FAIL("expected a CheckpointError");
    return CheckpointErrc::open_failed;
}

}  // namespace

TEST_CASE("state round trip is bit-exact") {
    const auto s = sample_state();
    const Bytes bytes = persist::encode_state(s);
    CHECK(std::memcmp(bytes.data(), "FMC1", 4) == 0);
    CHECK(read_le(bytes, 4, 4) == persist::kFormatVersion);
    CHECK(bytes[8] == 1);
    CHECK(bytes[9] == 8);
    CHECK(read_le(bytes, bytes.size() - 12, 8) == bytes.size() - 12);
    CHECK(read_le(bytes, bytes.size() - 4, 4) == crc32_bitwise(bytes.data(), bytes.size() - 12));

    const auto back = persist::decode_state<double>(bytes);
    CHECK(back == s);
    CHECK(persist::encode_state(back) == bytes);

    const fs::path dir = scratch_dir("roundtrip");
    persist::save_state(s, dir / "s.fmc");
    CHECK(persist::read_file(dir / "s.fmc") == bytes);
    CHECK(persist::load_state<double>(dir / "s.fmc") == s);
    CHECK(persist::read_header(dir / "s.fmc").kind == persist::Kind::state);
    for (const auto& entry : fs::directory_iterator(dir)) CHECK(entry.path().filename() == "s.fmc");
}

TEST_CASE("float state round trip and exact widening") {
    const auto sf = meta::make_state<float>(sample_state().spec, sample_state().hyper, 0.01, 5);
    const Bytes bytes = persist::encode_state(sf);
    CHECK(bytes[9] == 4);
    CHECK(persist::decode_state<float>(bytes) == sf);

    const auto wide = persist::decode_state<double>(bytes);
    for (std::size_t i = 0; i < sf.theta0.size(); ++i) CHECK(wide.theta0.flat()[i] == static_cast<double>(sf.theta0.flat()[i]));
    CHECK(wide.inner_lrs[0] == static_cast<double>(sf.inner_lrs[0]));

    try {
        persist::decode_state<float>(persist::encode_state(sample_state()));
        FAIL("expected precision_mismatch");
    } catch (const CheckpointError& e) {
        CHECK(e.code() == CheckpointErrc::precision_mismatch);
    }
}

TEST_CASE("params round trip and kind checks") {
    const auto s = sample_state();
    const Bytes p = persist::encode_params(s.spec, s.theta0);
    CHECK(p[8] == 2);
    const auto back = persist::decode_params<double>(p);
    CHECK(back.spec == s.spec);
    CHECK(back.params == s.theta0);
    try {
        persist::decode_state<double>(p);
        FAIL("expected wrong_kind");
    } catch (const CheckpointError& e) {
        CHECK(e.code() == CheckpointErrc::wrong_kind);
    }
    try {
        persist::decode_params<double>(persist::encode_state(s));
        FAIL("expected wrong_kind");
    } catch (const CheckpointError& e) {
        CHECK(e.code() == CheckpointErrc::wrong_kind);
    }
}

TEST_CASE("every corruption maps to its own code") {
    const Bytes good = persist::encode_state(sample_state());

    Bytes magic = good;
    magic[0] = 'X';
    CHECK(decode_error(magic) == CheckpointErrc::bad_magic);

    Bytes version = good;
    write_le(version, 4, 2, 4);
    reseal(version);
    CHECK(decode_error(version) == CheckpointErrc::unsupported_version);

    Bytes truncated(good.begin(), good.end() - 5);
    CHECK(decode_error(truncated) == CheckpointErrc::length_mismatch);
    CHECK(decode_error(Bytes(good.begin(), good.begin() + 10)) == CheckpointErrc::length_mismatch);

    Bytes flipped = good;
    flipped[40] ^= 0x01;
    CHECK(decode_error(flipped) == CheckpointErrc::checksum_mismatch);

    Bytes nan = good;
    const auto theta = record(nan, 31);
    write_le(nan, theta.payload + 8, std::bit_cast<std::uint64_t>(std::numeric_limits<double>::quiet_NaN()), 8);
    reseal(nan);
    CHECK(decode_error(nan) == CheckpointErrc::non_finite_payload);

    Bytes inf = good;
    const auto gamma = record(inf, 22);
    CHECK(gamma.type == 2);
    write_le(inf, gamma.payload, std::bit_cast<std::uint64_t>(std::numeric_limits<double>::infinity()), 8);
    reseal(inf);
    CHECK(decode_error(inf) == CheckpointErrc::non_finite_payload);

    Bytes unknown = good;
    write_le(unknown, record(unknown, 35).header, 999, 2);
    reseal(unknown);
    CHECK(decode_error(unknown) == CheckpointErrc::malformed_record);

    Bytes duplicate = good;
    write_le(duplicate, record(duplicate, 34).header, 35, 2);
    reseal(duplicate);
    CHECK(decode_error(duplicate) == CheckpointErrc::malformed_record);

    Bytes short_theta = good;
    const auto t = record(short_theta, 31);
    short_theta.erase(short_theta.begin() + static_cast<std::ptrdiff_t>(t.payload),
                      short_theta.begin() + static_cast<std::ptrdiff_t>(t.payload + 8));
    write_le(short_theta, t.header + 3, t.count - 1, 4);
    reseal(short_theta);
    CHECK(decode_error(short_theta) == CheckpointErrc::malformed_record);

    Bytes bad_type = good;
    bad_type[record(bad_type, 34).header + 2] = 9;
    reseal(bad_type);
    CHECK(decode_error(bad_type) == CheckpointErrc::malformed_record);

    Bytes bad_kind = good;
    bad_kind[8] = 7;
    reseal(bad_kind);
    CHECK(decode_error(bad_kind) == CheckpointErrc::malformed_record);

    try {
        persist::load_state<double>(fs::temp_directory_path() / "fieldmeta_ckpt_missing" / "nope.fmc");
        FAIL("expected open_failed");
    } catch (const CheckpointError& e) {
        CHECK(e.code() == CheckpointErrc::open_failed);
        CHECK(std::string(e.what()).find("open_failed") != std::string::npos);
    }
}

TEST_CASE("non-finite values are never written") {
    auto s = sample_state();
    s.adam_v[2] = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(persist::encode_state(s), CheckpointError);
}

TEST_CASE("error names") {
    CHECK(persist::to_string(CheckpointErrc::checksum_mismatch) == "checksum_mismatch");
    CHECK(persist::to_string(CheckpointErrc::precision_mismatch) == "precision_mismatch");
}
