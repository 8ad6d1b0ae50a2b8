#include "fieldmeta/checkpoint.hpp"

#include <zlib.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>

namespace fieldmeta::persist {

namespace fs = std::filesystem;

namespace {

constexpr std::uint8_t kMagic[4] = {'F', 'M', 'C', '1'};
constexpr std::size_t kHeaderSize = 12;
constexpr std::size_t kTrailerSize = 12;

enum class Type : std::uint8_t { u64 = 1, f64 = 2, real = 3 };

enum Tag : std::uint16_t {
    tag_input_dim = 1,
    tag_output_dim = 2,
    tag_hidden_dim = 3,
    tag_depth = 4,
    tag_activation = 5,
    tag_omega0 = 6,
    tag_ff_sigma = 7,
    tag_ff_features = 8,
    tag_ff_seed = 9,
    tag_head = 10,
    tag_bias = 11,
    tag_inner_steps = 20,
    tag_bootstrap_steps = 21,
    tag_gamma = 22,
    tag_lambda = 23,
    tag_meta_lr = 24,
    tag_inner_lrs = 30,
    tag_theta0 = 31,
    tag_adam_m = 32,
    tag_adam_v = 33,
    tag_outer_step = 34,
    tag_rng_seed = 35,
    tag_params = 40,
};

[[noreturn]] void fail(CheckpointErrc code, const std::string& message) {
    throw CheckpointError(code, message);
}

class Writer {
public:
    Writer(Kind kind, Precision precision) {
        bytes_.insert(bytes_.end(), std::begin(kMagic), std::end(kMagic));
        put(kFormatVersion, 4);
        put(static_cast<std::uint8_t>(kind), 1);
        put(static_cast<std::uint8_t>(precision), 1);
        put(0, 2);
    }

    void u64(std::uint16_t tag, std::uint64_t v) {
        record(tag, Type::u64, 1);
        put(v, 8);
    }

    void f64(std::uint16_t tag, double v) {
        check_finite(tag, v);
        record(tag, Type::f64, 1);
        put(std::bit_cast<std::uint64_t>(v), 8);
    }

    template <class Real>
    void reals(std::uint16_t tag, std::span<const Real> values) {
        record(tag, Type::real, values.size());
        for (const Real v : values) {
            check_finite(tag, static_cast<double>(v));
            if constexpr (sizeof(Real) == 4) {
                put(std::bit_cast<std::uint32_t>(v), 4);
            } else {
                put(std::bit_cast<std::uint64_t>(v), 8);
            }
        }
    }

    std::vector<std::uint8_t> finish() && {
        const std::uint64_t length = bytes_.size();
        const auto crc = static_cast<std::uint32_t>(crc32(0L, bytes_.data(), static_cast<uInt>(bytes_.size())));
        put(length, 8);
        put(crc, 4);
        return std::move(bytes_);
    }

private:
    void put(std::uint64_t v, int width) {
        for (int i = 0; i < width; ++i) bytes_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }

    void record(std::uint16_t tag, Type type, std::size_t count) {
        if (count > std::numeric_limits<std::uint32_t>::max()) {
            fail(CheckpointErrc::malformed_record, "record " + std::to_string(tag) + " is too large");
        }
        put(tag, 2);
        put(static_cast<std::uint8_t>(type), 1);
        put(count, 4);
    }

    static void check_finite(std::uint16_t tag, double v) {
        if (!std::isfinite(v)) {
            fail(CheckpointErrc::non_finite_payload, "refusing to write a non-finite value in record " +
                                                         std::to_string(tag));
        }
    }

    std::vector<std::uint8_t> bytes_;
};

std::uint64_t get(std::span<const std::uint8_t> bytes, std::size_t at, int width) {
    std::uint64_t v = 0;
    for (int i = 0; i < width; ++i) v |= static_cast<std::uint64_t>(bytes[at + i]) << (8 * i);
    return v;
}

struct Record {
    Type type = Type::u64;
    std::uint32_t count = 0;
    std::span<const std::uint8_t> payload;
};

// Parses the record section into a tag -> record map, in file order.
class Reader {
public:
    Reader(std::span<const std::uint8_t> bytes, const Header& header) : header_(header) {
        std::size_t at = kHeaderSize;
        const std::size_t end = bytes.size() - kTrailerSize;
        while (at < end) {
            if (end - at < 7) fail(CheckpointErrc::malformed_record, "truncated record header at byte " + std::to_string(at));
            const auto tag = static_cast<std::uint16_t>(get(bytes, at, 2));
            const auto type = static_cast<Type>(bytes[at + 2]);
            const auto count = static_cast<std::uint32_t>(get(bytes, at + 3, 4));
            std::size_t width = 0;
            switch (type) {
            case Type::u64:
            case Type::f64: width = 8; break;
            case Type::real: width = static_cast<std::size_t>(header.precision); break;
            default: fail(CheckpointErrc::malformed_record, "record " + std::to_string(tag) + " has unknown type");
            }
            at += 7;
            const std::size_t size = width * count;
            if (size > end - at) fail(CheckpointErrc::malformed_record, "record " + std::to_string(tag) + " overruns the file");
            for (const auto& [seen, rec] : records_) {
                if (seen == tag) fail(CheckpointErrc::malformed_record, "duplicate record " + std::to_string(tag));
            }
            records_.push_back({tag, Record{type, count, bytes.subspan(at, size)}});
            at += size;
        }
    }

    std::uint64_t u64(std::uint16_t tag) const {
        const Record& r = find(tag, Type::u64);
        if (r.count != 1) fail(CheckpointErrc::malformed_record, "record " + std::to_string(tag) + " must hold one value");
        return get(r.payload, 0, 8);
    }

    double f64(std::uint16_t tag) const {
        const Record& r = find(tag, Type::f64);
        if (r.count != 1) fail(CheckpointErrc::malformed_record, "record " + std::to_string(tag) + " must hold one value");
        const double v = std::bit_cast<double>(get(r.payload, 0, 8));
        if (!std::isfinite(v)) fail(CheckpointErrc::non_finite_payload, "record " + std::to_string(tag) + " is not finite");
        return v;
    }

    template <class Real>
    std::vector<Real> reals(std::uint16_t tag) const {
        const Record& r = find(tag, Type::real);
        std::vector<Real> out(r.count);
        for (std::uint32_t i = 0; i < r.count; ++i) {
            double v = 0.0;
            if (header_.precision == Precision::f32) {
                v = static_cast<double>(std::bit_cast<float>(static_cast<std::uint32_t>(get(r.payload, 4 * i, 4))));
            } else {
                v = std::bit_cast<double>(get(r.payload, 8 * i, 8));
            }
            if (!std::isfinite(v)) {
                fail(CheckpointErrc::non_finite_payload,
                     "record " + std::to_string(tag) + " has a non-finite value at index " + std::to_string(i));
            }
            out[i] = static_cast<Real>(v);
        }
        return out;
    }

    void expect_only(std::initializer_list<std::uint16_t> allowed) const {
        for (const auto& [tag, rec] : records_) {
            if (std::find(allowed.begin(), allowed.end(), tag) == allowed.end()) {
                fail(CheckpointErrc::malformed_record, "unexpected record " + std::to_string(tag));
            }
        }
    }

private:
    const Record& find(std::uint16_t tag, Type type) const {
        for (const auto& [seen, rec] : records_) {
            if (seen != tag) continue;
            if (rec.type != type) fail(CheckpointErrc::malformed_record, "record " + std::to_string(tag) + " has the wrong type");
            return rec;
        }
        fail(CheckpointErrc::malformed_record, "missing record " + std::to_string(tag));
    }

    Header header_;
    std::vector<std::pair<std::uint16_t, Record>> records_;
};

int to_int(std::uint64_t v, std::uint16_t tag) {
    if (v > static_cast<std::uint64_t>(std::numeric_limits<int>::max())) {
        fail(CheckpointErrc::malformed_record, "record " + std::to_string(tag) + " is out of range");
    }
    return static_cast<int>(v);
}

void write_spec(Writer& w, const nf::ModelSpec& spec) {
    w.u64(tag_input_dim, static_cast<std::uint64_t>(spec.input_dim));
    w.u64(tag_output_dim, static_cast<std::uint64_t>(spec.output_dim));
    w.u64(tag_hidden_dim, static_cast<std::uint64_t>(spec.hidden_dim));
    w.u64(tag_depth, static_cast<std::uint64_t>(spec.depth));
    w.u64(tag_activation, static_cast<std::uint64_t>(spec.activation));
    w.f64(tag_omega0, spec.omega0);
    w.f64(tag_ff_sigma, spec.ff_sigma);
    w.u64(tag_ff_features, static_cast<std::uint64_t>(spec.ff_features));
    w.u64(tag_ff_seed, spec.ff_seed);
    w.u64(tag_head, static_cast<std::uint64_t>(spec.head));
    w.u64(tag_bias, spec.bias ? 1 : 0);
}

nf::ModelSpec read_spec(const Reader& r) {
    nf::ModelSpec spec;
    spec.input_dim = to_int(r.u64(tag_input_dim), tag_input_dim);
    spec.output_dim = to_int(r.u64(tag_output_dim), tag_output_dim);
    spec.hidden_dim = to_int(r.u64(tag_hidden_dim), tag_hidden_dim);
    spec.depth = to_int(r.u64(tag_depth), tag_depth);
    const std::uint64_t activation = r.u64(tag_activation);
    if (activation > 2) fail(CheckpointErrc::malformed_record, "unknown activation code");
    spec.activation = static_cast<nf::Activation>(activation);
    spec.omega0 = r.f64(tag_omega0);
    spec.ff_sigma = r.f64(tag_ff_sigma);
    spec.ff_features = to_int(r.u64(tag_ff_features), tag_ff_features);
    spec.ff_seed = r.u64(tag_ff_seed);
    const std::uint64_t head = r.u64(tag_head);
    if (head > 1) fail(CheckpointErrc::malformed_record, "unknown head code");
    spec.head = static_cast<nf::Head>(head);
    const std::uint64_t bias = r.u64(tag_bias);
    if (bias > 1) fail(CheckpointErrc::malformed_record, "bias flag must be 0 or 1");
    spec.bias = bias == 1;
    try {
        spec.validate();
    } catch (const std::invalid_argument& e) {
        fail(CheckpointErrc::malformed_record, e.what());
    }
    return spec;
}

template <class Real>
nf::ParamVector<Real> read_params(const Reader& r, std::uint16_t tag, const nf::ModelSpec& spec) {
    nf::ParamVector<Real> params(spec);
    const std::vector<Real> flat = r.reals<Real>(tag);
    if (flat.size() != params.size()) {
        fail(CheckpointErrc::malformed_record, "parameter record holds " + std::to_string(flat.size()) +
                                                   " values, the model needs " + std::to_string(params.size()));
    }
    std::copy(flat.begin(), flat.end(), params.flat().begin());
    return params;
}

template <class Real>
Header checked_header(std::span<const std::uint8_t> bytes, Kind kind) {
    const Header h = decode_header(bytes);
    if (h.kind != kind) {
        fail(CheckpointErrc::wrong_kind, kind == Kind::state ? "file holds fitted parameters, not a training state"
                                                            : "file holds a training state, not fitted parameters");
    }
    if (static_cast<std::size_t>(h.precision) > sizeof(Real)) {
        fail(CheckpointErrc::precision_mismatch, "a float64 checkpoint cannot be loaded into a float32 session");
    }
    return h;
}

}  // namespace

std::string_view to_string(CheckpointErrc code) {
    switch (code) {
    case CheckpointErrc::open_failed: return "open_failed";
    case CheckpointErrc::bad_magic: return "bad_magic";
    case CheckpointErrc::unsupported_version: return "unsupported_version";
    case CheckpointErrc::length_mismatch: return "length_mismatch";
    case CheckpointErrc::checksum_mismatch: return "checksum_mismatch";
    case CheckpointErrc::non_finite_payload: return "non_finite_payload";
    case CheckpointErrc::malformed_record: return "malformed_record";
    case CheckpointErrc::wrong_kind: return "wrong_kind";
    case CheckpointErrc::precision_mismatch: return "precision_mismatch";
    }
    return "unknown";
}

CheckpointError::CheckpointError(CheckpointErrc code, const std::string& message)
    : std::runtime_error("checkpoint " + std::string(to_string(code)) + ": " + message), code_(code) {}

Header decode_header(std::span<const std::uint8_t> bytes) {
    if (bytes.size() < 4 || std::memcmp(bytes.data(), kMagic, 4) != 0) fail(CheckpointErrc::bad_magic, "not an FMC1 file");
    if (bytes.size() < kHeaderSize + kTrailerSize) fail(CheckpointErrc::length_mismatch, "file is truncated");
    Header h;
    h.version = static_cast<std::uint32_t>(get(bytes, 4, 4));
    if (h.version != kFormatVersion) {
        fail(CheckpointErrc::unsupported_version, "format version " + std::to_string(h.version) + ", this build reads " +
                                                      std::to_string(kFormatVersion));
    }
    const std::size_t body = bytes.size() - kTrailerSize;
    const std::uint64_t length = get(bytes, body, 8);
    if (length != body) {
        fail(CheckpointErrc::length_mismatch, "trailer records " + std::to_string(length) + " bytes, file holds " +
                                                  std::to_string(body));
    }
    const auto stored = static_cast<std::uint32_t>(get(bytes, body + 8, 4));
    const auto actual = static_cast<std::uint32_t>(crc32(0L, bytes.data(), static_cast<uInt>(body)));
    if (stored != actual) fail(CheckpointErrc::checksum_mismatch, "payload checksum does not match");
    const std::uint8_t kind = bytes[8];
    if (kind != 1 && kind != 2) fail(CheckpointErrc::malformed_record, "unknown checkpoint kind");
    h.kind = static_cast<Kind>(kind);
    const std::uint8_t precision = bytes[9];
    if (precision != 4 && precision != 8) fail(CheckpointErrc::malformed_record, "unknown precision tag");
    h.precision = static_cast<Precision>(precision);
    return h;
}

template <class Real>
std::vector<std::uint8_t> encode_state(const meta::MetaState<Real>& state) {
    state.validate();
    Writer w(Kind::state, precision_of<Real>());
    write_spec(w, state.spec);
    w.u64(tag_inner_steps, static_cast<std::uint64_t>(state.hyper.inner_steps));
    w.u64(tag_bootstrap_steps, static_cast<std::uint64_t>(state.hyper.bootstrap_steps));
    w.f64(tag_gamma, state.hyper.gamma);
    w.f64(tag_lambda, state.hyper.lambda);
    w.f64(tag_meta_lr, state.hyper.meta_lr);
    w.reals<Real>(tag_inner_lrs, state.inner_lrs);
    w.reals<Real>(tag_theta0, state.theta0.flat());
    w.reals<Real>(tag_adam_m, state.adam_m);
    w.reals<Real>(tag_adam_v, state.adam_v);
    w.u64(tag_outer_step, state.outer_step);
    w.u64(tag_rng_seed, state.rng_seed);
    return std::move(w).finish();
}

template <class Real>
std::vector<std::uint8_t> encode_params(const nf::ModelSpec& spec, const nf::ParamVector<Real>& params) {
    if (params.size() != nf::ParamVector<Real>(spec).size()) {
        throw std::invalid_argument("encode_params: parameters do not match the model spec");
    }
    Writer w(Kind::params, precision_of<Real>());
    write_spec(w, spec);
    w.reals<Real>(tag_params, params.flat());
    return std::move(w).finish();
}

template <class Real>
meta::MetaState<Real> decode_state(std::span<const std::uint8_t> bytes) {
    const Header h = checked_header<Real>(bytes, Kind::state);
    const Reader r(bytes, h);
    r.expect_only({tag_input_dim, tag_output_dim, tag_hidden_dim, tag_depth, tag_activation, tag_omega0, tag_ff_sigma,
                   tag_ff_features, tag_ff_seed, tag_head, tag_bias, tag_inner_steps, tag_bootstrap_steps, tag_gamma,
                   tag_lambda, tag_meta_lr, tag_inner_lrs, tag_theta0, tag_adam_m, tag_adam_v, tag_outer_step,
                   tag_rng_seed});
    meta::MetaState<Real> state;
    state.spec = read_spec(r);
    state.hyper.inner_steps = to_int(r.u64(tag_inner_steps), tag_inner_steps);
    state.hyper.bootstrap_steps = to_int(r.u64(tag_bootstrap_steps), tag_bootstrap_steps);
    state.hyper.gamma = r.f64(tag_gamma);
    state.hyper.lambda = r.f64(tag_lambda);
    state.hyper.meta_lr = r.f64(tag_meta_lr);
    state.inner_lrs = r.reals<Real>(tag_inner_lrs);
    state.theta0 = read_params<Real>(r, tag_theta0, state.spec);
    state.adam_m = r.reals<Real>(tag_adam_m);
    state.adam_v = r.reals<Real>(tag_adam_v);
    state.outer_step = r.u64(tag_outer_step);
    state.rng_seed = r.u64(tag_rng_seed);
    try {
        state.validate();
    } catch (const std::invalid_argument& e) {
        fail(CheckpointErrc::malformed_record, e.what());
    }
    return state;
}

template <class Real>
FittedParams<Real> decode_params(std::span<const std::uint8_t> bytes) {
    const Header h = checked_header<Real>(bytes, Kind::params);
    const Reader r(bytes, h);
    r.expect_only({tag_input_dim, tag_output_dim, tag_hidden_dim, tag_depth, tag_activation, tag_omega0, tag_ff_sigma,
                   tag_ff_features, tag_ff_seed, tag_head, tag_bias, tag_params});
    FittedParams<Real> out;
    out.spec = read_spec(r);
    out.params = read_params<Real>(r, tag_params, out.spec);
    return out;
}

std::vector<std::uint8_t> read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(CheckpointErrc::open_failed, "cannot open " + path.string());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const fs::path& path, std::span<const std::uint8_t> bytes) {
    fs::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) fail(CheckpointErrc::open_failed, "cannot write " + tmp.string());
        out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
        if (!out) fail(CheckpointErrc::open_failed, "short write to " + tmp.string());
    }
    std::error_code ec;
    fs::rename(tmp, path, ec);
    if (ec) fail(CheckpointErrc::open_failed, "cannot move " + tmp.string() + " into place: " + ec.message());
}

Header read_header(const fs::path& path) {
    return decode_header(read_file(path));
}

template <class Real>
void save_state(const meta::MetaState<Real>& state, const fs::path& path) {
    write_file(path, encode_state(state));
}

template <class Real>
meta::MetaState<Real> load_state(const fs::path& path) {
    return decode_state<Real>(read_file(path));
}

template <class Real>
void save_params(const nf::ModelSpec& spec, const nf::ParamVector<Real>& params, const fs::path& path) {
    write_file(path, encode_params(spec, params));
}

template <class Real>
FittedParams<Real> load_params(const fs::path& path) {
    return decode_params<Real>(read_file(path));
}

#define FIELDMETA_INSTANTIATE(Real)                                                                           \
    template std::vector<std::uint8_t> encode_state<Real>(const meta::MetaState<Real>&);                      \
    template std::vector<std::uint8_t> encode_params<Real>(const nf::ModelSpec&, const nf::ParamVector<Real>&); \
    template meta::MetaState<Real> decode_state<Real>(std::span<const std::uint8_t>);                         \
    template FittedParams<Real> decode_params<Real>(std::span<const std::uint8_t>);                           \
    template void save_state<Real>(const meta::MetaState<Real>&, const fs::path&);                            \
    template meta::MetaState<Real> load_state<Real>(const fs::path&);                                         \
    template void save_params<Real>(const nf::ModelSpec&, const nf::ParamVector<Real>&, const fs::path&);     \
    template FittedParams<Real> load_params<Real>(const fs::path&);

FIELDMETA_INSTANTIATE(float)
FIELDMETA_INSTANTIATE(double)

#undef FIELDMETA_INSTANTIATE

}  // namespace fieldmeta::persist
