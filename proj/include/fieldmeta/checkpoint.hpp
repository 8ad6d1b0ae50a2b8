#pragma once

// Binary checkpoints ("FMC1") for meta-training state and fitted parameters.
// The byte layout is described in docs/checkpoint-format.md.

#include "fieldmeta/metatrain.hpp"

#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <string_view>
#include <vector>

namespace fieldmeta::persist {

inline constexpr std::uint32_t kFormatVersion = 1;

enum class CheckpointErrc : std::uint8_t {
    open_failed,
    bad_magic,
    unsupported_version,
    length_mismatch,
    checksum_mismatch,
    non_finite_payload,
    malformed_record,
    wrong_kind,
    precision_mismatch,
};

std::string_view to_string(CheckpointErrc code);

class CheckpointError : public std::runtime_error {
public:
    CheckpointError(CheckpointErrc code, const std::string& message);
    CheckpointErrc code() const { return code_; }

private:
    CheckpointErrc code_;
};

enum class Kind : std::uint8_t { state = 1, params = 2 };

/// Bytes per real in the payload.
enum class Precision : std::uint8_t { f32 = 4, f64 = 8 };

template <class Real>
constexpr Precision precision_of() {
    return sizeof(Real) == 4 ? Precision::f32 : Precision::f64;
}

struct Header {
    std::uint32_t version = 0;
    Kind kind = Kind::state;
    Precision precision = Precision::f64;
};

template <class Real>
struct FittedParams {
    nf::ModelSpec spec;
    nf::ParamVector<Real> params;
};

template <class Real>
std::vector<std::uint8_t> encode_state(const meta::MetaState<Real>& state);
template <class Real>
std::vector<std::uint8_t> encode_params(const nf::ModelSpec& spec, const nf::ParamVector<Real>& params);

/// Decoding a float32 payload into double widens every value exactly;
/// the reverse is refused with precision_mismatch.
template <class Real>
meta::MetaState<Real> decode_state(std::span<const std::uint8_t> bytes);
template <class Real>
FittedParams<Real> decode_params(std::span<const std::uint8_t> bytes);

/// Validates magic, version, trailer length and checksum.
Header decode_header(std::span<const std::uint8_t> bytes);

template <class Real>
void save_state(const meta::MetaState<Real>& state, const std::filesystem::path& path);
template <class Real>
meta::MetaState<Real> load_state(const std::filesystem::path& path);
template <class Real>
void save_params(const nf::ModelSpec& spec, const nf::ParamVector<Real>& params, const std::filesystem::path& path);
template <class Real>
FittedParams<Real> load_params(const std::filesystem::path& path);

Header read_header(const std::filesystem::path& path);

std::vector<std::uint8_t> read_file(const std::filesystem::path& path);
/// Writes through a temporary sibling and renames it into place.
void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);

}  // namespace fieldmeta::persist
