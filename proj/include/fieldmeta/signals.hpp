#pragma once

// Signal ingestion: file decoders, a synthetic corpus generator and the
// conversion of a signal into coordinate/value pairs.

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace fieldmeta::signals {

enum class Modality : std::uint8_t { image2d, series1d, grid3d, sphere2d };

std::string_view to_string(Modality m);

/// A sampled signal. `values` holds one row per lattice site in row-major
/// order over `resolution` (last axis fastest), normalized into [0, 1].
struct Signal {
    std::string name;
    Modality modality = Modality::image2d;
    std::vector<int> resolution;
    Eigen::MatrixXd values;
    std::pair<double, double> value_range{0.0, 1.0};  // of the raw encoding

    Eigen::Index channels() const { return values.cols(); }
    Eigen::Index sites() const { return values.rows(); }
};

/// The M coordinate/value pairs of one signal. Row j corresponds to lattice
/// site j of the source signal (see ravel/unravel).
struct ContextSet {
    Eigen::MatrixXd coords;  // [M x C]
    Eigen::MatrixXd values;  // [M x D]
    std::string source;
    Modality modality = Modality::image2d;
    std::vector<int> resolution;

    Eigen::Index size() const { return coords.rows(); }
    Eigen::Index input_dim() const { return coords.cols(); }
    Eigen::Index output_dim() const { return values.cols(); }
    /// Rows `indices` of this context, in the given order.
    ContextSet subset(std::span<const std::uint32_t> indices) const;
};

enum class IoErrc : std::uint8_t {
    open_failed,
    malformed_header,
    truncated_payload,
    unsupported_bit_depth,
    unsupported_format,
    empty_signal,
};

std::string_view to_string(IoErrc code);

class IoError : public std::runtime_error {
public:
    IoError(IoErrc code, const std::string& message);
    IoErrc code() const { return code_; }

private:
    IoErrc code_;
};

/// Row-major lattice index of `site` over `resolution`.
std::size_t ravel(std::span<const int> resolution, std::span<const int> site);
std::vector<int> unravel(std::span<const int> resolution, std::size_t index);

/// Endpoint-inclusive lattice in [-1, 1]^C (images, volumes) or [-50, 50]
/// (series). Sphere signals are routed through sphere_context.
ContextSet grid_context(const Signal& signal);

/// Latitudes evenly spaced over [-pi/2, pi/2], longitudes over
/// [0, 2 pi (n-1)/n]; coordinates are unit vectors
/// (cos lat cos lon, cos lat sin lon, sin lat). `values` is [lat*lon x D].
ContextSet sphere_context(int lat_count, int lon_count, const Eigen::MatrixXd& values);

Signal load_image(const std::filesystem::path& path);
Signal load_series(const std::filesystem::path& path);
/// Dispatches on extension: .ppm/.pgm images, .wav/.f32 series.
Signal load_signal(const std::filesystem::path& path);

/// Binary PPM (P6) for 3 channels, PGM (P5) for 1; values in [0,1] are
/// quantized with round-to-nearest.
void write_image(const std::filesystem::path& path, const Signal& signal);
void write_ppm(const std::filesystem::path& path, int width, int height, std::span<const std::uint8_t> rgb);
void write_wav(const std::filesystem::path& path, std::span<const std::int16_t> samples, int sample_rate = 16000);

/// Synthetic corpus kinds.
///
/// sinmix: a sum of 24 cosines with integer frequency vectors k drawn
///   uniformly from [-kmax, kmax]^C (kmax = max(1, min_axis/4)), amplitude
///   1/(1+|k|) and uniform phase, then min-max normalized to [0, 1].
/// shapes: a smooth two-frequency background plus 6 random discs and
///   rectangles of random intensity (2-D only; higher ranks fall back to
///   sinmix along the remaining axes).
/// Channels are generated independently.
enum class SynthKind : std::uint8_t { sinmix, shapes };

SynthKind parse_synth_kind(std::string_view text);
std::string_view to_string(SynthKind kind);

Signal synth(SynthKind kind, std::uint64_t seed, std::span<const int> resolution, int channels = 1);

struct Dataset {
    std::vector<Signal> train;
    std::vector<Signal> test;
};

/// Writes split.txt listing every signal file of `dir` in lexicographic
/// order; the last ceil(test_fraction * N) files are test signals.
void write_split(const std::filesystem::path& dir, double test_fraction);
/// Reads `dir/split.txt` ("train <file>" / "test <file>" lines).
Dataset load_dataset(const std::filesystem::path& dir);
/// Writes every signal as an image plus split.txt.
void save_dataset(const std::filesystem::path& dir, const Dataset& dataset);

Dataset synth_dataset(SynthKind kind, int count, std::span<const int> resolution, int channels, double test_fraction,
                      std::uint64_t seed);

}  // namespace fieldmeta::signals
