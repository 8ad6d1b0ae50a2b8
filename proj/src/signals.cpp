#include "fieldmeta/signals.hpp"

#include "fieldmeta/rng.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <iterator>
#include <numbers>
#include <random>
#include <sstream>

namespace fieldmeta::signals {

namespace fs = std::filesystem;

std::string_view to_string(Modality m) {
    switch (m) {
    case Modality::image2d: return "image2d";
    case Modality::series1d: return "series1d";
    case Modality::grid3d: return "grid3d";
    case Modality::sphere2d: return "sphere2d";
    }
    return "unknown";
}

std::string_view to_string(IoErrc code) {
    switch (code) {
    case IoErrc::open_failed: return "open_failed";
    case IoErrc::malformed_header: return "malformed_header";
    case IoErrc::truncated_payload: return "truncated_payload";
    case IoErrc::unsupported_bit_depth: return "unsupported_bit_depth";
    case IoErrc::unsupported_format: return "unsupported_format";
    case IoErrc::empty_signal: return "empty_signal";
    }
    return "unknown";
}

IoError::IoError(IoErrc code, const std::string& message)
    : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

ContextSet ContextSet::subset(std::span<const std::uint32_t> indices) const {
    ContextSet out;
    out.coords.resize(static_cast<Eigen::Index>(indices.size()), coords.cols());
    out.values.resize(static_cast<Eigen::Index>(indices.size()), values.cols());
    for (std::size_t i = 0; i < indices.size(); ++i) {
        const auto src = static_cast<Eigen::Index>(indices[i]);
        if (src >= size()) throw std::out_of_range("context index " + std::to_string(src) + " out of range");
        out.coords.row(static_cast<Eigen::Index>(i)) = coords.row(src);
        out.values.row(static_cast<Eigen::Index>(i)) = values.row(src);
    }
    out.source = source;
    out.modality = modality;
    return out;
}

std::size_t ravel(std::span<const int> resolution, std::span<const int> site) {
    if (resolution.size() != site.size()) throw std::invalid_argument("ravel: rank mismatch");
    std::size_t index = 0;
    for (std::size_t a = 0; a < resolution.size(); ++a) {
        if (site[a] < 0 || site[a] >= resolution[a]) throw std::out_of_range("ravel: site outside lattice");
        index = index * static_cast<std::size_t>(resolution[a]) + static_cast<std::size_t>(site[a]);
    }
    return index;
}

std::vector<int> unravel(std::span<const int> resolution, std::size_t index) {
    std::vector<int> site(resolution.size());
    for (std::size_t a = resolution.size(); a-- > 0;) {
        const auto n = static_cast<std::size_t>(resolution[a]);
        site[a] = static_cast<int>(index % n);
        index /= n;
    }
    if (index != 0) throw std::out_of_range("unravel: index outside lattice");
    return site;
}

namespace {

double lattice_coord(int i, int n, double lo, double hi) {
    if (n == 1) return 0.5 * (lo + hi);
    return lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n - 1);
}

std::size_t site_count(std::span<const int> resolution) {
    std::size_t m = 1;
    for (const int n : resolution) m *= static_cast<std::size_t>(std::max(n, 0));
    return resolution.empty() ? 0 : m;
}

}  // namespace

ContextSet grid_context(const Signal& signal) {
    const std::size_t m = site_count(signal.resolution);
    if (m == 0 || signal.values.rows() == 0) {
        throw IoError(IoErrc::empty_signal, "signal '" + signal.name + "' has no samples");
    }
    if (static_cast<std::size_t>(signal.values.rows()) != m) {
        throw std::invalid_argument("signal '" + signal.name + "' has " + std::to_string(signal.values.rows()) +
                                    " samples but its resolution implies " + std::to_string(m));
    }
    if (signal.modality == Modality::sphere2d) {
        if (signal.resolution.size() != 2) throw std::invalid_argument("sphere signal needs (lat, lon) resolution");
        ContextSet ctx = sphere_context(signal.resolution[0], signal.resolution[1], signal.values);
        ctx.source = signal.name;
        return ctx;
    }
    const double lo = signal.modality == Modality::series1d ? -50.0 : -1.0;
    const double hi = -lo;
    const auto rank = static_cast<Eigen::Index>(signal.resolution.size());

    ContextSet ctx;
    ctx.coords.resize(static_cast<Eigen::Index>(m), rank);
    for (std::size_t j = 0; j < m; ++j) {
        const std::vector<int> site = unravel(signal.resolution, j);
        for (Eigen::Index a = 0; a < rank; ++a) {
            ctx.coords(static_cast<Eigen::Index>(j), a) = lattice_coord(site[a], signal.resolution[a], lo, hi);
        }
    }
    ctx.values = signal.values;
    ctx.source = signal.name;
    ctx.modality = signal.modality;
    ctx.resolution = signal.resolution;
    return ctx;
}

ContextSet sphere_context(int lat_count, int lon_count, const Eigen::MatrixXd& values) {
    if (lat_count < 2 || lon_count < 1) {
        throw std::invalid_argument("sphere_context: need lat_count >= 2 and lon_count >= 1");
    }
    const Eigen::Index m = static_cast<Eigen::Index>(lat_count) * lon_count;
    if (values.rows() != m) {
        throw std::invalid_argument("sphere_context: values has " + std::to_string(values.rows()) + " rows, expected " +
                                    std::to_string(m));
    }
    ContextSet ctx;
    ctx.coords.resize(m, 3);
    for (int i = 0; i < lat_count; ++i) {
        const double lat = -std::numbers::pi / 2 + std::numbers::pi * i / (lat_count - 1);
        for (int j = 0; j < lon_count; ++j) {
            const double lon = 2.0 * std::numbers::pi * j / lon_count;
            const Eigen::Index row = static_cast<Eigen::Index>(i) * lon_count + j;
            ctx.coords(row, 0) = std::cos(lat) * std::cos(lon);
            ctx.coords(row, 1) = std::cos(lat) * std::sin(lon);
            ctx.coords(row, 2) = std::sin(lat);
        }
    }
    ctx.values = values;
    ctx.modality = Modality::sphere2d;
    ctx.resolution = {lat_count, lon_count};
    return ctx;
}

namespace {

std::vector<std::uint8_t> read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError(IoErrc::open_failed, "cannot open " + path.string());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// Netpbm header tokenizer: whitespace separated, '#' comments to end of line.
class PnmHeader {
public:
    PnmHeader(const std::vector<std::uint8_t>& bytes, const fs::path& path) : bytes_(bytes), path_(path) {}

    std::string token() {
        skip();
        std::string out;
        while (pos_ < bytes_.size() && !std::isspace(bytes_[pos_]) && bytes_[pos_] != '#') {
            out.push_back(static_cast<char>(bytes_[pos_++]));
        }
        if (out.empty()) throw IoError(IoErrc::malformed_header, path_.string() + ": header ends early");
        return out;
    }

    int number() {
        const std::string t = token();
        if (!std::all_of(t.begin(), t.end(), [](char c) { return c >= '0' && c <= '9'; }) || t.size() > 9) {
            throw IoError(IoErrc::malformed_header, path_.string() + ": bad header field '" + t + "'");
        }
        return std::stoi(t);
    }

    std::size_t payload_start() {
        // Exactly one whitespace byte separates maxval from the raster.
        if (pos_ >= bytes_.size() || !std::isspace(bytes_[pos_])) {
            throw IoError(IoErrc::malformed_header, path_.string() + ": missing separator before raster");
        }
        return pos_ + 1;
    }

private:
    void skip() {
        while (pos_ < bytes_.size()) {
            if (bytes_[pos_] == '#') {
                while (pos_ < bytes_.size() && bytes_[pos_] != '\n') ++pos_;
            } else if (std::isspace(bytes_[pos_])) {
                ++pos_;
            } else {
                break;
            }
        }
    }

    const std::vector<std::uint8_t>& bytes_;
    const fs::path& path_;
    std::size_t pos_ = 0;
};

std::uint32_t le32(const std::uint8_t* p) {
    return static_cast<std::uint32_t>(p[0]) | static_cast<std::uint32_t>(p[1]) << 8 |
           static_cast<std::uint32_t>(p[2]) << 16 | static_cast<std::uint32_t>(p[3]) << 24;
}

std::uint16_t le16(const std::uint8_t* p) {
    return static_cast<std::uint16_t>(p[0] | p[1] << 8);
}

void put_le32(std::ostream& out, std::uint32_t v) {
    const char b[4] = {static_cast<char>(v), static_cast<char>(v >> 8), static_cast<char>(v >> 16),
                       static_cast<char>(v >> 24)};
    out.write(b, 4);
}

void put_le16(std::ostream& out, std::uint16_t v) {
    const char b[2] = {static_cast<char>(v), static_cast<char>(v >> 8)};
    out.write(b, 2);
}

Signal normalized_series(std::string name, std::vector<double> raw) {
    if (raw.empty()) throw IoError(IoErrc::empty_signal, name + ": no samples");
    const auto [lo_it, hi_it] = std::minmax_element(raw.begin(), raw.end());
    const double lo = *lo_it;
    const double hi = *hi_it;
    Signal s;
    s.name = std::move(name);
    s.modality = Modality::series1d;
    s.resolution = {static_cast<int>(raw.size())};
    s.values.resize(static_cast<Eigen::Index>(raw.size()), 1);
    for (std::size_t i = 0; i < raw.size(); ++i) {
        s.values(static_cast<Eigen::Index>(i), 0) = hi > lo ? (raw[i] - lo) / (hi - lo) : 0.0;
    }
    s.value_range = {lo, hi};
    return s;
}

}  // namespace

Signal load_image(const fs::path& path) {
    const std::vector<std::uint8_t> bytes = read_file(path);
    PnmHeader header(bytes, path);
    const std::string magic = header.token();
    int channels = 0;
    if (magic == "P6") {
        channels = 3;
    } else if (magic == "P5") {
        channels = 1;
    } else {
        throw IoError(IoErrc::malformed_header, path.string() + ": expected P6 or P5 magic, found '" + magic + "'");
    }
    const int width = header.number();
    const int height = header.number();
    const int maxval = header.number();
    if (width <= 0 || height <= 0) throw IoError(IoErrc::empty_signal, path.string() + ": zero-sized image");
    if (maxval != 255) {
        throw IoError(IoErrc::unsupported_bit_depth,
                      path.string() + ": maxval " + std::to_string(maxval) + " (only 8-bit, maxval 255)");
    }
    const std::size_t start = header.payload_start();
    const std::size_t need = static_cast<std::size_t>(width) * static_cast<std::size_t>(height) * channels;
    if (bytes.size() < start + need) {
        throw IoError(IoErrc::truncated_payload, path.string() + ": raster has " + std::to_string(bytes.size() - start) +
                                                     " of " + std::to_string(need) + " bytes");
    }
    Signal s;
    s.name = path.filename().string();
    s.modality = Modality::image2d;
    s.resolution = {height, width};
    s.values.resize(static_cast<Eigen::Index>(width) * height, channels);
    for (Eigen::Index i = 0; i < s.values.rows(); ++i) {
        for (int c = 0; c < channels; ++c) s.values(i, c) = bytes[start + i * channels + c] / 255.0;
    }
    s.value_range = {0.0, 255.0};
    return s;
}

Signal load_series(const fs::path& path) {
    const std::string ext = path.extension().string();
    if (ext == ".f32") {
        fs::path sidecar = path;
        sidecar += ".len";
        std::ifstream len_in(sidecar);
        if (!len_in) throw IoError(IoErrc::open_failed, "cannot open length sidecar " + sidecar.string());
        long long count = -1;
        if (!(len_in >> count) || count < 0) {
            throw IoError(IoErrc::malformed_header, sidecar.string() + ": expected a sample count");
        }
        const std::vector<std::uint8_t> bytes = read_file(path);
        if (bytes.size() < static_cast<std::size_t>(count) * 4) {
            throw IoError(IoErrc::truncated_payload, path.string() + ": " + std::to_string(bytes.size()) +
                                                         " bytes for " + std::to_string(count) + " float32 samples");
        }
        std::vector<double> raw(static_cast<std::size_t>(count));
        for (std::size_t i = 0; i < raw.size(); ++i) {
            raw[i] = static_cast<double>(std::bit_cast<float>(le32(bytes.data() + 4 * i)));
            if (!std::isfinite(raw[i])) {
                throw IoError(IoErrc::unsupported_format, path.string() + ": non-finite sample at " + std::to_string(i));
            }
        }
        return normalized_series(path.filename().string(), std::move(raw));
    }
    if (ext != ".wav") throw IoError(IoErrc::unsupported_format, path.string() + ": expected .wav or .f32");

    const std::vector<std::uint8_t> bytes = read_file(path);
    if (bytes.size() < 12 || std::string(bytes.begin(), bytes.begin() + 4) != "RIFF" ||
        std::string(bytes.begin() + 8, bytes.begin() + 12) != "WAVE") {
        throw IoError(IoErrc::malformed_header, path.string() + ": not a RIFF/WAVE file");
    }
    bool have_fmt = false;
    int channels = 0;
    int bits = 0;
    int format = 0;
    std::size_t pos = 12;
    while (pos + 8 <= bytes.size()) {
        const std::string id(bytes.begin() + static_cast<long>(pos), bytes.begin() + static_cast<long>(pos) + 4);
        const std::size_t chunk = le32(bytes.data() + pos + 4);
        const std::size_t body = pos + 8;
        if (id == "fmt ") {
            if (chunk < 16 || body + 16 > bytes.size()) {
                throw IoError(IoErrc::malformed_header, path.string() + ": short fmt chunk");
            }
            format = le16(bytes.data() + body);
            channels = le16(bytes.data() + body + 2);
            bits = le16(bytes.data() + body + 14);
            have_fmt = true;
        } else if (id == "data") {
            if (!have_fmt) throw IoError(IoErrc::malformed_header, path.string() + ": data chunk before fmt");
            if (format != 1) {
                throw IoError(IoErrc::unsupported_format,
                              path.string() + ": audio format " + std::to_string(format) + " (PCM only)");
            }
            if (bits != 16) {
                throw IoError(IoErrc::unsupported_bit_depth,
                              path.string() + ": " + std::to_string(bits) + "-bit samples (16-bit only)");
            }
            if (channels != 1) {
                throw IoError(IoErrc::unsupported_format,
                              path.string() + ": " + std::to_string(channels) + " channels (mono only)");
            }
            if (body + chunk > bytes.size()) {
                throw IoError(IoErrc::truncated_payload, path.string() + ": data chunk declares " +
                                                             std::to_string(chunk) + " bytes, file holds " +
                                                             std::to_string(bytes.size() - body));
            }
            const std::size_t count = chunk / 2;
            if (count == 0) throw IoError(IoErrc::empty_signal, path.string() + ": no samples");
            Signal s;
            s.name = path.filename().string();
            s.modality = Modality::series1d;
            s.resolution = {static_cast<int>(count)};
            s.values.resize(static_cast<Eigen::Index>(count), 1);
            for (std::size_t i = 0; i < count; ++i) {
                const auto v = static_cast<std::int16_t>(le16(bytes.data() + body + 2 * i));
                s.values(static_cast<Eigen::Index>(i), 0) = (static_cast<double>(v) + 32768.0) / 65535.0;
            }
            s.value_range = {-32768.0, 32767.0};
            return s;
        }
        pos = body + chunk + (chunk & 1);
    }
    throw IoError(have_fmt ? IoErrc::truncated_payload : IoErrc::malformed_header,
                  path.string() + ": no data chunk");
}

Signal load_signal(const fs::path& path) {
    const std::string ext = path.extension().string();
    if (ext == ".ppm" || ext == ".pgm") return load_image(path);
    if (ext == ".wav" || ext == ".f32") return load_series(path);
    throw IoError(IoErrc::unsupported_format, path.string() + ": unknown signal extension '" + ext + "'");
}

void write_ppm(const fs::path& path, int width, int height, std::span<const std::uint8_t> rgb) {
    if (rgb.size() != static_cast<std::size_t>(width) * height * 3) {
        throw std::invalid_argument("write_ppm: raster size does not match dimensions");
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError(IoErrc::open_failed, "cannot write " + path.string());
    out << "P6\n" << width << ' ' << height << "\n255\n";
    out.write(reinterpret_cast<const char*>(rgb.data()), static_cast<std::streamsize>(rgb.size()));
}

void write_image(const fs::path& path, const Signal& signal) {
    if (signal.resolution.size() != 2 || (signal.channels() != 1 && signal.channels() != 3)) {
        throw std::invalid_argument("write_image: needs a 2-D signal with 1 or 3 channels");
    }
    const int height = signal.resolution[0];
    const int width = signal.resolution[1];
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError(IoErrc::open_failed, "cannot write " + path.string());
    out << (signal.channels() == 3 ? "P6\n" : "P5\n") << width << ' ' << height << "\n255\n";
    std::vector<char> raster;
    raster.reserve(static_cast<std::size_t>(signal.values.size()));
    for (Eigen::Index i = 0; i < signal.values.rows(); ++i) {
        for (Eigen::Index c = 0; c < signal.channels(); ++c) {
            const double v = std::clamp(signal.values(i, c), 0.0, 1.0);
            raster.push_back(static_cast<char>(static_cast<std::uint8_t>(std::lround(v * 255.0))));
        }
    }
    out.write(raster.data(), static_cast<std::streamsize>(raster.size()));
}

void write_wav(const fs::path& path, std::span<const std::int16_t> samples, int sample_rate) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError(IoErrc::open_failed, "cannot write " + path.string());
    const auto data_bytes = static_cast<std::uint32_t>(samples.size() * 2);
    out.write("RIFF", 4);
    put_le32(out, 36 + data_bytes);
    out.write("WAVEfmt ", 8);
    put_le32(out, 16);
    put_le16(out, 1);
    put_le16(out, 1);
    put_le32(out, static_cast<std::uint32_t>(sample_rate));
    put_le32(out, static_cast<std::uint32_t>(sample_rate) * 2);
    put_le16(out, 2);
    put_le16(out, 16);
    out.write("data", 4);
    put_le32(out, data_bytes);
    for (const std::int16_t s : samples) put_le16(out, static_cast<std::uint16_t>(s));
}

SynthKind parse_synth_kind(std::string_view text) {
    if (text == "sinmix") return SynthKind::sinmix;
    if (text == "shapes") return SynthKind::shapes;
    throw std::invalid_argument("unknown synthetic kind '" + std::string(text) + "' (expected sinmix or shapes)");
}

std::string_view to_string(SynthKind kind) { return kind == SynthKind::sinmix ? "sinmix" : "shapes"; }

namespace {

void normalize_column(Eigen::Ref<Eigen::VectorXd> col) {
    const double lo = col.minCoeff();
    const double hi = col.maxCoeff();
    if (hi > lo) {
        col = (col.array() - lo) / (hi - lo);
    } else {
        col.setZero();
    }
}

Eigen::VectorXd sinmix_channel(std::mt19937_64& rng, std::span<const int> resolution) {
    const std::size_t m = site_count(resolution);
    const int min_axis = *std::min_element(resolution.begin(), resolution.end());
    const int kmax = std::max(1, min_axis / 4);
    std::uniform_int_distribution<int> freq(-kmax, kmax);
    std::uniform_real_distribution<double> phase(0.0, 2.0 * std::numbers::pi);
    constexpr int components = 24;

    Eigen::VectorXd out = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(m));
    for (int c = 0; c < components; ++c) {
        std::vector<int> k(resolution.size());
        double norm = 0.0;
        for (auto& ki : k) {
            ki = freq(rng);
            norm += static_cast<double>(ki) * ki;
        }
        const double amplitude = 1.0 / (1.0 + std::sqrt(norm));
        const double offset = phase(rng);
        for (std::size_t j = 0; j < m; ++j) {
            const std::vector<int> site = unravel(resolution, j);
            double arg = offset;
            for (std::size_t a = 0; a < site.size(); ++a) {
                arg += 2.0 * std::numbers::pi * k[a] * site[a] / static_cast<double>(resolution[a]);
            }
            out(static_cast<Eigen::Index>(j)) += amplitude * std::cos(arg);
        }
    }
    normalize_column(out);
    return out;
}

Eigen::VectorXd shapes_channel(std::mt19937_64& rng, std::span<const int> resolution) {
    const int height = resolution[0];
    const int width = resolution[1];
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::uniform_real_distribution<double> phase(0.0, 2.0 * std::numbers::pi);
    std::uniform_int_distribution<int> low_freq(-2, 2);

    const int ky = low_freq(rng);
    const int kx = low_freq(rng);
    const double p0 = phase(rng);
    const double base = unit(rng);

    Eigen::VectorXd out(static_cast<Eigen::Index>(height) * width);
    for (int r = 0; r < height; ++r) {
        for (int c = 0; c < width; ++c) {
            const double u = static_cast<double>(r) / height;
            const double v = static_cast<double>(c) / width;
            out(r * width + c) = 0.5 * base + 0.25 * (1.0 + std::cos(2.0 * std::numbers::pi * (ky * u + kx * v) + p0));
        }
    }
    constexpr int objects = 6;
    for (int o = 0; o < objects; ++o) {
        const bool disc = unit(rng) < 0.5;
        const double cy = unit(rng);
        const double cx = unit(rng);
        const double size_y = 0.08 + 0.22 * unit(rng);
        const double size_x = 0.08 + 0.22 * unit(rng);
        const double intensity = unit(rng);
        for (int r = 0; r < height; ++r) {
            for (int c = 0; c < width; ++c) {
                const double dy = (static_cast<double>(r) + 0.5) / height - cy;
                const double dx = (static_cast<double>(c) + 0.5) / width - cx;
                const bool inside = disc ? dy * dy + dx * dx <= size_y * size_y
                                         : std::abs(dy) <= size_y && std::abs(dx) <= size_x;
                if (inside) out(r * width + c) = intensity;
            }
        }
    }
    normalize_column(out);
    return out;
}

}  // namespace

Signal synth(SynthKind kind, std::uint64_t seed, std::span<const int> resolution, int channels) {
    if (resolution.empty() || resolution.size() > 3) {
        throw std::invalid_argument("synth: resolution must have 1 to 3 axes");
    }
    if (channels < 1) throw std::invalid_argument("synth: channels must be positive");
    for (const int n : resolution) {
        if (n < 1) throw IoError(IoErrc::empty_signal, "synth: zero-sized axis");
    }
    if (kind == SynthKind::shapes && resolution.size() != 2) {
        throw std::invalid_argument("synth: 'shapes' needs a 2-D resolution");
    }
    std::mt19937_64 rng(seed);
    Signal s;
    s.name = "synth_" + std::string(to_string(kind));
    s.modality = resolution.size() == 1 ? Modality::series1d
                 : resolution.size() == 2 ? Modality::image2d
                                          : Modality::grid3d;
    s.resolution.assign(resolution.begin(), resolution.end());
    s.values.resize(static_cast<Eigen::Index>(site_count(resolution)), channels);
    for (int c = 0; c < channels; ++c) {
        s.values.col(c) = kind == SynthKind::sinmix ? sinmix_channel(rng, resolution) : shapes_channel(rng, resolution);
    }
    return s;
}

namespace {

bool is_signal_file(const fs::path& p) {
    const std::string ext = p.extension().string();
    return ext == ".ppm" || ext == ".pgm" || ext == ".wav" || ext == ".f32";
}

}  // namespace

void write_split(const fs::path& dir, double test_fraction) {
    if (!(test_fraction >= 0.0 && test_fraction < 1.0)) {
        throw std::invalid_argument("write_split: test_fraction must lie in [0, 1)");
    }
    std::vector<std::string> names;
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (entry.is_regular_file() && is_signal_file(entry.path())) names.push_back(entry.path().filename().string());
    }
    if (names.empty()) throw IoError(IoErrc::empty_signal, dir.string() + ": no signal files");
    std::sort(names.begin(), names.end());
    const auto n = names.size();
    const auto test = static_cast<std::size_t>(std::ceil(test_fraction * static_cast<double>(n)));
    std::ofstream out(dir / "split.txt", std::ios::trunc);
    if (!out) throw IoError(IoErrc::open_failed, "cannot write " + (dir / "split.txt").string());
    for (std::size_t i = 0; i < n; ++i) out << (i + test >= n ? "test " : "train ") << names[i] << '\n';
}

Dataset load_dataset(const fs::path& dir) {
    std::ifstream in(dir / "split.txt");
    if (!in) throw IoError(IoErrc::open_failed, "cannot open " + (dir / "split.txt").string());
    Dataset ds;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line[0] == '#') continue;
        std::istringstream fields(line);
        std::string which;
        std::string file;
        if (!(fields >> which >> file) || (which != "train" && which != "test")) {
            throw IoError(IoErrc::malformed_header,
                          (dir / "split.txt").string() + ":" + std::to_string(line_no) + ": expected 'train|test <file>'");
        }
        (which == "train" ? ds.train : ds.test).push_back(load_signal(dir / file));
    }
    if (ds.train.empty() && ds.test.empty()) throw IoError(IoErrc::empty_signal, dir.string() + ": empty split");
    return ds;
}

void save_dataset(const fs::path& dir, const Dataset& dataset) {
    fs::create_directories(dir);
    std::ofstream split(dir / "split.txt", std::ios::trunc);
    if (!split) throw IoError(IoErrc::open_failed, "cannot write " + (dir / "split.txt").string());
    auto emit = [&](const std::vector<Signal>& signals, std::string_view which) {
        for (const Signal& s : signals) {
            const std::string file = s.name + (s.channels() == 3 ? ".ppm" : ".pgm");
            write_image(dir / file, s);
            split << which << ' ' << file << '\n';
        }
    };
    emit(dataset.train, "train");
    emit(dataset.test, "test");
}

Dataset synth_dataset(SynthKind kind, int count, std::span<const int> resolution, int channels, double test_fraction,
                      std::uint64_t seed) {
    if (count < 1) throw std::invalid_argument("synth_dataset: count must be positive");
    if (!(test_fraction >= 0.0 && test_fraction < 1.0)) {
        throw std::invalid_argument("synth_dataset: test_fraction must lie in [0, 1)");
    }
    const auto n = static_cast<std::size_t>(count);
    const auto test = static_cast<std::size_t>(std::ceil(test_fraction * static_cast<double>(n)));
    Dataset ds;
    for (std::size_t i = 0; i < n; ++i) {
        Signal s = synth(kind, split_seed(seed, Stream::corpus, i), resolution, channels);
        char name[32];
        std::snprintf(name, sizeof name, "synth_%05zu", i);
        s.name = name;
        (i + test >= n ? ds.test : ds.train).push_back(std::move(s));
    }
    return ds;
}

}  // namespace fieldmeta::signals
