#include "fieldmeta/eval.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace fieldmeta::eval {

namespace fs = std::filesystem;

double psnr_from_mse(double mse) {
    if (mse == 0.0) return std::numeric_limits<double>::infinity();
    return 10.0 * std::log10(1.0 / mse);
}

Metrics psnr(const Eigen::MatrixXd& pred, const Eigen::MatrixXd& truth) {
    if (pred.rows() != truth.rows() || pred.cols() != truth.cols()) {
        throw std::invalid_argument("psnr: prediction is " + std::to_string(pred.rows()) + "x" +
                                    std::to_string(pred.cols()) + ", truth is " + std::to_string(truth.rows()) + "x" +
                                    std::to_string(truth.cols()));
    }
    if (truth.size() == 0) throw std::invalid_argument("psnr: empty arrays");
    Metrics m;
    m.mse = (pred - truth).squaredNorm() / static_cast<double>(truth.size());
    m.psnr_db = psnr_from_mse(m.mse);
    return m;
}

std::string format_metric(double value) {
    if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
    if (std::isnan(value)) return "nan";
    std::ostringstream out;
    out.precision(17);
    out << value;
    return out.str();
}

namespace {

std::vector<double> average_ranks(std::span<const double> v) {
    std::vector<std::size_t> order(v.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
    std::vector<double> ranks(v.size());
    std::size_t i = 0;
    while (i < order.size()) {
        std::size_t j = i + 1;
        while (j < order.size() && v[order[j]] == v[order[i]]) ++j;
        const double rank = 0.5 * static_cast<double>(i + j - 1);
        for (std::size_t k = i; k < j; ++k) ranks[order[k]] = rank;
        i = j;
    }
    return ranks;
}

}  // namespace

double spearman(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw std::invalid_argument("spearman: length mismatch");
    if (a.size() < 2) return std::numeric_limits<double>::quiet_NaN();
    const auto ra = average_ranks(a);
    const auto rb = average_ranks(b);
    const double n = static_cast<double>(a.size());
    const double ma = std::accumulate(ra.begin(), ra.end(), 0.0) / n;
    const double mb = std::accumulate(rb.begin(), rb.end(), 0.0) / n;
    double cov = 0.0;
    double va = 0.0;
    double vb = 0.0;
    for (std::size_t i = 0; i < ra.size(); ++i) {
        cov += (ra[i] - ma) * (rb[i] - mb);
        va += (ra[i] - ma) * (ra[i] - ma);
        vb += (rb[i] - mb) * (rb[i] - mb);
    }
    if (va == 0.0 || vb == 0.0) return std::numeric_limits<double>::quiet_NaN();
    return cov / std::sqrt(va * vb);
}

double overlap_fraction(std::span<const std::uint32_t> a, std::span<const std::uint32_t> b) {
    if (a.empty()) return 0.0;
    std::vector<std::uint32_t> common;
    std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(common));
    return static_cast<double>(common.size()) / static_cast<double>(a.size());
}

namespace {

std::pair<int, int> image_dims(std::span<const int> resolution, Eigen::Index rows) {
    if (resolution.size() != 2) throw std::invalid_argument("rendering needs a 2-D lattice");
    if (static_cast<Eigen::Index>(resolution[0]) * resolution[1] != rows) {
        throw std::invalid_argument("rendering: resolution does not match the number of sites");
    }
    return {resolution[0], resolution[1]};
}

std::uint8_t to_byte(double v) {
    return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
}

}  // namespace

void render_mask(const signals::ContextSet& ctx, std::span<const std::uint32_t> selected, const fs::path& path) {
    const auto [height, width] = image_dims(ctx.resolution, ctx.size());
    std::vector<std::uint8_t> rgb(static_cast<std::size_t>(height) * width * 3);
    for (Eigen::Index j = 0; j < ctx.size(); ++j) {
        const std::uint8_t g = to_byte(ctx.values.row(j).mean());
        rgb[3 * j] = rgb[3 * j + 1] = rgb[3 * j + 2] = g;
    }
    for (const std::uint32_t j : selected) {
        if (j >= static_cast<std::uint32_t>(ctx.size())) throw std::out_of_range("render_mask: index out of range");
        rgb[3 * j] = 255;
        rgb[3 * j + 1] = 0;
        rgb[3 * j + 2] = 0;
    }
    signals::write_ppm(path, width, height, rgb);
}

std::vector<std::uint32_t> decode_mask(const fs::path& path) {
    const signals::Signal img = signals::load_image(path);
    if (img.channels() != 3) throw std::invalid_argument("decode_mask: expected an RGB image");
    std::vector<std::uint32_t> out;
    for (Eigen::Index j = 0; j < img.values.rows(); ++j) {
        if (img.values(j, 0) == 1.0 && img.values(j, 1) == 0.0 && img.values(j, 2) == 0.0) {
            out.push_back(static_cast<std::uint32_t>(j));
        }
    }
    return out;
}

double render_residual(const Eigen::MatrixXd& pred, const Eigen::MatrixXd& truth, std::span<const int> resolution,
                       const fs::path& path) {
    if (pred.rows() != truth.rows() || pred.cols() != truth.cols()) {
        throw std::invalid_argument("render_residual: shape mismatch");
    }
    const auto [height, width] = image_dims(resolution, truth.rows());
    const Eigen::VectorXd residual = (pred - truth).cwiseAbs().rowwise().mean();
    const double peak = residual.size() ? residual.maxCoeff() : 0.0;
    std::vector<std::uint8_t> rgb(static_cast<std::size_t>(height) * width * 3);
    for (Eigen::Index j = 0; j < residual.size(); ++j) {
        const std::uint8_t v = peak > 0.0 ? to_byte(residual(j) / peak) : 0;
        rgb[3 * j] = rgb[3 * j + 1] = rgb[3 * j + 2] = v;
    }
    signals::write_ppm(path, width, height, rgb);
    return peak;
}

void render_prediction(const Eigen::MatrixXd& pred, std::span<const int> resolution, const fs::path& path) {
    const auto [height, width] = image_dims(resolution, pred.rows());
    std::vector<std::uint8_t> rgb(static_cast<std::size_t>(height) * width * 3);
    for (Eigen::Index j = 0; j < pred.rows(); ++j) {
        for (int c = 0; c < 3; ++c) {
            rgb[3 * j + c] = to_byte(pred.cols() == 3 ? pred(j, c) : pred.row(j).mean());
        }
    }
    signals::write_ppm(path, width, height, rgb);
}

}  // namespace fieldmeta::eval
