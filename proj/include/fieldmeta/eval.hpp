#pragma once

// Reconstruction metrics, rank statistics and curriculum images.

#include "fieldmeta/signals.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace fieldmeta::eval {

struct Metrics {
    double mse = 0.0;
    double psnr_db = 0.0;  // +inf when mse == 0
};

/// MSE over all M*D entries and PSNR with peak value 1.
Metrics psnr(const Eigen::MatrixXd& pred, const Eigen::MatrixXd& truth);
double psnr_from_mse(double mse);

/// "inf" for an infinite PSNR, otherwise a round-trippable decimal.
std::string format_metric(double value);

/// Spearman rank correlation with average ranks for ties. Returns NaN when
/// either input is constant.
double spearman(std::span<const double> a, std::span<const double> b);

/// |a ∩ b| / |a| for two sorted index lists of equal size.
double overlap_fraction(std::span<const std::uint32_t> a, std::span<const std::uint32_t> b);

/// Writes the grayscale signal (channel mean) with `selected` sites painted
/// pure red (255, 0, 0). Needs a 2-D lattice.
void render_mask(const signals::ContextSet& ctx, std::span<const std::uint32_t> selected,
                 const std::filesystem::path& path);

/// Indices of the pure-red pixels of a mask image, ascending.
std::vector<std::uint32_t> decode_mask(const std::filesystem::path& path);

/// Writes |pred - truth| (channel mean) linearly mapped so the largest
/// residual becomes 255. Returns that largest residual.
double render_residual(const Eigen::MatrixXd& pred, const Eigen::MatrixXd& truth, std::span<const int> resolution,
                       const std::filesystem::path& path);

/// Writes a prediction clamped to [0, 1] as an 8-bit image.
void render_prediction(const Eigen::MatrixXd& pred, std::span<const int> resolution,
                       const std::filesystem::path& path);

}  // namespace fieldmeta::eval
