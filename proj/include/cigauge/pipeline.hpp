#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <utility>
#include <vector>

#include "cigauge/estimator.hpp"
#include "cigauge/gmm_prior.hpp"
#include "cigauge/linalg.hpp"
#include "cigauge/multiplexing.hpp"
#include "cigauge/radiometry.hpp"
#include "cigauge/rng.hpp"

namespace cigauge {

/// Grayscale image in photo-electrons, row-major.
///
/// `scale` is electrons per stored PGM count, so display white is
/// peak() = scale · maxval. Pixel values are non-negative.
class Image {
 public:
  Image(std::size_t width, std::size_t height, std::vector<double> data, double scale = 1.0,
        std::uint32_t maxval = 255);

  std::size_t width() const noexcept { return width_; }
  std::size_t height() const noexcept { return height_; }
  std::span<const double> data() const noexcept { return data_; }
  double at(std::size_t row, std::size_t col) const { return data_[row * width_ + col]; }

  double scale() const noexcept { return scale_; }
  std::uint32_t maxval() const noexcept { return maxval_; }
  int bit_depth() const noexcept { return maxval_ < 256 ? 8 : 16; }
  double peak() const noexcept { return scale_ * static_cast<double>(maxval_); }
  double mean() const;

 private:
  std::size_t width_;
  std::size_t height_;
  std::vector<double> data_;
  double scale_;
  std::uint32_t maxval_;
};

// Reads a P2/P5 PGM (8- or 16-bit) and scales it linearly so that its mean
// equals mean_target_e.
Image load_image(const std::filesystem::path& path, double mean_target_e);

// Writes binary PGM, mapping electrons back to counts with the image scale.
void save_image(const Image& img, const std::filesystem::path& path);

struct PatchPlan {
  std::size_t image_width = 0;
  std::size_t image_height = 0;
  PatchGeometry patch;
  std::size_t stride = 0;
  std::vector<std::pair<std::size_t, std::size_t>> origins;  // (row, col), row-major order

  std::size_t count() const noexcept { return origins.size(); }
};

// Origins on a `stride` grid, with a final row/column flush against the far
// edge when the stride does not divide the free space, so every pixel is
// covered.
PatchPlan make_patch_plan(std::size_t image_width, std::size_t image_height,
                          const PatchGeometry& patch, std::size_t stride);

// One row-major vectorized patch per column, in plan order.
Matrix extract_patches(const Image& img, const PatchPlan& plan);

// y = H x + n with n ~ N(0, σ² I).
Vector simulate_capture(const Vector& patch, const MultiplexSystem& sys, const NoiseSpec& noise,
                        Rng& rng);

// Uniform average of overlapping patches. Negative estimates clamp to zero.
Image reconstruct_image(const Matrix& patches, const PatchPlan& plan, double scale = 1.0,
                        std::uint32_t maxval = 255);

// Per-pixel coverage counts of a plan (row-major).
std::vector<std::size_t> coverage(const PatchPlan& plan);

struct ImageMetrics {
  double mse = 0.0;      // in units of the truth's display white
  double psnr_db = 0.0;  // +inf when mse == 0
};

ImageMetrics image_metrics(const Image& truth, const Image& estimate);

struct SimulationResult {
  Image reconstruction;
  Image raw;  // capture divided by C(H), averaged over overlaps
  ImageMetrics reconstruction_metrics;
  ImageMetrics raw_metrics;
};

// Captures every patch of `truth` through `sys` with independent noise
// (patch i uses substream(seed, i)) and reconstructs with the MMSE
// estimator. The prior must already be at the image's signal level.
SimulationResult simulate_and_reconstruct(const Image& truth, const PatchPlan& plan,
                                          const GmmPrior& prior, const MultiplexSystem& sys,
                                          const NoiseSpec& noise, std::uint64_t seed);

}  // namespace cigauge
