#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "cigauge/linalg.hpp"

namespace cigauge {

// Row-major lexicographic patch layout: pixel (r, c) sits at r·width + c.
struct PatchGeometry {
  std::size_t width = 0;
  std::size_t height = 0;
  std::size_t n() const noexcept { return width * height; }
};

enum class KernelKind { kOneD, kTwoD, kLightField };

struct KernelMeta {
  KernelKind kind = KernelKind::kOneD;
  Matrix values;              // 1×L for 1-D kernels, rows×cols otherwise
  std::size_t patch_width = 0;
  std::size_t patch_height = 0;
  std::size_t tile = 0;       // light-field angular tile side
};

/// Square multiplexing matrix H together with its light throughput C(H),
/// the average row sum in multiples of the impulse camera's exposure.
class MultiplexSystem {
 public:
  MultiplexSystem(Matrix h, std::string label, std::optional<KernelMeta> meta = std::nullopt);

  const Matrix& h() const noexcept { return h_; }
  std::size_t n() const noexcept { return static_cast<std::size_t>(h_.rows()); }
  double throughput() const noexcept { return throughput_; }
  const std::string& label() const noexcept { return label_; }
  const std::optional<KernelMeta>& kernel_meta() const noexcept { return meta_; }

 private:
  Matrix h_;
  double throughput_ = 0.0;
  std::string label_;
  std::optional<KernelMeta> meta_;
};

inline double throughput(const MultiplexSystem& sys) { return sys.throughput(); }

MultiplexSystem impulse(std::size_t n);
MultiplexSystem scaled_identity(std::size_t n, double scale);

// Circulant n×n system whose rows carry `kernel`, centred on the diagonal:
// y_i = Σ_j kernel_j · x_{(i + j − c) mod n} with c = (L − 1) / 2.
MultiplexSystem from_kernel_1d(std::size_t n, std::span<const double> kernel);

// Length-`len` box exposure (motion blur over len impulse exposures).
MultiplexSystem box_exposure(std::size_t n, std::size_t len);

// Block-circulant system for 2-D circular blur of a row-major patch:
// y(r, c) = Σ_{a,b} k(a, b) · x((r + a − ca) mod H, (c + b − cb) mod W).
MultiplexSystem from_kernel_2d(const PatchGeometry& geom, const Matrix& kernel);

// Binary d×d aperture: pixels whose centres lie within distance d/2 of the
// grid centre. Entries are 1; the light gathered shows up as throughput.
Matrix disc_psf(std::size_t diameter);

// Modified uniformly redundant array tile for prime p.
Matrix mura_tile(std::size_t p);

// Mask-based light-field camera. The signal is a sequence of macro-pixels,
// each holding a·a angular samples (row-major); sensor pixel (du, dv) of a
// macro-pixel sees the angular samples through the tile cyclically shifted
// by (du, dv). A single-pinhole tile at (0, 0) gives the identity. `n` must
// be a multiple of a·a (default: one macro-pixel).
MultiplexSystem lightfield_system(const Matrix& tile, std::size_t n = 0);

// "0110..." flutter-shutter chop sequence as a 1-D kernel.
std::vector<double> parse_flutter_code(std::string_view code);

// Kernel text file: "rows cols" then row-major nonnegative reals.
Matrix load_kernel_file(const std::filesystem::path& path);

}  // namespace cigauge
