#include "cigauge/multiplexing.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "cigauge/errors.hpp"

namespace cigauge {
namespace {

bool is_prime(std::size_t p) {
  if (p < 2) return false;
  for (std::size_t d = 2; d * d <= p; ++d)
    if (p % d == 0) return false;
  return true;
}

void require_nonnegative(const Matrix& k, const char* what) {
  if (k.size() == 0) throw InvalidArgument(std::string(what) + " is empty");
  if (!k.allFinite() || (k.array() < 0.0).any())
    throw InvalidArgument(std::string(what) + " must be finite and nonnegative");
  if (!(k.sum() > 0.0)) throw InvalidArgument(std::string(what) + " is all zero");
}

}  // namespace

MultiplexSystem::MultiplexSystem(Matrix h, std::string label, std::optional<KernelMeta> meta)
    : h_(std::move(h)), label_(std::move(label)), meta_(std::move(meta)) {
  if (h_.rows() == 0 || h_.rows() != h_.cols())
    throw InvalidArgument("multiplexing matrix must be square and non-empty");
  if (!h_.allFinite()) throw InvalidArgument("multiplexing matrix has non-finite entries");
  throughput_ = h_.rowwise().sum().mean();
}

MultiplexSystem impulse(std::size_t n) {
  if (n < 1) throw InvalidArgument("impulse: n must be at least 1");
  const auto s = static_cast<Eigen::Index>(n);
  return MultiplexSystem(Matrix::Identity(s, s), "impulse");
}

MultiplexSystem scaled_identity(std::size_t n, double scale) {
  if (n < 1) throw InvalidArgument("scaled_identity: n must be at least 1");
  if (!(scale > 0.0) || !std::isfinite(scale))
    throw InvalidArgument("scaled_identity: scale must be positive");
  const auto s = static_cast<Eigen::Index>(n);
  std::ostringstream label;
  label << "scaled-id:" << scale;
  return MultiplexSystem(scale * Matrix::Identity(s, s), label.str());
}

MultiplexSystem from_kernel_1d(std::size_t n, std::span<const double> kernel) {
  if (n < 1) throw InvalidArgument("from_kernel_1d: n must be at least 1");
  if (kernel.size() > n)
    throw InvalidArgument("from_kernel_1d: kernel longer than the signal (" +
                          std::to_string(kernel.size()) + " > " + std::to_string(n) + ")");
  Matrix k(1, static_cast<Eigen::Index>(kernel.size()));
  for (std::size_t j = 0; j < kernel.size(); ++j) k(0, static_cast<Eigen::Index>(j)) = kernel[j];
  require_nonnegative(k, "1-D kernel");

  const auto s = static_cast<Eigen::Index>(n);
  const std::size_t centre = (kernel.size() - 1) / 2;
  Matrix h = Matrix::Zero(s, s);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < kernel.size(); ++j) {
      const std::size_t col = (i + j + n - centre) % n;
      h(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(col)) += kernel[j];
    }

  KernelMeta meta;
  meta.kind = KernelKind::kOneD;
  meta.values = std::move(k);
  return MultiplexSystem(std::move(h), "kernel1d", std::move(meta));
}

MultiplexSystem box_exposure(std::size_t n, std::size_t len) {
  if (len < 1 || len > n)
    throw InvalidArgument("box_exposure: len must lie in [1, n], got " + std::to_string(len));
  const std::vector<double> ones(len, 1.0);
  auto sys = from_kernel_1d(n, ones);
  return MultiplexSystem(sys.h(), "box:" + std::to_string(len), sys.kernel_meta());
}

MultiplexSystem from_kernel_2d(const PatchGeometry& geom, const Matrix& kernel) {
  if (geom.width == 0 || geom.height == 0)
    throw InvalidArgument("from_kernel_2d: patch geometry must be non-empty");
  const auto kh = static_cast<std::size_t>(kernel.rows());
  const auto kw = static_cast<std::size_t>(kernel.cols());
  if (kh > geom.height || kw > geom.width)
    throw InvalidArgument("from_kernel_2d: kernel " + std::to_string(kh) + "x" +
                          std::to_string(kw) + " larger than patch " +
                          std::to_string(geom.height) + "x" + std::to_string(geom.width));
  require_nonnegative(kernel, "2-D kernel");

  const std::size_t n = geom.n();
  const std::size_t ca = (kh - 1) / 2;
  const std::size_t cb = (kw - 1) / 2;
  Matrix h = Matrix::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  for (std::size_t r = 0; r < geom.height; ++r)
    for (std::size_t c = 0; c < geom.width; ++c) {
      const auto row = static_cast<Eigen::Index>(r * geom.width + c);
      for (std::size_t a = 0; a < kh; ++a)
        for (std::size_t b = 0; b < kw; ++b) {
          const std::size_t rr = (r + a + geom.height - ca) % geom.height;
          const std::size_t cc = (c + b + geom.width - cb) % geom.width;
          h(row, static_cast<Eigen::Index>(rr * geom.width + cc)) +=
              kernel(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b));
        }
    }

  KernelMeta meta;
  meta.kind = KernelKind::kTwoD;
  meta.values = kernel;
  meta.patch_width = geom.width;
  meta.patch_height = geom.height;
  return MultiplexSystem(std::move(h), "kernel2d", std::move(meta));
}

Matrix disc_psf(std::size_t diameter) {
  if (diameter < 1) throw InvalidArgument("disc_psf: diameter must be at least 1");
  const auto d = static_cast<long long>(diameter);
  const auto s = static_cast<Eigen::Index>(diameter);
  Matrix k = Matrix::Zero(s, s);
  // Twice the centre offsets keeps the inside test in exact integers.
  for (long long i = 0; i < d; ++i)
    for (long long j = 0; j < d; ++j) {
      const long long di = 2 * i + 1 - d;
      const long long dj = 2 * j + 1 - d;
      if (di * di + dj * dj <= d * d) k(i, j) = 1.0;
    }
  return k;
}

Matrix mura_tile(std::size_t p) {
  if (!is_prime(p)) throw InvalidArgument("mura_tile: p must be prime, got " + std::to_string(p));
  std::vector<bool> residue(p, false);
  for (std::size_t x = 1; x < p; ++x) residue[(x * x) % p] = true;

  const auto s = static_cast<Eigen::Index>(p);
  Matrix a = Matrix::Zero(s, s);
  for (std::size_t i = 1; i < p; ++i) {
    a(static_cast<Eigen::Index>(i), 0) = 1.0;
    for (std::size_t j = 1; j < p; ++j)
      if (residue[i] == residue[j]) a(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = 1.0;
  }
  return a;
}

MultiplexSystem lightfield_system(const Matrix& tile, std::size_t n) {
  if (tile.rows() == 0 || tile.rows() != tile.cols())
    throw InvalidArgument("lightfield_system: tile must be square");
  require_nonnegative(tile, "light-field tile");
  const auto a = static_cast<std::size_t>(tile.rows());
  const std::size_t views = a * a;
  if (n == 0) n = views;
  if (n % views != 0)
    throw DimensionMismatch("lightfield_system: n = " + std::to_string(n) +
                            " is not a multiple of the " + std::to_string(views) + " angular views");

  Matrix h = Matrix::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  for (std::size_t block = 0; block < n / views; ++block) {
    const std::size_t base = block * views;
    for (std::size_t du = 0; du < a; ++du)
      for (std::size_t dv = 0; dv < a; ++dv) {
        const auto row = static_cast<Eigen::Index>(base + du * a + dv);
        for (std::size_t u = 0; u < a; ++u)
          for (std::size_t v = 0; v < a; ++v) {
            const auto tu = static_cast<Eigen::Index>((u + a - du) % a);
            const auto tv = static_cast<Eigen::Index>((v + a - dv) % a);
            h(row, static_cast<Eigen::Index>(base + u * a + v)) = tile(tu, tv);
          }
      }
  }

  KernelMeta meta;
  meta.kind = KernelKind::kLightField;
  meta.values = tile;
  meta.tile = a;
  return MultiplexSystem(std::move(h), "lightfield", std::move(meta));
}

std::vector<double> parse_flutter_code(std::string_view code) {
  if (code.empty()) throw InvalidArgument("flutter code is empty");
  std::vector<double> k;
  k.reserve(code.size());
  for (char ch : code) {
    if (ch == '0') k.push_back(0.0);
    else if (ch == '1') k.push_back(1.0);
    else throw InvalidArgument("flutter code may contain only '0' and '1'");
  }
  return k;
}

Matrix load_kernel_file(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw IoError("cannot open kernel file " + path.string());
  long long rows = 0, cols = 0;
  if (!(f >> rows >> cols) || rows <= 0 || cols <= 0)
    throw ParseError(ParseError::Kind::kMalformed, "kernel file " + path.string() +
                                                       ": first line must be \"rows cols\"");
  Matrix k(rows, cols);
  for (long long r = 0; r < rows; ++r)
    for (long long c = 0; c < cols; ++c)
      if (!(f >> k(r, c)))
        throw ParseError(ParseError::Kind::kTruncated,
                         "kernel file " + path.string() + ": expected " +
                             std::to_string(rows * cols) + " values");
  std::string extra;
  if (f >> extra)
    throw ParseError(ParseError::Kind::kMalformed, "kernel file " + path.string() + ": trailing data");
  if ((k.array() < 0.0).any())
    throw ParseError(ParseError::Kind::kMalformed, "kernel file " + path.string() + ": negative entry");
  return k;
}

}  // namespace cigauge
