#include "cigauge/pipeline.hpp"

#include <cctype>
#include <cmath>
#include <fstream>
#include <iterator>
#include <limits>
#include <string>

#include "cigauge/errors.hpp"
#include "cigauge/parallel.hpp"

namespace cigauge {

Image::Image(std::size_t width, std::size_t height, std::vector<double> data, double scale,
             std::uint32_t maxval)
    : width_(width), height_(height), data_(std::move(data)), scale_(scale), maxval_(maxval) {
  if (width_ == 0 || height_ == 0) throw InvalidArgument("image dimensions must be positive");
  if (data_.size() != width_ * height_)
    throw DimensionMismatch("image data size does not match its dimensions");
  if (!(scale_ > 0.0) || !std::isfinite(scale_)) throw InvalidArgument("image scale must be positive");
  if (maxval_ == 0 || maxval_ > 65535) throw InvalidArgument("image maxval must lie in [1, 65535]");
  for (double v : data_)
    if (!(v >= 0.0) || !std::isfinite(v)) throw InvalidArgument("image values must be finite and >= 0");
}

double Image::mean() const {
  double sum = 0.0;
  for (double v : data_) sum += v;
  return sum / static_cast<double>(data_.size());
}

// ---------------------------------------------------------------------------
// PGM

namespace {

class PgmHeaderReader {
 public:
  PgmHeaderReader(const std::string& bytes, const std::string& name) : bytes_(bytes), name_(name) {}

  unsigned long number(const char* what) {
    skip_space_and_comments();
    if (pos_ >= bytes_.size() || !std::isdigit(static_cast<unsigned char>(bytes_[pos_])))
      throw ParseError(ParseError::Kind::kMalformed, name_ + ": malformed PGM header (" + what + ")");
    unsigned long v = 0;
    while (pos_ < bytes_.size() && std::isdigit(static_cast<unsigned char>(bytes_[pos_]))) {
      v = v * 10 + static_cast<unsigned long>(bytes_[pos_] - '0');
      if (v > 1'000'000'000ul)
        throw ParseError(ParseError::Kind::kMalformed, name_ + ": PGM header value too large");
      ++pos_;
    }
    return v;
  }

  // Binary data starts after exactly one whitespace byte.
  std::size_t binary_start() {
    if (pos_ >= bytes_.size() || !std::isspace(static_cast<unsigned char>(bytes_[pos_])))
      throw ParseError(ParseError::Kind::kMalformed, name_ + ": missing whitespace after PGM header");
    return pos_ + 1;
  }

  void skip_space_and_comments() {
    while (pos_ < bytes_.size()) {
      const char c = bytes_[pos_];
      if (c == '#') {
        while (pos_ < bytes_.size() && bytes_[pos_] != '\n') ++pos_;
      } else if (std::isspace(static_cast<unsigned char>(c))) {
        ++pos_;
      } else {
        break;
      }
    }
  }

  std::size_t pos() const { return pos_; }
  void set_pos(std::size_t p) { pos_ = p; }

 private:
  const std::string& bytes_;
  std::string name_;
  std::size_t pos_ = 2;
};

}  // namespace

Image load_image(const std::filesystem::path& path, double mean_target_e) {
  if (!(mean_target_e > 0.0) || !std::isfinite(mean_target_e))
    throw InvalidArgument("load_image: target mean must be positive");
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open image " + path.string());
  const std::string bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  const std::string name = path.string();
  if (bytes.size() < 2 || bytes[0] != 'P' || (bytes[1] != '2' && bytes[1] != '5'))
    throw ParseError(ParseError::Kind::kBadMagic, name + ": not a P2/P5 PGM file");
  const bool binary = bytes[1] == '5';

  PgmHeaderReader hdr(bytes, name);
  const auto width = hdr.number("width");
  const auto height = hdr.number("height");
  const auto maxval = hdr.number("maxval");
  if (width == 0 || height == 0) throw ParseError(ParseError::Kind::kMalformed, name + ": zero image size");
  if (maxval == 0 || maxval > 65535)
    throw ParseError(ParseError::Kind::kMalformed, name + ": unsupported maxval " + std::to_string(maxval));

  const std::size_t count = static_cast<std::size_t>(width) * height;
  std::vector<double> raw(count);
  if (binary) {
    const std::size_t start = hdr.binary_start();
    const std::size_t bpp = maxval < 256 ? 1 : 2;
    if (bytes.size() - start < count * bpp)
      throw ParseError(ParseError::Kind::kTruncated, name + ": truncated pixel data");
    for (std::size_t i = 0; i < count; ++i) {
      unsigned v = static_cast<unsigned char>(bytes[start + i * bpp]);
      if (bpp == 2) v = (v << 8) | static_cast<unsigned char>(bytes[start + i * bpp + 1]);
      raw[i] = static_cast<double>(v);
    }
  } else {
    for (std::size_t i = 0; i < count; ++i) {
      hdr.skip_space_and_comments();
      if (hdr.pos() >= bytes.size())
        throw ParseError(ParseError::Kind::kTruncated, name + ": truncated pixel data");
      raw[i] = static_cast<double>(hdr.number("pixel"));
    }
  }
  for (double v : raw)
    if (v > static_cast<double>(maxval))
      throw ParseError(ParseError::Kind::kMalformed, name + ": pixel exceeds maxval");

  double sum = 0.0;
  for (double v : raw) sum += v;
  const double mean = sum / static_cast<double>(count);
  if (!(mean > 0.0)) throw InvalidArgument(name + ": cannot scale an image with zero mean");
  const double scale = mean_target_e / mean;
  for (double& v : raw) v *= scale;
  return Image(width, height, std::move(raw), scale, static_cast<std::uint32_t>(maxval));
}

void save_image(const Image& img, const std::filesystem::path& path) {
  std::string out = "P5\n" + std::to_string(img.width()) + " " + std::to_string(img.height()) +
                    "\n" + std::to_string(img.maxval()) + "\n";
  const bool wide = img.maxval() >= 256;
  const double top = static_cast<double>(img.maxval());
  for (double v : img.data()) {
    const double counts = std::clamp(std::round(v / img.scale()), 0.0, top);
    const auto c = static_cast<unsigned>(counts);
    if (wide) out.push_back(static_cast<char>((c >> 8) & 0xFFu));
    out.push_back(static_cast<char>(c & 0xFFu));
  }
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot open " + path.string() + " for writing");
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!f) throw IoError("failed writing " + path.string());
}

// ---------------------------------------------------------------------------
// Patches

namespace {

std::vector<std::size_t> axis_origins(std::size_t extent, std::size_t patch, std::size_t stride) {
  std::vector<std::size_t> o;
  for (std::size_t p = 0; p + patch <= extent; p += stride) o.push_back(p);
  if (o.back() + patch < extent) o.push_back(extent - patch);
  return o;
}

}  // namespace

PatchPlan make_patch_plan(std::size_t image_width, std::size_t image_height,
                          const PatchGeometry& patch, std::size_t stride) {
  if (patch.width == 0 || patch.height == 0) throw InvalidArgument("patch size must be positive");
  if (stride == 0) throw InvalidArgument("patch stride must be positive");
  if (patch.width > image_width || patch.height > image_height)
    throw DimensionMismatch("patch " + std::to_string(patch.width) + "x" +
                            std::to_string(patch.height) + " does not fit in image " +
                            std::to_string(image_width) + "x" + std::to_string(image_height));
  PatchPlan plan;
  plan.image_width = image_width;
  plan.image_height = image_height;
  plan.patch = patch;
  plan.stride = stride;
  for (std::size_t r : axis_origins(image_height, patch.height, stride))
    for (std::size_t c : axis_origins(image_width, patch.width, stride)) plan.origins.emplace_back(r, c);
  return plan;
}

Matrix extract_patches(const Image& img, const PatchPlan& plan) {
  if (img.width() != plan.image_width || img.height() != plan.image_height)
    throw DimensionMismatch("patch plan was made for a different image size");
  const std::size_t n = plan.patch.n();
  Matrix out(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(plan.count()));
  for (std::size_t i = 0; i < plan.count(); ++i) {
    const auto [r0, c0] = plan.origins[i];
    for (std::size_t r = 0; r < plan.patch.height; ++r)
      for (std::size_t c = 0; c < plan.patch.width; ++c)
        out(static_cast<Eigen::Index>(r * plan.patch.width + c), static_cast<Eigen::Index>(i)) =
            img.at(r0 + r, c0 + c);
  }
  return out;
}

Vector simulate_capture(const Vector& patch, const MultiplexSystem& sys, const NoiseSpec& noise,
                        Rng& rng) {
  if (static_cast<std::size_t>(patch.size()) != sys.n())
    throw DimensionMismatch("patch size does not match the multiplexing matrix");
  if (!(noise.variance_e2 > 0.0)) throw InvalidArgument("noise variance must be positive");
  std::normal_distribution<double> normal(0.0, std::sqrt(noise.variance_e2));
  Vector y = sys.h() * patch;
  for (Eigen::Index i = 0; i < y.size(); ++i) y[i] += normal(rng);
  return y;
}

std::vector<std::size_t> coverage(const PatchPlan& plan) {
  std::vector<std::size_t> hits(plan.image_width * plan.image_height, 0);
  for (const auto& [r0, c0] : plan.origins)
    for (std::size_t r = 0; r < plan.patch.height; ++r)
      for (std::size_t c = 0; c < plan.patch.width; ++c) ++hits[(r0 + r) * plan.image_width + c0 + c];
  return hits;
}

Image reconstruct_image(const Matrix& patches, const PatchPlan& plan, double scale,
                        std::uint32_t maxval) {
  if (static_cast<std::size_t>(patches.cols()) != plan.count())
    throw DimensionMismatch("reconstruct_image: " + std::to_string(patches.cols()) +
                            " patches for a plan of " + std::to_string(plan.count()));
  if (static_cast<std::size_t>(patches.rows()) != plan.patch.n())
    throw DimensionMismatch("reconstruct_image: patch length does not match the plan");
  std::vector<double> acc(plan.image_width * plan.image_height, 0.0);
  for (std::size_t i = 0; i < plan.count(); ++i) {
    const auto [r0, c0] = plan.origins[i];
    for (std::size_t r = 0; r < plan.patch.height; ++r)
      for (std::size_t c = 0; c < plan.patch.width; ++c)
        acc[(r0 + r) * plan.image_width + c0 + c] +=
            patches(static_cast<Eigen::Index>(r * plan.patch.width + c), static_cast<Eigen::Index>(i));
  }
  const auto hits = coverage(plan);
  for (std::size_t p = 0; p < acc.size(); ++p) {
    if (hits[p] == 0) throw InvalidArgument("reconstruct_image: plan leaves pixels uncovered");
    acc[p] = std::max(0.0, acc[p] / static_cast<double>(hits[p]));
  }
  return Image(plan.image_width, plan.image_height, std::move(acc), scale, maxval);
}

ImageMetrics image_metrics(const Image& truth, const Image& estimate) {
  if (truth.width() != estimate.width() || truth.height() != estimate.height())
    throw DimensionMismatch("image_metrics: image sizes differ");
  const double peak = truth.peak();
  double ss = 0.0;
  const auto t = truth.data();
  const auto e = estimate.data();
  for (std::size_t i = 0; i < t.size(); ++i) {
    const double d = (t[i] - e[i]) / peak;
    ss += d * d;
  }
  ImageMetrics m;
  m.mse = ss / static_cast<double>(t.size());
  m.psnr_db = m.mse > 0.0 ? 10.0 * std::log10(1.0 / m.mse) : std::numeric_limits<double>::infinity();
  return m;
}

SimulationResult simulate_and_reconstruct(const Image& truth, const PatchPlan& plan,
                                          const GmmPrior& prior, const MultiplexSystem& sys,
                                          const NoiseSpec& noise, std::uint64_t seed) {
  if (prior.dim() != plan.patch.n())
    throw DimensionMismatch("prior dimension " + std::to_string(prior.dim()) +
                            " does not match the " + std::to_string(plan.patch.width) + "x" +
                            std::to_string(plan.patch.height) + " patch size");
  const Matrix x = extract_patches(truth, plan);
  const PosteriorModel model(prior, sys, noise);
  Matrix x_hat(x.rows(), x.cols());
  Matrix raw(x.rows(), x.cols());
  parallel_for(plan.count(), [&](std::size_t i) {
    Rng rng = substream(seed, i);
    const auto col = static_cast<Eigen::Index>(i);
    const Vector y = simulate_capture(x.col(col), sys, noise, rng);
    raw.col(col) = y / sys.throughput();
    x_hat.col(col) = model.estimate(y);
  });
  SimulationResult out{reconstruct_image(x_hat, plan, truth.scale(), truth.maxval()),
                       reconstruct_image(raw, plan, truth.scale(), truth.maxval()),
                       {}, {}};
  out.reconstruction_metrics = image_metrics(truth, out.reconstruction);
  out.raw_metrics = image_metrics(truth, out.raw);
  return out;
}

}  // namespace cigauge
