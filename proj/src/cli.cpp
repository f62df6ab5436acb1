#include "cigauge/cli.hpp"

#include <openssl/evp.h>

#include <CLI11.hpp>
#include <algorithm>
#include <chrono>
#include <charconv>
#include <cmath>
#include <fstream>
#include <json.hpp>
#include <memory>
#include <optional>
#include <sstream>

#include "cigauge/errors.hpp"
#include "cigauge/estimator.hpp"
#include "cigauge/gmm_prior.hpp"
#include "cigauge/parallel.hpp"
#include "cigauge/pipeline.hpp"
#include "cigauge/radiometry.hpp"
#include "cigauge/sweep.hpp"

#ifndef CIGAUGE_VERSION
#define CIGAUGE_VERSION "0.0.0"
#endif

namespace cigauge {
namespace {

using json = nlohmann::ordered_json;
namespace fs = std::filesystem;

double parse_double(std::string_view s, std::string_view what) {
  double v = 0.0;
  const auto* end = s.data() + s.size();
  const auto [ptr, ec] = std::from_chars(s.data(), end, v);
  if (s.empty() || ec != std::errc() || ptr != end || !std::isfinite(v))
    throw InvalidArgument("invalid " + std::string(what) + " '" + std::string(s) + "'");
  return v;
}

std::size_t parse_size(std::string_view s, std::string_view what) {
  std::size_t v = 0;
  const auto* end = s.data() + s.size();
  const auto [ptr, ec] = std::from_chars(s.data(), end, v);
  if (s.empty() || ec != std::errc() || ptr != end)
    throw InvalidArgument("invalid " + std::string(what) + " '" + std::string(s) + "'");
  return v;
}

std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> parts;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = s.find(sep, start);
    parts.push_back(s.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
    if (pos == std::string_view::npos) return parts;
    start = pos + 1;
  }
}

json json_real_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot open " + path.string() + " for writing");
  f << text;
  if (!f) throw IoError("failed writing " + path.string());
}

// Records what a command read and wrote. Everything except duration_s is
// a function of the arguments and the input bytes.
class Manifest {
 public:
  explicit Manifest(std::string command)
      : start_(std::chrono::steady_clock::now()) {
    doc_["command"] = std::move(command);
    doc_["version"] = CIGAUGE_VERSION;
    doc_["parameters"] = json::object();
    doc_["inputs"] = json::array();
    doc_["outputs"] = json::array();
  }

  json& parameters() { return doc_["parameters"]; }
  json& operator[](const char* key) { return doc_[key]; }

  void input(const fs::path& path) {
    doc_["inputs"].push_back({{"path", path.string()}, {"sha256", sha256_file(path)}});
  }
  void output(const fs::path& path) {
    doc_["outputs"].push_back({{"path", path.string()}, {"sha256", sha256_file(path)}});
  }

  void write(const fs::path& path) {
    const auto elapsed = std::chrono::steady_clock::now() - start_;
    doc_["threads"] = thread_limit();
    doc_["duration_s"] = std::chrono::duration<double>(elapsed).count();
    write_text(path, doc_.dump(2) + "\n");
  }

 private:
  json doc_;
  std::chrono::steady_clock::time_point start_;
};

fs::path manifest_path(const std::string& explicit_path, const std::string& out) {
  if (!explicit_path.empty()) return explicit_path;
  if (!out.empty()) return out + ".manifest.json";
  return {};
}

PatchGeometry square_geometry(std::size_t n) {
  const auto side = static_cast<std::size_t>(std::lround(std::sqrt(static_cast<double>(n))));
  if (side * side != n)
    throw InvalidArgument("prior dimension " + std::to_string(n) +
                          " is not a square patch; pass --patch WxH");
  return {side, side};
}

PatchGeometry resolve_geometry(const std::string& patch, const GmmPrior* prior) {
  if (!patch.empty()) {
    const PatchGeometry g = parse_patch(patch);
    if (prior && g.n() != prior->dim())
      throw DimensionMismatch("patch " + patch + " has " + std::to_string(g.n()) +
                              " pixels but the prior dimension is " + std::to_string(prior->dim()));
    return g;
  }
  if (prior) return square_geometry(prior->dim());
  return {8, 8};
}

json system_json(const MultiplexSystem& sys) {
  return {{"label", sys.label()}, {"n", sys.n()}, {"throughput", sys.throughput()}};
}

// Camera flags shared by gain, simulate and sweep.
struct CameraArgs {
  std::string camera = "slr";
  std::optional<double> read_noise;

  void add(CLI::App& cmd) {
    cmd.add_option("--camera", camera, "Camera preset")
        ->check(CLI::IsMember({"slr", "mvc", "spc"}))
        ->capture_default_str();
    cmd.add_option("--read-noise", read_noise, "Override read noise sigma_r (electrons)");
  }

  CameraSpec resolve() const {
    CameraSpec cam = preset(camera);
    if (read_noise) cam.read_noise_e = *read_noise;
    cam.validate();
    return cam;
  }

  json to_json(const CameraSpec& cam) const {
    return {{"preset", camera},           {"f_number", cam.f_number},
            {"exposure_s", cam.exposure_s}, {"quantum_eff", cam.quantum_eff},
            {"pixel_m", cam.pixel_m},       {"read_noise_e", cam.read_noise_e},
            {"reflectivity", cam.reflectivity}};
  }
};

struct MmseArgs {
  bool mc = false;
  std::size_t trials = 10000;
  std::uint64_t seed = 1;

  void add(CLI::App& cmd) {
    cmd.add_flag("--mc", mc, "Use the Monte-Carlo MMSE instead of the lower bound");
    cmd.add_option("--trials", trials, "Monte-Carlo trials")->capture_default_str();
    cmd.add_option("--seed", seed, "Monte-Carlo seed")->capture_default_str();
  }

  MmseOptions resolve(bool no_prior) const {
    MmseOptions o;
    o.method = no_prior ? MmseMethod::kNoPrior : (mc ? MmseMethod::kMonteCarlo : MmseMethod::kBound);
    o.mc_trials = trials;
    o.seed = seed;
    return o;
  }
};

// Light levels at which any of the throughputs leaves the Gaussian model loose.
std::size_t count_questionable(std::span<const LightLevel> levels, std::span<const double> throughputs) {
  std::size_t count = 0;
  for (const auto& l : levels)
    if (std::any_of(throughputs.begin(), throughputs.end(),
                    [&](double c) { return gaussian_approx_questionable(c, l.j); }))
      ++count;
  return count;
}

void warn_questionable(std::ostream& err, std::size_t count, const std::string& what) {
  if (count > 0)
    err << "warning: " << count << " light level(s) put fewer than 10 photo-electrons per pixel on "
        << what << "; the Gaussian noise model is loose there\n";
}

// ---------------------------------------------------------------------------
// learn-prior

struct LearnArgs {
  std::vector<std::string> images;
  std::string out;
  std::string manifest;
  std::string patch = "8x8";
  std::size_t stride = 0;
  EmConfig em;
};

// Pixel values in units of display white, so corpus brightness differences
// survive into the prior.
Image load_display_units(const fs::path& path) {
  const Image img = load_image(path, 1.0);
  const double peak = img.peak();
  std::vector<double> data(img.data().begin(), img.data().end());
  for (double& v : data) v /= peak;
  return Image(img.width(), img.height(), std::move(data), 1.0 / img.maxval(), img.maxval());
}

int cmd_learn_prior(const LearnArgs& a, std::ostream& out, std::ostream& /*err*/) {
  Manifest m("learn-prior");
  const PatchGeometry geom = parse_patch(a.patch);
  const std::size_t stride = a.stride == 0 ? geom.width : a.stride;

  std::vector<Matrix> blocks;
  Eigen::Index total = 0;
  for (const auto& path : a.images) {
    const Image img = load_display_units(path);
    blocks.push_back(extract_patches(img, make_patch_plan(img.width(), img.height(), geom, stride)));
    total += blocks.back().cols();
    m.input(path);
  }
  Matrix patches(static_cast<Eigen::Index>(geom.n()), total);
  Eigen::Index col = 0;
  for (const auto& b : blocks) {
    patches.middleCols(col, b.cols()) = b;
    col += b.cols();
  }

  const EmResult fit = fit_em(patches, a.em);
  save_prior(fit.prior, a.out);

  m.parameters() = {{"patch", a.patch}, {"stride", stride},         {"k", a.em.k},
                    {"max_iters", a.em.max_iters}, {"rel_tol", a.em.rel_tol},
                    {"reg_scale", a.em.reg_scale}};
  m["seed"] = a.em.seed;
  m["training_patches"] = total;
  m["iterations"] = fit.iterations;
  m["converged"] = fit.converged;
  m["log_likelihood"] = fit.log_likelihood;
  m["mean_level"] = fit.prior.mean_level();
  m.output(a.out);
  m.write(manifest_path(a.manifest, a.out));
  out << "wrote " << a.out << " (K=" << fit.prior.size() << ", " << fit.iterations
      << " iterations" << (fit.converged ? "" : ", not converged") << ")\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------
// gain

struct GainArgs {
  std::string prior;
  std::string system;
  std::string patch;
  std::string lux = "0.01:10000";
  std::size_t points = 25;
  std::string j;
  bool no_prior = false;
  std::string out;
  std::string manifest;
  CameraArgs camera;
  MmseArgs mmse;
};

std::vector<LightLevel> resolve_levels(const CameraSpec& cam, const std::string& lux,
                                       const std::string& j, std::size_t points) {
  if (!j.empty()) {
    std::vector<LightLevel> levels;
    for (double v : parse_real_range(j, points)) {
      if (!(v > 0.0)) throw InvalidArgument("--j values must be positive");
      levels.push_back({lux_for_photons(cam, v), v});
    }
    return levels;
  }
  const auto grid = parse_real_range(lux, points);
  for (double v : grid)
    if (!(v > 0.0)) throw InvalidArgument("--lux values must be positive");
  return light_levels(cam, grid);
}

int cmd_gain(const GainArgs& a, std::ostream& out, std::ostream& err) {
  Manifest m("gain");
  std::optional<GmmPrior> prior;
  if (!a.prior.empty()) {
    prior = load_prior(a.prior);
    m.input(a.prior);
  } else if (!a.no_prior) {
    throw InvalidArgument("--prior is required unless --no-prior is given");
  }
  const PatchGeometry geom = resolve_geometry(a.patch, prior ? &*prior : nullptr);
  const MultiplexSystem sys = parse_system(a.system, geom);
  if (prior && sys.n() != prior->dim())
    throw DimensionMismatch("system '" + a.system + "' has size " + std::to_string(sys.n()) +
                            " but the prior dimension is " + std::to_string(prior->dim()));
  const MultiplexSystem ref = impulse(sys.n());
  const CameraSpec cam = a.camera.resolve();
  const auto levels = resolve_levels(cam, a.lux, a.j, a.points);
  const MmseOptions opts = a.mmse.resolve(a.no_prior);

  const std::vector<MultiplexSystem> systems{sys};
  const auto curves = gain_curve(systems, ref, prior ? &*prior : nullptr, cam.read_noise_e, levels, opts);

  std::ostringstream csv;
  write_gain_csv(curves.front(), csv);
  if (a.out.empty()) out << csv.str();
  else write_text(a.out, csv.str());

  const std::vector<double> both{sys.throughput(), ref.throughput()};
  const std::size_t questionable = count_questionable(levels, both);
  warn_questionable(err, questionable, "the system or reference");

  const fs::path mpath = manifest_path(a.manifest, a.out);
  if (!mpath.empty()) {
    m.parameters() = {{"system", a.system}, {"patch", std::to_string(geom.width) + "x" + std::to_string(geom.height)},
                      {"lux", a.lux},       {"j", a.j},
                      {"points", a.points}, {"method", std::string(method_tag(opts.method))},
                      {"trials", a.mmse.trials}};
    m["seed"] = a.mmse.seed;
    m["camera"] = a.camera.to_json(cam);
    m["system"] = system_json(sys);
    m["reference"] = system_json(ref);
    m["gaussian_approx_warnings"] = questionable;
    if (!a.out.empty()) m.output(a.out);
    m.write(mpath);
  }
  return kExitOk;
}

// ---------------------------------------------------------------------------
// simulate

struct SimulateArgs {
  std::string image;
  std::string prior;
  std::string system = "impulse";
  std::string patch;
  std::size_t stride = 0;
  std::optional<double> lux;
  std::optional<double> j;
  std::uint64_t seed = 1;
  std::string out;
  std::string raw_out;
  std::string report;
  std::string manifest;
  CameraArgs camera;
};

int cmd_simulate(const SimulateArgs& a, std::ostream& out, std::ostream& err) {
  Manifest m("simulate");
  if (a.lux.has_value() == a.j.has_value()) throw InvalidArgument("give exactly one of --lux and --j");
  const CameraSpec cam = a.camera.resolve();
  const double j = a.j ? *a.j : photons_per_pixel(cam, *a.lux);
  const double lux = a.lux ? *a.lux : lux_for_photons(cam, j);
  if (!(j > 0.0)) throw InvalidArgument("signal level J must be positive");

  const GmmPrior learned = load_prior(a.prior);
  m.input(a.prior);
  const PatchGeometry geom = resolve_geometry(a.patch, &learned);
  const MultiplexSystem sys = parse_system(a.system, geom);
  if (sys.n() != learned.dim())
    throw DimensionMismatch("system '" + a.system + "' has size " + std::to_string(sys.n()) +
                            " but the prior dimension is " + std::to_string(learned.dim()));

  const Image truth = load_image(a.image, j);
  m.input(a.image);
  const std::size_t stride = a.stride == 0 ? std::max<std::size_t>(1, geom.width / 2) : a.stride;
  const PatchPlan plan = make_patch_plan(truth.width(), truth.height(), geom, stride);
  const GmmPrior prior = learned.scaled(j / learned.mean_level());
  const NoiseSpec noise = noise_for(sys.throughput(), j, cam.read_noise_e);
  const SimulationResult sim = simulate_and_reconstruct(truth, plan, prior, sys, noise, a.seed);

  save_image(sim.reconstruction, a.out);
  if (!a.raw_out.empty()) save_image(sim.raw, a.raw_out);
  json report = {{"system", sys.label()},
                 {"lux", lux},
                 {"j", j},
                 {"psnr_db", json_real_or_null(sim.reconstruction_metrics.psnr_db)},
                 {"mse", sim.reconstruction_metrics.mse},
                 {"seed", a.seed},
                 {"trials", plan.count()},
                 {"raw_psnr_db", json_real_or_null(sim.raw_metrics.psnr_db)},
                 {"raw_mse", sim.raw_metrics.mse}};
  const fs::path report_path = a.report.empty() ? fs::path(a.out + ".json") : fs::path(a.report);
  write_text(report_path, report.dump(2) + "\n");

  if (gaussian_approx_questionable(sys.throughput(), j))
    warn_questionable(err, 1, "the system");

  m.parameters() = {{"system", a.system},
                    {"patch", std::to_string(geom.width) + "x" + std::to_string(geom.height)},
                    {"stride", stride},
                    {"lux", lux},
                    {"j", j}};
  m["seed"] = a.seed;
  m["camera"] = a.camera.to_json(cam);
  m["system"] = system_json(sys);
  m["noise_variance_e2"] = noise.variance_e2;
  m.output(a.out);
  if (!a.raw_out.empty()) m.output(a.raw_out);
  m.output(report_path);
  m.write(manifest_path(a.manifest, a.out));
  out << report.dump() << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------
// sweep

struct SweepArgs {
  std::string family = "exposure";
  std::string grid = "1:33";
  std::string prior;
  std::string patch;
  std::string lux = "0.01:10000";
  std::size_t points = 25;
  std::string out;
  std::string manifest;
  CameraArgs camera;
  MmseArgs mmse;
};

int cmd_sweep(const SweepArgs& a, std::ostream& out, std::ostream& err) {
  Manifest m("sweep");
  const GmmPrior prior = load_prior(a.prior);
  m.input(a.prior);

  SweepSpec spec;
  spec.family = a.family == "aperture" ? SweepFamily::kAperture : SweepFamily::kExposure;
  spec.grid = parse_int_grid(a.grid);
  spec.lux = parse_real_range(a.lux, a.points);
  spec.camera = a.camera.resolve();
  spec.prior = &prior;
  spec.mmse = a.mmse.resolve(false);
  spec.geometry = resolve_geometry(a.patch, &prior);

  const OptimalityTable table = optimal_parameter(spec);
  std::ostringstream csv;
  write_optimality_csv(table, csv);
  if (a.out.empty()) out << csv.str();
  else write_text(a.out, csv.str());

  const auto levels = light_levels(spec.camera, spec.lux);
  std::vector<double> throughputs;
  for (std::size_t p : spec.grid) throughputs.push_back(family_system(spec, p).throughput());
  const std::size_t questionable = count_questionable(levels, throughputs);
  warn_questionable(err, questionable, "some grid systems");

  const fs::path mpath = manifest_path(a.manifest, a.out);
  if (!mpath.empty()) {
    m.parameters() = {{"family", a.family},
                      {"grid", spec.grid},
                      {"lux", spec.lux},
                      {"method", std::string(method_tag(spec.mmse.method))},
                      {"trials", a.mmse.trials}};
    m["seed"] = a.mmse.seed;
    m["camera"] = a.camera.to_json(spec.camera);
    const auto cross = crossover_lux(table);
    m["crossover_lux"] = cross ? json(*cross) : json(nullptr);
    json decades = json::array();
    for (const auto& d : decade_average(table))
      decades.push_back({{"decade", d.decade}, {"mean_best", d.mean_best}, {"count", d.count}});
    m["decade_average"] = decades;
    m["gaussian_approx_warnings"] = questionable;
    if (!a.out.empty()) m.output(a.out);
    m.write(mpath);
  }
  return kExitOk;
}

}  // namespace

// ---------------------------------------------------------------------------
// Shared parsers

MultiplexSystem parse_system(std::string_view tag, const PatchGeometry& geom) {
  const std::size_t n = geom.n();
  const auto colon = tag.find(':');
  const std::string_view kind = tag.substr(0, colon);
  const std::string_view arg = colon == std::string_view::npos ? std::string_view{} : tag.substr(colon + 1);
  auto need_arg = [&] {
    if (arg.empty()) throw InvalidArgument("system tag '" + std::string(tag) + "' needs an argument");
  };
  const std::string label(tag);

  if (kind == "impulse" && colon == std::string_view::npos) return impulse(n);
  if (kind == "box") {
    need_arg();
    return box_exposure(n, parse_size(arg, "box length"));
  }
  if (kind == "flutter") {
    need_arg();
    const auto sys = from_kernel_1d(n, parse_flutter_code(arg));
    return MultiplexSystem(sys.h(), label, sys.kernel_meta());
  }
  if (kind == "kernel1d") {
    need_arg();
    const Matrix k = load_kernel_file(std::string(arg));
    if (k.rows() != 1 && k.cols() != 1)
      throw InvalidArgument("kernel1d file must hold a single row or column");
    const std::vector<double> values(k.data(), k.data() + k.size());
    const auto sys = from_kernel_1d(n, values);
    return MultiplexSystem(sys.h(), label, sys.kernel_meta());
  }
  if (kind == "kernel2d") {
    need_arg();
    const auto sys = from_kernel_2d(geom, load_kernel_file(std::string(arg)));
    return MultiplexSystem(sys.h(), label, sys.kernel_meta());
  }
  if (kind == "disc") {
    need_arg();
    const auto sys = from_kernel_2d(geom, disc_psf(parse_size(arg, "disc diameter")));
    return MultiplexSystem(sys.h(), label, sys.kernel_meta());
  }
  if (kind == "scaled-id") {
    need_arg();
    return scaled_identity(n, parse_double(arg, "scale"));
  }
  if (kind == "lf-mura") {
    need_arg();
    const auto sys = lightfield_system(mura_tile(parse_size(arg, "MURA order")), n);
    return MultiplexSystem(sys.h(), label, sys.kernel_meta());
  }
  throw InvalidArgument("unknown system tag '" + std::string(tag) + "'");
}

std::vector<double> parse_real_range(std::string_view text, std::size_t points) {
  if (text.find(':') != std::string_view::npos) {
    const auto parts = split(text, ':');
    if (parts.size() > 3) throw InvalidArgument("range '" + std::string(text) + "' has too many fields");
    const double a = parse_double(parts[0], "range start");
    const double b = parse_double(parts[1], "range end");
    const std::size_t count = parts.size() == 3 ? parse_size(parts[2], "range count") : points;
    if (!(b > a)) throw InvalidArgument("range end must exceed its start");
    return log_space(a, b, count);
  }
  std::vector<double> out;
  for (auto p : split(text, ',')) out.push_back(parse_double(p, "value"));
  return out;
}

std::vector<std::size_t> parse_int_grid(std::string_view text) {
  std::vector<std::size_t> out;
  if (text.find(':') != std::string_view::npos) {
    const auto parts = split(text, ':');
    if (parts.size() > 3) throw InvalidArgument("grid '" + std::string(text) + "' has too many fields");
    const std::size_t a = parse_size(parts[0], "grid start");
    const std::size_t b = parse_size(parts[1], "grid end");
    const std::size_t step = parts.size() == 3 ? parse_size(parts[2], "grid step") : 1;
    if (step == 0 || b < a) throw InvalidArgument("grid '" + std::string(text) + "' is empty");
    for (std::size_t v = a; v <= b; v += step) out.push_back(v);
    return out;
  }
  for (auto p : split(text, ',')) out.push_back(parse_size(p, "grid value"));
  return out;
}

PatchGeometry parse_patch(std::string_view text) {
  const auto x = text.find('x');
  if (x == std::string_view::npos) {
    const std::size_t s = parse_size(text, "patch size");
    if (s == 0) throw InvalidArgument("patch size must be positive");
    return {s, s};
  }
  const std::size_t w = parse_size(text.substr(0, x), "patch width");
  const std::size_t h = parse_size(text.substr(x + 1), "patch height");
  if (w == 0 || h == 0) throw InvalidArgument("patch size must be positive");
  return {w, h};
}

std::string sha256_file(const fs::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open " + path.string() + " for hashing");
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), EVP_MD_CTX_free);
  if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1)
    throw IoError("SHA-256 initialisation failed");
  char buf[1 << 16];
  while (f) {
    f.read(buf, sizeof buf);
    if (f.gcount() > 0) EVP_DigestUpdate(ctx.get(), buf, static_cast<std::size_t>(f.gcount()));
  }
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned len = 0;
  EVP_DigestFinal_ex(ctx.get(), md, &len);
  static constexpr char kHex[] = "0123456789abcdef";
  std::string hex;
  for (unsigned i = 0; i < len; ++i) {
    hex.push_back(kHex[md[i] >> 4]);
    hex.push_back(kHex[md[i] & 0xF]);
  }
  return hex;
}

// ---------------------------------------------------------------------------

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Multiplexed-imaging SNR analysis under Gaussian-mixture priors", "cigauge"};
  app.fallthrough();
  app.require_subcommand(1);
  app.set_version_flag("--version", CIGAUGE_VERSION);
  std::optional<unsigned> threads;
  app.add_option("--threads", threads, "Cap on worker threads (results do not depend on it)")
      ->check(CLI::PositiveNumber);

  LearnArgs learn;
  auto* learn_cmd = app.add_subcommand("learn-prior", "Fit a GMM patch prior to PGM images");
  learn_cmd->add_option("images", learn.images, "Training images (PGM)")->required();
  learn_cmd->add_option("-o,--out", learn.out, "Output prior file")->required();
  learn_cmd->add_option("--manifest", learn.manifest, "Manifest path (default: <out>.manifest.json)");
  learn_cmd->add_option("--patch", learn.patch, "Patch size WxH")->capture_default_str();
  learn_cmd->add_option("--stride", learn.stride, "Patch stride (default: patch width)");
  learn_cmd->add_option("--k", learn.em.k, "Mixture components")->capture_default_str();
  learn_cmd->add_option("--max-iters", learn.em.max_iters, "EM iteration cap")->capture_default_str();
  learn_cmd->add_option("--tol", learn.em.rel_tol, "Relative log-likelihood tolerance")->capture_default_str();
  learn_cmd->add_option("--reg", learn.em.reg_scale, "Covariance regularisation scale")->capture_default_str();
  learn_cmd->add_option("--seed", learn.em.seed, "Initialisation seed")->capture_default_str();

  GainArgs gain;
  auto* gain_cmd = app.add_subcommand("gain", "SNR gain of one system over impulse imaging");
  gain_cmd->add_option("--prior", gain.prior, "Prior file");
  gain_cmd->add_option("--system", gain.system, "System tag")->required();
  gain_cmd->add_option("--patch", gain.patch, "Patch size WxH (default: from the prior, else 8x8)");
  gain_cmd->add_option("--lux", gain.lux, "Lux range a:b[:n] or list")->capture_default_str();
  gain_cmd->add_option("--points", gain.points, "Points in a lux range")->capture_default_str();
  gain_cmd->add_option("--j", gain.j, "Photo-electron levels instead of lux");
  gain_cmd->add_flag("--no-prior", gain.no_prior, "Use the prior-free error of H^-1 y");
  gain_cmd->add_option("-o,--out", gain.out, "Output CSV (default: stdout)");
  gain_cmd->add_option("--manifest", gain.manifest, "Manifest path (default: <out>.manifest.json)");
  gain.camera.add(*gain_cmd);
  gain.mmse.add(*gain_cmd);

  SimulateArgs sim;
  auto* sim_cmd = app.add_subcommand("simulate", "Simulate capture and MMSE reconstruction of an image");
  sim_cmd->add_option("--image", sim.image, "Input PGM")->required();
  sim_cmd->add_option("--prior", sim.prior, "Prior file")->required();
  sim_cmd->add_option("--system", sim.system, "System tag")->capture_default_str();
  sim_cmd->add_option("--patch", sim.patch, "Patch size WxH (default: from the prior)");
  sim_cmd->add_option("--stride", sim.stride, "Patch stride (default: half the patch width)");
  sim_cmd->add_option("--lux", sim.lux, "Scene illuminance");
  sim_cmd->add_option("--j", sim.j, "Impulse photo-electrons per pixel");
  sim_cmd->add_option("--seed", sim.seed, "Noise seed")->capture_default_str();
  sim_cmd->add_option("-o,--out", sim.out, "Reconstructed PGM")->required();
  sim_cmd->add_option("--raw-out", sim.raw_out, "Raw capture divided by C(H), as PGM");
  sim_cmd->add_option("--report", sim.report, "JSON report (default: <out>.json)");
  sim_cmd->add_option("--manifest", sim.manifest, "Manifest path (default: <out>.manifest.json)");
  sim.camera.add(*sim_cmd);

  SweepArgs sweep;
  auto* sweep_cmd = app.add_subcommand("sweep", "Optimal exposure or aperture per light level");
  sweep_cmd->add_option("--family", sweep.family, "Parameter family")
      ->check(CLI::IsMember({"exposure", "aperture"}))
      ->capture_default_str();
  sweep_cmd->add_option("--grid", sweep.grid, "Parameter grid a:b[:step] or list")->capture_default_str();
  sweep_cmd->add_option("--prior", sweep.prior, "Prior file")->required();
  sweep_cmd->add_option("--patch", sweep.patch, "Patch size WxH (default: from the prior)");
  sweep_cmd->add_option("--lux", sweep.lux, "Lux range a:b[:n] or list")->capture_default_str();
  sweep_cmd->add_option("--points", sweep.points, "Points in a lux range")->capture_default_str();
  sweep_cmd->add_option("-o,--out", sweep.out, "Output CSV (default: stdout)");
  sweep_cmd->add_option("--manifest", sweep.manifest, "Manifest path (default: <out>.manifest.json)");
  sweep.camera.add(*sweep_cmd);
  sweep.mmse.add(*sweep_cmd);

  std::vector<std::string> argv_storage{"cigauge"};
  argv_storage.insert(argv_storage.end(), args.begin(), args.end());
  std::vector<char*> argv;
  for (auto& s : argv_storage) argv.push_back(s.data());

  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (threads) set_thread_limit(*threads);
    if (learn_cmd->parsed()) return cmd_learn_prior(learn, out, err);
    if (gain_cmd->parsed()) return cmd_gain(gain, out, err);
    if (sim_cmd->parsed()) return cmd_simulate(sim, out, err);
    if (sweep_cmd->parsed()) return cmd_sweep(sweep, out, err);
  } catch (const DimensionMismatch& e) {
    err << "error: " << e.what() << "\n";
    return kExitDimension;
  } catch (const InvalidArgument& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const IoError& e) {
    err << "error: " << e.what() << "\n";
    return kExitIo;
  } catch (const NumericalError& e) {
    err << "error: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitFailure;
  }
  return kExitUsage;
}

}  // namespace cigauge
