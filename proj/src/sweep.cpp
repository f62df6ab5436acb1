#include "cigauge/sweep.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "cigauge/errors.hpp"
#include "cigauge/parallel.hpp"

namespace cigauge {
namespace {

std::optional<GmmPrior> prior_at(const GmmPrior* prior, double j, const MmseOptions& opts) {
  if (opts.method == MmseMethod::kNoPrior) return std::nullopt;
  if (prior == nullptr) throw InvalidArgument("a prior is required unless the no-prior method is used");
  if (!(j > 0.0)) throw InvalidArgument("signal level J must be positive to scale the prior");
  const double level = prior->mean_level();
  if (!(level > 0.0)) throw InvalidArgument("prior has a non-positive mean level");
  return prior->scaled(j / level);
}

double mmse_with(const std::optional<GmmPrior>& prior, const MultiplexSystem& sys,
                 const NoiseSpec& noise, const MmseOptions& opts) {
  switch (opts.method) {
    case MmseMethod::kBound: return mmse_lower_bound(*prior, sys, noise);
    case MmseMethod::kMonteCarlo:
      return mmse_monte_carlo(*prior, sys, noise, opts.mc_trials, opts.seed).estimate;
    case MmseMethod::kNoPrior: return mse_no_prior(sys, noise);
  }
  throw InvalidArgument("unknown mmse method");
}

void require_ascending(std::span<const double> v, const char* what) {
  if (v.empty()) throw InvalidArgument(std::string(what) + " is empty");
  for (std::size_t i = 1; i < v.size(); ++i)
    if (!(v[i] > v[i - 1])) throw InvalidArgument(std::string(what) + " must be strictly ascending");
}

}  // namespace

std::vector<LightLevel> light_levels(const CameraSpec& cam, std::span<const double> lux) {
  std::vector<LightLevel> out;
  out.reserve(lux.size());
  for (double l : lux) out.push_back({l, photons_per_pixel(cam, l)});
  return out;
}

std::vector<double> log_space(double a, double b, std::size_t count) {
  if (!(a > 0.0) || !(b > 0.0)) throw InvalidArgument("log_space: bounds must be positive");
  if (count == 0) throw InvalidArgument("log_space: count must be positive");
  if (count == 1) return {a};
  const double la = std::log10(a);
  const double lb = std::log10(b);
  std::vector<double> out(count);
  for (std::size_t i = 0; i < count; ++i) {
    const double t = static_cast<double>(i) / static_cast<double>(count - 1);
    out[i] = std::pow(10.0, la + t * (lb - la));
  }
  out.front() = a;
  out.back() = b;
  return out;
}

double system_mmse(const GmmPrior* prior, const MultiplexSystem& sys, double j,
                   double read_noise_e, const MmseOptions& opts) {
  const auto p = prior_at(prior, j, opts);
  return mmse_with(p, sys, noise_for(sys.throughput(), j, read_noise_e), opts);
}

std::vector<GainCurve> gain_curve(std::span<const MultiplexSystem> systems,
                                  const MultiplexSystem& ref, const GmmPrior* prior,
                                  double read_noise_e, std::span<const LightLevel> levels,
                                  const MmseOptions& opts) {
  if (levels.empty()) throw InvalidArgument("gain_curve: no light levels");
  for (const auto& sys : systems)
    if (sys.n() != ref.n())
      throw DimensionMismatch("system '" + sys.label() + "' and reference differ in size");
  if (prior && opts.method != MmseMethod::kNoPrior && prior->dim() != ref.n())
    throw DimensionMismatch("prior dimension " + std::to_string(prior->dim()) +
                            " does not match system size " + std::to_string(ref.n()));

  std::vector<std::optional<GmmPrior>> priors(levels.size());
  parallel_for(levels.size(), [&](std::size_t i) { priors[i] = prior_at(prior, levels[i].j, opts); });

  // Column 0 is the reference, column s + 1 is systems[s].
  const std::size_t cols = systems.size() + 1;
  std::vector<double> mmse(levels.size() * cols);
  parallel_for(mmse.size(), [&](std::size_t idx) {
    const std::size_t i = idx / cols;
    const std::size_t s = idx % cols;
    const MultiplexSystem& sys = s == 0 ? ref : systems[s - 1];
    mmse[idx] = mmse_with(priors[i], sys, noise_for(sys.throughput(), levels[i].j, read_noise_e), opts);
  });

  std::vector<GainCurve> curves(systems.size());
  for (std::size_t s = 0; s < systems.size(); ++s) {
    curves[s].system = systems[s].label();
    for (std::size_t i = 0; i < levels.size(); ++i) {
      GainRow r;
      r.lux = levels[i].lux;
      r.j = levels[i].j;
      r.j_over_sigma_r2 = levels[i].j / (read_noise_e * read_noise_e);
      r.mmse_ref = mmse[i * cols];
      r.mmse_sys = mmse[i * cols + s + 1];
      r.gain_db = snr_gain(r.mmse_ref, r.mmse_sys);
      r.method = opts.method;
      curves[s].rows.push_back(r);
    }
  }
  return curves;
}

std::vector<GainCurve> gain_curve(std::span<const MultiplexSystem> systems,
                                  const MultiplexSystem& ref, const GmmPrior* prior,
                                  const CameraSpec& cam, std::span<const double> lux_grid,
                                  const MmseOptions& opts) {
  cam.validate();
  const auto levels = light_levels(cam, lux_grid);
  return gain_curve(systems, ref, prior, cam.read_noise_e, levels, opts);
}

MultiplexSystem family_system(const SweepSpec& spec, std::size_t parameter) {
  if (parameter < 1) throw InvalidArgument("sweep parameters must be >= 1");
  switch (spec.family) {
    case SweepFamily::kExposure: {
      if (!spec.prior) throw InvalidArgument("exposure sweep needs a prior");
      return box_exposure(spec.prior->dim(), parameter);
    }
    case SweepFamily::kAperture: {
      if (!spec.prior) throw InvalidArgument("aperture sweep needs a prior");
      PatchGeometry geom;
      if (spec.geometry) {
        geom = *spec.geometry;
      } else {
        const auto side = static_cast<std::size_t>(std::lround(std::sqrt(static_cast<double>(spec.prior->dim()))));
        geom = {side, side};
      }
      if (geom.n() != spec.prior->dim())
        throw DimensionMismatch("aperture sweep patch geometry does not match the prior dimension");
      auto sys = from_kernel_2d(geom, disc_psf(parameter));
      return MultiplexSystem(sys.h(), "disc:" + std::to_string(parameter), sys.kernel_meta());
    }
    case SweepFamily::kFixed: {
      if (parameter > spec.systems.size())
        throw InvalidArgument("fixed sweep parameter " + std::to_string(parameter) +
                              " exceeds the system list");
      return spec.systems[parameter - 1];
    }
  }
  throw InvalidArgument("unknown sweep family");
}

OptimalityTable optimal_parameter(const SweepSpec& spec) {
  if (spec.grid.empty()) throw InvalidArgument("sweep grid is empty");
  for (std::size_t i = 0; i < spec.grid.size(); ++i) {
    if (spec.grid[i] < 1) throw InvalidArgument("sweep parameters must be >= 1");
    if (i > 0 && spec.grid[i] <= spec.grid[i - 1])
      throw InvalidArgument("sweep grid must be strictly ascending");
  }
  if (spec.grid.front() != 1) throw InvalidArgument("sweep grid must contain the impulse parameter 1");
  require_ascending(spec.lux, "lux grid");
  spec.camera.validate();

  std::vector<MultiplexSystem> systems;
  systems.reserve(spec.grid.size());
  for (std::size_t p : spec.grid) systems.push_back(family_system(spec, p));
  const std::size_t n = systems.front().n();
  for (const auto& s : systems)
    if (s.n() != n) throw DimensionMismatch("sweep systems differ in size");
  const MultiplexSystem ref = impulse(n);

  const auto levels = light_levels(spec.camera, spec.lux);
  std::vector<GainCurve> curves =
      gain_curve(systems, ref, spec.prior, spec.camera.read_noise_e, levels, spec.mmse);

  OptimalityTable table;
  table.mmse.assign(levels.size(), std::vector<double>(systems.size()));
  for (std::size_t i = 0; i < levels.size(); ++i) {
    std::size_t best = 0;
    for (std::size_t g = 0; g < systems.size(); ++g) {
      table.mmse[i][g] = curves[g].rows[i].mmse_sys;
      if (table.mmse[i][g] < table.mmse[i][best]) best = g;
    }
    OptimalityRow r;
    r.lux = levels[i].lux;
    r.j = levels[i].j;
    r.best_parameter = spec.grid[best];
    r.best_mmse = table.mmse[i][best];
    r.impulse_mmse = curves[best].rows[i].mmse_ref;
    r.gain_db = snr_gain(r.impulse_mmse, r.best_mmse);
    table.rows.push_back(r);
  }
  return table;
}

std::optional<double> crossover_lux(const OptimalityTable& table) {
  std::optional<double> out;
  for (auto it = table.rows.rbegin(); it != table.rows.rend() && it->best_parameter == 1; ++it)
    out = it->lux;
  return out;
}

std::optional<double> crossover_lux(const SweepSpec& spec) {
  return crossover_lux(optimal_parameter(spec));
}

std::vector<DecadeAverage> decade_average(const OptimalityTable& table) {
  std::map<int, std::pair<double, std::size_t>> acc;
  for (const auto& r : table.rows) {
    // The nudge keeps exact powers of ten in their own decade.
    const int d = static_cast<int>(std::floor(std::log10(r.lux) + 1e-9));
    auto& [sum, count] = acc[d];
    sum += static_cast<double>(r.best_parameter);
    ++count;
  }
  std::vector<DecadeAverage> out;
  for (const auto& [d, v] : acc) out.push_back({d, v.first / static_cast<double>(v.second), v.second});
  return out;
}

void write_optimality_csv(const OptimalityTable& table, std::ostream& out) {
  out << kOptimalityCsvHeader << '\n';
  for (const auto& r : table.rows)
    out << format_real(r.lux) << ',' << format_real(r.j) << ',' << r.best_parameter << ','
        << format_real(r.best_mmse) << ',' << format_real(r.impulse_mmse) << ','
        << format_real(r.gain_db) << '\n';
}

}  // namespace cigauge
