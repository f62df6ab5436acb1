#pragma once

#include <cstdint>
#include <optional>
#include <ostream>
#include <span>
#include <string_view>
#include <vector>

#include "cigauge/estimator.hpp"
#include "cigauge/gmm_prior.hpp"
#include "cigauge/multiplexing.hpp"
#include "cigauge/radiometry.hpp"

namespace cigauge {

struct LightLevel {
  double lux = 0.0;
  double j = 0.0;  // impulse-camera photo-electrons per pixel
};

std::vector<LightLevel> light_levels(const CameraSpec& cam, std::span<const double> lux);

// `count` points from a to b, evenly spaced in log10, ends inclusive.
std::vector<double> log_space(double a, double b, std::size_t count);

struct MmseOptions {
  MmseMethod method = MmseMethod::kBound;
  std::size_t mc_trials = 10000;
  std::uint64_t seed = 1;
};

// Analysis error of `sys` at impulse signal level j. The prior (ignored for
// the no-prior method, may then be null) is rescaled from its own
// mean_level() to j before use.
double system_mmse(const GmmPrior* prior, const MultiplexSystem& sys, double j,
                   double read_noise_e, const MmseOptions& opts);

// One curve per system, rows in level order. The reference gets its own
// noise with C = C(ref).
std::vector<GainCurve> gain_curve(std::span<const MultiplexSystem> systems,
                                  const MultiplexSystem& ref, const GmmPrior* prior,
                                  double read_noise_e, std::span<const LightLevel> levels,
                                  const MmseOptions& opts = {});
std::vector<GainCurve> gain_curve(std::span<const MultiplexSystem> systems,
                                  const MultiplexSystem& ref, const GmmPrior* prior,
                                  const CameraSpec& cam, std::span<const double> lux_grid,
                                  const MmseOptions& opts = {});

enum class SweepFamily { kExposure, kAperture, kFixed };

struct SweepSpec {
  SweepFamily family = SweepFamily::kExposure;
  std::vector<std::size_t> grid;  // ascending, ≥ 1, must contain 1
  std::vector<double> lux;        // ascending
  CameraSpec camera;
  const GmmPrior* prior = nullptr;
  MmseOptions mmse;
  // Aperture family: patch layout of the prior (default: square).
  std::optional<PatchGeometry> geometry;
  // Fixed family: parameter p selects systems[p − 1].
  std::vector<MultiplexSystem> systems;
};

struct OptimalityRow {
  double lux = 0.0;
  double j = 0.0;
  std::size_t best_parameter = 0;
  double best_mmse = 0.0;
  double impulse_mmse = 0.0;
  double gain_db = 0.0;
};

struct OptimalityTable {
  std::vector<OptimalityRow> rows;
  // mmse[i][g]: lux i, grid entry g.
  std::vector<std::vector<double>> mmse;
};

// Builds the family member for one grid parameter.
MultiplexSystem family_system(const SweepSpec& spec, std::size_t parameter);

// Exhaustive argmin over the grid at every lux; ties go to the smaller
// parameter.
OptimalityTable optimal_parameter(const SweepSpec& spec);

// Smallest lux from which best_parameter stays 1 through the end of the
// table; none when the last row is not 1.
std::optional<double> crossover_lux(const OptimalityTable& table);
std::optional<double> crossover_lux(const SweepSpec& spec);

struct DecadeAverage {
  int decade = 0;  // floor(log10(lux))
  double mean_best = 0.0;
  std::size_t count = 0;
};

std::vector<DecadeAverage> decade_average(const OptimalityTable& table);

inline constexpr std::string_view kOptimalityCsvHeader =
    "lux,j,best_parameter,best_mmse,impulse_mmse,gain_db";

void write_optimality_csv(const OptimalityTable& table, std::ostream& out);

}  // namespace cigauge
