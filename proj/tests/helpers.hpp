#pragma once

#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "cigauge/gmm_prior.hpp"
#include "cigauge/multiplexing.hpp"
#include "cigauge/pipeline.hpp"
#include "oracles.hpp"

namespace testing {

using cigauge::GaussianComponent;
using cigauge::GmmPrior;
using cigauge::Matrix;
using cigauge::Vector;

inline GmmPrior scalar_prior(std::vector<double> w, std::vector<double> m, std::vector<double> v) {
  std::vector<GaussianComponent> comps;
  for (std::size_t k = 0; k < w.size(); ++k)
    comps.push_back({w[k], Vector::Constant(1, m[k]), Matrix::Constant(1, 1, v[k])});
  return GmmPrior(std::move(comps));
}

// Random weights in proportion to U(0.5, 1.5), means N(0, spread²), SPD
// covariances around `scale`.
inline GmmPrior random_prior(int n, int kk, std::uint64_t seed, double spread = 2.0,
                             double scale = 1.0) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.5, 1.5);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> w(kk);
  double total = 0.0;
  for (auto& x : w) total += (x = u(rng));
  std::vector<GaussianComponent> comps;
  for (int k = 0; k < kk; ++k) {
    Vector m(n);
    for (int i = 0; i < n; ++i) m[i] = spread * normal(rng);
    comps.push_back({w[k] / total, m, oracle::random_spd(n, rng, scale)});
  }
  return GmmPrior(std::move(comps));
}

// Square nonnegative system, diagonally dominated so it stays well posed.
inline cigauge::MultiplexSystem random_system(int n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Matrix h(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) h(i, j) = u(rng) < 0.3 ? u(rng) : 0.0;
  h.diagonal().array() += 1.0;
  return cigauge::MultiplexSystem(h, "random");
}

inline std::filesystem::path temp_path(const std::string& name) {
  return std::filesystem::temp_directory_path() / ("cigauge_test_" + name);
}

inline std::filesystem::path data_image(const std::string& name) {
  return std::filesystem::path(CIGAUGE_DATA_DIR) / "images" / (name + ".pgm");
}

// Small prior from the six repo images, pixels in display units.
inline GmmPrior desk_prior(std::size_t side, std::size_t k, std::size_t stride) {
  Matrix all;
  for (const char* name : {"camera", "coins", "brick", "grass", "gravel", "text"}) {
    const auto img = cigauge::load_image(data_image(name), 1.0);
    const cigauge::Image display(img.width(), img.height(),
                                 [&] {
                                   std::vector<double> v(img.data().begin(), img.data().end());
                                   for (double& x : v) x /= img.peak();
                                   return v;
                                 }(),
                                 1.0 / img.maxval(), img.maxval());
    const auto plan = cigauge::make_patch_plan(img.width(), img.height(), {side, side}, stride);
    const Matrix p = cigauge::extract_patches(display, plan);
    Matrix grown(p.rows(), all.cols() + p.cols());
    if (all.cols() > 0) grown.leftCols(all.cols()) = all;
    grown.rightCols(p.cols()) = p;
    all = std::move(grown);
  }
  cigauge::EmConfig cfg;
  cfg.k = k;
  cfg.max_iters = 40;
  return cigauge::fit_em(all, cfg).prior;
}

}  // namespace testing
