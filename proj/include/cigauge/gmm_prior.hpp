#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "cigauge/linalg.hpp"
#include "cigauge/rng.hpp"

namespace cigauge {

struct GaussianComponent {
  double weight = 0.0;
  Vector mean;        // photo-electrons
  Matrix covariance;  // photo-electrons², SPD
};

/// Gaussian mixture over vectorized patches.
///
/// Immutable once built. Construction checks that weights are positive and
/// sum to one (1e-12), that every mean/covariance has the common dimension,
/// and that each covariance is symmetric (1e-9 relative) and factorizes,
/// possibly after diagonal jitter. The stored covariance is never altered;
/// any jitter lives only in the cached factor.
class GmmPrior {
 public:
  explicit GmmPrior(std::vector<GaussianComponent> components);

  std::size_t dim() const noexcept { return dim_; }
  std::size_t size() const noexcept { return components_.size(); }

  const GaussianComponent& component(std::size_t k) const { return components_.at(k); }
  std::span<const GaussianComponent> components() const noexcept { return components_; }

  // Lower Cholesky factor of component k's covariance.
  const Matrix& chol(std::size_t k) const { return factors_.at(k).lower; }
  double log_det(std::size_t k) const { return factors_.at(k).log_det; }

  Vector aggregate_mean() const;
  // Σ p_k (C_k + (u_k − u)(u_k − u)ᵀ); equals Σ p_k (C_k + u_k u_kᵀ) − u uᵀ.
  Matrix aggregate_covariance() const;

  // Average pixel value of the aggregate mean: the signal level the prior
  // was learned at.
  double mean_level() const;

  // Prior of the signal s·x: means scale by s, covariances by s².
  GmmPrior scaled(double factor) const;

  friend bool operator==(const GmmPrior& a, const GmmPrior& b);

 private:
  std::size_t dim_ = 0;
  std::vector<GaussianComponent> components_;
  std::vector<CholeskyFactor> factors_;
};

double log_density(const GmmPrior& prior, const Vector& x);

// Draws `count` patches (one per column). The generating component of each
// column is written to `components` when non-null.
Matrix sample(const GmmPrior& prior, Rng& rng, std::size_t count,
              std::vector<std::size_t>* components = nullptr);

struct EmConfig {
  std::size_t k = 20;
  int max_iters = 100;
  double rel_tol = 1e-6;     // stop when |ΔLL| <= rel_tol·|LL|
  // Ridge λ = reg_scale·trace(C)/N + 1e-10 from the global sample
  // covariance C; component k is loaded with λ·M/M_k.
  double reg_scale = 1e-6;
  std::uint64_t seed = 1;
};

struct EmResult {
  GmmPrior prior;
  // Training log-likelihood of the parameters entering each E-step, less
  // the ridge penalty ½·λ·M·Σ_k tr(C_k⁻¹); the final entry belongs to the
  // returned prior. Non-decreasing.
  std::vector<double> log_likelihood;
  int iterations = 0;
  bool converged = false;
};

// Fits a K-component mixture to the columns of `patches` by EM. Means are
// seeded k-means++-style from a fixed-seed subsample (≤ 10,000 patches);
// covariances start at the global sample covariance; weights start uniform.
EmResult fit_em(const Matrix& patches, const EmConfig& cfg);

// Binary format (little-endian): "GMMP", u32 version, u32 dim, u32 K, then
// per component f64 weight, f64[N] mean, f64[N·N] row-major covariance.
inline constexpr std::uint32_t kPriorFormatVersion = 1;

void save_prior(const GmmPrior& prior, const std::filesystem::path& path);
GmmPrior load_prior(const std::filesystem::path& path);

}  // namespace cigauge
