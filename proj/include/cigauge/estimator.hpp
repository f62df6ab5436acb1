#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include "cigauge/gmm_prior.hpp"
#include "cigauge/linalg.hpp"
#include "cigauge/multiplexing.hpp"
#include "cigauge/radiometry.hpp"

namespace cigauge {

// Observation-conditioned mixture f(x | y).
struct PosteriorMixture {
  std::vector<double> weights;             // α_k(y), sums to 1
  std::vector<Vector> means;               // u_{x|y}^(k)(y)
  std::vector<double> obs_log_likelihood;  // log f^(k)(y)
  // y-independent; shared with the model that produced this mixture.
  std::shared_ptr<const std::vector<Matrix>> covariances;
};

/// Everything about f(x | y) that does not depend on y, for one
/// (prior, system, noise) triple.
///
/// Per component k the model keeps the Cholesky factor L_k of
/// S_k = H C_k Hᵀ + σ² I (with escalating jitter when needed) and
/// W_k = L_k⁻¹ H C_k. Then for an observation y, with z = L_k⁻¹ (y − H u_k):
///   log f^(k)(y)  = −½ (N log 2π + log det S_k + ‖z‖²)
///   u_{x|y}^(k)   = u_k + W_kᵀ z
///   C_{x|y}^(k)   = C_k − W_kᵀ W_k
/// so every per-observation quantity costs O(N²) per component.
class PosteriorModel {
 public:
  PosteriorModel(const GmmPrior& prior, const MultiplexSystem& sys, const NoiseSpec& noise);

  std::size_t dim() const noexcept { return dim_; }
  std::size_t size() const noexcept { return components_.size(); }

  PosteriorMixture posterior(const Vector& y) const;
  Vector estimate(const Vector& y) const;

  // Σ p_k Tr(C_{x|y}^(k)).
  double lower_bound() const noexcept { return lower_bound_; }
  const std::vector<Matrix>& posterior_covariances() const { return *covariances_; }

  // Per-component posterior means and log posterior weights for y.
  void evaluate(const Vector& y, std::vector<Vector>& means, std::vector<double>& log_weights) const;

 private:
  struct Component {
    double log_weight = 0.0;
    Vector mean;
    Vector projected_mean;  // H u_k
    Matrix lower;           // chol(S_k)
    double log_det = 0.0;
    Matrix w;               // L_k⁻¹ H C_k
  };

  std::size_t dim_ = 0;
  std::vector<Component> components_;
  std::shared_ptr<const std::vector<Matrix>> covariances_;
  double lower_bound_ = 0.0;
};

PosteriorMixture posterior(const GmmPrior& prior, const MultiplexSystem& sys,
                           const NoiseSpec& noise, const Vector& y);
Vector mmse_estimate(const GmmPrior& prior, const MultiplexSystem& sys,
                     const NoiseSpec& noise, const Vector& y);

// Intra-component error Σ p_k Tr(C_{x|y}^(k)); a lower bound on the MMSE.
double mmse_lower_bound(const GmmPrior& prior, const MultiplexSystem& sys, const NoiseSpec& noise);

// Error of the best linear estimator under the mixture's aggregate mean and
// covariance; an upper bound on the MMSE.
double lmmse(const GmmPrior& prior, const MultiplexSystem& sys, const NoiseSpec& noise);

struct MonteCarloResult {
  double estimate = 0.0;   // mean of ‖x − x̂(y)‖²
  double std_error = 0.0;
  std::size_t trials = 0;
  double intra = 0.0;      // analytic lower bound
  double inter = 0.0;      // mean of ‖x̂(y) − u_{x|y}^(k)(y)‖², k = generating component
  double inter_std_error = 0.0;
};

// Draws (k, x, n) per trial from substream(seed, trial), so the result does
// not depend on the number of workers.
MonteCarloResult mmse_monte_carlo(const GmmPrior& prior, const MultiplexSystem& sys,
                                  const NoiseSpec& noise, std::size_t trials,
                                  std::uint64_t seed);

struct MmseReport {
  double lower_bound = 0.0;
  double lmmse = 0.0;
  std::optional<MonteCarloResult> monte_carlo;
};

MmseReport mmse_report(const GmmPrior& prior, const MultiplexSystem& sys, const NoiseSpec& noise,
                       std::optional<std::size_t> mc_trials = std::nullopt,
                       std::uint64_t seed = 1);

// Tr(H⁻¹ C_nn H⁻ᵀ) = σ² Σ 1/s_i² over the singular values of H. Throws
// NotInvertible when H is singular or its condition number is ≥ 1e12.
double mse_no_prior(const MultiplexSystem& sys, const NoiseSpec& noise);

inline constexpr double kMaxCondition = 1e12;

// 10·log10(mmse_ref / mmse_sys) in dB.
double snr_gain(double mmse_ref, double mmse_sys);

// ---------------------------------------------------------------------------
// Gain curves

enum class MmseMethod { kBound, kMonteCarlo, kNoPrior };

std::string_view method_tag(MmseMethod method);

struct GainRow {
  double lux = 0.0;
  double j = 0.0;
  double j_over_sigma_r2 = 0.0;
  double mmse_ref = 0.0;
  double mmse_sys = 0.0;
  double gain_db = 0.0;
  MmseMethod method = MmseMethod::kBound;
};

struct GainCurve {
  std::string system;
  std::vector<GainRow> rows;
};

inline constexpr std::string_view kGainCsvHeader =
    "lux,j,j_over_sigma_r2,mmse_ref,mmse_sys,gain_db,method";

void write_gain_csv(const GainCurve& curve, std::ostream& out);

// 17 significant digits, the CSV float format.
std::string format_real(double v);

}  // namespace cigauge
