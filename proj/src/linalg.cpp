#include "cigauge/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

namespace cigauge {

std::optional<CholeskyFactor> cholesky_with_jitter(
    const Matrix& a, std::span<const double> relative_steps) {
  const auto n = a.rows();
  if (n == 0 || a.cols() != n) return std::nullopt;
  double scale = a.trace() / static_cast<double>(n);
  if (!(scale > 0.0) || !std::isfinite(scale)) scale = 1.0;

  for (double step : relative_steps) {
    const double jitter = step * scale;
    Matrix loaded = a;
    if (jitter > 0.0) loaded.diagonal().array() += jitter;
    Eigen::LLT<Matrix> llt(loaded);
    if (llt.info() != Eigen::Success) continue;
    Matrix lower = llt.matrixL();
    const auto diag = lower.diagonal();
    if (!diag.allFinite() || (diag.array() <= 0.0).any()) continue;
    CholeskyFactor f;
    f.log_det = 2.0 * diag.array().log().sum();
    f.lower = std::move(lower);
    f.jitter = jitter;
    return f;
  }
  return std::nullopt;
}

double gaussian_log_density(const Vector& x, const Vector& mean,
                            const Matrix& lower, double log_det) {
  const Vector z =
      lower.triangularView<Eigen::Lower>().solve(x - mean);
  const double n = static_cast<double>(x.size());
  return -0.5 * (n * std::log(2.0 * std::numbers::pi) + log_det +
                 z.squaredNorm());
}

double log_sum_exp(std::span<const double> values) {
  constexpr double kNegInf = -std::numeric_limits<double>::infinity();
  if (values.empty()) return kNegInf;
  const double peak = *std::max_element(values.begin(), values.end());
  if (peak == kNegInf) return kNegInf;
  double sum = 0.0;
  for (double v : values) sum += std::exp(v - peak);
  return peak + std::log(sum);
}

}  // namespace cigauge
