#pragma once

#include <Eigen/Dense>
#include <array>
#include <optional>
#include <span>

namespace cigauge {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

struct CholeskyFactor {
  Matrix lower;         // L with L·Lᵀ = A + jitter·I
  double jitter = 0.0;  // absolute diagonal load that was needed
  double log_det = 0.0; // log det(A + jitter·I)
};

// Jitter ladder for SPD solves, as multiples of trace(A)/N.
inline constexpr std::array<double, 4> kSolveJitter{0.0, 1e-12, 1e-10, 1e-8};

// Tries A, then A + s·(trace(A)/N)·I for each step s, returning the first
// successful factorization or nullopt when every step fails.
std::optional<CholeskyFactor> cholesky_with_jitter(
    const Matrix& a, std::span<const double> relative_steps = kSolveJitter);

// log N(x; mean, L·Lᵀ) given the lower Cholesky factor and its log det.
double gaussian_log_density(const Vector& x, const Vector& mean,
                            const Matrix& lower, double log_det);

// log Σ exp(v_i); -inf for an empty or all -inf input.
double log_sum_exp(std::span<const double> values);

}  // namespace cigauge
