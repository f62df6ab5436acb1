// Reference computations that share no code with the library: dense
// inverses instead of Cholesky, direct sums instead of matrix builders.
#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <complex>
#include <numbers>
#include <random>
#include <vector>

namespace oracle {

using Eigen::MatrixXd;
using Eigen::VectorXd;

struct Comp {
  double weight;
  VectorXd mean;
  MatrixXd cov;
};

inline double gaussian_pdf(const VectorXd& x, const VectorXd& mean, const MatrixXd& cov) {
  const auto n = static_cast<double>(x.size());
  const Eigen::FullPivLU<MatrixXd> lu(cov);
  const VectorXd d = x - mean;
  const double q = d.dot(lu.inverse() * d);
  return std::exp(-0.5 * q) / std::sqrt(std::pow(2.0 * std::numbers::pi, n) * lu.determinant());
}

inline double mixture_density(const std::vector<Comp>& comps, const VectorXd& x) {
  double s = 0.0;
  for (const auto& c : comps) s += c.weight * gaussian_pdf(x, c.mean, c.cov);
  return s;
}

// Gaussian conditional mean u + C Hᵀ (H C Hᵀ + v I)⁻¹ (y − H u).
inline VectorXd conditional_mean(const VectorXd& u, const MatrixXd& c, const MatrixXd& h, double v,
                                 const VectorXd& y) {
  MatrixXd s = h * c * h.transpose();
  s.diagonal().array() += v;
  return u + c * h.transpose() * s.fullPivLu().solve(y - h * u);
}

// Tr(C − C Hᵀ (H C Hᵀ + v I)⁻¹ H C) with an explicit inverse.
inline double wiener_error(const MatrixXd& c, const MatrixXd& h, double v) {
  MatrixXd s = h * c * h.transpose();
  s.diagonal().array() += v;
  return (c - c * h.transpose() * s.inverse() * h * c).trace();
}

// y_i = Σ_j k_j x_{(i + j − c) mod n}, c = (L − 1)/2.
inline VectorXd circular_correlate_1d(const VectorXd& x, const std::vector<double>& k) {
  const int n = static_cast<int>(x.size());
  const int c = (static_cast<int>(k.size()) - 1) / 2;
  VectorXd y = VectorXd::Zero(n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < static_cast<int>(k.size()); ++j) y[i] += k[j] * x[((i + j - c) % n + n) % n];
  return y;
}

// Row-major w×h patch, kernel kh×kw, centres ((kh−1)/2, (kw−1)/2).
inline VectorXd circular_correlate_2d(const VectorXd& x, int w, int h, const MatrixXd& k) {
  const int kh = static_cast<int>(k.rows());
  const int kw = static_cast<int>(k.cols());
  const int ca = (kh - 1) / 2;
  const int cb = (kw - 1) / 2;
  VectorXd y = VectorXd::Zero(w * h);
  for (int r = 0; r < h; ++r)
    for (int c = 0; c < w; ++c)
      for (int a = 0; a < kh; ++a)
        for (int b = 0; b < kw; ++b) {
          const int rr = ((r + a - ca) % h + h) % h;
          const int cc = ((c + b - cb) % w + w) % w;
          y[r * w + c] += k(a, b) * x[rr * w + cc];
        }
  return y;
}

// v · Σ_f 1/|K̂(f)|² for the circulant built from k: its eigenvalues are the
// DFT of the (shifted) kernel, and a shift only changes their phase.
inline double dft_no_prior_mse(const std::vector<double>& k, int n, double v) {
  double s = 0.0;
  for (int f = 0; f < n; ++f) {
    std::complex<double> lam = 0.0;
    for (int j = 0; j < static_cast<int>(k.size()); ++j)
      lam += k[j] * std::polar(1.0, 2.0 * std::numbers::pi * f * j / n);
    s += 1.0 / std::norm(lam);
  }
  return v * s;
}

// Scalar mixture observed as y = h·x + n, n ~ N(0, v).
struct Scalar {
  std::vector<double> p, m, var;
  double h, v;

  double estimate(double y) const {
    double num = 0.0, den = 0.0;
    for (std::size_t k = 0; k < p.size(); ++k) {
      const double s = h * h * var[k] + v;
      const double d = y - h * m[k];
      const double a = p[k] * std::exp(-0.5 * d * d / s) / std::sqrt(s);
      num += a * (m[k] + var[k] * h / s * d);
      den += a;
    }
    return num / den;
  }

  double prior_pdf(double x) const {
    double s = 0.0;
    for (std::size_t k = 0; k < p.size(); ++k)
      s += p[k] * std::exp(-0.5 * (x - m[k]) * (x - m[k]) / var[k]) /
           std::sqrt(2.0 * std::numbers::pi * var[k]);
    return s;
  }

  // ∫∫ (x − x̂(hx + n))² f(x) φ_v(n) dx dn by the midpoint rule on
  // [−half, half]² with spacing `step`.
  double quadrature_mmse(double half = 12.0, double step = 0.01) const {
    const int count = static_cast<int>(std::lround(2.0 * half / step));
    std::vector<double> grid(count), fx(count), fn(count);
    for (int i = 0; i < count; ++i) {
      grid[i] = -half + (i + 0.5) * step;
      fx[i] = prior_pdf(grid[i]);
      fn[i] = std::exp(-0.5 * grid[i] * grid[i] / v) / std::sqrt(2.0 * std::numbers::pi * v);
    }
    double total = 0.0;
    for (int i = 0; i < count; ++i) {
      if (fx[i] < 1e-300) continue;
      double inner = 0.0;
      for (int j = 0; j < count; ++j) {
        const double e = grid[i] - estimate(h * grid[i] + grid[j]);
        inner += e * e * fn[j];
      }
      total += inner * fx[i];
    }
    return total * step * step;
  }
};

inline MatrixXd random_spd(int n, std::mt19937_64& rng, double scale = 1.0, double floor = 0.1) {
  std::normal_distribution<double> normal(0.0, 1.0);
  MatrixXd a(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) a(i, j) = normal(rng);
  MatrixXd c = scale * a * a.transpose() / n;
  c.diagonal().array() += floor * scale;
  return 0.5 * (c + c.transpose());
}

}  // namespace oracle
