#include "cigauge/estimator.hpp"

#include <cmath>
#include <cstdio>
#include <limits>
#include <numbers>
#include <random>

#include "cigauge/errors.hpp"
#include "cigauge/parallel.hpp"
#include "cigauge/rng.hpp"

namespace cigauge {
namespace {

void check_dims(const GmmPrior& prior, const MultiplexSystem& sys, const NoiseSpec& noise) {
  if (prior.dim() != sys.n())
    throw DimensionMismatch("prior dimension " + std::to_string(prior.dim()) +
                            " does not match system size " + std::to_string(sys.n()));
  if (!(noise.variance_e2 > 0.0) || !std::isfinite(noise.variance_e2))
    throw InvalidArgument("noise variance must be positive");
}

struct Projection {
  CholeskyFactor factor;  // of H C Hᵀ + σ² I
  Matrix w;               // L⁻¹ H C
  double trace = 0.0;     // Tr(C) − ‖W‖²_F
};

// Shared kernel of the posterior covariance, lower bound and LMMSE.
Projection project(const Matrix& h, const Matrix& cov, double variance, const std::string& what) {
  Matrix hc = h * cov;
  Matrix s = hc * h.transpose();
  s = 0.5 * (s + s.transpose());
  s.diagonal().array() += variance;
  auto factor = cholesky_with_jitter(s);
  if (!factor)
    throw NumericalError(what + ": H C Hᵀ + C_nn is not positive definite after jitter");
  factor->lower.triangularView<Eigen::Lower>().solveInPlace(hc);
  Projection p;
  p.trace = cov.trace() - hc.squaredNorm();
  p.w = std::move(hc);
  p.factor = std::move(*factor);
  return p;
}

}  // namespace

PosteriorModel::PosteriorModel(const GmmPrior& prior, const MultiplexSystem& sys,
                               const NoiseSpec& noise) {
  check_dims(prior, sys, noise);
  dim_ = prior.dim();
  const std::size_t kk = prior.size();
  components_.resize(kk);
  auto covs = std::make_shared<std::vector<Matrix>>(kk);
  std::vector<double> traces(kk);

  parallel_for(kk, [&](std::size_t k) {
    const auto& c = prior.component(k);
    Projection p = project(sys.h(), c.covariance, noise.variance_e2,
                           "posterior component " + std::to_string(k));
    Component& out = components_[k];
    out.log_weight = std::log(c.weight);
    out.mean = c.mean;
    out.projected_mean = sys.h() * c.mean;
    out.lower = std::move(p.factor.lower);
    out.log_det = p.factor.log_det;
    Matrix post = c.covariance - p.w.transpose() * p.w;
    (*covs)[k] = 0.5 * (post + post.transpose());
    out.w = std::move(p.w);
    traces[k] = p.trace;
  });

  double lb = 0.0;
  for (std::size_t k = 0; k < kk; ++k) lb += prior.component(k).weight * traces[k];
  lower_bound_ = lb;
  covariances_ = std::move(covs);
}

void PosteriorModel::evaluate(const Vector& y, std::vector<Vector>& means,
                              std::vector<double>& log_weights) const {
  if (static_cast<std::size_t>(y.size()) != dim_)
    throw DimensionMismatch("observation has dimension " + std::to_string(y.size()) +
                            ", expected " + std::to_string(dim_));
  const double log2pi_n = static_cast<double>(dim_) * std::log(2.0 * std::numbers::pi);
  const std::size_t kk = components_.size();
  means.resize(kk);
  log_weights.resize(kk);
  for (std::size_t k = 0; k < kk; ++k) {
    const Component& c = components_[k];
    Vector z = y - c.projected_mean;
    c.lower.triangularView<Eigen::Lower>().solveInPlace(z);
    log_weights[k] = -0.5 * (log2pi_n + c.log_det + z.squaredNorm());
    means[k].noalias() = c.mean + c.w.transpose() * z;
  }
}

PosteriorMixture PosteriorModel::posterior(const Vector& y) const {
  PosteriorMixture out;
  std::vector<double> loglik;
  evaluate(y, out.means, loglik);
  std::vector<double> joint(loglik.size());
  for (std::size_t k = 0; k < joint.size(); ++k) joint[k] = components_[k].log_weight + loglik[k];
  const double norm = log_sum_exp(joint);
  out.weights.resize(joint.size());
  for (std::size_t k = 0; k < joint.size(); ++k) out.weights[k] = std::exp(joint[k] - norm);
  out.obs_log_likelihood = std::move(loglik);
  out.covariances = covariances_;
  return out;
}

Vector PosteriorModel::estimate(const Vector& y) const {
  std::vector<Vector> means;
  std::vector<double> loglik;
  evaluate(y, means, loglik);
  for (std::size_t k = 0; k < loglik.size(); ++k) loglik[k] += components_[k].log_weight;
  const double norm = log_sum_exp(loglik);
  Vector x = Vector::Zero(static_cast<Eigen::Index>(dim_));
  for (std::size_t k = 0; k < loglik.size(); ++k) x += std::exp(loglik[k] - norm) * means[k];
  return x;
}

PosteriorMixture posterior(const GmmPrior& prior, const MultiplexSystem& sys,
                           const NoiseSpec& noise, const Vector& y) {
  return PosteriorModel(prior, sys, noise).posterior(y);
}

Vector mmse_estimate(const GmmPrior& prior, const MultiplexSystem& sys, const NoiseSpec& noise,
                     const Vector& y) {
  return PosteriorModel(prior, sys, noise).estimate(y);
}

double mmse_lower_bound(const GmmPrior& prior, const MultiplexSystem& sys, const NoiseSpec& noise) {
  check_dims(prior, sys, noise);
  std::vector<double> traces(prior.size());
  parallel_for(prior.size(), [&](std::size_t k) {
    traces[k] = project(sys.h(), prior.component(k).covariance, noise.variance_e2,
                        "lower bound component " + std::to_string(k))
                    .trace;
  });
  double lb = 0.0;
  for (std::size_t k = 0; k < prior.size(); ++k) lb += prior.component(k).weight * traces[k];
  return lb;
}

double lmmse(const GmmPrior& prior, const MultiplexSystem& sys, const NoiseSpec& noise) {
  check_dims(prior, sys, noise);
  return project(sys.h(), prior.aggregate_covariance(), noise.variance_e2, "lmmse").trace;
}

MonteCarloResult mmse_monte_carlo(const GmmPrior& prior, const MultiplexSystem& sys,
                                  const NoiseSpec& noise, std::size_t trials, std::uint64_t seed) {
  if (trials < 2) throw InvalidArgument("mmse_monte_carlo: need at least 2 trials");
  const PosteriorModel model(prior, sys, noise);
  const auto n = static_cast<Eigen::Index>(prior.dim());
  const double sigma = std::sqrt(noise.variance_e2);
  std::vector<double> weights(prior.size());
  for (std::size_t k = 0; k < prior.size(); ++k) weights[k] = prior.component(k).weight;

  std::vector<double> err(trials), inter(trials);
  parallel_for(trials, [&](std::size_t t) {
    Rng rng = substream(seed, t);
    std::uniform_real_distribution<double> uniform(0.0, 1.0);
    std::normal_distribution<double> normal(0.0, 1.0);
    const double u = uniform(rng);
    std::size_t k = 0;
    double cum = weights[0];
    while (k + 1 < weights.size() && u >= cum) cum += weights[++k];
    Vector z(n), noise_draw(n);
    for (Eigen::Index i = 0; i < n; ++i) z[i] = normal(rng);
    for (Eigen::Index i = 0; i < n; ++i) noise_draw[i] = sigma * normal(rng);
    const Vector x = prior.component(k).mean + prior.chol(k) * z;
    const Vector y = sys.h() * x + noise_draw;

    std::vector<Vector> means;
    std::vector<double> logw;
    model.evaluate(y, means, logw);
    for (std::size_t j = 0; j < logw.size(); ++j) logw[j] += std::log(weights[j]);
    const double norm = log_sum_exp(logw);
    Vector x_hat = Vector::Zero(n);
    for (std::size_t j = 0; j < logw.size(); ++j) x_hat += std::exp(logw[j] - norm) * means[j];
    err[t] = (x - x_hat).squaredNorm();
    inter[t] = (x_hat - means[k]).squaredNorm();
  });

  auto mean_and_se = [&](const std::vector<double>& v) {
    double sum = 0.0;
    for (double e : v) sum += e;
    const double mean = sum / static_cast<double>(v.size());
    double ss = 0.0;
    for (double e : v) ss += (e - mean) * (e - mean);
    const double var = ss / static_cast<double>(v.size() - 1);
    return std::pair{mean, std::sqrt(var / static_cast<double>(v.size()))};
  };
  MonteCarloResult r;
  std::tie(r.estimate, r.std_error) = mean_and_se(err);
  std::tie(r.inter, r.inter_std_error) = mean_and_se(inter);
  r.trials = trials;
  r.intra = model.lower_bound();
  return r;
}

MmseReport mmse_report(const GmmPrior& prior, const MultiplexSystem& sys, const NoiseSpec& noise,
                       std::optional<std::size_t> mc_trials, std::uint64_t seed) {
  MmseReport r;
  r.lower_bound = mmse_lower_bound(prior, sys, noise);
  r.lmmse = lmmse(prior, sys, noise);
  if (mc_trials) r.monte_carlo = mmse_monte_carlo(prior, sys, noise, *mc_trials, seed);
  return r;
}

double mse_no_prior(const MultiplexSystem& sys, const NoiseSpec& noise) {
  if (!(noise.variance_e2 > 0.0)) throw InvalidArgument("noise variance must be positive");
  const Eigen::BDCSVD<Matrix> svd(sys.h());
  const Vector& s = svd.singularValues();
  const double smax = s.maxCoeff();
  const double smin = s.minCoeff();
  const double cond = smin > 0.0 ? smax / smin : std::numeric_limits<double>::infinity();
  if (!(cond < kMaxCondition))
    throw NotInvertible("system '" + sys.label() + "' is not invertible (condition number " +
                            format_real(cond) + ")",
                        cond);
  return noise.variance_e2 * s.array().square().inverse().sum();
}

double snr_gain(double mmse_ref, double mmse_sys) {
  if (!(mmse_ref > 0.0) || !(mmse_sys > 0.0))
    throw InvalidArgument("snr_gain: both errors must be positive");
  return 10.0 * std::log10(mmse_ref / mmse_sys);
}

std::string_view method_tag(MmseMethod method) {
  switch (method) {
    case MmseMethod::kBound: return "bound";
    case MmseMethod::kMonteCarlo: return "monte-carlo";
    case MmseMethod::kNoPrior: return "no-prior";
  }
  return "unknown";
}

std::string format_real(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void write_gain_csv(const GainCurve& curve, std::ostream& out) {
  out << kGainCsvHeader << '\n';
  for (const auto& r : curve.rows)
    out << format_real(r.lux) << ',' << format_real(r.j) << ',' << format_real(r.j_over_sigma_r2)
        << ',' << format_real(r.mmse_ref) << ',' << format_real(r.mmse_sys) << ','
        << format_real(r.gain_db) << ',' << method_tag(r.method) << '\n';
}

}  // namespace cigauge
