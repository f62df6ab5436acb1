#include "cigauge/gmm_prior.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <limits>
#include <numbers>
#include <numeric>
#include <string>

#include "cigauge/errors.hpp"
#include "cigauge/parallel.hpp"

namespace cigauge {
namespace {

constexpr std::size_t kSeedSubsample = 10000;
constexpr std::size_t kEStepChunk = 256;
constexpr double kAbsoluteLoad = 1e-10;
constexpr double kCollapsedMass = 1e-6;
// Responsibilities below e^-460 (~1e-200) are stored as zero; left alone
// they turn into subnormals that slow the M-step products by orders of
// magnitude.
constexpr double kMinLogResponsibility = -460.0;

std::size_t pick_categorical(std::span<const double> weights, double u) {
  double cum = 0.0;
  for (std::size_t k = 0; k < weights.size(); ++k) {
    cum += weights[k];
    if (u < cum) return k;
  }
  return weights.size() - 1;
}

double ridge_load(const Matrix& cov, double reg_scale) {
  return reg_scale * cov.trace() / static_cast<double>(cov.rows()) + kAbsoluteLoad;
}

}  // namespace

GmmPrior::GmmPrior(std::vector<GaussianComponent> components)
    : components_(std::move(components)) {
  if (components_.empty()) throw InvalidArgument("GMM prior needs at least one component");
  dim_ = static_cast<std::size_t>(components_.front().mean.size());
  if (dim_ == 0) throw InvalidArgument("GMM prior dimension must be positive");

  double weight_sum = 0.0;
  for (std::size_t k = 0; k < components_.size(); ++k) {
    const auto& c = components_[k];
    const std::string tag = "component " + std::to_string(k);
    if (!(c.weight > 0.0) || !std::isfinite(c.weight))
      throw InvalidArgument(tag + ": weight must be strictly positive");
    weight_sum += c.weight;
    if (static_cast<std::size_t>(c.mean.size()) != dim_ ||
        static_cast<std::size_t>(c.covariance.rows()) != dim_ ||
        static_cast<std::size_t>(c.covariance.cols()) != dim_)
      throw DimensionMismatch(tag + ": mean/covariance dimension differs from " +
                              std::to_string(dim_));
    if (!c.mean.allFinite() || !c.covariance.allFinite())
      throw InvalidArgument(tag + ": non-finite parameters");
    const double peak = c.covariance.cwiseAbs().maxCoeff();
    const double asym = (c.covariance - c.covariance.transpose()).cwiseAbs().maxCoeff();
    if (asym > 1e-9 * peak) throw InvalidArgument(tag + ": covariance is not symmetric");
    auto factor = cholesky_with_jitter(c.covariance);
    if (!factor) throw InvalidArgument(tag + ": covariance is not positive definite");
    factors_.push_back(std::move(*factor));
  }
  if (std::abs(weight_sum - 1.0) > 1e-12)
    throw InvalidArgument("GMM weights must sum to 1 (got " + std::to_string(weight_sum) + ")");
}

Vector GmmPrior::aggregate_mean() const {
  Vector u = Vector::Zero(static_cast<Eigen::Index>(dim_));
  for (const auto& c : components_) u += c.weight * c.mean;
  return u;
}

Matrix GmmPrior::aggregate_covariance() const {
  const Vector u = aggregate_mean();
  const auto n = static_cast<Eigen::Index>(dim_);
  Matrix cov = Matrix::Zero(n, n);
  for (const auto& c : components_) {
    const Vector d = c.mean - u;
    cov += c.weight * (c.covariance + d * d.transpose());
  }
  return cov;
}

double GmmPrior::mean_level() const { return aggregate_mean().mean(); }

GmmPrior GmmPrior::scaled(double factor) const {
  if (!(factor > 0.0) || !std::isfinite(factor))
    throw InvalidArgument("prior scale factor must be positive");
  std::vector<GaussianComponent> out;
  out.reserve(components_.size());
  for (const auto& c : components_)
    out.push_back({c.weight, factor * c.mean, (factor * factor) * c.covariance});
  return GmmPrior(std::move(out));
}

bool operator==(const GmmPrior& a, const GmmPrior& b) {
  if (a.dim_ != b.dim_ || a.size() != b.size()) return false;
  for (std::size_t k = 0; k < a.size(); ++k) {
    const auto& x = a.components_[k];
    const auto& y = b.components_[k];
    if (x.weight != y.weight || x.mean != y.mean || x.covariance != y.covariance) return false;
  }
  return true;
}

double log_density(const GmmPrior& prior, const Vector& x) {
  if (static_cast<std::size_t>(x.size()) != prior.dim())
    throw InvalidArgument("log_density: x has dimension " + std::to_string(x.size()) +
                          ", prior has " + std::to_string(prior.dim()));
  std::vector<double> terms(prior.size());
  for (std::size_t k = 0; k < prior.size(); ++k) {
    const auto& c = prior.component(k);
    terms[k] = std::log(c.weight) +
               gaussian_log_density(x, c.mean, prior.chol(k), prior.log_det(k));
  }
  return log_sum_exp(terms);
}

Matrix sample(const GmmPrior& prior, Rng& rng, std::size_t count,
              std::vector<std::size_t>* components) {
  if (count == 0) throw InvalidArgument("sample: count must be at least 1");
  std::vector<double> weights(prior.size());
  for (std::size_t k = 0; k < prior.size(); ++k) weights[k] = prior.component(k).weight;

  const auto n = static_cast<Eigen::Index>(prior.dim());
  Matrix out(n, static_cast<Eigen::Index>(count));
  if (components) components->assign(count, 0);
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);
  Vector z(n);
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t k = pick_categorical(weights, uniform(rng));
    for (Eigen::Index j = 0; j < n; ++j) z[j] = normal(rng);
    out.col(static_cast<Eigen::Index>(i)) = prior.component(k).mean + prior.chol(k) * z;
    if (components) (*components)[i] = k;
  }
  return out;
}

// ---------------------------------------------------------------------------
// EM

namespace {

struct EmState {
  std::vector<double> weights;
  std::vector<Vector> means;
  std::vector<Matrix> covariances;
  std::vector<CholeskyFactor> factors;
};

std::vector<Vector> seed_means(const Matrix& x, std::size_t k, std::uint64_t seed) {
  const auto total = static_cast<std::size_t>(x.cols());
  std::vector<std::size_t> pool(total);
  std::iota(pool.begin(), pool.end(), std::size_t{0});
  Rng rng = substream(seed, 0);
  if (total > kSeedSubsample) {
    std::shuffle(pool.begin(), pool.end(), rng);
    pool.resize(kSeedSubsample);
    std::sort(pool.begin(), pool.end());
  }

  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  std::vector<Vector> centers;
  centers.reserve(k);
  auto pick_uniform = [&] {
    auto i = static_cast<std::size_t>(uniform(rng) * static_cast<double>(pool.size()));
    return pool[std::min(i, pool.size() - 1)];
  };
  centers.push_back(x.col(static_cast<Eigen::Index>(pick_uniform())));

  std::vector<double> d2(pool.size(), std::numeric_limits<double>::infinity());
  while (centers.size() < k) {
    double total_d2 = 0.0;
    for (std::size_t i = 0; i < pool.size(); ++i) {
      d2[i] = std::min(d2[i],
                       (x.col(static_cast<Eigen::Index>(pool[i])) - centers.back()).squaredNorm());
      total_d2 += d2[i];
    }
    std::size_t chosen;
    if (!(total_d2 > 0.0)) {
      chosen = pick_uniform();
    } else {
      const double target = uniform(rng) * total_d2;
      double cum = 0.0;
      std::size_t i = 0;
      for (; i + 1 < pool.size(); ++i) {
        cum += d2[i];
        if (target < cum) break;
      }
      chosen = pool[i];
    }
    centers.push_back(x.col(static_cast<Eigen::Index>(chosen)));
  }
  return centers;
}

// Σ_k tr(C_k⁻¹) through the Cholesky factors.
double inverse_trace_sum(const EmState& s) {
  double total = 0.0;
  for (const auto& f : s.factors) {
    const auto n = f.lower.rows();
    const Matrix inv = f.lower.triangularView<Eigen::Lower>().solve(Matrix::Identity(n, n));
    total += inv.squaredNorm();
  }
  return total;
}

// Fills `resp` (K × M) with responsibilities and returns Σ log p(x_i).
double e_step(const Matrix& x, const EmState& s, Matrix& resp) {
  const auto n = x.rows();
  const auto m = x.cols();
  const auto kk = static_cast<Eigen::Index>(s.weights.size());
  const double log2pi_n = static_cast<double>(n) * std::log(2.0 * std::numbers::pi);
  resp.resize(kk, m);
  std::vector<double> column_ll(static_cast<std::size_t>(m));

  const std::size_t chunks = (static_cast<std::size_t>(m) + kEStepChunk - 1) / kEStepChunk;
  parallel_for(chunks, [&](std::size_t chunk) {
    const auto begin = static_cast<Eigen::Index>(chunk * kEStepChunk);
    const auto width = std::min<Eigen::Index>(static_cast<Eigen::Index>(kEStepChunk), m - begin);
    Matrix logp(kk, width);
    for (Eigen::Index k = 0; k < kk; ++k) {
      const auto ku = static_cast<std::size_t>(k);
      Matrix d = x.middleCols(begin, width).colwise() - s.means[ku];
      s.factors[ku].lower.triangularView<Eigen::Lower>().solveInPlace(d);
      const double offset = std::log(s.weights[ku]) - 0.5 * (log2pi_n + s.factors[ku].log_det);
      logp.row(k) = (offset - 0.5 * d.colwise().squaredNorm().array()).matrix();
    }
    for (Eigen::Index j = 0; j < width; ++j) {
      const double peak = logp.col(j).maxCoeff();
      const double lse = peak + std::log((logp.col(j).array() - peak).exp().sum());
      resp.col(begin + j) = (logp.col(j).array() - lse)
                                .unaryExpr([](double v) { return v < kMinLogResponsibility ? 0.0 : std::exp(v); })
                                .matrix();
      column_ll[static_cast<std::size_t>(begin + j)] = lse;
    }
  });

  double ll = 0.0;
  for (double v : column_ll) ll += v;
  return ll;
}

// MAP step under the penalty −½·ridge·Σ_k tr(C_k⁻¹): the sample
// covariance of component k gains ridge/N_k on its diagonal.
void m_step(const Matrix& x, const Matrix& resp, const Matrix& fallback_cov,
            double ridge, EmState& s) {
  const std::size_t kk = s.weights.size();
  const double m = static_cast<double>(x.cols());
  std::vector<double> mass(kk);
  parallel_for(kk, [&](std::size_t k) {
    const auto ki = static_cast<Eigen::Index>(k);
    const Vector r = resp.row(ki).transpose();
    double nk = 0.0;
    for (Eigen::Index i = 0; i < r.size(); ++i) nk += r[i];
    mass[k] = nk;
    Matrix cov;
    if (nk > kCollapsedMass) {
      s.means[k] = (x * r) / nk;
      const Matrix centered = x.colwise() - s.means[k];
      cov = (centered * r.asDiagonal()) * centered.transpose() / nk;
      cov = 0.5 * (cov + cov.transpose());
      cov.diagonal().array() += ridge / nk;
    } else {
      cov = fallback_cov;
    }
    auto factor = cholesky_with_jitter(cov);
    if (!factor) {
      cov = fallback_cov;
      factor = cholesky_with_jitter(cov);
    }
    s.covariances[k] = std::move(cov);
    s.factors[k] = std::move(*factor);
  });

  double total = 0.0;
  for (std::size_t k = 0; k < kk; ++k) {
    s.weights[k] = std::max(mass[k], kCollapsedMass) / m;
    total += s.weights[k];
  }
  for (auto& w : s.weights) w /= total;
}

}  // namespace

EmResult fit_em(const Matrix& patches, const EmConfig& cfg) {
  if (patches.cols() == 0 || patches.rows() == 0)
    throw InvalidArgument("fit_em: no training patches");
  if (cfg.k < 1) throw InvalidArgument("fit_em: k must be at least 1");
  if (cfg.k > static_cast<std::size_t>(patches.cols()))
    throw InvalidArgument("fit_em: k exceeds the number of patches");
  if (cfg.max_iters < 1) throw InvalidArgument("fit_em: max_iters must be at least 1");
  if (!(cfg.rel_tol > 0.0)) throw InvalidArgument("fit_em: rel_tol must be positive");
  if (!(cfg.reg_scale >= 0.0)) throw InvalidArgument("fit_em: reg_scale must be non-negative");
  if (!patches.allFinite()) throw InvalidArgument("fit_em: non-finite patch values");

  const double m = static_cast<double>(patches.cols());
  const Vector global_mean = patches.rowwise().sum() / m;
  const Matrix centered = patches.colwise() - global_mean;
  const Matrix sample_cov = centered * centered.transpose() / m;
  const double load = ridge_load(sample_cov, cfg.reg_scale);
  Matrix global_cov = 0.5 * (sample_cov + sample_cov.transpose());
  global_cov.diagonal().array() += load;
  if (!cholesky_with_jitter(global_cov))
    throw NumericalError("fit_em: global sample covariance is not factorizable");

  EmState s;
  s.weights.assign(cfg.k, 1.0 / static_cast<double>(cfg.k));
  s.means = seed_means(patches, cfg.k, cfg.seed);
  s.covariances.assign(cfg.k, global_cov);
  s.factors.assign(cfg.k, *cholesky_with_jitter(global_cov));

  EmResult result{GmmPrior({{1.0, global_mean, global_cov}}), {}, 0, false};
  // With all mass in one component the MAP covariance is global_cov.
  const double ridge = m * load;
  Matrix resp;
  for (int iter = 0;; ++iter) {
    const double ll = e_step(patches, s, resp) - 0.5 * ridge * inverse_trace_sum(s);
    if (!std::isfinite(ll)) throw NumericalError("fit_em: log-likelihood is not finite");
    if (!result.log_likelihood.empty()) {
      const double prev = result.log_likelihood.back();
      if (std::abs(ll - prev) <= cfg.rel_tol * std::abs(ll)) result.converged = true;
    }
    result.log_likelihood.push_back(ll);
    if (result.converged || iter == cfg.max_iters) break;
    m_step(patches, resp, global_cov, ridge, s);
    result.iterations = iter + 1;
  }

  std::vector<GaussianComponent> comps;
  comps.reserve(cfg.k);
  for (std::size_t k = 0; k < cfg.k; ++k)
    comps.push_back({s.weights[k], s.means[k], s.covariances[k]});
  result.prior = GmmPrior(std::move(comps));
  return result;
}

// ---------------------------------------------------------------------------
// Serialization

namespace {

constexpr char kMagic[4] = {'G', 'M', 'M', 'P'};

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFFu));
}

void put_f64(std::string& out, double v) {
  const auto bits = std::bit_cast<std::uint64_t>(v);
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((bits >> (8 * i)) & 0xFFu));
}

class Reader {
 public:
  explicit Reader(const std::string& data) : data_(data) {}

  std::uint32_t u32(const char* what) {
    need(4, what);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i)
      v |= static_cast<std::uint32_t>(static_cast<unsigned char>(data_[pos_ + i])) << (8 * i);
    pos_ += 4;
    return v;
  }

  double f64(const char* what) {
    need(8, what);
    std::uint64_t bits = 0;
    for (int i = 0; i < 8; ++i)
      bits |= static_cast<std::uint64_t>(static_cast<unsigned char>(data_[pos_ + i])) << (8 * i);
    pos_ += 8;
    return std::bit_cast<double>(bits);
  }

  void need(std::size_t bytes, const char* what) const {
    if (data_.size() - pos_ < bytes)
      throw ParseError(ParseError::Kind::kTruncated,
                       std::string("prior file truncated while reading ") + what);
  }

  std::size_t remaining() const { return data_.size() - pos_; }

 private:
  const std::string& data_;
  std::size_t pos_ = 0;
};

}  // namespace

void save_prior(const GmmPrior& prior, const std::filesystem::path& path) {
  std::string out;
  const std::size_t n = prior.dim();
  out.reserve(16 + prior.size() * 8 * (1 + n + n * n));
  out.append(kMagic, 4);
  put_u32(out, kPriorFormatVersion);
  put_u32(out, static_cast<std::uint32_t>(n));
  put_u32(out, static_cast<std::uint32_t>(prior.size()));
  for (const auto& c : prior.components()) {
    put_f64(out, c.weight);
    for (std::size_t i = 0; i < n; ++i) put_f64(out, c.mean[static_cast<Eigen::Index>(i)]);
    for (std::size_t r = 0; r < n; ++r)
      for (std::size_t col = 0; col < n; ++col)
        put_f64(out, c.covariance(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(col)));
  }
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot open " + path.string() + " for writing");
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!f) throw IoError("failed writing " + path.string());
}

GmmPrior load_prior(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open prior file " + path.string());
  const std::string data((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());

  if (data.size() >= 4 && std::memcmp(data.data(), kMagic, 4) != 0)
    throw ParseError(ParseError::Kind::kBadMagic, "bad magic in " + path.string() +
                                                      " (expected \"GMMP\")");
  Reader in(data);
  in.need(4, "magic");
  in.u32("magic");
  const std::uint32_t version = in.u32("version");
  if (version != kPriorFormatVersion)
    throw ParseError(ParseError::Kind::kVersionMismatch,
                     "prior format version " + std::to_string(version) + " is not supported (expected " +
                         std::to_string(kPriorFormatVersion) + ")");
  const std::uint32_t dim = in.u32("dim");
  const std::uint32_t k = in.u32("component count");
  if (dim == 0 || k == 0)
    throw ParseError(ParseError::Kind::kMalformed, "prior header has zero dim or component count");
  const std::uint64_t per = 8ull * (1ull + dim + static_cast<std::uint64_t>(dim) * dim);
  if (per * k > in.remaining())
    throw ParseError(ParseError::Kind::kTruncated,
                     "prior file truncated: need " + std::to_string(per * k) + " payload bytes, have " +
                         std::to_string(in.remaining()));
  if (per * k < in.remaining())
    throw ParseError(ParseError::Kind::kMalformed, "trailing bytes after prior payload");

  const auto n = static_cast<Eigen::Index>(dim);
  std::vector<GaussianComponent> comps(k);
  for (auto& c : comps) {
    c.weight = in.f64("weight");
    c.mean.resize(n);
    for (Eigen::Index i = 0; i < n; ++i) c.mean[i] = in.f64("mean");
    c.covariance.resize(n, n);
    for (Eigen::Index r = 0; r < n; ++r)
      for (Eigen::Index col = 0; col < n; ++col) c.covariance(r, col) = in.f64("covariance");
  }
  try {
    return GmmPrior(std::move(comps));
  } catch (const std::invalid_argument& e) {
    throw ParseError(ParseError::Kind::kMalformed, std::string("invalid prior: ") + e.what());
  }
}

}  // namespace cigauge
