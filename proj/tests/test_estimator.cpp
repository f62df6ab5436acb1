#include <doctest.h>

#include <cmath>
#include <sstream>

#include "cigauge/errors.hpp"
#include "cigauge/estimator.hpp"
#include "helpers.hpp"
#include "oracles.hpp"

using namespace cigauge;
using testing::random_prior;
using testing::random_system;
using testing::scalar_prior;

namespace {

MultiplexSystem scalar_system(double h) { return MultiplexSystem(Matrix::Constant(1, 1, h), "scalar"); }

// p = (0.3, 0.7), means (−2, 1), variances (1, 4), H = 2, noise variance 3.
GmmPrior hand_prior() { return scalar_prior({0.3, 0.7}, {-2.0, 1.0}, {1.0, 4.0}); }

// Scalar arithmetic on the instance above at y = 1, 30 digits.
constexpr double kHandAlpha0 = 0.108376571590820242387097741923;
constexpr double kHandMean0 = -4.0 / 7.0;
constexpr double kHandMean1 = 11.0 / 19.0;
constexpr double kHandLogF0 = -3.67760789344661510861872039384;
constexpr double kHandLogF1 = -2.41747381226157718231115924182;
constexpr double kHandEstimate = 0.454273568019582728682511620193;
constexpr double kHandLowerBound = 0.570676691729323308270676691729;
constexpr double kHandLmmse = 0.652003484320557491289198606272;

}  // namespace

TEST_CASE("hand oracle agrees with its frozen values") {
  const oracle::Scalar s{{0.3, 0.7}, {-2.0, 1.0}, {1.0, 4.0}, 2.0, 3.0};
  CHECK(s.estimate(1.0) == doctest::Approx(kHandEstimate).epsilon(1e-14));
}

TEST_CASE("posterior of the scalar two-component instance") {
  const auto post = posterior(hand_prior(), scalar_system(2.0), NoiseSpec::from_variance(3.0),
                              Vector::Constant(1, 1.0));
  REQUIRE(post.weights.size() == 2);
  CHECK(post.weights[0] == doctest::Approx(kHandAlpha0).epsilon(1e-13));
  CHECK(post.weights[1] == doctest::Approx(1.0 - kHandAlpha0).epsilon(1e-13));
  CHECK(post.means[0][0] == doctest::Approx(kHandMean0).epsilon(1e-14));
  CHECK(post.means[1][0] == doctest::Approx(kHandMean1).epsilon(1e-14));
  CHECK(post.obs_log_likelihood[0] == doctest::Approx(kHandLogF0).epsilon(1e-14));
  CHECK(post.obs_log_likelihood[1] == doctest::Approx(kHandLogF1).epsilon(1e-14));
  CHECK((*post.covariances)[0](0, 0) == doctest::Approx(3.0 / 7.0).epsilon(1e-14));
  CHECK((*post.covariances)[1](0, 0) == doctest::Approx(12.0 / 19.0).epsilon(1e-14));

  const Vector x = mmse_estimate(hand_prior(), scalar_system(2.0), NoiseSpec::from_variance(3.0),
                                 Vector::Constant(1, 1.0));
  CHECK(x[0] == doctest::Approx(kHandEstimate).epsilon(1e-13));
  CHECK(mmse_lower_bound(hand_prior(), scalar_system(2.0), NoiseSpec::from_variance(3.0)) ==
        doctest::Approx(kHandLowerBound).epsilon(1e-14));
  CHECK(lmmse(hand_prior(), scalar_system(2.0), NoiseSpec::from_variance(3.0)) ==
        doctest::Approx(kHandLmmse).epsilon(1e-13));
}

TEST_CASE("posterior with a single component") {
  const auto prior = random_prior(4, 1, 3);
  const auto sys = random_system(4, 5);
  const auto noise = NoiseSpec::from_variance(0.7);
  const Vector y = Vector::LinSpaced(4, -1.0, 2.0);
  const auto post = posterior(prior, sys, noise, y);
  CHECK(post.weights[0] == 1.0);
  const auto& c = prior.component(0);
  const Vector expected = oracle::conditional_mean(c.mean, c.covariance, sys.h(), 0.7, y);
  CHECK((post.means[0] - expected).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("symmetric components split evenly at the midpoint") {
  const auto post = posterior(scalar_prior({0.5, 0.5}, {-2.0, 2.0}, {1.0, 1.0}), impulse(1),
                              NoiseSpec::from_variance(0.5), Vector::Zero(1));
  CHECK(post.weights[0] == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(post.weights[1] == doctest::Approx(0.5).epsilon(1e-15));
}

TEST_CASE("posterior weights normalize and covariances stay PSD") {
  for (int t = 0; t < 20; ++t) {
    const int n = 2 + t % 6;
    const auto prior = random_prior(n, 1 + t % 5, 40 + t);
    const auto sys = random_system(n, 90 + t);
    const PosteriorModel model(prior, sys, NoiseSpec::from_variance(0.1 + 0.3 * t));
    const auto post = model.posterior(Vector::Constant(n, 0.3 * t));
    double sum = 0.0;
    for (double w : post.weights) {
      CHECK(w >= 0.0);
      sum += w;
    }
    CHECK(std::abs(sum - 1.0) < 1e-10);
    for (const auto& c : model.posterior_covariances()) {
      Eigen::SelfAdjointEigenSolver<Matrix> es(c);
      CHECK(es.eigenvalues().minCoeff() > -1e-9);
    }
  }
}

TEST_CASE("log-sum-exp is shift invariant") {
  const std::vector<double> a{-3.0, 0.5, 2.25};
  for (double shift : {-800.0, 0.0, 700.0}) {
    std::vector<double> b = a;
    for (auto& v : b) v += shift;
    const double la = log_sum_exp(a);
    const double lb = log_sum_exp(b);
    for (std::size_t i = 0; i < a.size(); ++i)
      CHECK(std::exp(b[i] - lb) == doctest::Approx(std::exp(a[i] - la)).epsilon(1e-12));
  }
}

TEST_CASE("mmse_estimate limits") {
  const auto unit = scalar_prior({1.0}, {0.0}, {1.0});
  CHECK(mmse_estimate(unit, impulse(1), NoiseSpec::from_variance(1.0), Vector::Constant(1, 2.0))[0] ==
        doctest::Approx(1.0).epsilon(1e-15));

  const auto prior = random_prior(5, 3, 8);
  const Vector y = Vector::LinSpaced(5, 1.0, 3.0);
  const Vector x = mmse_estimate(prior, impulse(5), NoiseSpec::from_variance(1e-8), y);
  CHECK((x - y).cwiseAbs().maxCoeff() < 1e-4);
}

TEST_CASE("lower bound basics") {
  const auto unit = scalar_prior({1.0}, {0.0}, {1.0});
  CHECK(mmse_lower_bound(unit, impulse(1), NoiseSpec::from_variance(1.0)) ==
        doctest::Approx(0.5).epsilon(1e-15));

  const auto prior = random_prior(4, 3, 12);
  double trace = 0.0;
  for (const auto& c : prior.components()) trace += c.weight * c.covariance.trace();
  CHECK(mmse_lower_bound(prior, scaled_identity(4, 1e6), NoiseSpec::from_variance(1.0)) <
        1e-9 * trace);

  CHECK_THROWS_AS(mmse_lower_bound(prior, impulse(5), NoiseSpec::from_variance(1.0)),
                  DimensionMismatch);
}

TEST_CASE("K=1: bound, lmmse and Monte-Carlo coincide") {
  const auto prior = random_prior(6, 1, 21);
  const auto sys = box_exposure(6, 2);
  const auto noise = NoiseSpec::from_variance(0.4);
  const double lb = mmse_lower_bound(prior, sys, noise);
  CHECK(lmmse(prior, sys, noise) == doctest::Approx(lb).epsilon(1e-12));
  const auto mc = mmse_monte_carlo(prior, sys, noise, 20000, 3);
  CHECK(std::abs(mc.estimate - lb) <= 3.0 * mc.std_error);
  CHECK(std::abs(mc.inter) <= 3.0 * mc.inter_std_error + 1e-20);
  CHECK(mc.intra == doctest::Approx(lb).epsilon(1e-12));
}

TEST_CASE("lmmse upper-bounds the lower bound") {
  for (int t = 0; t < 100; ++t) {
    const int n = 1 + t % 6;
    const auto prior = random_prior(n, 1 + t % 4, 500 + t);
    const auto sys = random_system(n, 700 + t);
    const auto noise = NoiseSpec::from_variance(0.05 + 0.1 * t);
    const double lb = mmse_lower_bound(prior, sys, noise);
    CHECK(lb <= lmmse(prior, sys, noise) + 1e-9 * std::max(1.0, lb));
  }
}

TEST_CASE("Monte-Carlo matches quadrature on the scalar instance") {
  const oracle::Scalar s{{0.3, 0.7}, {-2.0, 1.0}, {1.0, 4.0}, 2.0, 3.0};
  const double expected = s.quadrature_mmse();
  const auto mc = mmse_monte_carlo(hand_prior(), scalar_system(2.0), NoiseSpec::from_variance(3.0),
                                   100000, 17);
  CHECK(std::abs(mc.estimate - expected) <= 0.02 * expected);
  CHECK(kHandLowerBound <= expected);
  CHECK(expected <= kHandLmmse);
}

TEST_CASE("Monte-Carlo argument checks and reproducibility") {
  CHECK_THROWS_AS(mmse_monte_carlo(hand_prior(), scalar_system(2.0), NoiseSpec::from_variance(3.0), 1, 1),
                  InvalidArgument);
  const auto a = mmse_monte_carlo(hand_prior(), scalar_system(2.0), NoiseSpec::from_variance(3.0), 500, 9);
  const auto b = mmse_monte_carlo(hand_prior(), scalar_system(2.0), NoiseSpec::from_variance(3.0), 500, 9);
  CHECK(a.estimate == b.estimate);
  CHECK(a.inter == b.inter);
}

TEST_CASE("mmse_report bundles the three numbers") {
  const auto r = mmse_report(hand_prior(), scalar_system(2.0), NoiseSpec::from_variance(3.0), 2000, 1);
  CHECK(r.lower_bound == doctest::Approx(kHandLowerBound));
  CHECK(r.lmmse == doctest::Approx(kHandLmmse));
  REQUIRE(r.monte_carlo.has_value());
  CHECK(std::abs(r.monte_carlo->intra - r.lower_bound) < 1e-9);
  CHECK_FALSE(mmse_report(hand_prior(), scalar_system(2.0), NoiseSpec::from_variance(3.0)).monte_carlo);
}

TEST_CASE("mse_no_prior") {
  CHECK(mse_no_prior(impulse(7), NoiseSpec::from_variance(2.0)) == doctest::Approx(14.0).epsilon(1e-14));
  CHECK(mse_no_prior(scaled_identity(7, 3.0), NoiseSpec::from_variance(2.0)) ==
        doctest::Approx(14.0 / 9.0).epsilon(1e-14));
  const std::vector<double> box{1.0, 1.0, 1.0};
  CHECK(mse_no_prior(box_exposure(8, 3), NoiseSpec::from_variance(1.0)) ==
        doctest::Approx(oracle::dft_no_prior_mse(box, 8, 1.0)).epsilon(1e-12));
  // A length-2 box zeroes the Nyquist frequency of an even-length circulant.
  CHECK_THROWS_AS(mse_no_prior(box_exposure(8, 2), NoiseSpec::from_variance(1.0)), NotInvertible);
  try {
    mse_no_prior(box_exposure(8, 2), NoiseSpec::from_variance(1.0));
  } catch (const NotInvertible& e) {
    CHECK(e.condition() >= kMaxCondition);
  }
}

TEST_CASE("snr_gain") {
  CHECK(snr_gain(2.0, 1.0) == doctest::Approx(3.0102999566398120).epsilon(1e-15));
  CHECK(snr_gain(5.0, 5.0) == 0.0);
  CHECK(snr_gain(1.0, 2.0) == doctest::Approx(-3.0102999566398120).epsilon(1e-15));
  CHECK_THROWS_AS(snr_gain(0.0, 1.0), InvalidArgument);
  CHECK_THROWS_AS(snr_gain(1.0, -1.0), InvalidArgument);
}

TEST_CASE("gain CSV layout") {
  GainCurve curve{"box:3", {{0.5, 0.25, 0.015625, 2.0, 1.0, snr_gain(2.0, 1.0), MmseMethod::kBound},
                            {1.0, 0.5, 0.03125, 1.0, 1.0, 0.0, MmseMethod::kMonteCarlo}}};
  std::ostringstream out;
  write_gain_csv(curve, out);
  CHECK(out.str() ==
        "lux,j,j_over_sigma_r2,mmse_ref,mmse_sys,gain_db,method\n"
        "0.5,0.25,0.015625,2,1,3.0102999566398121,bound\n"
        "1,0.5,0.03125,1,1,0,monte-carlo\n");
  CHECK(format_real(0.1) == "0.10000000000000001");
}

TEST_CASE("bound gets tighter as noise falls") {
  // n = 16 box-blur family, K = 5 prior, three decades of noise variance.
  const auto prior = random_prior(16, 5, 2718, 3.0, 1.0);
  const std::vector<double> variances{10.0, 5.0, 2.0, 1.0, 0.5, 0.2, 0.1, 0.05, 0.02, 0.01};
  std::vector<double> decade_gap(3, 0.0);
  std::vector<int> decade_count(3, 0);
  for (std::size_t len : {2u, 3u, 5u}) {
    const auto sys = box_exposure(16, len);
    for (std::size_t i = 0; i < variances.size(); ++i) {
      const auto noise = NoiseSpec::from_variance(variances[i]);
      const auto mc = mmse_monte_carlo(prior, sys, noise, 4000, 5 + i);
      // estimate − intra has expectation inter; the inter mean is the
      // lower-variance estimate of the same gap.
      const double gap = mc.inter / (mc.intra + mc.inter);
      const int d = std::min(2, static_cast<int>(std::floor(-std::log10(variances[i]) + 1.0 + 1e-9)));
      decade_gap[d] += gap;
      ++decade_count[d];
    }
  }
  for (int d = 0; d < 3; ++d) decade_gap[d] /= decade_count[d];
  CHECK(decade_gap[0] > decade_gap[1]);
  CHECK(decade_gap[1] > decade_gap[2]);
}
