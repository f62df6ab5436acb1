#include <doctest.h>

#include <cmath>
#include <sstream>

#include "cigauge/errors.hpp"
#include "cigauge/sweep.hpp"
#include "helpers.hpp"

using namespace cigauge;

namespace {

OptimalityTable table_with(std::vector<std::size_t> best) {
  OptimalityTable t;
  for (std::size_t i = 0; i < best.size(); ++i) {
    OptimalityRow r;
    r.lux = std::pow(10.0, static_cast<double>(i));
    r.best_parameter = best[i];
    t.rows.push_back(r);
  }
  return t;
}

const GmmPrior& prior_4x4() {
  static const GmmPrior p = testing::desk_prior(4, 2, 4);
  return p;
}

const GmmPrior& prior_5x5() {
  static const GmmPrior p = testing::desk_prior(5, 3, 5);
  return p;
}

}  // namespace

TEST_CASE("log_space") {
  const auto v = log_space(0.01, 100.0, 5);
  REQUIRE(v.size() == 5);
  CHECK(v.front() == 0.01);
  CHECK(v.back() == 100.0);
  CHECK(v[2] == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(log_space(3.0, 9.0, 1) == std::vector<double>{3.0});
  CHECK_THROWS_AS(log_space(0.0, 1.0, 3), InvalidArgument);
}

TEST_CASE("scaled identity against impulse has a closed-form gain") {
  const CameraSpec cam = preset("slr");
  const auto lux = log_space(0.01, 1e4, 13);
  const std::vector<MultiplexSystem> systems{scaled_identity(16, 20.0)};
  MmseOptions opts;
  opts.method = MmseMethod::kNoPrior;
  const auto curves = gain_curve(systems, impulse(16), nullptr, cam, lux, opts);
  REQUIRE(curves.size() == 1);
  const double s2 = cam.read_noise_e * cam.read_noise_e;
  for (const auto& r : curves[0].rows) {
    const double expected = 10.0 * std::log10(400.0 * (s2 + r.j) / (s2 + 20.0 * r.j));
    CHECK(std::abs(r.gain_db - expected) < 1e-9);
    CHECK(r.j == doctest::Approx(photons_per_pixel(cam, r.lux)).epsilon(1e-15));
    CHECK(r.method == MmseMethod::kNoPrior);
  }
}

TEST_CASE("a system against itself gains nothing") {
  const std::vector<MultiplexSystem> systems{impulse(16)};
  const auto curves = gain_curve(systems, impulse(16), &prior_4x4(), preset("slr"), log_space(0.1, 100.0, 4));
  for (const auto& r : curves[0].rows) {
    CHECK(r.gain_db == 0.0);
    CHECK(r.gain_db == snr_gain(r.mmse_ref, r.mmse_sys));
  }
}

TEST_CASE("box exposure helps more in the dark") {
  const std::vector<MultiplexSystem> systems{box_exposure(16, 3)};
  const std::vector<LightLevel> levels{{0.0, 0.01 * 16.0}, {0.0, 100.0 * 16.0}};
  const auto curves = gain_curve(systems, impulse(16), &prior_4x4(), 4.0, levels);
  CHECK(curves[0].rows[0].gain_db > curves[0].rows[1].gain_db);
  CHECK(curves[0].rows[0].j_over_sigma_r2 == doctest::Approx(0.01));
}

TEST_CASE("gain_curve validates sizes") {
  const std::vector<MultiplexSystem> systems{impulse(9)};
  CHECK_THROWS_AS(gain_curve(systems, impulse(16), &prior_4x4(), preset("slr"), log_space(1, 10, 2)),
                  DimensionMismatch);
  const std::vector<MultiplexSystem> same{impulse(9)};
  CHECK_THROWS_AS(gain_curve(same, impulse(9), &prior_4x4(), preset("slr"), log_space(1, 10, 2)),
                  DimensionMismatch);
  CHECK_THROWS_AS(gain_curve(same, impulse(9), nullptr, preset("slr"), log_space(1, 10, 2)),
                  InvalidArgument);
}

TEST_CASE("optimal_parameter is an exhaustive argmin") {
  SweepSpec spec;
  spec.family = SweepFamily::kExposure;
  spec.grid = {1, 2, 3, 5, 8};
  spec.lux = log_space(0.01, 1e4, 7);
  spec.camera = preset("slr");
  spec.prior = &prior_4x4();
  const auto t = optimal_parameter(spec);
  REQUIRE(t.rows.size() == 7);
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    std::size_t best = 0;
    for (std::size_t g = 0; g < spec.grid.size(); ++g) {
      CHECK(t.rows[i].best_mmse <= t.mmse[i][g]);
      if (t.mmse[i][g] < t.mmse[i][best]) best = g;
      const double direct = system_mmse(spec.prior, box_exposure(16, spec.grid[g]), t.rows[i].j, 4.0, {});
      CHECK(t.mmse[i][g] == direct);
    }
    CHECK(t.rows[i].best_parameter == spec.grid[best]);
    CHECK(t.rows[i].impulse_mmse == t.mmse[i][0]);
    CHECK(std::abs(t.rows[i].gain_db - snr_gain(t.rows[i].impulse_mmse, t.rows[i].best_mmse)) < 1e-9);
  }
  CHECK(t.rows.front().best_parameter > 1);
  CHECK(t.rows.back().best_parameter == 1);
}

TEST_CASE("ties go to the smaller parameter") {
  SweepSpec spec;
  spec.family = SweepFamily::kFixed;
  spec.systems = {impulse(16), impulse(16), scaled_identity(16, 0.5)};
  spec.grid = {1, 2, 3};
  spec.lux = {1.0, 100.0};
  spec.mmse.method = MmseMethod::kNoPrior;
  const auto t = optimal_parameter(spec);
  for (const auto& r : t.rows) CHECK(r.best_parameter == 1);

  spec.systems = {scaled_identity(16, 0.5), impulse(16), impulse(16)};
  for (const auto& r : optimal_parameter(spec).rows) CHECK(r.best_parameter == 2);
}

TEST_CASE("singleton grid") {
  SweepSpec spec;
  spec.grid = {1};
  spec.lux = log_space(0.01, 100.0, 5);
  spec.prior = &prior_4x4();
  const auto t = optimal_parameter(spec);
  for (const auto& r : t.rows) {
    CHECK(r.best_parameter == 1);
    CHECK(r.gain_db == 0.0);
  }
  CHECK(crossover_lux(t) == 0.01);
}

TEST_CASE("sweep spec validation") {
  SweepSpec spec;
  spec.prior = &prior_4x4();
  spec.lux = {1.0};
  spec.grid = {2, 3};
  CHECK_THROWS_AS(optimal_parameter(spec), InvalidArgument);
  spec.grid = {1, 3, 2};
  CHECK_THROWS_AS(optimal_parameter(spec), InvalidArgument);
  spec.grid = {1, 2};
  spec.lux = {10.0, 1.0};
  CHECK_THROWS_AS(optimal_parameter(spec), InvalidArgument);
  spec.lux = {};
  CHECK_THROWS_AS(optimal_parameter(spec), InvalidArgument);
}

TEST_CASE("aperture family at a read-noise dominated point") {
  SweepSpec spec;
  spec.family = SweepFamily::kAperture;
  spec.grid = {1, 3, 5};
  spec.camera = preset("slr");
  spec.lux = {lux_for_photons(spec.camera, 0.01 * 16.0)};
  spec.prior = &prior_5x5();
  CHECK(family_system(spec, 3).label() == "disc:3");
  CHECK(family_system(spec, 5).h() == from_kernel_2d({5, 5}, disc_psf(5)).h());
  const auto t = optimal_parameter(spec);
  CHECK(t.rows[0].best_parameter >= 3);
  spec.geometry = PatchGeometry{4, 4};
  CHECK_THROWS_AS(optimal_parameter(spec), DimensionMismatch);
}

TEST_CASE("crossover_lux") {
  CHECK(crossover_lux(table_with({5, 3, 1, 1})) == 100.0);
  CHECK(crossover_lux(table_with({1, 1, 1})) == 1.0);
  CHECK_FALSE(crossover_lux(table_with({3, 2, 2})).has_value());
  CHECK(crossover_lux(table_with({1, 3, 1})) == 100.0);
}

TEST_CASE("decade averages") {
  OptimalityTable t;
  for (auto [lux, best] : std::vector<std::pair<double, std::size_t>>{
           {0.01, 9}, {0.05, 7}, {0.1, 4}, {1.0, 2}, {3.0, 1}, {1000.0, 1}}) {
    OptimalityRow r;
    r.lux = lux;
    r.best_parameter = best;
    t.rows.push_back(r);
  }
  const auto d = decade_average(t);
  REQUIRE(d.size() == 4);
  CHECK(d[0].decade == -2);
  CHECK(d[0].mean_best == 8.0);
  CHECK(d[1].decade == -1);
  CHECK(d[1].count == 1);
  CHECK(d[2].mean_best == 1.5);
  CHECK(d[3].decade == 3);
}

TEST_CASE("optimality CSV") {
  OptimalityTable t;
  t.rows.push_back({0.5, 0.25, 3, 2.0, 4.0, snr_gain(4.0, 2.0)});
  std::ostringstream out;
  write_optimality_csv(t, out);
  CHECK(out.str() ==
        "lux,j,best_parameter,best_mmse,impulse_mmse,gain_db\n"
        "0.5,0.25,3,2,4,3.0102999566398121\n");
}
