#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <sstream>

#include "cigauge/cli.hpp"
#include "cigauge/errors.hpp"
#include "cigauge/estimator.hpp"
#include "cigauge/gmm_prior.hpp"
#include "cigauge/multiplexing.hpp"
#include "cigauge/parallel.hpp"
#include "cigauge/pipeline.hpp"
#include "cigauge/radiometry.hpp"
#include "cigauge/sweep.hpp"

namespace py = pybind11;
using namespace cigauge;

namespace {

GmmPrior make_prior(const std::vector<double>& weights, const std::vector<Vector>& means,
                    const std::vector<Matrix>& covariances) {
  if (weights.size() != means.size() || weights.size() != covariances.size())
    throw DimensionMismatch("weights, means and covariances must have equal length");
  std::vector<GaussianComponent> comps;
  for (std::size_t k = 0; k < weights.size(); ++k) comps.push_back({weights[k], means[k], covariances[k]});
  return GmmPrior(std::move(comps));
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Multiplexed-imaging SNR analysis under Gaussian-mixture patch priors";

  py::register_exception<InvalidArgument>(m, "InvalidArgument", PyExc_ValueError);
  py::register_exception<DimensionMismatch>(m, "DimensionMismatch", PyExc_ValueError);
  auto numerical = py::register_exception<NumericalError>(m, "NumericalError", PyExc_ArithmeticError);
  py::register_exception<NotInvertible>(m, "NotInvertible", numerical.ptr());
  auto io = py::register_exception<IoError>(m, "IoError", PyExc_OSError);
  py::register_exception<ParseError>(m, "ParseError", io.ptr());

  m.def("thread_limit", &thread_limit);
  m.def("set_thread_limit", &set_thread_limit, py::arg("threads"));

  // Priors
  py::class_<GmmPrior>(m, "GmmPrior")
      .def(py::init(&make_prior), py::arg("weights"), py::arg("means"), py::arg("covariances"))
      .def_property_readonly("dim", &GmmPrior::dim)
      .def("__len__", &GmmPrior::size)
      .def_property_readonly("weights",
                             [](const GmmPrior& p) {
                               std::vector<double> w;
                               for (const auto& c : p.components()) w.push_back(c.weight);
                               return w;
                             })
      .def_property_readonly("means",
                             [](const GmmPrior& p) {
                               std::vector<Vector> v;
                               for (const auto& c : p.components()) v.push_back(c.mean);
                               return v;
                             })
      .def_property_readonly("covariances",
                             [](const GmmPrior& p) {
                               std::vector<Matrix> v;
                               for (const auto& c : p.components()) v.push_back(c.covariance);
                               return v;
                             })
      .def("aggregate_mean", &GmmPrior::aggregate_mean)
      .def("aggregate_covariance", &GmmPrior::aggregate_covariance)
      .def("mean_level", &GmmPrior::mean_level)
      .def("scaled", &GmmPrior::scaled, py::arg("factor"))
      .def("log_density", [](const GmmPrior& p, const Vector& x) { return log_density(p, x); }, py::arg("x"))
      .def(
          "sample",
          [](const GmmPrior& p, std::size_t count, std::uint64_t seed) {
            Rng rng(seed);
            std::vector<std::size_t> labels;
            Matrix x = sample(p, rng, count, &labels);
            return py::make_tuple(std::move(x), std::move(labels));
          },
          py::arg("count"), py::arg("seed") = 1,
          "Returns (patches as columns, generating component per column).")
      .def("__eq__", [](const GmmPrior& a, const GmmPrior& b) { return a == b; });

  m.def("save_prior", &save_prior, py::arg("prior"), py::arg("path"));
  m.def("load_prior", &load_prior, py::arg("path"));

  py::class_<EmResult>(m, "EmResult")
      .def_readonly("prior", &EmResult::prior)
      .def_readonly("log_likelihood", &EmResult::log_likelihood)
      .def_readonly("iterations", &EmResult::iterations)
      .def_readonly("converged", &EmResult::converged);
  m.def(
      "fit_em",
      [](const Matrix& patches, std::size_t k, int max_iters, double rel_tol, double reg_scale,
         std::uint64_t seed) {
        EmConfig cfg;
        cfg.k = k;
        cfg.max_iters = max_iters;
        cfg.rel_tol = rel_tol;
        cfg.reg_scale = reg_scale;
        cfg.seed = seed;
        py::gil_scoped_release release;
        return fit_em(patches, cfg);
      },
      py::arg("patches"), py::arg("k") = 20, py::arg("max_iters") = 100, py::arg("rel_tol") = 1e-6,
      py::arg("reg_scale") = 1e-6, py::arg("seed") = 1);

  // Systems
  py::class_<PatchGeometry>(m, "PatchGeometry")
      .def(py::init([](std::size_t w, std::size_t h) { return PatchGeometry{w, h}; }), py::arg("width"),
           py::arg("height"))
      .def_readwrite("width", &PatchGeometry::width)
      .def_readwrite("height", &PatchGeometry::height)
      .def_property_readonly("n", &PatchGeometry::n);

  py::class_<MultiplexSystem>(m, "MultiplexSystem")
      .def(py::init([](const Matrix& h, std::string label) { return MultiplexSystem(h, std::move(label)); }),
           py::arg("h"), py::arg("label") = "custom")
      .def_property_readonly("h", &MultiplexSystem::h)
      .def_property_readonly("n", &MultiplexSystem::n)
      .def_property_readonly("throughput", &MultiplexSystem::throughput)
      .def_property_readonly("label", &MultiplexSystem::label)
      .def("__repr__", [](const MultiplexSystem& s) {
        return "<MultiplexSystem " + s.label() + " n=" + std::to_string(s.n()) + ">";
      });

  m.def("impulse", &impulse, py::arg("n"));
  m.def("scaled_identity", &scaled_identity, py::arg("n"), py::arg("scale"));
  m.def("box_exposure", &box_exposure, py::arg("n"), py::arg("length"));
  m.def(
      "from_kernel_1d",
      [](std::size_t n, const std::vector<double>& k) { return from_kernel_1d(n, k); }, py::arg("n"),
      py::arg("kernel"));
  m.def("from_kernel_2d", &from_kernel_2d, py::arg("geometry"), py::arg("kernel"));
  m.def("disc_psf", &disc_psf, py::arg("diameter"));
  m.def("mura_tile", &mura_tile, py::arg("p"));
  m.def("lightfield_system", &lightfield_system, py::arg("tile"), py::arg("n") = 0);
  m.def("parse_flutter_code", &parse_flutter_code, py::arg("code"));
  m.def("parse_system", &parse_system, py::arg("tag"), py::arg("geometry"));

  // Radiometry
  py::class_<CameraSpec>(m, "CameraSpec")
      .def(py::init<>())
      .def_readwrite("f_number", &CameraSpec::f_number)
      .def_readwrite("exposure_s", &CameraSpec::exposure_s)
      .def_readwrite("quantum_eff", &CameraSpec::quantum_eff)
      .def_readwrite("pixel_m", &CameraSpec::pixel_m)
      .def_readwrite("read_noise_e", &CameraSpec::read_noise_e)
      .def_readwrite("reflectivity", &CameraSpec::reflectivity)
      .def("validate", &CameraSpec::validate);
  py::class_<NoiseSpec>(m, "NoiseSpec")
      .def_static("from_variance", &NoiseSpec::from_variance, py::arg("variance"))
      .def_readonly("variance_e2", &NoiseSpec::variance_e2)
      .def_readonly("j_e", &NoiseSpec::j_e)
      .def_readonly("throughput", &NoiseSpec::throughput)
      .def_readonly("read_noise_e", &NoiseSpec::read_noise_e);
  m.def("preset", &preset, py::arg("name"));
  m.def("photons_per_pixel", &photons_per_pixel, py::arg("camera"), py::arg("lux"));
  m.def("lux_for_photons", &lux_for_photons, py::arg("camera"), py::arg("j"));
  m.def("noise_for", &noise_for, py::arg("throughput"), py::arg("j"), py::arg("read_noise"));

  // Estimation
  py::class_<PosteriorMixture>(m, "PosteriorMixture")
      .def_readonly("weights", &PosteriorMixture::weights)
      .def_readonly("means", &PosteriorMixture::means)
      .def_readonly("obs_log_likelihood", &PosteriorMixture::obs_log_likelihood)
      .def_property_readonly("covariances", [](const PosteriorMixture& p) { return *p.covariances; });
  py::class_<MonteCarloResult>(m, "MonteCarloResult")
      .def_readonly("estimate", &MonteCarloResult::estimate)
      .def_readonly("std_error", &MonteCarloResult::std_error)
      .def_readonly("trials", &MonteCarloResult::trials)
      .def_readonly("intra", &MonteCarloResult::intra)
      .def_readonly("inter", &MonteCarloResult::inter)
      .def_readonly("inter_std_error", &MonteCarloResult::inter_std_error);

  m.def("posterior", &posterior, py::arg("prior"), py::arg("system"), py::arg("noise"), py::arg("y"));
  m.def("mmse_estimate", &mmse_estimate, py::arg("prior"), py::arg("system"), py::arg("noise"), py::arg("y"));
  m.def("mmse_lower_bound", &mmse_lower_bound, py::arg("prior"), py::arg("system"), py::arg("noise"));
  m.def("lmmse", &lmmse, py::arg("prior"), py::arg("system"), py::arg("noise"));
  m.def("mmse_monte_carlo", &mmse_monte_carlo, py::arg("prior"), py::arg("system"), py::arg("noise"),
        py::arg("trials") = 10000, py::arg("seed") = 1, py::call_guard<py::gil_scoped_release>());
  m.def("mse_no_prior", &mse_no_prior, py::arg("system"), py::arg("noise"));
  m.def("snr_gain", &snr_gain, py::arg("mmse_ref"), py::arg("mmse_sys"));

  // Sweeps
  py::enum_<MmseMethod>(m, "MmseMethod")
      .value("BOUND", MmseMethod::kBound)
      .value("MONTE_CARLO", MmseMethod::kMonteCarlo)
      .value("NO_PRIOR", MmseMethod::kNoPrior);
  py::class_<MmseOptions>(m, "MmseOptions")
      .def(py::init([](MmseMethod method, std::size_t trials, std::uint64_t seed) {
             return MmseOptions{method, trials, seed};
           }),
           py::arg("method") = MmseMethod::kBound, py::arg("mc_trials") = 10000, py::arg("seed") = 1)
      .def_readwrite("method", &MmseOptions::method)
      .def_readwrite("mc_trials", &MmseOptions::mc_trials)
      .def_readwrite("seed", &MmseOptions::seed);
  py::class_<GainRow>(m, "GainRow")
      .def_readonly("lux", &GainRow::lux)
      .def_readonly("j", &GainRow::j)
      .def_readonly("j_over_sigma_r2", &GainRow::j_over_sigma_r2)
      .def_readonly("mmse_ref", &GainRow::mmse_ref)
      .def_readonly("mmse_sys", &GainRow::mmse_sys)
      .def_readonly("gain_db", &GainRow::gain_db);
  py::class_<GainCurve>(m, "GainCurve")
      .def_readonly("system", &GainCurve::system)
      .def_readonly("rows", &GainCurve::rows)
      .def("to_csv", [](const GainCurve& c) {
        std::ostringstream out;
        write_gain_csv(c, out);
        return out.str();
      });

  m.def("log_space", &log_space, py::arg("a"), py::arg("b"), py::arg("count"));
  m.def(
      "gain_curve",
      [](const std::vector<MultiplexSystem>& systems, const MultiplexSystem& ref, const GmmPrior* prior,
         const CameraSpec& cam, const std::vector<double>& lux, const MmseOptions& opts) {
        py::gil_scoped_release release;
        return gain_curve(systems, ref, prior, cam, lux, opts);
      },
      py::arg("systems"), py::arg("ref"), py::arg("prior"), py::arg("camera"), py::arg("lux"),
      py::arg("options") = MmseOptions{});
  m.def("system_mmse", &system_mmse, py::arg("prior"), py::arg("system"), py::arg("j"), py::arg("read_noise"),
        py::arg("options") = MmseOptions{});

  py::enum_<SweepFamily>(m, "SweepFamily")
      .value("EXPOSURE", SweepFamily::kExposure)
      .value("APERTURE", SweepFamily::kAperture)
      .value("FIXED", SweepFamily::kFixed);
  py::class_<OptimalityRow>(m, "OptimalityRow")
      .def_readonly("lux", &OptimalityRow::lux)
      .def_readonly("j", &OptimalityRow::j)
      .def_readonly("best_parameter", &OptimalityRow::best_parameter)
      .def_readonly("best_mmse", &OptimalityRow::best_mmse)
      .def_readonly("impulse_mmse", &OptimalityRow::impulse_mmse)
      .def_readonly("gain_db", &OptimalityRow::gain_db);
  py::class_<OptimalityTable>(m, "OptimalityTable")
      .def_readonly("rows", &OptimalityTable::rows)
      .def_readonly("mmse", &OptimalityTable::mmse)
      .def("crossover_lux", [](const OptimalityTable& t) { return crossover_lux(t); })
      .def("to_csv", [](const OptimalityTable& t) {
        std::ostringstream out;
        write_optimality_csv(t, out);
        return out.str();
      });
  m.def(
      "optimal_parameter",
      [](SweepFamily family, const std::vector<std::size_t>& grid, const std::vector<double>& lux,
         const GmmPrior* prior, const CameraSpec& cam, const MmseOptions& opts,
         const std::vector<MultiplexSystem>& systems) {
        SweepSpec spec;
        spec.family = family;
        spec.grid = grid;
        spec.lux = lux;
        spec.camera = cam;
        spec.prior = prior;
        spec.mmse = opts;
        spec.systems = systems;
        py::gil_scoped_release release;
        return optimal_parameter(spec);
      },
      py::arg("family"), py::arg("grid"), py::arg("lux"), py::arg("prior") = nullptr,
      py::arg("camera") = CameraSpec{}, py::arg("options") = MmseOptions{},
      py::arg("systems") = std::vector<MultiplexSystem>{});

  // Images
  py::class_<Image>(m, "Image")
      .def_property_readonly("width", &Image::width)
      .def_property_readonly("height", &Image::height)
      .def_property_readonly("scale", &Image::scale)
      .def("mean", &Image::mean)
      .def("to_array", [](const Image& img) {
        Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> a(
            img.data().data(), static_cast<Eigen::Index>(img.height()), static_cast<Eigen::Index>(img.width()));
        return Matrix(a);
      });
  m.def("load_image", &load_image, py::arg("path"), py::arg("mean_target"));

  m.def(
      "run_cli",
      [](const std::vector<std::string>& args) {
        std::ostringstream out, err;
        const int code = run_cli(args, out, err);
        return py::make_tuple(code, out.str(), err.str());
      },
      py::arg("args"), "Runs the command-line tool in-process; returns (exit code, stdout, stderr).");
}
