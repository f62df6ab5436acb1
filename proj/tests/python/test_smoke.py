import math
import os
import pathlib

import numpy as np
import pytest

import cigauge

DATA = pathlib.Path(os.environ.get("CIGAUGE_DATA_DIR", pathlib.Path(__file__).resolve().parents[2] / "data"))


def scalar_prior():
    return cigauge.GmmPrior([0.3, 0.7], [np.array([-2.0]), np.array([1.0])],
                            [np.array([[1.0]]), np.array([[4.0]])])


def test_scalar_instance():
    prior = scalar_prior()
    sys = cigauge.MultiplexSystem(np.array([[2.0]]), "scalar")
    noise = cigauge.NoiseSpec.from_variance(3.0)
    x = cigauge.mmse_estimate(prior, sys, noise, np.array([1.0]))
    assert x[0] == pytest.approx(0.454273568019582729, rel=1e-13)
    assert cigauge.mmse_lower_bound(prior, sys, noise) == pytest.approx(0.570676691729323308, rel=1e-13)
    assert cigauge.lmmse(prior, sys, noise) == pytest.approx(0.652003484320557491, rel=1e-12)
    post = cigauge.posterior(prior, sys, noise, np.array([1.0]))
    assert sum(post.weights) == pytest.approx(1.0)
    mc = cigauge.mmse_monte_carlo(prior, sys, noise, trials=4000, seed=3)
    assert mc.intra == pytest.approx(0.570676691729323308)


def test_systems_and_radiometry():
    assert cigauge.box_exposure(8, 3).throughput == 3.0
    assert cigauge.lightfield_system(cigauge.mura_tile(5)).throughput == 12.0
    sys = cigauge.parse_system("disc:3", cigauge.PatchGeometry(8, 8))
    assert sys.h.shape == (64, 64)
    slr = cigauge.preset("slr")
    assert cigauge.photons_per_pixel(slr, 1.0) == pytest.approx(0.793388429752066116, rel=1e-14)
    noise = cigauge.noise_for(15.0, 10.0, 4.0)
    assert noise.variance_e2 == 166.0


def test_errors_map_to_python():
    with pytest.raises(ValueError):
        cigauge.box_exposure(8, 0)
    with pytest.raises(cigauge.NotInvertible):
        cigauge.mse_no_prior(cigauge.box_exposure(8, 2), cigauge.NoiseSpec.from_variance(1.0))
    with pytest.raises(OSError):
        cigauge.load_prior("/nonexistent/prior.gmm")


def test_fit_save_load(tmp_path):
    rng = np.random.default_rng(0)
    x = np.concatenate([rng.normal(-3, 1, 5000), rng.normal(3, 1, 5000)])[None, :]
    fit = cigauge.fit_em(x, k=2, max_iters=100)
    assert np.all(np.diff(fit.log_likelihood) >= -1e-8)
    assert sorted(m[0] for m in fit.prior.means) == pytest.approx([-3, 3], abs=0.1)
    path = tmp_path / "p.gmm"
    cigauge.save_prior(fit.prior, path)
    assert cigauge.load_prior(path) == fit.prior


def test_gain_curve_closed_form():
    cam = cigauge.preset("slr")
    lux = cigauge.log_space(0.01, 1e4, 7)
    opts = cigauge.MmseOptions(cigauge.MmseMethod.NO_PRIOR)
    curves = cigauge.gain_curve([cigauge.scaled_identity(16, 20.0)], cigauge.impulse(16), None, cam, lux, opts)
    for r in curves[0].rows:
        expected = 10 * math.log10(400 * (16 + r.j) / (16 + 20 * r.j))
        assert abs(r.gain_db - expected) < 1e-9
    assert curves[0].to_csv().startswith("lux,j,j_over_sigma_r2")


def test_sweep_and_cli(tmp_path):
    out = tmp_path / "p.gmm"
    code, _, err = cigauge.run_cli(["learn-prior", str(DATA / "images" / "coins.pgm"), "-o", str(out),
                                    "--patch", "4x4", "--k", "3", "--max-iters", "10"])
    assert code == 0, err
    prior = cigauge.load_prior(out)
    table = cigauge.optimal_parameter(cigauge.SweepFamily.EXPOSURE, [1, 2, 4, 8], cigauge.log_space(0.01, 1e4, 5),
                                      prior, cigauge.preset("slr"))
    assert table.rows[-1].best_parameter == 1
    assert table.crossover_lux() is not None
    assert cigauge.run_cli(["gain", "--no-prior", "--system", "nope", "--patch", "4"])[0] == 2
