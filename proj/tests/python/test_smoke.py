"""Smoke tests for the python bindings."""

import math

import numpy as np
import pytest

import permsamp


def test_generators_are_deterministic():
    a = permsamp.generate_uniform(6, seed=3)
    b = permsamp.generate_uniform(6, seed=3)
    assert a.shape == (6, 6)
    np.testing.assert_array_equal(a, b)
    assert not np.array_equal(a, permsamp.generate_uniform(6, seed=4))

    bd = permsamp.generate_block_diagonal(5, 2, seed=1)
    assert bd[0, 4] == 0.0 and bd[4, 4] > 0.0


def test_exact_permanents():
    assert permsamp.permanent_ryser(np.array([[1.0, 2.0], [3.0, 4.0]])) == pytest.approx(10.0)
    m = permsamp.generate_uniform(6, seed=9)
    assert permsamp.permanent_ryser(m) == pytest.approx(permsamp.permanent_brute_force(m), rel=1e-10)
    bd = permsamp.generate_block_diagonal(8, 4, seed=2)
    assert permsamp.permanent_block_diagonal(bd, 4) == pytest.approx(permsamp.permanent_ryser(bd), rel=1e-10)
    with pytest.raises(ValueError):
        permsamp.permanent_ryser(np.eye(31))


def test_log_upper_bound_dominates():
    assert permsamp.log_upper_bound(np.ones((7, 7))) == pytest.approx(math.lgamma(8.0), rel=1e-9)
    m = permsamp.generate_uniform(7, seed=5)
    assert permsamp.log_upper_bound(m) >= math.log(permsamp.permanent_ryser(m))


def test_sampling_returns_valid_permutations():
    m = permsamp.generate_uniform(5, seed=11)
    perms, rejections = permsamp.sample_permutations(m, count=50, seed=7)
    assert perms.shape == (50, 5)
    for row in perms:
        assert sorted(row) == list(range(5))
    assert (rejections >= 0).all()

    idperms, idrej = permsamp.sample_permutations(np.eye(4), count=5, seed=1, method="guaranteed")
    assert (idperms == np.arange(4)).all()
    assert (idrej == 0).all()

    with pytest.raises(ValueError):
        permsamp.sample_permutations(np.zeros((3, 3)), count=1, seed=0)


def test_estimates_bracket_the_truth():
    m = permsamp.generate_uniform(6, seed=2)
    truth = math.log(permsamp.permanent_ryser(m))
    rep = permsamp.estimate_fixed_bound(m, trials=4000, alpha=0.05, seed=3, threads=2)
    assert rep["log_lower"] <= truth <= rep["log_upper"]
    assert rep["method"] == "clopper-pearson"

    rep2 = permsamp.estimate_tightening(m, trials=500, alpha=0.05, seed=4, bootstrap_b=2000)
    assert rep2["method"] == "bootstrap"
    assert rep2["log_lower"] <= truth <= rep2["log_upper"]

    ratio = permsamp.bound_improvement_ratio(m, draws=200, seed=5)
    assert 0.0 < ratio <= 1.0


def test_clopper_pearson_closed_form():
    lo, hi = permsamp.clopper_pearson(0, 10, 0.05)
    assert lo == 0.0
    assert hi == pytest.approx(1.0 - 0.025 ** 0.1, rel=1e-9)


def test_matrix_market_round_trip(tmp_path):
    m = permsamp.generate_uniform(8, seed=21)
    path = str(tmp_path / "m.mtx")
    permsamp.write_matrix_market(m, path)
    np.testing.assert_array_equal(permsamp.read_matrix_market(path), m)


def test_tracking_demo_runs():
    out = permsamp.track_demo(targets=3, steps=5, particles=8, proposal="optimal", seed=1)
    assert math.isfinite(out["max_log_likelihood"])
    assert out["mse"] >= 0.0
    seq = permsamp.track_demo(targets=3, steps=5, particles=8, proposal="sequential", seed=1)
    assert math.isfinite(seq["max_log_likelihood"])
