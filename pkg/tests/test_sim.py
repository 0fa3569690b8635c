import math

import numpy as np
import pytest
from gmpy2 import mpq
from hypothesis import given, settings, strategies as st

from lbmfd.fdreduce import FDScheme, bulk_fd, observability, reduced_fd
from lbmfd.ring import ZPoly
from lbmfd.scheme import build_scheme, builtin, d1q2, d1q3, d1q3_magic
from lbmfd.sim import (
    CauchyProblem, ExperimentConfig, LBMStepper, Lattice, alternation_rate, convergence_study, datum_function,
    exact_solution, fd_trajectory, fit_order, initial_data, lattice_for, lbm_trajectory, second_differences,
    smoothness_probe, step_fd, step_lbm, time_step, unobservable_run, write_csv,
)


def _random_state(q, shape, seed=0):
    return np.random.default_rng(seed).standard_normal((q,) + shape)


def test_equilibrium_constant_state_is_fixed():
    spec = d1q3(mpq(3, 2), mpq(6, 5), mpq(1, 2), mpq(1, 10))
    st_ = LBMStepper.from_spec(spec)
    m = np.stack([np.full(16, 2.0), np.full(16, 1.0), np.full(16, 0.2)])
    assert np.allclose(step_lbm(st_, m), m, atol=1e-15)


def test_d1q2_s1_is_lax_friedrichs():
    e = 0.4
    st_ = LBMStepper.from_spec(d1q2(1, mpq(2, 5)))
    u = np.random.default_rng(1).standard_normal(12)
    m = np.stack([u, np.zeros(12)])
    got = step_lbm(st_, m)[0]
    want = 0.5 * (np.roll(u, 1) + np.roll(u, -1)) - 0.5 * e * (np.roll(u, -1) - np.roll(u, 1))
    assert np.allclose(got, want, atol=1e-14)


def test_step_fd_identity():
    fd = FDScheme(ZPoly([-1, 1], 1), 2)
    u = np.arange(6.0)
    assert np.array_equal(step_fd(fd, [u]), u)
    with pytest.raises(ValueError):
        step_fd(bulk_fd(build_scheme(d1q2(mpq(3, 2), 0))), [u])


def test_d1q2_bulk_stencil_on_delta():
    s, e = mpq(3, 2), mpq(1, 3)
    fd = bulk_fd(build_scheme(d1q2(s, e)))
    delta = np.zeros(9)
    delta[4] = 1.0
    nxt = step_fd(fd, [np.zeros(9), delta])
    sf, ef = float(s), float(e)
    assert nxt[5] == pytest.approx((2 - sf) / 2 + sf * ef / 2)
    assert nxt[3] == pytest.approx((2 - sf) / 2 - sf * ef / 2)
    assert nxt[4] == 0
    # the older level enters with weight (s2 - 1)
    nxt = step_fd(fd, [delta, np.zeros(9)])
    assert nxt[4] == pytest.approx(sf - 1)


@pytest.mark.parametrize("spec", [
    d1q2(mpq(7, 10), mpq(1, 2)), d1q2(2, mpq(1, 2)),
    d1q3(mpq(3, 2), mpq(6, 5), mpq(1, 2), mpq(1, 10)),
    d1q3_magic(mpq(3, 2), mpq(1, 2), mpq(1, 10)),
    builtin("d1q3_link", s=mpq(32, 17), eps=[1, mpq(1, 2), mpq(1, 2)], scaling="diffusive", mu=1),
], ids=["d1q2_07", "d1q2_2", "d1q3", "d1q3_magic", "d1q3_diffusive"])
def test_lbm_equals_bulk_fd(spec):
    ops = build_scheme(spec)
    m0 = _random_state(spec.q, (64,), 2)
    lbm = lbm_trajectory(LBMStepper.from_spec(spec), m0, 50)
    fd = fd_trajectory(ops, bulk_fd(ops), m0, 50)
    assert max(np.max(np.abs(a - b)) for a, b in zip(lbm, fd)) <= 1e-12


def test_reduced_equals_lbm_magic():
    spec = d1q3_magic(mpq(3, 2), mpq(1, 2), mpq(1, 10))
    ops = build_scheme(spec)
    m0 = _random_state(3, (64,), 5)
    red = fd_trajectory(ops, reduced_fd(observability(ops).psi), m0, 50)
    lbm = lbm_trajectory(LBMStepper.from_spec(spec), m0, 50)
    assert max(np.max(np.abs(a - b)) for a, b in zip(lbm, red)) <= 1e-12


def test_mass_conservation_d1q2():
    for s in (mpq(1, 2), 1, mpq(3, 2), 2):
        st_ = LBMStepper.from_spec(d1q2(s, mpq(1, 3)))
        m = _random_state(2, (40,), 3)
        mass = m[0].sum()
        for _ in range(30):
            m = step_lbm(st_, m)
        assert abs(m[0].sum() - mass) < 1e-12


def test_datum_values():
    assert datum_function("a")(np.array([0.0, 0.75])).tolist() == [1.0, 0.0]
    assert datum_function("b")(np.array([0.0, 0.25])).tolist() == [1.0, 0.5]
    assert datum_function("d")(np.array([0.0]))[0] == pytest.approx(math.exp(-1))
    assert datum_function("c")(np.array([0.0]))[0] == 1.0
    with pytest.raises(ValueError):
        datum_function("e")


def test_initial_data_lattices():
    u = initial_data("a", 2 / 64, 64)
    assert u.shape == (64,) and u.max() == 1.0
    with pytest.raises(ValueError):
        initial_data("cosine", 0.5, 64)
    with pytest.raises(ValueError):
        Lattice((2,), 0.5)


@pytest.mark.parametrize("datum", ["a", "b", "c", "d", "cosine", "bump10"])
def test_exact_at_zero_is_datum(datum):
    lat = lattice_for(datum, 50)
    x = lat.coords()
    prob = CauchyProblem(0.7, datum, 0.0, lat.origin, lat.length)
    assert np.array_equal(exact_solution(prob, 0.0, x), datum_function(datum)(x))


def test_exact_diffusive_cosine():
    prob = CauchyProblem(2.0, "cosine", 1 / 32)
    val = exact_solution(prob, 0.05, np.array([0.0]))[0]
    assert val == pytest.approx(math.exp(-math.pi ** 2 / 160) * math.cos(-0.2 * math.pi), rel=1e-14)


def test_exact_acoustic_cosine():
    prob = CauchyProblem(0.66, "cosine")
    x = np.linspace(0, 1, 7, endpoint=False)
    assert np.allclose(exact_solution(prob, 1.0, x), np.cos(2 * np.pi * (x - 0.66)), atol=1e-14)


@settings(max_examples=20)
@given(st.floats(-3, 3), st.floats(0, 2))
def test_exact_is_periodic(v, t):
    prob = CauchyProblem(v, "cosine")
    x = np.array([0.1, 0.3])
    assert np.allclose(prob.exact(t, x), prob.exact(t, x + 1.0), atol=1e-12)


def test_time_step():
    assert time_step(d1q2(1, 0, 2), 0.1) == pytest.approx(0.05)
    spec = builtin("d1q3_link", s=1, eps=[1, 0, 0], scaling="diffusive", mu=2)
    assert time_step(spec, 0.1) == pytest.approx(0.005)


def test_fit_order_exact_power_law():
    dx = [2.0 ** -k for k in range(4, 9)]
    assert fit_order(dx, [3 * h ** 1.5 for h in dx]) == pytest.approx(1.5)


def test_convergence_errors_decrease_on_smooth_datum():
    cfg = ExperimentConfig("convergence", {"name": "d1q2", "s2": 2, "eps2": mpq(1, 2)}, {"name": "LW"},
                           datum="d", grids=[32, 64, 128, 256], final_time=0.5)
    res = convergence_study(cfg)
    assert all(a > b for a, b in zip(res.errors, res.errors[1:]))
    assert not res.blowup
    with pytest.raises(ValueError):
        convergence_study(ExperimentConfig("convergence", cfg.scheme, cfg.init, grids=[8, 16], final_time=0.1))


def test_unstable_parameters_blow_up():
    cfg = ExperimentConfig("convergence", {"name": "d1q2", "s2": mpq(3, 2), "eps2": 3}, {"name": "LF"},
                           datum="cosine", grids=[64, 128, 256, 512], final_time=2.0)
    assert convergence_study(cfg).blowup


def test_second_differences_and_alternation():
    e = [(-1) ** n for n in range(25)]
    d = second_differences(e)
    assert np.all(np.abs(d) == 4)
    assert alternation_rate(e) == 1.0
    assert alternation_rate([n * n * 0.1 + n ** 3 * 0.01 for n in range(25)]) == 0.0


def test_smoothness_probe_shapes():
    cfg = ExperimentConfig("smoothness", {"name": "d1q2", "s2": 2, "eps2": mpq(66, 100)}, {"name": "LF"},
                           grids=[30], steps=20)
    res = smoothness_probe(cfg)
    assert len(res.errors) == 21 and res.errors[0] == pytest.approx(0, abs=1e-15)
    assert len(res.dissipation_n) == 20 and res.dissipation_bulk == 0
    with pytest.raises(ValueError):
        smoothness_probe(ExperimentConfig("smoothness", cfg.scheme, cfg.init, grids=[30], probe=40))


def test_unobservable_run_reports_kernel():
    cfg = ExperimentConfig("unobservable", {"name": "d1q2", "s2": mpq(9, 5), "eps2": mpq(1, 2)},
                           grids=[40], steps=20, fields={"m1": 0, "m2": "(1 + 3 * (-1) ** j) / 8"})
    res = unobservable_run(cfg)
    assert res.in_kernel and max(res.l2_m1) == 0


def test_write_csv_full_precision(tmp_path):
    p = tmp_path / "out.csv"
    write_csv(str(p), ["a", "b"], [(1, 0.1 + 0.2)])
    assert p.read_text().splitlines() == ["a,b", "1,0.30000000000000004"]
