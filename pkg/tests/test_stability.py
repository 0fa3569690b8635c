import numpy as np
import pytest
from gmpy2 import mpq
from hypothesis import given, settings, strategies as st

from lbmfd.fdreduce import FDScheme
from lbmfd.ring import ZPoly
from lbmfd.scheme import builtin, d1q2, d1q3_magic
from lbmfd.stability import (
    SchurCohnDegenerate, d1q2_region, d1q3_magic_region, fd_for, frequency_grid, frequency_sweep,
    is_schur, is_simple_von_neumann, region_report, schur_cohn, schur_cohn_sweep, symbol_coefficients,
)


def _frac(v, den=1000):
    return mpq(int(round(v * den)), den)


def test_spot_checks():
    assert region_report(d1q2(mpq(3, 2), mpq(9, 10))).stable
    rep = region_report(d1q2(2, 1))
    assert not rep.stable and rep.boundary_flags
    e2 = mpq(4, 5)
    bound = -2 + 3 * e2 ** 2
    assert not region_report(d1q3_magic(mpq(3, 2), e2, bound - mpq(1, 10))).stable
    assert region_report(d1q3_magic(mpq(3, 2), e2, bound + mpq(1, 10))).stable


def test_needs_enough_frequencies():
    with pytest.raises(ValueError):
        frequency_sweep(fd_for(d1q2(1, 0)), 16)


def test_frequency_grid_contains_zero_and_pi():
    g = frequency_grid(129, 1)[:, 0]
    assert g[0] == -np.pi and g[-1] == np.pi and 0.0 in g


def test_symbol_of_shift():
    fd = fd_for(d1q2(1, 0))  # z - (x + 1/x)/2
    c = symbol_coefficients(fd, np.array([[0.3]]))[0]
    assert c[1] == 1
    assert c[0] == pytest.approx(-np.cos(0.3))


def test_miller_basic_polynomials():
    assert is_schur([0.25, 0, 1])          # z^2 + 1/4
    assert not is_schur([1, 0, 1])         # roots on the circle
    assert is_simple_von_neumann([1, 0, 1])
    assert not is_simple_von_neumann([1, 2, 1])   # (z + 1)^2
    assert not is_simple_von_neumann([4, 0, 1])
    with pytest.raises(SchurCohnDegenerate):
        is_simple_von_neumann([0])


@settings(max_examples=40)
@given(st.floats(0.05, 1.95), st.floats(-1.5, 1.5), st.floats(-np.pi, np.pi))
def test_d1q2_reduction_condition(s2, e2, xi):
    # for s2 in (0, 2) the Miller condition is 1 + (e2^2 - 1) sin^2(xi) <= 1
    fd = fd_for(d1q2(_frac(s2), _frac(e2)))
    cond = 1 + (float(_frac(e2)) ** 2 - 1) * np.sin(xi) ** 2
    if abs(cond - 1) > 1e-6:
        assert schur_cohn(fd, xi) == (cond <= 1)


@pytest.mark.parametrize("e2,ok", [(mpq(1, 2), True), (mpq(99, 100), True), (1, False), (mpq(11, 10), False)])
def test_d1q2_leapfrog(e2, ok):
    fd = fd_for(d1q2(2, e2))
    assert schur_cohn_sweep(fd, 129) == ok
    assert frequency_sweep(fd).stable == ok


def test_schur_cohn_argument_checks():
    fd = fd_for(d1q2(1, 0))
    with pytest.raises(ValueError):
        schur_cohn(fd, [0.1, 0.2])
    big = FDScheme(ZPoly([0, 0, 0, 0, 0, 1], 1), 6)
    with pytest.raises(ValueError):
        schur_cohn(big, 0.1)


def test_analytic_regions():
    assert d1q2_region(1.5, 1.0) and not d1q2_region(2.0, 1.0) and not d1q2_region(0.0, 0.5)
    assert d1q3_magic_region(1.5, 0.5, 0.0) and not d1q3_magic_region(1.5, 0.5, 1.2)
    assert not d1q3_magic_region(1.5, 0.8, -0.2)


def test_d1q3_magic_region_small_grid():
    for s2 in (0.5, 1.5):
        for e2 in (-0.9, -0.3, 0.4, 1.1):
            for e3 in (-1.7, -0.5, 0.3, 0.9, 1.3):
                spec = d1q3_magic(_frac(s2), _frac(e2), _frac(e3))
                assert frequency_sweep(fd_for(spec, "reduced")).stable == d1q3_magic_region(s2, e2, e3)


@pytest.mark.parametrize("name,links", [("d1q3_link", 1), ("d2q5", 2)])
def test_link_trt_reduced_and_full_agree(name, links):
    rng = np.random.default_rng(11)
    for _ in range(4):
        s = mpq(int(rng.integers(2, 39)), 20)
        eps = [1]
        for _ in range(links):
            eps += [mpq(int(rng.integers(-3, 4)), 10), mpq(int(rng.integers(-6, 7)), 10)]
        spec = builtin(name, s=s, eps=eps)
        assert frequency_sweep(fd_for(spec, "bulk"), 65).stable == frequency_sweep(fd_for(spec, "reduced"), 65).stable
