import pytest
from gmpy2 import mpq

from lbmfd.ring import LaurentPoly, field_inverse, mat_ops
from lbmfd.scheme import (
    Initialisation, SchemeSpec, build_scheme, builtin, collision_power, count_Q, d1q2, d1q2_initialisation,
    d1q3_magic, link_trt, pi_poly,
)
from lbmfd.fdreduce import bulk_fd, starting_row

BUILTINS = [
    ("d1q2", dict(s2=mpq(3, 2), eps2=mpq(1, 3))),
    ("d1q3", dict(s2=mpq(3, 2), s3=mpq(6, 5), eps2=mpq(1, 2), eps3=mpq(1, 10))),
    ("d1q3", dict(magic=True, s2=mpq(3, 2), eps2=mpq(1, 2), eps3=mpq(1, 10))),
    ("d1q3_link", dict(s=mpq(7, 4), eps=[1, mpq(1, 3), mpq(1, 7)])),
    ("d2q5", dict(s=mpq(3, 2), eps=[1, mpq(1, 3), mpq(1, 5), mpq(1, 7), mpq(1, 11)])),
    ("d2q9", dict(s=mpq(3, 2), eps=[1] + [mpq(k, 17) for k in range(2, 10)])),
]
IDS = ["d1q2", "d1q3", "d1q3_magic", "d1q3_link", "d2q5", "d2q9"]


@pytest.mark.parametrize("name,params", BUILTINS, ids=IDS)
def test_moment_matrix_inverse(name, params):
    spec = builtin(name, **params)
    Minv = field_inverse(spec.M)
    q = spec.q
    prod = [[sum(spec.M[i][k] * Minv[k][j] for k in range(q)) for j in range(q)] for i in range(q)]
    assert prod == [[1 if i == j else 0 for j in range(q)] for i in range(q)]


@pytest.mark.parametrize("name,params", BUILTINS, ids=IDS)
@pytest.mark.parametrize("ell", range(7))
def test_collision_power_closed_form(name, params, ell):
    K = build_scheme(builtin(name, **params)).K
    assert collision_power(K, ell) == mat_ops(K, None, "pow", ell)


@pytest.mark.parametrize("name,params", BUILTINS[3:], ids=IDS[3:])
def test_link_trt_relaxation_parity(name, params):
    spec = builtin(name, **params)
    s = spec.s
    # even moments relax with s, odd ones with 2 - s
    assert all(s[i] == params["s"] for i in range(1, spec.q, 2))
    assert all(s[i] == 2 - params["s"] for i in range(2, spec.q, 2))


def test_pi_poly():
    assert pi_poly(0, mpq(1, 2)) == 0
    assert pi_poly(3, mpq(1, 2)) == mpq(7, 8)
    with pytest.raises(ValueError):
        pi_poly(-1, 1)


def test_count_Q():
    assert count_Q([1, mpq(3, 2), 1]) == 1
    assert count_Q([1, 1, 1]) == 0


def test_d1q2_evolution_entry():
    s, e = mpq(3, 2), mpq(1, 3)
    ops = build_scheme(d1q2(s, e))
    x = LaurentPoly.var(1, 0)
    # first row of E: (S + s eps A, (1 - s) A)
    S = (x + x ** -1) * mpq(1, 2)
    A_ = (x - x ** -1) * mpq(1, 2)
    assert ops.E[0, 0] == S + s * e * A_
    assert ops.E[0, 1] == (1 - s) * A_


def test_starting_row_at_s1_is_bulk_step():
    # with s2 = 1 the one-step initialisation scheme is the Lax-Friedrichs bulk scheme
    e = mpq(2, 5)
    ops = build_scheme(d1q2(1, e))
    w = [LaurentPoly.one(1), LaurentPoly.const(1, e)]
    row = starting_row(ops, 1)
    one_step = row[0] * w[0] + row[1] * w[1]
    amp = bulk_fd(ops).amp
    assert amp.degree == 1
    assert one_step == -amp.coeff(0)


def test_magic_sets_s3():
    spec = d1q3_magic(mpq(3, 2), mpq(1, 2), 0)
    assert spec.s[2] == mpq(1, 2)


@pytest.mark.parametrize("bad", [
    dict(velocities=((1,), (1,)), M=((1, 1), (1, -1)), s=(1, 1), eps=(1, 0)),
    dict(velocities=((1,), (-1,)), M=((1, 1), (1, 1)), s=(1, 1), eps=(1, 0)),
    dict(velocities=((1,), (-1,)), M=((1, 1), (1, -1)), s=(1, 3), eps=(1, 0)),
    dict(velocities=((1,), (-1,)), M=((1, 1), (1, -1)), s=(1, 1), eps=(2, 0)),
    dict(velocities=((1,), (-1,)), M=((1, 1), (1, -1)), s=(1, 1), eps=(1, 0), scaling="diffusive"),
])
def test_spec_validation(bad):
    with pytest.raises(ValueError):
        SchemeSpec(**bad)


def test_link_trt_validation():
    with pytest.raises(ValueError):
        link_trt([(0,)], 1, [1, 0, 0])
    with pytest.raises(ValueError):
        link_trt([(1,), (-1,)], 1, [1, 0, 0, 0, 0])
    with pytest.raises(ValueError):
        builtin("d3q27")


def test_s_equal_two_is_accepted():
    spec = builtin("d1q3_link", s=2, eps=[1, mpq(1, 2), 0])
    assert spec.s == (1, 2, 0)


def test_with_rates():
    spec = d1q2(1, 0).with_rates(s2=mpq(3, 2), eps2=mpq(1, 4))
    assert spec.s[1] == mpq(3, 2) and spec.eps[1] == mpq(1, 4)


@pytest.mark.parametrize("name", ["LF", "FC-good", "FC-bad", "LW", "RE1"])
def test_d1q2_initialisations_conserve_mass(name):
    w = d1q2_initialisation(name, mpq(3, 2), mpq(1, 3))
    assert w.w[0].coeff_sum() == 1


def test_initialisation_local():
    w = Initialisation.local([1, mpq(1, 2)], 1)
    assert w.is_local()
    assert not d1q2_initialisation("RE1", mpq(3, 2), mpq(1, 3)).is_local()
