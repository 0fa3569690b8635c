"""Von Neumann stability of multi-step schemes.

The amplification polynomial of an FDScheme is obtained by replacing every
shift x^e with exp(-i e.xi dx).  Stability (in the sense of simple von
Neumann polynomials) asks for all roots in the closed unit disk, the ones on
the circle being simple.  Two independent verdicts are provided: numerical
roots on a frequency grid, and Miller's Schur-Cohn reduction.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Any, Sequence

import numpy as np

from .fdreduce import FDScheme
from .ring import LaurentPoly, to_fraction

MODULUS_TOL = 1e-10
CIRCLE_TOL = 1e-8
DERIV_TOL = 1e-8
CLUSTER_TOL = 1e-6
SC_TOL = 1e-12


@dataclass(frozen=True)
class StabilityReport:
    stable: bool
    max_root_modulus: float
    worst_frequency: tuple
    boundary_flags: tuple  # frequencies with a multiple root on the unit circle

    def as_row(self) -> tuple:
        return (self.stable, self.max_root_modulus, self.worst_frequency)


def frequency_grid(nfreq: int, d: int) -> np.ndarray:
    """nfreq points per axis on [-pi, pi]; nfreq = 4k + 1 keeps +-pi/2 and 0."""
    if nfreq < 2:
        raise ValueError("need at least two frequencies per axis")
    axis = np.linspace(-np.pi, np.pi, nfreq)
    return np.array(list(itertools.product(axis, repeat=d)))


def _coeff_terms(p: LaurentPoly) -> tuple[np.ndarray, np.ndarray]:
    items = sorted(p.terms.items())
    if not items:
        return np.zeros((0, p.dim)), np.zeros(0, dtype=complex)
    exps = np.array([e for e, _ in items], dtype=float)
    cs = np.array([complex(float(to_fraction(c))) for _, c in items])
    return exps, cs


def symbol_coefficients(fd: FDScheme, xis: np.ndarray) -> np.ndarray:
    """(len(xis), degree + 1) complex coefficients, lowest power of z first."""
    xis = np.atleast_2d(xis)
    out = np.zeros((xis.shape[0], fd.degree + 1), dtype=complex)
    for k, c in enumerate(fd.amp.coeffs):
        exps, cs = _coeff_terms(c)
        if cs.size:
            out[:, k] = np.exp(-1j * xis @ exps.T) @ cs
    return out


def _roots_batch(coeffs: np.ndarray) -> np.ndarray:
    """Roots of monic polynomials via companion-matrix eigenvalues."""
    n, deg1 = coeffs.shape
    deg = deg1 - 1
    if deg == 0:
        return np.zeros((n, 0), dtype=complex)
    comp = np.zeros((n, deg, deg), dtype=complex)
    comp[:, 1:, :-1] = np.eye(deg - 1)
    lead = coeffs[:, -1][:, None]
    comp[:, :, -1] = -coeffs[:, :-1] / lead
    return np.linalg.eigvals(comp)


def _multiple_on_circle(coeffs: np.ndarray, roots: np.ndarray) -> bool:
    near = [r for r in roots if abs(abs(r) - 1) < CIRCLE_TOL]
    dcoef = np.polynomial.polynomial.polyder(coeffs)
    for i, r in enumerate(near):
        if abs(np.polynomial.polynomial.polyval(r, dcoef)) < DERIV_TOL:
            return True
        if any(abs(r - r2) < CLUSTER_TOL for r2 in near[i + 1:]):
            return True
    # a double root split by rounding shows up as a pair straddling the circle
    for i, r in enumerate(roots):
        for r2 in roots[i + 1:]:
            if abs(r - r2) < CLUSTER_TOL and abs(abs(r) - 1) < np.sqrt(CIRCLE_TOL):
                return True
    return False


def frequency_sweep(fd: FDScheme, nfreq: int = 129) -> StabilityReport:
    """Root the amplification polynomial at every sampled frequency."""
    if nfreq < 64:
        raise ValueError("use at least 64 frequencies per axis")
    xis = frequency_grid(nfreq, fd.dim)
    coeffs = symbol_coefficients(fd, xis)
    roots = _roots_batch(coeffs)
    if not np.all(np.isfinite(roots)):
        raise ArithmeticError("root finder returned non-finite values")
    mods = np.abs(roots).max(axis=1) if roots.shape[1] else np.zeros(len(xis))
    worst = int(np.argmax(mods))
    flags = []
    for i in np.nonzero(mods > 1 - np.sqrt(CIRCLE_TOL))[0]:
        if _multiple_on_circle(coeffs[i], roots[i]):
            flags.append(tuple(float(v) for v in xis[i]))
    stable = bool(mods[worst] <= 1 + MODULUS_TOL and not flags)
    return StabilityReport(stable, float(mods[worst]), tuple(float(v) for v in xis[worst]), tuple(flags))


# ---------------------------------------------------------------------------
# Schur-Cohn / Miller reduction
# ---------------------------------------------------------------------------


class SchurCohnDegenerate(ArithmeticError):
    pass


def _trim(c: np.ndarray, scale: float) -> np.ndarray:
    c = np.array(c, dtype=complex)
    while c.size > 1 and abs(c[-1]) <= SC_TOL * scale:
        c = c[:-1]
    return c


def _star(c: np.ndarray) -> np.ndarray:
    """phi*(z) = z^deg conj(phi(1 / conj z)): reversed conjugated coefficients."""
    return np.conj(c[::-1])


def _reduce(c: np.ndarray) -> np.ndarray:
    s = _star(c)
    # (phi*(0) phi - phi(0) phi*) / z
    return (s[0] * c - c[0] * s)[1:]


def is_schur(c: Sequence[complex]) -> bool:
    """All roots strictly inside the unit disk."""
    c = np.asarray(c, dtype=complex)
    scale = max(float(np.max(np.abs(c))), 1e-300)
    c = _trim(c, scale)
    if c.size == 1:
        return abs(c[0]) > SC_TOL * scale
    if not abs(c[0]) < abs(_star(c)[0]) - SC_TOL * scale:
        return False
    return is_schur(_reduce(c))


def is_simple_von_neumann(c: Sequence[complex]) -> bool:
    """Roots in the closed unit disk, those on the circle simple (Miller)."""
    c = np.asarray(c, dtype=complex)
    scale = max(float(np.max(np.abs(c))), 1e-300)
    c = _trim(c, scale)
    if c.size == 1:
        if abs(c[0]) <= SC_TOL * scale:
            raise SchurCohnDegenerate("identically vanishing polynomial")
        return True
    a0, s0 = abs(c[0]), abs(_star(c)[0])
    red = _reduce(c)
    if a0 < s0 - SC_TOL * scale:
        return is_simple_von_neumann(red)
    if np.max(np.abs(red)) <= SC_TOL * scale * scale * c.size:
        return is_schur(np.polynomial.polynomial.polyder(c))
    return False


def schur_cohn(fd: FDScheme, xi: Any) -> bool:
    """Verdict at one frequency (scalar or d-vector of xi dx)."""
    xi = np.atleast_1d(np.asarray(xi, dtype=float))
    if xi.size != fd.dim:
        raise ValueError(f"frequency must have {fd.dim} components")
    if fd.degree > 4:
        raise ValueError("Schur-Cohn reduction is provided for degree <= 4")
    return is_simple_von_neumann(symbol_coefficients(fd, xi[None, :])[0])


def schur_cohn_sweep(fd: FDScheme, nfreq: int = 129) -> bool:
    xis = frequency_grid(nfreq, fd.dim)
    coeffs = symbol_coefficients(fd, xis)
    return all(is_simple_von_neumann(c) for c in coeffs)


# ---------------------------------------------------------------------------
# Analytic regions
# ---------------------------------------------------------------------------


def d1q2_region(s2: float, eps2: float) -> bool:
    if not 0 < s2 <= 2:
        return False
    return abs(eps2) < 1 if s2 == 2 else abs(eps2) <= 1


def d1q2_boundary_distance(s2: float, eps2: float) -> float:
    return min(abs(abs(eps2) - 1), abs(s2 - 2) if s2 != 2 else np.inf, abs(s2))


def d1q3_magic_region(s2: float, eps2: float, eps3: float) -> bool:
    if not 0 < s2 <= 2:
        return False
    if s2 == 2:
        return abs(eps2) < 1
    return abs(eps2) <= 1 and -2 + 3 * eps2 ** 2 <= eps3 <= 1


def d1q3_magic_boundary_distance(s2: float, eps2: float, eps3: float) -> float:
    return min(abs(abs(eps2) - 1), abs(eps3 - 1), abs(eps3 + 2 - 3 * eps2 ** 2), abs(s2 - 2), abs(s2))


def stability_csv_rows(params: Sequence[dict], reports: Sequence[StabilityReport]) -> list[tuple]:
    return [tuple(p.values()) + r.as_row() for p, r in zip(params, reports)]


def fd_for(spec, kind: str = "bulk") -> FDScheme:
    """Bulk or reduced FD scheme of a SchemeSpec."""
    from .fdreduce import bulk_fd, observability, reduced_fd
    from .scheme import build_scheme

    ops = build_scheme(spec)
    if kind == "bulk":
        return bulk_fd(ops)
    if kind == "reduced":
        return reduced_fd(observability(ops).psi)
    raise ValueError(f"unknown scheme kind {kind!r}")


def region_report(spec, nfreq: int = 129, kind: str = "bulk") -> StabilityReport:
    return frequency_sweep(fd_for(spec, kind), nfreq)
