"""Reduction of a lattice Boltzmann scheme to multi-step finite differences.

The conserved moment m_1 of a scheme with evolution matrix E obeys the
multi-step scheme given by the characteristic polynomial of E (bulk scheme),
or by the minimal polynomial Psi_o annihilating the first row of E when the
system is not observable (reduced scheme).  The first time levels are
provided by the starting schemes m_1(n dt) = (E^n m(0))_1.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Any, Optional, Sequence

import numpy as np

from .ring import (
    LaurentPoly,
    OperatorMatrix,
    ZPoly,
    _det_generic,
    charpoly_diag_similar,
    det,
    solve_over_ring,
    to_fraction,
)
from .scheme import Initialisation, SchemeOperators


@dataclass(frozen=True)
class FDScheme:
    """sum_k amp_k m_1((n + 1 - deg + k) dt) = 0 with amp monic in z."""

    amp: ZPoly
    stages: int
    kind: str = "bulk"

    def __post_init__(self):
        if not self.amp.is_monic():
            raise ValueError("amplification polynomial must be monic")
        if self.stages != self.amp.degree + 1:
            raise ValueError("stages must equal degree + 1")

    @property
    def degree(self) -> int:
        return self.amp.degree

    @property
    def dim(self) -> int:
        return self.amp.dim

    def update_coefficients(self) -> list[LaurentPoly]:
        """Stencils c_k with m(n+1) = sum_k c_k m(n+1-deg+k), k < deg."""
        return [-c for c in self.amp.coeffs[:-1]]


@dataclass(frozen=True)
class ObservabilityData:
    Omega: OperatorMatrix
    index_o: int
    psi: ZPoly
    brewer_observable: bool
    det_Omega: LaurentPoly
    charpoly: ZPoly
    cofactor: ZPoly  # charpoly / psi


@dataclass(frozen=True)
class TransferFunction:
    numerator: ZPoly
    denominator: ZPoly
    common_factor: Optional[ZPoly]
    reduced_numerator: Optional[ZPoly]
    reduced_denominator: Optional[ZPoly]


def charpoly_E(ops: SchemeOperators) -> ZPoly:
    """det(zI - E), using the similarity E ~ diag(x^{c_j}) M^{-1} K M."""
    return charpoly_diag_similar(ops.spec.velocities, ops.N_E, ops.d)


def charpoly_A(ops: SchemeOperators) -> ZPoly:
    """det(zI - A_free), A_free = T (I - S)."""
    return charpoly_diag_similar(ops.spec.velocities, ops.N_A, ops.d)


def bulk_fd(ops: SchemeOperators) -> FDScheme:
    cp = charpoly_E(ops)
    amp = cp.shift(-(ops.q - ops.Q - 1))
    return FDScheme(amp, amp.degree + 1, "bulk")


def first_rows(ops: SchemeOperators, n_max: int) -> list[tuple[LaurentPoly, ...]]:
    """First rows of E^0, ..., E^{n_max}."""
    rows = [ops.C]
    for _ in range(n_max):
        rows.append(ops.E.vecmat(rows[-1]))
    return rows


def starting_row(ops: SchemeOperators, n: int) -> tuple[LaurentPoly, ...]:
    if n < 0:
        raise ValueError("n must be non-negative")
    return first_rows(ops, n)[-1]


def starting_scheme(ops: SchemeOperators, w: Initialisation, n: int) -> LaurentPoly:
    """(E^n w)_1 as one stencil acting on the discretized datum."""
    if len(w.w) != ops.q:
        raise ValueError("initialisation size does not match the scheme")
    row = starting_row(ops, n)
    acc = LaurentPoly.zero(ops.d)
    for r, wi in zip(row, w.w):
        acc = acc + r * wi
    return acc


def observability(ops: SchemeOperators) -> ObservabilityData:
    q, d = ops.q, ops.d
    rows = first_rows(ops, q)
    cp = charpoly_E(ops)
    found = None
    for ell in range(1, q + 1):
        omega_l = OperatorMatrix.from_rows(rows[:ell], d)
        x = solve_over_ring(omega_l, [-e for e in rows[ell]])
        if x is not None:
            found = (ell, ZPoly(list(x) + [LaurentPoly.one(d)], d))
            break
    if found is None:
        # Cayley-Hamilton always provides a ring solution at ell = q
        found = (q, cp)
    o, psi = found
    cof = psi.divides(cp)
    if cof is None:
        raise ArithmeticError("Psi_o does not divide the characteristic polynomial")
    Omega = OperatorMatrix.from_rows(rows[:q], d)
    # when o < q the row C E^o of Omega is a ring combination of earlier rows
    detO = LaurentPoly.zero(d) if o < q else det(Omega)
    return ObservabilityData(Omega, o, psi, not detO.is_zero(), detO, cp, cof)


def psi_annihilates(ops: SchemeOperators, psi: ZPoly) -> bool:
    return all(e.is_zero() for e in psi.apply_row(ops.C, ops.E))


def reduced_fd(psi: ZPoly) -> FDScheme:
    if not psi.is_monic():
        raise ValueError("Psi must be monic")
    amp = psi.shift(-psi.z_valuation())
    return FDScheme(amp, amp.degree + 1, "reduced")


def transfer_function(ops: SchemeOperators, obs: Optional[ObservabilityData] = None) -> TransferFunction:
    """H(z) = C adj(zI - A) B eps / det(zI - A), with common factors cancelled."""
    den = charpoly_A(ops)
    num = den - charpoly_E(ops)
    if obs is None:
        obs = observability(ops)
    cof = obs.cofactor
    if cof.degree < 1:
        return TransferFunction(num, den, None, None, None)
    rn, rd = cof.divides(num), cof.divides(den)
    if rn is None or rd is None:
        return TransferFunction(num, den, None, None, None)
    return TransferFunction(num, den, cof, rn, rd)


def transfer_numerator_adjugate(ops: SchemeOperators) -> ZPoly:
    """C adj(zI - A) B eps by cofactors over ZPoly entries (slow oracle)."""
    q, d = ops.q, ops.d
    z = ZPoly.z(d)
    zeroz = ZPoly([], d)
    onez = ZPoly([1], d)
    zmA = [[(z if i == j else zeroz) - ops.A_free[i, j] for j in range(q)] for i in range(q)]
    beps = ops.B_eq.matvec(ops.eps_column())
    total = zeroz
    for j in range(q):
        # adj(X)_{1j} = (-1)^{1+j} det(X without row j, column 1)
        sub = [[zmA[r][c] for c in range(1, q)] for r in range(q) if r != j]
        cof = _det_generic(sub, zeroz, onez)
        term = cof * beps[j]
        total = total + term if j % 2 == 0 else total - term
    return total


# ---------------------------------------------------------------------------
# Lattice application of stencils
# ---------------------------------------------------------------------------


def stencil_terms(p: LaurentPoly, exact: bool = False) -> list[tuple[tuple[int, ...], Any]]:
    conv = to_fraction if exact else (lambda c: float(to_fraction(c)))
    return [(e, conv(c)) for e, c in sorted(p.terms.items())]


def apply_stencil(p: LaurentPoly, u: np.ndarray, exact: bool = False) -> np.ndarray:
    """(p u)(j) = sum_e p_e u(j - e) on a periodic lattice."""
    if u.ndim != p.dim:
        raise ValueError(f"field has {u.ndim} axes, stencil acts in {p.dim}")
    out = np.zeros_like(u) if not exact else np.full(u.shape, Fraction(0), dtype=object)
    for e, c in stencil_terms(p, exact):
        out = out + c * np.roll(u, e, axis=tuple(range(u.ndim)))
    return out


def unobservable_check(
    Omega: OperatorMatrix,
    fields: Sequence[np.ndarray],
    interior: Optional[tuple] = None,
    tol: float = 1e-12,
) -> tuple[bool, float]:
    """Whether the stacked moment fields lie in ker(Omega) on the lattice.

    ``interior`` optionally restricts the residual to an index region (a
    tuple of slices), for data that are not periodic.  Object arrays of
    exact rationals are checked against exact zero.
    """
    if len(fields) != Omega.cols:
        raise ValueError(f"expected {Omega.cols} fields")
    shape = fields[0].shape
    if any(f.shape != shape for f in fields):
        raise ValueError("fields live on different grids")
    exact = fields[0].dtype == object
    worst = 0.0
    for i in range(Omega.rows):
        acc = None
        for j in range(Omega.cols):
            if Omega[i, j].is_zero():
                continue
            v = apply_stencil(Omega[i, j], fields[j], exact)
            acc = v if acc is None else acc + v
        if acc is None:
            continue
        region = acc[interior] if interior is not None else acc
        if exact:
            if any(x != 0 for x in region.ravel()):
                worst = max(worst, max(abs(float(x)) for x in region.ravel()))
        else:
            worst = max(worst, float(np.max(np.abs(region))) if region.size else 0.0)
    if exact:
        return worst == 0.0, worst
    return worst <= tol, worst
