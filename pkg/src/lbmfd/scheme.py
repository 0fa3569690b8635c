"""Multiple-relaxation-times lattice Boltzmann schemes as operator matrices.

A scheme is fixed by its velocities c_j, an invertible moment matrix M,
relaxation rates s_i and linear equilibria m_i^eq = eps_i m_1.  The
transport, collision and evolution matrices act on moments:

    T = M diag(x^{c_1}, ..., x^{c_q}) M^{-1},   K = I - S (I - eps (x) e_1),
    E = T K.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Mapping, Optional, Sequence

from gmpy2 import mpq

from .ring import (
    LaurentPoly,
    OperatorMatrix,
    as_coeff,
    field_det,
    field_inverse,
)

SCALINGS = ("acoustic", "diffusive")


def _is_rational(x: Any) -> bool:
    return isinstance(x, type(mpq(0)))


@dataclass(frozen=True)
class SchemeSpec:
    """Building blocks of an MRT scheme.

    ``s[0]`` (the rate of the conserved moment) is accepted and ignored.
    ``eps_scale[i]`` is the power of dx multiplying ``eps[i]`` under
    diffusive scaling; the stored equilibria are then the rescaled values.
    """

    velocities: tuple
    M: tuple
    s: tuple
    eps: tuple
    lam: Any = 1
    scaling: str = "acoustic"
    mu: Any = None
    eps_scale: Optional[tuple] = None
    name: str = "custom"

    def __post_init__(self):
        vel = tuple(tuple(int(v) for v in c) for c in self.velocities)
        q = len(vel)
        if q < 1:
            raise ValueError("at least one velocity is required")
        d = len(vel[0])
        if d < 1 or any(len(c) != d for c in vel):
            raise ValueError("velocities must share a positive dimension")
        if len(set(vel)) != q:
            raise ValueError("duplicate velocities")
        M = tuple(tuple(as_coeff(x) for x in row) for row in self.M)
        if len(M) != q or any(len(r) != q for r in M):
            raise ValueError(f"moment matrix must be {q}x{q}")
        if field_det(M) == 0:
            raise ValueError("singular moment matrix")
        s = tuple(as_coeff(x) for x in self.s)
        eps = tuple(as_coeff(x) for x in self.eps)
        if len(s) != q or len(eps) != q:
            raise ValueError("s and eps need one entry per velocity")
        if eps[0] != 1:
            raise ValueError("eps_1 must equal 1")
        for i, si in enumerate(s[1:], start=2):
            if _is_rational(si) and not (0 <= si <= 2):
                raise ValueError(f"s_{i} = {si} outside [0, 2]")
        if self.scaling not in SCALINGS:
            raise ValueError(f"scaling must be one of {SCALINGS}")
        lam = as_coeff(self.lam)
        mu = None if self.mu is None else as_coeff(self.mu)
        if self.scaling == "diffusive" and (mu is None or mu <= 0):
            raise ValueError("diffusive scaling needs mu > 0")
        if _is_rational(lam) and lam <= 0:
            raise ValueError("lambda must be positive")
        sc = tuple(int(v) for v in (self.eps_scale or (0,) * q))
        if len(sc) != q or sc[0] != 0 or any(v < 0 for v in sc):
            raise ValueError("eps_scale needs q non-negative entries with eps_scale[0] = 0")
        object.__setattr__(self, "velocities", vel)
        object.__setattr__(self, "M", M)
        object.__setattr__(self, "s", s)
        object.__setattr__(self, "eps", eps)
        object.__setattr__(self, "lam", lam)
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "eps_scale", sc)

    @property
    def d(self) -> int:
        return len(self.velocities[0])

    @property
    def q(self) -> int:
        return len(self.velocities)

    def replace(self, **changes) -> "SchemeSpec":
        from dataclasses import replace

        return replace(self, **changes)

    def with_rates(self, **idx_values) -> "SchemeSpec":
        """Copy with s_i / eps_i overridden, keys like ``s2=...`` or ``eps3=...``."""
        s, eps = list(self.s), list(self.eps)
        for k, v in idx_values.items():
            if k.startswith("s"):
                s[int(k[1:]) - 1] = v
            elif k.startswith("eps"):
                eps[int(k[3:]) - 1] = v
            else:
                raise KeyError(k)
        return self.replace(s=tuple(s), eps=tuple(eps))


@dataclass(frozen=True)
class Initialisation:
    """m(0) = w u0 with one Laurent-polynomial stencil per moment."""

    w: tuple
    name: str = "custom"

    @classmethod
    def local(cls, values: Sequence[Any], dim: int, name: str = "local") -> "Initialisation":
        return cls(tuple(LaurentPoly.const(dim, v) for v in values), name)

    @classmethod
    def stencils(cls, entries: Sequence[Mapping[Sequence[int], Any]], dim: int, name: str = "prepared") -> "Initialisation":
        return cls(tuple(LaurentPoly(dim, {tuple(e): c for e, c in ent.items()}) for ent in entries), name)

    def is_local(self) -> bool:
        return all(w.is_constant() for w in self.w)


@dataclass(frozen=True)
class SchemeOperators:
    spec: SchemeSpec
    T: OperatorMatrix
    K: OperatorMatrix
    E: OperatorMatrix
    A_free: OperatorMatrix
    B_eq: OperatorMatrix
    Q: int
    Minv: tuple
    # E and A_free are similar to diag(x^{c_j}) times these constant matrices
    N_E: tuple = field(repr=False)
    N_A: tuple = field(repr=False)

    @property
    def q(self) -> int:
        return self.spec.q

    @property
    def d(self) -> int:
        return self.spec.d

    @property
    def C(self) -> tuple:
        one, zero = LaurentPoly.one(self.d), LaurentPoly.zero(self.d)
        return (one,) + (zero,) * (self.q - 1)

    def eps_column(self) -> tuple:
        return tuple(LaurentPoly.const(self.d, e) for e in self.spec.eps)


def count_Q(s: Sequence[Any]) -> int:
    """Number of non-trivial relaxations among s_2..s_q (symbolic rates count)."""
    return sum(1 for si in s[1:] if si != 1)


def _matmul(a, b):
    n, m, p = len(a), len(b), len(b[0])
    return tuple(tuple(sum((a[i][k] * b[k][j] for k in range(m)), mpq(0)) for j in range(p)) for i in range(n))


def collision_matrix_const(spec: SchemeSpec) -> tuple:
    """K as a constant q x q matrix (rows of coefficients)."""
    q = spec.q
    rows = []
    for i in range(q):
        if i == 0:
            rows.append(tuple(mpq(1) if j == 0 else mpq(0) for j in range(q)))
            continue
        si, ei = spec.s[i], spec.eps[i]
        r = [mpq(0)] * q
        r[i] = 1 - si
        r[0] = r[0] + si * ei
        rows.append(tuple(r))
    return tuple(rows)


def build_scheme(spec: SchemeSpec) -> SchemeOperators:
    d, q = spec.d, spec.q
    M = spec.M
    Minv = tuple(tuple(r) for r in field_inverse(M))
    Mop = OperatorMatrix.from_rows(M, d)
    Minvop = OperatorMatrix.from_rows(Minv, d)
    D = OperatorMatrix.diag([LaurentPoly.monomial(d, c) for c in spec.velocities], d)
    T = Mop * D * Minvop
    Kc = collision_matrix_const(spec)
    K = OperatorMatrix.from_rows(Kc, d)
    E = T * K
    # S with the conserved moment left unrelaxed
    Sd = [mpq(0)] + [spec.s[i] for i in range(1, q)]
    I_S = OperatorMatrix.diag([1 - v for v in Sd], d)
    A_free = T * I_S
    B_eq = T * OperatorMatrix.diag(Sd, d)
    N_E = _matmul(_matmul(Minv, Kc), M)
    I_S_c = tuple(tuple((1 - Sd[i]) if i == j else mpq(0) for j in range(q)) for i in range(q))
    N_A = _matmul(_matmul(Minv, I_S_c), M)
    return SchemeOperators(spec, T, K, E, A_free, B_eq, count_Q(spec.s), Minv, N_E, N_A)


def pi_poly(ell: int, s: Any) -> Any:
    """pi_ell(s) = 1 - (1 - s)^ell, with pi_0 = 0."""
    if ell < 0:
        raise ValueError("ell must be non-negative")
    s = as_coeff(s)
    return 1 - (1 - s) ** ell


def collision_power(K: OperatorMatrix, ell: int) -> OperatorMatrix:
    """Closed form of K^ell: first column pi_ell(s_i) eps_i, diagonal (1 - s_i)^ell."""
    if ell < 0:
        raise ValueError("ell must be non-negative")
    q, d = K.rows, K.dim
    if not K.is_square() or any(not e.is_constant() for e in K.entries):
        raise ValueError("expected a constant collision matrix")
    if K[0, 0] != 1 or any(not K[0, j].is_zero() for j in range(1, q)):
        raise ValueError("first row of K must be e_1")
    rows = [[LaurentPoly.zero(d)] * q for _ in range(q)]
    rows[0][0] = LaurentPoly.one(d)
    for i in range(1, q):
        if any(not K[i, j].is_zero() for j in range(1, q) if j != i):
            raise ValueError("K is not of relaxation form")
        si = 1 - K[i, i].constant_term()
        rows[i][i] = LaurentPoly.const(d, (1 - si) ** ell)
        si_ei = K[i, 0].constant_term()
        if si_ei != 0:
            # pi_ell(s)/s is the polynomial sum_{k<ell} (1 - s)^k
            geom = sum(((1 - si) ** k for k in range(ell)), mpq(0))
            rows[i][0] = LaurentPoly.const(d, geom * si_ei)
    return OperatorMatrix.from_rows(rows, d)


# ---------------------------------------------------------------------------
# Built-in schemes
# ---------------------------------------------------------------------------

D1Q2_M = ((1, 1), (1, -1))
D1Q3_M = ((1, 1, 1), (0, 1, -1), (-2, 1, 1))


def d1q2(s2: Any, eps2: Any, lam: Any = 1) -> SchemeSpec:
    return SchemeSpec(((1,), (-1,)), D1Q2_M, (1, s2), (1, eps2), lam, name="d1q2")


def d1q3(s2: Any, s3: Any, eps2: Any, eps3: Any, lam: Any = 1) -> SchemeSpec:
    return SchemeSpec(((0,), (1,), (-1,)), D1Q3_M, (1, s2, s3), (1, eps2, eps3), lam, name="d1q3")


def d1q3_magic(s2: Any, eps2: Any, eps3: Any, lam: Any = 1) -> SchemeSpec:
    return d1q3(s2, 2 - as_coeff(s2), eps2, eps3, lam)


def link_trt(
    links: Sequence[Sequence[int]],
    s: Any,
    eps: Sequence[Any],
    lam: Any = 1,
    scaling: str = "acoustic",
    mu: Any = None,
    name: str = "link_trt",
) -> SchemeSpec:
    """Link two-relaxation-times scheme with q = 1 + 2W velocities.

    ``links`` lists c_2, c_4, ..., c_{2W}; the partner of each is its
    opposite.  ``eps`` holds all q equilibria (eps[0] = 1).  Under diffusive
    scaling the even (odd-parity) equilibria carry one power of dx.
    """
    links = [tuple(int(v) for v in c) for c in links]
    if not links:
        raise ValueError("at least one link is required")
    d = len(links[0])
    zero = (0,) * d
    vel = [zero]
    for c in links:
        if len(c) != d:
            raise ValueError("link dimensions differ")
        if c == zero:
            raise ValueError("link velocity must be nonzero")
        vel += [c, tuple(-v for v in c)]
    if len(set(vel)) != len(vel):
        raise ValueError("duplicate velocities")
    q = len(vel)
    M = [[1] * q]
    for j in range(len(links)):
        r1, r2 = [0] * q, [0] * q
        r1[1 + 2 * j], r1[2 + 2 * j] = 1, -1
        r2[1 + 2 * j], r2[2 + 2 * j] = 1, 1
        M += [r1, r2]
    s = as_coeff(s)
    rates = [1] + [s, 2 - s] * len(links)
    sc = [0] + [1, 0] * len(links) if scaling == "diffusive" else None
    if len(eps) != q:
        raise ValueError(f"expected {q} equilibria")
    return SchemeSpec(tuple(vel), tuple(map(tuple, M)), tuple(rates), tuple(eps), lam, scaling, mu, sc and tuple(sc), name)


D2Q5_LINKS = ((1, 0), (0, 1))
D2Q9_LINKS = ((1, 0), (0, 1), (1, 1), (-1, 1))


def builtin(name: str, **params) -> SchemeSpec:
    """Resolve a built-in scheme by name."""
    name = name.lower()
    if name == "d1q2":
        return d1q2(params["s2"], params["eps2"], params.get("lam", 1))
    if name == "d1q3":
        if params.get("magic"):
            return d1q3_magic(params["s2"], params["eps2"], params["eps3"], params.get("lam", 1))
        return d1q3(params["s2"], params["s3"], params["eps2"], params["eps3"], params.get("lam", 1))
    presets = {"d1q3_link": ((1,),), "d2q5": D2Q5_LINKS, "d2q9": D2Q9_LINKS}
    if name in presets or name == "link_trt":
        links = params.get("links", presets.get(name))
        if links is None:
            raise ValueError("link_trt needs 'links'")
        q = 1 + 2 * len(links)
        eps = params.get("eps")
        if eps is None:
            eps = [1] + [params.get(f"eps{i}", 0) for i in range(2, q + 1)]
        return link_trt(links, params["s"], eps, params.get("lam", 1), params.get("scaling", "acoustic"),
                        params.get("mu"), name if name != "link_trt" else "link_trt")
    raise ValueError(f"unknown scheme {name!r}")


# ---------------------------------------------------------------------------
# Named initialisations of the D1Q2 scheme
# ---------------------------------------------------------------------------

D1Q2_INITS = ("LF", "FC-good", "FC-bad", "LW", "RE1")


def d1q2_initialisation(name: str, s2: Any, eps2: Any) -> Initialisation:
    """Local and prepared initialisations m(0) = w u0 for the D1Q2 scheme."""
    s, e = as_coeff(s2), as_coeff(eps2)
    half = mpq(1, 2)
    key = name.upper()
    if key == "LF":
        w = [{(0,): 1}, {(0,): e}]
    elif key in ("FC-GOOD", "FC-BAD", "LW"):
        if s == 1:
            raise ValueError(f"{name} needs s2 != 1")
        c2 = lambda sign: (1 + sign * s * e) / (2 * (1 - s))
        if key == "FC-GOOD":
            w = [{(1,): half, (-1,): half},
                 {(1,): -c2(1), (-1,): c2(-1), (0,): e / (1 - s)}]
        elif key == "FC-BAD":
            w = [{(2,): e / 2, (-2,): -e / 2, (1,): half, (-1,): half},
                 {(2,): -e * c2(1), (-2,): -e * c2(-1), (1,): -c2(1), (-1,): c2(-1)}]
        else:
            a = (1 - e * e)
            w = [{(1,): a / 2, (-1,): a / 2, (0,): e * e},
                 {(1,): -c2(1) * a, (-1,): c2(-1) * a, (0,): e * (1 - s * e * e) / (1 - s)}]
    elif key == "RE1":
        a = (1 - e * e) / (2 * s)
        w = [{(0,): 1}, {(1,): a, (-1,): -a, (0,): e}]
    else:
        raise ValueError(f"unknown initialisation {name!r}; choose from {D1Q2_INITS}")
    return Initialisation.stencils(w, 1, key)
