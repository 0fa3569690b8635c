"""Modified equations from truncated Fourier symbols.

Every shift x^e is replaced by its symbol exp(-h e.kappa), where h = dx and
kappa_l stands for the derivative d/dx_l (i xi_l in Fourier variables).
Keeping kappa formal makes all coefficients real rationals, so the vanishing
of imaginary parts is structural rather than checked.

A series is a truncated sum  sum_{k <= H} h^k P_k(kappa)  stored as a dict
{(k, kappa-exponent): coefficient}.  Coefficients live in any exact field:
gmpy2 rationals for numerical parameters, sympy field elements when some
initialisation or relaxation parameters are unknowns.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import product
from math import factorial
from typing import Any, Iterable, Mapping, Optional, Sequence

from gmpy2 import mpq

from .ring import LaurentPoly, as_coeff, fmt_coeff
from .scheme import Initialisation, SchemeOperators, SchemeSpec, build_scheme

MAX_ORDER = 6


class ModeqError(ValueError):
    """Raised when a modified equation cannot be extracted (ill-posed input)."""


# ---------------------------------------------------------------------------
# Truncated series in h with polynomial-in-kappa coefficients
# ---------------------------------------------------------------------------


class Series:
    __slots__ = ("d", "H", "terms")

    def __init__(self, d: int, H: int, terms: Optional[Mapping] = None):
        self.d, self.H = d, H
        self.terms = {k: v for k, v in (terms or {}).items() if k[0] <= H and v != 0}

    @classmethod
    def const(cls, d: int, H: int, c: Any) -> "Series":
        return cls(d, H, {(0, (0,) * d): as_coeff(c)})

    @classmethod
    def monomial(cls, d: int, H: int, hdeg: int, kexp: Sequence[int], c: Any = 1) -> "Series":
        return cls(d, H, {(hdeg, tuple(kexp)): as_coeff(c)})

    def __add__(self, other: "Series") -> "Series":
        out = dict(self.terms)
        for k, v in other.terms.items():
            out[k] = out.get(k, 0) + v
        return Series(self.d, self.H, out)

    def __neg__(self) -> "Series":
        return Series(self.d, self.H, {k: -v for k, v in self.terms.items()})

    def __sub__(self, other: "Series") -> "Series":
        return self + (-other)

    def scale(self, c: Any) -> "Series":
        if c == 0:
            return Series(self.d, self.H)
        return Series(self.d, self.H, {k: v * c for k, v in self.terms.items()})

    def shift_h(self, k: int) -> "Series":
        """Multiply by h^k (k >= 0)."""
        return Series(self.d, self.H, {(a + k, e): v for (a, e), v in self.terms.items()})

    def __mul__(self, other: "Series") -> "Series":
        if not isinstance(other, Series):
            return self.scale(other)
        H = self.H
        out: dict = {}
        for (a, e1), v1 in self.terms.items():
            for (b, e2), v2 in other.terms.items():
                if a + b > H:
                    continue
                k = (a + b, tuple(x + y for x, y in zip(e1, e2)))
                out[k] = out.get(k, 0) + v1 * v2
        return Series(self.d, H, out)

    __rmul__ = scale

    def constant(self) -> Any:
        """The h^0 part, which must be kappa-free for all symbols used here."""
        c = mpq(0)
        for (a, e), v in self.terms.items():
            if a == 0:
                if any(e):
                    raise ModeqError("h^0 part depends on kappa")
                c = c + v
        return c

    def h_part(self, k: int) -> dict:
        return {e: v for (a, e), v in self.terms.items() if a == k}

    def reciprocal(self) -> "Series":
        c0 = self.constant()
        if c0 == 0:
            raise ModeqError("series is not invertible (zero constant term)")
        u = (self - Series.const(self.d, self.H, c0)).scale(1 / c0)
        # 1/(c0 (1+u)) = (1/c0) sum (-u)^k, u = O(h)
        acc = Series.const(self.d, self.H, 1)
        term = Series.const(self.d, self.H, 1)
        for _ in range(self.H):
            term = term * (-u)
            acc = acc + term
        return acc.scale(1 / c0)

    def log(self) -> "Series":
        if self.constant() != 1:
            raise ModeqError("log needs a series with constant term 1")
        u = self - Series.const(self.d, self.H, 1)
        acc = Series(self.d, self.H)
        term = Series.const(self.d, self.H, 1)
        for k in range(1, self.H + 1):
            term = term * u
            acc = acc + term.scale(mpq((-1) ** (k + 1), k))
        return acc

    def exp(self) -> "Series":
        c0 = self.constant()
        if c0 != 0:
            raise ModeqError("exp implemented for O(h) series only")
        acc = Series.const(self.d, self.H, 1)
        term = Series.const(self.d, self.H, 1)
        for k in range(1, self.H + 1):
            term = term * self
            acc = acc + term.scale(mpq(1, factorial(k)))
        return acc

    def __eq__(self, other: Any) -> bool:
        if not isinstance(other, Series):
            return NotImplemented
        return self.terms == other.terms

    def __repr__(self) -> str:
        parts = [f"{fmt_coeff(v)}*h^{a}*k^{e}" for (a, e), v in sorted(self.terms.items())]
        return "Series(" + " + ".join(parts) + ")"


class _SymbolCache:
    """Memoized symbols of shift monomials for one (d, H)."""

    def __init__(self, d: int, H: int):
        self.d, self.H = d, H
        self.cache: dict = {}

    def shift(self, e: Sequence[int]) -> Series:
        e = tuple(e)
        s = self.cache.get(e)
        if s is None:
            lin = Series(self.d, self.H, {(1, tuple(1 if j == i else 0 for j in range(self.d))): mpq(-v)
                                          for i, v in enumerate(e) if v})
            s = lin.exp()
            self.cache[e] = s
        return s

    def laurent(self, p: LaurentPoly, hpow: int = 0) -> Series:
        acc = Series(self.d, self.H)
        for e, c in p.terms.items():
            acc = acc + self.shift(e).scale(c)
        return acc.shift_h(hpow) if hpow else acc


def symbol_of(p: LaurentPoly, H: int) -> Series:
    return _SymbolCache(p.dim, H).laurent(p)


# ---------------------------------------------------------------------------
# Symbols of starting schemes and of the bulk scheme
# ---------------------------------------------------------------------------


def _check_order(H: int) -> None:
    if not 1 <= H <= MAX_ORDER:
        raise ModeqError(f"truncation order must lie in 1..{MAX_ORDER}")


def default_order(spec: SchemeSpec) -> int:
    return 3 if spec.scaling == "acoustic" else 4


def start_symbol(ops: SchemeOperators, w: Initialisation, n: int, H: int) -> Series:
    """Series of (E^n w)_1 with eps_i and w_i carrying h^{eps_scale_i}."""
    _check_order(H)
    spec = ops.spec
    d, q = spec.d, spec.q
    if len(w.w) != q:
        raise ModeqError("initialisation size does not match the scheme")
    sym = _SymbolCache(d, H)
    sc = spec.eps_scale
    v = [sym.laurent(wi, sc[i]) for i, wi in enumerate(w.w)]
    shifts = [sym.shift(c) for c in spec.velocities]
    M, Minv = spec.M, ops.Minv
    eq = [Series.monomial(d, H, sc[i], (0,) * d, spec.s[i] * spec.eps[i]) for i in range(q)]
    for _ in range(n):
        u = [v[0]] + [v[i].scale(1 - spec.s[i]) + eq[i] * v[0] for i in range(1, q)]
        f = [sum((u[k].scale(Minv[j][k]) for k in range(q) if Minv[j][k] != 0), Series(d, H)) for j in range(q)]
        f = [shifts[j] * f[j] for j in range(q)]
        v = [sum((f[k].scale(M[i][k]) for k in range(q) if M[i][k] != 0), Series(d, H)) for i in range(q)]
    return v[0]


def _scaled_charpoly_coeffs(ops: SchemeOperators) -> list[dict]:
    """Coefficients of det(zI - E) with eps_i -> t^{sigma_i} eps_i, as
    {x-exponent: {t-power: coeff}} per power of z (Lagrange interpolation in t)."""
    from .fdreduce import charpoly_E

    spec = ops.spec
    sig = spec.eps_scale
    deg = spec.q * max(sig)
    pts = [mpq(k + 1) for k in range(deg + 1)]
    samples = []
    for t in pts:
        eps = tuple(e * t ** sig[i] for i, e in enumerate(spec.eps))
        samples.append(charpoly_E(build_scheme(spec.replace(eps=eps))))
    q = spec.q
    out = []
    for k in range(q + 1):
        keys = set()
        for cp in samples:
            keys |= set(cp.coeff(k).terms)
        coeffs: dict = {}
        for e in keys:
            ys = [cp.coeff(k).coeff(e) for cp in samples]
            poly = _interpolate(pts, ys)
            coeffs[e] = {m: c for m, c in enumerate(poly) if c != 0}
        out.append(coeffs)
    return out


def _interpolate(xs: Sequence[Any], ys: Sequence[Any]) -> list:
    """Monomial coefficients of the interpolating polynomial (Newton form)."""
    n = len(xs)
    coef = list(ys)
    for j in range(1, n):
        for i in range(n - 1, j - 1, -1):
            coef[i] = (coef[i] - coef[i - 1]) / (xs[i] - xs[i - j])
    poly = [mpq(0)] * n
    for i in range(n - 1, -1, -1):
        # poly = poly * (x - xs[i]) + coef[i]
        new = [mpq(0)] * n
        for k in range(n - 1):
            new[k + 1] = new[k + 1] + poly[k]
        for k in range(n):
            new[k] = new[k] - poly[k] * xs[i]
        new[0] = new[0] + coef[i]
        poly = new
    return poly


def amp_series(ops: SchemeOperators, H: int, source: str = "bulk") -> list[Series]:
    """Coefficients (in z) of an amplification polynomial as series."""
    from .fdreduce import bulk_fd, observability

    spec = ops.spec
    sym = _SymbolCache(spec.d, H)
    if any(spec.eps_scale):
        if source != "bulk":
            raise ModeqError("only the bulk polynomial is available under eps scaling")
        out = []
        for coeffs in _scaled_charpoly_coeffs(ops):
            acc = Series(spec.d, H)
            for e, tp in coeffs.items():
                for m, c in tp.items():
                    acc = acc + sym.shift(e).shift_h(m).scale(c)
            out.append(acc)
        return out
    if source == "bulk":
        amp = bulk_fd(ops).amp
    elif source == "reduced":
        amp = observability(ops).psi
    else:
        raise ValueError(f"unknown source {source!r}")
    return [sym.laurent(c) for c in amp.coeffs]


def _poly_eval(coeffs: Sequence[Series], g: Series) -> tuple[Series, Series]:
    d, H = g.d, g.H
    p = Series(d, H)
    dp = Series(d, H)
    for k in range(len(coeffs) - 1, -1, -1):
        dp = dp * g + p
        p = p * g + coeffs[k]
    return p, dp


def bulk_root(coeffs: Sequence[Series]) -> Series:
    """The root g = 1 + O(h) of sum_k coeffs[k] z^k, by Newton iteration."""
    d, H = coeffs[0].d, coeffs[0].H
    g = Series.const(d, H, 1)
    p, dp = _poly_eval(coeffs, g)
    if p.constant() != 0:
        raise ModeqError("z = 1 is not a root at dx = 0: scheme is not consistent")
    if dp.constant() == 0:
        raise ModeqError("z = 1 is a multiple root at dx = 0: consistency root is degenerate")
    for _ in range(H + 1):
        p, dp = _poly_eval(coeffs, g)
        if not p.terms:
            break
        g = g - p * dp.reciprocal()
    p, _ = _poly_eval(coeffs, g)
    if p.terms:
        raise ModeqError("Newton iteration did not converge")
    return g


def bulk_symbol(ops: SchemeOperators, H: int) -> Series:
    _check_order(H)
    try:
        return bulk_root(amp_series(ops, H, "bulk"))
    except ModeqError as err:
        if "degenerate" not in str(err) or any(ops.spec.eps_scale):
            raise
    # e.g. conserved non-conserved moments: the minimal polynomial has a simple root
    return bulk_root(amp_series(ops, H, "reduced"))


def amp_symbol(ops: SchemeOperators, w: Optional[Initialisation], n: Optional[int], order: int) -> Series:
    """Starting-scheme symbol when ``w`` is given, else the bulk consistency root."""
    if w is None:
        return bulk_symbol(ops, order)
    if n is None or n < 0:
        raise ModeqError("starting schemes need n >= 0")
    return start_symbol(ops, w, n, order)


# ---------------------------------------------------------------------------
# Modified equations
# ---------------------------------------------------------------------------


def multi_indices(d: int, k: int) -> list[tuple[int, ...]]:
    return sorted((m for m in product(range(k + 1), repeat=d) if sum(m) == k), reverse=True)


def index_label(m: Sequence[int]) -> str:
    """(1, 1) -> 'x1x2', (2,) -> 'x1x1'."""
    return "".join(f"x{i + 1}" * k for i, k in enumerate(m))


@dataclass(frozen=True)
class ModifiedEquation:
    """d_t phi + sum V_m d^m phi - c sum D_m d^m phi = O(.),

    with c = dx (acoustic) or 1 (diffusive); V over |m| = 1, D over |m| = 2.
    """

    scaling: str
    n: Optional[int]
    transport: dict
    diffusion: dict
    order: int
    log_terms: dict = field(repr=False, default_factory=dict)

    def report(self) -> dict:
        return {
            "scaling": self.scaling,
            "n": self.n if self.n is not None else "bulk",
            "transport": {index_label(k): fmt_coeff(v) for k, v in self.transport.items()},
            "diffusion": {index_label(k): fmt_coeff(v) for k, v in self.diffusion.items()},
        }


def extract(ops: SchemeOperators, g: Series, n: int, label_n: Optional[int], H: int) -> ModifiedEquation:
    spec = ops.spec
    d = spec.d
    L = g.log()
    if spec.scaling == "acoustic":
        k1, k2, fac = 1, 2, spec.lam / n
    else:
        if any(L.h_part(1).values()):
            raise ModeqError("O(1/dx) drift under diffusive scaling: scheme is not consistent")
        k1, k2, fac = 2, 2, spec.mu / n
    L1, L2 = L.h_part(k1), L.h_part(k2)
    transport = {m: -fac * L1.get(m, 0) for m in multi_indices(d, 1)}
    diffusion = {m: fac * L2.get(m, 0) for m in multi_indices(d, 2)}
    return ModifiedEquation(spec.scaling, label_n, transport, diffusion, H, dict(L.terms))


def modified_equation(
    ops: SchemeOperators,
    w: Optional[Initialisation] = None,
    n: Optional[int] = None,
    order: Optional[int] = None,
) -> ModifiedEquation:
    """Bulk modified equation (w None) or that of the n-th starting scheme."""
    H = order or default_order(ops.spec)
    if w is None:
        return extract(ops, bulk_symbol(ops, H), 1, None, H)
    if n is None or n < 1:
        raise ModeqError("starting schemes need n >= 1")
    g = start_symbol(ops, w, n, H)
    c = g.constant()
    if c != 1:
        raise ModeqError(f"sum of the conserved-moment initialisation is {fmt_coeff(c)}, not 1")
    return extract(ops, g, n, n, H)


# ---------------------------------------------------------------------------
# First-order operator matrix G and closed forms
# ---------------------------------------------------------------------------


def g_matrix(spec: SchemeSpec) -> list[list[dict]]:
    """G = M (sum_m diag(c_j^m) d^m) M^{-1}, entries {multi-index: coeff}."""
    from .ring import field_inverse

    q, d = spec.q, spec.d
    Minv = field_inverse(spec.M)
    G = [[{} for _ in range(q)] for _ in range(q)]
    for a in range(d):
        m = tuple(1 if i == a else 0 for i in range(d))
        for i in range(q):
            for j in range(q):
                v = sum((spec.M[i][k] * spec.velocities[k][a] * Minv[k][j] for k in range(q)), mpq(0))
                if v != 0:
                    G[i][j][m] = v
    return G


def _op_add(a: dict, b: dict, cb: Any = 1) -> dict:
    out = dict(a)
    for k, v in b.items():
        out[k] = out.get(k, 0) + cb * v
    return {k: v for k, v in out.items() if v != 0}


def _op_mul(a: dict, b: dict) -> dict:
    out: dict = {}
    for k1, v1 in a.items():
        for k2, v2 in b.items():
            k = tuple(x + y for x, y in zip(k1, k2))
            out[k] = out.get(k, 0) + v1 * v2
    return {k: v for k, v in out.items() if v != 0}


def bulk_closed_form(spec: SchemeSpec) -> tuple[dict, dict]:
    """Transport and diffusion of the acoustic bulk equation from G."""
    G = g_matrix(spec)
    q, d = spec.q, spec.d
    lam = spec.lam
    a1 = dict(G[0][0])
    for r in range(1, q):
        a1 = _op_add(a1, G[0][r], spec.eps[r])
    diff: dict = {}
    for i in range(1, q):
        inner = dict(G[i][0])
        for r in range(1, q):
            inner = _op_add(inner, G[i][r], spec.eps[r])
        inner = _op_add(inner, a1, -spec.eps[i])
        term = _op_mul(G[0][i], inner)
        diff = _op_add(diff, term, 1 / spec.s[i] - mpq(1, 2))
    transport = {m: lam * a1.get(m, 0) for m in multi_indices(d, 1)}
    diffusion = {m: lam * diff.get(m, 0) for m in multi_indices(d, 2)}
    return transport, diffusion


def start_first_order_closed_form(spec: SchemeSpec, w: Sequence[Any], n: int) -> dict:
    """h^1 coefficient of the starting symbol for a local initialisation w."""
    from .scheme import pi_poly

    G = g_matrix(spec)
    q = spec.q
    w = [as_coeff(v) for v in w]
    acc = {k: v * w[0] for k, v in G[0][0].items()}
    for r in range(1, q):
        acc = _op_add(acc, G[0][r], w[r])
        pis = sum((pi_poly(n - l, spec.s[r]) for l in range(n)), mpq(0))
        acc = _op_add(acc, G[0][r], (spec.eps[r] * w[0] - w[r]) * pis / n)
    return {m: -n * v for m, v in acc.items()}


# ---------------------------------------------------------------------------
# Consistency of initialisations
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ConsistencyReport:
    checks: dict  # name -> (value, expected, passed)

    @property
    def passed(self) -> bool:
        return all(ok for _, _, ok in self.checks.values())

    def failed(self) -> list[str]:
        return [k for k, (_, _, ok) in self.checks.items() if not ok]


def check_consistency(w: Initialisation, ops: SchemeOperators) -> ConsistencyReport:
    spec = ops.spec
    G = g_matrix(spec)
    checks = {}
    w1 = w.w[0]
    checks["w1_sum"] = (w1.coeff_sum(), mpq(1), w1.coeff_sum() == 1)
    for m in multi_indices(spec.d, 1):
        v = w1.moment(m)
        checks[f"drift_{index_label(m)}"] = (v, mpq(0), v == 0)
    for r in range(1, spec.q):
        if G[0][r]:
            v = w.w[r].coeff_sum()
            checks[f"equilibrium_{r + 1}"] = (v, spec.eps[r], v == spec.eps[r])
    return ConsistencyReport(checks)


# ---------------------------------------------------------------------------
# Dissipation profiles and matching
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DissipationProfile:
    per_n: list  # diffusion / lambda for n = 1..n_max (1d, the d_xx coefficient)
    bulk: Any
    transport_per_n: list
    transport_bulk: Any


def dissipation_profile(ops: SchemeOperators, w: Initialisation, n_max: int, order: Optional[int] = None,
                        index: Optional[tuple] = None) -> DissipationProfile:
    """Diffusion coefficient (divided by the velocity scale) per starting step."""
    spec = ops.spec
    d = spec.d
    idx = index or tuple(2 if i == 0 else 0 for i in range(d))
    tidx = tuple(1 if i == 0 else 0 for i in range(d))
    scale = spec.lam if spec.scaling == "acoustic" else spec.mu
    bulk = modified_equation(ops, order=order)
    per_n, tr = [], []
    for n in range(1, n_max + 1):
        me = modified_equation(ops, w, n, order)
        per_n.append(me.diffusion[idx] / scale)
        tr.append(me.transport[tidx] / scale)
    return DissipationProfile(per_n, bulk.diffusion[idx] / scale, tr, bulk.transport[tidx] / scale)


@dataclass
class MatchBranch:
    conditions: dict  # assumptions of the branch, e.g. {"s3": "1"} or {"s3": "!=1"}
    values: dict  # solved unknowns -> exact string; "free" for undetermined ones
    n_equated: list


@dataclass
class MatchResult:
    feasible: bool
    branches: list
    infeasible: list  # (conditions, violated label) for infeasible branches

    def report(self) -> dict:
        return {
            "feasible": self.feasible,
            "branches": [{"conditions": b.conditions, "values": b.values, "n": b.n_equated} for b in self.branches],
            "infeasible": [{"conditions": c, "violated": v} for c, v in self.infeasible],
        }


class UnsupportedMatch(ValueError):
    pass


def _to_sympy(x: Any, ring_to_expr) -> Any:
    import sympy

    if isinstance(x, type(mpq(0))):
        return sympy.Rational(int(x.numerator), int(x.denominator))
    return ring_to_expr(x)


def _fmt_expr(e) -> str:
    import sympy

    e = sympy.nsimplify(e) if e.is_number else sympy.simplify(e)
    if e.is_Rational:
        return str(e.p) if e.q == 1 else f"{e.p}/{e.q}"
    return str(e)


def match_dissipation(
    spec: SchemeSpec,
    free: Iterable[str],
    w_fixed: Optional[Mapping[str, Any]] = None,
    order: Optional[int] = None,
    n_values: Optional[Sequence[int]] = None,
) -> MatchResult:
    """Choose free initialisation values w_i / rates s_i so that every
    initialisation scheme has the bulk transport and diffusion.

    Non-free w_i default to eps_i (w_1 = 1); ``w_fixed`` overrides them.
    Each free rate is split into the branches s_i = 1 and s_i != 1 because
    the number of initialisation schemes depends on it.  The equated steps
    are n = 1..o-1 when the scheme is not observable (o < Q+1) and no rate
    is free, else n = 1..Q.
    """
    import sympy
    from sympy import QQ, field as sym_field

    free = sorted(set(free), key=lambda v: (v[0], int(v[1:])))
    q = spec.q
    for v in free:
        if v[0] not in "sw" or not v[1:].isdigit() or not 2 <= int(v[1:]) <= q:
            raise UnsupportedMatch(f"unknown free variable {v!r}")
    free_s = [v for v in free if v[0] == "s"]
    free_w = [v for v in free if v[0] == "w"]
    if not free:
        raise UnsupportedMatch("no free variables")
    K, *gens = sym_field(",".join(free), QQ)
    sym = dict(zip(free, gens))
    to_expr = lambda e: e.as_expr()  # noqa: E731
    H = order or default_order(spec)
    base_w = [mpq(1)] + list(spec.eps[1:])
    for k, v in (w_fixed or {}).items():
        base_w[int(k[1:]) - 1] = as_coeff(v)
    branches, infeasible = [], []
    for choice in product((True, False), repeat=len(free_s)):
        cond = {}
        s = list(spec.s)
        for name, is_one in zip(free_s, choice):
            i = int(name[1:]) - 1
            s[i] = mpq(1) if is_one else sym[name]
            cond[name] = "1" if is_one else "!=1"
        bspec = spec.replace(s=tuple(s))
        ops = build_scheme(bspec)
        w = list(base_w)
        for name in free_w:
            w[int(name[1:]) - 1] = sym[name]
        init = Initialisation.local(w, spec.d, "match")
        if n_values is not None:
            ns = list(n_values)
        elif free_s:
            ns = list(range(1, ops.Q + 1))
        else:
            from .fdreduce import observability

            o = observability(ops).index_o
            ns = list(range(1, o)) if o < ops.Q + 1 else list(range(1, ops.Q + 1))
        bulk = modified_equation(ops, order=H)
        eqs = []
        for n in ns:
            me = modified_equation(ops, init, n, H)
            for tab, ref in ((me.transport, bulk.transport), (me.diffusion, bulk.diffusion)):
                for m in tab:
                    diff = tab[m] - ref[m]
                    expr = sympy.together(_to_sympy(diff, to_expr))
                    num = sympy.numer(expr)
                    if num != 0:
                        eqs.append((n, m, sympy.expand(num)))
        uvars = [sympy.Symbol(v) for v in free if cond.get(v) != "1"]
        excluded = [sympy.Symbol(v) for v in free_s if cond[v] == "!=1"]
        sols = _solve(eqs, uvars, excluded)
        if sols is None:
            infeasible.append((cond, _violated(eqs, uvars, excluded)))
            continue
        for sol in sols:
            vals = {}
            for v in free:
                if cond.get(v) == "1":
                    continue
                sv = sympy.Symbol(v)
                vals[v] = _fmt_expr(sol[sv]) if sv in sol else ("free" if v[0] == "w" else "free (!=1)")
            branches.append(MatchBranch(dict(cond), vals, ns))
    return MatchResult(bool(branches), branches, infeasible)


def _solve(eqs, uvars, excluded) -> Optional[list]:
    import sympy

    exprs = [e for _, _, e in eqs]
    if not exprs:
        return [{}]
    if any(e.free_symbols.isdisjoint(uvars) and e != 0 for e in exprs):
        return None
    for e in exprs:
        if any(sympy.degree(e, x) > 2 for x in uvars):
            raise UnsupportedMatch("matching equations beyond quadratic in an unknown are not supported")
    sols = sympy.solve(exprs, uvars, dict=True)
    good = []
    for sol in sols:
        if any(sympy.simplify(sol.get(x, x) - 1) == 0 for x in excluded):
            continue
        if all(sympy.simplify(e.subs(sol)) == 0 for e in exprs):
            good.append(sol)
    return good or None


def _violated(eqs, uvars, excluded) -> str:
    """Label of the first equation whose addition makes the system infeasible."""
    for k in range(1, len(eqs) + 1):
        if _solve(eqs[:k], uvars, excluded) is None:
            n, m, _ = eqs[k - 1]
            return f"d_{index_label(m)} (n={n})"
    return "unknown"
