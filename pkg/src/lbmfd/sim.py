"""Periodic-lattice time stepping and the numerical experiments.

Lattice Boltzmann steps are performed in double precision with the constant
moment matrices; the finite-difference schemes apply Laurent-polynomial
stencils with the upwind convention x^e u(j) = u(j - e).  Under diffusive
scaling the stored equilibria and initialisation weights carry the factor
dx^{eps_scale_i}, exactly as in the symbolic engine.
"""

from __future__ import annotations

import csv
import math
from collections import deque
from dataclasses import dataclass, field
from typing import Any, Callable, Optional, Sequence

import numpy as np

from .fdreduce import FDScheme, apply_stencil, first_rows
from .ring import field_inverse, to_fraction
from .scheme import Initialisation, SchemeOperators, SchemeSpec, build_scheme, collision_matrix_const

DATA = ("a", "b", "c", "d", "cosine", "bump10")


# ---------------------------------------------------------------------------
# Lattices and data
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Lattice:
    """Periodic lattice x_j = origin + j dx, j = 0..N-1 along each axis."""

    shape: tuple
    dx: float
    origin: float = 0.0

    def __post_init__(self):
        if any(n < 3 for n in self.shape):
            raise ValueError("each axis needs at least 3 points")

    @property
    def d(self) -> int:
        return len(self.shape)

    @property
    def length(self) -> float:
        return self.shape[0] * self.dx

    def coords(self) -> np.ndarray:
        if self.d != 1:
            raise NotImplementedError("coordinates are only provided in 1d")
        return self.origin + self.dx * np.arange(self.shape[0])

    def norm(self, u: np.ndarray) -> float:
        """Discrete L2 norm sqrt(dx^d sum u^2)."""
        return math.sqrt(self.dx ** self.d * float(np.sum(np.asarray(u, dtype=float) ** 2)))


def lattice_for(datum: str, n: int) -> Lattice:
    """[-1, 1] for the data (a)-(d), [0, 1] for the periodic ones."""
    if datum in ("a", "b", "c", "d"):
        return Lattice((n,), 2.0 / n, -1.0)
    return Lattice((n,), 1.0 / n, 0.0)


def datum_function(name: str) -> Callable[[np.ndarray], np.ndarray]:
    def inside(x):
        return np.abs(x) <= 0.5

    if name == "a":
        return lambda x: np.where(inside(x), 1.0, 0.0)
    if name == "b":
        return lambda x: np.where(inside(x), 1.0 - 2.0 * np.abs(x), 0.0)
    if name == "c":
        return lambda x: np.where(inside(x), np.cos(np.pi * x) ** 2, 0.0)
    if name == "d":
        def bump(x):
            r = 1.0 - (2.0 * x) ** 2
            out = np.zeros_like(x, dtype=float)
            ok = r > 0
            out[ok] = np.exp(-1.0 / r[ok])
            return out
        return bump
    if name == "cosine":
        return lambda x: np.cos(2 * np.pi * x)
    if name == "bump10":
        # scaled bump centred at 1/2 on [0, 1]
        def bump10(x):
            r = 1.0 - (4.0 * (x - 0.5)) ** 2
            out = np.zeros_like(x, dtype=float)
            ok = r > 0
            out[ok] = 0.1 * np.exp(-1.0 / r[ok])
            return out
        return bump10
    raise ValueError(f"unknown datum {name!r}; choose from {DATA}")


def initial_data(name: str, dx: float, n: int) -> np.ndarray:
    lat = lattice_for(name, n)
    if not math.isclose(lat.dx, dx):
        raise ValueError(f"datum {name!r} on {n} points needs dx = {lat.dx}")
    return datum_function(name)(lat.coords())


@dataclass(frozen=True)
class CauchyProblem:
    """u_t + V u_x - D u_xx = 0 on a periodic interval."""

    velocity: float
    datum: str
    diffusion: float = 0.0
    lower: float = 0.0
    length: float = 1.0

    def exact(self, t: float, x: np.ndarray) -> np.ndarray:
        y = np.mod(np.asarray(x, dtype=float) - self.velocity * t - self.lower, self.length) + self.lower
        if t == 0:
            y = np.asarray(x, dtype=float)
        if self.diffusion == 0:
            return datum_function(self.datum)(y)
        if self.datum != "cosine":
            raise ValueError("the diffusive exact solution is only available for the cosine datum")
        return math.exp(-4 * math.pi ** 2 * self.diffusion * t) * np.cos(2 * np.pi * y)


def exact_solution(problem: CauchyProblem, t: float, x: Any) -> Any:
    return problem.exact(t, x)


def cauchy_problem(ops: SchemeOperators, datum: str, lattice: Lattice) -> CauchyProblem:
    """Target problem read off the bulk modified equation."""
    from .modeq import modified_equation

    me = modified_equation(ops)
    V = float(to_fraction(me.transport[(1,)]))
    D = float(to_fraction(me.diffusion[(2,)])) if ops.spec.scaling == "diffusive" else 0.0
    return CauchyProblem(V, datum, D, lattice.origin, lattice.length)


def time_step(spec: SchemeSpec, dx: float) -> float:
    if spec.scaling == "acoustic":
        return dx / float(to_fraction(spec.lam))
    return dx * dx / float(to_fraction(spec.mu))


# ---------------------------------------------------------------------------
# Lattice Boltzmann stepping
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class LBMStepper:
    velocities: tuple
    M: np.ndarray
    Minv: np.ndarray
    K: np.ndarray

    @classmethod
    def from_spec(cls, spec: SchemeSpec, dx: float = 1.0) -> "LBMStepper":
        """Float matrices; equilibria scaled by dx^{eps_scale_i}."""
        fl = lambda rows: np.array([[float(to_fraction(c)) for c in r] for r in rows])
        K = fl(collision_matrix_const(spec))
        for i in range(1, spec.q):
            K[i, 0] *= dx ** spec.eps_scale[i]
        return cls(spec.velocities, fl(spec.M), fl(field_inverse(spec.M)), K)

    def __call__(self, m: np.ndarray) -> np.ndarray:
        return step_lbm(self, m)


def step_lbm(st: LBMStepper, m: np.ndarray) -> np.ndarray:
    """Collide in moment space, stream f_j by c_j, return to moments."""
    q = len(st.velocities)
    if m.shape[0] != q:
        raise ValueError(f"state has {m.shape[0]} moments, scheme has {q}")
    mstar = np.tensordot(st.K, m, axes=1)
    f = np.tensordot(st.Minv, mstar, axes=1)
    axes = tuple(range(m.ndim - 1))
    f = np.stack([np.roll(f[j], st.velocities[j], axis=axes) for j in range(q)])
    return np.tensordot(st.M, f, axes=1)


def initial_moments(spec: SchemeSpec, w: Initialisation, u0: np.ndarray, dx: float = 1.0) -> np.ndarray:
    """m_i(0) = dx^{eps_scale_i} w_i u0."""
    if len(w.w) != spec.q:
        raise ValueError("initialisation size does not match the scheme")
    return np.stack([dx ** k * apply_stencil(wi, u0) for wi, k in zip(w.w, spec.eps_scale)])


def lbm_trajectory(st: LBMStepper, m0: np.ndarray, steps: int) -> list[np.ndarray]:
    """Conserved moment at steps 0..steps."""
    m = np.array(m0, dtype=float)
    out = [m[0].copy()]
    for _ in range(steps):
        m = step_lbm(st, m)
        out.append(m[0].copy())
    return out


# ---------------------------------------------------------------------------
# Finite-difference stepping
# ---------------------------------------------------------------------------


def step_fd(fd: FDScheme, history: Sequence[np.ndarray]) -> np.ndarray:
    """m(n+1) from the last ``fd.degree`` levels (oldest first)."""
    if len(history) < fd.degree:
        raise ValueError(f"scheme needs {fd.degree} past levels, got {len(history)}")
    hist = list(history)[-fd.degree:]
    out = np.zeros_like(hist[-1], dtype=float)
    for c, u in zip(fd.update_coefficients(), hist):
        if not c.is_zero():
            out = out + apply_stencil(c, u)
    return out


def starting_levels(ops: SchemeOperators, m0: np.ndarray, count: int) -> list[np.ndarray]:
    """m_1(n) = (E^n m(0))_1 for n < count, from stencils acting on m(0)."""
    rows = first_rows(ops, max(count - 1, 0))
    levels = []
    for row in rows[:count]:
        acc = np.zeros_like(m0[0], dtype=float)
        for r, mi in zip(row, m0):
            if not r.is_zero():
                acc = acc + apply_stencil(r, mi)
        levels.append(acc)
    return levels


def fd_trajectory(ops: SchemeOperators, fd: FDScheme, m0: np.ndarray, steps: int) -> list[np.ndarray]:
    """Conserved moment at steps 0..steps from the multi-step scheme."""
    levels = starting_levels(ops, m0, min(fd.degree, steps + 1))
    hist = deque(levels, maxlen=fd.degree)
    out = list(levels)
    while len(out) <= steps:
        nxt = step_fd(fd, hist)
        hist.append(nxt)
        out.append(nxt)
    return out


# ---------------------------------------------------------------------------
# Experiments
# ---------------------------------------------------------------------------


@dataclass
class ExperimentConfig:
    """One experiment: a scheme, an initialisation and the lattice setup.

    ``scheme`` holds built-in name and parameters, ``init`` a named D1Q2
    initialisation ({"name": "LW"}) or explicit weights ({"w": [...]}; each
    entry a number or an {offset: coeff} stencil).
    """

    kind: str
    scheme: dict
    init: dict = field(default_factory=dict)
    datum: str = "cosine"
    grids: list = field(default_factory=list)
    final_time: Optional[float] = None
    steps: Optional[int] = None
    probe: int = 7
    output: Optional[str] = None
    fields: dict = field(default_factory=dict)  # unobservable runs: moment expressions
    interior: Optional[tuple] = None
    label: str = ""


def make_spec(cfg_scheme: dict) -> SchemeSpec:
    from .scheme import builtin

    params = {k: v for k, v in cfg_scheme.items() if k != "name"}
    return builtin(cfg_scheme["name"], **params)


def make_initialisation(spec: SchemeSpec, init: dict) -> Initialisation:
    from .scheme import d1q2_initialisation

    if "name" in init and "w" not in init:
        if spec.q != 2:
            raise ValueError("named initialisations are defined for D1Q2 only")
        return d1q2_initialisation(init["name"], spec.s[1], spec.eps[1])
    ws = init.get("w")
    if ws is None:
        ws = list(spec.eps)
    entries = []
    for wi in ws:
        if isinstance(wi, dict):
            entries.append({(int(k),) if not isinstance(k, tuple) else k: v for k, v in wi.items()})
        else:
            entries.append({(0,) * spec.d: wi})
    return Initialisation.stencils(entries, spec.d, init.get("name", "custom"))


@dataclass(frozen=True)
class ConvergenceResult:
    dx: list
    errors: list
    order: float
    blowup: bool

    def rows(self) -> list[tuple]:
        return [(h, e, self.order) for h, e in zip(self.dx, self.errors)]


def fit_order(dx: Sequence[float], errors: Sequence[float], last: int = 3) -> float:
    """Least-squares slope of log(error) against log(dx) on the finest grids."""
    x = np.log(np.asarray(dx[-last:], dtype=float))
    y = np.log(np.asarray(errors[-last:], dtype=float))
    return float(np.polyfit(x, y, 1)[0])


def run_final_error(cfg: ExperimentConfig, n: int) -> tuple[float, float]:
    """(dx, L2 error) at the final time on an n-point lattice."""
    lat = lattice_for(cfg.datum, n)
    spec = make_spec(cfg.scheme)
    ops = build_scheme(spec)
    w = make_initialisation(spec, cfg.init)
    u0 = datum_function(cfg.datum)(lat.coords())
    st = LBMStepper.from_spec(spec, lat.dx)
    m = initial_moments(spec, w, u0, lat.dx)
    dt = time_step(spec, lat.dx)
    steps = cfg.steps if cfg.steps is not None else int(round(cfg.final_time / dt))
    for _ in range(steps):
        m = step_lbm(st, m)
    prob = cauchy_problem(ops, cfg.datum, lat)
    err = m[0] - prob.exact(steps * dt, lat.coords())
    return lat.dx, lat.norm(err)


def convergence_study(cfg: ExperimentConfig) -> ConvergenceResult:
    if len(cfg.grids) < 4:
        raise ValueError("a convergence study needs at least 4 grids")
    dxs, errs = [], []
    blowup = False
    for n in sorted(cfg.grids):
        h, e = run_final_error(cfg, n)
        if not math.isfinite(e) or e > 1e6:
            blowup = True
        dxs.append(h)
        errs.append(e)
    order = fit_order(dxs, errs) if not blowup else float("nan")
    return ConvergenceResult(dxs, errs, order, blowup)


@dataclass(frozen=True)
class SmoothnessResult:
    steps: list
    times: list
    errors: list
    dissipation_n: list
    dissipation_bulk: float

    def rows(self) -> list[tuple]:
        out = []
        for i, (n, t, e) in enumerate(zip(self.steps, self.times, self.errors)):
            dn = self.dissipation_n[n - 1] if 1 <= n <= len(self.dissipation_n) else float("nan")
            out.append((n, t, e, dn, self.dissipation_bulk))
        return out


def smoothness_probe(cfg: ExperimentConfig, with_profile: bool = True) -> SmoothnessResult:
    """Signed error (numerical - exact) at the probe point for n = 0..steps."""
    n_pts = cfg.grids[0] if cfg.grids else 30
    lat = lattice_for(cfg.datum, n_pts)
    if not 0 <= cfg.probe < n_pts:
        raise ValueError("probe index outside the lattice")
    spec = make_spec(cfg.scheme)
    ops = build_scheme(spec)
    w = make_initialisation(spec, cfg.init)
    u0 = datum_function(cfg.datum)(lat.coords())
    st = LBMStepper.from_spec(spec, lat.dx)
    m = initial_moments(spec, w, u0, lat.dx)
    dt = time_step(spec, lat.dx)
    steps = cfg.steps if cfg.steps is not None else 20
    prob = cauchy_problem(ops, cfg.datum, lat)
    x = lat.coords()
    errs, times = [], []
    for n in range(steps + 1):
        if n:
            m = step_lbm(st, m)
        t = n * dt
        times.append(t)
        errs.append(float(m[0][cfg.probe] - prob.exact(t, x)[cfg.probe]))
    diss, bulk = [], float("nan")
    if with_profile:
        from .modeq import dissipation_profile

        prof = dissipation_profile(ops, w, steps)
        diss = [float(to_fraction(v)) for v in prof.per_n]
        bulk = float(to_fraction(prof.bulk))
    return SmoothnessResult(list(range(steps + 1)), times, errs, diss, bulk)


def second_differences(e: Sequence[float]) -> np.ndarray:
    e = np.asarray(e, dtype=float)
    return e[2:] - 2 * e[1:-1] + e[:-2]


def alternation_rate(errors: Sequence[float], first: int = 2, last: int = 20) -> float:
    """Fraction of sign changes between consecutive second differences
    d_n = e_n - 2 e_{n-1} + e_{n-2}, n = first..last."""
    d = second_differences(errors[first - 2:last + 1])
    s = np.sign(d)
    pairs = [(a, b) for a, b in zip(s[:-1], s[1:]) if a != 0 and b != 0]
    if not pairs:
        return 0.0
    return sum(1 for a, b in pairs if a != b) / len(pairs)


def _field_values(expr: Any, j: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Moment field given as a number, a datum name, or an expression in j / x."""
    if isinstance(expr, (int, float)):
        return np.full(j.shape, float(expr))
    if isinstance(expr, str) and expr in DATA:
        return datum_function(expr)(x)
    env = {"j": j.astype(float), "x": x, "np": np, "pi": np.pi, "exp": np.exp, "cos": np.cos}
    return np.asarray(eval(str(expr), {"__builtins__": {}}, env), dtype=float) * np.ones(j.shape)


@dataclass(frozen=True)
class UnobservableResult:
    steps: list
    l2_m1: list
    interior_max: list
    interior_mean: list
    in_kernel: bool
    kernel_residual: float

    def rows(self) -> list[tuple]:
        return list(zip(self.steps, self.l2_m1, self.interior_max))


def unobservable_run(cfg: ExperimentConfig) -> UnobservableResult:
    """Evolve a moment state with m_1(0) = 0 and monitor the conserved moment."""
    from .fdreduce import observability, unobservable_check

    n_pts = cfg.grids[0] if cfg.grids else 100
    lat = Lattice((n_pts,), 1.0 / n_pts, 0.0)
    spec = make_spec(cfg.scheme)
    j = np.arange(n_pts)
    x = lat.coords()
    names = [f"m{i + 1}" for i in range(spec.q)]
    m = np.stack([_field_values(cfg.fields.get(nm, 0), j, x) for nm in names])
    if cfg.interior is not None:
        lo, hi = cfg.interior
    else:
        lo, hi = n_pts // 4, (3 * n_pts) // 4
    obs = observability(build_scheme(spec))
    # a state can only be checked against ker(Omega) away from the wrap-around
    margin = max(1, obs.Omega.rows) * max(max(abs(v) for v in c) for c in spec.velocities)
    ok, res = unobservable_check(obs.Omega, list(m), (slice(lo + margin, hi - margin),), tol=1e-9)
    st = LBMStepper.from_spec(spec, lat.dx)
    steps = cfg.steps if cfg.steps is not None else 10
    l2, imax, imean = [], [], []
    for n in range(steps + 1):
        if n:
            m = step_lbm(st, m)
        l2.append(lat.norm(m[0]))
        inner = m[0][lo:hi + 1]
        imax.append(float(np.max(np.abs(inner))))
        imean.append(float(np.mean(inner)))
    return UnobservableResult(list(range(steps + 1)), l2, imax, imean, ok, res)


# ---------------------------------------------------------------------------
# CSV output
# ---------------------------------------------------------------------------


def write_csv(path: str, header: Sequence[str], rows: Sequence[Sequence[Any]]) -> None:
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(header)
        for r in rows:
            wr.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in r])


CSV_HEADERS = {
    "convergence": ("dx", "error", "order"),
    "smoothness": ("step", "time", "error", "dissipation_n", "dissipation_bulk"),
    "unobservable": ("step", "l2_m1", "interior_max"),
}
