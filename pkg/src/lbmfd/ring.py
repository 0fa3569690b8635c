"""Exact algebra over the ring of multivariate Laurent polynomials.

The shift indeterminates x_1..x_d act on lattice functions with the upwind
convention (x_l phi)(x) = phi(x - dx e_l).  Coefficients are exact rationals
(gmpy2 ``mpq``); any other exact field element supporting + - * / and
comparison with 0 (e.g. sympy ``FracElement``) is carried through untouched,
which is how symbolic unknowns enter the matching solver.
"""

from __future__ import annotations

from fractions import Fraction
from itertools import combinations
from typing import Any, Iterable, Mapping, Optional, Sequence

from gmpy2 import mpq

MAX_EXPONENT = 64
MAX_DET_SIZE = 12

_MPQ = type(mpq(0))

Exponent = tuple[int, ...]


def as_coeff(x: Any) -> Any:
    """Coerce a number to an exact coefficient.

    Floats go through their shortest decimal representation, so 1.99 becomes
    199/100 rather than the nearest binary fraction.
    """
    if isinstance(x, _MPQ):
        return x
    if isinstance(x, (int, Fraction)):
        return mpq(x)
    if isinstance(x, str):
        return mpq(Fraction(x.strip()))
    if isinstance(x, float):
        return mpq(Fraction(repr(x)))
    return x


def to_fraction(x: Any) -> Fraction:
    x = as_coeff(x)
    if isinstance(x, _MPQ):
        return Fraction(int(x.numerator), int(x.denominator))
    raise TypeError(f"not a rational number: {x!r}")


def fmt_coeff(c: Any) -> str:
    """Render an exact rational as "p/q" (or "p" when integral)."""
    if isinstance(c, _MPQ):
        return str(int(c.numerator)) if c.denominator == 1 else f"{c.numerator}/{c.denominator}"
    return str(c)


def _is_zero(c: Any) -> bool:
    return c == 0


# ---------------------------------------------------------------------------
# Laurent polynomials
# ---------------------------------------------------------------------------


class LaurentPoly:
    """Immutable multivariate Laurent polynomial with exact coefficients."""

    __slots__ = ("dim", "terms", "_hash")

    def __init__(self, dim: int, terms: Optional[Mapping[Sequence[int], Any]] = None):
        if dim < 1:
            raise ValueError("dimension must be positive")
        clean: dict[Exponent, Any] = {}
        for e, c in (terms or {}).items():
            e = tuple(int(v) for v in e)
            if len(e) != dim:
                raise ValueError(f"exponent {e} does not have dimension {dim}")
            c = as_coeff(c)
            if c != 0:
                clean[e] = clean.get(e, 0) + c
        self.dim = dim
        self.terms = {e: c for e, c in clean.items() if c != 0}
        self._hash = None
        _guard(self.terms)

    @classmethod
    def _raw(cls, dim: int, terms: dict) -> "LaurentPoly":
        obj = object.__new__(cls)
        obj.dim = dim
        obj.terms = terms
        obj._hash = None
        return obj

    # constructors ---------------------------------------------------------
    @classmethod
    def zero(cls, dim: int) -> "LaurentPoly":
        return cls._raw(dim, {})

    @classmethod
    def const(cls, dim: int, c: Any) -> "LaurentPoly":
        c = as_coeff(c)
        return cls._raw(dim, {(0,) * dim: c} if c != 0 else {})

    @classmethod
    def one(cls, dim: int) -> "LaurentPoly":
        return cls.const(dim, 1)

    @classmethod
    def monomial(cls, dim: int, exponent: Sequence[int], c: Any = 1) -> "LaurentPoly":
        return cls(dim, {tuple(exponent): c})

    @classmethod
    def var(cls, dim: int, axis: int, power: int = 1) -> "LaurentPoly":
        """x_{axis+1}^power (axis is 0-based)."""
        e = [0] * dim
        e[axis] = power
        return cls.monomial(dim, e)

    # predicates -----------------------------------------------------------
    def is_zero(self) -> bool:
        return not self.terms

    def is_constant(self) -> bool:
        return not self.terms or set(self.terms) == {(0,) * self.dim}

    def is_monomial(self) -> bool:
        return len(self.terms) == 1

    def constant_term(self) -> Any:
        return self.terms.get((0,) * self.dim, mpq(0))

    def coeff(self, exponent: Sequence[int]) -> Any:
        return self.terms.get(tuple(exponent), mpq(0))

    def coeff_sum(self) -> Any:
        """Value at x = (1, ..., 1)."""
        return sum(self.terms.values(), mpq(0))

    def moment(self, n: Sequence[int]) -> Any:
        """sum_e c_e e^n for a multi-index n."""
        total = mpq(0)
        for e, c in self.terms.items():
            w = 1
            for ei, ni in zip(e, n):
                w *= ei**ni
            total = total + c * w
        return total

    # arithmetic -----------------------------------------------------------
    def _coerce(self, other: Any) -> "LaurentPoly":
        if isinstance(other, LaurentPoly):
            if other.dim != self.dim:
                raise ValueError(f"dimension mismatch: {self.dim} vs {other.dim}")
            return other
        return LaurentPoly.const(self.dim, other)

    def __add__(self, other: Any) -> "LaurentPoly":
        other = self._coerce(other)
        out = dict(self.terms)
        for e, c in other.terms.items():
            v = out.get(e, 0) + c
            if v == 0:
                out.pop(e, None)
            else:
                out[e] = v
        return LaurentPoly._raw(self.dim, out)

    __radd__ = __add__

    def __neg__(self) -> "LaurentPoly":
        return LaurentPoly._raw(self.dim, {e: -c for e, c in self.terms.items()})

    def __sub__(self, other: Any) -> "LaurentPoly":
        return self + (-self._coerce(other))

    def __rsub__(self, other: Any) -> "LaurentPoly":
        return self._coerce(other) - self

    def scale(self, c: Any) -> "LaurentPoly":
        c = as_coeff(c)
        if c == 0:
            return LaurentPoly.zero(self.dim)
        out = {}
        for e, v in self.terms.items():
            w = v * c
            if w != 0:
                out[e] = w
        return LaurentPoly._raw(self.dim, out)

    def __mul__(self, other: Any) -> "LaurentPoly":
        if not isinstance(other, LaurentPoly):
            if isinstance(other, (ZPoly, OperatorMatrix)):
                return NotImplemented
            return self.scale(other)
        other = self._coerce(other)
        if len(self.terms) > len(other.terms):
            a, b = other.terms, self.terms
        else:
            a, b = self.terms, other.terms
        out: dict = {}
        get = out.get
        if self.dim == 1:
            for (e1,), c1 in a.items():
                for (e2,), c2 in b.items():
                    k = (e1 + e2,)
                    out[k] = get(k, 0) + c1 * c2
        else:
            for e1, c1 in a.items():
                for e2, c2 in b.items():
                    k = tuple([u + v for u, v in zip(e1, e2)])
                    out[k] = get(k, 0) + c1 * c2
        out = {e: c for e, c in out.items() if c != 0}
        _guard(out)
        return LaurentPoly._raw(self.dim, out)

    def __rmul__(self, other: Any) -> "LaurentPoly":
        return self.scale(other)

    def __truediv__(self, other: Any) -> "LaurentPoly":
        if isinstance(other, LaurentPoly):
            q = exact_divide(self, other)
            if q is None:
                raise ArithmeticError("division is not exact in the Laurent ring")
            return q
        return self.scale(1 / as_coeff(other))

    def __pow__(self, n: int) -> "LaurentPoly":
        if n < 0:
            if not self.is_monomial():
                raise ArithmeticError("only monomials are units")
            ((e, c),) = self.terms.items()
            return LaurentPoly.monomial(self.dim, [-v * (-n) for v in e], 1 / c ** (-n))
        result = LaurentPoly.one(self.dim)
        base = self
        while n:
            if n & 1:
                result = result * base
            n >>= 1
            if n:
                base = base * base
        return result

    def shift(self, exponent: Sequence[int]) -> "LaurentPoly":
        """Multiply by the monomial x^exponent."""
        out = {tuple(u + v for u, v in zip(e, exponent)): c for e, c in self.terms.items()}
        _guard(out)
        return LaurentPoly._raw(self.dim, out)

    # conjugation / parity ---------------------------------------------------
    def conj(self) -> "LaurentPoly":
        return LaurentPoly._raw(self.dim, {tuple(-v for v in e): c for e, c in self.terms.items()})

    def sym(self) -> "LaurentPoly":
        return (self + self.conj()).scale(mpq(1, 2))

    def antisym(self) -> "LaurentPoly":
        return (self - self.conj()).scale(mpq(1, 2))

    # evaluation -------------------------------------------------------------
    def evaluate(self, point: Sequence[Any]) -> Any:
        total = mpq(0)
        for e, c in self.terms.items():
            m = c
            for p, k in zip(point, e):
                m = m * (p**k if k >= 0 else 1 / p ** (-k))
            total = total + m
        return total

    def map_coeffs(self, f) -> "LaurentPoly":
        return LaurentPoly(self.dim, {e: f(c) for e, c in self.terms.items()})

    def exponent_bounds(self) -> tuple[Exponent, Exponent]:
        if not self.terms:
            z = (0,) * self.dim
            return z, z
        es = list(self.terms)
        lo = tuple(min(e[i] for e in es) for i in range(self.dim))
        hi = tuple(max(e[i] for e in es) for i in range(self.dim))
        return lo, hi

    # comparison -----------------------------------------------------------
    def __eq__(self, other: Any) -> bool:
        if isinstance(other, LaurentPoly):
            return self.dim == other.dim and self.terms == other.terms
        if isinstance(other, (ZPoly, OperatorMatrix)):
            return NotImplemented
        try:
            return self.terms == LaurentPoly.const(self.dim, other).terms
        except (TypeError, ValueError):
            return NotImplemented

    def __hash__(self) -> int:
        if self._hash is None:
            self._hash = hash((self.dim, frozenset(self.terms.items())))
        return self._hash

    def __bool__(self) -> bool:
        return bool(self.terms)

    def __repr__(self) -> str:
        return f"LaurentPoly({self})"

    def __str__(self) -> str:
        if not self.terms:
            return "0"
        parts = []
        for e in sorted(self.terms, reverse=True):
            c = self.terms[e]
            mono = "*".join(
                f"x{i + 1}" if k == 1 else f"x{i + 1}^{k}" for i, k in enumerate(e) if k != 0
            )
            cs = fmt_coeff(c)
            if not mono:
                parts.append(cs)
            elif cs == "1":
                parts.append(mono)
            elif cs == "-1":
                parts.append("-" + mono)
            else:
                parts.append(f"{cs}*{mono}")
        return " + ".join(parts).replace("+ -", "- ")


def _guard(terms: Mapping[Exponent, Any]) -> None:
    for e in terms:
        for v in e:
            if v > MAX_EXPONENT or v < -MAX_EXPONENT:
                raise OverflowError(f"exponent {e} exceeds the guard |e| <= {MAX_EXPONENT}")


def S(p: LaurentPoly) -> LaurentPoly:
    return p.sym()


def A(p: LaurentPoly) -> LaurentPoly:
    return p.antisym()


def shift_monomial(dim: int, c: Sequence[int]) -> LaurentPoly:
    """x^c for a velocity c."""
    return LaurentPoly.monomial(dim, c)


def lp_arith(a: LaurentPoly, b: LaurentPoly, kind: str) -> LaurentPoly:
    if a.dim != b.dim:
        raise ValueError("dimension mismatch")
    if kind == "add":
        return a + b
    if kind == "sub":
        return a - b
    if kind == "mul":
        return a * b
    raise ValueError(f"unknown kind {kind!r}")


def conjugate(a: LaurentPoly) -> LaurentPoly:
    return a.conj()


def sym_antisym(a: LaurentPoly, part: str) -> LaurentPoly:
    if part == "S":
        return a.sym()
    if part == "A":
        return a.antisym()
    raise ValueError(f"part must be 'S' or 'A', got {part!r}")


def exact_divide(a: LaurentPoly, b: LaurentPoly) -> Optional[LaurentPoly]:
    """Return q with b*q == a in the Laurent ring, or None if none exists.

    Both operands are first normalized to ordinary polynomials not divisible
    by any x_l (monomials are units); in that situation a Laurent quotient is
    necessarily an ordinary polynomial, so lex-order long division decides.
    """
    if a.dim != b.dim:
        raise ValueError("dimension mismatch")
    if b.is_zero():
        raise ZeroDivisionError("division by the zero polynomial")
    dim = a.dim
    if a.is_zero():
        return LaurentPoly.zero(dim)
    if b.is_monomial():
        ((e, c),) = b.terms.items()
        return a.shift([-v for v in e]).scale(1 / c)
    alo, ahi = a.exponent_bounds()
    blo, bhi = b.exponent_bounds()
    an = {tuple(x - y for x, y in zip(e, alo)): c for e, c in a.terms.items()}
    bn = {tuple(x - y for x, y in zip(e, blo)): c for e, c in b.terms.items()}
    adeg = tuple(h - l for h, l in zip(ahi, alo))
    bdeg = tuple(h - l for h, l in zip(bhi, blo))
    qmax = tuple(x - y for x, y in zip(adeg, bdeg))
    if any(v < 0 for v in qmax):
        return None
    lt_b = max(bn)
    cb = bn[lt_b]
    bitems = list(bn.items())
    rem = dict(an)
    quot: dict[Exponent, Any] = {}
    while rem:
        lt = max(rem)
        qe = tuple(x - y for x, y in zip(lt, lt_b))
        if any(v < 0 or v > m for v, m in zip(qe, qmax)):
            return None
        qc = rem[lt] / cb
        quot[qe] = quot.get(qe, 0) + qc
        for e, c in bitems:
            k = tuple(u + v for u, v in zip(qe, e))
            v = rem.get(k, 0) - qc * c
            if v == 0:
                rem.pop(k, None)
            else:
                rem[k] = v
    offset = tuple(x - y for x, y in zip(alo, blo))
    q = LaurentPoly._raw(dim, {e: c for e, c in quot.items() if c != 0})
    return q.shift(offset)


# ---------------------------------------------------------------------------
# Matrices over the ring
# ---------------------------------------------------------------------------


def _dot(dim: int, pairs: Iterable[tuple[LaurentPoly, LaurentPoly]]) -> LaurentPoly:
    out: dict = {}
    get = out.get
    for a, b in pairs:
        if not a.terms or not b.terms:
            continue
        for e1, c1 in a.terms.items():
            for e2, c2 in b.terms.items():
                k = (e1[0] + e2[0],) if dim == 1 else tuple([u + v for u, v in zip(e1, e2)])
                out[k] = get(k, 0) + c1 * c2
    out = {e: c for e, c in out.items() if c != 0}
    _guard(out)
    return LaurentPoly._raw(dim, out)


class OperatorMatrix:
    """Immutable rows x cols matrix of LaurentPoly, row-major."""

    __slots__ = ("rows", "cols", "dim", "entries")

    def __init__(self, rows: int, cols: int, entries: Sequence[LaurentPoly], dim: Optional[int] = None):
        if rows < 1 or cols < 1:
            raise ValueError("matrix shape must be positive")
        entries = tuple(entries)
        if len(entries) != rows * cols:
            raise ValueError("entry count does not match the shape")
        if dim is None:
            dim = next((e.dim for e in entries if isinstance(e, LaurentPoly)), None)
            if dim is None:
                raise ValueError("cannot infer dimension")
        self.rows, self.cols, self.dim = rows, cols, dim
        self.entries = tuple(e if isinstance(e, LaurentPoly) else LaurentPoly.const(dim, e) for e in entries)

    @classmethod
    def from_rows(cls, rows: Sequence[Sequence[Any]], dim: int) -> "OperatorMatrix":
        r = len(rows)
        c = len(rows[0])
        if any(len(row) != c for row in rows):
            raise ValueError("ragged rows")
        return cls(r, c, [x for row in rows for x in row], dim)

    @classmethod
    def identity(cls, n: int, dim: int) -> "OperatorMatrix":
        one, zero = LaurentPoly.one(dim), LaurentPoly.zero(dim)
        return cls(n, n, [one if i == j else zero for i in range(n) for j in range(n)], dim)

    @classmethod
    def zeros(cls, rows: int, cols: int, dim: int) -> "OperatorMatrix":
        return cls(rows, cols, [LaurentPoly.zero(dim)] * (rows * cols), dim)

    @classmethod
    def diag(cls, items: Sequence[Any], dim: int) -> "OperatorMatrix":
        n = len(items)
        zero = LaurentPoly.zero(dim)
        return cls(n, n, [items[i] if i == j else zero for i in range(n) for j in range(n)], dim)

    def __getitem__(self, ij: tuple[int, int]) -> LaurentPoly:
        i, j = ij
        return self.entries[i * self.cols + j]

    def row(self, i: int) -> tuple[LaurentPoly, ...]:
        return self.entries[i * self.cols:(i + 1) * self.cols]

    def col(self, j: int) -> tuple[LaurentPoly, ...]:
        return self.entries[j::self.cols]

    def to_rows(self) -> list[list[LaurentPoly]]:
        return [list(self.row(i)) for i in range(self.rows)]

    def transpose(self) -> "OperatorMatrix":
        return OperatorMatrix(self.cols, self.rows, [self[i, j] for j in range(self.cols) for i in range(self.rows)], self.dim)

    def map(self, f) -> "OperatorMatrix":
        return OperatorMatrix(self.rows, self.cols, [f(e) for e in self.entries], self.dim)

    def is_square(self) -> bool:
        return self.rows == self.cols

    def is_zero(self) -> bool:
        return all(e.is_zero() for e in self.entries)

    def __add__(self, other: "OperatorMatrix") -> "OperatorMatrix":
        self._same_shape(other)
        return OperatorMatrix(self.rows, self.cols, [a + b for a, b in zip(self.entries, other.entries)], self.dim)

    def __sub__(self, other: "OperatorMatrix") -> "OperatorMatrix":
        self._same_shape(other)
        return OperatorMatrix(self.rows, self.cols, [a - b for a, b in zip(self.entries, other.entries)], self.dim)

    def __neg__(self) -> "OperatorMatrix":
        return self.map(lambda e: -e)

    def _same_shape(self, other: "OperatorMatrix") -> None:
        if (self.rows, self.cols) != (other.rows, other.cols):
            raise ValueError(f"shape mismatch: {self.rows}x{self.cols} vs {other.rows}x{other.cols}")

    def __mul__(self, other: Any) -> "OperatorMatrix":
        if isinstance(other, OperatorMatrix):
            if self.cols != other.rows:
                raise ValueError(f"shape mismatch: {self.rows}x{self.cols} * {other.rows}x{other.cols}")
            cols = [other.col(j) for j in range(other.cols)]
            out = []
            for i in range(self.rows):
                r = self.row(i)
                for j in range(other.cols):
                    out.append(_dot(self.dim, zip(r, cols[j])))
            return OperatorMatrix(self.rows, other.cols, out, self.dim)
        return self.map(lambda e: e * other)

    def __rmul__(self, other: Any) -> "OperatorMatrix":
        return self.map(lambda e: other * e)

    def __pow__(self, n: int) -> "OperatorMatrix":
        if not self.is_square():
            raise ValueError("power of a non-square matrix")
        if n < 0:
            raise ValueError("negative power")
        result = OperatorMatrix.identity(self.rows, self.dim)
        for _ in range(n):
            result = result * self
        return result

    def vecmat(self, v: Sequence[LaurentPoly]) -> tuple[LaurentPoly, ...]:
        """Row vector times matrix."""
        if len(v) != self.rows:
            raise ValueError("shape mismatch")
        return tuple(_dot(self.dim, zip(v, self.col(j))) for j in range(self.cols))

    def matvec(self, v: Sequence[LaurentPoly]) -> tuple[LaurentPoly, ...]:
        if len(v) != self.cols:
            raise ValueError("shape mismatch")
        return tuple(_dot(self.dim, zip(self.row(i), v)) for i in range(self.rows))

    def __eq__(self, other: Any) -> bool:
        if not isinstance(other, OperatorMatrix):
            return NotImplemented
        return (self.rows, self.cols) == (other.rows, other.cols) and self.entries == other.entries

    def __hash__(self) -> int:
        return hash((self.rows, self.cols, self.entries))

    def __repr__(self) -> str:
        body = "; ".join("[" + ", ".join(str(e) for e in self.row(i)) + "]" for i in range(self.rows))
        return f"OperatorMatrix({body})"


def mat_ops(a: OperatorMatrix, b: Optional[OperatorMatrix], kind: str, n: int = 0) -> OperatorMatrix:
    if kind == "mul":
        return a * b
    if kind == "pow":
        return a**n
    raise ValueError(f"unknown kind {kind!r}")


# ---------------------------------------------------------------------------
# Polynomials in the time shift z with Laurent coefficients
# ---------------------------------------------------------------------------


class ZPoly:
    """Polynomial sum_k c_k z^k with LaurentPoly coefficients (trimmed)."""

    __slots__ = ("dim", "coeffs")

    def __init__(self, coeffs: Sequence[Any], dim: int):
        cs = [c if isinstance(c, LaurentPoly) else LaurentPoly.const(dim, c) for c in coeffs]
        while cs and cs[-1].is_zero():
            cs.pop()
        self.dim = dim
        self.coeffs = tuple(cs)

    @classmethod
    def z(cls, dim: int) -> "ZPoly":
        return cls([0, 1], dim)

    @classmethod
    def const(cls, c: Any, dim: int) -> "ZPoly":
        return cls([c], dim)

    @property
    def degree(self) -> int:
        return len(self.coeffs) - 1

    def is_zero(self) -> bool:
        return not self.coeffs

    def is_monic(self) -> bool:
        return bool(self.coeffs) and self.coeffs[-1] == 1

    def leading(self) -> LaurentPoly:
        return self.coeffs[-1]

    def coeff(self, k: int) -> LaurentPoly:
        if 0 <= k < len(self.coeffs):
            return self.coeffs[k]
        return LaurentPoly.zero(self.dim)

    def _coerce(self, other: Any) -> "ZPoly":
        if isinstance(other, ZPoly):
            return other
        return ZPoly([other], self.dim)

    def __add__(self, other: Any) -> "ZPoly":
        other = self._coerce(other)
        n = max(len(self.coeffs), len(other.coeffs))
        return ZPoly([self.coeff(k) + other.coeff(k) for k in range(n)], self.dim)

    __radd__ = __add__

    def __neg__(self) -> "ZPoly":
        return ZPoly([-c for c in self.coeffs], self.dim)

    def __sub__(self, other: Any) -> "ZPoly":
        return self + (-self._coerce(other))

    def __rsub__(self, other: Any) -> "ZPoly":
        return self._coerce(other) - self

    def __mul__(self, other: Any) -> "ZPoly":
        other = self._coerce(other)
        if self.is_zero() or other.is_zero():
            return ZPoly([], self.dim)
        out = [LaurentPoly.zero(self.dim)] * (len(self.coeffs) + len(other.coeffs) - 1)
        for i, a in enumerate(self.coeffs):
            if a.is_zero():
                continue
            for j, b in enumerate(other.coeffs):
                if not b.is_zero():
                    out[i + j] = out[i + j] + a * b
        return ZPoly(out, self.dim)

    __rmul__ = __mul__

    def __pow__(self, n: int) -> "ZPoly":
        result = ZPoly([1], self.dim)
        for _ in range(n):
            result = result * self
        return result

    def shift(self, k: int) -> "ZPoly":
        """Multiply by z^k; negative k requires the low coefficients to vanish."""
        if k >= 0:
            return ZPoly([LaurentPoly.zero(self.dim)] * k + list(self.coeffs), self.dim)
        if any(not c.is_zero() for c in self.coeffs[:-k]):
            raise ArithmeticError(f"not divisible by z^{-k}")
        return ZPoly(self.coeffs[-k:], self.dim)

    def z_valuation(self) -> int:
        for k, c in enumerate(self.coeffs):
            if not c.is_zero():
                return k
        return 0

    def divmod(self, divisor: "ZPoly") -> tuple["ZPoly", "ZPoly"]:
        """Long division by a monic divisor (exact over the ring)."""
        if not divisor.is_monic():
            raise ArithmeticError("divisor must be monic")
        rem = list(self.coeffs)
        m = divisor.degree
        if len(rem) - 1 < m:
            return ZPoly([], self.dim), self
        quot = [LaurentPoly.zero(self.dim)] * (len(rem) - m)
        for k in range(len(rem) - 1, m - 1, -1):
            c = rem[k]
            if c.is_zero():
                continue
            quot[k - m] = c
            for j, d in enumerate(divisor.coeffs):
                rem[k - m + j] = rem[k - m + j] - c * d
        return ZPoly(quot, self.dim), ZPoly(rem[:m], self.dim)

    def divides(self, other: "ZPoly") -> Optional["ZPoly"]:
        """Quotient other/self if exact, else None (self must be monic)."""
        q, r = other.divmod(self)
        return q if r.is_zero() else None

    def apply_matrix(self, m: OperatorMatrix) -> OperatorMatrix:
        """Evaluate the polynomial at a square matrix (Horner)."""
        n = m.rows
        ident = OperatorMatrix.identity(n, self.dim)
        acc = OperatorMatrix.zeros(n, n, self.dim)
        for c in reversed(self.coeffs):
            acc = acc * m + ident * c
        return acc

    def apply_row(self, row: Sequence[LaurentPoly], m: OperatorMatrix) -> tuple[LaurentPoly, ...]:
        """Evaluate at a matrix acting on a row vector: sum_k c_k row * m^k."""
        acc = [LaurentPoly.zero(self.dim)] * len(row)
        cur = tuple(row)
        for k, c in enumerate(self.coeffs):
            acc = [a + c * b for a, b in zip(acc, cur)]
            if k + 1 < len(self.coeffs):
                cur = m.vecmat(cur)
        return tuple(acc)

    def __eq__(self, other: Any) -> bool:
        if isinstance(other, ZPoly):
            return self.dim == other.dim and self.coeffs == other.coeffs
        if isinstance(other, (LaurentPoly, int, Fraction, _MPQ)):
            return self == ZPoly([other], self.dim)
        return NotImplemented

    def __hash__(self) -> int:
        return hash(self.coeffs)

    def __repr__(self) -> str:
        return f"ZPoly({self})"

    def __str__(self) -> str:
        if not self.coeffs:
            return "0"
        parts = []
        for k in range(len(self.coeffs) - 1, -1, -1):
            c = self.coeffs[k]
            if c.is_zero():
                continue
            zs = "" if k == 0 else ("z" if k == 1 else f"z^{k}")
            if not zs:
                parts.append(f"({c})")
            elif c == 1:
                parts.append(zs)
            else:
                parts.append(f"({c})*{zs}")
        return " + ".join(parts)


# ---------------------------------------------------------------------------
# Determinants, adjugates, characteristic polynomials
# ---------------------------------------------------------------------------


def _det_generic(rows: Sequence[Sequence[Any]], zero: Any, one: Any) -> Any:
    """Laplace expansion along rows with memoized minors keyed by column set."""
    n = len(rows)
    if n == 0:
        return one
    memo: dict[int, Any] = {}

    def minor(r: int, mask: int) -> Any:
        if r == n:
            return one
        if mask in memo:
            return memo[mask]
        total = zero
        sign = 1
        for j in range(n):
            if not (mask >> j) & 1:
                continue
            a = rows[r][j]
            if not _entry_is_zero(a):
                t = a * minor(r + 1, mask & ~(1 << j))
                total = total + t if sign > 0 else total - t
            sign = -sign
        memo[mask] = total
        return total

    return minor(0, (1 << n) - 1)


def _entry_is_zero(a: Any) -> bool:
    if isinstance(a, (LaurentPoly, ZPoly)):
        return a.is_zero()
    return a == 0


def det(m: OperatorMatrix) -> LaurentPoly:
    if not m.is_square():
        raise ValueError("determinant of a non-square matrix")
    if m.rows > MAX_DET_SIZE:
        raise ValueError(f"size {m.rows} exceeds the cofactor limit {MAX_DET_SIZE}")
    return _det_generic(m.to_rows(), LaurentPoly.zero(m.dim), LaurentPoly.one(m.dim))


def adjugate(m: OperatorMatrix) -> OperatorMatrix:
    if not m.is_square():
        raise ValueError("adjugate of a non-square matrix")
    n = m.rows
    if n > MAX_DET_SIZE:
        raise ValueError(f"size {n} exceeds the cofactor limit {MAX_DET_SIZE}")
    if n == 1:
        return OperatorMatrix.identity(1, m.dim)
    rows = m.to_rows()
    zero, one = LaurentPoly.zero(m.dim), LaurentPoly.one(m.dim)
    out = [[None] * n for _ in range(n)]
    for i in range(n):
        for j in range(n):
            sub = [[rows[r][c] for c in range(n) if c != j] for r in range(n) if r != i]
            cof = _det_generic(sub, zero, one)
            out[j][i] = cof if (i + j) % 2 == 0 else -cof
    return OperatorMatrix.from_rows(out, m.dim)


def charpoly_cofactor(m: OperatorMatrix) -> ZPoly:
    """det(zI - m) by cofactor expansion over the polynomial ring in z."""
    n = m.rows
    if n > MAX_DET_SIZE:
        raise ValueError(f"size {n} exceeds the cofactor limit {MAX_DET_SIZE}")
    d = m.dim
    z = ZPoly.z(d)
    rows = [[(z if i == j else ZPoly([], d)) - m[i, j] for j in range(n)] for i in range(n)]
    return _det_generic(rows, ZPoly([], d), ZPoly([1], d))


def charpoly(m: OperatorMatrix) -> ZPoly:
    """det(zI - m) by the Faddeev-LeVerrier recursion (exact over Q)."""
    if not m.is_square():
        raise ValueError("characteristic polynomial of a non-square matrix")
    n = m.rows
    if n > MAX_DET_SIZE:
        raise ValueError(f"size {n} exceeds the limit {MAX_DET_SIZE}")
    d = m.dim
    ident = OperatorMatrix.identity(n, d)
    coeffs = [LaurentPoly.zero(d)] * (n + 1)
    coeffs[n] = LaurentPoly.one(d)
    mk = OperatorMatrix.zeros(n, n, d)
    for k in range(1, n + 1):
        mk = m * mk + ident * coeffs[n - k + 1]
        am = m * mk
        tr = LaurentPoly.zero(d)
        for i in range(n):
            tr = tr + am[i, i]
        coeffs[n - k] = tr.scale(mpq(-1, k))
    return ZPoly(coeffs, d)


def det_adj_char(m: OperatorMatrix, want: str):
    if want == "det":
        return det(m)
    if want == "adjugate":
        return adjugate(m)
    if want == "charpoly":
        return charpoly(m)
    raise ValueError(f"unknown request {want!r}")


def field_det(rows: Sequence[Sequence[Any]]) -> Any:
    """Determinant over a field by Gaussian elimination (exact)."""
    a = [list(r) for r in rows]
    n = len(a)
    result = mpq(1)
    for c in range(n):
        p = next((r for r in range(c, n) if a[r][c] != 0), None)
        if p is None:
            return mpq(0)
        if p != c:
            a[c], a[p] = a[p], a[c]
            result = -result
        piv = a[c][c]
        result = result * piv
        for r in range(c + 1, n):
            if a[r][c] != 0:
                f = a[r][c] / piv
                for k in range(c, n):
                    a[r][k] = a[r][k] - f * a[c][k]
    return result


def field_inverse(rows: Sequence[Sequence[Any]]) -> list[list[Any]]:
    """Exact Gauss-Jordan inverse over a field; raises on singular input."""
    n = len(rows)
    a = [[as_coeff(x) for x in r] + [mpq(1) if i == j else mpq(0) for j in range(n)] for i, r in enumerate(rows)]
    for c in range(n):
        p = next((r for r in range(c, n) if a[r][c] != 0), None)
        if p is None:
            raise ValueError("singular matrix")
        a[c], a[p] = a[p], a[c]
        piv = a[c][c]
        a[c] = [x / piv for x in a[c]]
        for r in range(n):
            if r != c and a[r][c] != 0:
                f = a[r][c]
                a[r] = [x - f * y for x, y in zip(a[r], a[c])]
    return [r[n:] for r in a]


def charpoly_diag_similar(shifts: Sequence[Sequence[int]], n_mat: Sequence[Sequence[Any]], dim: int) -> ZPoly:
    """det(zI - D N) for D = diag(x^{c_j}) and a constant matrix N.

    Uses the principal-minor expansion: the coefficient of z^{q-k} is
    (-1)^k sum_{|J|=k} x^{sum_{j in J} c_j} det(N_JJ).  Any matrix of the
    form P D P^{-1} X is similar to D (P^{-1} X P), which is how the
    lattice Boltzmann operators reach this routine.
    """
    q = len(shifts)
    coeffs: list[LaurentPoly] = []
    for k in range(q + 1):
        acc: dict = {}
        for J in combinations(range(q), k):
            if k == 0:
                m = mpq(1)
            else:
                m = field_det([[n_mat[a][b] for b in J] for a in J])
            if m == 0:
                continue
            e = tuple(sum(shifts[j][ax] for j in J) for ax in range(dim))
            acc[e] = acc.get(e, 0) + m
        p = LaurentPoly(dim, {e: c for e, c in acc.items() if c != 0})
        coeffs.append(p if k % 2 == 0 else -p)
    # coefficient of z^{q-k} is coeffs[k]
    return ZPoly(list(reversed(coeffs)), dim)


# ---------------------------------------------------------------------------
# Linear systems over the ring
# ---------------------------------------------------------------------------

_PROBE_POINTS = (
    (mpq(2, 3), mpq(5, 7), mpq(11, 13), mpq(17, 19)),
    (mpq(3, 5), mpq(7, 4), mpq(13, 9), mpq(19, 23)),
)


def _numeric_rank_pivots(mat: list[list[LaurentPoly]], point) -> tuple[list[int], list[int]]:
    """Pivot rows/cols of a matrix of LaurentPoly evaluated at a probe point."""
    a = [[e.evaluate(point) for e in row] for row in mat]
    nr, nc = len(a), len(a[0]) if a else 0
    rows_left = list(range(nr))
    piv_rows, piv_cols = [], []
    for c in range(nc):
        p = next((r for r in rows_left if a[r][c] != 0), None)
        if p is None:
            continue
        piv_rows.append(p)
        piv_cols.append(c)
        rows_left.remove(p)
        for r in rows_left:
            if a[r][c] != 0:
                f = a[r][c] / a[p][c]
                a[r] = [x - f * y for x, y in zip(a[r], a[p])]
    return piv_rows, piv_cols


def solve_over_ring(mat: OperatorMatrix, b: Sequence[LaurentPoly]) -> Optional[tuple[LaurentPoly, ...]]:
    """Find a row vector x of Laurent polynomials with x * mat = b.

    The system is solved over the fraction field by Cramer's rule on a
    maximal nonsingular minor (free unknowns set to zero), then every entry
    is certified polynomial by exact division and the full system is
    re-checked.  None is returned when either step fails; this can happen
    for systems that are solvable only with non-zero free unknowns.
    """
    m, n = mat.rows, mat.cols
    if len(b) != n:
        raise ValueError("right-hand side has the wrong length")
    dim = mat.dim
    zero = LaurentPoly.zero(dim)
    # transpose: unknown i ~ column of sys; equation j ~ row of sys
    sys_rows = [[mat[i, j] for i in range(m)] for j in range(n)]
    best: tuple[list[int], list[int]] = ([], [])
    for pt in _PROBE_POINTS:
        pr, pc = _numeric_rank_pivots(sys_rows, pt[:dim])
        if len(pr) > len(best[0]):
            best = (pr, pc)
    eq_idx, unk_idx = best
    x = [zero] * m
    if eq_idx:
        sub = [[sys_rows[r][c] for c in unk_idx] for r in eq_idx]
        one = LaurentPoly.one(dim)
        delta = _det_generic(sub, zero, one)
        if delta.is_zero():
            return None
        rhs = [b[r] for r in eq_idx]
        for k, c in enumerate(unk_idx):
            sub_k = [[rhs[i] if jj == k else sub[i][jj] for jj in range(len(unk_idx))] for i in range(len(eq_idx))]
            num = _det_generic(sub_k, zero, one)
            val = exact_divide(num, delta)
            if val is None:
                return None
            x[c] = val
    x = tuple(x)
    if mat.vecmat(x) != tuple(b):
        return None
    return x
