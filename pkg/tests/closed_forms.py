"""Published closed forms used as oracles, written independently of lbmfd."""

from gmpy2 import mpq

from lbmfd.ring import A, LaurentPoly, S, ZPoly


def d1q2_charpoly(s2, eps2):
    x = LaurentPoly.var(1, 0)
    return ZPoly([LaurentPoly.const(1, 1 - s2), (s2 - 2) * S(x) - s2 * eps2 * A(x), 1], 1)


def psi2_trt(links, s, eps):
    """Reduced polynomial of a link-TRT scheme; eps[2k-1], eps[2k] belong to link k."""
    d = len(links[0])
    one = LaurentPoly.one(d)
    lin = (s - 2) * one
    for k, c in enumerate(links, start=1):
        xc = LaurentPoly.monomial(d, c)
        lin = lin - s * eps[2 * k - 1] * A(xc) + (s - 2) * eps[2 * k] * (S(xc) - one)
    return ZPoly([(1 - s) * one, lin, one], d)


def trt_charpoly(links, s, eps):
    d = len(links[0])
    W = len(links)
    r = 1 - s
    z = ZPoly.z(d)
    return (z + r) * (z * z - r * r) ** (W - 1) * psi2_trt(links, s, eps)


def d1q2_bulk_me(s2, eps2, lam=1):
    return lam * eps2, lam * (1 / s2 - mpq(1, 2)) * (1 - eps2 ** 2)


def d1q3_bulk_me(s2, eps2, eps3, lam=1):
    return lam * eps2, lam * (1 / s2 - mpq(1, 2)) * (mpq(2, 3) - eps2 ** 2 + eps3 / 3)


def trt_bulk_me(links, s, eps, lam=1):
    """Acoustic transport and diffusion, keyed by multi-index."""
    d = len(links[0])
    units = [tuple(1 if i == a else 0 for i in range(d)) for a in range(d)]
    V = {u: lam * sum(eps[2 * k - 1] * c[a] for k, c in enumerate(links, 1)) for a, u in enumerate(units)}
    # first-order transport operator sum_k eps_2k (c_2k . grad), squared
    sq = {}
    for k1, c1 in enumerate(links, 1):
        for k2, c2 in enumerate(links, 1):
            for a in range(d):
                for b in range(d):
                    m = tuple(int(i == a) + int(i == b) for i in range(d))
                    sq[m] = sq.get(m, 0) + eps[2 * k1 - 1] * eps[2 * k2 - 1] * c1[a] * c2[b]
    D = {}
    for m in sq:
        fact = 1
        for v in m:
            fact *= 2 if v == 2 else 1
        second = 0
        for k, c in enumerate(links, 1):
            mono = 1
            for ci, mi in zip(c, m):
                mono *= ci ** mi
            second += eps[2 * k] * mono
        D[m] = lam * (1 / s - mpq(1, 2)) * (2 * second / fact - sq[m])
    return V, D


# D1Q2 starting-scheme diffusion / lambda, for step n


def _P(n, s):
    return mpq(1, 2) + sum((1 - mpq(l, n)) * (1 - s) ** l for l in range(1, n))


def _B(n, s):
    return (1 - 2 * sum((1 - s) ** l for l in range(n))) / (2 * n)


def start_diffusion(name, n, s, e):
    a = 1 - e * e
    if name == "LF":
        return _P(n, s) * a
    if name == "FC-GOOD":
        return _P(n, s) * a + _B(n, s)
    if name == "LW":
        return (_P(n, s) + _B(n, s)) * a
    if name == "RE1":
        return (1 / s - mpq(1, 2)) * a
    raise KeyError(name)


def fc_bad_transport(n, s, e, lam=1):
    return lam * e * (1 + mpq(2, n) * (1 - sum((1 - s) ** l for l in range(n))))


def parity_limit(name, n, e):
    """Diffusion / lambda at s2 = 2 for step n."""
    even = n % 2 == 0
    if name == "LF":
        return 0 if even else (1 - e * e) / (2 * n)
    if name == "FC-GOOD":
        return mpq(1, 2 * n) if even else -e * e / (2 * n)
    if name == "LW":
        return (1 - e * e) / (2 * n) if even else 0
    raise KeyError(name)


def d1q3_magic_psi2(s2, eps2, eps3):
    x = LaurentPoly.var(1, 0)
    one = LaurentPoly.one(1)
    lin = -s2 * eps2 * A(x) + (s2 - 2) * (2 * S(x) + one) * mpq(1, 3) + eps3 * (s2 - 2) * (S(x) - one) * mpq(1, 3)
    return ZPoly([(1 - s2) * one, lin, one], 1)


def d2q9_w9_zero(s, eps):
    """Matched (w3, w5, w7) of the D2Q9 link scheme when w9 = 0."""
    e = [None] + list(eps)  # 1-based
    a = e[2] + e[6] - e[8]
    b = e[4] + e[6] + e[8]
    r11 = a * a + (s - 2) * (e[3] + e[7] + e[9]) / 2
    r12 = 2 * a * b + (s - 2) * (e[7] - e[9])
    r22 = b * b + (s - 2) * (e[5] + e[7] + e[9]) / 2
    return (2 * r11 - r12) / s, (2 * r22 - r12) / s, r12 / s


def trt_diffusive_bulk_me(links, s, eps, mu):
    """Diffusive scaling; eps holds the rescaled (dx-free) equilibria."""
    d = len(links[0])
    V, D = {}, {}
    for a in range(d):
        u = tuple(int(i == a) for i in range(d))
        V[u] = mu * sum(eps[2 * k - 1] * c[a] for k, c in enumerate(links, 1))
    for k, c in enumerate(links, 1):
        for a in range(d):
            for b in range(a, d):
                m = tuple(int(i == a) + int(i == b) for i in range(d))
                fact = 2 if a == b else 1
                D[m] = D.get(m, 0) + 2 * mu * (1 / s - mpq(1, 2)) * eps[2 * k] * c[a] * c[b] / fact
    return V, D
