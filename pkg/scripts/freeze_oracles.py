"""Freeze independent oracle values into tests/oracles/derived.json.

The oracle never touches lbmfd's ring algebra: the evolution matrix is built
with sympy from explicit shift symbols x1, x2 (x^{-1} = 1/x) and the
characteristic polynomial comes from sympy's Berkowitz algorithm.  Laurent
polynomials are stored as {"e1,e2": "p/q"} maps per power of z.

    python3 scripts/freeze_oracles.py
"""

import json
from pathlib import Path

import sympy as sp

OUT = Path(__file__).resolve().parents[1] / "tests" / "oracles" / "derived.json"
X = sp.symbols("x1 x2")
Z = sp.Symbol("z")

D1Q2_M = [[1, 1], [1, -1]]
D1Q3_M = [[1, 1, 1], [0, 1, -1], [-2, 1, 1]]


def link_system(links):
    d = len(links[0])
    vel = [(0,) * d]
    for c in links:
        vel += [tuple(c), tuple(-v for v in c)]
    q = len(vel)
    M = [[1] * q]
    for j in range(len(links)):
        r1, r2 = [0] * q, [0] * q
        r1[1 + 2 * j], r1[2 + 2 * j] = 1, -1
        r2[1 + 2 * j], r2[2 + 2 * j] = 1, 1
        M += [r1, r2]
    return vel, M


CASES = {
    "d1q2_s3/2": ([(1,), (-1,)], D1Q2_M, ["1", "3/2"], ["1", "1/3"]),
    "d1q2_s1": ([(1,), (-1,)], D1Q2_M, ["1", "1"], ["1", "2/5"]),
    "d1q2_s2": ([(1,), (-1,)], D1Q2_M, ["1", "2"], ["1", "1/2"]),
    "d1q3_generic": ([(0,), (1,), (-1,)], D1Q3_M, ["1", "3/2", "6/5"], ["1", "1/2", "1/10"]),
    "d1q3_magic": ([(0,), (1,), (-1,)], D1Q3_M, ["1", "3/2", "1/2"], ["1", "1/2", "1/10"]),
    "d1q3_link": (*link_system([(1,)]), ["1", "3/2", "1/2"], ["1", "1/3", "1/7"]),
    "d2q5_link": (*link_system([(1, 0), (0, 1)]), ["1", "3/2", "1/2", "3/2", "1/2"],
                  ["1", "1/3", "1/5", "1/7", "1/11"]),
}


def evolution(vel, M, s, eps):
    d = len(vel[0])
    q = len(vel)
    Mm = sp.Matrix(M)
    D = sp.diag(*[sp.Mul(*[X[a] ** c[a] for a in range(d)]) for c in vel])
    K = sp.zeros(q, q)
    K[0, 0] = 1
    for i in range(1, q):
        si, ei = sp.Rational(s[i]), sp.Rational(eps[i])
        K[i, i] = 1 - si
        K[i, 0] = si * ei
    return Mm * D * Mm.inv() * K, d


def laurent_dict(expr, d):
    expr = sp.expand(expr)
    out = {}
    for term in sp.Add.make_args(expr):
        if term == 0:
            continue
        coeff, exps = sp.Rational(1), [0] * d
        for f in sp.Mul.make_args(term):
            base, e = f.as_base_exp()
            if base in X[:d]:
                exps[X.index(base)] += int(e)
            else:
                coeff *= f
        key = ",".join(str(v) for v in exps)
        out[key] = out.get(key, 0) + coeff
    return {k: str(v) for k, v in sorted(out.items()) if v != 0}


def charpoly_dict(E, d):
    cp = E.charpoly(Z)
    coeffs = cp.all_coeffs()[::-1]
    return [laurent_dict(c, d) for c in coeffs]


def first_rows(E, n_max):
    q = E.shape[0]
    row = sp.Matrix([[1] + [0] * (q - 1)])
    rows = [row]
    for _ in range(n_max):
        row = (row * E).applyfunc(sp.expand)
        rows.append(row)
    return rows


def main():
    data = {"charpoly": {}, "first_rows": {}}
    for name, (vel, M, s, eps) in CASES.items():
        E, d = evolution(vel, M, s, eps)
        data["charpoly"][name] = {"s": s, "eps": eps, "coeffs": charpoly_dict(E, d)}
        if d == 1:
            rows = first_rows(E, 4)
            data["first_rows"][name] = [[laurent_dict(v, d) for v in r] for r in rows]
    OUT.parent.mkdir(parents=True, exist_ok=True)
    OUT.write_text(json.dumps(data, indent=1, sort_keys=True) + "\n")
    print(f"wrote {OUT}")


if __name__ == "__main__":
    main()
