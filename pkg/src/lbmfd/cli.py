"""Command-line front end.

Every verb reads an optional YAML config, applies ``--set key=value``
overrides and ``--<param> value`` scheme parameters, and writes a JSON report
(symbolic verbs) or CSV files (simulation verbs).  Exit status: 0 success,
2 infeasible/unstable finding (report still written), 1 error.
"""

from __future__ import annotations

import copy
import json
import os
import sys
from fractions import Fraction
from typing import Any, Optional

import click
import numpy as np
import yaml

from . import fdreduce, modeq, sim, stability
from .ring import LaurentPoly, ZPoly, fmt_coeff
from .scheme import Initialisation, SchemeSpec, build_scheme, builtin, d1q2_initialisation

EXIT_OK, EXIT_ERROR, EXIT_FINDING = 0, 1, 2


class ConfigError(ValueError):
    pass


# ---------------------------------------------------------------------------
# Values and configs
# ---------------------------------------------------------------------------


def parse_value(text: Any) -> Any:
    """'3/2' -> Fraction, '0.5' -> Fraction('0.5'), 'a,b' -> list, 'true' -> True."""
    if not isinstance(text, str):
        return text
    t = text.strip()
    if t.lower() in ("true", "yes"):
        return True
    if t.lower() in ("false", "no"):
        return False
    if t.startswith("[") and t.endswith("]"):
        t = t[1:-1]
    if "," in t:
        return [parse_value(p) for p in t.split(",") if p.strip()]
    try:
        return int(t)
    except ValueError:
        pass
    try:
        return Fraction(t)
    except ValueError:
        return t


def rationalize(obj: Any) -> Any:
    """Turn 'p/q' strings (and floats written in YAML) into exact Fractions."""
    if isinstance(obj, dict):
        return {k: rationalize(v) for k, v in obj.items()}
    if isinstance(obj, list):
        return [rationalize(v) for v in obj]
    if isinstance(obj, float):
        return Fraction(repr(obj))
    if isinstance(obj, str):
        v = parse_value(obj)
        return v if not isinstance(v, list) else [rationalize(x) for x in v]
    return obj


def fmt(x: Any) -> Any:
    if isinstance(x, (bool, str)) or x is None:
        return x
    if isinstance(x, int):
        return str(x)
    if isinstance(x, Fraction):
        return f"{x.numerator}/{x.denominator}" if x.denominator != 1 else str(x.numerator)
    return fmt_coeff(x)


def load_config(path: Optional[str]) -> dict:
    if not path:
        return {}
    try:
        with open(path) as fh:
            cfg = yaml.safe_load(fh) or {}
    except (OSError, yaml.YAMLError) as err:
        raise ConfigError(f"cannot read config {path}: {err}") from err
    if not isinstance(cfg, dict):
        raise ConfigError("config must be a mapping")
    return cfg


def apply_overrides(cfg: dict, overrides: tuple) -> dict:
    cfg = copy.deepcopy(cfg)
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not key=value")
        key, val = item.split("=", 1)
        node = cfg
        parts = key.split(".")
        for p in parts[:-1]:
            node = node.setdefault(p, {})
        node[parts[-1]] = parse_value(val)
    return cfg


def extra_params(args: list) -> dict:
    """--s2 3/2 --magic -> {'s2': Fraction(3, 2), 'magic': True}."""
    out, i = {}, 0
    while i < len(args):
        a = args[i]
        if not a.startswith("--"):
            raise ConfigError(f"unexpected argument {a!r}")
        key = a[2:].replace("-", "_")
        if "=" in key:
            key, val = key.split("=", 1)
            out[key] = parse_value(val)
            i += 1
        elif i + 1 < len(args) and not args[i + 1].startswith("--"):
            out[key] = parse_value(args[i + 1])
            i += 2
        else:
            out[key] = True
            i += 1
    return out


# ---------------------------------------------------------------------------
# Schemes
# ---------------------------------------------------------------------------

_SPEC_KEYS = ("name", "velocities", "M", "s", "eps", "lambda", "scaling", "mu", "eps_scale")


def spec_to_dict(spec: SchemeSpec) -> dict:
    return {
        "name": spec.name,
        "velocities": [list(c) for c in spec.velocities],
        "M": [[fmt(c) for c in row] for row in spec.M],
        "s": [fmt(c) for c in spec.s],
        "eps": [fmt(c) for c in spec.eps],
        "lambda": fmt(spec.lam),
        "scaling": spec.scaling,
        "mu": fmt(spec.mu) if spec.mu is not None else None,
        "eps_scale": list(spec.eps_scale),
    }


def spec_from_dict(d: dict) -> SchemeSpec:
    d = rationalize(d)
    if "velocities" not in d:
        params = {("lam" if k == "lambda" else k): v for k, v in d.items() if k != "name"}
        return builtin(str(d.get("name", "")), **params)
    unknown = set(d) - set(_SPEC_KEYS)
    if unknown:
        raise ConfigError(f"unknown scheme keys {sorted(unknown)}")
    return SchemeSpec(
        tuple(tuple(c) for c in d["velocities"]),
        tuple(tuple(r) for r in d["M"]),
        tuple(d["s"]),
        tuple(d["eps"]),
        d.get("lambda", 1),
        d.get("scaling", "acoustic"),
        d.get("mu"),
        tuple(d["eps_scale"]) if d.get("eps_scale") is not None else None,
        str(d.get("name", "custom")),
    )


_REQUIRED = {
    "d1q2": ("s2", "eps2"),
    "d1q3": ("s2", "s3", "eps2", "eps3"),
}


def _symbolic_missing(params: dict) -> dict:
    """Missing rates/equilibria of the small built-ins become symbols."""
    name = str(params.get("name", "")).lower()
    need = list(_REQUIRED.get(name, ()))
    if name == "d1q3" and params.get("magic"):
        need.remove("s3")
    missing = [k for k in need if k not in params]
    if not missing:
        return params
    from sympy import QQ
    from sympy.polys.fields import field

    _, *gens = field(",".join(missing), QQ)
    out = dict(params)
    out.update(zip(missing, gens))
    return out


def resolve_spec(cfg: dict, extra: dict) -> SchemeSpec:
    if "scheme_file" in extra or "scheme_file" in cfg:
        path = extra.get("scheme_file") or cfg["scheme_file"]
        return spec_from_dict(load_config(str(path)))
    sch = dict(cfg.get("scheme") or {})
    for k, v in extra.items():
        if k not in ("init", "n", "free", "nfreq", "kind", "w"):
            sch[k] = v
    if "scheme" in sch and "name" not in sch:
        sch["name"] = sch.pop("scheme")
    if "name" not in sch:
        raise ConfigError("no scheme given (use --scheme NAME or a config)")
    if "velocities" in sch:
        return spec_from_dict(sch)
    sch = rationalize(sch)
    sch = _symbolic_missing(sch)
    params = {("lam" if k == "lambda" else k): v for k, v in sch.items() if k != "name"}
    return builtin(str(sch["name"]), **params)


def resolve_init(spec: SchemeSpec, cfg: dict, extra: dict) -> Optional[Initialisation]:
    init = extra.get("init", cfg.get("init"))
    w = extra.get("w")
    if w is not None:
        init = {"w": w if isinstance(w, list) else [w]}
    if init is None:
        return None
    if isinstance(init, str):
        init = {"name": init}
    init = rationalize(init)
    if "w" not in init:
        return d1q2_initialisation(init["name"], spec.s[1], spec.eps[1])
    return sim.make_initialisation(spec, init)


# ---------------------------------------------------------------------------
# Serialization of symbolic objects
# ---------------------------------------------------------------------------


def stencil_dict(p: LaurentPoly) -> dict:
    return {",".join(str(v) for v in e): fmt_coeff(c) for e, c in sorted(p.terms.items())}


def zpoly_dict(z: ZPoly) -> dict:
    return {f"z^{k}": stencil_dict(c) for k, c in enumerate(z.coeffs) if not c.is_zero()}


def fd_report(fd: fdreduce.FDScheme) -> dict:
    return {
        "kind": fd.kind,
        "degree": fd.degree,
        "stages": fd.stages,
        "amplification": zpoly_dict(fd.amp),
        "update": [stencil_dict(c) for c in fd.update_coefficients()],
    }


def emit(report: dict, output: Optional[str]) -> None:
    text = json.dumps(report, indent=2, sort_keys=False)
    if output:
        with open(output, "w") as fh:
            fh.write(text + "\n")
    click.echo(text)


# ---------------------------------------------------------------------------
# Verbs
# ---------------------------------------------------------------------------


def do_reduce(spec: SchemeSpec, cfg: dict, extra: dict) -> tuple[dict, int]:
    ops = build_scheme(spec)
    fd = fdreduce.bulk_fd(ops)
    rep = {"scheme": spec_to_dict(spec), "Q": ops.Q, "charpoly": zpoly_dict(fdreduce.charpoly_E(ops)),
           "bulk": fd_report(fd)}
    w = resolve_init(spec, cfg, extra)
    if w is not None:
        rep["starting"] = {str(n): stencil_dict(fdreduce.starting_scheme(ops, w, n)) for n in range(fd.degree)}
    return rep, EXIT_OK


def do_observe(spec: SchemeSpec, cfg: dict, extra: dict) -> tuple[dict, int]:
    ops = build_scheme(spec)
    obs = fdreduce.observability(ops)
    tf = fdreduce.transfer_function(ops, obs)
    rep = {
        "scheme": spec_to_dict(spec),
        "o": obs.index_o,
        "q": ops.q,
        "Psi": zpoly_dict(obs.psi),
        "det_Omega": stencil_dict(obs.det_Omega),
        "brewer_observable": obs.brewer_observable,
        "cofactor": zpoly_dict(obs.cofactor),
        "reduced": fd_report(fdreduce.reduced_fd(obs.psi)),
        "transfer": {
            "numerator": zpoly_dict(tf.numerator),
            "denominator": zpoly_dict(tf.denominator),
            "common_factor": zpoly_dict(tf.common_factor) if tf.common_factor is not None else None,
        },
    }
    return rep, EXIT_OK


def do_modeq(spec: SchemeSpec, cfg: dict, extra: dict) -> tuple[dict, int]:
    ops = build_scheme(spec)
    order = extra.get("order", cfg.get("order"))
    bulk = modeq.modified_equation(ops, order=order)
    rep = {"scheme": spec.name, "scaling": spec.scaling, "bulk": bulk.report()}
    w = resolve_init(spec, cfg, extra)
    if w is not None:
        ns = extra.get("n", cfg.get("n", ops.Q + 1))
        ns = list(range(1, int(ns) + 1)) if not isinstance(ns, list) else [int(v) for v in ns]
        cons = modeq.check_consistency(w, ops)
        rep["initialisation"] = w.name
        rep["consistency"] = {k: {"value": fmt_coeff(v), "expected": fmt_coeff(e), "ok": ok}
                              for k, (v, e, ok) in cons.checks.items()}
        rep["starting"] = [modeq.modified_equation(ops, w, n, order).report() for n in ns]
        label_limit = ops.Q
        for r in rep["starting"]:
            r["label"] = "initialisation" if int(r["n"]) <= label_limit else "starting"
    return rep, EXIT_OK


def do_match(spec: SchemeSpec, cfg: dict, extra: dict) -> tuple[dict, int]:
    free = extra.get("free", cfg.get("free"))
    if free is None:
        raise ConfigError("match needs the free variables (--free w3 or free: [w3])")
    free = free if isinstance(free, list) else [free]
    w_fixed = rationalize(cfg.get("w_fixed", {}))
    for k, v in extra.items():
        if k.startswith("w") and k[1:].isdigit():
            w_fixed[k] = v
    res = modeq.match_dissipation(spec, [str(f) for f in free], w_fixed or None)
    rep = {"scheme": spec.name, **res.report()}
    return rep, EXIT_OK if res.feasible else EXIT_FINDING


def do_stability(spec: SchemeSpec, cfg: dict, extra: dict) -> tuple[dict, int]:
    nfreq = int(extra.get("nfreq", cfg.get("nfreq", 129)))
    kind = str(extra.get("kind", cfg.get("kind", "bulk")))
    fd = stability.fd_for(spec, kind)
    r = stability.frequency_sweep(fd, nfreq)
    rep = {"scheme": spec_to_dict(spec), "kind": kind, "stable": r.stable,
           "max_root_modulus": r.max_root_modulus, "worst_frequency": list(r.worst_frequency),
           "multiple_unit_roots_at": [list(f) for f in r.boundary_flags]}
    if fd.degree <= 4:
        rep["schur_cohn_stable"] = stability.schur_cohn_sweep(fd, nfreq)
    return rep, EXIT_OK if r.stable else EXIT_FINDING


def stability_grid(cfg: dict, output: Optional[str], seed: Optional[int]) -> int:
    """Parameter sweep: a grid ({param: [lo, hi, count]}) or random draws."""
    base = dict(cfg.get("scheme") or {})
    nfreq = int(cfg.get("nfreq", 129))
    kind = str(cfg.get("kind", "bulk"))
    points = []
    if "grid" in cfg:
        axes = {k: np.linspace(float(lo), float(hi), int(n)) for k, (lo, hi, n) in cfg["grid"].items()}
        names = list(axes)
        for combo in np.array(np.meshgrid(*axes.values(), indexing="ij")).reshape(len(names), -1).T:
            points.append(dict(zip(names, combo)))
    if "random" in cfg:
        rng = np.random.default_rng(seed if seed is not None else cfg.get("seed", 0))
        for _ in range(int(cfg["random"]["count"])):
            points.append({k: rng.uniform(float(lo), float(hi)) for k, (lo, hi) in cfg["random"]["ranges"].items()})
    rows, any_unstable = [], False
    for p in points:
        sch = dict(base)
        sch.update({k: Fraction(float(v)).limit_denominator(10 ** 9) for k, v in p.items()})
        spec = spec_from_dict(sch)
        r = stability.frequency_sweep(stability.fd_for(spec, kind), nfreq)
        any_unstable |= not r.stable
        rows.append(tuple(float(v) for v in p.values()) + (int(r.stable), r.max_root_modulus,
                                                            ";".join(repr(v) for v in r.worst_frequency)))
    header = tuple(points[0].keys()) + ("stable", "max_modulus", "worst_xi") if points else ()
    if output:
        sim.write_csv(output, header, rows)
    click.echo(f"{len(rows)} parameter points, {sum(1 for r in rows if not r[-3])} unstable")
    return EXIT_OK


# ---------------------------------------------------------------------------
# Simulation verbs
# ---------------------------------------------------------------------------


def experiment_runs(cfg: dict) -> list[tuple[str, sim.ExperimentConfig]]:
    base = {k: v for k, v in cfg.items() if k not in ("runs", "output", "description")}
    runs = cfg.get("runs") or [{}]
    out = []
    for i, r in enumerate(runs):
        merged = copy.deepcopy(base)
        for k, v in r.items():
            if isinstance(v, dict) and isinstance(merged.get(k), dict):
                merged[k] = {**merged[k], **v}
            else:
                merged[k] = v
        label = str(merged.pop("label", f"run{i}"))
        sch = rationalize(merged.pop("scheme", {}))
        init = rationalize(merged.pop("init", {}))
        interior = merged.pop("interior", None)
        known = {"kind", "datum", "grids", "final_time", "steps", "probe", "fields"}
        unknown = set(merged) - known
        if unknown:
            raise ConfigError(f"unknown experiment keys {sorted(unknown)}")
        ec = sim.ExperimentConfig(
            kind=str(merged.get("kind", "")), scheme=sch, init=init, datum=str(merged.get("datum", "cosine")),
            grids=[int(g) for g in merged.get("grids", [])],
            final_time=float(merged["final_time"]) if merged.get("final_time") is not None else None,
            steps=int(merged["steps"]) if merged.get("steps") is not None else None,
            probe=int(merged.get("probe", 7)), fields=dict(merged.get("fields", {})),
            interior=tuple(interior) if interior else None, label=label)
        out.append((label, ec))
    return out


def _csv_path(output: Optional[str], label: str, n_runs: int) -> Optional[str]:
    if not output:
        return None
    if output.endswith(".csv") and n_runs == 1:
        return output
    os.makedirs(output, exist_ok=True)
    return os.path.join(output, f"{label}.csv")


def do_experiment(verb: str, cfg: dict, output: Optional[str]) -> int:
    runs = experiment_runs(cfg)
    status = EXIT_OK
    summary = {}
    for label, ec in runs:
        path = _csv_path(output, label, len(runs))
        if verb == "convergence":
            r = sim.convergence_study(ec)
            rows = r.rows()
            summary[label] = {"order": r.order, "errors": r.errors}
            if r.blowup:
                status = EXIT_FINDING
        elif verb == "smoothness":
            r = sim.smoothness_probe(ec)
            rows = r.rows()
            summary[label] = {"alternation_rate": sim.alternation_rate(r.errors)}
        else:
            r = sim.unobservable_run(ec)
            rows = r.rows()
            summary[label] = {"in_kernel": r.in_kernel, "max_l2_m1": max(r.l2_m1),
                              "final_interior_max": r.interior_max[-1]}
        if path:
            sim.write_csv(path, sim.CSV_HEADERS[verb], rows)
    click.echo(json.dumps(summary, indent=2))
    return status


def symbolic_runs(verb: str, cfg: dict, extra: dict) -> tuple[dict, int]:
    """One report per entry of ``runs`` (each merged over the base config)."""
    base = {k: v for k, v in cfg.items() if k not in ("runs", "description")}
    reports, status = {}, EXIT_OK
    for i, r in enumerate(cfg["runs"]):
        merged = copy.deepcopy(base)
        for k, v in r.items():
            if isinstance(v, dict) and isinstance(merged.get(k), dict):
                merged[k] = {**merged[k], **v}
            else:
                merged[k] = v
        label = str(merged.pop("label", f"run{i}"))
        rep, st = SYMBOLIC[verb](resolve_spec(merged, extra), merged, extra)
        reports[label] = rep
        status = max(status, st)
    return reports, status


# ---------------------------------------------------------------------------
# Click wiring
# ---------------------------------------------------------------------------

_CTX = dict(ignore_unknown_options=True, allow_extra_args=True)
SYMBOLIC = {"reduce": do_reduce, "observe": do_observe, "modeq": do_modeq, "match": do_match,
            "stability": do_stability}


@click.group()
@click.option("--seed", type=int, default=None, help="Seed for randomized parameter corpora.")
@click.pass_context
def cli(ctx, seed):
    """Lattice Boltzmann schemes as multi-step finite differences."""
    ctx.ensure_object(dict)
    ctx.obj["seed"] = seed


def _symbolic_command(verb: str):
    @cli.command(verb, context_settings=_CTX)
    @click.option("--config", "-c", "config", type=click.Path(), default=None)
    @click.option("--output", "-o", "output", type=click.Path(), default=None)
    @click.option("--set", "overrides", multiple=True, help="Config override key=value.")
    @click.option("--save-scheme", type=click.Path(), default=None, help="Write the resolved scheme as YAML.")
    @click.pass_context
    def command(ctx, config, output, overrides, save_scheme):
        try:
            cfg = apply_overrides(load_config(config), overrides)
            if verb == "stability" and ("grid" in cfg or "random" in cfg):
                ctx.exit(stability_grid(cfg, output, ctx.obj.get("seed")))
            extra = extra_params(list(ctx.args))
            if "runs" in cfg:
                report, status = symbolic_runs(verb, cfg, extra)
            else:
                spec = resolve_spec(cfg, extra)
                if save_scheme:
                    with open(save_scheme, "w") as fh:
                        yaml.safe_dump(spec_to_dict(spec), fh, sort_keys=False)
                report, status = SYMBOLIC[verb](spec, cfg, extra)
        except (ConfigError, ValueError, KeyError, ArithmeticError, modeq.UnsupportedMatch) as err:
            click.echo(f"error: {err}", err=True)
            ctx.exit(EXIT_ERROR)
        emit(report, output)
        ctx.exit(status)

    command.__doc__ = f"{verb} analysis of a scheme."
    return command


def _experiment_command(verb: str):
    @cli.command(verb)
    @click.option("--config", "-c", "config", type=click.Path(exists=True), required=True)
    @click.option("--output", "-o", "output", type=click.Path(), default=None)
    @click.option("--set", "overrides", multiple=True, help="Config override key=value.")
    @click.pass_context
    def command(ctx, config, output, overrides):
        try:
            cfg = apply_overrides(load_config(config), overrides)
            cfg.setdefault("kind", verb)
            status = do_experiment(verb, cfg, output or cfg.get("output"))
        except (ConfigError, ValueError, KeyError) as err:
            click.echo(f"error: {err}", err=True)
            ctx.exit(EXIT_ERROR)
        ctx.exit(status)

    command.__doc__ = f"Run a {verb} experiment from a config."
    return command


for _v in SYMBOLIC:
    _symbolic_command(_v)
for _v in ("convergence", "smoothness", "unobservable"):
    _experiment_command(_v)


def main(argv: Optional[list] = None) -> None:
    cli.main(args=argv, prog_name="lbmfd", obj={})


if __name__ == "__main__":  # pragma: no cover
    main(sys.argv[1:])
