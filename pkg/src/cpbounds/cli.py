"""Command line entry point.

One JSON config file per run; four subcommands:

    cpbounds bound    config.json     # error bound report (JSON)
    cpbounds simulate config.json     # empirical count law vs POIS(pi)
    cpbounds validate config.json     # verification battery; exit 1 on fail
    cpbounds sweep    config.json     # CSV over a gamma- or t-grid

Exit status: 0 success, 1 validation/applicability failure, 2 config error.
Artifacts are deterministic byte-for-byte for a fixed config (timing goes
to stderr, never into files).
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys

import numpy as np
import jsonschema

from . import bounds, validation
from .compound_poisson import CompoundPoissonSpec, pmf_vector
from .distributions import (
    Erlang,
    Exponential,
    HyperExponential,
    LatticeGeometric,
    LatticePmf,
    ReferenceMeasure,
    Uniform,
    Weibull,
)
from .errors import ConfigError, CPBoundsError
from .memoryless import build_profile, optimize_gamma
from .mrpp import MrppModel, default_mu, state_profiles

__all__ = ["main", "run", "CONFIG_SCHEMA"]


_DIST_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["family", "params"],
    "properties": {
        "family": {
            "enum": [
                "exponential",
                "erlang",
                "hyperexponential",
                "weibull",
                "uniform",
                "lattice_geometric",
                "lattice_pmf",
            ]
        },
        "params": {"type": "array", "items": {"type": "number"}, "minItems": 1},
        "tail_ratio": {"type": "number"},
    },
}

CONFIG_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["model", "t"],
    "properties": {
        "model": {
            "type": "object",
            "additionalProperties": False,
            "required": ["type"],
            "properties": {
                "type": {"enum": ["renewal", "mrpp"]},
                "sojourn": _DIST_SCHEMA,
                "states": {"type": "integer", "minimum": 1},
                "transition": {
                    "type": "array",
                    "items": {"type": "array", "items": {"type": "number"}},
                },
                "sojourns": {
                    "type": "array",
                    "items": {
                        "type": "array",
                        "items": {"oneOf": [_DIST_SCHEMA, {"type": "null"}]},
                    },
                },
                "counted": {"type": "array", "items": {"type": "integer"}},
            },
        },
        "gamma": {
            "oneOf": [
                {"type": "number"},
                {"const": "auto"},
                {
                    "type": "object",
                    "additionalProperties": False,
                    "required": ["grid"],
                    "properties": {
                        "grid": {"type": "array", "items": {"type": "number"}}
                    },
                },
            ]
        },
        "mu": {
            "oneOf": [
                {"type": "array", "items": {"type": "number"}},
                {"const": "stationary"},
            ]
        },
        "t": {"type": "number", "exclusiveMinimum": 0},
        "epsilon": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
        "exact_last_point": {"type": "boolean"},
        "simulation": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "replications": {"type": "integer", "minimum": 100},
                "seed": {"type": "integer", "minimum": 0, "maximum": 2**64 - 1},
            },
        },
        "sweep": {
            "type": "object",
            "additionalProperties": False,
            "required": ["over", "values"],
            "properties": {
                "over": {"enum": ["gamma", "t"]},
                "values": {"type": "array", "items": {"type": "number"}, "minItems": 1},
            },
        },
        "output": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "format": {"enum": ["json", "csv"]},
                "path": {"type": "string"},
            },
        },
    },
}


def _build_distribution(desc):
    fam = desc["family"]
    p = list(desc["params"])
    if fam == "exponential":
        return Exponential(*p)
    if fam == "erlang":
        return Erlang(int(p[0]), p[1])
    if fam == "hyperexponential":
        if len(p) % 2:
            raise ConfigError("hyperexponential params: weights then rates")
        k = len(p) // 2
        return HyperExponential(p[:k], p[k:])
    if fam == "weibull":
        return Weibull(*p)
    if fam == "uniform":
        return Uniform(*p)
    if fam == "lattice_geometric":
        return LatticeGeometric(*p)
    if fam == "lattice_pmf":
        return LatticePmf(p, tail_ratio=desc.get("tail_ratio"))
    raise ConfigError(f"unknown family {fam!r}")


def load_config(path_or_obj):
    if isinstance(path_or_obj, dict):
        cfg = path_or_obj
    else:
        with open(path_or_obj, "r", encoding="utf-8") as fh:
            cfg = json.load(fh)
    try:
        jsonschema.validate(cfg, CONFIG_SCHEMA)
    except jsonschema.ValidationError as exc:
        raise ConfigError(f"config schema violation: {exc.message}") from exc
    return cfg


def _build_model(cfg):
    mc = cfg["model"]
    if mc["type"] == "renewal":
        if "sojourn" not in mc:
            raise ConfigError("renewal model needs a 'sojourn' descriptor")
        d = _build_distribution(mc["sojourn"])
        return MrppModel.renewal(d)
    for key in ("transition", "sojourns"):
        if key not in mc:
            raise ConfigError(f"mrpp model needs {key!r}")
    soj = [
        [None if cell is None else _build_distribution(cell) for cell in row]
        for row in mc["sojourns"]
    ]
    try:
        return MrppModel(mc["transition"], soj, counted=mc.get("counted"))
    except (ValueError, CPBoundsError) as exc:
        raise ConfigError(str(exc)) from exc


def _gamma_grid(cfg, model):
    g = cfg.get("gamma", "auto")
    if isinstance(g, (int, float)):
        return [float(g)]
    if isinstance(g, dict):
        return [float(x) for x in g["grid"]]
    # "auto": a decade around the point intensity, clipped for lattice mode
    lam = model.intensity()
    if model.mode == "lattice":
        hi = 1.0
        lo = max(min(lam, 1.0) / 4.0, 1e-3)
        return list(np.round(np.geomspace(lo, hi, 9), 12))
    return list(np.round(np.geomspace(lam / 4.0, lam * 4.0, 9), 12))


def _resolve_mu(cfg, model):
    mu = cfg.get("mu", "stationary")
    if isinstance(mu, str):
        return default_mu(model)
    mu = np.asarray(mu, dtype=float)
    if mu.shape != (model.n_states,) or np.any(mu < 0) or abs(mu.sum() - 1) > 1e-9:
        raise ConfigError("mu must be a probability vector over the states")
    return mu


def _bound_report(cfg, model, gamma=None, t=None):
    t = float(cfg["t"]) if t is None else float(t)
    exact_u = bool(cfg.get("exact_last_point", False))
    if model.n_states == 1:
        d = model.sojourns[0][0]
        m1, m2 = d.moments()
        if gamma is None:
            grid = _gamma_grid(cfg, model)
            if len(grid) == 1:
                gamma = grid[0]
            else:
                gamma, _ = optimize_gamma(d, t, grid)
        prof = build_profile(d, ReferenceMeasure(gamma, model.mode))
        return bounds.renewal_bound(prof, m1, m2, t, exact_last_point=exact_u)
    if gamma is None:
        grid = _gamma_grid(cfg, model)
        gamma = grid[0] if len(grid) == 1 else None
        if gamma is None:
            best = None
            for g in grid:
                try:
                    rep = _bound_report(cfg, model, gamma=g, t=t)
                except CPBoundsError:
                    continue
                if best is None or rep.total < best.total - 1e-15:
                    best = rep
            if best is None:
                raise CPBoundsError("no usable rate on the grid")
            return best
    mu = _resolve_mu(cfg, model)
    profs = state_profiles(model, ReferenceMeasure(gamma, model.mode), mu)
    return bounds.mrpp_bound(model, profs, mu, t, exact_last_point=exact_u)


def _dump_json(obj, stream):
    stream.write(json.dumps(obj, sort_keys=True, indent=2))
    stream.write("\n")


def _write_artifact(cfg, render_json, render_csv):
    out = cfg.get("output", {})
    fmt = out.get("format", "json")
    path = out.get("path")
    buf = io.StringIO()
    if fmt == "json":
        _dump_json(render_json(), buf)
    else:
        w = csv.writer(buf, lineterminator="\n")
        for row in render_csv():
            w.writerow(row)
    data = buf.getvalue()
    if path:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(data)
    else:
        sys.stdout.write(data)
    return data


def _simulation_params(cfg):
    sim = cfg.get("simulation", {})
    return int(sim.get("replications", 10**4)), int(sim.get("seed", 0))


def _spec_from_report(rep):
    if rep.pi_kind == "geometric":
        return CompoundPoissonSpec.geometric(rep.pi_norm, rep.pi_c0)
    return CompoundPoissonSpec.finite(rep.pi_masses)


def run(command: str, cfg: dict) -> int:
    """Execute one subcommand on a validated config; returns the exit code."""
    model = _build_model(cfg)

    if command == "bound":
        rep = _bound_report(cfg, model)
        _write_artifact(cfg, rep.to_dict, lambda: _report_rows(rep))
        return 0

    if command == "simulate":
        reps, seed = _simulation_params(cfg)
        rep = _bound_report(cfg, model)
        res = validation.empirical_distribution(
            model, cfg["t"], model.counted, reps, seed
        )
        spec = _spec_from_report(rep)
        ref = pmf_vector(spec, max(spec.default_nmax(), len(res.counts) - 1))
        tv, se = validation.bootstrap_tv(res, ref, seed=seed + 1)
        n = max(len(res.counts), len(ref))
        emp = np.zeros(n)
        emp[: len(res.counts)] = res.pmf
        refv = np.zeros(n)
        refv[: len(ref)] = ref

        def as_json():
            return {
                "seed": seed,
                "replications": reps,
                "t": cfg["t"],
                "empirical_mean": res.mean,
                "tv_estimate": tv,
                "tv_bootstrap_se": se,
                "bound": rep.total,
                "table": [
                    {"n": int(i), "empirical": float(emp[i]), "spec": float(refv[i])}
                    for i in range(n)
                ],
            }

        def as_csv():
            yield ["n", "empirical", "spec"]
            for i in range(n):
                yield [i, repr(float(emp[i])), repr(float(refv[i]))]

        _write_artifact(cfg, as_json, as_csv)
        print(
            f"simulate: reps={reps} seed={seed} tv={tv:.6f} se={se:.6f} "
            f"bound={rep.total:.6f}",
            file=sys.stderr,
        )
        return 0

    if command == "validate":
        return _run_validate(cfg, model)

    if command == "sweep":
        if "sweep" not in cfg:
            raise ConfigError("sweep command needs a 'sweep' block")
        over = cfg["sweep"]["over"]
        values = cfg["sweep"]["values"]
        rows = [
            [
                over,
                "c0",
                "c1",
                "h1_value",
                "h1_regime",
                "term_coupling",
                "term_main",
                "total",
                "capped",
            ]
        ]
        for v in values:
            try:
                if over == "gamma":
                    rep = _bound_report(cfg, model, gamma=float(v))
                else:
                    rep = _bound_report(cfg, model, t=float(v))
            except CPBoundsError:
                rows.append([repr(float(v))] + ["inapplicable"] * 8)
                continue
            rows.append(
                [
                    repr(float(v)),
                    ";".join(repr(c) for c in rep.c0s),
                    ";".join(repr(c) for c in rep.c1s),
                    repr(rep.h1_value),
                    rep.h1_regime,
                    repr(rep.term_coupling),
                    repr(rep.term_main),
                    repr(rep.total),
                    repr(rep.capped),
                ]
            )

        def as_json():
            header, *body = rows
            return {"columns": header, "rows": body}

        _write_artifact(cfg, as_json, lambda: iter(rows))
        return 0

    raise ConfigError(f"unknown command {command!r}")


def _report_rows(rep):
    d = rep.to_dict()
    yield ["key", "value"]
    for k, v in sorted(_flatten(d).items()):
        yield [k, v if isinstance(v, str) else repr(v)]


def _flatten(d, prefix=""):
    out = {}
    for k, v in d.items():
        key = f"{prefix}{k}"
        if isinstance(v, dict):
            out.update(_flatten(v, key + "."))
        else:
            out[key] = v
    return out


def _run_validate(cfg, model):
    reps, seed = _simulation_params(cfg)
    t = float(cfg["t"])
    report = {"seed": seed, "checks": {}}
    ok = True
    try:
        rep = _bound_report(cfg, model)
    except CPBoundsError as exc:
        _dump_json({"error": str(exc)}, sys.stdout)
        return 1
    if model.mode == "lattice":
        dom = validation.dominance_check(model, rep, t, exact=True)
    else:
        dom = validation.dominance_check(
            model, rep, t, reps=reps, seed=seed, exact=False
        )
    report["checks"]["bound_dominance"] = dom
    ok &= dom["ok"]
    if model.n_states == 1:
        d = model.sojourns[0][0]
        prof = build_profile(d, ReferenceMeasure(rep.gamma, model.mode))
        m1 = d.moments()[0]
        grid = [0.5 * m1, m1, 2.0 * m1]
        mem = validation.memoryless_conditional_test(
            prof, d, grid, max(reps, 10**4), seed + 17
        )
        report["checks"]["memoryless_conditional"] = mem
        ok &= mem["status"] != "fail"
    else:
        mu = _resolve_mu(cfg, model)
        profs = state_profiles(
            model, ReferenceMeasure(rep.gamma, model.mode), mu
        )
        eps = float(cfg.get("epsilon", 0.1))
        res = validation.restriction_equivalence_test(
            model, profs, mu, eps, max(reps, 10**4), seed + 29
        )
        report["checks"]["restriction_equivalence"] = res
        ok &= res["pass"]
    report["pass"] = bool(ok)
    _write_artifact(cfg, lambda: report, lambda: _validate_rows(report))
    return 0 if ok else 1


def _validate_rows(report):
    yield ["check", "pass"]
    for name, chk in report["checks"].items():
        status = chk.get("ok", chk.get("pass", chk.get("status")))
        yield [name, repr(status)]
    yield ["overall", repr(report["pass"])]


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="cpbounds",
        description="Compound Poisson error bounds for renewal and Markov "
        "renewal point counts",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("bound", "simulate", "validate", "sweep"):
        p = sub.add_parser(name)
        p.add_argument("config", help="path to a JSON run configuration")
    args = parser.parse_args(argv)
    try:
        cfg = load_config(args.config)
        return run(args.command, cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except CPBoundsError as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
