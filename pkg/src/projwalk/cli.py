"""Command-line experiment runner.

    projwalk run --config FILE [--seed N] [--out DIR] [--workers K]
    projwalk validate --config FILE

A config is an INI file with a ``[run]`` section (experiment, ensemble,
seed, out, workers) and one section named after the experiment holding its
parameters.  Output formats are described in ``docs/formats.md``.
"""

import argparse
import configparser
import csv
import hashlib
import json
import math
import os
import sys
import time
from dataclasses import dataclass, field

import numpy as np

from . import __version__
from . import ensemble as ens_mod
from . import montecarlo as mc
from . import transferop as to
from . import zeroone as zo
from .errors import ConfigError, ProjwalkError
from .io import fmt, save_measure
from .rng import stream

BUILTIN = {"two_matrix": ens_mod.two_matrix, "example1": ens_mod.example_one}


def _int(v):
    return int(v)


def _float(v):
    return float(v)


def _floats(v):
    return [float(x) for x in v.replace(",", " ").split()]


def _ints(v):
    return [int(x) for x in v.replace(",", " ").split()]


# experiment -> key -> (parser, default, check); default None means required
SCHEMA = {
    "lyapunov": {"n": (_int, "1000", lambda v: v >= 1),
                 "replicas": (_int, "3000", lambda v: v >= 1),
                 "burn_in": (_int, "200", lambda v: v >= 0),
                 "x0": (_floats, "", lambda v: True)},
    "stationary": {"n": (_int, "1", lambda v: v >= 1),
                   "replicas": (_int, "10000", lambda v: v >= 1),
                   "burn_in": (_int, "200", lambda v: v >= 200),
                   "x0": (_floats, "", lambda v: True)},
    "spectrum": {"m": (_int, "512", lambda v: v >= 2),
                 "s_grid": (_floats, "0, 0.5, 1", lambda v: len(v) > 0 and all(
                     to.S_RANGE[0] <= s <= to.S_RANGE[1] for s in v))},
    "tilt": {"m": (_int, "512", lambda v: v >= 2),
             "s": (_float, "0.5", lambda v: to.S_RANGE[0] <= v <= to.S_RANGE[1]),
             "n": (_int, "20", lambda v: v >= 1),
             "drift_n": (_int, "200", lambda v: v >= 1),
             "replicas": (_int, "100000", lambda v: v >= 2),
             "x0": (_floats, "", lambda v: True)},
    "llt": {"n": (_ints, "250, 500, 1000", lambda v: len(v) > 0 and min(v) >= 1),
            "replicas": (_int, "100000", lambda v: v >= 1),
            "a1": (_float, "-1", lambda v: True),
            "a2": (_float, "1", lambda v: True),
            "lam": (_float, None, lambda v: True),
            "sigma": (_float, None, lambda v: v > 0),
            "f": (_floats, "", lambda v: True),
            "v": (_floats, "", lambda v: True)},
    "zeroone": {"replicas": (_int, "100000", lambda v: v >= 1),
                "burn_in": (_int, "500", lambda v: v >= 200),
                "y": (_floats, "", lambda v: True),
                "levels": (_floats, "", lambda v: all(t <= 0 for t in v)),
                "bands": (_floats, "", lambda v: all(h > 0 for h in v)),
                "eta_candidates": (_floats, "0.1, 0.11, 0.115", lambda v: len(v) > 0),
                "k_max": (_int, "10", lambda v: v >= 1),
                "gap": (_float, "0.005", lambda v: v > 0)},
    "example1": {"replicas": (_int, "100000", lambda v: v >= 1),
                 "burn_in": (_int, "500", lambda v: v >= 200),
                 "widths": (_floats, "0.1, 0.03, 0.01, 0.003, 0.001", lambda v: all(w > 0 for w in v))},
    "fourier": {"m": (_int, "64", lambda v: v >= 2),
                "ns": (_ints, "64, 128, 256, 512", lambda v: len(v) > 0 and min(v) >= 1),
                "l": (_float, "0", lambda v: True),
                "lam": (_float, None, lambda v: True),
                "sigma": (_float, None, lambda v: v > 0),
                "support": (_float, "1", lambda v: v > 0),
                "x_index": (_int, "0", lambda v: v >= 0)},
}

RUN_KEYS = {"experiment", "ensemble", "seed", "out", "workers"}


@dataclass
class ExperimentConfig:
    experiment: str
    ensemble_spec: str
    ensemble: object
    seed: int
    out: str
    workers: int
    params: dict
    echo: dict = field(default_factory=dict)


def load_ensemble(spec, base_dir):
    if spec.startswith("builtin:"):
        name = spec.split(":", 1)[1]
        if name not in BUILTIN:
            raise ConfigError(f"ensemble: unknown builtin {name!r} (have {sorted(BUILTIN)})")
        return BUILTIN[name]()
    path = spec if os.path.isabs(spec) else os.path.join(base_dir, spec)
    if not os.path.exists(path):
        raise ConfigError(f"ensemble: file {path!r} does not exist")
    try:
        return ens_mod.read_ensemble(path)
    except ProjwalkError as exc:
        raise ConfigError(f"ensemble: {path}: {exc}") from exc


def parse_config(path, seed=None, out=None, workers=None):
    if not os.path.exists(path):
        raise ConfigError(f"config file {path!r} does not exist")
    cp = configparser.ConfigParser(interpolation=None)
    try:
        cp.read(path, encoding="utf-8")
    except configparser.Error as exc:
        raise ConfigError(f"config syntax: {exc}") from exc
    if "run" not in cp:
        raise ConfigError("missing [run] section")
    run = cp["run"]
    for key in run:
        if key not in RUN_KEYS:
            raise ConfigError(f"run.{key}: unknown key")
    name = run.get("experiment")
    if name is None:
        raise ConfigError("run.experiment: missing")
    if name not in SCHEMA:
        raise ConfigError(f"run.experiment: unknown experiment {name!r} (have {sorted(SCHEMA)})")
    base = os.path.dirname(os.path.abspath(path))
    default_ens = "builtin:example1" if name == "example1" else None
    ens_spec = run.get("ensemble", default_ens)
    if ens_spec is None:
        raise ConfigError("run.ensemble: missing")
    try:
        seed_val = int(run.get("seed", "0")) if seed is None else int(seed)
        workers_val = int(run.get("workers", "1")) if workers is None else int(workers)
    except ValueError as exc:
        raise ConfigError(f"run.seed/run.workers: {exc}") from exc
    if workers_val < 1:
        raise ConfigError("run.workers: must be >= 1")
    out_dir = out or run.get("out", "results")
    if not os.path.isabs(out_dir) and out is None:
        out_dir = os.path.join(base, out_dir)

    section = cp[name] if name in cp else {}
    schema = SCHEMA[name]
    for key in section:
        if key not in schema:
            raise ConfigError(f"{name}.{key}: unknown key")
    params, echo = {}, {}
    for key, (parse, default, check) in schema.items():
        raw = section.get(key, default) if section else default
        if raw is None:
            raise ConfigError(f"{name}.{key}: required")
        try:
            val = parse(raw)
        except ValueError:
            raise ConfigError(f"{name}.{key}: cannot parse {raw!r}") from None
        if not check(val):
            raise ConfigError(f"{name}.{key}: value {raw!r} out of range")
        params[key] = val
        echo[key] = raw
    ensemble = load_ensemble(ens_spec, base)
    if name == "llt" and params["a1"] > params["a2"]:
        raise ConfigError("llt.a1: must not exceed llt.a2")
    for key in ("x0", "y", "f", "v"):
        if key in params and params[key] and len(params[key]) != ensemble.d:
            raise ConfigError(f"{name}.{key}: needs {ensemble.d} coordinates")
    if name in ("tilt", "fourier") and ensemble.d != 2:
        raise ConfigError(f"run.ensemble: the {name} experiment needs d = 2")
    echo_all = {"experiment": name, "ensemble": ens_spec, "seed": seed_val,
                "params": echo}
    return ExperimentConfig(name, ens_spec, ensemble, seed_val, out_dir, workers_val,
                            params, echo_all)


# ------------------------------------------------------------------- writers

def _cell(v):
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v)).lower()
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return fmt(v)
    return str(v)


def write_csv(path, header, rows):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_cell(v) for v in row])


def _jsonable(v):
    if isinstance(v, dict):
        return {str(k): _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple, np.ndarray)):
        return [_jsonable(x) for x in v]
    if isinstance(v, (bool, np.bool_)):
        return bool(v)
    if isinstance(v, (int, np.integer)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        v = float(v)
        return v if math.isfinite(v) else repr(v)
    return v


def write_json(path, obj):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(json.dumps(_jsonable(obj), sort_keys=True, indent=2) + "\n")


def _unit(v, d, default_index=0):
    if not v:
        e = np.zeros(d)
        e[default_index] = 1.0
        return e
    a = np.asarray(v, dtype=float)
    return a / np.linalg.norm(a)


# --------------------------------------------------------------- experiments

def exp_lyapunov(cfg, out):
    p = cfg.params
    pc = mc.PathConfig(n=p["n"], replicas=p["replicas"], burn_in=p["burn_in"],
                       seed=cfg.seed, x0=p["x0"] or None, workers=cfg.workers)
    lam = mc.estimate_lyapunov(cfg.ensemble, pc)
    var = mc.estimate_variance(cfg.ensemble, pc, lam.value)
    write_csv(os.path.join(out, "lyapunov.csv"),
              ["n", "replicas", "burn_in", "lambda", "lambda_half_width",
               "sigma2", "sigma2_half_width", "sigma2_near_zero"],
              [[p["n"], p["replicas"], p["burn_in"], lam.value, lam.half_width,
                var.value, var.half_width, var.near_zero]])
    return ["lyapunov.csv"]


def exp_stationary(cfg, out):
    p = cfg.params
    pc = mc.PathConfig(n=p["n"], replicas=p["replicas"], burn_in=p["burn_in"],
                       seed=cfg.seed, x0=p["x0"] or None, workers=cfg.workers)
    meas = mc.empirical_stationary(cfg.ensemble, pc)
    save_measure(meas, os.path.join(out, "measure.txt"))
    step = mc.one_step_distance(cfg.ensemble, meas, cfg.seed)
    write_json(os.path.join(out, "stationary.json"),
               {"points": meas.size, "one_step_bl": step,
                "one_step_tolerance": 2 / math.sqrt(meas.size)})
    return ["measure.txt", "stationary.json"]


def exp_spectrum(cfg, out):
    p = cfg.params
    grid = to.ProjGrid.angles(p["m"]) if cfg.ensemble.d == 2 else to.ProjGrid.cloud(cfg.ensemble.d, p["m"])
    rows = []
    for s in p["s_grid"]:
        pr = to.spectrum(cfg.ensemble, grid, s)
        du = to.dual_spectral(cfg.ensemble, grid, s)
        try:
            eig = to.eigenfunction_consistency(pr, du).residual
        except ProjwalkError as exc:
            eig = f"{type(exc).__name__}"
        rows.append([s, pr.kappa, du.kappa, abs(pr.kappa - du.kappa), pr.gap, du.gap,
                     pr.residual_r, pr.residual_nu, eig])
    write_csv(os.path.join(out, "spectrum.csv"),
              ["s", "kappa", "kappa_dual", "kappa_diff", "gap", "gap_dual",
               "residual_r", "residual_nu", "eigenfunction_residual"], rows)
    return ["spectrum.csv"]


def exp_tilt(cfg, out):
    p = cfg.params
    ens = cfg.ensemble
    grid = to.ProjGrid.angles(p["m"])
    s = p["s"]
    pr = to.spectrum(ens, grid, s)
    du = to.dual_spectral(ens, grid, s)
    _, dk, ratio = to.kappa_derivative(ens, grid, s)
    x0 = _unit(p["x0"], ens.d)
    wpath = to.tilted_sample(ens, pr, x0, p["n"], stream(cfg.seed, 21), p["replicas"])
    mw, hw = wpath.mean(np.ones(p["replicas"]))
    kap_hat = float(np.mean(np.exp(s * wpath.cocycle)) ** (1 / p["n"]))
    dpath = to.tilted_sample(ens, pr, x0, p["drift_n"], stream(cfg.seed, 22),
                             p["replicas"], mode="direct")
    drift, dhw = dpath.mean(dpath.cocycle / p["drift_n"])
    write_csv(os.path.join(out, "tilt.csv"),
              ["s", "n", "mean_weight", "weight_half_width", "kappa_grid", "kappa_hat",
               "drift_n", "drift", "drift_half_width", "kappa_log_derivative",
               "normalization_error"],
              [[s, p["n"], mw, hw, pr.kappa, kap_hat, p["drift_n"], drift, dhw, ratio,
                to.tilt_normalization(ens, du)]])
    return ["tilt.csv"]


def exp_llt(cfg, out):
    p = cfg.params
    d = cfg.ensemble.d
    res = mc.coefficient_llt_count(cfg.ensemble, _unit(p["f"], d), _unit(p["v"], d),
                                   p["a1"], p["a2"], p["n"], p["replicas"], p["lam"],
                                   p["sigma"], seed=cfg.seed, workers=cfg.workers)
    write_csv(os.path.join(out, "llt.csv"),
              ["n", "count", "replicas", "p_hat", "p_low", "p_high", "target", "ratio",
               "ratio_low", "ratio_high"],
              [[r.n, r.count, r.replicas, r.p_hat, r.p_ci[0], r.p_ci[1], r.target,
                r.ratio, r.ratio_ci[0], r.ratio_ci[1]] for r in res])
    return ["llt.csv"]


def _curve_rows(label, curve):
    return [[label, h, m, lo, hi] for h, m, lo, hi in curve.rows()]


def _verdict_block(curve):
    return {"atom": curve.atom, "atom_ci": list(curve.fit.atom_ci),
            "alpha": curve.alpha, "verdict": curve.verdict}


def exp_zeroone(cfg, out):
    p = cfg.params
    ens = cfg.ensemble
    pc = mc.PathConfig(n=1, replicas=p["replicas"], burn_in=p["burn_in"], seed=cfg.seed,
                       workers=cfg.workers)
    meas = mc.empirical_stationary(ens, pc)
    y = _unit(p["y"], ens.d)
    bands = np.array(p["bands"]) if p["bands"] else zo.default_bands()
    rows, verdicts, atoms = [], {}, []
    for t in p["levels"]:
        c = zo.level_set_mass(meas, zo.LevelSetQuery(y, t, bands))
        label = f"level {fmt(t)}"
        rows += _curve_rows(label, c)
        verdicts[label] = _verdict_block(c)
        atoms.append((t, c.atom))
    hp = zo.hyperplane_mass(meas, y, bands)
    rows += _curve_rows("hyperplane", hp.curve)
    verdicts["hyperplane"] = {**_verdict_block(hp.curve), "power_alpha": hp.alpha,
                              "a1_violation": hp.a1_violation}
    try:
        eta = zo.choose_offset(atoms, p["eta_candidates"], p["k_max"], p["gap"])
    except ProjwalkError as exc:
        eta = type(exc).__name__
    write_csv(os.path.join(out, "mass_curves.csv"), ["query", "h", "mass", "ci_low", "ci_high"], rows)
    write_json(os.path.join(out, "verdicts.json"), {"verdicts": verdicts, "eta": eta})
    return ["mass_curves.csv", "verdicts.json"]


def exp_example1(cfg, out):
    p = cfg.params
    ens = cfg.ensemble
    pc = mc.PathConfig(n=1, replicas=p["replicas"], burn_in=p["burn_in"], seed=cfg.seed,
                       workers=cfg.workers)
    meas = mc.empirical_stationary(ens, pc)
    e1 = _unit([], ens.d)
    dl = mc.delta(e1, meas.points)
    rows = [[w, meas.integrate(np.abs(dl - 1 / math.sqrt(2)) < w)] for w in p["widths"]]
    write_csv(os.path.join(out, "concentration.csv"), ["width", "mass"], rows)
    on = zo.level_set_mass(meas, zo.LevelSetQuery(e1, math.log(1 / math.sqrt(2))))
    off = zo.level_set_mass(meas, zo.LevelSetQuery(e1, math.log(0.3)))
    cone = zo.algebraic_mass(meas, zo.PolynomialSet.quadratic_form(ens.d, ens.signature or 1))
    write_json(os.path.join(out, "example1.json"),
               {"level_cone": _verdict_block(on), "level_0.3": _verdict_block(off),
                "quadratic_form": _verdict_block(cone), "points": meas.size})
    return ["concentration.csv", "example1.json"]


def exp_fourier(cfg, out):
    p = cfg.params
    grid = to.ProjGrid.angles(p["m"])
    phi = np.ones(grid.m)
    checks = to.llt_fourier_check(cfg.ensemble, grid, phi, lambda t: to.triangle(t, p["support"]),
                                  p["ns"], p["l"], p["lam"], p["sigma"], p["x_index"],
                                  support=p["support"])
    write_csv(os.path.join(out, "fourier.csv"),
              ["n", "value_re", "value_im", "target", "error", "nodes"],
              [[c.n, c.value.real, c.value.imag, c.target, c.error, c.nodes] for c in checks])
    summary = {}
    if len(checks) >= 2 and all(c.error > 0 for c in checks):
        const, expo = to.fit_power_law([c.n for c in checks], [c.error for c in checks])
        summary = {"constant": const, "exponent": expo}
    write_json(os.path.join(out, "fourier.json"), summary)
    return ["fourier.csv", "fourier.json"]


EXPERIMENTS = {"lyapunov": exp_lyapunov, "stationary": exp_stationary,
               "spectrum": exp_spectrum, "tilt": exp_tilt, "llt": exp_llt,
               "zeroone": exp_zeroone, "example1": exp_example1, "fourier": exp_fourier}


def _sha256(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def run(cfg):
    """Run one experiment; returns the manifest dict (also written to manifest.json)."""
    os.makedirs(cfg.out, exist_ok=True)
    t0 = time.perf_counter()
    try:
        files = EXPERIMENTS[cfg.experiment](cfg, cfg.out)
    except ProjwalkError as exc:
        raise ProjwalkError(f"stage {cfg.experiment}: {type(exc).__name__}: {exc}") from exc
    manifest = {"config": cfg.echo, "version": __version__, "seed": cfg.seed,
                "wall_clock_seconds": round(time.perf_counter() - t0, 3),
                "outputs": {f: _sha256(os.path.join(cfg.out, f)) for f in files}}
    write_json(os.path.join(cfg.out, "manifest.json"), manifest)
    return manifest


def main(argv=None):
    ap = argparse.ArgumentParser(prog="projwalk", description=__doc__.split("\n")[0])
    sub = ap.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="run one experiment")
    r.add_argument("--config", required=True)
    r.add_argument("--seed", type=int)
    r.add_argument("--out")
    r.add_argument("--workers", type=int)
    v = sub.add_parser("validate", help="check a config without running it")
    v.add_argument("--config", required=True)
    args = ap.parse_args(argv)
    try:
        if args.command == "validate":
            cfg = parse_config(args.config)
            print(f"ok: {cfg.experiment} on {cfg.ensemble_spec} "
                  f"(d={cfg.ensemble.d}, {cfg.ensemble.size} matrices)")
            return 0
        cfg = parse_config(args.config, args.seed, args.out, args.workers)
        manifest = run(cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except ProjwalkError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    for name, digest in manifest["outputs"].items():
        print(f"{os.path.join(cfg.out, name)}  sha256={digest[:16]}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
