"""Unified command line: ball, walk, profile, bound, check-domination,
prooflab, regularity, occupation, report, run.

Every command normalizes its arguments into a config dict, validates it
against the JSON schema, executes, and writes outputs plus a manifest.  Exit
codes: 0 success, 2 soft flags raised (extrapolation, vacuous checks,
uncontrolled tails), 1 error.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
import time
from fractions import Fraction

import numpy as np

try:
    import jsonschema
except ImportError:  # pragma: no cover
    jsonschema = None

from . import occupation as occ_mod
from . import prooflab, regularity, walks
from .ballio import cached_ball, load_ball, save_ball
from .bounds import MonotoneFunction, empirical_domination, small_ball_bound
from .errors import ConfigInvalidError, MissingInputError, WalklabError
from .groups import enumerate_ball, growth_table, parse_group
from .kernels import Kernel
from .manifest import RunManifest, fmt_float, write_csv, write_json
from .profiles import (
    EXACT,
    ProfileTable,
    cheeger_consistency,
    iso_lower_from_growth,
    profile_exact_small,
    profile_upper,
)

CONFIG_SCHEMA = {
    "type": "object",
    "required": ["experiment"],
    "properties": {
        "experiment": {
            "enum": [
                "ball",
                "walk",
                "profile",
                "bound",
                "check-domination",
                "prooflab",
                "regularity",
                "occupation",
            ]
        },
        "group": {"type": "string", "pattern": "^(z:[0-9]+|free:[0-9]+|lamplighter:[0-9]+:[0-9]+|heisenberg|grigorchuk)$"},
        "radius": {"type": "integer", "minimum": 0},
        "kernel": {"type": "object"},
        "steps": {"type": "array", "items": {"type": "integer", "minimum": 0}},
        "radii": {"type": "array", "items": {"type": "integer", "minimum": 0}},
        "mode": {"enum": ["exact", "mc"]},
        "samples": {"type": "integer", "minimum": 1},
        "seed": {"type": "integer", "minimum": 0},
        "workers": {"type": "integer", "minimum": 1},
        "exact_max": {"type": "integer", "minimum": 1, "maximum": 12},
        "grid": {"type": "string"},
        "strategy": {"enum": ["structured", "greedy", "anneal"]},
        "ball_path": {"type": "string"},
        "out": {"type": "string"},
        "phi": {"type": "string"},
        "lambda": {"type": "string"},
        "c": {"type": "string"},
        "check": {"enum": ["chi", "prop21", "wall"]},
        "size": {"type": "integer", "minimum": 2, "maximum": 16},
        "trials": {"type": "integer", "minimum": 1},
        "checks": {"type": "array", "items": {"enum": ["doubling", "slowvary", "tilde"]}},
        "input": {"type": "string"},
        "r_values": {"type": "array", "items": {"type": "integer", "minimum": 0}},
        "p_values": {"type": "array", "items": {"type": "number", "minimum": 1}},
        "horizon": {"type": "integer", "minimum": 1},
        "trajectories": {"type": "integer", "minimum": 1},
    },
}


def validate_config(config: dict) -> None:
    if jsonschema is None:  # pragma: no cover
        return
    validator = jsonschema.Draft7Validator(CONFIG_SCHEMA)
    errors = sorted(validator.iter_errors(config), key=lambda e: list(e.absolute_path))
    if errors:
        err = errors[0]
        pointer = "/" + "/".join(str(p) for p in err.absolute_path)
        raise ConfigInvalidError(f"CONFIG_INVALID at {pointer}: {err.message}", pointer=pointer)


def _parse_grid(spec: str) -> list[int]:
    """Grid syntax: 'log:A..B:COUNT' or 'lin:A..B:COUNT' or 'list:1,2,3'."""
    kind, _, rest = spec.partition(":")
    if kind == "list":
        return sorted({int(x) for x in rest.split(",")})
    rng, _, count = rest.partition(":")
    a, _, b = rng.partition("..")
    a, b, count = int(a), int(b), int(count)
    if kind == "log":
        vals = np.unique(np.round(np.logspace(math.log10(max(a, 1)), math.log10(b), count)).astype(int))
    elif kind == "lin":
        vals = np.unique(np.round(np.linspace(a, b, count)).astype(int))
    else:
        raise ConfigInvalidError(f"bad grid spec {spec!r}", pointer="/grid")
    return [int(v) for v in vals if v >= 1]


def _parse_function(spec: str, label: str) -> MonotoneFunction:
    """Function syntax: 'model:a,p,q' (a n^-p (log n)^-q) or 'table:file:KIND'."""
    kind, _, rest = spec.partition(":")
    if kind == "model":
        a, p, q = (float(x) for x in rest.split(","))
        return MonotoneFunction.power_log_model(a, p, q, label=label)
    if kind == "table":
        path, _, table_kind = rest.partition(":")
        with open(path) as fh:
            payload = json.load(fh)
        from .profiles import ProfilePoint

        pts = [
            ProfilePoint(int(p["n"]), float(p["value"]), p["kind"], p.get("witness"))
            for p in payload["points"]
        ]
        kinds = (table_kind,) if table_kind else (EXACT, "UPPER", "LOWER")
        return MonotoneFunction.from_profile_table(ProfileTable(pts), kinds=kinds, label=label)
    raise ConfigInvalidError(f"bad function spec {spec!r}", pointer=f"/{label}")


def _kernel_for(group, config) -> Kernel:
    return Kernel.from_json(group, config.get("kernel", {}))


def _get_ball(config, group, radius):
    path = config.get("ball_path")
    if path:
        return load_ball(path, group)
    return cached_ball(group, radius)


# ---------------------------------------------------------------------------
# experiment runners (return (soft_flags, output_paths))
# ---------------------------------------------------------------------------


def run_ball(config) -> tuple[list, list]:
    group = parse_group(config["group"])
    ball = enumerate_ball(group, config["radius"])
    out = config["out"]
    save_ball(ball, out)
    return [], [out]


def run_walk(config) -> tuple[list, list]:
    group = parse_group(config["group"])
    kernel = _kernel_for(group, config)
    mode = config.get("mode", "exact")
    steps = config["steps"]
    radii = config["radii"]
    rows = []
    flags = []
    if mode == "exact":
        R = config.get("radius", max(steps) + max(radii))
        ball = _get_ball(config, group, R)
        snapshots = {}
        p = np.zeros(ball.size)
        p[0] = 1.0
        leaked = 0.0
        want = sorted(set(steps))
        for k in range(max(want) + 1):
            if k in want:
                snapshots[k] = (p.copy(), leaked)
            if k < max(want):
                p, inc = walks.step(ball, kernel, p)
                leaked += inc
        for k in sorted(steps):
            pv, lk = snapshots[k]
            for r in sorted(radii):
                lo = float(pv[ball.radii <= r].sum())
                hi = min(1.0, lo + lk)
                rows.append([k, r, lo, hi, 0.5 * (lo + hi), lo, hi, lk])
    else:
        samples = config.get("samples", 10000)
        seed = config.get("seed", 0)
        workers = config.get("workers", 1)
        for k in sorted(steps):
            for r in sorted(radii):
                est, (ci_lo, ci_hi) = walks.monte_carlo_small_ball(
                    group, kernel, k, r, samples, seed, workers=workers
                )
                rows.append([k, r, "", "", est, ci_lo, ci_hi, 0.0])
    out = config["out"]
    write_csv(out, ["k", "r", "lo", "hi", "estimate", "ci_lo", "ci_hi", "leaked"], rows)
    return flags, [out]


def run_profile(config) -> tuple[list, list]:
    group = parse_group(config["group"])
    kernel = _kernel_for(group, config)
    radius = config.get("radius", 11)
    ball = _get_ball(config, group, radius)
    points = []
    flags = []
    exact_max = config.get("exact_max", 0)
    if exact_max:
        iso, gap = profile_exact_small(ball, kernel, exact_max)
        points.extend(("iso",) + (p.n, p.value, p.kind, p.witness) for p in iso.points)
        points.extend(("gap",) + (p.n, p.value, p.kind, p.witness) for p in gap.points)
    if config.get("grid"):
        grid = _parse_grid(config["grid"])
        iso_up, gap_up = profile_upper(
            ball, kernel, grid, strategy=config.get("strategy", "structured"),
            with_gap=True, seed=config.get("seed", 0),
        )
        points.extend(("iso",) + (p.n, p.value, p.kind, p.witness) for p in iso_up.points)
        points.extend(("gap",) + (p.n, p.value, p.kind, p.witness) for p in gap_up.points)
    payload = {
        "group": group.name,
        "kernel": kernel.to_json(),
        "points": [
            {
                "profile": prof,
                "n": n,
                "value": float(v),
                "kind": kind,
                "witness": list(w) if isinstance(w, tuple) else w,
            }
            for prof, n, v, kind, w in points
        ],
    }
    out = config["out"]
    write_json(out, payload)
    return flags, [out]


def run_bound(config) -> tuple[list, list]:
    iso_fn = _parse_function(config["phi"], "phi")
    spectral_fn = _parse_function(config["lambda"], "lambda")
    c = float(Fraction(config.get("c", "1/4")))
    rows = []
    flags = []
    for k in sorted(config["steps"]):
        for r in sorted(config["radii"]):
            rep = small_ball_bound(k, r, spectral_fn, iso_fn, c)
            rows.append([k, r, rep.max_level, rep.rhs, int(rep.extrapolated), int(rep.capped)])
            if rep.extrapolated:
                flags.append(f"extrapolated:k={k},r={r}")
    out = config["out"]
    write_csv(out, ["k", "r", "max_level", "rhs", "extrapolated", "capped"], rows)
    return flags, [out]


def run_check_domination(config) -> tuple[list, list]:
    group = parse_group(config["group"])
    kernel = _kernel_for(group, config)
    steps = config["steps"]
    radii = config["radii"]
    R = config.get("radius", max(steps))
    ball = _get_ball(config, group, R)
    measured = {}
    p = np.zeros(ball.size)
    p[0] = 1.0
    leaked = 0.0
    want = sorted(set(steps))
    for k in range(max(want) + 1):
        if k in want:
            for r in sorted(radii):
                lo = float(p[ball.radii <= r].sum())
                measured[(k, r)] = min(1.0, lo + leaked)
        if k < max(want):
            p, inc = walks.step(ball, kernel, p)
            leaked += inc
    iso_fn = _parse_function(config["phi"], "phi")
    spectral_fn = _parse_function(config["lambda"], "lambda")
    c = float(Fraction(config.get("c", "1/4")))
    report = empirical_domination(measured, spectral_fn, iso_fn, c)
    out = config["out"]
    write_json(out, report)
    flags = [] if not report["violations"] else ["violations"]
    return flags, [out]


def run_prooflab(config) -> tuple[list, list]:
    check = config.get("check", "prop21")
    seed = config.get("seed", 0)
    size = config.get("size", 12)
    trials = config.get("trials", 50)
    rng = np.random.default_rng(seed)
    flags = []
    results = []
    if check == "chi":
        for t in range(trials):
            chain = prooflab.FiniteChain.random_metropolis(size, rng)
            chi = prooflab.indicator_decay_time(chain, 2, 1)
            oracle = prooflab.indicator_decay_time_oracle(chain, 2, 1)
            results.append({"trial": t, "chi": chi, "oracle": oracle, "agree": chi == oracle})
    elif check == "prop21":
        for t in range(trials):
            chain = prooflab.FiniteChain.random_metropolis(size, rng)
            rep = prooflab.decay_time_spectral_bound_check(chain, 1, 1)
            results.append({"trial": t, **rep})
            if rep["status"] == "VACUOUS":
                flags.append(f"vacuous:{t}")
    else:  # wall
        group = parse_group(config.get("group", "z:1"))
        kernel = _kernel_for(group, config)
        ball = enumerate_ball(group, config.get("radius", 24))
        m = config.get("wall_width", 4)
        members = tuple(range(m))
        ctx = prooflab.WallMetricContext(ball, members)
        results.append(prooflab.wall_normalization_check(ctx, kernel))
        results.append(prooflab.first_moment_identity_check(ctx, kernel, config.get("k", 4)))
    out = config["out"]
    write_json(out, {"check": check, "results": results})
    return flags, [out]


def run_regularity(config) -> tuple[list, list]:
    with open(config["input"]) as fh:
        payload = json.load(fh)
    from .profiles import ProfilePoint

    pts = [
        ProfilePoint(int(p["n"]), float(p["value"]), p["kind"], p.get("witness"))
        for p in payload["points"]
        if p.get("profile", "iso") == config.get("profile", "iso")
    ]
    fn = MonotoneFunction.from_profile_table(ProfileTable(pts))
    checks = config.get("checks", ["doubling", "slowvary"])
    report = {}
    flags = []
    n_hi = max(4, int(math.log2(fn.certified[1])) // 2)
    if "doubling" in checks:
        report["doubling"] = regularity.doubling_diagnostic(fn, (1, n_hi))
    if "slowvary" in checks:
        t_grid = [2.0**j for j in range(2, int(math.log2(fn.certified[1])))]
        report["slowvary"] = regularity.slowly_varying_diagnostic(fn, t_grid)
    if "tilde" in checks:
        try:
            rep = regularity.tilde_interpolate(fn, (1, n_hi))
            report["tilde"] = {
                "variants": {k: v["pass"] for k, v in rep["variants"].items()},
                "doubling_ratio": rep["doubling_ratio"],
            }
        except WalklabError as exc:
            report["tilde"] = {"error": str(exc)}
            flags.append("tilde:not-doubling")
    out = config["out"]
    write_json(out, report)
    return flags, [out]


def run_occupation(config) -> tuple[list, list]:
    group_name = config["group"]
    d = int(group_name.split(":")[1])
    r_values = config.get("r_values", [2, 4, 8, 16])
    p_values = config.get("p_values", [1.0])
    horizon = config.get("horizon", 1 << 13)
    rows = []
    flags = []
    for p in p_values:
        results = occ_mod.occupation_moment_mc_zd(
            d, r_values, p, horizon,
            trajectories=config.get("trajectories", 20000),
            seed=config.get("seed", 0),
            workers=config.get("workers", 1),
        )
        fit = occ_mod.occupation_exponent_fit(results)
        for r in sorted(results):
            res = results[r]
            rows.append([group_name, p, r, res.partial, res.partial_err, res.tail, res.total, res.tail_kind])
            if res.tail_kind != "MODEL":
                flags.append(f"uncontrolled-tail:r={r}")
        rows.append([group_name, p, "fit", fit["beta_hat"], "", "", "", "beta"])
    out = config["out"]
    write_csv(out, ["group", "p", "r", "partial", "err", "tail", "total", "kind"], rows)
    return flags, [out]


def run_report(config) -> tuple[list, list]:
    """Aggregate profile JSONs and CSVs in a directory into tidy series files."""
    indir = config["input"]
    series = []
    found = False
    for name in sorted(os.listdir(indir)):
        path = os.path.join(indir, name)
        if name.endswith(".json"):
            try:
                with open(path) as fh:
                    payload = json.load(fh)
            except json.JSONDecodeError:
                continue
            if isinstance(payload, dict) and "points" in payload:
                found = True
                for p in payload["points"]:
                    series.append(
                        [name, p.get("profile", "iso"), p["n"], p["value"], p["kind"]]
                    )
        elif name.endswith(".csv"):
            found = True
            with open(path) as fh:
                header = fh.readline().strip().split(",")
                for line in fh:
                    vals = line.strip().split(",")
                    row = dict(zip(header, vals))
                    if "rhs" in row:
                        series.append([name, "bound-rhs", row["k"], row["rhs"], f"r={row['r']}"])
                    elif "estimate" in row:
                        y = row["hi"] or row["estimate"]
                        series.append([name, "small-ball", row["k"], y, f"r={row['r']}"])
    if not found:
        raise MissingInputError(f"no profile JSONs or CSVs under {indir}")
    out = config["out"]
    write_csv(out, ["source", "series", "x", "y", "kind"], series)
    return [], [out]


RUNNERS = {
    "ball": run_ball,
    "walk": run_walk,
    "profile": run_profile,
    "bound": run_bound,
    "check-domination": run_check_domination,
    "prooflab": run_prooflab,
    "regularity": run_regularity,
    "occupation": run_occupation,
}


def run_config(config: dict, command: str | None = None) -> int:
    """Validate and execute a config; write outputs plus manifest; exit code."""
    t0 = time.time()
    experiment = config.get("experiment")
    if experiment != "report":
        validate_config(config)
    runner = RUNNERS.get(experiment, run_report if experiment == "report" else None)
    if runner is None:
        raise ConfigInvalidError(f"unknown experiment {experiment!r}", pointer="/experiment")
    flags, outputs = runner(config)
    manifest = RunManifest(command=command or experiment, config=config, seeds=[config.get("seed", 0)])
    for key in ("ball_path", "input"):
        path = config.get(key)
        if path and os.path.isfile(path):
            from .manifest import sha256_file

            manifest.input_hashes[path] = sha256_file(path)
    manifest.flags = flags
    manifest.finish(t0, outputs)
    manifest.write(config["out"] + ".manifest.json")
    return 2 if flags else 0


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------


def _add_common(sp):
    sp.add_argument("--out", required=True)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--workers", type=int, default=1)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="walklab")
    sub = ap.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("ball", help="enumerate and save a Cayley ball")
    sp.add_argument("--group", required=True)
    sp.add_argument("--radius", type=int, required=True)
    sp.add_argument("--out", required=True)

    sp = sub.add_parser("walk", help="small-ball probabilities, exact or MC")
    sp.add_argument("--group", required=True)
    sp.add_argument("--ball", dest="ball_path")
    sp.add_argument("--weights", help="kernel JSON file")
    sp.add_argument("--steps", required=True, help="comma list of k")
    sp.add_argument("--radius", dest="radii", required=True, help="comma list of r")
    sp.add_argument("--mode", choices=["exact", "mc"], default="exact")
    sp.add_argument("--samples", type=int, default=10000)
    _add_common(sp)

    sp = sub.add_parser("profile", help="profile points on a ball")
    sp.add_argument("--group", required=True)
    sp.add_argument("--ball", dest="ball_path")
    sp.add_argument("--weights")
    sp.add_argument("--radius", type=int, default=11)
    sp.add_argument("--exact-max", dest="exact_max", type=int, default=0)
    sp.add_argument("--grid", default="")
    sp.add_argument("--strategy", choices=["structured", "greedy", "anneal"], default="structured")
    _add_common(sp)

    sp = sub.add_parser("bound", help="evaluate the displacement bound")
    sp.add_argument("--phi", required=True)
    sp.add_argument("--lambda", dest="lambda_", required=True)
    sp.add_argument("--c", default="1/4")
    sp.add_argument("--k", dest="steps", required=True)
    sp.add_argument("--r", dest="radii", required=True)
    sp.add_argument("--out", required=True)

    sp = sub.add_parser("check-domination", help="measured intervals vs bound")
    sp.add_argument("--group", required=True)
    sp.add_argument("--weights")
    sp.add_argument("--phi", required=True)
    sp.add_argument("--lambda", dest="lambda_", required=True)
    sp.add_argument("--c", default="1/4")
    sp.add_argument("--k", dest="steps", required=True)
    sp.add_argument("--r", dest="radii", required=True)
    sp.add_argument("--radius", type=int)
    sp.add_argument("--out", required=True)

    sp = sub.add_parser("prooflab", help="finite-chain and wall-metric checks")
    sp.add_argument("check", choices=["chi", "prop21", "wall"])
    sp.add_argument("--size", type=int, default=12)
    sp.add_argument("--trials", type=int, default=50)
    sp.add_argument("--group", default="z:1")
    sp.add_argument("--radius", type=int, default=24)
    _add_common(sp)

    sp = sub.add_parser("regularity", help="diagnostics on a profile JSON")
    sp.add_argument("--input", required=True)
    sp.add_argument("--checks", default="doubling,slowvary,tilde")
    sp.add_argument("--profile", choices=["iso", "gap"], default="iso")
    sp.add_argument("--out", required=True)

    sp = sub.add_parser("occupation", help="occupation moments on Z^d")
    sp.add_argument("--group", required=True)
    sp.add_argument("--r", dest="r_values", default="2,4,8,16")
    sp.add_argument("--p", dest="p_values", default="1")
    sp.add_argument("--horizon", type=int, default=1 << 13)
    sp.add_argument("--trajectories", type=int, default=20000)
    _add_common(sp)

    sp = sub.add_parser("report", help="aggregate outputs into plot series")
    sp.add_argument("--input", required=True)
    sp.add_argument("--out", required=True)

    sp = sub.add_parser("run", help="run a JSON config file")
    sp.add_argument("config")
    return ap


def _csv_ints(text: str) -> list[int]:
    return [int(x) for x in text.split(",") if x]


def args_to_config(args) -> dict:
    cmd = args.command
    config: dict = {"experiment": cmd}
    if cmd == "run":
        with open(args.config) as fh:
            config = json.load(fh)
        return config
    for key in ("group", "radius", "out", "seed", "workers", "mode", "samples",
                "exact_max", "grid", "strategy", "ball_path", "size", "trials",
                "horizon", "trajectories", "input", "check", "profile"):
        if hasattr(args, key) and getattr(args, key) not in (None, ""):
            config[key] = getattr(args, key)
    if getattr(args, "weights", None):
        with open(args.weights) as fh:
            config["kernel"] = json.load(fh)
    if hasattr(args, "steps") and isinstance(getattr(args, "steps"), str):
        config["steps"] = _csv_ints(args.steps)
    if hasattr(args, "radii") and isinstance(getattr(args, "radii"), str):
        config["radii"] = _csv_ints(args.radii)
    if hasattr(args, "lambda_"):
        config["lambda"] = args.lambda_
        config["phi"] = args.phi
        config["c"] = args.c
    if cmd == "prooflab":
        config["check"] = args.check
    if cmd == "regularity":
        config["checks"] = [c for c in args.checks.split(",") if c]
    if cmd == "occupation":
        config["r_values"] = _csv_ints(args.r_values)
        config["p_values"] = [float(x) for x in args.p_values.split(",")]
    return config


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    try:
        config = args_to_config(args)
        return run_config(config, command=args.command)
    except ConfigInvalidError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except WalklabError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
