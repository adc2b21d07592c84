"""Command-line driver.

Exit codes: 0 success, 1 unreadable or invalid input, 2 reference point not
stationary, 3 MFCQ fails at the reference point.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import sys
import warnings
from pathlib import Path

import numpy as np

from . import __version__
from .errors import MFCQError, NotStationaryError, StabcertError
from .model import instance_from_dict, instance_from_vector, load_json, snapshot_from_dict
from .oracle import stationary_set
from .report import analyze, analyze_snapshot, dumps
from .tolerances import default_policy
from .verify import SCHEMES, SamplingConfig, records_to_csv, verify_lipschitz_like, verify_robinson

log = logging.getLogger("stabcert")

EXIT_OK, EXIT_INPUT, EXIT_NOT_STATIONARY, EXIT_MFCQ = 0, 1, 2, 3
COMMANDS = ("analyze", "verify-robinson", "verify-lipschitz", "sweep")


class InputError(Exception):
    pass


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="stabcert",
        description="Stability certificates for stationary points of one-constraint QPs.",
    )
    p.add_argument("--input", required=True, help="instance JSON with D, c, A, b, alpha and x_bar")
    p.add_argument("--command", choices=COMMANDS, default="analyze")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--samples", type=int, default=200)
    p.add_argument("--radius-x", type=float, default=1e-2)
    p.add_argument("--radius-w", type=float, default=1e-2)
    p.add_argument("--gamma-cap", type=float, default=None,
                   help="residual filter for verify-robinson (default 0.1 (1 + |grad f0|))")
    p.add_argument("--scheme", choices=SCHEMES, default="full")
    p.add_argument("--tol", type=float, default=None, help="base tolerance (env STABCERT_TOL)")
    p.add_argument("--rank-rtol", type=float, default=None, help="override the SVD rank threshold")
    p.add_argument("--out", default=None, help="write the JSON report here instead of stdout")
    p.add_argument("--csv", default=None, help="write per-sample or per-step CSV here")
    p.add_argument("--ray", default="c:0",
                   help="sweep direction: 'c:i', 'b:i', 'alpha' or d comma-separated numbers")
    p.add_argument("--steps", type=int, default=11)
    p.add_argument("--t-max", type=float, default=0.1)
    p.add_argument("--near", type=float, default=0.5,
                   help="sweep keeps stationary points within this distance of x_bar")
    p.add_argument("-v", "--verbose", action="store_true")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    return p


def _policy(args):
    from dataclasses import replace

    policy = default_policy()
    if args.tol is not None:
        policy = policy.with_tol(args.tol)
    if args.rank_rtol is not None:
        policy = replace(policy, rank_rtol=args.rank_rtol)
    return policy


def _load(path):
    try:
        data = load_json(path)
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}: invalid JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}")
    except OSError as exc:
        raise InputError(f"{path}: {exc.strerror or exc}")
    if not isinstance(data, dict):
        raise InputError(f"{path}: top-level JSON value must be an object")
    return data


def _emit(text: str, path):
    if path:
        Path(path).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _ray_vector(spec: str, n: int) -> np.ndarray:
    d = 2 * n * n + 2 * n + 1
    ray = np.zeros(d)
    spec = spec.strip()
    offsets = {"c": n * n, "b": 2 * n * n + n}
    if spec == "alpha":
        ray[-1] = 1.0
        return ray
    if ":" in spec:
        block, _, idx = spec.partition(":")
        if block not in offsets or not idx.isdigit() or int(idx) >= n:
            raise InputError(f"bad ray {spec!r}")
        ray[offsets[block] + int(idx)] = 1.0
        return ray
    try:
        vals = [float(v) for v in spec.split(",")]
    except ValueError:
        raise InputError(f"bad ray {spec!r}")
    if len(vals) != d:
        raise InputError(f"ray has {len(vals)} entries, expected {d}")
    return np.asarray(vals)


def cmd_analyze(args, policy) -> int:
    data = _load(args.input)
    if "snapshot" in data:
        report = analyze_snapshot(snapshot_from_dict(data["snapshot"]), policy,
                                  data.get("alpha"))
    else:
        instance, x_bar = instance_from_dict(data)
        if x_bar is None:
            raise InputError("instance file has no x_bar")
        report = analyze(instance, x_bar, policy)
    _emit(dumps(report), args.out)
    return EXIT_OK


def cmd_verify(args, policy) -> int:
    data = _load(args.input)
    instance, x_bar = instance_from_dict(data)
    if x_bar is None:
        raise InputError("instance file has no x_bar")
    try:
        config = SamplingConfig(radius_x=args.radius_x, radius_w=args.radius_w,
                                samples=args.samples, gamma_cap=args.gamma_cap,
                                seed=args.seed, scheme=args.scheme)
    except ValueError as exc:
        raise InputError(str(exc))
    best_effort = not stationary_set(instance, policy).complete
    if best_effort:
        warnings.warn("no exact oracle for this instance; results are best-effort")
    run = verify_robinson if args.command == "verify-robinson" else verify_lipschitz_like
    est = run(instance, x_bar, config, policy)
    summary = {"command": args.command, "best_effort": best_effort, **est.summary()}
    if args.csv:
        Path(args.csv).write_text(records_to_csv(est.records), encoding="utf-8")
    _emit(dumps(summary), args.out)
    return EXIT_OK


def _fmt(v) -> str:
    return format(float(v), ".17g")


def cmd_sweep(args, policy) -> int:
    data = _load(args.input)
    instance, x_bar = instance_from_dict(data)
    if x_bar is None:
        raise InputError("instance file has no x_bar")
    if args.steps < 1:
        raise InputError("steps must be at least 1")
    ray = _ray_vector(args.ray, instance.n)
    ts = np.linspace(0.0, args.t_max, args.steps) if args.steps > 1 else np.zeros(1)
    w0 = instance.to_vector()
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["t", "point", "x", "lambda", "case", "distance_to_x_bar",
                     "lipschitz_like", "robinson_stable", "strong_regular", "note"])
    for t in ts:
        inst_t = instance_from_vector(w0 + t * ray, instance.n)
        sset = stationary_set(inst_t, policy)
        pts = [p.x for p in sset.points]
        for fam in sset.families:
            if hasattr(fam, "K"):
                theta = np.linalg.lstsq(fam.K, x_bar - fam.center, rcond=None)[0]
                if np.linalg.norm(theta) > 0:
                    pts.append(fam.point(theta))
        near = sorted((p for p in pts if np.linalg.norm(p - x_bar) <= args.near),
                      key=lambda p: np.linalg.norm(p - x_bar))
        for k, x in enumerate(near):
            row = [_fmt(t), k, ";".join(_fmt(v) for v in x)]
            try:
                rep = analyze(inst_t, x, policy)
                v = rep["verdicts"]
                row += [_fmt(rep["lambda"]), rep["case"], _fmt(np.linalg.norm(x - x_bar)),
                        v["lipschitz_like"], v["robinson_stable"], v["strong_regular"], ""]
            except StabcertError as exc:
                row += ["", "", _fmt(np.linalg.norm(x - x_bar)), "", "", "", type(exc).__name__]
            writer.writerow(row)
        if not near:
            writer.writerow([_fmt(t), "", "", "", "", "", "", "", "", "no stationary point nearby"])
    text = buf.getvalue()
    if args.csv:
        Path(args.csv).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return EXIT_OK


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        policy = _policy(args)
        if args.command == "analyze":
            return cmd_analyze(args, policy)
        if args.command == "sweep":
            return cmd_sweep(args, policy)
        return cmd_verify(args, policy)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except NotStationaryError as exc:
        residual = exc.residual
        print(f"error: {exc} (residual {residual})", file=sys.stderr)
        _emit(dumps({"error": "not_stationary", "residual": residual}), args.out)
        return EXIT_NOT_STATIONARY
    except MFCQError as exc:
        print(f"error: {exc}", file=sys.stderr)
        _emit(dumps({"error": "mfcq_violated"}), args.out)
        return EXIT_MFCQ
    except (StabcertError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
