"""Command-line front end.

Every command renders its output to text, hashes it and writes a run
manifest next to it.  ``--verify-manifest`` replays the recorded arguments
and compares the digest.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import math
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .bounds import (
    DEFAULT_SAMPLES,
    DEFAULT_SHARDS,
    Method,
    capacity_and_dispersion,
    max_rate,
    min_blocklength,
    ml_na_epsilon,
    ml_rcu_samples,
    na_converse_rate,
    orb_na_epsilon,
    orb_rcu,
    orb_rcu_samples,
)
from .channel import BpskAwgnChannel, reliability_model
from .codes import LinearCode, simulate_ensemble_fer, simulate_linear_code
from .errors import OrbfblError
from .numerics import LN2, QUAD_EPSABS, QUAD_EPSREL, QUAD_LIMIT

SCHEMA_VERSION = 1
NA_METHODS = (Method.ORB_NA, Method.ML_NA)
MC_EPS_FLOOR = 1e-4


def _floats(text: str) -> list[float]:
    """Comma list or ``start:stop:step`` range (stop inclusive)."""
    text = text.strip()
    if text.count(":") == 2:
        start, stop, step = (float(v) for v in text.split(":"))
        if step <= 0:
            raise argparse.ArgumentTypeError("range step must be positive")
        count = int(math.floor((stop - start) / step + 1e-9)) + 1
        return [round(start + k * step, 12) for k in range(count)]
    try:
        return [float(v) for v in text.split(",") if v]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from exc


def _ints(text: str) -> list[int]:
    return [int(v) for v in _floats(text)]


def _methods(text: str) -> list[Method]:
    try:
        return [Method(v.strip().upper()) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        choices = ", ".join(m.value for m in Method)
        raise argparse.ArgumentTypeError(f"unknown method ({choices})") from exc


def _csv(header: list[str], rows: list[dict]) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=["schema_version", *header], lineterminator="\n",
                            extrasaction="raise")
    writer.writeheader()
    for row in rows:
        writer.writerow({"schema_version": SCHEMA_VERSION, **{k: _fmt(row.get(k)) for k in header}})
    return buf.getvalue()


def _fmt(value):
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return value


def _json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


# -- commands ---------------------------------------------------------------


def cmd_iorb(args) -> str:
    header = ["snr_db", "mu", "theta_mu", "sigma_sq", "i_orb_nats", "i_orb_bits", "v_orb",
              "capacity_nats", "capacity_bits", "dispersion", "error"]
    rows = []
    for snr in args.snr_db:
        ch = BpskAwgnChannel(snr)
        row = {"snr_db": snr}
        try:
            model = reliability_model(ch)
            c, v = capacity_and_dispersion(ch)
            row.update(mu=model.mu, theta_mu=model.theta_mu, sigma_sq=model.sigma_sq,
                       i_orb_nats=model.i_orb, i_orb_bits=model.i_orb / LN2, v_orb=model.v_orb,
                       capacity_nats=c, capacity_bits=c / LN2, dispersion=v)
        except (OrbfblError, ValueError, ArithmeticError) as exc:
            row["error"] = f"{type(exc).__name__}: {exc}"
        rows.append(row)
    return _csv(header, rows)


def _rate_nats(rate: float, unit: str) -> float:
    return rate * LN2 if unit == "bits" else rate


def cmd_pe_curve(args) -> str:
    header = ["n", "rate_nats", "rate_bits", "M", "method", "epsilon", "ci", "resolved", "error"]
    ch = BpskAwgnChannel(args.snr_db)
    rows = []
    for method in args.methods:
        draws = None
        if method in (Method.ORB_RCU_MC, Method.ML_RCU_RELAX_MC):
            try:
                sampler = orb_rcu_samples if method is Method.ORB_RCU_MC else ml_rcu_samples
                draws = sampler(ch, args.n, args.samples, args.seed, args.shards)
            except (OrbfblError, ValueError) as exc:
                for rate in args.rates:
                    r = _rate_nats(rate, args.rate_unit)
                    rows.append({"n": args.n, "rate_nats": r, "rate_bits": r / LN2, "method": method.value,
                                 "error": f"{type(exc).__name__}: {exc}"})
                continue
        for rate in args.rates:
            r = _rate_nats(rate, args.rate_unit)
            log_m = math.log(math.ceil(math.exp(r * args.n))) if r * args.n < 700 else r * args.n
            row = {"n": args.n, "rate_nats": r, "rate_bits": r / LN2, "method": method.value,
                   "M": int(round(math.exp(log_m))) if log_m < 43 else None}
            try:
                if method is Method.ORB_NA:
                    row.update(epsilon=orb_na_epsilon(ch, args.n, log_m=log_m), ci=0.0, resolved=True)
                elif method is Method.ML_NA:
                    row.update(epsilon=ml_na_epsilon(ch, args.n, log_m=log_m), ci=0.0, resolved=True)
                elif draws is not None:
                    est = draws.estimate(log_m=log_m)
                    row.update(epsilon=est.value, ci=est.half_width, resolved=est.resolved)
                else:
                    raise ValueError(f"{method.value} has no error-probability form")
            except (OrbfblError, ValueError) as exc:
                row["error"] = f"{type(exc).__name__}: {exc}"
            rows.append(row)
    return _csv(header, rows)


def cmd_rate_curve(args) -> str:
    header = ["n", "method", "rate_nats", "rate_bits", "epsilon", "error"]
    ch = BpskAwgnChannel(args.snr_db)
    rows = []
    for method in args.methods:
        for n in args.n:
            row = {"n": n, "method": method.value, "epsilon": args.epsilon}
            try:
                if method is Method.NA_CONVERSE:
                    rate = na_converse_rate(ch, n, args.epsilon)
                else:
                    rate = max_rate(ch, n, args.epsilon, method, samples=args.samples,
                                    seed=args.seed, shards=args.shards).rate
                row.update(rate_nats=rate, rate_bits=rate / LN2)
            except (OrbfblError, ValueError) as exc:
                row["error"] = f"{type(exc).__name__}: {exc}"
            rows.append(row)
    return _csv(header, rows)


def cmd_min_n(args) -> str:
    header = ["snr_db", "epsilon", "rate_frac", "method", "n", "rate_nats", "rate_bits", "note", "error"]
    rows = []
    for snr in args.snr_db:
        ch = BpskAwgnChannel(snr)
        c, _ = capacity_and_dispersion(ch)
        for eps in args.epsilon:
            for frac in args.rate_frac:
                for method in args.methods:
                    row = {"snr_db": snr, "epsilon": eps, "rate_frac": frac, "method": method.value,
                           "rate_nats": frac * c, "rate_bits": frac * c / LN2}
                    if method.is_mc and eps < MC_EPS_FLOOR:
                        row["note"] = "statistically unresolved"
                    try:
                        row["n"] = min_blocklength(ch, frac, eps, method, samples=args.samples,
                                                   seed=args.seed, shards=args.shards)
                    except (OrbfblError, ValueError) as exc:
                        row["error"] = f"{type(exc).__name__}: {exc}"
                    rows.append(row)
    return _csv(header, rows)


def cmd_simulate(args) -> str:
    ch = BpskAwgnChannel(args.snr_db)
    if args.k is not None:
        code = LinearCode.random_systematic(args.n, args.k, np.random.default_rng(args.seed))
        run = simulate_linear_code(ch, code, args.frames, args.max_queries, args.seed)
        return _json(run.to_json())
    codebooks = args.codebooks
    per = max(1, args.frames // codebooks)
    res = simulate_ensemble_fer(ch, args.n, args.m, codebooks, per, args.seed, with_ml=args.with_ml)
    bound = orb_rcu(ch, args.n, args.m, samples=args.samples, seed=args.seed, shards=args.shards)
    margin = 3.0 * math.hypot(res.std_error, bound.std_error)
    report = res.to_json()
    report.update(orb_rcu=bound.value, orb_rcu_std_error=bound.std_error, margin=margin,
                  bound_check="pass" if res.fer <= bound.value + margin else "fail")
    return _json(report)


COMMANDS = {
    "iorb": cmd_iorb,
    "pe-curve": cmd_pe_curve,
    "rate-curve": cmd_rate_curve,
    "min-n": cmd_min_n,
    "simulate": cmd_simulate,
}


def _add_mc(p, default_methods):
    p.add_argument("--methods", type=_methods, default=list(default_methods),
                   help="comma list of " + ", ".join(m.value for m in Method))
    p.add_argument("--samples", type=int, default=DEFAULT_SAMPLES)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--shards", type=int, default=DEFAULT_SHARDS)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="orbfbl", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"orbfbl {__version__}")
    parser.add_argument("--verify-manifest", metavar="FILE",
                        help="replay a run manifest and compare output digests")
    sub = parser.add_subparsers(dest="command")

    def common(p):
        p.add_argument("--out", help="output file (default stdout)")
        p.add_argument("--manifest", help="manifest path (default <out>.manifest.json, or stderr)")

    p = sub.add_parser("iorb", help="I_ORB, V_ORB, C, V per SNR")
    p.add_argument("--snr-db", type=_floats, default=_floats("-6:12:0.5"))
    common(p)

    p = sub.add_parser("pe-curve", help="error probability versus rate")
    p.add_argument("--snr-db", type=float, default=0.0)
    p.add_argument("--n", type=int, default=128)
    p.add_argument("--rates", type=_floats, required=True)
    p.add_argument("--rate-unit", choices=("nats", "bits"), default="nats")
    _add_mc(p, (Method.ORB_NA, Method.ML_NA))
    common(p)

    p = sub.add_parser("rate-curve", help="maximal rate versus blocklength")
    p.add_argument("--snr-db", type=float, default=0.0)
    p.add_argument("--epsilon", type=float, default=1e-3)
    p.add_argument("--n", type=_ints, required=True)
    _add_mc(p, (Method.ORB_NA, Method.ML_NA, Method.NA_CONVERSE))
    common(p)

    p = sub.add_parser("min-n", help="minimal blocklength table")
    p.add_argument("--snr-db", type=_floats, default=[0.0, 3.0])
    p.add_argument("--epsilon", type=_floats, default=[1e-3, 1e-6])
    p.add_argument("--rate-frac", type=_floats, default=[0.8, 0.9])
    _add_mc(p, NA_METHODS)
    common(p)

    p = sub.add_parser("simulate", help="decoder simulation against the ORB-RCU bound")
    p.add_argument("--snr-db", type=float, default=0.0)
    p.add_argument("--n", type=int, default=12)
    size = p.add_mutually_exclusive_group()
    size.add_argument("--m", type=int, default=64, help="ensemble codebook size")
    size.add_argument("--k", type=int, help="linear code dimension (decoder walk)")
    p.add_argument("--frames", type=int, default=100_000)
    p.add_argument("--codebooks", type=int, default=100)
    p.add_argument("--max-queries", type=int)
    p.add_argument("--with-ml", action="store_true")
    p.add_argument("--samples", type=int, default=200_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--shards", type=int, default=DEFAULT_SHARDS)
    common(p)
    return parser


def _manifest(argv, args, text, wall) -> dict:
    return {
        "argv": list(argv),
        "command": args.command,
        "seed": getattr(args, "seed", None),
        "samples": getattr(args, "samples", None),
        "shards": getattr(args, "shards", None),
        "quadrature": {"epsabs": QUAD_EPSABS, "epsrel": QUAD_EPSREL, "limit": QUAD_LIMIT},
        "schema_version": SCHEMA_VERSION,
        "version": __version__,
        "wall_time_s": wall,
        "output_sha256": hashlib.sha256(text.encode("utf-8")).hexdigest(),
    }


def run(argv) -> tuple[argparse.Namespace, str, float]:
    """Parse ``argv`` and return (args, rendered output, wall seconds)."""
    args = build_parser().parse_args(argv)
    if args.command is None:
        raise SystemExit("a command is required")
    t0 = time.perf_counter()
    text = COMMANDS[args.command](args)
    return args, text, time.perf_counter() - t0


def verify_manifest(path) -> bool:
    manifest = json.loads(Path(path).read_text(encoding="utf-8"))
    _, text, _ = run(manifest["argv"])
    return hashlib.sha256(text.encode("utf-8")).hexdigest() == manifest["output_sha256"]


def _strip_io(argv: list[str]) -> list[str]:
    out, skip = [], False
    for tok in argv:
        if skip:
            skip = False
            continue
        if tok in ("--out", "--manifest"):
            skip = True
            continue
        if tok.startswith(("--out=", "--manifest=")):
            continue
        out.append(tok)
    return out


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    if argv and argv[0].startswith("--verify-manifest"):
        args = build_parser().parse_args(argv)
        ok = verify_manifest(args.verify_manifest)
        print("manifest verified: digests match" if ok else "manifest mismatch: digests differ")
        return 0 if ok else 1
    args, text, wall = run(argv)
    manifest = _manifest(_strip_io(argv), args, text, wall)
    if args.out:
        Path(args.out).write_bytes(text.encode("utf-8"))
    else:
        sys.stdout.write(text)
    mpath = args.manifest or (args.out + ".manifest.json" if args.out else None)
    if mpath:
        Path(mpath).write_text(_json(manifest), encoding="utf-8")
    else:
        sys.stderr.write(_json(manifest))
    return 0
