"""Command-line entry point: ``coexline {verify,sample,fluct,dynamics}``.

Exit status is 0 when every check passes, 1 when any check fails and 2 on
usage or I/O errors.  Data files are byte-identical for identical flags,
whatever ``--workers`` is.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import sys
from dataclasses import dataclass, field

import numpy as np

from coexline import denisov, dynamics, oracle, stats
from coexline.model import BoundaryRates, rep_from_rates
from coexline.parallel import resolve_workers

log = logging.getLogger("coexline")

SUBCOMMANDS = ("verify", "sample", "fluct", "dynamics")


@dataclass
class RunConfig:
    subcommand: str
    n: int
    a: float
    b: float
    replicas: int = 1
    seed: int = 0
    times: tuple[float, ...] = stats.DEFAULT_TIMES
    out: str | None = None
    format: str = "csv"
    workers: int = 1
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.subcommand not in SUBCOMMANDS:
            raise ValueError(f"unknown subcommand {self.subcommand!r}")
        if self.n < 1:
            raise ValueError("--n must be >= 1")
        if self.replicas < 1:
            raise ValueError("--replicas must be >= 1")
        if not (self.a > 0 and self.b > 0):
            raise ValueError("a and b must be positive")
        if any(not 0 <= t <= 1 for t in self.times) or list(self.times) != sorted(self.times):
            raise ValueError("--times must be sorted values in [0, 1]")
        if not 0 <= self.seed < 2**64:
            raise ValueError("--seed must be a 64-bit unsigned integer")


def _times(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(x) for x in text.split(",") if x.strip())
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"bad --times {text!r}") from exc


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="coexline", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="subcommand", required=True)

    def common(sp, replicas=True):
        sp.add_argument("--n", type=int, required=True)
        sp.add_argument("--a", type=float)
        sp.add_argument("--b", type=float, help="defaults to --a")
        sp.add_argument("--alpha", type=float)
        sp.add_argument("--beta", type=float)
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--out")
        sp.add_argument("--workers", type=int, default=None, help="fallback: $COEXLINE_WORKERS")
        sp.add_argument("-v", "--verbose", action="store_true")
        if replicas:
            sp.add_argument("--replicas", type=int, default=1)

    v = sub.add_parser("verify", help="exact small-n identities, JSON report")
    common(v, replicas=False)
    v.add_argument("--format", choices=("json", "csv"), default="json")
    v.add_argument("--exact-rational", action="store_true")

    s = sub.add_parser("sample", help="stationary draws as CSV rows")
    common(s)
    s.add_argument("--format", choices=("csv", "json"), default="csv")

    f = sub.add_parser("fluct", help="coexistence-line fluctuation records and tests")
    common(f)
    f.add_argument("--times", type=_times, default=stats.DEFAULT_TIMES)
    f.add_argument("--format", choices=("csv", "json"), default="csv")
    f.add_argument("--summary", help="JSON summary path (default: stdout)")
    f.add_argument("--ladder", type=lambda t: tuple(int(x) for x in t.split(",")), default=None)
    f.add_argument("--ladder-replicas", type=int, default=10_000)

    d = sub.add_parser("dynamics", help="Gillespie time averages, CSV site,mean,stderr")
    common(d, replicas=False)
    d.add_argument("--horizon", type=float, default=1e5)
    d.add_argument("--burn-in", type=float, default=None)
    d.add_argument("--format", choices=("csv", "json"), default="csv")
    d.add_argument("--trace", help="write the event trace (time,event,site) to this CSV")
    return p


def _resolve_params(args, parser) -> tuple[float, float]:
    if args.alpha is not None or args.beta is not None:
        if args.alpha is None or args.beta is None:
            parser.error("--alpha and --beta must be given together")
        try:
            rep = rep_from_rates(BoundaryRates(args.alpha, args.beta))
        except ValueError as exc:
            parser.error(str(exc))
        return rep.a, rep.b
    if args.a is None:
        parser.error("give --a (and optionally --b) or --alpha and --beta")
    return args.a, args.a if args.b is None else args.b


def _write(text: str, path: str | None) -> None:
    if path is None:
        sys.stdout.write(text)
    else:
        with open(path, "w", newline="") as fh:
            fh.write(text)


def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def _num(x) -> str:
    return repr(float(x))


def run_verify(cfg: RunConfig) -> tuple[str, bool]:
    n, a, b = cfg.n, cfg.a, cfg.b
    if n > oracle.MAX_PRW_N:
        raise ValueError(f"verify supports n <= {oracle.MAX_PRW_N}")
    rows = []

    def add(check, metric, value, tol):
        rows.append({"check": check, "n": n, "a": a, "b": b, "metric": metric,
                     "value": float(value), "tolerance": tol, "pass": bool(value <= tol)})

    marg = oracle.marginal_first(oracle.enumerate_two_line(a, b, n))
    pi = oracle.ctmc_stationary(1 / (1 + a), 1 / (1 + b), n)
    add("two_line_marginal_vs_ctmc", "tv", oracle.tv_distance(marg, pi), 1e-10)
    if n <= oracle.MAX_BAYES_N:
        add("bayes_factorisation", "max_abs_err", oracle.bayes_check(a, b, n), 1e-12)
    prw = oracle.enumerate_prw(a, b, n)
    add("walk_law_vs_split_law", "tv", oracle.tv_distance(prw, oracle.denisov_exact_law(a, b, n)), 1e-10)
    C = denisov.tn_law(a, b, n).C
    add("normaliser_agreement", "rel_err", abs(prw.normalizer / C - 1), 1e-10)
    if cfg.extra.get("exact_rational"):
        if n <= 8:
            add("exact_generator_residual", "max_abs", float(oracle.exact_generator_residual(a, b, n)), 0.0)
        if n <= 7:
            add("exact_walk_vs_split", "max_abs", float(oracle.exact_prw_vs_denisov(a, b, n)), 0.0)
    ok = all(r["pass"] for r in rows)
    if cfg.format == "json":
        return json.dumps(rows, indent=2) + "\n", ok
    keys = list(rows[0])
    return _csv_text(keys, [[r[k] for k in keys] for r in rows]), ok


def run_sample(cfg: RunConfig) -> tuple[str, bool]:
    header = ["n", "seed", "replica", "T_n", "tau_star", "occupations"]
    rows = []
    start = 0
    for batch in denisov.iter_batches(cfg.a, cfg.b, cfg.n, cfg.seed, cfg.replicas, workers=cfg.workers):
        for i in range(len(batch)):
            occ = "".join("1" if x else "0" for x in batch.occupations[i])
            rows.append([cfg.n, cfg.seed, start + i, int(batch.t_n[i]), int(batch.tau_star[i]), occ])
        start += len(batch)
    if cfg.format == "json":
        return json.dumps([dict(zip(header, r)) for r in rows], indent=2) + "\n", True
    return _csv_text(header, rows), True


def run_fluct(cfg: RunConfig) -> tuple[str, bool]:
    if not (cfg.a == cfg.b and cfg.a > 1):
        raise ValueError("fluct needs the coexistence line a = b > 1")
    rep = stats.coexistence_report(
        cfg.a, cfg.n, cfg.replicas, cfg.times, seed=cfg.seed, workers=cfg.workers,
        ladder=cfg.extra.get("ladder"), ladder_replicas=cfg.extra.get("ladder_replicas", 10_000),
    )
    for m, q in rep.ladder.items():
        log.info("|T_n' - T_n| at n=%d: %s", m, q)
    if cfg.out is not None:
        header = ["u_hat"] + [f"W_{t}" for t in rep.times]
        rows = ([_num(u)] + [_num(w) for w in ws] for u, ws in zip(rep.u_hat, rep.W))
        if cfg.format == "json":
            text = json.dumps([dict(zip(header, r)) for r in rows]) + "\n"
        else:
            text = _csv_text(header, rows)
        _write(text, cfg.out)
    summary = json.dumps(rep.checks, indent=2) + "\n"
    return summary, rep.passed


def run_dynamics(cfg: RunConfig) -> tuple[str, bool]:
    ex = cfg.extra
    alpha, beta = 1 / (1 + cfg.a), 1 / (1 + cfg.b)
    sim = dynamics.SimConfig(cfg.n, alpha, beta, ex["horizon"], ex.get("burn_in"), cfg.seed)
    trace = [] if ex.get("trace") else None
    report = dynamics.simulate(sim, trace=trace)
    if trace is not None:
        _write(_csv_text(["time", "event", "site"], ([_num(t), k, s] for t, k, s in trace)), ex["trace"])
    ok = True
    if cfg.n <= 10:
        pi = oracle.ctmc_stationary(alpha, beta, cfg.n)
        exact = pi.probs @ oracle.binary_configs(cfg.n)
        z = np.abs(report.mean_occupation - exact) / np.maximum(report.standard_errors, 1e-300)
        ok = bool((z <= 3).all())
        log.info("max |mean - exact| / SE = %.3f (limit 3)", z.max())
    header = ["site", "mean", "stderr"]
    rows = [[i + 1, _num(m), _num(s)] for i, (m, s) in enumerate(zip(report.mean_occupation, report.standard_errors))]
    if cfg.format == "json":
        return json.dumps([dict(zip(header, r)) for r in rows], indent=2) + "\n", ok
    return _csv_text(header, rows), ok


_RUNNERS = {"verify": run_verify, "sample": run_sample, "fluct": run_fluct, "dynamics": run_dynamics}


def run(cfg: RunConfig) -> int:
    """Execute a subcommand; returns the exit status."""
    try:
        text, ok = _RUNNERS[cfg.subcommand](cfg)
        if cfg.subcommand == "fluct":
            _write(text, cfg.extra.get("summary"))
        else:
            _write(text, cfg.out)
    except OSError as exc:
        print(f"coexline: I/O error on {exc.filename}: {exc.strerror}", file=sys.stderr)
        return 2
    return 0 if ok else 1


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(name)s: %(message)s")
    a, b = _resolve_params(args, parser)
    extra = {}
    if args.subcommand == "verify":
        extra["exact_rational"] = args.exact_rational
    elif args.subcommand == "fluct":
        extra.update(summary=args.summary, ladder=args.ladder, ladder_replicas=args.ladder_replicas)
    elif args.subcommand == "dynamics":
        extra.update(horizon=args.horizon, burn_in=args.burn_in, trace=args.trace)
    try:
        cfg = RunConfig(
            subcommand=args.subcommand,
            n=args.n,
            a=a,
            b=b,
            replicas=getattr(args, "replicas", 1),
            seed=args.seed,
            times=getattr(args, "times", stats.DEFAULT_TIMES),
            out=args.out,
            format=args.format,
            workers=resolve_workers(args.workers),
            extra=extra,
        )
    except ValueError as exc:
        parser.error(str(exc))
    try:
        return run(cfg)
    except ValueError as exc:
        parser.error(str(exc))


if __name__ == "__main__":
    sys.exit(main())
