"""``critbbm`` command line: constants, tables, Monte Carlo and verification.

Exit codes: 0 success, 1 a verification check failed, 2 configuration error.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys

from . import acceptance, elliptic, hitting, killed, simulate
from .errors import BBMError, ConfigError, PrecisionLoss
from .offspring import MORANIAN, load_offspring

SIG_DIGITS = 12
EXACT_K_LIMIT = 200


def _num(v):
    if isinstance(v, bool) or v is None or isinstance(v, str):
        return v
    if isinstance(v, int):
        return v
    v = float(v)
    if not math.isfinite(v):
        return "nan"
    return float(f"{v:.{SIG_DIGITS}g}")


def _cell(v):
    v = _num(v)
    if v is None:
        return ""
    if isinstance(v, float):
        return f"{v:.{SIG_DIGITS}g}"
    return str(v)


def render(columns: list[str], rows: list[dict], fmt: str) -> str:
    if fmt == "json":
        data = [{c: _num(r.get(c)) for c in columns} for r in rows]
        return json.dumps({"columns": columns, "rows": data}, indent=2) + "\n"
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for r in rows:
        writer.writerow([_cell(r.get(c)) for c in columns])
    return buf.getvalue()


def _offspring(args):
    if args.offspring is None:
        return MORANIAN
    try:
        return load_offspring(args.offspring)
    except (OSError, ValueError) as exc:
        raise ConfigError(f"cannot read offspring law: {exc}") from exc


def run_constants(args) -> tuple[list[str], list[dict]]:
    dist = _offspring(args)
    s_grid = args.s or [0.01, 0.1, 0.5, 0.9]
    sol = elliptic.solve_period_for_target(1.0)
    consts = hitting.asymptotic_constants(dist, s_grid)
    rows = [
        {"name": "omega_1", "value": sol.omega_x, "method": "elliptic"},
        {"name": "g3_L1", "value": sol.g3_x, "method": "elliptic"},
        {"name": "c_1", "value": consts.c1, "method": "elliptic"},
        {"name": "C_1", "value": consts.C1, "method": "elliptic"},
    ]
    rows += [{"name": f"C_2(s={s:g})", "value": v, "method": "elliptic"} for s, v in consts.C2_of_s.items()]
    rows.append({"name": "C_3", "value": consts.C3, "method": "elliptic"})
    rows += [{"name": f"C_4(s={s:g})", "value": v, "method": "elliptic"} for s, v in consts.C4_of_s.items()]
    for name, v in killed.killed_asymptotic_constants(dist).items():
        rows.append({"name": f"C_{name[1:]}", "value": v, "method": "asymptotic"})
    return ["name", "value", "method"], rows


def run_hitprob(args) -> tuple[list[str], list[dict]]:
    dist = _offspring(args)
    xs = args.x or [1.0]
    cols = ["x", "y", "u", "method", "lower_bound", "upper_bound", "error"]
    rows = []
    for x in xs:
        ys = args.y if args.y is not None else [0.0, 0.5 * x, x]
        try:
            bounds = hitting.pinch_bounds(dist, x, args.delta)
        except BBMError:
            bounds = None
        for y in ys:
            row = {"x": x, "y": y}
            try:
                if dist.is_moranian:
                    row["u"], row["method"] = hitting.moranian_hit_prob(x, y), "elliptic"
                else:
                    row["u"], row["method"] = hitting.general_hit_prob(dist, x, y), "shooting"
                if bounds is not None and 0.0 <= y <= bounds.length:
                    row["lower_bound"] = bounds.lower(y)
                    row["upper_bound"] = bounds.upper(y)
            except BBMError as exc:
                row.update(u=None, method="error", error=type(exc).__name__)
            rows.append(row)
    return cols, rows


def _moranian_killed_rows(y: float, k_max: int) -> list[dict]:
    near = abs((y / elliptic.SQRT6) ** 2 - 1.0) < killed.NEAR_SINGULAR
    if near or k_max > EXACT_K_LIMIT:
        series = killed.tail_from_series(y, k_max)
        return [
            {"y": y, "k": int(k), "tail": series.tail_at(k), "pmf": series.pmf_at(k), "method": "series"}
            for k in range(1, k_max + 1)
        ]
    tails = [killed.moranian_tail_exact(y, k) for k in range(1, k_max + 2)]
    return [
        {"y": y, "k": k, "tail": tails[k - 1], "pmf": tails[k - 1] - tails[k], "method": "exact_moranian"}
        for k in range(1, k_max + 1)
    ]


def run_killed(args) -> tuple[list[str], list[dict]]:
    dist = _offspring(args)
    ys = args.y or [1.0]
    k_max = args.k_max
    cols = ["y", "k", "tail", "pmf", "method", "error"]
    rows = []
    for y in ys:
        if y <= 0.0:
            raise ConfigError("y must be positive")
        if dist.is_moranian:
            rows += _moranian_killed_rows(y, k_max)
            continue
        # the node count depends on k_max, so the reachable order can shift on retry
        good, series = k_max, None
        try:
            while good >= 1 and series is None:
                try:
                    series = killed.tail_from_series(y, good, dist)
                except PrecisionLoss as exc:
                    good = min(good - 1, (exc.k or 1) - 1)
        except BBMError as exc:
            rows += [{"y": y, "k": k, "method": "error", "error": type(exc).__name__} for k in range(1, k_max + 1)]
            continue
        for k in range(1, k_max + 1):
            if k <= good:
                rows.append({"y": y, "k": k, "tail": series.tail_at(k), "pmf": series.pmf_at(k), "method": "series"})
            else:
                rows.append({"y": y, "k": k, "method": "error", "error": "PrecisionLoss"})
    return cols, rows


def run_simulate(args) -> tuple[list[str], list[dict]]:
    dist = _offspring(args)
    y0 = (args.y or [1.0])[0]
    cfg = simulate.SnakeConfig(y0, dist, args.dt, seed=args.seed)
    batch = simulate.run_batch(cfg, args.n_runs, args.workers)
    cols = ["statistic", "level", "estimate", "std_error", "n_runs", "n_truncated", "method"]
    stats = [("E[N]", "mean", None)]
    stats += [(f"P(N>={k})", "tail", k) for k in (args.k or [1, 5])]
    stats += [(f"P(M>={x:g})", "hit", x) for x in (args.x or [3.0])]
    rows = []
    for label, kind, level in stats:
        est = batch.estimate(kind, level)
        rows.append(
            {
                "statistic": label,
                "level": level,
                "estimate": est.mean,
                "std_error": est.std_error,
                "n_runs": est.n_runs,
                "n_truncated": est.n_truncated,
                "method": "mc",
            }
        )
    return cols, rows


def run_verify(args) -> tuple[int, str]:
    opts = acceptance.SuiteOptions(n_runs=args.n_runs, seed=args.seed, dt=args.dt, workers=args.workers)
    if args.offspring is not None:
        opts.general = _offspring(args)
    results = acceptance.run_suite(opts, args.checks)
    for r in results:
        print(r.line(), file=sys.stderr)
    passed = all(r.passed for r in results)
    if args.format == "json":
        text = json.dumps({"passed": passed, "checks": [r.as_dict() for r in results]}, indent=2) + "\n"
    else:
        cols = ["check", "name", "passed", "measured", "tolerance"]
        rows = [
            {**r.as_dict(), "measured": "; ".join(f"{k}={_cell(v)}" for k, v in r.measured.items())} for r in results
        ]
        text = render(cols, rows, "csv")
    return (0 if passed else 1), text


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="critbbm", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--offspring", help="JSON array of probabilities, or a path to a JSON file")
        sp.add_argument("--format", choices=("csv", "json"), default="csv")
        sp.add_argument("--out", help="output file (default: stdout)")

    sp = sub.add_parser("constants", help="period, lattice invariant and asymptotic constants")
    common(sp)
    sp.add_argument("--s", type=float, nargs="+", help="s grid for C_2(s) and C_4(s)")

    sp = sub.add_parser("hitprob", help="tabulate P^y(M >= x)")
    common(sp)
    sp.add_argument("--x", type=float, nargs="+")
    sp.add_argument("--y", type=float, nargs="+")
    sp.add_argument("--delta", type=float, default=0.1, help="pinching slack for the bounds")

    sp = sub.add_parser("killed", help="tabulate P^y(N >= k) and P^y(N = k)")
    common(sp)
    sp.add_argument("--y", type=float, nargs="+")
    sp.add_argument("--k-max", type=int, default=10)

    sp = sub.add_parser("simulate", help="Monte Carlo estimates")
    common(sp)
    sp.add_argument("--y", type=float, nargs=1, help="starting height")
    sp.add_argument("--x", type=float, nargs="+", help="levels for P(M >= x)")
    sp.add_argument("--k", type=int, nargs="+", help="levels for P(N >= k)")
    sp.add_argument("--n-runs", type=int, default=10_000)
    sp.add_argument("--dt", type=float, default=1e-4)
    sp.add_argument("--seed", type=int, default=42)
    sp.add_argument("--workers", type=int, default=1)

    sp = sub.add_parser("verify", help="run the acceptance checks")
    common(sp)
    sp.set_defaults(format="json")
    sp.add_argument("--n-runs", type=int, default=100_000)
    sp.add_argument("--dt", type=float, default=1e-4)
    sp.add_argument("--seed", type=int, default=42)
    sp.add_argument("--workers", type=int, default=1)
    sp.add_argument("--checks", type=int, nargs="+", choices=sorted(acceptance.CHECKS))
    return p


def _validate(args):
    for name in ("n_runs", "k_max", "workers"):
        v = getattr(args, name, None)
        if v is not None and v < 1:
            raise ConfigError(f"--{name.replace('_', '-')} must be positive")
    if getattr(args, "dt", 1.0) <= 0.0:
        raise ConfigError("--dt must be positive")
    if args.command == "killed" and args.k_max > killed.MAX_K:
        raise ConfigError(f"--k-max must be at most {killed.MAX_K}")
    if args.command == "simulate" and args.n_runs < 100:
        raise ConfigError("--n-runs must be at least 100")
    if args.command == "hitprob":
        for x in args.x or []:
            if x <= 0.0:
                raise ConfigError("--x values must be positive")
        if not 0.0 < args.delta < 1.0:
            raise ConfigError("--delta must lie in (0, 1)")


def _emit(text: str, out: str | None):
    if out:
        with open(out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        _validate(args)
        if args.command == "verify":
            code, text = run_verify(args)
            _emit(text, args.out)
            return code
        handler = {
            "constants": run_constants,
            "hitprob": run_hitprob,
            "killed": run_killed,
            "simulate": run_simulate,
        }[args.command]
        cols, rows = handler(args)
        _emit(render(cols, rows, args.format), args.out)
        return 0
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except BBMError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
