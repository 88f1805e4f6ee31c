"""Command line entry point ``nschb``.

Exit status: 0 on success, 2 when an invariant is violated, 1 when a solver
fails.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import driver
from .config import SimConfig
from .errors import InvariantViolation, NSCHBError

EXIT_OK, EXIT_SOLVER, EXIT_INVARIANT = 0, 1, 2


def _levels(text: str) -> list[int]:
    """``"32,64,128"`` or a single integer."""
    return [int(v) for v in text.split(",") if v.strip()]


def _load(path) -> SimConfig:
    return SimConfig.from_toml(path) if path else SimConfig()


def _cmd_run(args) -> int:
    cfg = _load(args.config)
    out = Path(args.out or cfg.output.dir)
    state, start = None, 0
    if args.resume:
        state = driver.read_snapshot(args.resume)
        start = int(round(state.t / cfg.time.dt))
    result = driver.run(cfg, out, state=state, start_step=start)
    bad = result.violations()
    print(json.dumps({"out": str(out), "t_final": result.state.t, "violations": bad}))
    return EXIT_INVARIANT if bad else EXIT_OK


def _cmd_convergence(args) -> int:
    cfg = _load(args.config)
    table = driver.convergence_study(cfg, [n for group in args.levels for n in group], args.target)
    if args.out:
        Path(args.out).mkdir(parents=True, exist_ok=True)
        driver.write_order_table(Path(args.out) / f"orders_{args.target}.csv", table)
    for row in table.rows():
        order = "" if row["order"] is None else f"{row['order']:.3f}"
        print(f"{row['level']:>8d}  {row['error']:.6e}  {order}")
    return EXIT_OK


def _cmd_perturb(args) -> int:
    cfg = _load(args.config)
    res = driver.perturbation_experiment(cfg, args.eps, args.t_end)
    if args.out:
        Path(args.out).mkdir(parents=True, exist_ok=True)
        with (Path(args.out) / "perturbation.csv").open("w") as fh:
            fh.write("t,lambda\n")
            for t, lam in zip(res.times, res.lam):
                fh.write(f"{t:.17g},{lam:.17g}\n")
    print(json.dumps({"lambda0": res.lam[0], "lambda_final": res.lam[-1], "amplification": res.amplification}))
    return EXIT_OK


def _cmd_report(args) -> int:
    summary = driver.summarize(args.out)
    print(json.dumps(summary, indent=2))
    return EXIT_INVARIANT if summary["violations"] else EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="nschb", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="integrate one configuration")
    r.add_argument("--config", help="TOML file; defaults are used when omitted")
    r.add_argument("--out", help="output directory (overrides [output] dir)")
    r.add_argument("--resume", help="snapshot directory to restart from")
    r.set_defaults(func=_cmd_run)

    c = sub.add_parser("convergence", help="refinement study with observed orders")
    c.add_argument("--config")
    c.add_argument("--levels", type=_levels, nargs="+", required=True,
                   help="cells per axis (heat, ch) or step counts (temporal), doubling")
    c.add_argument("--target", choices=("heat", "ch", "temporal"), default="heat")
    c.add_argument("--out")
    c.set_defaults(func=_cmd_convergence)

    p = sub.add_parser("perturb", help="twin runs from perturbed initial order parameter")
    p.add_argument("--config")
    p.add_argument("--eps", type=float, required=True)
    p.add_argument("--t-end", type=float)
    p.add_argument("--out")
    p.set_defaults(func=_cmd_perturb)

    s = sub.add_parser("report", help="summarise a finished run directory")
    s.add_argument("--out", required=True)
    s.set_defaults(func=_cmd_report)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except InvariantViolation as exc:
        print(f"invariant violated: {exc}", file=sys.stderr)
        return EXIT_INVARIANT
    except NSCHBError as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
