"""Command-line entry point: ``qchns {run, operator-lab, convergence, energy-report}``.

Exit codes: 0 success, 2 configuration or input error, 3 failed time step,
4 failed operator-lab check.
"""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import diagnostics as dg
from .errors import ConfigError, QCHNSError, StepFailed

EXIT_OK, EXIT_CONFIG, EXIT_STEP, EXIT_LAB = 0, 2, 3, 4


def _output_dir(cfg: dg.SimConfig) -> Path:
    out = Path(cfg.output_dir or "output")
    return out if out.is_absolute() else Path(cfg.base_dir) / out


def cmd_run(args) -> int:
    from dataclasses import replace
    from .picard import run

    cfg = dg.load_config(args.config)
    cfg = replace(cfg, output_dir=str(_output_dir(cfg)))
    try:
        records, state = run(cfg)
    except StepFailed as exc:
        print(f"step failed: {exc}", file=sys.stderr)
        return EXIT_STEP
    last = records[-1]
    print(f"t = {last.t:.6g}  steps = {len(records) - 1}  E_total = {last.E_total:.10g}  "
          f"mass = {last.mass:.10g}  records: {Path(cfg.output_dir) / 'diagnostics.csv'}")
    return EXIT_OK


def cmd_operator_lab(args) -> int:
    import numpy as np
    from dataclasses import replace
    from .operator_lab import run_lab

    cfg = dg.load_config(args.config)
    if cfg.nx != cfg.ny:
        raise ConfigError("operator-lab needs a square grid (nx == ny)")
    if dg.parse_initial(cfg.initial)[0] == "file":
        raise ConfigError("operator-lab samples phi0 at two resolutions; use an analytic initial condition")
    if cfg.nx > 48 or cfg.nx < 16 or cfg.nx % 2:
        raise ConfigError("operator-lab needs an even nx between 16 and 48")

    def phi0(grid):
        sub = replace(cfg, nx=grid.nx, ny=grid.ny)
        return dg.initial_fields(sub)[1]

    rep = run_lab(phi0, cfg.params, cfg.nx, cfg.Lx, cfg.Ly, samples=args.samples, seed=args.seed)
    print("status,check,value,detail")
    for item in rep.items:
        print(f"{'PASS' if item.passed else 'FAIL'},{item.name},{item.value:.10g},{item.detail}")
    print(f"# overall: {'PASS' if rep.passed else 'FAIL'}")
    if not np.all([i.passed for i in rep.items]):
        return EXIT_LAB
    return EXIT_OK


def cmd_convergence(args) -> int:
    from .convergence import manufactured_study

    cfg = dg.load_config(args.config)
    res = manufactured_study(min(cfg.nx, cfg.ny), args.levels, cfg.params)
    print("quantity,sizes,errors,orders")
    ok = True
    for key, val in res.items():
        if key == "sizes":
            continue
        sizes = res["sizes"][:len(val["errors"])]
        errs = " ".join(f"{e:.4e}" for e in val["errors"])
        ords = " ".join(f"{o:.3f}" for o in val["orders"])
        ok &= all(o >= 1.9 for o in val["orders"])
        print(f"{key},{' '.join(map(str, sizes))},{errs},{ords}")
    print(f"# second order attained: {'yes' if ok else 'no'}")
    return EXIT_OK


def cmd_energy_report(args) -> int:
    try:
        records = dg.read_records(args.csv)
    except (OSError, ValueError) as exc:
        raise ConfigError(f"cannot read records: {exc}") from exc
    if not records:
        raise ConfigError("record file is empty")
    rep = dg.energy_report(records)
    print(f"steps: {rep['steps']}")
    print(f"max energy-balance residual: {rep['max_residual']:.6e}")
    print(f"cumulative energy-balance residual: {rep['cumulative_residual']:.6e}")
    print(f"max per-step energy increase: {rep['max_energy_increase']:.6e}")
    print(f"energy monotone: {'yes' if rep['monotone'] else 'no'}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="qchns", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)
    p = sub.add_parser("run", help="integrate a configuration and write diagnostics")
    p.add_argument("config")
    p.set_defaults(func=cmd_run)
    p = sub.add_parser("operator-lab", help="dense operator checks at the configured phi0")
    p.add_argument("config")
    p.add_argument("--samples", type=int, default=200)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_operator_lab)
    p = sub.add_parser("convergence", help="manufactured-solution refinement study")
    p.add_argument("config")
    p.add_argument("--levels", type=int, default=3)
    p.set_defaults(func=cmd_convergence)
    p = sub.add_parser("energy-report", help="energy-law summary of a diagnostics CSV")
    p.add_argument("csv")
    p.set_defaults(func=cmd_energy_report)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except StepFailed as exc:
        print(f"step failed: {exc}", file=sys.stderr)
        return EXIT_STEP
    except QCHNSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_STEP


cli = main


if __name__ == "__main__":
    sys.exit(main())
