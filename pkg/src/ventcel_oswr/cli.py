"""Command-line front end for the studies in :mod:`ventcel_oswr.experiments`."""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np
import yaml

from . import experiments as ex
from .linalg import SingularMatrixError
from .problem import load_config

COMMANDS = {
    "table1": ("table1", ex.run_table1),
    "table2": ("table2", ex.run_table2),
    "curves": ("fig3", ex.run_convergence_curves),
    "calibrate": ("fig4", ex.run_calibration),
    "timegrids": ("fig5", ex.run_timegrid_study),
    "solve": ("solve", ex.run_solve),
}
SEEDED = {"curves", "calibrate", "solve"}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="ventcel-oswr",
                                 description="Space-time domain decomposition with Ventcel conditions.")
    ap.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = ap.add_subparsers(dest="command", required=True)
    for name, (preset, _) in COMMANDS.items():
        p = sub.add_parser(name, help=f"run the {name} study (default preset {preset!r})")
        p.add_argument("--config", type=Path, help="YAML file overriding preset sections")
        p.add_argument("--preset", default=preset, choices=sorted(ex.PRESETS))
        p.add_argument("--seed", type=int, help="seed of the random initial interface guess")
        p.add_argument("--threads", type=int, default=1, help="worker threads for subdomain solves")
        p.add_argument("--out", type=Path, default=Path("results"), help="output directory")
    return ap


def _summary(command, out):
    if command == "calibrate":
        result, (p_star, q_star) = out
        iq, ip = result.best_index
        return {"best_p": result.best_p, "best_q": result.best_q, "interior": result.is_interior(),
                "optimized_p": p_star, "optimized_q": q_star,
                "log10_error": float(np.log10(result.errors[iq, ip]))}
    if command == "timegrids":
        return {"c_slopes": ex.fitted_slopes(out, "c_error"), "phi_slopes": ex.fitted_slopes(out, "phi_error")}
    if command == "solve":
        return out
    return {"rows": len(out)}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.threads < 1:
            raise ex.ConfigError("--threads must be at least 1")
        cfg = ex.resolve_config(args.preset, load_config(args.config) if args.config else None)
        run = COMMANDS[args.command][1]
        kwargs = {"out_dir": args.out, "threads": args.threads}
        if args.command in SEEDED:
            kwargs["seed"] = args.seed
        out = run(cfg, **kwargs)
    except KeyError as exc:
        print(f"error: missing configuration key {exc}", file=sys.stderr)
        return 2
    except (ValueError, OSError, yaml.YAMLError, SingularMatrixError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print(json.dumps(_summary(args.command, out), default=str))
    return 0


if __name__ == "__main__":
    sys.exit(main())
