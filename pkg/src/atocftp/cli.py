"""Command-line entry point: ``atocftp run|validate|oracle``.

Exit codes: 0 success, 2 configuration error, 3 size or guard error.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .config import load_config
from .errors import ConfigError, ModelError, SizeError
from .experiment import run_experiment, validate_config
from .oracle import oracle_for, write_pi_csv

EXIT_OK, EXIT_CONFIG, EXIT_SIZE = 0, 2, 3


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="atocftp",
                                description="Perfect sampling for assemble-to-order systems.")
    sub = p.add_subparsers(dest="command", required=True)
    for name, text in (("run", "run a sampling campaign"),
                       ("validate", "check a configuration without sampling"),
                       ("oracle", "export exact stationary distributions")):
        s = sub.add_parser(name, help=text)
        s.add_argument("--config", required=True, help="TOML configuration file")
        if name != "validate":
            s.add_argument("--out", required=True, help="output directory")
        if name == "run":
            s.add_argument("--seed", type=int, help="override the base seed")
            s.add_argument("--replications", type=int, help="override the replication count")
            s.add_argument("--max-horizon", type=int, help="override the horizon cap")
            s.add_argument("--parallelism", type=int, default=1, help="worker processes")
    return p


def _run(args) -> int:
    cfg = load_config(args.config).with_overrides(
        seed=args.seed, replications=args.replications, max_horizon=args.max_horizon)
    if args.parallelism < 1:
        raise ConfigError("--parallelism: must be at least 1")
    res = run_experiment(cfg, parallelism=args.parallelism)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "rows.csv").write_text(res.rows_csv(), encoding="utf-8")
    (out / "summary.csv").write_text(res.summary_csv(), encoding="utf-8")
    (out / "summary.json").write_text(res.summary_json(), encoding="utf-8")
    nc = sum(r["status"] != "ok" for r in res.rows)
    print(f"{len(res.rows)} replications over {len(res.summary)} sweep points written to {out}"
          + (f" ({nc} non-coalesced)" if nc else ""))
    return EXIT_OK


def _validate(args) -> int:
    try:
        cfg = load_config(args.config)
    except ConfigError as exc:
        print(f"error: {exc}")
        return EXIT_CONFIG
    for note in validate_config(cfg):
        print(note)
    return EXIT_OK


def _oracle(args) -> int:
    cfg = load_config(args.config)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    policy = "tos" if cfg.model == "tos-individual" else "pos"
    for point, (value, model) in enumerate(cfg.points()):
        chain, pi = oracle_for(model, policy)
        path = out / f"pi_{point}.csv"
        with path.open("w", encoding="utf-8", newline="") as fh:
            write_pi_csv(chain.states, pi, fh)
        print(f"{path}: {len(chain)} states")
    return EXIT_OK


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    handler = {"run": _run, "validate": _validate, "oracle": _oracle}[args.command]
    try:
        return handler(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (SizeError, ModelError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SIZE


if __name__ == "__main__":
    sys.exit(main())
