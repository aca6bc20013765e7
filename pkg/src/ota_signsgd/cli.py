"""Command line entry point: ``run``, ``validate`` and ``seeds``."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .config import FIELD_NAMES, ConfigError, ExperimentConfig, _TYPES, load_config, replace

log = logging.getLogger("ota_signsgd")


def _add_config_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("config", nargs="?", help="experiment config file (key = value lines)")
    group = parser.add_argument_group("config overrides (take precedence over the file)")
    for name in FIELD_NAMES:
        flag = "--" + name.replace("_", "-")
        if _TYPES[name] is bool:
            group.add_argument(flag, dest=name, nargs="?", const="true", metavar="BOOL")
        else:
            group.add_argument(flag, dest=name, metavar=name.upper())


def _overrides(args) -> dict:
    return {name: getattr(args, name) for name in FIELD_NAMES if getattr(args, name, None) is not None}


def _load(args) -> ExperimentConfig:
    return load_config(args.config, _overrides(args))


def parse_seed_list(text: str) -> list[int]:
    """Expand ``"0-4,10"`` into ``[0, 1, 2, 3, 4, 10]``."""
    seeds = []
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        lo, sep, hi = part.partition("-")
        if sep:
            a, b = int(lo), int(hi)
            if b < a:
                raise ValueError(f"empty seed range {part!r}")
            seeds.extend(range(a, b + 1))
        else:
            seeds.append(int(part))
    if not seeds:
        raise ValueError("no seeds given")
    return seeds


def cmd_run(args) -> int:
    from .experiments import run_suite

    cfg = _load(args)
    try:
        summary = run_suite(cfg)
    except FloatingPointError as exc:
        print(f"error: run aborted: {exc}", file=sys.stderr)
        return 3
    print(f"{cfg.suite}: wrote artifacts to {cfg.output_dir} (config {cfg.digest()}, seed {cfg.seed})")
    if cfg.suite == "train":
        print(f"initial loss {summary['initial_loss']:.6g}, final loss {summary['final_loss']:.6g}")
    return 0


def cmd_validate(args) -> int:
    cfg = _load(args)
    if args.show:
        sys.stdout.write(cfg.to_text())
    print(f"config ok ({cfg.digest()})")
    return 0


def cmd_seeds(args) -> int:
    seeds = parse_seed_list(args.seeds)
    if args.config is None and not _overrides(args):
        print("\n".join(map(str, seeds)))
        return 0
    base = _load(args)
    out = Path(args.write_dir or ".")
    out.mkdir(parents=True, exist_ok=True)
    for s in seeds:
        cfg = replace(base, seed=s, output_dir=str(Path(base.output_dir) / f"seed_{s}"))
        path = out / f"seed_{s}.cfg"
        path.write_text(cfg.to_text())
        print(path)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ota-signsgd",
        description="Over-the-air signSGD simulator with sign-alignment precoding and Bayesian aggregation.")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="execute a suite (train, curves, bounds, oracle)")
    _add_config_flags(run)
    run.set_defaults(func=cmd_run)

    validate = sub.add_parser("validate", help="check a config without running it")
    _add_config_flags(validate)
    validate.add_argument("--show", action="store_true", help="print the resolved config")
    validate.set_defaults(func=cmd_validate)

    seeds = sub.add_parser("seeds", help="expand a seed list, optionally writing one config per seed")
    seeds.add_argument("seeds", help="comma separated seeds and ranges, e.g. 0-4,10")
    seeds.add_argument("--write-dir", help="directory for the per-seed config files")
    _add_config_flags(seeds)
    seeds.set_defaults(func=cmd_seeds)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print("error: invalid config", file=sys.stderr)
        for problem in exc.problems:
            print(f"  {problem}", file=sys.stderr)
        return 2
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
