"""``flexbie <scenario> --config <path> [--out <dir>] [--threads <n>]``.

Exit status: 0 success, 2 configuration error, 3 solver failure, 4 failed check.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys

from .config import SCENARIOS, ConfigError, ensure_writable, load_config
from .potential import ExtrapolationFailure
from .quadrature import AdaptiveFailure
from .system import SolverFailure

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_SOLVER = 3
EXIT_CHECK = 4

log = logging.getLogger("flexbie")


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="flexbie", description="Flexural wave scattering by boundary integral equations.")
    p.add_argument("scenario", choices=SCENARIOS)
    p.add_argument("--config", required=True, help="JSON run configuration")
    p.add_argument("--out", default=None, help="output directory (overrides output.dir)")
    p.add_argument("--threads", type=int, default=None, help="assembly threads (default: $FLEXBIE_THREADS or 1)")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def _threads(arg: int | None) -> int:
    if arg is not None:
        n = arg
    else:
        env = os.environ.get("FLEXBIE_THREADS", "1")
        try:
            n = int(env)
        except ValueError as exc:
            raise ConfigError(f"FLEXBIE_THREADS must be an integer, got {env!r}") from exc
    if n < 1:
        raise ConfigError("thread count must be >= 1")
    return n


def main(argv: list[str] | None = None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    from .scenarios import run

    try:
        cfg = load_config(args.config)
        if cfg.scenario is not None and cfg.scenario != args.scenario:
            raise ConfigError(f"config is for scenario {cfg.scenario!r}, not {args.scenario!r}")
        cfg = cfg.model_copy(update={"scenario": args.scenario})
        threads = _threads(args.threads)
        out = ensure_writable(args.out or cfg.output.dir)
        result = run(cfg, out, threads)
    except (ConfigError, ValueError) as exc:
        print(f"flexbie: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (SolverFailure, AdaptiveFailure, ExtrapolationFailure, ArithmeticError) as exc:
        print(f"flexbie: solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    print(json.dumps({"scenario": args.scenario, "passed": result.passed, "files": result.files}))
    if not result.passed:
        print("flexbie: one or more checks failed", file=sys.stderr)
        return EXIT_CHECK
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
