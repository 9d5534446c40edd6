"""Command-line entry point.

Exit codes: 0 success, 1 usage or input error, 2 convergence not certified
(R-hat >= 1.05 on some coordinate; results are still written), 3 numeric
failure.
"""
from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from .config import ConfigError, ExperimentConfig
from .data import DatasetFormatError
from .inference import MODELS, ModelSettings, SamplerSettings, StuckChainError
from .ode import IntegrationError
from .pde import NumericStabilityError
from .reproduce import TABLE1_DEFAULT_N, TARGETS, reproduce
from .results import ResultFormatError, diagnose, fit, write_result
from .synthdata import SCENARIOS, generate

EXIT_OK, EXIT_INPUT, EXIT_UNCONVERGED, EXIT_NUMERIC = 0, 1, 2, 3
NUMERIC_ERRORS = (StuckChainError, NumericStabilityError, IntegrationError, np.linalg.LinAlgError,
                  FloatingPointError)

log = logging.getLogger("misspec")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INPUT, f"{self.prog}: error: {message}\n")


def _add_run_flags(p: argparse.ArgumentParser, with_defaults: bool) -> None:
    p.add_argument("--seed", type=int, default=0 if with_defaults else None)
    p.add_argument("--iters", type=int, default=SamplerSettings.n_iters if with_defaults else None,
                   help="MCMC iterations per chain")
    p.add_argument("--chains", type=int, default=4 if with_defaults else None)
    p.add_argument("--workers", type=int, default=None,
                   help="worker processes for chains (default: MISSPEC_THREADS or CPU count)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="misspec", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    g = sub.add_parser("generate", help="write a synthetic dataset (CSV plus JSON sidecar)")
    g.add_argument("scenario", help="one of: " + ", ".join(SCENARIOS))
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", type=Path, default=None, help="CSV path (default <scenario>.csv)")

    c = sub.add_parser("config", help="write a default fit config for a scenario and model")
    c.add_argument("scenario")
    c.add_argument("model", choices=MODELS)
    c.add_argument("--scenario-id", default=None)
    c.add_argument("--dataset", action="store_true", help="treat SCENARIO as a dataset CSV path")
    _add_run_flags(c, with_defaults=True)
    c.add_argument("--out", type=Path, default=Path("config.json"))

    f = sub.add_parser("fit", help="run MCMC for a config file")
    f.add_argument("config", type=Path)
    _add_run_flags(f, with_defaults=False)
    f.add_argument("--out", type=Path, default=None, help="result directory (overrides the config)")

    r = sub.add_parser("reproduce", help="generate and fit every model of a figure or table")
    r.add_argument("target", choices=TARGETS)
    _add_run_flags(r, with_defaults=True)
    r.add_argument("--out", type=Path, default=Path("results"))
    r.add_argument("--n", type=int, nargs="+", default=list(TABLE1_DEFAULT_N),
                   help="replicate counts for table1 (any of 5 50 100 200)")

    d = sub.add_parser("diagnose", help="R-hat, ESS and acceptance for a result directory")
    d.add_argument("result_dir", type=Path)
    return parser


def cmd_generate(args) -> int:
    if args.scenario not in SCENARIOS:
        print(f"unknown scenario {args.scenario!r}; valid ids: {', '.join(SCENARIOS)}", file=sys.stderr)
        return EXIT_INPUT
    out = args.out or Path(f"{args.scenario}.csv")
    ds = generate(args.scenario, args.seed)
    out.parent.mkdir(parents=True, exist_ok=True)
    ds.to_csv(out)
    print(f"wrote {len(ds)} records to {out}")
    return EXIT_OK


def cmd_config(args) -> int:
    source = {"dataset": args.scenario} if args.dataset else {"scenario": args.scenario, "data_seed": args.seed}
    if not args.dataset and args.scenario not in SCENARIOS:
        print(f"unknown scenario {args.scenario!r}; valid ids: {', '.join(SCENARIOS)}", file=sys.stderr)
        return EXIT_INPUT
    cfg = ExperimentConfig(model=ModelSettings(args.model), scenario_id=args.scenario_id, seed=args.seed,
                           chains=args.chains, sampler=SamplerSettings(n_iters=args.iters), **source)
    cfg.save(args.out)
    print(f"wrote {args.out}")
    return EXIT_OK


def _apply_overrides(cfg: ExperimentConfig, args) -> ExperimentConfig:
    changes = {}
    if args.seed is not None:
        changes["seed"] = args.seed
    if args.chains is not None:
        changes["chains"] = args.chains
    if args.out is not None:
        changes["out"] = str(args.out)
    if args.iters is not None:
        changes["sampler"] = replace(cfg.sampler, n_iters=args.iters)
    return replace(cfg, **changes) if changes else cfg


def _report_fit(summary: dict) -> None:
    print(f"{'parameter':<12} {'MAP':>12} {'2.5%':>12} {'97.5%':>12} {'R-hat':>8}")
    for name in summary["names"]:
        lo, hi = summary["ci95"][name]
        print(f"{name:<12} {summary['map'][name]:>12.5g} {lo:>12.5g} {hi:>12.5g} {summary['rhat'][name]:>8.4f}")
    for stat, r2 in summary["r2"].items():
        print(f"Bayesian R^2 ({stat}): {r2['mean']:.4f}")


def cmd_fit(args) -> int:
    cfg = _apply_overrides(ExperimentConfig.load(args.config), args)
    res = fit(cfg, workers=args.workers)
    out = write_result(res, cfg.out)
    _report_fit(res.summary)
    print(f"results in {out}")
    if not res.converged:
        print(f"convergence not certified: max R-hat {res.summary['max_rhat']:.4f} >= 1.05", file=sys.stderr)
        return EXIT_UNCONVERGED
    return EXIT_OK


def cmd_reproduce(args) -> int:
    sampler = SamplerSettings(n_iters=args.iters)
    out, results = reproduce(args.target, args.seed, sampler, args.chains, args.out,
                             table1_n=tuple(args.n), workers=args.workers)
    bad = [job.name for job, res in results.items() if not res.converged]
    print(f"report in {out / 'report.csv'}")
    if bad:
        print("convergence not certified for: " + ", ".join(bad), file=sys.stderr)
        return EXIT_UNCONVERGED
    return EXIT_OK


def cmd_diagnose(args) -> int:
    report, ok = diagnose(args.result_dir)
    print(report)
    return EXIT_OK if ok else EXIT_UNCONVERGED


COMMANDS = {"generate": cmd_generate, "config": cmd_config, "fit": cmd_fit,
            "reproduce": cmd_reproduce, "diagnose": cmd_diagnose}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except NUMERIC_ERRORS as err:
        print(f"numeric failure: {err}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ConfigError, DatasetFormatError, ResultFormatError, ValueError, KeyError) as err:
        print(f"error: {err.args[0] if err.args else err}", file=sys.stderr)
        return EXIT_INPUT
    except OSError as err:
        print(f"I/O error: {err}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
