"""Command-line entry point.

Subcommands: ``solve`` (soft / residual value iteration), ``train`` (PPO
variants), ``customize`` (prior -> residual / kl / greedy fine-tuning),
``plan`` (tree search), ``verify`` (the oracle suite), and ``losses``
(preference objectives over a JSON file of examples). Global flags override
the corresponding config keys.

Exit codes: 0 success, 1 verification failure, 2 configuration error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .errors import ConfigError, SoftrlError
from .experiment import apply_overrides, load_config, run_experiment
from .preference import (
    PreferenceExample,
    cross_entropy_dpo_loss,
    decomposed_dpo_loss,
    dpo_implicit_reward,
    dpo_loss,
)
from .verify import ToleranceProfile, verify_all

LOSS_FNS = {
    "dpo": dpo_loss,
    "cross_entropy": cross_entropy_dpo_loss,
    "decomposed": decomposed_dpo_loss,
}


def _add_global_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", type=str, help="TOML experiment file")
    parser.add_argument("--seed", type=int, help="run a single seed")
    parser.add_argument("--out", type=str, help="output directory")
    parser.add_argument("--alpha", type=float, help="entropy coefficient")
    parser.add_argument("--alpha-hat", dest="alpha_hat", type=float,
                        help="new-task entropy coefficient")
    parser.add_argument("--omega-prime", dest="omega_prime", type=float,
                        help="prior-weight augmentation coefficient")
    parser.add_argument("--gamma", type=float, help="discount factor")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="softrl")
    sub = parser.add_subparsers(dest="command", required=True)

    for name, desc in (
        ("solve", "soft or residual value iteration on the configured env"),
        ("train", "train the configured PPO variant"),
        ("customize", "fine-tune a soft-optimal prior toward an add-on reward"),
    ):
        p = sub.add_parser(name, help=desc)
        _add_global_flags(p)
        if name == "customize":
            p.add_argument("--mode", choices=("residual", "kl", "greedy"),
                           default="residual")

    p = sub.add_parser("plan", help="tree search from the env's start state")
    _add_global_flags(p)
    p.add_argument("--flavor", choices=("ucb", "maxent", "residual"))
    p.add_argument("--tau", type=float, help="search temperature")
    p.add_argument("--k", type=float, help="prior weight (residual flavor)")
    p.add_argument("--epsilon", type=float, help="selection mixing parameter")
    p.add_argument("--iters", type=int, help="search iterations")

    p = sub.add_parser("verify", help="run the cross-module oracle checks")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", type=str, help="write the JSON report here")

    p = sub.add_parser("losses", help="evaluate a preference loss on JSON examples")
    p.add_argument("examples", type=str, help="JSON array of example records")
    p.add_argument("--loss", choices=sorted(LOSS_FNS) + ["implicit_reward"],
                   default="dpo")
    return parser


def _load_and_override(args, extra: dict | None = None):
    if not args.config:
        raise ConfigError(["--config is required for this command"])
    config = load_config(args.config)
    overrides = {
        "seed": args.seed,
        "out": args.out,
        "alpha": args.alpha,
        "alpha_hat": args.alpha_hat,
        "omega_prime": args.omega_prime,
        "gamma": args.gamma,
    }
    overrides.update(extra or {})
    return apply_overrides(config, overrides)


def _cmd_run(args, extra: dict | None = None) -> int:
    config = _load_and_override(args, extra)
    out = run_experiment(config)
    print(f"wrote {out}")
    return 0


def _cmd_verify(args) -> int:
    report = verify_all(ToleranceProfile(), seed=args.seed)
    for result in report.results:
        status = "PASS" if result.passed else "FAIL"
        print(f"{status} {result.name}: residual={result.residual:.3e} "
              f"tol={result.tolerance:.1e} ({result.detail})")
    if args.out:
        Path(args.out).write_text(report.to_json())
    return 0 if report.passed else 1


def _cmd_losses(args) -> int:
    records = json.loads(Path(args.examples).read_text())
    values = []
    for i, rec in enumerate(records):
        if args.loss == "implicit_reward":
            value = dpo_implicit_reward(
                rec["logp_theta_w"], rec["logp_prior_w"], rec.get("beta", 1.0)
            )
        else:
            value = LOSS_FNS[args.loss](PreferenceExample(**rec))
        values.append(value)
        print(f"example {i}: {value!r}")
    if values:
        print(f"mean: {sum(values) / len(values)!r}")
    return 0


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "verify":
            return _cmd_verify(args)
        if args.command == "losses":
            return _cmd_losses(args)
        if args.command == "customize":
            method = {"residual": "residual_ppo", "kl": "kl_ppo",
                      "greedy": "greedy_ppo"}[args.mode]
            config = _load_and_override(args)
            config.method = method
            out = run_experiment(config)
            print(f"wrote {out}")
            return 0
        if args.command == "plan":
            extra = {
                "flavor": args.flavor, "tau": args.tau, "k": args.k,
                "epsilon": args.epsilon,
            }
            config = _load_and_override(args, extra)
            config.method = "mcts"
            if args.iters is not None:
                config.iterations = args.iters
            out = run_experiment(config)
            print(f"wrote {out}")
            return 0
        return _cmd_run(args)
    except ConfigError as exc:
        for violation in exc.violations:
            print(f"config error: {violation}", file=sys.stderr)
        return 2
    except SoftrlError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
