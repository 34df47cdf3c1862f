"""Experiment configuration, execution, and persistence.

Experiments are described by a TOML document with three tables:

    [experiment]   method, seeds, iterations, out
    [env]          kind = "gridworld" | "chain" | "random" plus its fields
    [params]       alpha, alpha_hat, omega, ..., PPO and search knobs

Unknown keys anywhere are rejected, and every violation is reported at once.
A run writes one ``seed_<n>/`` directory per seed containing a metrics CSV and
a final checkpoint, plus a ``summary.json`` aggregating final metrics as
mean +/- population std across seeds. Runs are bit-deterministic: same config
and seeds, same bytes.
"""

from __future__ import annotations

import json
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .envs import GridWorldSpec, make_chain, make_gridworld, make_random_mdp
from .errors import CheckpointError, ConfigError
from .mcts import SearchConfig, extract_root_policy, run_search, tree_from_mdp
from .mdp import CustomizationSpec, TabularMdp
from .policies import DiagonalGaussianPolicy, TabularSoftmaxPolicy
from .ppo import PpoParams, train_residual_ppo, train_soft_ppo
from .soft_dp import (
    boltzmann_policy,
    residual_soft_q_iteration,
    customized_policy_from_residual,
    soft_value_iteration,
)

METHODS = (
    "soft_ppo", "residual_ppo", "kl_ppo", "greedy_ppo",
    "soft_vi", "residual_vi", "mcts",
)

_EXPERIMENT_KEYS = {"method", "seeds", "iterations", "out"}
_ENV_KEYS = {
    "gridworld": {
        "kind", "width", "height", "goal", "goal_reward", "step_cost",
        "addon_kind", "addon_magnitude", "gamma",
    },
    "chain": {"kind", "n", "slip", "gamma"},
    "random": {"kind", "n_states", "n_actions", "seed", "reward_scale", "gamma",
               "addon_scale"},
}
_PARAM_KEYS = {
    "alpha", "alpha_hat", "omega", "omega_prime", "gamma", "eps_clip",
    "tau", "k", "c", "epsilon", "depth", "flavor", "horizon", "batch_size",
    "step_size", "epochs", "minibatch_size", "value_lr", "value_sweeps",
    "warmup_frac", "gae_lambda", "normalize_advantages", "use_adam",
    "start_state", "tol", "max_iters",
}
_METHOD_REQUIRES = {
    "soft_ppo": {"alpha"},
    "residual_ppo": {"alpha", "alpha_hat"},
    "kl_ppo": {"alpha", "alpha_hat"},
    "greedy_ppo": {"alpha", "alpha_hat"},
    "soft_vi": {"alpha"},
    "residual_vi": {"alpha", "alpha_hat"},
    "mcts": {"tau", "depth", "flavor"},
}


@dataclass
class ExperimentConfig:
    method: str
    seeds: list[int]
    iterations: int = 0
    out: str | None = None
    env: dict = field(default_factory=dict)
    params: dict = field(default_factory=dict)

    def validate(self) -> list[str]:
        errors = []
        if self.method not in METHODS:
            errors.append(f"experiment.method: unknown method {self.method!r}")
        if not self.seeds:
            errors.append("experiment.seeds: at least one seed is required")
        if self.iterations < 0:
            errors.append("experiment.iterations: must be >= 0")
        kind = self.env.get("kind")
        if kind not in _ENV_KEYS:
            errors.append(f"env.kind: unknown environment {kind!r}")
        else:
            for key in sorted(set(self.env) - _ENV_KEYS[kind]):
                errors.append(f"env.{key}: unknown key for kind {kind!r}")
        for key in sorted(set(self.params) - _PARAM_KEYS):
            errors.append(f"params.{key}: unknown key")
        for key in sorted(_METHOD_REQUIRES.get(self.method, set()) - set(self.params)):
            errors.append(f"params.{key}: required by method {self.method!r}")
        return errors


def load_config(path_or_text: str | Path, is_text: bool = False) -> ExperimentConfig:
    """Parse and validate a TOML experiment file; raises ConfigError listing
    every violated key."""
    if is_text:
        doc = tomllib.loads(str(path_or_text))
    else:
        with open(path_or_text, "rb") as fh:
            doc = tomllib.load(fh)
    unknown_tables = sorted(set(doc) - {"experiment", "env", "params"})
    errors = [f"{t}: unknown table" for t in unknown_tables]
    exp = doc.get("experiment", {})
    errors += [f"experiment.{k}: unknown key" for k in sorted(set(exp) - _EXPERIMENT_KEYS)]
    if "method" not in exp:
        errors.append("experiment.method: missing")
    if "seeds" not in exp:
        errors.append("experiment.seeds: missing")
    if errors:
        raise ConfigError(errors)
    config = ExperimentConfig(
        method=exp["method"],
        seeds=[int(s) for s in exp["seeds"]],
        iterations=int(exp.get("iterations", 0)),
        out=exp.get("out"),
        env=dict(doc.get("env", {})),
        params=dict(doc.get("params", {})),
    )
    errors = config.validate()
    if errors:
        raise ConfigError(errors)
    return config


def apply_overrides(config: ExperimentConfig, overrides: dict) -> ExperimentConfig:
    """CLI flags override config keys; None values are ignored."""
    for key, value in overrides.items():
        if value is None:
            continue
        if key == "seed":
            config.seeds = [int(value)]
        elif key == "out":
            config.out = str(value)
        elif key == "gamma":
            config.env["gamma"] = float(value)
        else:
            config.params[key] = value
    errors = config.validate()
    if errors:
        raise ConfigError(errors)
    return config


def build_env(config: ExperimentConfig) -> tuple[TabularMdp, np.ndarray]:
    """Instantiate the configured environment; returns (mdp, addon_reward)."""
    env = dict(config.env)
    kind = env.pop("kind")
    if kind == "gridworld":
        if "goal" in env:
            env["goal"] = tuple(env["goal"])
        spec = GridWorldSpec(**env)
        return make_gridworld(spec)
    if kind == "chain":
        mdp = make_chain(env.get("n", 5), env.get("slip", 0.0), env.get("gamma", 0.9))
        return mdp, np.zeros(mdp.shape)
    mdp = make_random_mdp(
        env.get("n_states", 4), env.get("n_actions", 3), env.get("seed", 0),
        env.get("reward_scale", 1.0), env.get("gamma", 0.9),
    )
    addon_scale = env.get("addon_scale", 0.0)
    rng = np.random.default_rng([env.get("seed", 0), 1])
    addon = rng.uniform(-addon_scale, addon_scale, size=mdp.shape)
    return mdp, addon


def _ppo_params(params: dict) -> PpoParams:
    keys = (
        "eps_clip", "epochs", "minibatch_size", "step_size", "batch_size",
        "horizon", "value_lr", "value_sweeps", "warmup_frac", "gae_lambda",
        "normalize_advantages", "use_adam",
    )
    return PpoParams(**{k: params[k] for k in keys if k in params})


# --- Checkpoints ---------------------------------------------------------------


def _f2s(x: float) -> str:
    return format(float(x), ".17g")


def save_checkpoint(path: str | Path, policy, config: dict | None = None) -> None:
    """Write policy parameters as 17-significant-digit decimal strings, which
    round-trip IEEE doubles bit-exactly."""
    if isinstance(policy, TabularSoftmaxPolicy):
        doc = {
            "schema_version": 1,
            "kind": "tabular_softmax",
            "num_states": policy.num_states,
            "num_actions": policy.num_actions,
            "logits": [_f2s(x) for x in policy.logits.ravel()],
        }
    elif isinstance(policy, DiagonalGaussianPolicy):
        doc = {
            "schema_version": 1,
            "kind": "diagonal_gaussian",
            "num_states": policy.num_states,
            "action_dim": policy.action_dim,
            "global_std": policy.global_std,
            "mean": [_f2s(x) for x in policy.mean.ravel()],
            "log_std": [_f2s(x) for x in policy.log_std.ravel()],
        }
    else:
        raise CheckpointError(f"cannot checkpoint policy of type {type(policy).__name__}")
    doc["config"] = config or {}
    Path(path).write_text(json.dumps(doc, sort_keys=True, indent=1))


def load_checkpoint(path: str | Path):
    """Read a checkpoint back; returns (policy, config dict).

    Malformed JSON raises :class:`CheckpointError` carrying the byte offset of
    the first bad character; no partial state is ever constructed.
    """
    text = Path(path).read_text()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise CheckpointError(
            f"checkpoint parse error at byte {exc.pos}: {exc.msg}", offset=exc.pos
        ) from exc
    try:
        kind = doc["kind"]
        if kind == "tabular_softmax":
            s, a = int(doc["num_states"]), int(doc["num_actions"])
            logits = np.array([float(x) for x in doc["logits"]]).reshape(s, a)
            return TabularSoftmaxPolicy(logits), doc.get("config", {})
        if kind == "diagonal_gaussian":
            s, d = int(doc["num_states"]), int(doc["action_dim"])
            mean = np.array([float(x) for x in doc["mean"]]).reshape(s, d)
            log_std = np.array([float(x) for x in doc["log_std"]])
            if not doc["global_std"]:
                log_std = log_std.reshape(s, d)
            return DiagonalGaussianPolicy(mean, log_std, doc["global_std"]), doc.get("config", {})
        raise CheckpointError(f"unknown checkpoint kind {kind!r}")
    except (KeyError, ValueError) as exc:
        raise CheckpointError(f"malformed checkpoint: {exc}") from exc


# --- Runner ---------------------------------------------------------------------


def _summarize(final_rows: list[dict]) -> dict:
    """mean +/- population std of the final metric row across seeds."""
    summary = {"num_seeds": len(final_rows)}
    if not final_rows:
        return summary
    for key in ("exact_j", "total_reward", "basic_reward", "addon_reward"):
        values = np.array([row[key] for row in final_rows])
        summary[key] = {
            "mean": repr(float(values.mean())),
            "std": repr(float(values.std(ddof=0))),
        }
    return summary


def _run_ppo_method(config: ExperimentConfig, mdp, addon, out: Path) -> dict:
    params = config.params
    ppo = _ppo_params(params)
    alpha = float(params["alpha"])
    start_state = int(params.get("start_state", 0))
    final_rows = []
    for seed in config.seeds:
        if config.method == "soft_ppo":
            policy = TabularSoftmaxPolicy.uniform(mdp.num_states, mdp.num_actions)
            result = train_soft_ppo(
                mdp, policy, alpha, mdp.gamma, ppo, config.iterations, seed,
                start_state=start_state,
            )
        else:
            q_star, _ = soft_value_iteration(mdp, alpha)
            prior = boltzmann_policy(q_star, alpha)
            spec = CustomizationSpec(
                addon_reward=addon,
                prior_weight=float(params.get("omega", 1.0)),
                prior_entropy_coeff=alpha,
                new_entropy_coeff=float(params["alpha_hat"]),
                augment_coeff=params.get("omega_prime"),
            )
            mode = {"residual_ppo": "residual", "kl_ppo": "kl", "greedy_ppo": "greedy"}
            result = train_residual_ppo(
                mdp, prior, spec, ppo, config.iterations, seed,
                mode=mode[config.method], start_state=start_state,
            )
        seed_dir = out / f"seed_{seed}"
        seed_dir.mkdir(parents=True, exist_ok=True)
        (seed_dir / "metrics.csv").write_text(result.metrics_csv())
        save_checkpoint(
            seed_dir / "checkpoint.json", result.policy,
            {"method": config.method, "seed": seed},
        )
        if result.metrics:
            final_rows.append(result.metrics[-1])
    return _summarize(final_rows)


def _solution_doc(mdp, q, policy) -> dict:
    return {
        "q": [_f2s(x) for x in q.q.ravel()],
        "num_states": mdp.num_states,
        "num_actions": mdp.num_actions,
        "policy_log_probs": [_f2s(x) for x in policy.log_probs.ravel()],
    }


def _run_vi_method(config: ExperimentConfig, mdp, addon, out: Path) -> dict:
    params = config.params
    alpha = float(params["alpha"])
    tol = float(params.get("tol", 1e-10))
    max_iters = int(params.get("max_iters", 100_000))
    if config.method == "soft_vi":
        q, v = soft_value_iteration(mdp, alpha, tol, max_iters)
        policy = boltzmann_policy(q, alpha)
        doc = _solution_doc(mdp, q, policy)
        doc["v"] = [_f2s(x) for x in v.v]
    else:
        alpha_hat = float(params["alpha_hat"])
        omega = float(params.get("omega", 1.0))
        omega_prime = params.get("omega_prime", omega * alpha)
        q_star, _ = soft_value_iteration(mdp, alpha, tol, max_iters)
        prior = boltzmann_policy(q_star, alpha)
        q_r = residual_soft_q_iteration(
            prior, addon, mdp, float(omega_prime), alpha_hat, tol, max_iters
        )
        policy = customized_policy_from_residual(q_r, prior, float(omega_prime), alpha_hat)
        doc = _solution_doc(mdp, q_r, policy)
        doc["prior_log_probs"] = [_f2s(x) for x in prior.log_probs.ravel()]
    (out / "solution.json").write_text(json.dumps(doc, sort_keys=True, indent=1))
    return {"num_seeds": len(config.seeds)}


def _run_mcts_method(config: ExperimentConfig, mdp, addon, out: Path) -> dict:
    params = config.params
    depth = int(params["depth"])
    start_state = int(params.get("start_state", 0))
    model = tree_from_mdp(mdp, start_state, depth)
    prior_fn = None
    if params["flavor"] == "residual":
        alpha = float(params.get("alpha", params["tau"]))
        q_star, _ = soft_value_iteration(mdp, alpha)
        prior = boltzmann_policy(q_star, alpha)
        labels = model.state_labels

        def prior_fn(node_state):
            return prior.log_probs[labels[node_state]]

    cfg = SearchConfig(
        flavor=params["flavor"],
        tau=float(params["tau"]),
        epsilon=float(params.get("epsilon", 0.1)),
        prior_weight=float(params.get("k", 1.0)),
        exploration_c=float(params.get("c", 1.0)),
        gamma=mdp.gamma,
        max_iterations=config.iterations or 1000,
        prior_log_probs=prior_fn,
    )
    for seed in config.seeds:
        root = run_search(model, cfg, seed)
        policy = extract_root_policy(root, cfg)
        levels: list[list[dict]] = []
        frontier = [root]
        while frontier:
            level = []
            nxt = []
            for node in frontier:
                level.append(
                    {
                        "state": model.state_labels.get(node.state, node.state),
                        "value": _f2s(node.value),
                        "visits": node.visit_count,
                    }
                )
                nxt.extend(node.children)
            levels.append(level)
            frontier = nxt
        doc = {
            "flavor": cfg.flavor,
            "root_policy": [_f2s(x) for x in policy],
            "levels": levels,
        }
        seed_dir = out / f"seed_{seed}"
        seed_dir.mkdir(parents=True, exist_ok=True)
        (seed_dir / "plan.json").write_text(json.dumps(doc, sort_keys=True, indent=1))
    return {"num_seeds": len(config.seeds)}


def run_experiment(config: ExperimentConfig, out_dir: str | Path | None = None) -> Path:
    """Execute a validated config; returns the output directory.

    Writes per-seed artifacts and a ``summary.json``. Aggregation is a
    separate idempotent pass over the final metric rows.
    """
    errors = config.validate()
    if errors:
        raise ConfigError(errors)
    out = Path(out_dir or config.out or "runs/experiment")
    out.mkdir(parents=True, exist_ok=True)
    mdp, addon = build_env(config)
    if config.method.endswith("_ppo"):
        summary = _run_ppo_method(config, mdp, addon, out)
    elif config.method.endswith("_vi"):
        summary = _run_vi_method(config, mdp, addon, out)
    else:
        summary = _run_mcts_method(config, mdp, addon, out)
    summary["method"] = config.method
    summary["seeds"] = config.seeds
    (out / "summary.json").write_text(json.dumps(summary, sort_keys=True, indent=1))
    return out
