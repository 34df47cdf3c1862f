"""Monte-Carlo tree search over deterministic transition models.

Three flavors share one loop (select, expand, evaluate, backprop):

* ``ucb``      — classic UCT: children scored by mean return plus the
                 c * sqrt(2 ln C_parent / C_child) bonus; node values are
                 running sums of full-path returns.
* ``maxent``   — node values are soft Q estimates; selection samples from an
                 epsilon-mixed softmax of child values, and backpropagation
                 recomputes each ancestor as
                 Q(n) = r(n) + gamma * tau * logsumexp(Q(children) / tau).
* ``residual`` — max-ent search against a prior policy: the prior's
                 log-probabilities join the child values both in the selection
                 softmax and inside the backup log-sum-exp, so the search
                 plans on the customization objective without the prior's
                 reward.

The max-ent backups recompute values from children on every visit rather than
averaging, so visit counts drive exploration only; once a subtree is fully
expanded its values are exact, and on a finite tree the whole search converges
to the bottom-up soft recursion (:func:`exact_tree_soft_values`).

The selection mixing weight epsilon * |A| / log(1 + sum of child visits)
exceeds 1 early on; it is clamped to [0, 1].
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.special import logsumexp

from .errors import ContractError, ParameterError
from .mdp import TabularMdp


@dataclass(frozen=True)
class DeterministicTreeModel:
    """An explicit finite tree: per-state action lists of (next_state, reward).

    States with no outgoing actions are terminal and carry a terminal value
    (default 0). Transitions are deterministic by construction.
    """

    transitions: dict
    root: int = 0
    terminal_values: dict = field(default_factory=dict)
    state_labels: dict = field(default_factory=dict)  # tree node -> source label

    def root_state(self) -> int:
        return self.root

    def num_actions(self, state: int) -> int:
        return len(self.transitions.get(state, ()))

    def is_terminal(self, state: int) -> bool:
        return self.num_actions(state) == 0

    def step(self, state: int, action: int) -> tuple[int, float]:
        return self.transitions[state][action]

    def terminal_value(self, state: int) -> float:
        return float(self.terminal_values.get(state, 0.0))

    def all_states(self) -> list[int]:
        seen = []
        stack = [self.root]
        while stack:
            s = stack.pop()
            seen.append(s)
            for s2, _ in reversed(self.transitions.get(s, ())):
                stack.append(s2)
        return seen


def make_random_tree(
    depth: int, branching: int, seed: int, reward_scale: float = 1.0
) -> DeterministicTreeModel:
    """A complete tree of the given depth with seeded uniform edge rewards."""
    if depth < 1 or branching < 1:
        raise ParameterError("depth and branching must be >= 1")
    rng = np.random.default_rng(seed)
    transitions: dict[int, tuple] = {}
    next_id = 1
    frontier = [(0, 0)]
    while frontier:
        state, d = frontier.pop(0)
        if d == depth:
            continue
        edges = []
        for _ in range(branching):
            child = next_id
            next_id += 1
            reward = float(rng.uniform(-reward_scale, reward_scale))
            edges.append((child, reward))
            frontier.append((child, d + 1))
        transitions[state] = tuple(edges)
    return DeterministicTreeModel(transitions=transitions)


def tree_from_mdp(mdp: TabularMdp, start_state: int, depth: int) -> DeterministicTreeModel:
    """Unroll a deterministic MDP into a depth-limited tree.

    Every kernel row must be one-hot; stochastic rows are a contract
    violation. Nodes at the depth limit are terminal with value 0.
    """
    deterministic = np.all((mdp.transition == 0.0) | (mdp.transition == 1.0))
    if not deterministic:
        raise ContractError("tree search requires a deterministic transition kernel")
    next_of = mdp.transition.argmax(axis=2)
    transitions: dict[int, tuple] = {}
    labels = {0: start_state}
    next_id = 1
    frontier = [(0, start_state, 0)]
    while frontier:
        node, s, d = frontier.pop(0)
        if d == depth:
            continue
        edges = []
        for a in range(mdp.num_actions):
            child = next_id
            next_id += 1
            s2 = int(next_of[s, a])
            labels[child] = s2
            edges.append((child, float(mdp.reward[s, a])))
            frontier.append((child, s2, d + 1))
        transitions[node] = tuple(edges)
    return DeterministicTreeModel(transitions=transitions, state_labels=labels)


@dataclass(frozen=True)
class SearchConfig:
    flavor: str = "maxent"
    exploration_c: float = 1.0
    epsilon: float = 0.1
    tau: float = 1.0
    prior_weight: float = 1.0
    max_iterations: int = 1000
    gamma: float = 1.0
    prior_log_probs: Callable[[int], np.ndarray] | None = None

    def __post_init__(self):
        if self.flavor not in ("ucb", "maxent", "residual"):
            raise ParameterError(f"unknown search flavor {self.flavor!r}")
        if self.tau <= 0:
            raise ParameterError(f"tau must be > 0, got {self.tau}")
        if self.flavor == "residual" and self.prior_log_probs is None:
            raise ParameterError("residual flavor needs prior_log_probs")


class SearchNode:
    """One node of the search tree.

    ``value`` is a running sum of returns for the ucb flavor and a soft Q
    estimate for the max-ent flavors. ``reward`` is the immediate reward
    collected on entering the node; ``prior_log_prob`` is the prior's
    log-probability of the edge that leads here (residual flavor only).
    """

    __slots__ = (
        "state", "parent", "action", "reward", "prior_log_prob",
        "children", "untried", "visit_count", "value", "depth",
    )

    def __init__(self, state, parent=None, action=None, reward=0.0, prior_log_prob=0.0):
        self.state = state
        self.parent = parent
        self.action = action
        self.reward = float(reward)
        self.prior_log_prob = float(prior_log_prob)
        self.children: list[SearchNode] = []
        self.untried: list[int] = []
        self.visit_count = 0
        self.value = 0.0
        self.depth = 0 if parent is None else parent.depth + 1

    def fully_expanded(self) -> bool:
        return not self.untried and bool(self.children)


def _child_scores(node: SearchNode, cfg: SearchConfig) -> np.ndarray:
    q = np.array([c.value for c in node.children])
    scores = q / cfg.tau
    if cfg.flavor == "residual":
        scores = scores + cfg.prior_weight * np.array(
            [c.prior_log_prob for c in node.children]
        )
    return scores


def selection_distribution(node: SearchNode, cfg: SearchConfig) -> np.ndarray:
    """The epsilon-mixed softmax the max-ent flavors sample children from."""
    scores = _child_scores(node, cfg)
    p = np.exp(scores - logsumexp(scores))
    n_actions = len(node.children)
    total_visits = sum(c.visit_count for c in node.children)
    mix = cfg.epsilon * n_actions / np.log1p(total_visits) if total_visits > 0 else 1.0
    mix = min(max(mix, 0.0), 1.0)
    return (1.0 - mix) * p + mix / n_actions


def select_child(node: SearchNode, cfg: SearchConfig, rng: np.random.Generator) -> SearchNode:
    """Pick a child of a fully expanded node.

    ucb returns the deterministic argmax of mean value plus exploration bonus
    (ties to the lowest action index, unvisited children first); the max-ent
    flavors sample from :func:`selection_distribution`.
    """
    if not node.fully_expanded():
        raise ContractError("select_child requires a fully expanded node")
    if cfg.flavor == "ucb":
        best, best_score = None, -np.inf
        for child in node.children:
            if child.visit_count == 0:
                return child
            score = child.value / child.visit_count + cfg.exploration_c * np.sqrt(
                2.0 * np.log(node.visit_count) / child.visit_count
            )
            if score > best_score:
                best, best_score = child, score
        return best
    p = selection_distribution(node, cfg)
    return node.children[int(rng.choice(len(p), p=p / p.sum()))]


def expand(node: SearchNode, model, cfg: SearchConfig) -> SearchNode:
    """Attach one untried action as a new child; terminal nodes return themselves."""
    if model.is_terminal(node.state):
        return node
    if not node.children and not node.untried:
        node.untried = list(range(model.num_actions(node.state)))
    if not node.untried:
        raise ContractError("expand called on a fully expanded node")
    action = node.untried.pop(0)
    next_state, reward = model.step(node.state, action)
    prior_lp = 0.0
    if cfg.prior_log_probs is not None:
        prior_lp = float(cfg.prior_log_probs(node.state)[action])
    child = SearchNode(next_state, parent=node, action=action, reward=reward,
                       prior_log_prob=prior_lp)
    node.children.append(child)
    return child


def _rollout(state, model, cfg: SearchConfig, rng: np.random.Generator) -> float:
    value = 0.0
    discount = 1.0
    while not model.is_terminal(state):
        action = int(rng.integers(model.num_actions(state)))
        state, reward = model.step(state, action)
        value += discount * reward
        discount *= cfg.gamma
    return value + discount * model.terminal_value(state)


def evaluate(node: SearchNode, model, cfg: SearchConfig, rng: np.random.Generator) -> float:
    """Return estimate assigned to a freshly reached node.

    ucb scores the complete root-to-terminal trajectory; the max-ent flavors
    score arrival at the node itself (entry reward plus discounted
    continuation), matching the soft backup's notion of Q.
    """
    if model.is_terminal(node.state):
        continuation = model.terminal_value(node.state)
    else:
        continuation = _rollout(node.state, model, cfg, rng)
    local = node.reward + cfg.gamma * continuation
    if cfg.flavor != "ucb":
        return local
    value = 0.0
    steps = []
    walk = node
    while walk.parent is not None:
        steps.append(walk.reward)
        walk = walk.parent
    for t, reward in enumerate(reversed(steps[1:])):
        value += (cfg.gamma**t) * reward
    return value + (cfg.gamma ** max(node.depth - 1, 0)) * local


def backprop(node: SearchNode, value: float, cfg: SearchConfig) -> None:
    """Write a new evaluation into the tree.

    ucb accumulates the return into every node on the path. The max-ent
    flavors overwrite the evaluated node, then recompute each ancestor from
    its children: Q(n) = r(n) + gamma * tau * logsumexp(Q(children)/tau
    [+ prior term]); values therefore do not depend on visit counts.
    """
    if cfg.flavor == "ucb":
        while node is not None:
            node.visit_count += 1
            node.value += value
            node = node.parent
        return
    node.value = value
    node.visit_count += 1
    node = node.parent
    while node is not None:
        node.visit_count += 1
        scores = _child_scores(node, cfg)
        node.value = node.reward + cfg.gamma * cfg.tau * logsumexp(scores)
        node = node.parent


def run_search(model, cfg: SearchConfig, seed: int) -> SearchNode:
    """Build a search tree from the model's root; returns the root node."""
    if not getattr(model, "step", None):
        raise ContractError("model must expose step/is_terminal/num_actions")
    rng = np.random.default_rng(seed)
    root = SearchNode(model.root_state())
    for _ in range(cfg.max_iterations):
        node = root
        while not model.is_terminal(node.state) and node.fully_expanded():
            node = select_child(node, cfg, rng)
        leaf = expand(node, model, cfg)
        value = evaluate(leaf, model, cfg, rng)
        backprop(leaf, value, cfg)
    return root


def extract_root_policy(root: SearchNode, cfg: SearchConfig) -> np.ndarray:
    """Action distribution at the root: one-hot argmax of mean value for ucb,
    softmax of (soft) child values for the max-ent flavors."""
    if not root.fully_expanded():
        raise ContractError("extract_root_policy requires a fully expanded root")
    order = np.argsort([c.action for c in root.children])
    children = [root.children[i] for i in order]
    if cfg.flavor == "ucb":
        means = np.array([c.value / max(c.visit_count, 1) for c in children])
        policy = np.zeros(len(children))
        policy[int(np.argmax(means))] = 1.0
        return policy
    ordered = SearchNode(root.state)
    ordered.children = children
    scores = _child_scores(ordered, cfg)
    return np.exp(scores - logsumexp(scores))


def tree_is_fully_expanded(root: SearchNode, model) -> bool:
    stack = [root]
    while stack:
        node = stack.pop()
        if model.is_terminal(node.state):
            continue
        if node.untried or len(node.children) != model.num_actions(node.state):
            return False
        if any(c.visit_count == 0 for c in node.children):
            return False
        stack.extend(node.children)
    return True


# --- Exact oracles on explicit trees ------------------------------------------


def exact_tree_soft_values(
    model: DeterministicTreeModel,
    tau: float,
    gamma: float,
    prior_log_probs: Callable[[int], np.ndarray] | None = None,
    prior_weight: float = 0.0,
) -> dict:
    """Bottom-up soft values of a finite tree.

    Returns {state: (q_row, v)} with Q(s, a) = r(s, a) + gamma * (terminal
    value or V(s')) and V(s) = tau * logsumexp(Q(s, .)/tau [+ k log prior]).
    With a prior this is the residual recursion the residual search flavor
    converges to.
    """
    values: dict = {}

    def solve(state: int) -> float:
        if model.is_terminal(state):
            return model.terminal_value(state)
        q = np.empty(model.num_actions(state))
        for a in range(model.num_actions(state)):
            s2, r = model.step(state, a)
            q[a] = r + gamma * solve(s2)
        scores = q / tau
        if prior_log_probs is not None:
            scores = scores + prior_weight * np.asarray(prior_log_probs(state))
        v = tau * logsumexp(scores)
        values[state] = (q, float(v))
        return float(v)

    solve(model.root_state())
    return values


def accumulation_equivalence_check(
    model: DeterministicTreeModel, tau: float, tol: float = 1e-9
) -> bool:
    """Confirm that delivering all path reward at the leaves changes nothing.

    Builds both conventions on the same tree: the step-by-step soft recursion,
    and the accumulated one where each leaf edge carries the whole root-to-leaf
    reward sum and interior edges carry none. Per-node softmax policies must
    coincide, and the accumulated state values must equal the step-by-step
    values shifted by the reward collected on the way in. Undiscounted sums.
    """
    step = exact_tree_soft_values(model, tau, gamma=1.0)

    acc_values: dict = {}

    def solve_acc(state: int, path_reward: float) -> float:
        q = np.empty(model.num_actions(state))
        for a in range(model.num_actions(state)):
            s2, r = model.step(state, a)
            if model.is_terminal(s2):
                q[a] = path_reward + r + model.terminal_value(s2)
            else:
                q[a] = solve_acc(s2, path_reward + r)
        v = tau * logsumexp(q / tau)
        acc_values[state] = (q, float(v), path_reward)
        return float(v)

    solve_acc(model.root_state(), 0.0)

    for state, (q_acc, v_acc, path_reward) in acc_values.items():
        q_step, v_step = step[state]
        p_step = np.exp(q_step / tau - logsumexp(q_step / tau))
        p_acc = np.exp(q_acc / tau - logsumexp(q_acc / tau))
        if np.max(np.abs(p_step - p_acc)) > tol:
            return False
        if abs(v_acc - (v_step + path_reward)) > tol:
            return False
    return True
