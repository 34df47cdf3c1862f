import numpy as np
import pytest

from softrl.errors import ContractError
from softrl.envs import GridWorldSpec, make_gridworld
from softrl.mcts import (
    DeterministicTreeModel,
    SearchConfig,
    SearchNode,
    accumulation_equivalence_check,
    backprop,
    evaluate,
    exact_tree_soft_values,
    expand,
    extract_root_policy,
    make_random_tree,
    run_search,
    select_child,
    selection_distribution,
    tree_from_mdp,
    tree_is_fully_expanded,
)
from softrl.envs import make_random_mdp


def two_arm_bandit(r0=1.0, r1=0.0):
    return DeterministicTreeModel(transitions={0: ((1, r0), (2, r1))})


def build_expanded(model, cfg, seed=0):
    root = run_search(model, cfg, seed)
    assert tree_is_fully_expanded(root, model)
    return root


class TestSelectChild:
    def test_ucb_prefers_unvisited_child(self):
        model = two_arm_bandit()
        cfg = SearchConfig(flavor="ucb", max_iterations=1)
        root = SearchNode(0)
        first = expand(root, model, cfg)
        backprop(first, 1.0, cfg)
        second = expand(root, model, cfg)
        # second child never visited: selection must pick it
        rng = np.random.default_rng(0)
        assert select_child(root, cfg, rng) is second

    def test_unexpanded_node_is_contract_error(self):
        cfg = SearchConfig(flavor="ucb")
        with pytest.raises(ContractError):
            select_child(SearchNode(0), cfg, np.random.default_rng(0))

    def test_maxent_equal_values_sample_uniformly(self):
        model = two_arm_bandit(0.0, 0.0)
        cfg = SearchConfig(flavor="maxent", tau=1.0, epsilon=0.0,
                           max_iterations=10)
        root = build_expanded(model, cfg)
        rng = np.random.default_rng(1)
        draws = np.array([select_child(root, cfg, rng).action
                          for _ in range(10000)])
        assert np.mean(draws == 0) == pytest.approx(0.5, abs=0.02)

    def test_maxent_sampling_matches_mixing_formula(self):
        model = DeterministicTreeModel(
            transitions={0: ((1, 0.8), (2, 0.1), (3, -0.4))}
        )
        cfg = SearchConfig(flavor="maxent", tau=0.7, epsilon=0.3,
                           max_iterations=30)
        root = build_expanded(model, cfg)
        expected = selection_distribution(root, cfg)
        rng = np.random.default_rng(2)
        counts = np.zeros(3)
        for _ in range(10000):
            counts[select_child(root, cfg, rng).action] += 1
        np.testing.assert_allclose(counts / 10000, expected, atol=0.02)

    def test_residual_zero_q_selects_from_prior(self):
        prior = np.log(np.array([0.6, 0.3, 0.1]))
        model = DeterministicTreeModel(
            transitions={0: ((1, 0.0), (2, 0.0), (3, 0.0))}
        )
        cfg = SearchConfig(
            flavor="residual", tau=1.0, epsilon=0.0, prior_weight=1.0,
            max_iterations=10, prior_log_probs=lambda s: prior,
        )
        root = build_expanded(model, cfg)
        for child in root.children:
            child.value = 0.0  # pin Q to isolate the prior term
        rng = np.random.default_rng(3)
        counts = np.zeros(3)
        for _ in range(10000):
            counts[select_child(root, cfg, rng).action] += 1
        np.testing.assert_allclose(counts / 10000, np.exp(prior), atol=0.02)

    def test_mixing_weight_clamped(self):
        model = two_arm_bandit()
        cfg = SearchConfig(flavor="maxent", tau=1.0, epsilon=5.0,
                           max_iterations=10)
        root = build_expanded(model, cfg)
        p = selection_distribution(root, cfg)
        np.testing.assert_allclose(p, 0.5, atol=1e-12)  # fully mixed to uniform


class TestExpandEvaluate:
    def test_expand_adds_one_child_per_call(self):
        model = two_arm_bandit()
        cfg = SearchConfig(flavor="ucb")
        root = SearchNode(0)
        expand(root, model, cfg)
        assert len(root.children) == 1 and not root.fully_expanded()
        expand(root, model, cfg)
        assert len(root.children) == 2 and root.fully_expanded()
        with pytest.raises(ContractError):
            expand(root, model, cfg)

    def test_expanding_terminal_returns_node_itself(self):
        model = two_arm_bandit()
        cfg = SearchConfig(flavor="ucb")
        leaf = SearchNode(1)
        assert expand(leaf, model, cfg) is leaf

    def test_terminal_evaluate_is_exact(self):
        model = DeterministicTreeModel(
            transitions={0: ((1, 2.0),)}, terminal_values={1: 0.5}
        )
        cfg = SearchConfig(flavor="maxent", gamma=0.9)
        root = SearchNode(0)
        child = expand(root, model, cfg)
        value = evaluate(child, model, cfg, np.random.default_rng(0))
        assert value == pytest.approx(2.0 + 0.9 * 0.5, abs=1e-12)

    def test_depth_one_leaf_reward(self):
        model = two_arm_bandit(r0=1.25)
        cfg = SearchConfig(flavor="maxent", gamma=1.0)
        root = SearchNode(0)
        child = expand(root, model, cfg)
        value = evaluate(child, model, cfg, np.random.default_rng(0))
        assert value == pytest.approx(1.25, abs=1e-12)


class TestBackprop:
    def test_ucb_running_sum(self):
        model = two_arm_bandit()
        cfg = SearchConfig(flavor="ucb")
        root = SearchNode(0)
        child = expand(root, model, cfg)
        backprop(child, 1.0, cfg)
        backprop(child, 3.0, cfg)
        assert child.value == 4.0 and child.visit_count == 2
        assert child.value / child.visit_count == 2.0

    def test_maxent_logsumexp_recomputation(self):
        model = two_arm_bandit(0.0, 0.0)
        cfg = SearchConfig(flavor="maxent", tau=1.0, gamma=1.0,
                           max_iterations=10)
        root = build_expanded(model, cfg)
        assert root.value == pytest.approx(np.log(2.0), abs=1e-12)

    def test_residual_with_zero_weight_matches_maxent(self):
        model = make_random_tree(2, 2, seed=3)
        base = dict(tau=0.8, epsilon=0.3, gamma=1.0, max_iterations=200)
        cfg_m = SearchConfig(flavor="maxent", **base)
        cfg_r = SearchConfig(flavor="residual", prior_weight=0.0,
                             prior_log_probs=lambda s: np.zeros(2), **base)
        root_m = run_search(model, cfg_m, seed=5)
        root_r = run_search(model, cfg_r, seed=5)

        def values(node):
            out = [(node.depth, node.action, node.value, node.visit_count)]
            for c in node.children:
                out += values(c)
            return out

        assert values(root_m) == values(root_r)


class TestRunSearch:
    def test_depth_one_scalar_example(self):
        model = two_arm_bandit(1.0, 0.0)
        cfg = SearchConfig(flavor="maxent", tau=1.0, gamma=1.0,
                           max_iterations=50)
        root = build_expanded(model, cfg)
        q = sorted((c.action, c.value) for c in root.children)
        assert q[0][1] == pytest.approx(1.0, abs=1e-12)
        assert q[1][1] == pytest.approx(0.0, abs=1e-12)
        assert root.value == pytest.approx(np.log(np.e + 1.0), abs=1e-12)

    @pytest.mark.parametrize("seed", range(5))
    def test_full_expansion_matches_soft_recursion(self, seed):
        rng = np.random.default_rng(seed)
        depth = int(rng.integers(1, 4))
        model = make_random_tree(depth, 2, seed=seed + 100)
        tau = float(rng.uniform(0.4, 1.6))
        n = len(model.all_states())
        cfg = SearchConfig(flavor="maxent", tau=tau, epsilon=0.4, gamma=1.0,
                           max_iterations=100 * n)
        root = build_expanded(model, cfg, seed=seed)
        oracle = exact_tree_soft_values(model, tau, 1.0)
        found = np.array([c.value for c in
                          sorted(root.children, key=lambda c: c.action)])
        np.testing.assert_allclose(found, oracle[0][0], atol=1e-9)

    def test_discounted_tree_matches_recursion(self):
        model = make_random_tree(3, 2, seed=17)
        cfg = SearchConfig(flavor="maxent", tau=1.0, epsilon=0.4, gamma=0.9,
                           max_iterations=3000)
        root = build_expanded(model, cfg, seed=1)
        oracle = exact_tree_soft_values(model, 1.0, 0.9)
        found = np.array([c.value for c in
                          sorted(root.children, key=lambda c: c.action)])
        np.testing.assert_allclose(found, oracle[0][0], atol=1e-9)

    def test_residual_prior_recovery(self):
        model = make_random_tree(2, 3, seed=23)
        tau = 0.9
        oracle = exact_tree_soft_values(model, tau, 1.0)

        def prior_log_probs(state):
            q = oracle[state][0] / tau
            return q - (q.max() + np.log(np.exp(q - q.max()).sum()))

        zero = DeterministicTreeModel(
            transitions={s: tuple((s2, 0.0) for s2, _ in e)
                         for s, e in model.transitions.items()},
        )
        cfg = SearchConfig(flavor="residual", tau=tau, epsilon=0.4, gamma=1.0,
                           prior_weight=1.0, max_iterations=4000,
                           prior_log_probs=prior_log_probs)
        root = build_expanded(zero, cfg, seed=2)
        extracted = extract_root_policy(root, cfg)
        target = np.exp(prior_log_probs(0))
        assert 0.5 * np.abs(extracted - target).sum() <= 1e-6

    def test_ucb_bandit_concentrates_on_best_arm(self):
        model = two_arm_bandit(1.0, 0.0)
        cfg = SearchConfig(flavor="ucb", exploration_c=1.0, gamma=1.0,
                           max_iterations=1000)
        root = run_search(model, cfg, seed=0)
        best = next(c for c in root.children if c.action == 0)
        assert best.visit_count / 1000 > 0.9

    def test_stochastic_mdp_rejected(self):
        mdp = make_random_mdp(3, 2, seed=0)
        with pytest.raises(ContractError):
            tree_from_mdp(mdp, 0, depth=2)

    def test_gridworld_tree_plan(self):
        mdp, _ = make_gridworld(GridWorldSpec(width=3, height=3, goal=(2, 2)))
        model = tree_from_mdp(mdp, 0, depth=3)
        cfg = SearchConfig(flavor="maxent", tau=0.5, epsilon=0.4,
                           gamma=mdp.gamma, max_iterations=20000)
        root = build_expanded(model, cfg, seed=0)
        oracle = exact_tree_soft_values(model, 0.5, mdp.gamma)
        found = np.array([c.value for c in
                          sorted(root.children, key=lambda c: c.action)])
        np.testing.assert_allclose(found, oracle[0][0], atol=1e-9)


class TestExtractRootPolicy:
    def test_maxent_equal_children_uniform(self):
        model = two_arm_bandit(0.0, 0.0)
        cfg = SearchConfig(flavor="maxent", tau=1.0, max_iterations=20)
        root = build_expanded(model, cfg)
        np.testing.assert_allclose(extract_root_policy(root, cfg), 0.5,
                                   atol=1e-12)

    def test_maxent_logistic_example(self):
        model = two_arm_bandit(1.0, 0.0)
        cfg = SearchConfig(flavor="maxent", tau=1.0, gamma=1.0,
                           max_iterations=50)
        root = build_expanded(model, cfg)
        np.testing.assert_allclose(extract_root_policy(root, cfg),
                                   [0.73106, 0.26894], atol=5e-6)

    def test_ucb_one_hot_on_best_mean(self):
        model = two_arm_bandit(2.0, 1.0)
        cfg = SearchConfig(flavor="ucb", max_iterations=200)
        root = run_search(model, cfg, seed=0)
        np.testing.assert_array_equal(extract_root_policy(root, cfg), [1.0, 0.0])

    def test_unexpanded_root_is_contract_error(self):
        cfg = SearchConfig(flavor="maxent")
        with pytest.raises(ContractError):
            extract_root_policy(SearchNode(0), cfg)


class TestAccumulationEquivalence:
    def test_single_layer_tree(self):
        assert accumulation_equivalence_check(two_arm_bandit(0.7, -0.2), 1.0)

    def test_depth_two_random_trees(self):
        for seed in range(5):
            model = make_random_tree(2, 3, seed=seed)
            assert accumulation_equivalence_check(model, 0.8)

    def test_zero_reward_tree_uniform_policies(self):
        model = DeterministicTreeModel(
            transitions={0: ((1, 0.0), (2, 0.0)),
                         1: ((3, 0.0), (4, 0.0)),
                         2: ((5, 0.0), (6, 0.0))}
        )
        assert accumulation_equivalence_check(model, 1.0)
        values = exact_tree_soft_values(model, 1.0, 1.0)
        probs = np.exp(values[0][0] - values[0][1])
        np.testing.assert_allclose(probs, 0.5, atol=1e-12)
