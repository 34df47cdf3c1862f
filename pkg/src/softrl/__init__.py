"""softrl: maximum-entropy RL and policy customization on solvable MDPs.

The package pairs every learning component (gradient estimators, PPO
trainers, tree search) with an exact soft dynamic-programming oracle, so each
derivation can be checked numerically rather than trusted.
"""

from .envs import (
    GaussianBanditSpec,
    GridWorldSpec,
    gaussian_bandit_objective,
    grid_state,
    make_chain,
    make_gridworld,
    make_random_mdp,
)
from .estimators import (
    EstimatorConfig,
    estimate_gradient,
    exact_soft_gradient,
    exact_soft_objective,
    ppo_clip_objective,
    score_function_expectation,
)
from .mcts import (
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
from .mdp import (
    CustomizationSpec,
    LogPolicyTable,
    TabularMdp,
    augment_mdp,
    mdp_from_json,
    mdp_to_json,
    policy_total_variation,
    validate_mdp,
)
from .policies import (
    DiagonalGaussianPolicy,
    TabularSoftmaxPolicy,
    finite_difference_gradient,
)
from .ppo import (
    PpoParams,
    TrainResult,
    train_residual_ppo,
    train_soft_ppo,
)
from .preference import (
    PreferenceExample,
    cross_entropy_dpo_loss,
    decomposed_dpo_loss,
    dpo_implicit_reward,
    dpo_loss,
    log_sigmoid,
)
from .soft_dp import (
    SoftQTable,
    SoftValueTable,
    boltzmann_policy,
    customized_policy_from_residual,
    lemma1_transform,
    lemma2_shaped_reward,
    residual_soft_q_backup,
    residual_soft_q_iteration,
    soft_bellman_backup,
    soft_policy_evaluation,
    soft_state_values,
    soft_value_iteration,
    temperature_rescale_check,
    temperature_rescale_residuals,
)
from .trajectories import (
    Trajectory,
    TrajectoryBatch,
    batch_to_csv,
    compute_advantages,
    enumerate_trajectories,
    sample_trajectories,
    soft_return,
)
from .verify import ToleranceProfile, VerifyReport, verify_all

__version__ = "0.1.0"
