import dataclasses
import json

import numpy as np
import pytest

from softrl.envs import make_random_mdp
from softrl.errors import ParameterError
from softrl.mdp import LogPolicyTable
from softrl.soft_dp import boltzmann_policy, soft_value_iteration
from softrl.verify import (
    ToleranceProfile,
    check_dpo_collapse,
    check_lemma1,
    residual_equivalence_case,
    verify_all,
)


@pytest.fixture(scope="module")
def report():
    return verify_all(seed=0)


class TestVerifyAll:
    def test_default_profile_all_checks_pass(self, report):
        failing = [r.name for r in report.results if not r.passed]
        assert failing == []
        assert report.passed

    def test_every_check_reports_residual_and_tolerance(self, report):
        for result in report.results:
            assert result.tolerance > 0
            assert np.isfinite(result.residual)

    def test_json_report_round_trips(self, report):
        doc = json.loads(report.to_json())
        assert doc["passed"] is True
        assert len(doc["checks"]) == len(report.results)

    def test_repeated_runs_bit_identical(self, report):
        again = verify_all(seed=0)
        assert again.to_json() == report.to_json()

    def test_zero_tolerance_fails(self):
        zero = ToleranceProfile(**{
            f.name: 0.0 for f in dataclasses.fields(ToleranceProfile)
        })
        assert not check_lemma1(zero, seed=0).passed
        assert not check_dpo_collapse(zero, seed=0).passed


class TestFaultInjection:
    def test_corrupted_prior_row_is_named(self):
        mdp = make_random_mdp(4, 3, seed=0)
        alpha = 0.5
        prior = boltzmann_policy(soft_value_iteration(mdp, alpha)[0], alpha)
        probs = prior.probs()
        probs[2] = probs[2] * 0.9  # row 2 now sums to 0.9
        bad = LogPolicyTable.from_probs(probs)
        addon = np.zeros(mdp.shape)
        with pytest.raises(ParameterError) as err:
            residual_equivalence_case(mdp, addon, bad, alpha, alpha)
        assert "row 2" in str(err.value)

    def test_valid_prior_passes_the_same_path(self):
        mdp = make_random_mdp(4, 3, seed=0)
        alpha = 0.5
        prior = boltzmann_policy(soft_value_iteration(mdp, alpha)[0], alpha)
        addon = np.zeros(mdp.shape)
        tv = residual_equivalence_case(mdp, addon, prior, alpha, alpha)
        assert tv <= 1e-6
