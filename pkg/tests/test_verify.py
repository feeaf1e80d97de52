"""The check families: finite differences, collapse, saturation, likelihood identity."""

import math

import numpy as np
import pytest

from lht import ops
from lht.autodiff import Tensor
from lht.errors import NotConverged
from lht.verify import (
    FD_STEP,
    GRAD_TOL,
    CheckResult,
    central_difference,
    check_gradients,
    check_lambda_saturation,
    check_naive_collapse,
    check_nll_ce_identity,
    max_rel_err,
)

# Frozen extended-precision oracle: per-sample three-level loss of the
# constant-transition chain when every correct fine logit leads by 20.
MARGIN20_CHAIN_LOSS = 3.503961129044322e-08


class TestFiniteDifferenceHarness:
    def test_quadratic_gradient_to_high_precision(self):
        x0 = np.array([1.0, -2.0, 0.5, 3.0])
        numeric = central_difference(lambda x: float((x * x).sum()), x0)
        assert max_rel_err(2.0 * x0, numeric) < 1e-9

    def test_mask_skips_coordinates(self):
        x0 = np.array([1.0, 2.0, 3.0])
        numeric = central_difference(
            lambda x: float((x * x).sum()), x0, mask=np.array([True, False, True])
        )
        assert numeric[1] == 0.0
        assert numeric[0] == pytest.approx(2.0, rel=1e-9)

    def test_rel_err_floor_absorbs_rounding_noise(self):
        assert max_rel_err(np.zeros(3), np.full(3, 1e-11)) == pytest.approx(1e-5)
        assert max_rel_err(np.ones(3), np.ones(3)) == 0.0

    def test_rel_err_mask_and_empty(self):
        err = max_rel_err(
            np.array([1.0, 5.0]), np.array([1.0, 9.0]), mask=np.array([True, False])
        )
        assert err == 0.0
        assert max_rel_err(np.array([]), np.array([])) == 0.0


class TestGradientChecks:
    def test_all_primitives_and_modes_within_tolerance(self):
        results = check_gradients(0, seeds_per_case=3)
        assert all(result.passed for result in results), [
            r.name for r in results if not r.passed
        ]
        names = [result.name for result in results]
        assert "gradients-quadratic" in names
        for mode in ("vanilla", "vanilla_single", "lht_f2c", "lht_c2f", "lht_naive"):
            assert f"gradients-loss-{mode}" in names

    def test_quadratic_case_is_near_exact(self):
        results = {r.name: r for r in check_gradients(0, seeds_per_case=2)}
        assert results["gradients-quadratic"].margin < 1e-7
        assert results["gradients-quadratic"].threshold == 1e-7
        for name, result in results.items():
            if name != "gradients-quadratic":
                assert result.threshold == GRAD_TOL

    def test_seed_changes_margins_not_verdicts(self):
        first = check_gradients(0, seeds_per_case=2)
        again = check_gradients(0, seeds_per_case=2)
        other = check_gradients(1, seeds_per_case=2)
        assert [(r.name, r.margin) for r in first] == [(r.name, r.margin) for r in again]
        assert [r.passed for r in first] == [r.passed for r in other]
        assert any(a.margin != b.margin for a, b in zip(first, other))


class TestNaiveCollapse:
    def test_all_three_verdicts_pass(self):
        results = {r.name: r for r in check_naive_collapse(0)}
        assert set(results) == {
            "naive-collapse-identity",
            "naive-collapse-margin",
            "naive-collapse-grid",
        }
        assert all(r.passed for r in results.values())

    def test_identity_margin_is_machine_precision(self):
        results = {r.name: r for r in check_naive_collapse(0)}
        assert results["naive-collapse-identity"].margin < 1e-12

    def test_margin20_loss_matches_frozen_oracle(self):
        results = {r.name: r for r in check_naive_collapse(0)}
        assert results["naive-collapse-margin"].margin == pytest.approx(
            MARGIN20_CHAIN_LOSS, rel=1e-6
        )
        assert results["naive-collapse-margin"].threshold == 1e-7

    def test_grid_minimizers_coincide_strictly(self):
        results = {r.name: r for r in check_naive_collapse(0)}
        assert results["naive-collapse-grid"].margin > 0  # strict descent everywhere

    def test_verdicts_stable_across_seeds(self):
        for seed in (0, 1, 2):
            assert all(r.passed for r in check_naive_collapse(seed))


class TestLambdaSaturation:
    def test_uniform_columns_pool_any_simplex_to_uniform(self, rng):
        uniform = np.full((4, 8), 0.25)
        for _ in range(10):
            p = rng.dirichlet(np.ones(8))
            out = ops.apply_constant_transition(Tensor(p), uniform)
            np.testing.assert_allclose(out.data, 0.25, atol=1e-12)

    def test_extreme_weight_flattens_columns_and_ce(self, tiny_data):
        train_split, test_split = tiny_data
        results = check_lambda_saturation(0, train_split, test_split, strict=True)
        names = {r.name for r in results}
        assert names == {
            "lambda-saturation-columns-level2",
            "lambda-saturation-ce-level2",
            "lambda-saturation-columns-level3",
            "lambda-saturation-ce-level3",
        }
        for result in results:
            assert result.passed
            expected = 0.01 if "columns" in result.name else 0.02
            assert result.threshold == expected

    def test_without_confusion_pressure_strict_mode_raises(self, tiny_data):
        train_split, test_split = tiny_data
        with pytest.raises(NotConverged):
            check_lambda_saturation(
                0, train_split, test_split, lam=0.0, epochs=2, lr_heads=0.1
            )
        results = check_lambda_saturation(
            0, train_split, test_split, lam=0.0, epochs=2, lr_heads=0.1, strict=False
        )
        assert any(not result.passed for result in results)

    def test_train_data_requires_test_data(self, tiny_data):
        train_split, _ = tiny_data
        with pytest.raises(ValueError):
            check_lambda_saturation(0, train_split, None)


class TestNllCeIdentity:
    def test_identity_holds_to_1e_10(self):
        result = check_nll_ce_identity(n_cases=200, seed=1)
        assert result.passed
        assert result.name == "nll-ce-identity"
        assert result.margin < 1e-10
        assert result.threshold == 1e-10

    def test_deterministic_per_seed(self):
        first = check_nll_ce_identity(n_cases=50, seed=2)
        again = check_nll_ce_identity(n_cases=50, seed=2)
        other = check_nll_ce_identity(n_cases=50, seed=3)
        assert first == again
        assert first.margin != other.margin
        assert other.passed

    def test_onehot_and_uniform_endpoints(self):
        # Correct one-hot predictions give zero on both sides; uniform
        # predictions give ln(8*4*2) on both sides.
        ce_onehot = sum(
            ops.cross_entropy(Tensor(np.eye(size)[0]), np.eye(size)[0]).item()
            for size in (8, 4, 2)
        )
        assert ce_onehot == 0.0 == -math.log(1.0)
        ce_uniform = sum(
            ops.cross_entropy(Tensor(np.full(size, 1.0 / size)), np.eye(size)[0]).item()
            for size in (8, 4, 2)
        )
        joint_uniform = -math.log(math.prod(1.0 / s for s in (8, 4, 2)))
        assert ce_uniform == pytest.approx(joint_uniform, abs=1e-12)
        assert ce_uniform == pytest.approx(math.log(64), abs=1e-12)


class TestCheckResultRecord:
    def test_fields_round_trip(self):
        record = CheckResult("demo", True, 1e-9, 1e-6, seed=4, detail="fine")
        assert (record.name, record.passed) == ("demo", True)
        assert record.margin < record.threshold
        assert record.seed == 4
        assert record.detail == "fine"
