"""Certified estimators, their coverage, and the adversarial demos."""
import math
import sys

import numpy as np
import pytest

from entrobound import (
    EstimatorFailure,
    ExternalEstimator,
    OutOfSupportError,
    PinnedEntropyEstimator,
    ValidityError,
    estimate_entropy_certified,
    estimate_mi_certified,
    kl_demo,
    mi_adversary_demo,
    min_valid_M,
    prop1_demo,
    sample,
    tent_density,
    two_cell_kl_plugin,
)
from entrobound.rng import generator, split

TENT_H1 = 0.5 - math.log(2.0)


class TestEstimateEntropyCertified:
    def test_tent_run_is_covered(self):
        pts = sample(tent_density(1), 10**5, 7)
        report = estimate_entropy_certified(pts, 4.0, 0.1, seed=7)
        assert abs(report.estimate - TENT_H1) <= report.bound.total
        assert report.kind == "entropy"
        assert report.params.valid_for_theorem

    def test_single_sample_degenerate(self):
        M = min_valid_M(1, 4.0)
        report = estimate_entropy_certified(np.array([[0.4]]), 4.0, 0.1, M=M)
        assert report.estimate == pytest.approx(-math.log(M), abs=1e-12)
        assert report.bound.stat_dev == 0.0
        assert math.isfinite(report.bound.total)

    def test_out_of_support(self):
        with pytest.raises(OutOfSupportError):
            estimate_entropy_certified(np.array([[0.2], [1.5]]), 4.0, 0.1)

    def test_explicit_M_below_threshold(self):
        pts = sample(tent_density(1), 100, 1)
        with pytest.raises(ValidityError):
            estimate_entropy_certified(pts, 4.0, 0.1, M=8)

    def test_deterministic(self):
        pts = sample(tent_density(2), 5000, 3)
        a = estimate_entropy_certified(pts, 8.0, 0.05, seed=3)
        b = estimate_entropy_certified(pts, 8.0, 0.05, seed=3)
        assert a == b

    def test_coverage_over_100_trials(self):
        """Certified interval contains the truth in >= 1 - delta of trials."""
        tent = tent_density(1)
        delta = 0.1
        covered = 0
        for t in range(100):
            pts = sample(tent, 2000, split(1234, t))
            report = estimate_entropy_certified(pts, 4.0, delta)
            covered += abs(report.estimate - TENT_H1) <= report.bound.total
        assert covered / 100 >= 1.0 - delta


@pytest.fixture(scope="module")
def independent_tents():
    tent = tent_density(1)
    xs = sample(tent, 10**5, split(50, 0))
    ys = sample(tent, 10**5, split(50, 1))
    return xs, ys


class TestEstimateMiCertified:
    def test_independent_pair_near_zero(self, independent_tents):
        xs, ys = independent_tents
        # joint density of independent tents is the K=2 tent, L = 8
        report = estimate_mi_certified(xs, ys, 8.0, 0.1)
        assert report.kind == "mutual_information"
        assert abs(report.estimate) <= report.bound.total

    def test_symmetry_under_swap(self, independent_tents):
        xs, ys = independent_tents
        a = estimate_mi_certified(xs, ys, 8.0, 0.1)
        b = estimate_mi_certified(ys, xs, 8.0, 0.1)
        assert a.estimate == b.estimate

    def test_decomposition_identities(self, independent_tents):
        xs, ys = independent_tents
        report = estimate_mi_certified(xs, ys, 8.0, 0.1)
        h_x, h_y, h_xy = (p.estimate for p in report.components)
        assert report.estimate == h_x + h_y - h_xy
        total_of_parts = sum(p.bound.total for p in report.components)
        assert report.bound.total == pytest.approx(total_of_parts, rel=1e-14)
        assert report.bound.total == (
            report.bound.quant_bias + report.bound.stat_dev + report.bound.emp_bias
        )

    def test_components_use_third_of_delta(self, independent_tents):
        xs, ys = independent_tents
        report = estimate_mi_certified(xs, ys, 8.0, 0.09)
        for part in report.components:
            assert part.params.delta == pytest.approx(0.03)

    def test_mismatched_counts(self):
        with pytest.raises(ValueError):
            estimate_mi_certified(np.zeros((5, 1)), np.zeros((6, 1)), 1.0, 0.1)


class TestPinnedEntropyEstimator:
    def test_fixed_function(self):
        victim = PinnedEntropyEstimator(1, 4.0, 0.1, N=200)
        pts = sample(tent_density(1), 200, 8)
        assert victim(pts) == victim(pts)

    def test_reasonable_on_benign_data(self):
        victim = PinnedEntropyEstimator(1, 4.0, 0.1, N=5000)
        pts = sample(tent_density(1), 5000, 9)
        assert abs(victim(pts) - TENT_H1) < 0.5

    def test_accepts_negative_orthant(self):
        victim = PinnedEntropyEstimator(1, 4.0, 0.1, N=4)
        value = victim(np.array([[-0.5], [-0.25], [0.25], [0.5]]))
        assert math.isfinite(value)


class TestDiscreteMiPlugin:
    def test_constant_y_exactly_zero(self):
        from entrobound import discrete_mi_plugin

        x = sample(tent_density(1), 500, 1)
        y = np.ones(500, dtype=int)
        assert discrete_mi_plugin(x, y, 16) == 0.0

    def test_deterministic_function_reaches_log2(self):
        from entrobound import discrete_mi_plugin

        rng = generator(2)
        x = rng.random(20000)
        y = (x >= 0.5).astype(int) + 1
        est = discrete_mi_plugin(x, y, 2)
        assert est == pytest.approx(math.log(2.0), abs=0.01)

    def test_constant_codebook_adversary_estimates_zero(self):
        from entrobound import discrete_mi_plugin
        from entrobound.densities import DiscreteMiAdversary

        adv = DiscreteMiAdversary(
            M_bins=8, K_alphabet=2, codebook=np.ones(8, dtype=int), true_mi=0.0
        )
        x, y = adv.sample(3, 2000)
        assert discrete_mi_plugin(x, y, 32) == 0.0

    def test_collision_free_regime_hides_dependence(self):
        """Huge bin count: y is a function of x yet the estimate stays small."""
        from entrobound import discrete_mi_plugin
        from entrobound.densities import discrete_mi_adversary

        adv = discrete_mi_adversary(10**6, 2, seed=4)
        assert adv.true_mi > 0.5  # near log 2 for a balanced random codebook
        assert adv.collision_probability(1000) < 0.4
        x, y = adv.sample(9, 1000)
        est = discrete_mi_plugin(x, y, 32)
        assert est < 0.1


class TestTwoCellKlPlugin:
    def test_identical_empirical_masses(self):
        xs = np.array([[-0.5]] * 10)
        assert two_cell_kl_plugin(xs, xs.copy()) == 0.0

    def test_hand_value(self):
        xp = np.array([[-0.5]] * 2 + [[0.5]] * 2)  # p_hat = (1/2, 1/2)
        xq = np.array([[-0.5]] * 3 + [[0.5]] * 1)  # q_hat = (3/4, 1/4)
        expected = 0.5 * math.log(0.5 / 0.75) + 0.5 * math.log(0.5 / 0.25)
        assert two_cell_kl_plugin(xp, xq) == pytest.approx(expected, abs=1e-12)

    def test_infinite_when_q_cell_empty(self):
        xp = np.array([[-0.5], [0.5]])
        xq = np.array([[-0.5], [-0.25]])
        assert two_cell_kl_plugin(xp, xq) == math.inf


class TestProp1Demo:
    def test_small_scale(self):
        report = prop1_demo(C=0.5, delta=0.2, N=50, trials=20, seed=101)
        assert report.trials == 20
        assert report.failure_fraction >= 0.8
        assert 0.0 <= report.below_threshold_fraction <= 1.0
        assert report.calibrated_b >= 0.0
        # the planted truth sits further than C + b from the pilot entropy
        assert abs(report.true_value - TENT_H1) > report.C + report.calibrated_b

    def test_deterministic(self):
        a = prop1_demo(C=0.5, delta=0.2, N=50, trials=20, seed=101)
        b = prop1_demo(C=0.5, delta=0.2, N=50, trials=20, seed=101)
        assert a == b

    def test_argument_validation(self):
        with pytest.raises(ValueError):
            prop1_demo(C=0.0, delta=0.1, N=50, trials=20, seed=1)
        with pytest.raises(ValueError):
            prop1_demo(C=1.0, delta=0.1, N=50, trials=5, seed=1)


class TestMiAdversaryDemo:
    def test_small_scale(self):
        report = mi_adversary_demo(C=0.5, delta=0.2, N=50, trials=20, seed=77)
        assert report.below_threshold_fraction >= 0.8
        assert report.true_value > report.calibrated_b + report.C


class TestKlDemo:
    def test_small_scale(self):
        report = kl_demo(C=0.5, delta=0.2, N=50, trials=20, seed=55)
        assert report.below_threshold_fraction >= 0.8
        assert report.true_value >= report.calibrated_b + report.C
        # pilot estimator sees two identical all-negative uniforms
        assert report.calibrated_b == 0.0


class TestExternalEstimatorProtocol:
    def test_round_trip(self):
        est = ExternalEstimator(
            [sys.executable, "-c",
             "import sys; rows = sys.stdin.read().strip().splitlines(); print(len(rows) / 100)"]
        )
        value = est(np.full((25, 2), 0.5))
        assert value == pytest.approx(0.25)

    def test_nonzero_exit_is_failure(self):
        est = ExternalEstimator([sys.executable, "-c", "import sys; sys.exit(3)"])
        with pytest.raises(EstimatorFailure):
            est(np.zeros((2, 1)))

    def test_garbage_output_is_failure(self):
        est = ExternalEstimator([sys.executable, "-c", "print('nan-ish words')"])
        with pytest.raises(EstimatorFailure):
            est(np.zeros((2, 1)))

    def test_demo_with_external_estimator(self):
        """A constant external estimator pinned at the pilot entropy."""
        est = ExternalEstimator(
            [sys.executable, "-c", "import sys; sys.stdin.read(); print(-0.19314718)"]
        )
        report = prop1_demo(C=1.0, delta=0.2, N=20, trials=10, seed=5, estimator=est)
        # constant output: zero pilot spread, every adversarial trial misses
        assert report.calibrated_b == pytest.approx(abs(-0.19314718 - TENT_H1), abs=1e-9)
        assert report.failure_fraction == 1.0

    def test_demo_with_failing_estimator(self):
        est = ExternalEstimator([sys.executable, "-c", "print(0.0)"])
        broken = ExternalEstimator([sys.executable, "-c", "import sys; sys.exit(1)"])

        class FlipFlop:
            """Pilot phase works, adversarial phase always fails."""

            def __init__(self):
                self.calls = 0

            def __call__(self, rows):
                self.calls += 1
                if self.calls <= 10:
                    return est(rows)
                return broken(rows)

        report = prop1_demo(C=1.0, delta=0.2, N=20, trials=10, seed=5, estimator=FlipFlop())
        assert report.failure_fraction == 1.0
