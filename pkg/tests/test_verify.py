import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from rangelens import _rng, verify
from rangelens.verify import VerificationConfig

PI = math.pi


def small(**kw):
    base = dict(n=30, m=2000, trials=40, pair_count=200, cloud_size=200, width_trials=50,
                order_triples=100, row_samples=20_000, m_grid=(100, 1000, 4000))
    base.update(kw)
    return VerificationConfig(**base)


class TestConfig:
    def test_invariants(self):
        with pytest.raises(ValueError):
            VerificationConfig(beta=0.0)
        with pytest.raises(ValueError):
            VerificationConfig(beta=1.5)
        with pytest.raises(ValueError):
            VerificationConfig(delta=0.0)
        with pytest.raises(ValueError):
            VerificationConfig(angle_bins=((0.0, 1.0), (0.5, 2.0)))
        with pytest.raises(ValueError):
            VerificationConfig(angle_bins=((0.0, 4.0),))

    def test_touching_bins_allowed(self):
        cfg = VerificationConfig(angle_bins=((0.0, PI / 2), (PI / 2, PI)))
        assert len(cfg.angle_bins) == 2


@given(st.integers(0, 2**31 - 1), st.floats(0.0, PI))
@settings(max_examples=50, deadline=None)
def test_controlled_pair_angle(seed, theta):
    x, y = verify.controlled_pair(np.random.default_rng(seed), 12, theta)
    assert np.linalg.norm(x) == pytest.approx(1.0)
    assert np.linalg.norm(y) == pytest.approx(1.0)
    assert math.acos(np.clip(x @ y, -1, 1)) == pytest.approx(theta, abs=1e-6)


class TestNormHalving:
    def test_zero_input(self):
        from rangelens.netsim import make_layer
        assert verify.norm_halving_deviation(make_layer(5, 10), np.zeros(5)) == 0.0

    def test_passes_at_large_m(self):
        rep = verify.check_norm_halving(VerificationConfig(trials=200))
        assert rep.passed
        assert rep.empirical <= 0.05

    def test_fails_honestly_at_tiny_m(self):
        # variance oracle: sd = sqrt(1.25/25) ~ 0.22 >> 0.01
        rep = verify.check_norm_halving(VerificationConfig(m=25, delta=0.01, trials=50))
        assert not rep.passed


class TestReports:
    def test_pass_matches_comparison(self):
        rep = verify.check_distance_kernel(small())
        e, p, t = map(np.asarray, (rep.empirical, rep.predicted, rep.tolerance))
        assert rep.passed == bool(np.all(np.abs(e - p) <= t))
        # the x = y bin is exactly zero
        degenerate = verify.check_distance_kernel(small(angle_bins=((0.0, 0.0),), trials=5))
        assert degenerate.empirical[0] <= 1e-6

    def test_bit_reproducible_and_worker_independent(self):
        a = verify.check_cosine_map(small(workers=1)).to_dict()
        b = verify.check_cosine_map(small(workers=1)).to_dict()
        c = verify.check_cosine_map(small(workers=3)).to_dict()
        assert a == b == c

    def test_seed_changes_result(self):
        a = verify.check_distance_kernel(small(seed=1))
        b = verify.check_distance_kernel(small(seed=2))
        assert a.empirical != b.empirical

    def test_standard_error_scaling(self):
        # four times the trials halves the standard error (within 20%)
        se1 = np.array(verify.check_distance_kernel(small(trials=50)).details["standard_error"])
        se4 = np.array(verify.check_distance_kernel(small(trials=200)).details["standard_error"])
        ratio = se1[:-1] / se4[:-1]     # last bin (theta = pi) has se ~ 0 only through m
        assert np.all(np.abs(ratio - 2.0) <= 0.4)

    def test_cosine_map_small_run(self):
        rep = verify.check_cosine_map(small())
        assert rep.passed
        assert rep.details["order_preservation_rate"] >= 0.95


class TestHamming:
    def test_decay(self):
        rep = verify.check_hamming_isometry(small(pair_count=300), m_grid=(100, 1000, 10_000))
        assert rep.passed
        assert -0.6 <= rep.details["slope"] <= -0.15
        assert rep.details["fitted_C"] > 0

    def test_capped_relu_identical_hash(self):
        cfg = small()
        a = verify.check_hamming_isometry(cfg, activation="relu")
        b = verify.check_hamming_isometry(cfg, activation={"kind": "capped_relu", "cap": 0.5})
        assert a.empirical == b.empirical

    def test_hard_tanh_generality(self):
        rep = verify.check_activation_generality(small(), "hard_tanh")
        assert rep.conditions["within_10pct_of_relu"]


class TestCovering:
    def test_propagation_small(self):
        cfg = small(model_L=3, model_k=2, model_n=50)
        rep = verify.check_covering_propagation(cfg, runs=5)
        assert rep.passed

    def test_single_point_cloud(self):
        from rangelens.models import ModelSet, greedy_epsilon_net
        from rangelens.netsim import make_layer
        pt = np.ones((1, 4)) * 0.5
        out = make_layer(4, 50, seed=0)(pt)
        assert greedy_epsilon_net(pt, 0.3).net_size_greedy == 1
        assert greedy_epsilon_net(out, 0.3).net_size_greedy == 1

    def test_identity_activation_large_eps(self):
        from rangelens.models import ModelSet
        model = ModelSet.random_gmm(10, 2, 2, seed=0)
        cfg = small(n=10, model_n=10, epsilons=(2.5,), trials=2)
        rep = verify.check_covering_propagation(cfg, model=model, activation="identity", runs=2)
        assert rep.passed
        assert all(s == [[1, 1]] for s in rep.details["net_sizes_in_out"])


class TestConcentration:
    def test_small_run(self):
        rep = verify.check_concentration(small(trials=300))
        assert rep.passed, rep.conditions

    def test_bound_value(self):
        assert 2 * math.exp(-4**2 / (2 * 2.0)) == pytest.approx(0.03663127777746836)

    def test_sample_record(self):
        z = np.array([0.1, -0.2, 0.3])
        s = verify.ConcentrationSample.from_rows(z, 0.5)
        assert s.sum_abs == pytest.approx(0.6)
