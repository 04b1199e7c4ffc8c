import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from rangelens import models
from rangelens.errors import (CloudParseError, InvalidCoveringError, InvalidModelError,
                              UnsupportedModelError)
from rangelens.models import ModelSet

seeds = st.integers(min_value=0, max_value=2**31 - 1)


@pytest.fixture(scope="module")
def gmm():
    return ModelSet.random_gmm(50, 3, 2, seed=0)


class TestConstruction:
    def test_random_gmm_orthonormal(self, gmm):
        for b in gmm.bases:
            assert np.allclose(b.T @ b, np.eye(2), atol=1e-12)

    def test_non_orthonormal_rejected(self):
        with pytest.raises(InvalidModelError):
            ModelSet.gmm(np.ones((1, 4, 2)))

    def test_k_above_n(self):
        with pytest.raises(InvalidModelError):
            ModelSet.random_gmm(3, 2, 4)

    def test_sparse_limits(self):
        with pytest.raises(InvalidModelError):
            ModelSet.sparse(np.eye(5)[:, :3], 4)
        with pytest.raises(InvalidModelError):
            ModelSet.sparse(np.eye(5), 0)
        with pytest.raises(InvalidModelError):
            ModelSet.sparse(np.zeros((3, 3)), 1)

    def test_sparse_normalizes_columns(self):
        m = ModelSet.sparse(3.0 * np.eye(4), 2)
        assert np.allclose(np.linalg.norm(m.dictionary, axis=0), 1.0)
        assert m.orthonormal_dictionary

    def test_cloud(self):
        m = ModelSet.cloud(np.eye(3), [0, 1, 1])
        assert m.L == 3 and m.n == 3


class TestSampling:
    @given(seeds)
    @settings(max_examples=25, deadline=None)
    def test_norm_window(self, seed):
        model = ModelSet.random_gmm(20, 3, 2, seed=1, beta=0.5)
        pts, labels = models.sample_points(model, 50, seed=seed)
        nrm = np.linalg.norm(pts, axis=1)
        assert np.all(nrm >= 0.5 - 1e-12) and np.all(nrm <= 1 + 1e-12)
        assert set(labels.tolist()) <= {0, 1, 2}

    def test_points_in_their_subspace(self, gmm):
        pts, labels = models.sample_points(gmm, 30, seed=3)
        for p, lab in zip(pts, labels):
            b = gmm.bases[lab]
            assert np.allclose(b @ (b.T @ p), p, atol=1e-12)

    def test_sparse_support(self):
        model = ModelSet.sparse(np.eye(30), 3)
        pts, labels = models.sample_points(model, 40, seed=2)
        assert np.all(np.count_nonzero(pts, axis=1) <= 3)
        for p, lab in zip(pts, labels):
            assert models.support_label(np.nonzero(p)[0]) == lab

    def test_reproducible(self, gmm):
        a, _ = models.sample_points(gmm, 10, seed=5)
        b, _ = models.sample_points(gmm, 10, seed=5)
        c, _ = models.sample_points(gmm, 10, seed=6)
        assert np.array_equal(a, b) and not np.array_equal(a, c)

    def test_support_labels_distinct(self):
        from itertools import combinations
        labels = {models.support_label(s) for s in combinations(range(8), 3)}
        assert len(labels) == math.comb(8, 3)


class TestProjection:
    @given(seeds)
    @settings(max_examples=25, deadline=None)
    def test_projection_is_member_and_idempotent(self, seed):
        model = ModelSet.random_gmm(10, 3, 2, seed=4)
        x = np.random.default_rng(seed).standard_normal(10)
        p = models.project(model, x)
        assert np.linalg.norm(p) <= 1 + 1e-12
        assert np.allclose(models.project(model, p), p, atol=1e-12)

    def test_top_k(self):
        model = ModelSet.sparse(np.eye(5), 2)
        x = np.array([0.1, -0.5, 0.2, 0.4, 0.0])
        assert np.allclose(models.project(model, x), [0, -0.5, 0, 0.4, 0])

    def test_clip(self):
        model = ModelSet.sparse(np.eye(3), 1)
        assert np.allclose(models.project(model, [3.0, 0, 0]), [1, 0, 0])
        assert np.allclose(models.project(model, [3.0, 0, 0], clip=False), [3, 0, 0])

    def test_gmm_picks_best_subspace(self, gmm):
        x = gmm.bases[1] @ np.array([0.3, 0.4])
        assert np.allclose(models.project(gmm, x), x, atol=1e-12)

    def test_nonorthogonal_dictionary(self):
        d = np.array([[1.0, 1.0], [0.0, 1.0]])
        model = ModelSet.sparse(d, 1)
        col = model.dictionary[:, 1] * 0.7
        assert np.allclose(models.project(model, col), col, atol=1e-12)

    def test_cloud_nearest(self):
        model = ModelSet.cloud(np.array([[0.5, 0], [0, 0.5]]), [0, 1])
        assert np.allclose(models.project(model, [0.1, 0.4]), [0, 0.5])


class TestMeanWidth:
    def test_antipodal_pair(self):
        # sup over {x, -x} of <g, a - b> is 2|<g, x>|; mean 2 sqrt(2/pi)
        x = np.zeros(7)
        x[2] = 1.0
        est = models.estimate_mean_width(np.vstack([x, -x]), trials=4000, seed=1)
        assert abs(est.value - 1.5957691216057308) <= 4 * est.std_error

    def test_cross_polytope(self):
        # 2 E max_i |g_i| for n = 10, by one-dimensional quadrature
        pts = np.vstack([np.eye(10), -np.eye(10)])
        est = models.estimate_mean_width(pts, trials=4000, seed=2)
        assert abs(est.value - 3.7614313876423244) <= 4 * est.std_error

    def test_single_point_and_empty(self):
        assert models.estimate_mean_width(np.ones((3, 4)), 10).value == 0.0
        with pytest.raises(ValueError):
            models.estimate_mean_width(np.zeros((0, 3)))
        with pytest.raises(ValueError):
            models.estimate_mean_width(np.eye(3), trials=1)

    def test_sample_estimate_below_sphere_width(self):
        rng = np.random.default_rng(0)
        pts = rng.standard_normal((2000, 30))
        pts /= np.linalg.norm(pts, axis=1, keepdims=True)
        est = models.estimate_mean_width(pts, 200, seed=0)
        sphere = 2 * math.sqrt(2) * math.gamma(15.5) / math.gamma(15)
        assert est.value <= sphere

    def test_bounds(self):
        g = ModelSet.random_gmm(20, 10, 5)
        assert models.mean_width_bound(g) == pytest.approx(2.7023295677977632, abs=1e-12)
        s = ModelSet.sparse(np.eye(100), 2)
        assert models.mean_width_bound(s, C=2.0) == pytest.approx(2 * math.sqrt(2 * math.log(50)))
        with pytest.raises(UnsupportedModelError):
            models.mean_width_bound(ModelSet.cloud(np.eye(2)))


class TestCovering:
    def test_closed_forms(self, gmm):
        assert models.covering_bound(gmm, 0.3) == 177
        assert models.covering_bound(ModelSet.sparse(np.eye(10), 2), 0.5) == 1125
        assert models.covering_bound(ModelSet.random_gmm(10, 10, 3), 0.5) == 1250
        assert models.covering_bound(gmm, 1.0) == 1
        with pytest.raises(ValueError):
            models.covering_bound(gmm, 0.0)

    @given(st.integers(2, 40), st.integers(1, 5), st.floats(0.05, 0.99))
    def test_stirling_dominates(self, L, k, eps):
        if k > L:
            return
        m = ModelSet.sparse(np.eye(L), k)
        assert models.covering_bound_stirling(m, eps) >= models.covering_bound(m, eps)

    @given(seeds, st.floats(0.1, 0.9))
    @settings(max_examples=20, deadline=None)
    def test_greedy_net_is_cover_and_packing(self, seed, eps):
        pts = np.random.default_rng(seed).uniform(-1, 1, size=(80, 3))
        rec = models.greedy_epsilon_net(pts, eps)
        d = np.linalg.norm(pts[:, None] - rec.centers[None], axis=2)
        assert np.all(d.min(axis=1) <= eps)
        c = np.linalg.norm(rec.centers[:, None] - rec.centers[None], axis=2)
        assert np.all(c[np.triu_indices(len(c), 1)] > eps)

    def test_greedy_below_volumetric_bound(self, gmm):
        pts, _ = models.sample_points(gmm, 2000, seed=0)
        for eps in (0.3, 0.5, 0.8):
            assert models.greedy_epsilon_net(pts, eps).net_size_greedy <= models.covering_bound(gmm, eps)

    def test_greedy_vs_brute_force(self):
        pts = np.random.default_rng(3).uniform(0, 1, size=(9, 2))
        best = models.brute_force_cover_size(pts, 0.4)
        greedy = models.greedy_epsilon_net(pts, 0.4).net_size_greedy
        assert best <= greedy
        # an eps-packing of size N needs at least N balls of radius eps/2
        assert models.brute_force_cover_size(pts, 0.2) >= greedy
        with pytest.raises(ValueError):
            models.brute_force_cover_size(np.zeros((13, 2)), 0.1)

    def test_greedy_single_point(self):
        assert models.greedy_epsilon_net(np.ones((1, 3)), 0.1).net_size_greedy == 1

    def test_dudley(self):
        assert models.dudley_bound(lambda e: 4.0, [0.1, 0.5, 1.0]) == pytest.approx(
            math.sqrt(math.log(4.0)))
        with pytest.raises(InvalidCoveringError):
            models.dudley_bound(lambda e: 1 + 10 * e, [0.1, 0.5])
        with pytest.raises(InvalidCoveringError):
            models.dudley_bound(lambda e: 0.5, [0.1, 0.5])

    def test_sudakov(self):
        assert models.sudakov_covering_bound(1.0, 1.0) == pytest.approx(math.e)
        assert models.training_size_bound(2.0, 1.0, c=0.5) == pytest.approx(math.e**2)


class TestFiles:
    def test_dictionary_round_trip(self, tmp_path):
        d = np.random.default_rng(0).standard_normal((4, 6))
        models.save_dictionary(tmp_path / "d.txt", d)
        assert np.array_equal(models.load_dictionary(tmp_path / "d.txt"), d)

    def test_bad_value_line_number(self, tmp_path):
        p = tmp_path / "d.txt"
        p.write_text("# dictionary\n2 2\n1 0\nnan 1\n")
        with pytest.raises(CloudParseError) as exc:
            models.load_dictionary(p)
        assert exc.value.lineno == 4

    def test_ragged(self, tmp_path):
        p = tmp_path / "d.txt"
        p.write_text("2 2\n1,0\n1\n")
        with pytest.raises(CloudParseError) as exc:
            models.load_dictionary(p)
        assert exc.value.lineno == 3
