import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from rangelens import recover
from rangelens.errors import NumericFailureError
from rangelens.models import ModelSet, project
from rangelens.netsim import Layer, make_layer

SPARSE1 = ModelSet.sparse(np.eye(100), 1)


def e1(n=100):
    x = np.zeros(n)
    x[0] = 1.0
    return x


class TestBackProjection:
    def test_zero_output(self):
        layer = make_layer(100, 500, seed=0)
        res = recover.back_project(layer, np.zeros(500), SPARSE1)
        assert np.array_equal(res.estimate, np.zeros(100))

    def test_unit_vector_median_error(self):
        # oracle (unclipped): 2 sum_i M_i1^2 1[M_i1 > 0] - 1 has sd sqrt(5/m), so the
        # median absolute error is 0.674 sqrt(5/m) = 0.034; clipping only lowers it
        errs, raw = [], []
        for s in range(50):
            layer = make_layer(100, 2000, seed=s)
            y = layer(e1())
            errs.append(recover.back_project(layer, y, SPARSE1, truth=e1()).relative_error)
            raw.append(recover.back_project(layer, y, SPARSE1, truth=e1(), clip=False).relative_error)
        assert np.median(errs) <= 0.2
        assert np.median(raw) == pytest.approx(0.6744897501960817 * math.sqrt(5 / 2000), rel=0.4)

    @given(st.floats(0.05, 1.0))
    @settings(max_examples=20, deadline=None)
    def test_positive_homogeneity(self, c):
        layer = make_layer(100, 300, seed=3)
        x = e1() * 0.8
        a = recover.back_project(layer, layer(c * x), SPARSE1, clip=False).estimate
        b = recover.back_project(layer, layer(x), SPARSE1, clip=False).estimate
        assert np.allclose(a, c * b, rtol=1e-12, atol=1e-15)

    def test_permutation_equivariance(self):
        rng = np.random.default_rng(0)
        n, m = 20, 400
        model = ModelSet.sparse(np.eye(n), 2)
        w = rng.standard_normal((m, n)) / math.sqrt(m)
        x = np.zeros(n)
        x[[3, 11]] = [0.6, -0.4]
        perm = rng.permutation(n)
        p = np.eye(n)[perm]
        base = Layer.with_weights(w)
        moved = Layer.with_weights(w @ p.T)
        a = recover.back_project(base, base(x), model).estimate
        b = recover.back_project(moved, moved(p @ x), model).estimate
        assert np.allclose(b, p @ a, atol=1e-12)

    def test_dimension_checks(self):
        layer = make_layer(100, 50, seed=0)
        with pytest.raises(ValueError):
            recover.back_project(layer, np.zeros(49), SPARSE1)
        with pytest.raises(ValueError):
            recover.back_project(make_layer(10, 50), np.zeros(50), SPARSE1)
        with pytest.raises(ValueError):
            recover.back_project(make_layer(100, 50, "hard_tanh"), np.zeros(50), SPARSE1)

    @given(st.integers(0, 10_000))
    @settings(max_examples=15, deadline=None)
    def test_estimate_in_model(self, seed):
        model = ModelSet.random_gmm(20, 3, 2, seed=1)
        layer = make_layer(20, 200, seed=seed)
        y = np.abs(np.random.default_rng(seed).standard_normal(200))
        est = recover.back_project(layer, y, model).estimate
        assert np.linalg.norm(est) <= 1 + 1e-12
        assert np.allclose(project(model, est), est, atol=1e-12)


class TestRefinement:
    def test_truth_is_fixed_point(self):
        layer = make_layer(100, 500, seed=1)
        x = 0.7 * e1()
        res = recover.refine_projected_gradient(layer, layer(x), x, SPARSE1, truth=x)
        assert res.iterations == 0
        assert np.array_equal(res.estimate, x)

    def test_median_error_after_refinement(self):
        errs = []
        for s in range(50):
            layer = make_layer(100, 2000, seed=100 + s)
            y = layer(0.8 * e1())
            bp = recover.back_project(layer, y, SPARSE1)
            res = recover.refine_projected_gradient(layer, y, bp.estimate, SPARSE1, 100, truth=0.8 * e1())
            errs.append(res.relative_error)
            assert res.objective <= bp.objective
        assert np.median(errs) <= 0.1

    def test_huge_step_backtracks(self):
        model = ModelSet.random_gmm(20, 2, 3, seed=0)
        layer = make_layer(20, 300, seed=2)
        x = model.bases[0] @ np.array([0.3, -0.2, 0.5])
        start = model.bases[1] @ np.array([0.2, 0.2, 0.2])
        res = recover.refine_projected_gradient(layer, layer(x), start, model, 40, step=1e6)
        trace = np.array(res.objective_trace)
        assert np.all(np.diff(trace) <= 0)

    def test_numeric_failure(self):
        layer = make_layer(100, 50, seed=0)
        y = np.zeros(50)
        y[0] = np.inf
        with pytest.raises(NumericFailureError):
            recover.refine_projected_gradient(layer, y, e1(), SPARSE1)

    def test_bad_arguments(self):
        layer = make_layer(100, 50, seed=0)
        with pytest.raises(ValueError):
            recover.refine_projected_gradient(layer, np.zeros(50), e1(), SPARSE1, iters=0)
        with pytest.raises(ValueError):
            recover.refine_projected_gradient(layer, np.zeros(50), e1(), SPARSE1, step=0)


class TestCurve:
    def test_grid_validation(self):
        with pytest.raises(ValueError):
            recover.recovery_error_curve(SPARSE1, [250, 1000], 2)
        with pytest.raises(ValueError):
            recover.recovery_error_curve(SPARSE1, [1000, 250, 4000], 2)

    def test_single_point_model(self):
        model = ModelSet.cloud(np.array([[0.3, 0.4, 0.0]]))
        curve = recover.recovery_error_curve(model, [10, 20, 40], 3)
        assert curve.median_errors == [0.0, 0.0, 0.0]

    def test_gmm_monotone(self):
        model = ModelSet.random_gmm(50, 2, 2, seed=0)
        curve = recover.recovery_error_curve(model, [250, 1000, 4000], 30, seed=0)
        assert curve.monotone

    def test_worker_independence(self):
        a = recover.recovery_error_curve(SPARSE1, [100, 200, 400], 6, seed=2, workers=1)
        b = recover.recovery_error_curve(SPARSE1, [100, 200, 400], 6, seed=2, workers=4)
        assert a.errors == b.errors
