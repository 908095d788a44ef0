"""Wake weight, grid, and comparability-constant tests."""

import math

import numpy as np
import pytest

from oseenwake.rigid_motion import (
    RigidMotionSpec,
    candidate_zeta,
    evolution_matrix,
    wake_constant,
    wake_drift,
)
from oseenwake.weights import (
    FieldGrid,
    WeightedField,
    comparability_constant,
    weight,
    weighted_norm,
)


class TestWeight:
    def test_isotropic_reduction(self):
        x = np.array([3.0, -4.0, 12.0])     # |x| = 13
        for m in (0.0, 1.0, 2.0):
            assert weight(x, np.zeros(3), m) == pytest.approx(14.0 ** m)

    def test_wake_axis_collapses(self):
        zeta = np.array([0.0, 0.0, 2.0])
        x = np.array([0.0, 0.0, -9.0])      # antiparallel
        assert weight(x, zeta, 1.0) == pytest.approx(10.0, abs=1e-12)

    def test_upstream_arithmetic(self):
        zeta = np.array([0.0, 0.0, 1.0])
        x = np.array([0.0, 0.0, 9.0])
        assert weight(x, zeta, 1.0) == pytest.approx(190.0)

    def test_at_least_one_everywhere(self):
        rng = np.random.default_rng(0)
        x = rng.normal(size=(500, 3)) * 20
        zeta = np.array([0.3, -0.2, 0.9])
        w = weight(x, zeta, 1.5)
        assert np.all(w >= 1.0 - 1e-15)

    def test_continuity(self):
        zeta = np.array([0.0, 1.0, 0.0])
        x = np.array([2.0, -5.0, 1.0])
        base = weight(x, zeta, 1.0)
        for d in np.eye(3):
            assert abs(weight(x + 1e-7 * d, zeta, 1.0) - base) < 1e-5

    def test_negative_order_rejected(self):
        with pytest.raises(ValueError):
            weight(np.ones(3), np.zeros(3), -1.0)


class TestComparabilityConstant:
    def test_zero_drift(self):
        assert comparability_constant(0.0, np.array([0, 0, 1.0])) == 1.0

    def test_unit_values(self):
        got = comparability_constant(1.0, np.array([0, 0, 1.0]))
        assert got == pytest.approx(36.0)

    def test_validation(self):
        with pytest.raises(ValueError):
            comparability_constant(-0.5, np.zeros(3))


class TestFieldGrid:
    def test_default_layout(self):
        g = FieldGrid.build()
        assert len(g.radii) == 32
        assert g.radii[0] == 0.0
        assert g.radii[-1] == pytest.approx(64.0)
        ratios = np.diff(np.log(g.radii_array[1:]))
        assert np.allclose(ratios, ratios[0], atol=1e-12)
        assert len(g.directions) == 50
        norms = np.linalg.norm(g.dirs_array, axis=1)
        assert np.allclose(norms, 1.0, atol=1e-12)
        for ax in np.vstack([np.eye(3), -np.eye(3)]):
            assert np.any(np.all(g.dirs_array == ax, axis=1))
        assert len(g.times) == 16
        dt = np.diff(g.times_array)
        assert np.allclose(dt, g.period / 16)
        assert g.times[0] == 0.0 and g.times[-1] < g.period

    def test_points_shape(self):
        g = FieldGrid.build(n_shells=5, n_dirs=10, n_times=3)
        assert g.points.shape == (5, 10, 3)
        assert g.shape == (3, 5, 10, 3)

    def test_validation(self):
        with pytest.raises(ValueError):
            FieldGrid.build(r_max=1.0, r_min=2.0)
        with pytest.raises(ValueError):
            FieldGrid.build(n_dirs=4)


@pytest.fixture(scope="module")
def small_grid():
    return FieldGrid.build(r_max=16.0, n_shells=8, n_dirs=14, n_times=4)


class TestWeightedField:
    ZETA = (0.1, 0.0, 0.6)

    def test_zero_field(self, small_grid):
        f = WeightedField(small_grid, np.zeros(small_grid.shape), 1.0,
                          self.ZETA)
        assert weighted_norm(f) == 0.0

    def test_inverse_weight_has_unit_norm(self, small_grid):
        w = weight(small_grid.points, np.array(self.ZETA), 1.0)
        vals = np.zeros(small_grid.shape)
        vals[..., 0] = (1.0 / w)[None, :, :]
        f = WeightedField(small_grid, vals, 1.0, self.ZETA)
        assert weighted_norm(f) == pytest.approx(1.0, abs=1e-14)

    def test_homogeneity_and_triangle(self, small_grid):
        rng = np.random.default_rng(4)
        a = rng.normal(size=small_grid.shape)
        b = rng.normal(size=small_grid.shape)
        fa = WeightedField(small_grid, a, 1.0, self.ZETA)
        fb = WeightedField(small_grid, b, 1.0, self.ZETA)
        assert (-2.5 * fa).norm == pytest.approx(2.5 * fa.norm, rel=1e-15)
        assert (fa + fb).norm <= fa.norm + fb.norm + 1e-12

    def test_immutable_and_mutation_via_copy(self, small_grid):
        vals = np.ones(small_grid.shape)
        f = WeightedField(small_grid, vals, 1.0, self.ZETA)
        with pytest.raises(ValueError):
            f.values[0, 0, 0, 0] = 7.0
        n0 = f.norm
        g = f.with_values(2.0 * np.ones(small_grid.shape))
        assert g.norm == pytest.approx(2.0 * n0)
        assert f.norm == n0

    def test_shape_validation(self, small_grid):
        with pytest.raises(ValueError):
            WeightedField(small_grid, np.zeros((2, 2, 2, 3)), 1.0,
                          self.ZETA)

    def test_incompatible_arithmetic(self, small_grid):
        f = WeightedField(small_grid, np.zeros(small_grid.shape), 1.0,
                          self.ZETA)
        g = WeightedField(small_grid, np.zeros(small_grid.shape), 2.0,
                          self.ZETA)
        with pytest.raises(ValueError):
            _ = f + g

    def test_csv_roundtrip(self, small_grid, tmp_path):
        rng = np.random.default_rng(9)
        vals = rng.normal(size=small_grid.shape)
        f = WeightedField(small_grid, vals, 1.0, self.ZETA)
        p = tmp_path / "field.csv"
        f.write_csv(p)
        g = WeightedField.read_csv(p)
        assert np.array_equal(g.values, f.values)
        assert g.m == f.m and g.zeta == f.zeta
        assert g.grid.radii == pytest.approx(f.grid.radii)
        assert g.norm == pytest.approx(f.norm, rel=1e-15)
        first = p.read_text().splitlines()
        assert first[0].startswith("# {")
        assert first[1] == "r,dir_index,t_index,vx,vy,vz"


@pytest.fixture(scope="module")
def parallel_spec():
    # rotation about e3 with translation along e3: omega stays parallel
    # to the drift limit zeta = mean eta
    return RigidMotionSpec(
        period=1.0,
        eta_coeffs=[(0, (0.0, 0.0, 0.8), (0, 0, 0)),
                    (1, (0.0, 0.0, 0.3), (0.0, 0.0, 0.2))],
        omega_coeffs=[(0, (0.0, 0.0, 2 * math.pi), (0, 0, 0)),
                      (1, (0.0, 0.0, 1.0), (0, 0, 0))],
    )


class TestChangeOfVariablesComparability:
    def test_axis_invariance(self, parallel_spec):
        zeta = candidate_zeta(parallel_spec)
        assert zeta is not None
        rng = np.random.default_rng(13)
        for _ in range(50):
            y = rng.normal(size=3) * 10
            t = rng.uniform(0, 1)
            s = t - rng.uniform(0, 4)
            phi = evolution_matrix(parallel_spec, t, s).matrix
            moved = phi @ y
            num = abs(float(zeta @ (moved - y)))
            assert num <= 1e-8 * np.linalg.norm(zeta) * np.linalg.norm(y) \
                + 1e-12

    def test_drift_axis_component_bounded(self, parallel_spec):
        zeta = candidate_zeta(parallel_spec)
        report = wake_constant(parallel_spec, zeta)
        M = report.M_estimate
        az = np.linalg.norm(zeta)
        rng = np.random.default_rng(14)
        for _ in range(50):
            t = rng.uniform(0, 1)
            s = t - rng.uniform(0, 8)
            d = wake_drift(parallel_spec, s, t, zeta)
            assert abs(float(zeta @ d)) <= M * az + 1e-8

    def test_monte_carlo_weight_comparability(self, parallel_spec):
        zeta = candidate_zeta(parallel_spec)
        report = wake_constant(parallel_spec, zeta)
        assert report.parallel_ok and report.bounded
        M = report.M_estimate
        root_cstar = math.sqrt(comparability_constant(M, zeta))
        rng = np.random.default_rng(15)
        n = 2000
        worst = 0.0
        for _ in range(n):
            y = rng.normal(size=3) * 10.0 ** rng.uniform(-1, 2)
            t = rng.uniform(0, 1)
            s = t - rng.uniform(0, 8)
            phi = evolution_matrix(parallel_spec, t, s).matrix
            z = phi @ y - wake_drift(parallel_spec, s, t, zeta)
            ratio = weight(z, zeta, 1.0) / weight(y, zeta, 1.0)
            worst = max(worst, ratio)
            assert ratio <= root_cstar * (1 + 1e-12)
        assert worst > 1.0              # the bound is doing real work
