import numpy as np
import pytest

from linocs.core import DecomposedModel, LinearModel, SwitchingModel, TimeVaryingModel, predict_full_lookahead, transition_at
from linocs.synth import (
    LorenzParams,
    NoiseKind,
    NoiseSpec,
    add_noise,
    cylinder_model,
    pseudo_switching_coefficients,
    rng_for,
    rotation_operator,
    simulate_dlds,
    simulate_linear,
    simulate_lorenz,
    simulate_switching,
    state_path_from_switches,
)


class TestRotation:
    def test_quarter_turn_matrix(self):
        np.testing.assert_allclose(
            rotation_operator(2, [np.pi / 2]), [[0.0, -1.0], [1.0, 0.0]], atol=1e-15
        )

    def test_eigenvalues_on_unit_circle(self):
        th = 0.37
        ev = np.linalg.eigvals(rotation_operator(2, [th]))
        np.testing.assert_allclose(np.abs(ev), [1.0, 1.0], atol=1e-12)
        np.testing.assert_allclose(np.sort(np.angle(ev)), [-th, th], atol=1e-12)

    def test_3d_orthogonality(self):
        R = rotation_operator(3, [0.3, -0.8, 1.1])
        np.testing.assert_allclose(R.T @ R, np.eye(3), atol=1e-12)
        assert abs(np.linalg.det(R) - 1.0) < 1e-12

    def test_wrong_angle_count(self):
        with pytest.raises(ValueError):
            rotation_operator(2, [0.1, 0.2])
        with pytest.raises(ValueError):
            rotation_operator(3, [0.1])

    def test_scale(self):
        R = rotation_operator(2, [0.5], scale=1.1)
        np.testing.assert_allclose(np.abs(np.linalg.eigvals(R)), [1.1, 1.1], atol=1e-12)


class TestSimulateLinear:
    def test_zero_operator_holds_offset(self):
        m = LinearModel(np.zeros((2, 2)), np.array([1.0, 1.0]))
        s = simulate_linear(m, [5.0, -2.0], 10)
        np.testing.assert_allclose(s.values[:, 1:], np.ones((2, 10)))

    def test_rotation_preserves_norm(self):
        m = LinearModel(rotation_operator(2, [0.17]))
        s = simulate_linear(m, [0.6, 0.8], 300)
        np.testing.assert_allclose(np.linalg.norm(s.values, axis=0), np.ones(301), atol=1e-12)

    def test_paper_style_setup_runs(self):
        rng = rng_for(0, "test")
        m = LinearModel(rotation_operator(2, [0.1]), rng.uniform(0, 1, 2))
        s = simulate_linear(m, rng.uniform(0, 1, 2), 500)
        assert s.values.shape == (2, 501)
        assert s.diverged_at is None


class TestSimulateSwitching:
    def test_single_segment_equals_linear(self):
        ops = [rotation_operator(2, [0.2])]
        offs = [np.array([0.1, 0.0])]
        s, path = simulate_switching(1, ops, offs, [], [1.0, 0.0], 50)
        ref = simulate_linear(LinearModel(ops[0], offs[0]), [1.0, 0.0], 50)
        np.testing.assert_array_equal(s.values, ref.values)
        np.testing.assert_array_equal(path, np.zeros(50, dtype=int))

    def test_state_histogram_matches_segments(self):
        path = state_path_from_switches(100, [30, 75], J=3)
        counts = np.bincount(path, minlength=3)
        np.testing.assert_array_equal(counts, [30, 45, 25])

    def test_empty_segment_rejected(self):
        with pytest.raises(ValueError):
            state_path_from_switches(10, [5, 5], J=2)
        with pytest.raises(ValueError):
            state_path_from_switches(10, [0], J=2)

    def test_uniform_offsets_setup(self):
        rng = rng_for(1, "slds")
        ops = [rotation_operator(3, rng.uniform(-0.3, 0.3, 3)) for _ in range(3)]
        offs = [rng.uniform(0, 1, 3) for _ in range(3)]
        s, path = simulate_switching(3, ops, offs, [300, 600], rng.uniform(0, 1, 3), 900)
        assert s.values.shape == (3, 901)
        np.testing.assert_array_equal(np.unique(path), [0, 1, 2])


class TestSimulateDlds:
    def test_one_hot_equals_linear(self):
        f = rotation_operator(2, [0.25])
        f_unit = f / np.linalg.norm(f)
        c = np.zeros((2, 40))
        c[0, :] = np.linalg.norm(f)          # one-hot scaled back to the raw rotation
        other = np.eye(2) / np.sqrt(2)
        s = simulate_dlds((f_unit, other), c, [1.0, 0.0], 40)
        ref = simulate_linear(LinearModel(f), [1.0, 0.0], 40)
        np.testing.assert_allclose(s.values, ref.values, atol=1e-12)

    def test_self_consistency_with_transition(self):
        rng = rng_for(2, "dlds")
        ops = tuple(m / np.linalg.norm(m) for m in rng.normal(size=(3, 2, 2)))
        c = rng.normal(size=(3, 30)) * 0.4
        s = simulate_dlds(ops, c, [0.3, -0.2], 30)
        model = DecomposedModel(ops, c)
        for t in range(30):
            A, b = transition_at(model, t)
            np.testing.assert_allclose(A @ s.values[:, t] + b, s.values[:, t + 1], atol=1e-12)


class TestLorenz:
    def test_fixed_point_is_stationary(self):
        p = LorenzParams()
        fp = np.array([np.sqrt(p.beta * (p.rho - 1)), np.sqrt(p.beta * (p.rho - 1)), p.rho - 1])
        s = simulate_lorenz(LorenzParams(x0=tuple(fp)), 101)
        np.testing.assert_allclose(s.values, np.tile(fp[:, None], 101), atol=1e-6)

    def test_paper_grid(self):
        s = simulate_lorenz(LorenzParams(dt=0.1 / 9), 900)
        assert s.values.shape == (3, 900)
        assert abs(s.dt - 0.1 / 9) < 1e-15

    def test_step_doubling_convergence(self):
        # halving dt must reduce the one-step error by ~2^4 (local O(dt^5), global O(dt^4))
        p1 = LorenzParams(dt=0.01, x0=(1.0, 1.0, 1.05))
        p2 = LorenzParams(dt=0.005, x0=(1.0, 1.0, 1.05))
        p_ref = LorenzParams(dt=0.00125, x0=(1.0, 1.0, 1.05))
        c1 = simulate_lorenz(p1, 2).values[:, 1]
        c2 = simulate_lorenz(p2, 3).values[:, 2]
        ref = simulate_lorenz(p_ref, 9).values[:, 8]
        e1 = np.linalg.norm(c1 - ref)
        e2 = np.linalg.norm(c2 - ref)
        assert e1 / e2 > 10  # consistent with 4th-order accuracy (ratio ~16)


class TestNoise:
    def test_zero_sigma_bit_exact(self):
        s = simulate_linear(LinearModel(rotation_operator(2, [0.1])), [1.0, 0.0], 20)
        out = add_noise(s, NoiseSpec(NoiseKind.GAUSSIAN_IID, sigma=0.0, seed=3))
        np.testing.assert_array_equal(out.values, s.values)

    def test_gaussian_sample_std(self):
        s = simulate_linear(LinearModel(np.eye(2)), [0.0, 0.0], 50000)
        out = add_noise(s, NoiseSpec(NoiseKind.GAUSSIAN_IID, sigma=0.3, seed=0))
        assert out.values.size >= 1e5
        assert 0.27 < np.std(out.values - s.values) < 0.33

    def test_structured_sine_exact(self):
        s = simulate_linear(LinearModel(np.eye(2)), [0.0, 0.0], 500)
        out = add_noise(s, NoiseSpec(NoiseKind.STRUCTURED_SINE, sigma=0.5, gamma=3.0))
        t = np.arange(501)
        expected = 0.5 * np.sin(3.0 * t)
        np.testing.assert_array_equal(out.values[0], expected)
        np.testing.assert_array_equal(out.values[1], expected)

    def test_same_seed_bit_identical(self):
        s = simulate_linear(LinearModel(np.eye(3)), [1.0, 2.0, 3.0], 100)
        a = add_noise(s, NoiseSpec(NoiseKind.GAUSSIAN_IID, sigma=1.0, seed=42))
        b = add_noise(s, NoiseSpec(NoiseKind.GAUSSIAN_IID, sigma=1.0, seed=42))
        np.testing.assert_array_equal(a.values, b.values)

    def test_streams_keyed_by_tag(self):
        a = rng_for(0, "alpha").normal(size=5)
        b = rng_for(0, "beta").normal(size=5)
        a2 = rng_for(0, "alpha").normal(size=5)
        np.testing.assert_array_equal(a, a2)
        assert not np.allclose(a, b)


class TestRoundTrips:
    def test_all_model_classes_reproduce_their_series(self):
        rng = rng_for(7, "roundtrip")
        lin = LinearModel(rotation_operator(2, [0.15]), rng.uniform(size=2))
        s_lin = simulate_linear(lin, rng.uniform(size=2), 60)
        np.testing.assert_array_equal(predict_full_lookahead(lin, s_lin.values[:, 0], 60).values, s_lin.values)

        ops = [rotation_operator(2, [a]) for a in (0.1, -0.2)]
        offs = [rng.uniform(size=2) for _ in range(2)]
        s_sw, path = simulate_switching(2, ops, offs, [25], rng.uniform(size=2), 60)
        model_sw = SwitchingModel(tuple(ops), tuple(offs), path)
        np.testing.assert_array_equal(predict_full_lookahead(model_sw, s_sw.values[:, 0], 60).values, s_sw.values)

        dops = tuple(m / np.linalg.norm(m) for m in rng.normal(size=(2, 2, 2)))
        c = 0.5 * rng.normal(size=(2, 60))
        s_d = simulate_dlds(dops, c, rng.uniform(size=2), 60)
        model_d = DecomposedModel(dops, c)
        np.testing.assert_array_equal(predict_full_lookahead(model_d, s_d.values[:, 0], 60).values, s_d.values)

        ltv_ops = np.stack([rotation_operator(2, [0.01 * t]) for t in range(60)])
        model_ltv = TimeVaryingModel(ltv_ops)
        s_ltv = predict_full_lookahead(model_ltv, rng.uniform(size=2), 60)
        np.testing.assert_array_equal(
            predict_full_lookahead(model_ltv, s_ltv.values[:, 0], 60).values, s_ltv.values
        )

    def test_cylinder_preserves_radius(self):
        m = cylinder_model(angle=0.3, drift=0.05)
        s = simulate_linear(m, [2.0, 0.0, 0.0], 400)
        radii = np.linalg.norm(s.values[:2], axis=0)
        np.testing.assert_allclose(radii, np.full(401, 2.0), atol=1e-10)
        np.testing.assert_allclose(s.values[2], 0.05 * np.arange(401), atol=1e-10)


class TestPseudoSwitching:
    def test_plateaus_and_crossfades(self):
        c = pseudo_switching_coefficients(3, 300, overlap_frac=0.1, amplitude=2.0)
        assert c.shape == (3, 300)
        # mid-segment is one-hot at the amplitude
        np.testing.assert_allclose(c[:, 50], [2.0, 0.0, 0.0])
        np.testing.assert_allclose(c[:, 150], [0.0, 2.0, 0.0])
        np.testing.assert_allclose(c[:, 250], [0.0, 0.0, 2.0])
        # during a fade the two active coefficients sum to the amplitude
        np.testing.assert_allclose(c.sum(axis=0), np.full(300, 2.0), atol=1e-12)

    def test_custom_labels(self):
        c = pseudo_switching_coefficients(2, 120, n_segments=4, labels=[0, 1, 0, 1], amplitude=1.0)
        np.testing.assert_allclose(c[:, 15], [1.0, 0.0])
        np.testing.assert_allclose(c[:, 45], [0.0, 1.0])
        np.testing.assert_allclose(c[:, 75], [1.0, 0.0])
