"""Actuators, projections, costs, Gibbs weights, and the control update."""

import numpy as np
import pytest
from scipy.integrate import simpson

import spdecontrol as sc
from spdecontrol.control import control_energy, project_increments, zero_controls
from spdecontrol.sim import Trajectory
from spdecontrol.noise import IncrementTable


@pytest.fixture
def setup():
    grid = sc.build_grid(0.0, 1.0, 64, sc.BoundaryCondition.DIRICHLET_ZERO)
    noise = sc.build_eigenbasis(grid, 32)
    acts = sc.build_actuators([0.2, 0.5, 0.8], [0.05, 0.05, 0.05], grid, noise)
    return grid, noise, acts


class TestBuildActuators:
    def test_identical_actuators_error_at_zero_jitter(self, setup):
        grid, noise, _ = setup
        with pytest.raises(sc.DegenerateActuatorsError):
            sc.build_actuators([0.5, 0.5], [0.1, 0.1], grid, noise, max_jitter_scale=0.0)

    def test_single_actuator_gram(self, setup):
        grid, noise, _ = setup
        acts = sc.build_actuators([0.5], [0.05], grid, noise)
        assert acts.gram.shape == (1, 1)
        assert acts.gram[0, 0] > 0

    def test_narrow_gaussians_vs_simpson_oracle(self, setup):
        grid, noise, _ = setup
        sigma = 0.02
        acts = sc.build_actuators([0.2, 0.5, 0.8], [sigma] * 3, grid, noise)
        # Off-diagonals vanish for well-separated narrow bumps.
        off = acts.gram - np.diag(np.diag(acts.gram))
        assert np.abs(off).max() < 1e-6 * acts.gram[0, 0]
        # Diagonal close to the continuum self-overlap sigma*sqrt(pi),
        # cross-checked against a fine Simpson quadrature oracle.
        xs = np.linspace(0.0, 1.0, 100001)
        for i, mu in enumerate((0.2, 0.5, 0.8)):
            oracle = simpson(np.exp(-((xs - mu) ** 2) / sigma**2), x=xs)
            assert acts.gram[i, i] == pytest.approx(oracle, rel=1e-3)
            assert acts.gram[i, i] == pytest.approx(sigma * np.sqrt(np.pi), rel=1e-3)

    def test_rejects_bad_inputs(self, setup):
        grid, noise, _ = setup
        with pytest.raises(ValueError):
            sc.build_actuators([0.5], [0.0], grid, noise)
        with pytest.raises(ValueError):
            sc.build_actuators([1.5], [0.1], grid, noise)
        with pytest.raises(ValueError):
            sc.build_actuators([], [], grid, noise)

    def test_gram_solve_consistency(self, setup):
        _, _, acts = setup
        rng = np.random.default_rng(0)
        for _ in range(10):
            v = rng.normal(size=3)
            x = acts.gram_solve(v)
            np.testing.assert_allclose(acts.gram @ x, v, rtol=1e-8, atol=1e-12)


class TestDeltaU:
    def test_zero_row(self, setup):
        _, _, acts = setup
        np.testing.assert_array_equal(sc.delta_u(acts, np.zeros(32)), np.zeros(3))

    def test_mode_aligned_actuator(self, setup):
        grid, noise, _ = setup
        # An "actuator" equal to e_1 picks out exactly dbeta_1. Bypass the
        # Gaussian constructor to align shapes with the basis.
        acts = sc.build_actuators([0.5], [0.05], grid, noise)
        aligned = sc.ActuatorSet(
            grid=grid,
            mus=acts.mus,
            sigmas=acts.sigmas,
            shapes=noise.shapes[:1].copy(),
            gram=np.array([[1.0]]),
            gram_factor=acts.gram_factor,
            projections=np.array([[1.0] + [0.0] * 31]),
            jitter=0.0,
        )
        row = np.zeros(32)
        row[0] = 0.37
        assert sc.delta_u(aligned, row)[0] == pytest.approx(0.37, abs=1e-15)

    def test_matches_double_sum_oracle(self, setup):
        _, _, acts = setup
        rng = np.random.default_rng(17)
        row = rng.normal(size=32)
        got = sc.delta_u(acts, row)
        for l in range(3):
            expected = sum(acts.projections[l, s] * row[s] for s in range(32))
            assert got[l] == pytest.approx(expected, rel=1e-12)

    def test_batched_projection(self, setup):
        _, _, acts = setup
        rng = np.random.default_rng(3)
        dbeta = rng.normal(size=(4, 6, 32))
        batched = project_increments(acts, dbeta)
        for r in range(4):
            for j in range(6):
                np.testing.assert_allclose(
                    batched[r, j], sc.delta_u(acts, dbeta[r, j]), atol=1e-14
                )


class TestZeta:
    def test_zero_controls(self, setup):
        _, _, acts = setup
        controls = zero_controls(5, 3, 0.1)
        deltas = np.ones((5, 3))
        assert sc.zeta(controls, deltas, acts.gram, 10.0) == 0.0

    def test_orthogonal_cross_term(self):
        # Single step, u orthogonal to delta-u: only the quadratic survives.
        M = np.array([[2.0, 0.0], [0.0, 1.0]])
        controls = sc.ControlSequence(np.array([[1.0, 0.0]]), 0.1)
        deltas = np.array([[0.0, 3.0]])
        # 0.5 * u^T M u * dt = 0.5 * 2 * 0.1 = 0.1
        assert sc.zeta(controls, deltas, M, 4.0) == pytest.approx(0.1, abs=1e-15)

    def test_direct_evaluation_oracle(self, setup):
        _, _, acts = setup
        rng = np.random.default_rng(23)
        rho, dt, L = 7.0, 0.05, 8
        u = rng.normal(size=(L, 3))
        deltas = rng.normal(size=(L, 3))
        controls = sc.ControlSequence(u, dt)
        expected = 0.0
        for k in range(L):
            expected += (1.0 / np.sqrt(rho)) * float(u[k] @ deltas[k])
            expected += 0.5 * float(u[k] @ acts.gram @ u[k]) * dt
        assert sc.zeta(controls, deltas, acts.gram, rho) == pytest.approx(expected, rel=1e-12)

    def test_radon_nikodym_identity(self, setup):
        # exp(rho * zeta) equals the controlled/uncontrolled path density
        # ratio evaluated on the same increments: log_rn = rho * zeta.
        _, _, acts = setup
        rng = np.random.default_rng(29)
        for _ in range(100):
            L = rng.integers(1, 6)
            rho = float(rng.uniform(0.1, 20.0))
            u = rng.normal(size=(L, 3))
            deltas = rng.normal(size=(L, 3))
            controls = sc.ControlSequence(u, 0.05)
            z = sc.zeta(controls, deltas, acts.gram, rho)
            log_rn = sc.log_rn_derivative(controls, deltas, acts.gram, rho)
            assert log_rn == pytest.approx(rho * z, rel=1e-10, abs=1e-12)


def make_trajectory(grid, states, dt=0.01):
    L = len(states) - 1
    table = IncrementTable(dbeta=np.zeros((L, 1)), dt=dt, seed=0, rollout_index=0)
    return Trajectory(grid=grid, states=np.asarray(states, dtype=float), increments=table, dt=dt)


class TestStateCost:
    def test_exact_match_is_free(self, setup):
        grid, _, _ = setup
        spec = sc.CostSpec(kappa=1.0, windows=[sc.CostWindow(0.18, 0.22, 5.0)])
        states = np.full((3, 65), 5.0)
        assert sc.state_cost(make_trajectory(grid, states), spec) == 0.0

    def test_single_node_single_step(self):
        grid = sc.build_grid(0.0, 1.0, 4, sc.BoundaryCondition.DIRICHLET_ZERO)
        spec = sc.CostSpec(kappa=1.0, windows=[sc.CostWindow(0.5, 0.5, 3.0)])
        states = np.zeros((2, 5))
        states[1, 2] = 5.0  # deviation 2 at the single window node
        assert sc.state_cost(make_trajectory(grid, states), spec) == pytest.approx(4.0)

    def test_heat_windows_vs_enumeration_oracle(self, setup):
        grid, _, _ = setup
        spec = sc.CostSpec(
            kappa=1.0,
            windows=[
                sc.CostWindow(0.18, 0.22, 5.0),
                sc.CostWindow(0.48, 0.52, 2.5),
                sc.CostWindow(0.78, 0.82, 5.0),
            ],
        )
        states = np.zeros((2, 65))
        got = sc.state_cost(make_trajectory(grid, states), spec)
        # direct enumeration oracle over nodes of the J=64 grid
        expected = 0.0
        for k in range(65):
            x = k / 64.0
            if 0.18 <= x <= 0.22 or 0.78 <= x <= 0.82:
                expected += 5.0**2
            elif 0.48 <= x <= 0.52:
                expected += 2.5**2
        assert got == pytest.approx(expected, rel=1e-14)
        assert expected == pytest.approx(168.75)

    def test_terminal_only(self, setup):
        grid, _, _ = setup
        spec = sc.CostSpec(
            kappa=2.0, windows=[sc.CostWindow(0.48, 0.52, 1.0)], terminal_only=True
        )
        states = np.zeros((4, 65))
        states[1:3] = 9.0  # intermediate deviations must not count
        n_nodes = spec.node_indices(grid).size
        assert sc.state_cost(make_trajectory(grid, states), spec) == pytest.approx(
            2.0 * n_nodes * 1.0
        )

    def test_desired_profile_function(self, setup):
        grid, _, _ = setup
        spec = sc.CostSpec(
            kappa=1.0,
            windows=[sc.CostWindow(0.0, 1.0, 0.0)],
            desired=lambda x, t: np.sin(np.pi * x) * t,
        )
        states = np.zeros((2, 65))
        got = sc.state_cost(make_trajectory(grid, states, dt=0.5), spec)
        expected = float(np.sum(np.sin(np.pi * grid.nodes) ** 2 * 0.25))
        assert got == pytest.approx(expected, rel=1e-12)


class TestImportanceWeights:
    def test_equal_costs_uniform(self):
        w = sc.importance_weights(np.full(7, 3.3), rho=2.0)
        np.testing.assert_allclose(w, np.full(7, 1.0 / 7.0), rtol=1e-14)

    def test_infinite_cost_gets_zero(self):
        w = sc.importance_weights(np.array([0.0, np.inf]), rho=1.0)
        np.testing.assert_array_equal(w, [1.0, 0.0])

    def test_gibbs_ratio(self):
        w = sc.importance_weights(np.array([0.0, np.log(2.0)]), rho=1.0)
        np.testing.assert_allclose(w, [2.0 / 3.0, 1.0 / 3.0], rtol=1e-14)

    def test_all_failed(self):
        with pytest.raises(sc.AllRolloutsFailedError):
            sc.importance_weights(np.array([np.inf, np.nan]), rho=1.0)

    def test_shift_invariance(self):
        rng = np.random.default_rng(31)
        costs = rng.uniform(0.0, 5.0, size=50)
        w1 = sc.importance_weights(costs, rho=3.0)
        w2 = sc.importance_weights(costs + 123.456, rho=3.0)
        np.testing.assert_allclose(w1, w2, atol=1e-12)

    def test_softmax_limits(self):
        costs = np.array([1.0, 2.0, 5.0])
        soft = sc.importance_weights(costs, rho=1e-8)
        np.testing.assert_allclose(soft, np.full(3, 1.0 / 3.0), atol=1e-6)
        hard = sc.importance_weights(costs, rho=1e8)
        np.testing.assert_allclose(hard, [1.0, 0.0, 0.0], atol=1e-12)

    def test_nan_treated_as_failed(self):
        w = sc.importance_weights(np.array([1.0, np.nan, 2.0]), rho=1.0)
        assert w[1] == 0.0
        assert w.sum() == pytest.approx(1.0, abs=1e-12)


class TestUpdateControls:
    def rng_batch(self, seed, R, L, N, rho, dt):
        rng = np.random.default_rng(seed)
        costs = rng.uniform(0.0, 2.0, size=R)
        zetas = rng.normal(0.0, 0.1, size=R)
        deltas = rng.normal(size=(R, L, N))
        return sc.build_rollout_batch(costs, zetas, deltas, rho, dt)

    def test_all_weight_on_zero_delta(self, setup):
        _, _, acts = setup
        deltas = np.zeros((2, 4, 3))
        deltas[1] = 5.0
        batch = sc.build_rollout_batch(
            np.array([0.0, np.inf]), np.zeros(2), deltas, rho=1.0, dt=0.1
        )
        u_prev = sc.ControlSequence(np.arange(12, dtype=float).reshape(4, 3), 0.1)
        out = sc.update_controls(u_prev, batch, acts, rho=1.0)
        np.testing.assert_array_equal(out.u, u_prev.u)

    def test_antisymmetric_deltas_cancel(self, setup):
        _, _, acts = setup
        rng = np.random.default_rng(5)
        d = rng.normal(size=(1, 6, 3))
        deltas = np.concatenate([d, -d], axis=0)
        batch = sc.build_rollout_batch(np.zeros(2), np.zeros(2), deltas, rho=2.0, dt=0.05)
        u_prev = sc.ControlSequence(rng.normal(size=(6, 3)), 0.05)
        out = sc.update_controls(u_prev, batch, acts, rho=2.0)
        np.testing.assert_allclose(out.u, u_prev.u, atol=1e-12)

    def test_dense_arithmetic_oracle(self, setup):
        _, _, acts = setup
        rho, dt = 3.0, 0.02
        batch = self.rng_batch(7, R=3, L=3, N=3, rho=rho, dt=dt)
        u_prev = sc.ControlSequence(np.random.default_rng(9).normal(size=(3, 3)), dt)
        out = sc.update_controls(u_prev, batch, acts, rho)
        Minv = np.linalg.inv(acts.gram)
        for j in range(3):
            weighted = np.zeros(3)
            for r in range(3):
                weighted += batch.weights[r] * batch.deltas[r, j]
            expected = u_prev.u[j] + Minv @ weighted / (np.sqrt(rho) * dt)
            np.testing.assert_allclose(out.u[j], expected, atol=1e-12)

    def test_one_shot_equals_update_from_zero(self, setup):
        _, _, acts = setup
        rho, dt = 5.0, 0.01
        batch = self.rng_batch(11, R=6, L=4, N=3, rho=rho, dt=dt)
        one = sc.one_shot_optimal_controls(batch, acts, rho)
        via_update = sc.update_controls(zero_controls(4, 3, dt), batch, acts, rho)
        np.testing.assert_array_equal(one.u, via_update.u)

    def test_one_shot_zero_noise(self, setup):
        _, _, acts = setup
        batch = sc.build_rollout_batch(
            np.array([1.0, 2.0]), np.zeros(2), np.zeros((2, 4, 3)), rho=1.0, dt=0.1
        )
        out = sc.one_shot_optimal_controls(batch, acts, 1.0)
        np.testing.assert_array_equal(out.u, np.zeros((4, 3)))

    def test_one_shot_single_rollout_dense_oracle(self, setup):
        _, _, acts = setup
        rho, dt = 4.0, 0.05
        rng = np.random.default_rng(13)
        deltas = rng.normal(size=(1, 2, 3))
        batch = sc.build_rollout_batch(np.array([0.7]), np.zeros(1), deltas, rho, dt)
        out = sc.one_shot_optimal_controls(batch, acts, rho)
        Minv = np.linalg.inv(acts.gram)
        for j in range(2):
            np.testing.assert_allclose(
                out.u[j], Minv @ deltas[0, j] / (np.sqrt(rho) * dt), atol=1e-12
            )

    def test_control_energy_is_weighted_norm(self, setup):
        _, _, acts = setup
        rng = np.random.default_rng(19)
        u = rng.normal(size=(5, 3))
        controls = sc.ControlSequence(u, 0.1)
        expected = sum(float(u[k] @ acts.gram @ u[k]) for k in range(5)) * 0.1
        assert control_energy(controls, acts.gram) == pytest.approx(expected, rel=1e-12)
