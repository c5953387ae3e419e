"""Free energy, Radon-Nikodym evaluation, martingale and KL/Legendre checks."""

import numpy as np
import pytest

import spdecontrol as sc
from spdecontrol.grid import Field
from spdecontrol.measures import format_report, gibbs_legendre_gap
from spdecontrol.sim import DriftKind, DriftSpec, SimConfig


@pytest.fixture(scope="module")
def heat_setup():
    grid = sc.build_grid(0.0, 1.0, 64, sc.BoundaryCondition.DIRICHLET_ZERO)
    noise = sc.build_eigenbasis(grid, 32)
    acts = sc.build_actuators([0.2, 0.5, 0.8], [0.05, 0.05, 0.05], grid, noise)
    config = SimConfig(
        grid=grid,
        drift=DriftSpec(DriftKind.HEAT, 0.3),
        noise=noise,
        rho=10.0,
        dt=0.01,
        num_steps=100,
        initial_condition=Field(grid, np.zeros(65)),
    )
    cost = sc.CostSpec(
        kappa=1.0,
        windows=[
            sc.CostWindow(0.18, 0.22, 5.0),
            sc.CostWindow(0.48, 0.52, 2.5),
            sc.CostWindow(0.78, 0.82, 5.0),
        ],
    )
    return config, acts, cost


class TestFreeEnergy:
    def test_constant_costs(self):
        fe, se = sc.estimate_free_energy(np.full(100, 4.2), rho=3.0)
        assert fe == pytest.approx(4.2, abs=1e-12)
        assert se == pytest.approx(0.0, abs=1e-15)

    def test_small_rho_limit_is_mean(self):
        rng = np.random.default_rng(0)
        costs = rng.uniform(0.0, 1.0, size=500)
        fe, _ = sc.estimate_free_energy(costs, rho=1e-8)
        assert fe == pytest.approx(costs.mean(), abs=1e-4)

    def test_two_point_value(self):
        fe, _ = sc.estimate_free_energy(np.array([0.0, np.log(2.0)]), rho=1.0)
        assert fe == pytest.approx(np.log(4.0 / 3.0), rel=1e-12)

    def test_insufficient_samples(self):
        with pytest.raises(sc.InsufficientSamplesError):
            sc.estimate_free_energy(np.array([1.0]), rho=1.0)
        with pytest.raises(sc.InsufficientSamplesError):
            sc.estimate_free_energy(np.array([1.0, np.inf]), rho=1.0)

    def test_jensen_bound(self):
        rng = np.random.default_rng(1)
        for _ in range(20):
            costs = rng.exponential(2.0, size=200)
            rho = float(rng.uniform(0.05, 5.0))
            fe, se = sc.estimate_free_energy(costs, rho)
            assert fe <= costs.mean() + 3.0 * se + 1e-12


class TestLogRnDerivative:
    def test_zero_control(self):
        M = np.eye(2)
        controls = sc.ControlSequence(np.zeros((3, 2)), 0.1)
        assert sc.log_rn_derivative(controls, np.ones((3, 2)), M, 5.0) == 0.0

    def test_hand_value(self):
        # 1 step, 1 actuator: u=2, delta=0.3, M=0.5, rho=4, dt=0.1
        # sqrt(4)*2*0.3 + (4/2)*(2*0.5*2)*0.1 = 1.2 + 0.4 = 1.6
        M = np.array([[0.5]])
        controls = sc.ControlSequence(np.array([[2.0]]), 0.1)
        got = sc.log_rn_derivative(controls, np.array([[0.3]]), M, 4.0)
        assert got == pytest.approx(1.6, rel=1e-14)

    def test_equals_rho_zeta(self):
        rng = np.random.default_rng(2)
        M = np.array([[0.3, 0.05], [0.05, 0.2]])
        for _ in range(50):
            u = rng.normal(size=(4, 2))
            deltas = rng.normal(size=(4, 2))
            rho = float(rng.uniform(0.1, 30.0))
            controls = sc.ControlSequence(u, 0.05)
            assert sc.log_rn_derivative(controls, deltas, M, rho) == pytest.approx(
                rho * sc.zeta(controls, deltas, M, rho), rel=1e-12
            )


class TestMartingale:
    def test_zero_control_exact(self, heat_setup):
        config, acts, _ = heat_setup
        controls = sc.ControlSequence(np.zeros((100, 3)), config.dt)
        rep = sc.verify_martingale(config, acts, controls, 200, seed=0)
        assert rep.martingale_mean == pytest.approx(1.0, abs=1e-15)
        assert rep.martingale_stderr == pytest.approx(0.0, abs=1e-15)

    def test_moderate_control(self, heat_setup):
        config, acts, _ = heat_setup
        controls = sc.ControlSequence(np.full((100, 3), 0.3), config.dt)
        rep = sc.verify_martingale(config, acts, controls, 10000, seed=7)
        assert abs(rep.martingale_mean - 1.0) <= 3.0 * rep.martingale_stderr
        assert not rep.heavy_tailed

    def test_large_control_flags_heavy_tail(self, heat_setup):
        config, acts, _ = heat_setup
        controls = sc.ControlSequence(np.full((100, 3), 8.0), config.dt)
        rep = sc.verify_martingale(config, acts, controls, 500, seed=3)
        assert rep.heavy_tailed  # diagnostic only, no hard failure

    def test_insufficient_samples(self, heat_setup):
        config, acts, _ = heat_setup
        controls = sc.ControlSequence(np.zeros((100, 3)), config.dt)
        with pytest.raises(sc.InsufficientSamplesError):
            sc.verify_martingale(config, acts, controls, 10, seed=0)


class TestKlAndLegendre:
    def test_zero_control_coincides(self, heat_setup):
        config, acts, cost = heat_setup
        controls = sc.ControlSequence(np.zeros((100, 3)), config.dt)
        rep = sc.verify_kl_and_legendre(config, acts, controls, cost, 400, seed=1)
        assert rep.kl_analytic == 0.0
        assert rep.kl_mc == pytest.approx(0.0, abs=1e-12)
        # Jensen gap of the finite sample is nonnegative.
        assert rep.legendre_gap >= -3.0 * rep.legendre_gap_stderr

    def test_kl_matches_analytic(self, heat_setup):
        config, acts, cost = heat_setup
        controls = sc.ControlSequence(np.full((100, 3), 0.3), config.dt)
        rep = sc.verify_kl_and_legendre(config, acts, controls, cost, 10000, seed=2)
        assert abs(rep.kl_mc - rep.kl_analytic) <= 3.0 * rep.kl_stderr
        assert rep.kl_analytic > 0

    def test_legendre_gap_nonnegative(self, heat_setup):
        config, acts, cost = heat_setup
        controls = sc.ControlSequence(np.full((100, 3), 0.2), config.dt)
        rep = sc.verify_kl_and_legendre(config, acts, controls, cost, 2000, seed=3)
        assert rep.legendre_gap >= -3.0 * rep.legendre_gap_stderr

    def test_gibbs_equality_closes_gap(self, heat_setup):
        config, acts, cost = heat_setup
        controls = sc.ControlSequence(np.zeros((100, 3)), config.dt)
        rep = sc.verify_kl_and_legendre(config, acts, controls, cost, 500, seed=4)
        assert abs(rep.gibbs_gap) <= 1e-10

    def test_gibbs_equality_moderate_spread(self):
        # Non-degenerate weights: uniform costs at rho = 1.
        rng = np.random.default_rng(5)
        for _ in range(20):
            costs = rng.uniform(0.0, 1.0, size=200)
            assert abs(gibbs_legendre_gap(costs, rho=1.0)) <= 1e-10


class TestRunVerification:
    def test_full_report(self, heat_setup):
        config, acts, cost = heat_setup
        controls = sc.ControlSequence(np.full((100, 3), 0.3), config.dt)
        rep = sc.run_verification(config, acts, controls, cost, 2000, seed=6)
        assert rep.all_ok()
        text = format_report(rep)
        assert "martingale" in text and "PASS" in text

    def test_insufficient(self, heat_setup):
        config, acts, cost = heat_setup
        controls = sc.ControlSequence(np.zeros((100, 3)), config.dt)
        with pytest.raises(sc.InsufficientSamplesError):
            sc.run_verification(config, acts, controls, cost, 10, seed=0)
