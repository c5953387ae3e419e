"""Monte-Carlo verification of the measure-theoretic backbone.

Estimates the free energy -(1/rho) log E[exp(-rho J)], checks that the
exponential importance ratio is a mean-one martingale under the base
measure, compares the Monte-Carlo KL divergence between controlled and
uncontrolled path laws against its analytic value (rho/2) sum u^T M u dt,
and evaluates the Legendre-transform inequality

    free energy <= E_controlled[J] + KL / rho

including its finite-sample Gibbs-weighted equality case.

Sign convention: the paper-style entropy S is the negative of standard KL;
everything here is stated in KL >= 0 form so each inequality is directly
assertable.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from contextlib import nullcontext
from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray

from .control import ActuatorSet, ControlSequence, control_energy
from .errors import InsufficientSamplesError
from .noise import STREAM_ROLLOUT, STREAM_VERIFY
from .sim import SimConfig, simulate_batch

FloatArray = NDArray[np.float64]


# Importance ratios with relative stderr beyond this are flagged heavy-tailed.
_HEAVY_TAIL_REL_STDERR = 0.25


def _pool(threads: int):
    if threads <= 1:
        return nullcontext(None)
    return ThreadPoolExecutor(max_workers=threads)


@dataclass
class MeasureReport:
    """Estimates and standard errors from one verification run."""

    rho: float
    num_rollouts: int
    free_energy_lhs: float = np.nan
    free_energy_stderr: float = np.nan
    mean_cost_controlled: float = np.nan
    mean_cost_stderr: float = np.nan
    kl_mc: float = np.nan
    kl_stderr: float = np.nan
    kl_analytic: float = np.nan
    legendre_gap: float = np.nan
    legendre_gap_stderr: float = np.nan
    gibbs_gap: float = np.nan
    martingale_mean: float = np.nan
    martingale_stderr: float = np.nan
    heavy_tailed: bool = False

    def martingale_ok(self) -> bool:
        return abs(self.martingale_mean - 1.0) <= 3.0 * self.martingale_stderr

    def kl_ok(self) -> bool:
        return abs(self.kl_mc - self.kl_analytic) <= 3.0 * self.kl_stderr

    def legendre_ok(self) -> bool:
        return self.legendre_gap >= -3.0 * self.legendre_gap_stderr

    def gibbs_ok(self, tol: float = 1e-10) -> bool:
        return abs(self.gibbs_gap) <= tol

    def all_ok(self) -> bool:
        return self.martingale_ok() and self.kl_ok() and self.legendre_ok() and self.gibbs_ok()


def estimate_free_energy(costs: FloatArray, rho: float) -> tuple[float, float]:
    """Stabilized estimate of -(1/rho) log E[exp(-rho J)] with delta-method stderr.

    Raises:
        InsufficientSamplesError: Fewer than two finite costs.
    """
    costs = np.asarray(costs, dtype=np.float64)
    costs = costs[np.isfinite(costs)]
    if costs.size < 2:
        raise InsufficientSamplesError("free energy needs at least 2 finite costs")
    m = costs.min()
    y = np.exp(-rho * (costs - m))
    ybar = y.mean()
    estimate = m - np.log(ybar) / rho
    stderr = y.std(ddof=1) / (np.sqrt(costs.size) * rho * ybar)
    return float(estimate), float(stderr)


def log_rn_derivative(
    controls: ControlSequence,
    deltas: FloatArray,
    gram: FloatArray,
    rho: float,
) -> float:
    """Log density of the controlled path law w.r.t. the uncontrolled one.

    Evaluated on controlled-measure increments:
    sqrt(rho) sum_k u_k . delta_u_k + (rho/2) sum_k u_k^T M u_k dt,
    identically rho * zeta.
    """
    deltas = np.asarray(deltas, dtype=np.float64)
    if deltas.shape != controls.u.shape:
        raise ValueError(
            f"deltas shape {deltas.shape} does not match controls {controls.u.shape}"
        )
    cross = float(np.sum(controls.u * deltas))
    return np.sqrt(rho) * cross + 0.5 * rho * control_energy(controls, gram)


def _log_rn_base_measure(
    controls: ControlSequence,
    deltas: FloatArray,
    gram: FloatArray,
    rho: float,
) -> FloatArray:
    """Batched log dQ/dP on base-measure increments (minus-quadratic form)."""
    cross = np.einsum("rln,ln->r", deltas, controls.u)
    return np.sqrt(rho) * cross - 0.5 * rho * control_energy(controls, gram)


def verify_martingale(
    config: SimConfig,
    actuators: ActuatorSet,
    controls: ControlSequence,
    num_rollouts: int,
    seed: int,
    threads: int = 1,
) -> MeasureReport:
    """Check E_P[dQ/dP] = 1 over base-measure (zero-control) rollouts.

    The contract is |mean - 1| <= 3 standard errors; a large relative
    standard error flags a heavy-tailed importance ratio without failing.

    Raises:
        InsufficientSamplesError: num_rollouts < 100.
    """
    if num_rollouts < 100:
        raise InsufficientSamplesError("martingale check needs at least 100 rollouts")
    with _pool(threads) as executor:
        batch = simulate_batch(
            config,
            actuators,
            controls=None,
            cost_spec=None,
            seed=seed,
            indices=np.arange(num_rollouts),
            stream=STREAM_ROLLOUT,
            executor=executor,
        )
    log_ratio = _log_rn_base_measure(controls, batch.deltas, actuators.gram, config.rho)
    ratio = np.exp(log_ratio)
    mean = float(ratio.mean())
    stderr = float(ratio.std(ddof=1) / np.sqrt(num_rollouts))
    report = MeasureReport(rho=config.rho, num_rollouts=num_rollouts)
    report.martingale_mean = mean
    report.martingale_stderr = stderr
    report.heavy_tailed = mean > 0 and stderr / mean > _HEAVY_TAIL_REL_STDERR
    return report


def gibbs_legendre_gap(costs: FloatArray, rho: float) -> float:
    """Finite-sample Legendre gap at the Gibbs weights (zero in exact math).

    Substituting w_r = exp(-rho J_r)/sum exp(-rho J_q) into the discrete
    inequality gives sum w J + (1/rho) sum w log(R w) - V-hat, which
    collapses identically; the return value is pure floating-point error.
    """
    costs = np.asarray(costs, dtype=np.float64)
    m = costs.min()
    shifted = -rho * (costs - m)
    logz = np.log(np.mean(np.exp(shifted)))
    fe = m - logz / rho
    w = np.exp(shifted)
    w /= w.sum()
    mean_cost = float(np.dot(w, costs))
    positive = w > 0
    kl = float(np.dot(w[positive], np.log(costs.size * w[positive])))
    return (mean_cost + kl / rho) - fe


def verify_kl_and_legendre(
    config: SimConfig,
    actuators: ActuatorSet,
    controls: ControlSequence,
    cost_spec,
    num_rollouts: int,
    seed: int,
    threads: int = 1,
) -> MeasureReport:
    """Monte-Carlo KL vs analytic KL, plus the Legendre inequality.

    Controlled rollouts estimate KL = E[log dL~/dL]; its analytic value is
    (rho/2) sum_k u_k^T M u_k dt because the projected increments have zero
    mean under the controlled measure. Uncontrolled rollouts (a disjoint
    noise stream) estimate the free energy. The Legendre gap
    E[J] + KL/rho - V must be nonnegative up to Monte-Carlo error, and the
    Gibbs-weighted finite-sample analogue closes it to rounding error.

    Raises:
        InsufficientSamplesError: num_rollouts < 100.
    """
    if num_rollouts < 100:
        raise InsufficientSamplesError("KL/Legendre check needs at least 100 rollouts")
    indices = np.arange(num_rollouts)
    with _pool(threads) as executor:
        controlled = simulate_batch(
            config,
            actuators,
            controls=controls,
            cost_spec=cost_spec,
            seed=seed,
            indices=indices,
            stream=STREAM_ROLLOUT,
            executor=executor,
        )
        uncontrolled = simulate_batch(
            config,
            actuators,
            controls=None,
            cost_spec=cost_spec,
            seed=seed,
            indices=indices,
            stream=STREAM_VERIFY,
            executor=executor,
        )

    rho = config.rho
    report = MeasureReport(rho=rho, num_rollouts=num_rollouts)

    cross = np.einsum("rln,ln->r", controlled.deltas, controls.u)
    log_rn = np.sqrt(rho) * cross + 0.5 * rho * control_energy(controls, actuators.gram)
    report.kl_mc = float(log_rn.mean())
    report.kl_stderr = float(log_rn.std(ddof=1) / np.sqrt(num_rollouts))
    report.kl_analytic = 0.5 * rho * control_energy(controls, actuators.gram)

    # Free energy from the uncontrolled batch, mean cost from the controlled.
    fe, fe_se = estimate_free_energy(uncontrolled.state_costs, rho)
    report.free_energy_lhs = fe
    report.free_energy_stderr = fe_se
    costs_c = controlled.state_costs[np.isfinite(controlled.state_costs)]
    report.mean_cost_controlled = float(costs_c.mean())
    report.mean_cost_stderr = float(costs_c.std(ddof=1) / np.sqrt(costs_c.size))

    report.legendre_gap = (
        report.mean_cost_controlled + report.kl_mc / rho - report.free_energy_lhs
    )
    report.legendre_gap_stderr = float(
        np.sqrt(
            report.mean_cost_stderr**2
            + (report.kl_stderr / rho) ** 2
            + report.free_energy_stderr**2
        )
    )
    report.gibbs_gap = gibbs_legendre_gap(uncontrolled.state_costs, rho)
    return report


def run_verification(
    config: SimConfig,
    actuators: ActuatorSet,
    controls: ControlSequence,
    cost_spec,
    num_rollouts: int,
    seed: int,
    threads: int = 1,
) -> MeasureReport:
    """Full verification suite: martingale, KL, Legendre, Gibbs equality."""
    report = verify_kl_and_legendre(
        config, actuators, controls, cost_spec, num_rollouts, seed, threads=threads
    )

    # Martingale check on a disjoint batch of base-measure rollouts.
    mart = verify_martingale(config, actuators, controls, num_rollouts, seed + 1, threads=threads)
    report.martingale_mean = mart.martingale_mean
    report.martingale_stderr = mart.martingale_stderr
    report.heavy_tailed = mart.heavy_tailed
    return report


def format_report(report: MeasureReport) -> str:
    """Human-readable MeasureReport block for the CLI."""
    lines = [
        f"rollouts per estimate : {report.num_rollouts}",
        f"rho                   : {report.rho:g}",
        (
            f"martingale mean       : {report.martingale_mean:.6f}"
            f" +- {report.martingale_stderr:.6f}"
            f"  [{'ok' if report.martingale_ok() else 'FAIL'}]"
            + ("  (heavy-tailed ratio)" if report.heavy_tailed else "")
        ),
        (
            f"KL monte-carlo        : {report.kl_mc:.6f} +- {report.kl_stderr:.6f}"
            f"  vs analytic {report.kl_analytic:.6f}"
            f"  [{'ok' if report.kl_ok() else 'FAIL'}]"
        ),
        f"free energy (lhs)     : {report.free_energy_lhs:.6f} +- {report.free_energy_stderr:.6f}",
        f"mean controlled cost  : {report.mean_cost_controlled:.6f} +- {report.mean_cost_stderr:.6f}",
        (
            f"legendre gap          : {report.legendre_gap:.6f}"
            f" (stderr {report.legendre_gap_stderr:.6f})"
            f"  [{'ok' if report.legendre_ok() else 'FAIL'}]"
        ),
        (
            f"gibbs equality gap    : {report.gibbs_gap:.3e}"
            f"  [{'ok' if report.gibbs_ok() else 'FAIL'}]"
        ),
        f"overall               : {'PASS' if report.all_ok() else 'FAIL'}",
    ]
    return "\n".join(lines)
