"""Dichotomy constants and trajectory-pair conformance checks.

alpha and beta are the roots of x^2 + Dx - K1^2 = 0 (alpha positive, beta
the negated negative root) with D = lambda_{N+1} - lambda_1. The remaining
constants come from propagating the sigma/rho differential inequalities:

    |sigma(t)| <= K2 |sigma0| e^{-rate tau} + K3 |rho0| e^{(K1 - lambda1) tau}
    |rho(t)|   <= |rho0| (1 + K4 tau) e^{(K1 - lambda1) tau} + K5 |sigma0| e^{(K1 - lambda1) tau}

with rate = lambda_{N+1} - K1 - alpha, K2 = 1 + K1^2/(alpha beta) = 2,
K3 = K1/D + K1^2/(D (D + beta) (D - alpha)), K4 = K1 K3 and
K5 = K1 K2 / (D - alpha). K3, K4 and K5 need D > alpha.
"""
import logging
import math
from typing import Optional, Tuple

import numpy as np

from app.core.exceptions import DimensionMismatchError, InvalidRateInputError
from app.models import InequalityCheck, RateConstants, SigmaRhoReport
from app.numerics.flow import Trajectory
from app.numerics.problem import SpectralProblem, norms

logger = logging.getLogger(__name__)

K2_IDENTITY = 2.0


def alpha_beta(lambda1: float, lambda_n1: float, k1: float) -> Tuple[float, float]:
    if not (0 < lambda1 < lambda_n1) or k1 < 0 or not math.isfinite(k1):
        raise InvalidRateInputError(lambda1, lambda_n1, k1)
    delta = lambda_n1 - lambda1
    root = math.hypot(delta, 2.0 * k1)
    beta = 0.5 * (delta + root)
    # product form avoids cancellation in (-delta + root) / 2
    alpha = k1 * k1 / beta
    return alpha, beta


def rate_constants(problem: SpectralProblem) -> RateConstants:
    lambda1, lambda_n, lambda_n1 = problem.lambda1, problem.lambda_n, problem.lambda_n1
    k1 = problem.k1
    alpha, beta = alpha_beta(lambda1, lambda_n1, k1)
    delta = lambda_n1 - lambda1
    margin = delta - alpha

    k3 = k4 = k5 = None
    if margin > 0:
        k3 = k1 / delta + k1 * k1 / (delta * (delta + beta) * margin)
        k4 = k1 * k3
        k5 = k1 * K2_IDENTITY / margin

    rate = lambda_n1 - k1 - alpha
    return RateConstants(
        lambda1=lambda1,
        lambdaN=lambda_n,
        lambdaN1=lambda_n1,
        k0=problem.k0,
        k1=k1,
        alpha=alpha,
        beta=beta,
        k2=K2_IDENTITY,
        k3=k3,
        k4=k4,
        k5=k5,
        rate=rate,
        gap_delta=delta,
        rate_positive=rate > 0,
        k3_denominator_valid=margin > 0,
        spectral_gap_condition=lambda_n1 - lambda_n > 2 * k1,
        lambda1_repeated="lambda1_repeated" in problem.flags,
    )


def _inequality(name: str, lhs: np.ndarray, rhs: np.ndarray, slack: float) -> InequalityCheck:
    excess = lhs - rhs
    return InequalityCheck(
        name=name,
        max_violation=float(max(excess.max(), 0.0)),
        min_slack=float((rhs - lhs).min()),
        passed=bool(excess.max() <= slack),
    )


def verify_sigma_rho(
    problem: SpectralProblem,
    u_traj: Trajectory,
    v_traj: Trajectory,
    t0: float,
    t: float,
    slack: Optional[float] = None,
    constants: Optional[RateConstants] = None,
) -> SigmaRhoReport:
    """Check both difference inequalities at every stored time in [t0, t]."""
    if u_traj.states.shape != v_traj.states.shape or not np.allclose(
            u_traj.times, v_traj.times, rtol=0.0, atol=1e-12):
        raise DimensionMismatchError(
            "trajectory time grids", list(u_traj.states.shape), list(v_traj.states.shape)
        )
    constants = constants or rate_constants(problem)
    slack = 10.0 * u_traj.step if slack is None else slack

    if not constants.k3_denominator_valid:
        logger.warning("sigma/rho checks skipped", extra={"preset": problem.name})
        return SigmaRhoReport(
            t0=t0, t=t,
            checks=[
                InequalityCheck(name=name, max_violation=0.0, min_slack=0.0, passed=True, skipped=True)
                for name in ("sigma_bound", "rho_bound")
            ],
            passed=True,
            skipped_reason="lambda_{N+1} - lambda_1 - alpha <= 0",
        )

    i0, i1 = u_traj.index_of(t0), u_traj.index_of(t)
    diff = u_traj.states[i0:i1 + 1] - v_traj.states[i0:i1 + 1]
    rho = norms(diff[..., :problem.split_index])
    sigma = norms(diff[..., problem.split_index:])
    tau = u_traj.times[i0:i1 + 1] - u_traj.times[i0]
    tau = tau.reshape(tau.shape + (1,) * (rho.ndim - 1))

    growth = np.exp((constants.k1 - constants.lambda1) * tau)
    sigma_rhs = constants.k3 * rho[0] * growth + constants.k2 * sigma[0] * np.exp(-constants.rate * tau)
    rho_rhs = rho[0] * (1.0 + constants.k4 * tau) * growth + constants.k5 * sigma[0] * growth

    checks = [
        _inequality("sigma_bound", sigma, sigma_rhs, slack),
        _inequality("rho_bound", rho, rho_rhs, slack),
    ]
    return SigmaRhoReport(t0=t0, t=t, checks=checks, passed=all(c.passed for c in checks))
