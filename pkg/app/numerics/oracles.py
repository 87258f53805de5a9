"""Reference values computed independently of the shooting and transform code."""
import logging
from typing import List

import numpy as np
from scipy import integrate, optimize

from app.core.exceptions import InvalidProblemError
from app.models import CouplingMap, NonlinearityKind
from app.numerics.problem import SpectralProblem, cutoff, eval_nonlinearity

logger = logging.getLogger(__name__)


def _require(problem: SpectralProblem, kind: NonlinearityKind):
    if problem.nonlinearity.kind != kind:
        raise InvalidProblemError(f"oracle needs a {kind.value} problem", kind=problem.nonlinearity.kind.value)


def constant_forcing_fixed_point(problem: SpectralProblem) -> np.ndarray:
    """A^{-1} c, the rest state when it lies inside the inner cutoff radius."""
    _require(problem, NonlinearityKind.CONSTANT_FORCING)
    return np.asarray(problem.nonlinearity.forcing, dtype=float) / problem.eigenvalues


def constant_forcing_q(problem: SpectralProblem) -> np.ndarray:
    """Q-coordinates of A^{-1} Q c."""
    return constant_forcing_fixed_point(problem)[problem.split_index:]


def decoupled_phi(problem: SpectralProblem, p0, epsabs: float = 1e-12) -> np.ndarray:
    """q0 = int_{-inf}^0 e^{lambda_{N+1} s} g(e^{-A_P s} p0) ds in the first Q coordinate.

    g vanishes once the backward P-orbit leaves the coupling radius, so the
    integral runs over a finite window.
    """
    _require(problem, NonlinearityKind.DECOUPLED)
    spec = problem.nonlinearity
    p0 = np.asarray(p0, dtype=float)
    lam_p = problem.p_eigenvalues
    lam_q = problem.lambda_n1
    out = np.zeros(problem.q_dim)
    if not np.linalg.norm(p0) < spec.coupling_radius:
        return out

    def coupling(s: float) -> float:
        p = p0 * np.exp(-lam_p * s)
        size = np.linalg.norm(p)
        if size >= spec.coupling_radius:
            return 0.0
        raw = spec.coupling_gain * size ** 2 if spec.coupling == CouplingMap.QUADRATIC \
            else spec.coupling_gain * np.sin(p[0])
        return float(np.exp(lam_q * s) * cutoff(size / spec.coupling_radius, spec.cutoff_inner) * raw)

    if np.linalg.norm(p0) == 0.0:
        return out
    # leave time of the coupling ball is bounded by the slowest P-mode
    s_min = -np.log(spec.coupling_radius / np.linalg.norm(p0)) / lam_p.min()
    inner = -np.log(spec.coupling_radius * spec.cutoff_inner / np.linalg.norm(p0)) / lam_p.min()
    breaks = [x for x in (inner,) if s_min < x < 0.0]
    value, _ = integrate.quad(coupling, s_min, 0.0, points=breaks or None, epsabs=epsabs, epsrel=1e-12, limit=200)
    out[0] = value
    return out


def chafee_infante_stationary_states(problem: SpectralProblem, n_guesses: int = 16,
                                     seed: int = 0) -> np.ndarray:
    """Distinct roots of -Au + F(u) = 0 found from seeded starts in the ball |u| <= R."""
    _require(problem, NonlinearityKind.CHAFEE_INFANTE)
    rng = np.random.default_rng(seed)
    guesses = [np.zeros(problem.dim)]
    for k in range(n_guesses - 1):
        g = np.zeros(problem.dim)
        g[k % min(problem.dim, 4)] = rng.uniform(-1.0, 1.0) * problem.r_trunc
        guesses.append(g)

    def residual(u):
        return -problem.eigenvalues * u + eval_nonlinearity(problem, u)

    found: List[np.ndarray] = []
    for guess in guesses:
        sol = optimize.root(residual, guess, method="hybr", tol=1e-13)
        if not sol.success or np.linalg.norm(residual(sol.x)) > 1e-10:
            continue
        if all(np.linalg.norm(sol.x - f) > 1e-8 for f in found):
            found.append(sol.x)
    logger.debug("Stationary states", extra={"n_points": len(found), "preset": problem.name})
    return np.array(found).reshape(-1, problem.dim)
