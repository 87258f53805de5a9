"""Exponential Euler integration of u_t + Au = F(u).

The linear part is propagated exactly; F is frozen over each step. Every
function takes a single state (M,) or a batch (B, M).
"""
import logging
from dataclasses import dataclass, replace
from typing import Dict, Tuple

import numpy as np

from app.core.exceptions import NonFiniteStateError, InvalidArgumentError
from app.numerics.problem import SpectralProblem, as_state, eval_nonlinearity

logger = logging.getLogger(__name__)

# Step counts within this relative distance of an integer are taken as exact
_STEP_ROUNDING = 1e-9


@dataclass(frozen=True)
class Trajectory:
    times: np.ndarray
    states: np.ndarray
    step: float

    @property
    def final(self) -> np.ndarray:
        return self.states[-1]

    def index_of(self, t: float) -> int:
        """Index of the stored time closest to ``t``; raises when none is within h/2."""
        idx = int(np.argmin(np.abs(self.times - t)))
        if abs(self.times[idx] - t) > 0.5 * self.step:
            raise InvalidArgumentError(
                "time not on the trajectory grid",
                {"t": t, "start": float(self.times[0]), "end": float(self.times[-1])}
            )
        return idx

    def shifted(self, offset: float) -> "Trajectory":
        return replace(self, times=self.times + offset)


@dataclass(frozen=True)
class StepCoefficients:
    decay: np.ndarray
    gain: np.ndarray


_coefficient_cache: Dict[Tuple[bytes, float], StepCoefficients] = {}


def step_coefficients(problem: SpectralProblem, h: float) -> StepCoefficients:
    """e^{-lambda h} and (1 - e^{-lambda h})/lambda, computed once per (spectrum, h)."""
    key = (problem.eigenvalues.tobytes(), float(h))
    coeffs = _coefficient_cache.get(key)
    if coeffs is None:
        lam = problem.eigenvalues
        coeffs = StepCoefficients(decay=np.exp(-lam * h), gain=-np.expm1(-lam * h) / lam)
        _coefficient_cache[key] = coeffs
    return coeffs


def _check_finite(u: np.ndarray, stage: str):
    if not np.all(np.isfinite(u)):
        bad = np.unique(np.nonzero(~np.isfinite(u))[-1])
        raise NonFiniteStateError(stage, bad.tolist())


def _advance(problem: SpectralProblem, u: np.ndarray, coeffs: StepCoefficients) -> np.ndarray:
    return coeffs.decay * u + coeffs.gain * eval_nonlinearity(problem, u)


def step(problem: SpectralProblem, u, h: float) -> np.ndarray:
    if not h > 0:
        raise InvalidArgumentError("step size must be positive", {"h": h})
    u = as_state(problem, u)
    _check_finite(u, "step")
    out = _advance(problem, u, step_coefficients(problem, h))
    _check_finite(out, "step")
    return out


def step_schedule(t_final: float, h: float) -> Tuple[int, float]:
    """Number of full steps and the length of a trailing short step (0 if none)."""
    ratio = t_final / h
    nearest = round(ratio)
    if abs(ratio - nearest) <= _STEP_ROUNDING * max(1.0, ratio):
        return int(nearest), 0.0
    full = int(np.floor(ratio))
    return full, t_final - full * h


def integrate(problem: SpectralProblem, u0, t_final: float, h: float,
              keep_every: int = 1) -> Trajectory:
    """Integrate from time 0 to exactly ``t_final``.

    ``keep_every`` thins the stored states; the initial and final states are
    always kept.
    """
    if not t_final > 0 or not h > 0:
        raise InvalidArgumentError("t_final and h must be positive", {"t_final": t_final, "h": h})
    if keep_every < 1:
        raise InvalidArgumentError("keep_every must be at least 1", {"keep_every": keep_every})

    u = np.array(as_state(problem, u0, "initial state"), dtype=float)
    _check_finite(u, "integrate")
    full, tail = step_schedule(t_final, h)
    coeffs = step_coefficients(problem, h)

    times = [0.0]
    states = [u.copy()]
    for k in range(1, full + 1):
        u = _advance(problem, u, coeffs)
        if k % keep_every == 0 or (k == full and tail == 0.0):
            _check_finite(u, "integrate")
            times.append(k * h)
            states.append(u.copy())
    if tail > 0.0:
        u = _advance(problem, u, step_coefficients(problem, tail))
        _check_finite(u, "integrate")
        times.append(t_final)
        states.append(u.copy())
    times[-1] = t_final
    return Trajectory(times=np.asarray(times), states=np.stack(states), step=h)


def flow_map(problem: SpectralProblem, u0, t: float, h: float,
             check_finite: bool = True) -> np.ndarray:
    """Endpoint of ``integrate``; the identity at t = 0.

    With ``check_finite=False`` overflow yields inf/nan rows instead of raising.
    """
    u = np.array(as_state(problem, u0, "initial state"), dtype=float)
    if t == 0:
        return u
    if not t > 0 or not h > 0:
        raise InvalidArgumentError("t and h must be positive", {"t": t, "h": h})
    if check_finite:
        _check_finite(u, "flow_map")
    full, tail = step_schedule(t, h)
    coeffs = step_coefficients(problem, h)
    with np.errstate(over="ignore", invalid="ignore"):
        for _ in range(full):
            u = _advance(problem, u, coeffs)
        if tail > 0.0:
            u = _advance(problem, u, step_coefficients(problem, tail))
    if check_finite:
        _check_finite(u, "flow_map")
    return u


def flow_map_batch(problem: SpectralProblem, states, t: float, h: float,
                   chunk_size: int = 4096) -> np.ndarray:
    """flow_map over the rows of ``states``, in chunks to bound memory."""
    states = np.atleast_2d(as_state(problem, states))
    out = np.empty_like(states, dtype=float)
    for start in range(0, states.shape[0], chunk_size):
        out[start:start + chunk_size] = flow_map(problem, states[start:start + chunk_size], t, h)
    return out
