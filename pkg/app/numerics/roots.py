"""Batched damped Newton for P-projection equations P image(p) = target."""
from typing import Callable, Tuple

import numpy as np

from app.numerics.problem import norms

BACKTRACK_HALVINGS = 8
FD_REL_STEP = 1e-6


def _solve_rows(jac: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    out = np.empty_like(rhs)
    for b in range(rhs.shape[0]):
        try:
            out[b] = np.linalg.solve(jac[b], rhs[b])
        except np.linalg.LinAlgError:
            out[b] = np.linalg.pinv(jac[b]) @ rhs[b]
        if not np.all(np.isfinite(out[b])):
            out[b] = np.linalg.pinv(jac[b]) @ rhs[b]
    return out


def damped_newton(
    image: Callable[[np.ndarray], np.ndarray],
    targets: np.ndarray,
    guesses: np.ndarray,
    tol: float,
    max_iter: int,
) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Solve image(p)[:, :N] = targets row by row, all rows at once.

    ``image`` maps a (B, N) batch to full states (B, M) with M >= N. Jacobians
    are forward differences; a step is halved until the residual drops, and a
    row that cannot improve is marked stalled.

    Returns (p, images, residuals, iterations, stalled).
    """
    N = targets.shape[-1]
    p = guesses.astype(float).copy()
    end = image(p)
    res = norms(end[:, :N] - targets)
    res[~np.isfinite(res)] = np.inf
    iterations = np.zeros(p.shape[0], dtype=int)
    stalled = np.zeros(p.shape[0], dtype=bool)
    eye = np.eye(N)

    for _ in range(max_iter):
        active = np.nonzero((res > tol) & ~stalled & np.isfinite(res))[0]
        if active.size == 0:
            break
        pa = p[active]
        fa = end[active, :N]
        eps = FD_REL_STEP * (1.0 + norms(pa))
        shifted = pa[None, :, :] + eps[None, :, None] * eye[:, None, :]
        f_shift = image(shifted.reshape(-1, N))[:, :N].reshape(N, active.size, N)
        jac = ((f_shift - fa[None]) / eps[None, :, None]).transpose(1, 2, 0)
        delta = _solve_rows(jac, targets[active] - fa)

        step = np.ones(active.size)
        accepted = np.zeros(active.size, dtype=bool)
        pending = np.arange(active.size)
        for _ in range(BACKTRACK_HALVINGS + 1):
            trial = pa[pending] + step[pending, None] * delta[pending]
            trial_end = image(trial)
            trial_res = norms(trial_end[:, :N] - targets[active[pending]])
            better = np.isfinite(trial_res) & (trial_res < res[active[pending]])
            rows = active[pending[better]]
            p[rows] = trial[better]
            end[rows] = trial_end[better]
            res[rows] = trial_res[better]
            accepted[pending[better]] = True
            pending = pending[~better]
            if pending.size == 0:
                break
            step[pending] *= 0.5
        iterations[active] += 1
        stalled[active[~accepted]] = True

    return p, end, res, iterations, stalled
