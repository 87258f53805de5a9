"""Set distances and Hausdorff-Cauchy rate fitting."""
import logging
import math
from typing import Optional, Sequence, Tuple

import numpy as np
from scipy.spatial.distance import cdist

from app.core.exceptions import DimensionMismatchError, EmptyPointSetError, InvalidArgumentError
from app.models import RateConstants, RateReport

logger = logging.getLogger(__name__)

LOG_FLOOR = 1e-15
NONINCREASING_SLACK = 1.2
MIN_FIT_POINTS = 2
MIN_SECTIONS = 4
_CHUNK = 2048


def _as_points(points, which: str) -> np.ndarray:
    arr = np.asarray(points, dtype=float)
    if arr.ndim == 1:
        arr = arr[:, None] if arr.size else arr.reshape(0, 1)
    if arr.shape[0] == 0:
        raise EmptyPointSetError(which)
    return arr


def nearest_distances(X, Y) -> np.ndarray:
    """For each row of X, the distance to the closest row of Y."""
    X = _as_points(X, "X")
    Y = _as_points(Y, "Y")
    if X.shape[1] != Y.shape[1]:
        raise DimensionMismatchError("point sets", X.shape[1], Y.shape[1])
    out = np.empty(X.shape[0])
    for start in range(0, X.shape[0], _CHUNK):
        out[start:start + _CHUNK] = cdist(X[start:start + _CHUNK], Y).min(axis=1)
    return out


def directed_hausdorff(X, Y) -> float:
    """max over x in X of min over y in Y of |x - y|."""
    return float(nearest_distances(X, Y).max())


def hausdorff(X, Y) -> float:
    return max(directed_hausdorff(X, Y), directed_hausdorff(Y, X))


def theoretical_bound(constants: RateConstants, n: int, slack: float = 1.0) -> float:
    """slack * (K0 K2 / lambda_{N+1}) e^{-rate n}"""
    prefactor = constants.k0 * constants.k2 / constants.lambdaN1
    return slack * prefactor * math.exp(-constants.rate * n)


def build_rate_report(
    distances: Sequence[float],
    constants: RateConstants,
    tol: float,
    indices: Optional[Sequence[int]] = None,
    noise_floor: float = 0.0,
    slack: float = 3.0,
    band: Tuple[float, float] = (0.5, 2.0),
) -> RateReport:
    """Fit and bound-check a sequence d_n = d_H(section_{n+1}, section_n).

    Zero distances are logged at LOG_FLOOR and listed in floored_indices.
    Only values above noise_floor enter the fit, and at least two are needed.
    """
    d = np.asarray(distances, dtype=float)
    if d.ndim != 1 or d.size == 0:
        raise InvalidArgumentError("need at least one distance", {"count": int(d.size)})
    if np.any(d < 0) or not np.all(np.isfinite(d)):
        raise InvalidArgumentError("distances must be finite and nonnegative")
    n = np.arange(1, d.size + 1) if indices is None else np.asarray(indices, dtype=int)
    if n.shape != d.shape:
        raise DimensionMismatchError("rate indices", d.size, n.size)

    floored = [int(i) for i, value in zip(n, d) if value == 0.0]
    logged = np.maximum(d, LOG_FLOOR)
    fit_mask = logged > max(noise_floor, 0.0)
    fitted_rate = None
    if int(fit_mask.sum()) >= MIN_FIT_POINTS:
        slope, _ = np.polyfit(n[fit_mask].astype(float), np.log(logged[fit_mask]), 1)
        fitted_rate = float(-slope)

    within_band = None
    if fitted_rate is not None and constants.rate_positive:
        within_band = bool(band[0] * constants.rate <= fitted_rate <= band[1] * constants.rate)

    violations = [
        int(i) for i, value in zip(n, d)
        if value > max(theoretical_bound(constants, int(i), slack), noise_floor)
    ]

    nonincreasing = True
    for k in range(1, d.size):
        if n[k] <= 2:
            continue
        if d[k] > NONINCREASING_SLACK * d[k - 1] and d[k] > noise_floor:
            nonincreasing = False

    below = [int(i) for i, value in zip(n, d) if value < tol]
    return RateReport(
        indices=[int(i) for i in n],
        distances=[float(x) for x in d],
        fitted_rate=fitted_rate,
        fit_indices=[int(i) for i in n[fit_mask]],
        theoretical_rate=constants.rate,
        prefactor=constants.k0 * constants.k2 / constants.lambdaN1,
        converged=bool(d[-1] < tol),
        slack_band=band,
        rate_within_band=within_band,
        bound_slack=slack,
        bound_violations=violations,
        floored_indices=floored,
        noise_floor=float(noise_floor),
        nonincreasing=nonincreasing,
        n_star=below[0] if below else None,
    )


def cauchy_rate(
    sections: Sequence[np.ndarray],
    constants: RateConstants,
    tol: float,
    noise_floor: float = 0.0,
    slack: float = 3.0,
    band: Tuple[float, float] = (0.5, 2.0),
    first_index: int = 1,
) -> RateReport:
    """Rate report for Q-sections indexed first_index, first_index+1, ...

    Besides the adjacent distances every pair m < n is checked against the
    bound at m.
    """
    if len(sections) < MIN_SECTIONS:
        raise InvalidArgumentError(f"need at least {MIN_SECTIONS} sections", {"count": len(sections)})
    indices = list(range(first_index, first_index + len(sections)))
    distances = [hausdorff(sections[k + 1], sections[k]) for k in range(len(sections) - 1)]
    report = build_rate_report(
        distances, constants, tol, indices=indices[:-1],
        noise_floor=noise_floor, slack=slack, band=band,
    )

    pair_violations = []
    for a in range(len(sections)):
        for b in range(a + 2, len(sections)):
            distance = hausdorff(sections[b], sections[a])
            if distance > max(theoretical_bound(constants, indices[a], slack), noise_floor):
                pair_violations.append((indices[a], indices[b]))
    logger.info(
        "Cauchy rate fitted",
        extra={"distance": report.distances[-1], "n_points": len(sections)}
    )
    return report.model_copy(update={"pair_violations": pair_violations})
