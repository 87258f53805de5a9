"""Backward bounded solutions by shooting.

A solution on [-n, 0] with q(-n) = 0 and p(0) = p0 is found by integrating
forward on [0, n] from (p, 0) and solving P u(n) = p0 for p. Q-modes are
never integrated backwards.
"""
import logging
import math
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np

from app.core.exceptions import DimensionMismatchError, ShootingDomainError, InvalidArgumentError
from app.models import BackwardBoundsReport, BoundCheck, GridMeta
from app.numerics.flow import Trajectory, flow_map, integrate
from app.numerics.manifold import SampledManifold
from app.numerics.problem import SpectralProblem, join, linear_preimage, norms, sample_ball
from app.numerics.roots import damped_newton

logger = logging.getLogger(__name__)

NEWTON_MAX_ITER = 30
EQUICONTINUITY_LAGS = (1, 10, 100)


@dataclass(frozen=True)
class ShootingResult:
    horizon_n: int
    p0_target: np.ndarray
    p_minus_n: np.ndarray
    residual: float
    endpoint: np.ndarray
    converged: bool
    tol: float
    in_ball: bool
    iterations: int = 0
    continued: bool = False
    branch_id: int = 0
    trajectory: Optional[Trajectory] = None

    @property
    def q0(self) -> np.ndarray:
        return self.endpoint[len(self.p0_target):]


@dataclass(frozen=True)
class PhiBranch:
    branch_id: int
    q0: np.ndarray
    p_minus_n: np.ndarray
    horizon: int
    increments: Tuple[float, ...]
    residual: float
    settled: bool


@dataclass(frozen=True)
class PhiValue:
    p0: np.ndarray
    branches: Tuple[PhiBranch, ...]
    horizon_used: int
    partial: bool = False

    @property
    def values(self) -> np.ndarray:
        if not self.branches:
            return np.zeros((0, 0))
        return np.array([b.q0 for b in self.branches])

    @property
    def multi_valued(self) -> bool:
        return len(self.branches) > 1


def ball_radius(problem: SpectralProblem, n: int, p0_norm) -> np.ndarray:
    """Radius 2 e^{n lambda_N} (R + |p0|) of the ball holding p_{-n}."""
    return 2.0 * math.exp(n * problem.lambda_n) * (problem.r_trunc + np.asarray(p0_norm))


def _endpoint(problem: SpectralProblem, p_init: np.ndarray, n: int, h: float) -> np.ndarray:
    u0 = join(problem, p_init, np.zeros(p_init.shape[:-1] + (problem.q_dim,)))
    return flow_map(problem, u0, float(n), h, check_finite=False)


def shooting_map(problem: SpectralProblem, p_init, n: int, h: float) -> np.ndarray:
    """P-part of the time-n endpoint started from (p_init, 0)."""
    if n < 1:
        raise InvalidArgumentError("horizon must be at least 1", {"n": n})
    p_init = np.asarray(p_init, dtype=float)
    if p_init.shape[-1] != problem.p_dim:
        raise DimensionMismatchError("p_init", problem.p_dim, list(p_init.shape))
    end = _endpoint(problem, p_init, n, h)
    if not np.all(np.isfinite(end)):
        raise ShootingDomainError(n, float(np.max(norms(p_init))))
    return end[..., :problem.split_index]


def _newton(problem: SpectralProblem, targets: np.ndarray, guesses: np.ndarray, n: int,
            h: float, tol: float, max_iter: int):
    """Damped Newton on p -> P u(n; p, 0) - target."""
    return damped_newton(lambda p: _endpoint(problem, p, n, h), targets, guesses, tol, max_iter)


def _continuation(problem: SpectralProblem, targets: np.ndarray, n: int, h: float,
                  tol: float, max_iter: int):
    """Solve horizon 1, then warm-start horizon k + 1 from e^{A_P} p_{-k}."""
    guess = linear_preimage(problem, targets, 1.0)
    for k in range(1, n + 1):
        p, end, res, iterations, stalled = _newton(problem, targets, guess, k, h, tol, max_iter)
        guess = linear_preimage(problem, p, 1.0)
    return p, end, res, iterations, stalled


def shoot_batch(
    problem: SpectralProblem,
    targets,
    n: int,
    guesses=None,
    h: float = 1e-3,
    tol: float = 1e-10,
    max_iter: int = NEWTON_MAX_ITER,
    with_trajectory: bool = True,
    branch_ids: Optional[Sequence[int]] = None,
) -> List[ShootingResult]:
    """Solve many boundary value problems of horizon ``n`` together."""
    if n < 1:
        raise InvalidArgumentError("horizon must be at least 1", {"n": n})
    targets = np.atleast_2d(np.asarray(targets, dtype=float))
    if targets.shape[-1] != problem.p_dim:
        raise DimensionMismatchError("p0 targets", problem.p_dim, list(targets.shape))
    guesses = linear_preimage(problem, targets, n) if guesses is None else np.atleast_2d(
        np.asarray(guesses, dtype=float))
    if guesses.shape != targets.shape:
        raise DimensionMismatchError("shooting guesses", list(targets.shape), list(guesses.shape))

    radius = ball_radius(problem, n, norms(targets))
    sizes = norms(guesses)
    outside = sizes > radius
    if np.any(outside):
        # pull stray guesses back onto the boundary of B_n
        guesses = guesses.copy()
        guesses[outside] *= (radius[outside] / sizes[outside])[:, None]
        logger.debug("Projected guesses into the shooting ball", extra={"horizon": n, "n_points": int(outside.sum())})

    p, end, res, iterations, stalled = _newton(problem, targets, guesses, n, h, tol, max_iter)
    continued = np.zeros(targets.shape[0], dtype=bool)
    retry = np.nonzero(~(res <= tol))[0]
    if retry.size:
        logger.debug("Falling back to horizon continuation", extra={"horizon": n, "n_points": int(retry.size)})
        cp, cend, cres, cit, _ = _continuation(problem, targets[retry], n, h, tol, max_iter)
        improved = cres < res[retry]
        rows = retry[improved]
        p[rows], end[rows], res[rows] = cp[improved], cend[improved], cres[improved]
        iterations[rows] += cit[improved]
        continued[rows] = True

    trajectories = [None] * targets.shape[0]
    if with_trajectory:
        u0 = join(problem, p, np.zeros((p.shape[0], problem.q_dim)))
        if np.all(np.isfinite(u0)):
            traj = integrate(problem, u0, float(n), h)
            trajectories = [
                Trajectory(times=traj.times - n, states=traj.states[:, b], step=h)
                for b in range(p.shape[0])
            ]

    ids = list(branch_ids) if branch_ids is not None else [0] * targets.shape[0]
    return [
        ShootingResult(
            horizon_n=n,
            p0_target=targets[b].copy(),
            p_minus_n=p[b].copy(),
            residual=float(res[b]),
            endpoint=end[b].copy(),
            converged=bool(res[b] <= tol),
            tol=tol,
            in_ball=bool(norms(p[b]) <= radius[b]),
            iterations=int(iterations[b]),
            continued=bool(continued[b]),
            branch_id=int(ids[b]),
            trajectory=trajectories[b],
        )
        for b in range(targets.shape[0])
    ]


def shoot(problem: SpectralProblem, p0, n: int, guess=None, h: float = 1e-3,
          tol: float = 1e-10) -> ShootingResult:
    p0 = np.asarray(p0, dtype=float)
    guess = None if guess is None else np.asarray(guess, dtype=float)[None]
    result = shoot_batch(problem, p0[None], n, guess, h=h, tol=tol)[0]
    if not result.converged:
        logger.warning(
            "Shooting did not converge",
            extra={"horizon": n, "residual": result.residual, "preset": problem.name}
        )
    return result


class _BranchTracker:
    """Branches of one p0 across horizons."""

    def __init__(self, p0: np.ndarray, starts: np.ndarray):
        self.p0 = p0
        self.starts = starts
        self.branches: List[PhiBranch] = []
        self.next_id = 0
        self.horizon_used = 0
        self.partial = False
        self.done = False

    def live(self) -> List[PhiBranch]:
        return [b for b in self.branches if not b.settled]

    def guesses(self, problem: SpectralProblem) -> Tuple[np.ndarray, List[Optional[int]]]:
        warm = [linear_preimage(problem, b.p_minus_n, 1.0) for b in self.live()]
        owners = [b.branch_id for b in self.live()] + [None] * len(self.starts)
        rows = np.array(warm + list(self.starts)).reshape(-1, len(self.p0))
        return rows, owners

    def update(self, n: int, results: List[ShootingResult], owners: List[Optional[int]],
               cluster_tol: float, tol: float):
        found = [(r, o) for r, o in zip(results, owners) if r.converged]
        self.horizon_used = n
        if not found:
            self.partial = True
            self.done = True
            return

        clusters: List[Tuple[ShootingResult, Optional[int]]] = []
        merged = set()
        for result, owner in found:
            home = next(
                (k for k, (rep, _) in enumerate(clusters)
                 if np.linalg.norm(result.q0 - rep.q0) <= cluster_tol),
                None,
            )
            if home is None:
                clusters.append((result, owner))
            elif clusters[home][1] is None:
                clusters[home] = (clusters[home][0], owner)
            elif owner is not None and owner != clusters[home][1]:
                # two branches landed on the same solution
                merged.add(owner)

        by_id = {b.branch_id: b for b in self.branches if b.branch_id not in merged}
        for rep, owner in clusters:
            if owner is None:
                # unclaimed cluster: a start that fell onto a known branch, settled or not
                near = [b for b in by_id.values() if np.linalg.norm(rep.q0 - b.q0) <= cluster_tol]
                if near:
                    nearest = min(near, key=lambda b: np.linalg.norm(rep.q0 - b.q0))
                    if nearest.settled:
                        continue
                    owner = nearest.branch_id
            if owner is None:
                by_id[self.next_id] = PhiBranch(
                    branch_id=self.next_id, q0=rep.q0, p_minus_n=rep.p_minus_n, horizon=n,
                    increments=(), residual=rep.residual, settled=False,
                )
                self.next_id += 1
                continue
            previous = by_id[owner]
            if previous.horizon == n:
                continue
            increment = float(np.linalg.norm(rep.q0 - previous.q0))
            by_id[owner] = PhiBranch(
                branch_id=owner, q0=rep.q0, p_minus_n=rep.p_minus_n, horizon=n,
                increments=previous.increments + (increment,), residual=rep.residual,
                settled=increment < tol,
            )
        self.branches = [by_id[k] for k in sorted(by_id)]
        self.done = all(b.settled for b in self.branches)

    def value(self) -> PhiValue:
        return PhiValue(
            p0=self.p0, branches=tuple(self.branches),
            horizon_used=self.horizon_used, partial=self.partial,
        )


def phi_batch(
    problem: SpectralProblem,
    p0s,
    n_max: int,
    n_starts: int,
    seed: int,
    h: float,
    tol: float,
    shooting_tol: float = 1e-10,
    cluster_tol: Optional[float] = None,
    node_offset: int = 0,
) -> List[PhiValue]:
    """phi for every row of ``p0s`` with one batched shooting solve per horizon.

    Multistarts for row k are drawn from ``default_rng([seed, node_offset + k])``
    so results do not depend on how rows are grouped into batches.
    """
    if n_max < 2 or n_starts < 1:
        raise InvalidArgumentError("need n_max >= 2 and n_starts >= 1", {"n_max": n_max, "n_starts": n_starts})
    p0s = np.atleast_2d(np.asarray(p0s, dtype=float))
    if p0s.shape[-1] != problem.p_dim:
        raise DimensionMismatchError("p0", problem.p_dim, list(p0s.shape))
    cluster_tol = 1e3 * h if cluster_tol is None else cluster_tol

    trackers = []
    for k, p0 in enumerate(p0s):
        rng = np.random.default_rng([seed, node_offset + k])
        core = 2.0 * (problem.r_trunc + float(np.linalg.norm(p0)))
        trackers.append(_BranchTracker(p0, sample_ball(rng, n_starts, problem.p_dim, core)))

    for n in range(1, n_max + 1):
        open_trackers = [t for t in trackers if not t.done]
        if not open_trackers:
            break
        rows, targets, owners, spans = [], [], [], []
        for tracker in open_trackers:
            guesses, who = tracker.guesses(problem)
            spans.append((len(owners), len(owners) + len(who)))
            rows.append(guesses)
            targets.append(np.repeat(tracker.p0[None], len(who), axis=0))
            owners.extend(who)
        results = shoot_batch(
            problem, np.concatenate(targets), n, np.concatenate(rows),
            h=h, tol=shooting_tol, with_trajectory=False,
        )
        for tracker, (lo, hi) in zip(open_trackers, spans):
            tracker.update(n, results[lo:hi], owners[lo:hi], cluster_tol, tol)

    values = [t.value() for t in trackers]
    partial = sum(v.partial for v in values)
    if partial:
        logger.warning("phi incomplete for some p0", extra={"n_points": partial, "preset": problem.name})
    return values


def phi(problem: SpectralProblem, p0, n_max: int, n_starts: int, seed: int, h: float,
        tol: float, shooting_tol: float = 1e-10) -> PhiValue:
    return phi_batch(problem, np.asarray(p0, dtype=float)[None], n_max, n_starts, seed, h, tol,
                     shooting_tol=shooting_tol)[0]


def phi_graph(
    problem: SpectralProblem,
    nodes,
    grid_meta: GridMeta,
    n_max: int,
    n_starts: int,
    seed: int,
    h: float,
    tol: float,
    shooting_tol: float = 1e-10,
    problem_hash: Optional[str] = None,
    chunk_size: int = 16,
) -> Tuple[SampledManifold, List[PhiValue]]:
    """The graph of phi over p-grid nodes, one row per (node, branch)."""
    nodes = np.atleast_2d(np.asarray(nodes, dtype=float))
    values: List[PhiValue] = []
    for start in range(0, nodes.shape[0], chunk_size):
        values.extend(phi_batch(
            problem, nodes[start:start + chunk_size], n_max, n_starts, seed, h, tol,
            shooting_tol=shooting_tol, node_offset=start,
        ))
    return assemble_phi_graph(problem, nodes, values, grid_meta, problem_hash), values


def assemble_phi_graph(problem: SpectralProblem, nodes: np.ndarray, values: Sequence[PhiValue],
                       grid_meta: GridMeta, problem_hash: Optional[str] = None) -> SampledManifold:
    p_rows, q_rows, branch_ids, node_index = [], [], [], []
    for k, value in enumerate(values):
        for branch in value.branches:
            p_rows.append(nodes[k])
            q_rows.append(branch.q0)
            branch_ids.append(branch.branch_id)
            node_index.append(k)
    return SampledManifold(
        label="graph_Phi",
        time=0.0,
        p_points=np.array(p_rows).reshape(-1, problem.p_dim),
        q_points=np.array(q_rows).reshape(-1, problem.q_dim),
        grid_meta=grid_meta,
        problem_hash=problem_hash,
        branch_ids=np.array(branch_ids, dtype=int),
        node_index=np.array(node_index, dtype=int),
    )


def _bound(name: str, bound: float, measured: float, slack: float) -> BoundCheck:
    margin = bound - measured
    return BoundCheck(name=name, bound=bound, measured=measured, margin=margin, passed=margin >= -slack)


def check_backward_bounds(problem: SpectralProblem, result: ShootingResult,
                          slack: Optional[float] = None) -> BackwardBoundsReport:
    """A-priori bounds along a converged solution on [-n, 0]."""
    traj = result.trajectory
    if traj is None:
        raise InvalidArgumentError("shooting result carries no trajectory", {"horizon": result.horizon_n})
    slack = 10.0 * traj.step if slack is None else slack
    N = problem.split_index
    k0, lambda_n, lambda_n1 = problem.k0, problem.lambda_n, problem.lambda_n1
    t = traj.times
    p = traj.states[:, :N]
    q = traj.states[:, N:]
    p0_norm = float(np.linalg.norm(result.p0_target))

    checks = []
    # sup over t of |p(t)| e^{lambda_N t}; the bound is |p0| + K0/lambda_N
    scaled_p = float(np.max(norms(p) * np.exp(lambda_n * t)))
    checks.append(_bound("p_growth", p0_norm + k0 / lambda_n, scaled_p, slack))
    checks.append(_bound("q_bound", k0 / lambda_n1, float(np.max(norms(q))), slack))

    half_power = float(np.max(norms(q * np.sqrt(problem.q_eigenvalues))))
    half_power_bound = math.sqrt(2.0) * k0 / math.sqrt(lambda_n1)
    checks.append(_bound("q_half_power", half_power_bound, half_power, slack))

    for lag in EQUICONTINUITY_LAGS:
        if lag >= q.shape[0]:
            continue
        delta = lag * traj.step
        jump = float(np.max(norms(q[lag:] - q[:-lag])))
        modulus = 2.0 * math.sqrt(2.0) * k0 * math.sqrt(delta) / (math.e * math.sqrt(lambda_n1)) + k0 * delta
        checks.append(_bound(f"q_equicontinuity_{lag}h", modulus, jump, slack))

    radius = float(ball_radius(problem, result.horizon_n, p0_norm))
    checks.append(_bound("ball_containment", radius, float(np.linalg.norm(result.p_minus_n)), 0.0))

    recheck = float(np.linalg.norm(
        shooting_map(problem, result.p_minus_n, result.horizon_n, traj.step) - result.p0_target))
    checks.append(_bound("residual", result.tol, recheck, 0.1 * result.tol))

    ratio = half_power / half_power_bound if half_power_bound > 0 else None
    logger.debug("Backward bounds", extra={"horizon": result.horizon_n, "residual": recheck})
    return BackwardBoundsReport(
        horizon=result.horizon_n,
        checks=checks,
        passed=all(c.passed for c in checks),
        half_power_ratio=ratio,
    )
