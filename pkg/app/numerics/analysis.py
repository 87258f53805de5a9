"""Global statements as finite-sample probes.

Attractor sampling, containment in the graph of phi, the inclusion of the
forward limit in the backward set, closedness, support and invariance of
the graph.
"""
import itertools
import logging
from typing import List

import numpy as np

from app.core.exceptions import DimensionMismatchError, ProblemHashMismatchError, InvalidArgumentError
from app.models import (
    ClosednessReport, ContainmentReport, GridMeta, InclusionReport, InvarianceReport,
    ProbeEntry, SupportReport
)
from app.numerics.backward import phi_batch
from app.numerics.flow import flow_map_batch, integrate
from app.numerics.manifold import SampledManifold
from app.numerics.metrics import directed_hausdorff, nearest_distances
from app.numerics.problem import SpectralProblem, join, norms, sample_ball

logger = logging.getLogger(__name__)

PROBE_JUMP_FACTOR = 10.0


def resolution_tolerance(grid_meta: GridMeta, h: float) -> float:
    """2 x cell diagonal + 10 h"""
    return 2.0 * grid_meta.cell_diagonal + 10.0 * h


def sample_attractor(problem: SpectralProblem, n_seeds: int, seed: int, t_transient: float,
                     t_collect: float, stride: float, h: float) -> np.ndarray:
    """Pool of states collected every ``stride`` after a transient, from seeds in |u| <= R."""
    if not t_transient > 0 or not stride > 0:
        raise InvalidArgumentError("t_transient and stride must be positive",
                              {"t_transient": t_transient, "stride": stride})
    rng = np.random.default_rng(seed)
    seeds = sample_ball(rng, n_seeds, problem.dim, problem.r_trunc)
    settled = flow_map_batch(problem, seeds, t_transient, h)
    if t_collect <= 0:
        return settled
    keep_every = max(1, int(round(stride / h)))
    traj = integrate(problem, settled, t_collect, h, keep_every=keep_every)
    return traj.states.reshape(-1, problem.dim)


def containment(points, manifold: SampledManifold, tol: float) -> ContainmentReport:
    points = np.atleast_2d(np.asarray(points, dtype=float))
    target = manifold.points
    if points.shape[1] != target.shape[1]:
        raise DimensionMismatchError("containment points", target.shape[1], points.shape[1])
    dist = nearest_distances(points, target)
    worst = int(np.argmax(dist))
    return ContainmentReport(
        n_points=int(points.shape[0]),
        max_distance=float(dist[worst]),
        worst_index=worst,
        worst_point=[float(x) for x in points[worst]],
        tol=tol,
        passed=bool(dist[worst] <= tol),
    )


def _single_valued(phi_graph: SampledManifold) -> bool:
    if phi_graph.node_index is None:
        return True
    return len(np.unique(phi_graph.node_index)) == phi_graph.n_points


def inclusion_check(m_inf: SampledManifold, phi_graph: SampledManifold, tol: float) -> InclusionReport:
    """Directed distance M_inf -> graph(phi) is required; the reverse is reported."""
    if m_inf.problem_hash and phi_graph.problem_hash and m_inf.problem_hash != phi_graph.problem_hash:
        raise ProblemHashMismatchError(m_inf.problem_hash, phi_graph.problem_hash)
    forward = directed_hausdorff(m_inf.points, phi_graph.points)
    reverse = directed_hausdorff(phi_graph.points, m_inf.points)
    single = _single_valued(phi_graph)
    return InclusionReport(
        forward_distance=forward,
        reverse_distance=reverse,
        tol=tol,
        passed=forward <= tol,
        reverse_passed=reverse <= tol,
        single_valued=single,
        equality_expected=single,
    )


def support_check(phi_graph: SampledManifold, r_trunc: float, tol: float) -> SupportReport:
    exterior = norms(phi_graph.p_points) > r_trunc
    worst = float(norms(phi_graph.q_points[exterior]).max()) if exterior.any() else 0.0
    return SupportReport(n_exterior=int(exterior.sum()), max_exterior_q=worst, tol=tol, passed=worst <= tol)


def invariance_check(problem: SpectralProblem, phi_graph: SampledManifold, t: float, h: float,
                     tol: float) -> InvarianceReport:
    """Graph points pushed forward by ``t`` stay near the graph (images inside the grid box only)."""
    images = flow_map_batch(problem, join(problem, phi_graph.p_points, phi_graph.q_points), t, h)
    lo = np.array([b[0] for b in phi_graph.grid_meta.bounds])
    hi = np.array([b[1] for b in phi_graph.grid_meta.bounds])
    p = images[:, :problem.split_index]
    inside = np.all((p >= lo) & (p <= hi), axis=1)
    if not inside.any():
        return InvarianceReport(n_points=0, max_distance=0.0, tol=tol, passed=True)
    dist = float(nearest_distances(images[inside], phi_graph.points).max())
    return InvarianceReport(n_points=int(inside.sum()), max_distance=dist, tol=tol, passed=dist <= tol)


class _GridView:
    """First-branch values of a graph over its regular p-grid."""

    def __init__(self, phi_graph: SampledManifold):
        meta = phi_graph.grid_meta
        self.lo = np.array([b[0] for b in meta.bounds])
        self.hi = np.array([b[1] for b in meta.bounds])
        self.res = np.array(meta.resolution)
        self.width = (self.hi - self.lo) / (self.res - 1)
        q_dim = phi_graph.q_points.shape[1]
        self.values = np.full((int(np.prod(self.res)), q_dim), np.nan)
        self.branch_count = np.zeros(int(np.prod(self.res)), dtype=int)
        node_index = phi_graph.node_index if phi_graph.node_index is not None else np.arange(phi_graph.n_points)
        for row, node in enumerate(node_index):
            if self.branch_count[node] == 0:
                self.values[node] = phi_graph.q_points[row]
            self.branch_count[node] += 1

    def corners(self, cell: np.ndarray) -> List[int]:
        offsets = itertools.product((0, 1), repeat=len(cell))
        return [int(np.ravel_multi_index(tuple(cell + np.array(o)), tuple(self.res))) for o in offsets]

    def interpolate(self, cell: np.ndarray, frac: np.ndarray) -> np.ndarray:
        out = np.zeros(self.values.shape[1])
        for offset, node in zip(itertools.product((0, 1), repeat=len(cell)), self.corners(cell)):
            weight = np.prod([f if o else 1.0 - f for f, o in zip(frac, offset)])
            out += weight * self.values[node]
        return out

    def local_lipschitz(self, cell: np.ndarray) -> float:
        best = 0.0
        for axis in range(len(cell)):
            for offset in itertools.product((0, 1), repeat=len(cell)):
                if offset[axis]:
                    continue
                a = np.array(offset)
                b = a.copy()
                b[axis] = 1
                na = int(np.ravel_multi_index(tuple(cell + a), tuple(self.res)))
                nb = int(np.ravel_multi_index(tuple(cell + b), tuple(self.res)))
                best = max(best, float(np.linalg.norm(self.values[nb] - self.values[na]) / self.width[axis]))
        return best


def closedness_probe(
    problem: SpectralProblem,
    phi_graph: SampledManifold,
    n_probes: int,
    seed: int,
    h: float,
    n_max: int,
    n_starts: int,
    tol: float,
    shooting_tol: float = 1e-10,
) -> ClosednessReport:
    """Fresh phi at random points between grid nodes versus multilinear interpolation.

    A probe is flagged when its jump exceeds PROBE_JUMP_FACTOR times the
    cell's Lipschitz estimate across the cell diagonal, with a 10 h floor.
    Flagged probes are expected to sit next to multi-branch nodes.
    """
    if n_probes == 0:
        return ClosednessReport(probes=[], modulus=0.0, flagged_sites=0, consistent=True, passed=True)
    view = _GridView(phi_graph)
    rng = np.random.default_rng(seed)
    cells = np.stack([rng.integers(0, r - 1, n_probes) for r in view.res], axis=1)
    fracs = rng.uniform(0.1, 0.9, (n_probes, len(view.res)))
    probes = view.lo + (cells + fracs) * view.width
    values = phi_batch(problem, probes, n_max, n_starts, seed, h, tol, shooting_tol=shooting_tol)
    diagonal = float(np.linalg.norm(view.width))

    entries = []
    for cell, frac, p_star, value in zip(cells, fracs, probes, values):
        corners = view.corners(cell)
        interpolated = view.interpolate(cell, frac)
        local = view.local_lipschitz(cell)
        usable = value.branches and np.all(np.isfinite(interpolated))
        if usable:
            gaps = norms(value.values - interpolated)
            nearest = value.values[int(np.argmin(gaps))]
            jump = float(gaps.min())
        else:
            nearest = np.full(interpolated.shape, np.nan)
            jump = float("inf")
        threshold = max(PROBE_JUMP_FACTOR * local * diagonal, 10.0 * h)
        entries.append(ProbeEntry(
            p=[float(x) for x in p_star],
            q=[float(x) for x in nearest],
            interpolated=[float(x) for x in interpolated],
            jump=jump,
            local_lipschitz=local,
            flagged=jump > threshold,
            multi_branch=value.multi_valued or bool(np.any(view.branch_count[corners] > 1)),
            converged=bool(usable and not value.partial),
        ))

    flagged = [e for e in entries if e.flagged]
    consistent = all(e.multi_branch for e in flagged)
    finite = [e.jump for e in entries if np.isfinite(e.jump)]
    if flagged:
        logger.warning("Closedness probes flagged", extra={"n_points": len(flagged), "preset": problem.name})
    return ClosednessReport(
        probes=entries,
        modulus=float(max(finite)) if finite else 0.0,
        flagged_sites=len(flagged),
        consistent=consistent,
        passed=consistent and all(e.converged for e in entries),
    )

