"""Graph transform: flat manifold M_0 = PH pushed forward to M_n and its limit."""
import logging
from dataclasses import replace
from typing import Callable, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.interpolate import RegularGridInterpolator

from app.core.exceptions import (
    DimensionMismatchError, GridCoverageError, InvalidArgumentError, UnsupportedDimensionError
)
from app.models import CheckResult, GridMeta, LipschitzReport, RateConstants, RateReport, SectionMode
from app.numerics.estimates import rate_constants
from app.numerics.flow import flow_map, flow_map_batch
from app.numerics.manifold import LIMIT, SampledManifold
from app.numerics.metrics import MIN_SECTIONS, build_rate_report, cauchy_rate, hausdorff
from app.numerics.problem import SpectralProblem, join, linear_preimage, norms
from app.numerics.roots import damped_newton

logger = logging.getLogger(__name__)

MAX_GRID_DIMENSION = 3
FOLD_TOL = 1e-9
# Fixed row blocks keep results independent of how jobs are scheduled
ROW_CHUNK = 256
GRAPH_NEWTON_TOL = 1e-14
GRAPH_MAX_ITER = 30
NOISE_PERTURBATION = 1e-7
# distances below this multiple of the measured solver noise are not fitted
NOISE_FLOOR_FACTOR = 10.0

Mapper = Callable[[Callable, list], list]


def _serial(func: Callable, jobs: list) -> list:
    return [func(job) for job in jobs]


def default_grid_bounds(problem: SpectralProblem, resolution: int) -> List[Tuple[float, float]]:
    """Symmetric box around the support ball with one spare cell per side."""
    if resolution < 4:
        raise InvalidArgumentError("default bounds need resolution >= 4", {"resolution": resolution})
    half = problem.r_trunc * (resolution - 1) / (resolution - 3)
    return [(-half, half)] * problem.p_dim


def grid_axes(meta: GridMeta) -> List[np.ndarray]:
    return [np.linspace(lo, hi, r) for (lo, hi), r in zip(meta.bounds, meta.resolution)]


def sample_flat_manifold(
    grid_bounds: Sequence[Sequence[float]],
    resolution: Union[int, Sequence[int]],
    q_dim: int,
    support_radius: Optional[float] = None,
    h: Optional[float] = None,
) -> SampledManifold:
    bounds = [(float(lo), float(hi)) for lo, hi in grid_bounds]
    dim = len(bounds)
    if dim > MAX_GRID_DIMENSION:
        raise UnsupportedDimensionError(dim, MAX_GRID_DIMENSION)
    res = [int(resolution)] * dim if np.isscalar(resolution) else [int(r) for r in resolution]
    if len(res) != dim:
        raise DimensionMismatchError("grid resolution", dim, len(res))
    if min(res) < 2 or any(hi <= lo for lo, hi in bounds):
        raise InvalidArgumentError("grid needs resolution >= 2 and increasing bounds",
                                   {"bounds": bounds, "resolution": res})
    if support_radius is not None and any(lo > -support_radius or hi < support_radius for lo, hi in bounds):
        raise GridCoverageError(bounds, support_radius)

    meta = GridMeta(bounds=bounds, resolution=res, h=h)
    mesh = np.meshgrid(*grid_axes(meta), indexing="ij")
    p_points = np.stack([m.ravel() for m in mesh], axis=1)
    return SampledManifold(
        label="M_0",
        time=0.0,
        p_points=p_points,
        q_points=np.zeros((p_points.shape[0], q_dim)),
        grid_meta=meta,
    )


def flat_manifold_for(problem: SpectralProblem, resolution: int, h: Optional[float] = None,
                      problem_hash: Optional[str] = None) -> SampledManifold:
    m0 = sample_flat_manifold(
        default_grid_bounds(problem, resolution), resolution, problem.q_dim,
        support_radius=problem.r_trunc, h=h,
    )
    return replace(m0, problem_hash=problem_hash)


def evolve_manifold(problem: SpectralProblem, m0: SampledManifold, t: float, h: float) -> SampledManifold:
    if m0.time != 0.0 or np.any(m0.q_points != 0.0):
        raise InvalidArgumentError("evolve_manifold starts from a flat time-0 manifold", {"label": m0.label})
    return _advance_manifold(problem, m0, t, h, t)


def _advance_manifold(problem: SpectralProblem, m: SampledManifold, dt: float, h: float,
                      new_time: float) -> SampledManifold:
    u = flow_map_batch(problem, join(problem, m.p_points, m.q_points), dt, h)
    return SampledManifold(
        label="M_t",
        time=new_time,
        p_points=u[:, :problem.split_index],
        q_points=u[:, problem.split_index:],
        grid_meta=m.grid_meta.model_copy(update={"h": h}),
        problem_hash=m.problem_hash,
    )


def q_section(m: SampledManifold) -> np.ndarray:
    return m.q_points


def graph_interpolator(m: SampledManifold) -> RegularGridInterpolator:
    """Multilinear q(p) over the p-grid of a graph section.

    Queries outside the box read q = 0; the box covers the support ball and
    every M_n is flat beyond it.
    """
    if int(np.prod(m.grid_shape)) != m.n_points:
        raise InvalidArgumentError("manifold rows do not form the recorded grid",
                                   {"shape": list(m.grid_shape), "n_points": m.n_points})
    values = m.q_points.reshape(m.grid_shape + (m.q_points.shape[1],))
    return RegularGridInterpolator(grid_axes(m.grid_meta), values, bounds_error=False, fill_value=0.0)


def graph_step(problem: SpectralProblem, section: SampledManifold, nodes: np.ndarray,
               guesses: np.ndarray, h: float,
               max_iter: int = GRAPH_MAX_ITER) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """S(1) applied to a graph section, read back over ``nodes``.

    For each node the foot point p with P S(1)(p, g(p)) = node is found by
    Newton, g interpolating ``section``; the Q-part of that image is the new
    section value. Returns (foot points, q values, residuals).
    """
    g = graph_interpolator(section)

    def image(p: np.ndarray) -> np.ndarray:
        return flow_map(problem, join(problem, p, g(p)), 1.0, h, check_finite=False)

    foot, end, res, _, _ = damped_newton(image, nodes, guesses, GRAPH_NEWTON_TOL, max_iter)
    return foot, end[:, problem.split_index:], res


def _graph_job(job):
    problem, section, nodes, guesses, h = job
    return graph_step(problem, section, nodes, guesses, h)


def _solve_graph(problem: SpectralProblem, section: SampledManifold, nodes: np.ndarray,
                 guesses: np.ndarray, h: float, mapper: Mapper):
    jobs = [
        (problem, section, nodes[start:start + ROW_CHUNK], guesses[start:start + ROW_CHUNK], h)
        for start in range(0, nodes.shape[0], ROW_CHUNK)
    ]
    parts = mapper(_graph_job, jobs)
    foot, q, res = (np.concatenate([part[k] for part in parts]) for k in range(3))
    return foot, q, res


def _evolved_job(job) -> List[SampledManifold]:
    problem, block, n_max, h = job
    current = evolve_manifold(problem, block, 1.0, h)
    sections = [current]
    for n in range(2, n_max + 1):
        current = _advance_manifold(problem, current, 1.0, h, float(n))
        sections.append(current)
    return sections


def _section(grid: SampledManifold, n: int, p_points: np.ndarray, q_points: np.ndarray,
             h: float) -> SampledManifold:
    return SampledManifold(
        label=f"M_{n}",
        time=float(n),
        p_points=p_points,
        q_points=q_points,
        grid_meta=grid.grid_meta.model_copy(update={"h": h}),
        problem_hash=grid.problem_hash,
    )


def manifold_sequence(
    problem: SpectralProblem,
    grid: SampledManifold,
    n_max: int,
    h: float,
    section_mode: SectionMode = SectionMode.EVOLVED,
    solve_tol: float = 1e-10,
    mapper: Optional[Mapper] = None,
) -> List[SampledManifold]:
    """M_1 .. M_{n_max} at integer times.

    ``evolved`` advances every grid point by the flow. ``graph`` keeps the
    p-grid fixed: each step pushes the previous section forward by S(1) and
    reads it back at the nodes, so every M_n is a graph over the same nodes.

    ``mapper(func, jobs)`` runs the fixed row blocks; pass a process-pool map
    to spread them over workers.
    """
    if n_max < 2:
        raise InvalidArgumentError("n_max must be at least 2", {"n_max": n_max})
    mapper = mapper or _serial

    if SectionMode(section_mode) == SectionMode.EVOLVED:
        blocks = [
            replace(grid, p_points=grid.p_points[start:start + ROW_CHUNK],
                    q_points=grid.q_points[start:start + ROW_CHUNK])
            for start in range(0, grid.n_points, ROW_CHUNK)
        ]
        parts = mapper(_evolved_job, [(problem, block, n_max, h) for block in blocks])
        return [
            _section(grid, k + 1,
                     np.concatenate([part[k].p_points for part in parts]),
                     np.concatenate([part[k].q_points for part in parts]), h)
            for k in range(n_max)
        ]

    nodes = grid.p_points
    guesses = linear_preimage(problem, nodes, 1.0)
    current = grid
    sequence = []
    for n in range(1, n_max + 1):
        foot, q, res = _solve_graph(problem, current, nodes, guesses, h, mapper)
        failed = int(np.sum(~(res <= solve_tol)))
        if failed:
            logger.warning("Graph foot points not converged",
                           extra={"horizon": n, "n_points": failed, "preset": problem.name})
        current = _section(grid, n, nodes.copy(), q, h)
        sequence.append(current)
        guesses = foot
    return sequence


def graph_solver_noise(problem: SpectralProblem, sequence: Sequence[SampledManifold], h: float,
                       mapper: Optional[Mapper] = None) -> float:
    """How far the last graph step moves when Newton starts elsewhere.

    The step M_{n-1} -> M_n is solved again from two starts, e^{A_P} node
    scaled by 1 - NOISE_PERTURBATION and by 1 + NOISE_PERTURBATION. The
    Hausdorff distance between the two Q-sections is the part of d_n that
    the solver alone produces.
    """
    if len(sequence) < 2:
        return 0.0
    mapper = mapper or _serial
    previous, last = sequence[-2], sequence[-1]
    start = linear_preimage(problem, last.p_points, 1.0)
    _, q_low, _ = _solve_graph(problem, previous, last.p_points, start * (1.0 - NOISE_PERTURBATION), h, mapper)
    _, q_high, _ = _solve_graph(problem, previous, last.p_points, start * (1.0 + NOISE_PERTURBATION), h, mapper)
    return hausdorff(q_low, q_high)


def limit_from_sequence(
    sequence: Sequence[SampledManifold],
    constants: RateConstants,
    tol: float,
    noise_floor: float = 0.0,
    slack: float = 3.0,
) -> Tuple[SampledManifold, RateReport]:
    sections = [q_section(m) for m in sequence]
    if len(sections) >= MIN_SECTIONS:
        report = cauchy_rate(sections, constants, tol, noise_floor=noise_floor, slack=slack)
    else:
        # too short for the pairwise check; adjacent distances only
        distances = [hausdorff(b, a) for a, b in zip(sections, sections[1:])]
        report = build_rate_report(distances, constants, tol, noise_floor=noise_floor, slack=slack)
    n_star = report.n_star if report.n_star is not None else len(sequence)
    return sequence[n_star - 1].relabel("M_inf", LIMIT), report


def manifold_limit(
    problem: SpectralProblem,
    grid: SampledManifold,
    n_max: int,
    h: float,
    tol: float,
    section_mode: SectionMode = SectionMode.EVOLVED,
    noise_floor: float = 0.0,
    slack: float = 3.0,
    solve_tol: float = 1e-10,
) -> Tuple[SampledManifold, RateReport]:
    sequence = manifold_sequence(problem, grid, n_max, h, section_mode, solve_tol)
    if SectionMode(section_mode) == SectionMode.GRAPH:
        noise_floor = max(noise_floor, NOISE_FLOOR_FACTOR * graph_solver_noise(problem, sequence, h))
    limit, report = limit_from_sequence(sequence, rate_constants(problem), tol, noise_floor, slack)
    if not report.converged:
        logger.info("Manifold sequence not converged within n_max",
                    extra={"distance": report.distances[-1], "preset": problem.name})
    return limit, report


def section_checks(problem: SpectralProblem, m: SampledManifold, h: float) -> List[CheckResult]:
    """Exterior flatness and the Q-section bound for one M_n."""
    p_norm = norms(m.p_points)
    q_norm = norms(m.q_points)
    exterior = p_norm > problem.r_trunc
    exterior_q = float(q_norm[exterior].max()) if exterior.any() else 0.0
    q_bound = problem.k0 / problem.lambda_n1 + 10.0 * h
    label = f"{m.label}@{m.time}"
    return [
        CheckResult(name=f"exterior_flat[{label}]", passed=exterior_q <= 10.0 * h,
                    value=exterior_q, threshold=10.0 * h, detail={"n_exterior": int(exterior.sum())}),
        CheckResult(name=f"q_section_bound[{label}]", passed=float(q_norm.max()) <= q_bound,
                    value=float(q_norm.max()), threshold=q_bound),
    ]


def lipschitz_estimate(m: SampledManifold) -> LipschitzReport:
    """Largest |dq|/|dp| over grid-adjacent pairs; colliding p-images count as folds."""
    shape = m.grid_shape
    if int(np.prod(shape)) != m.n_points:
        raise InvalidArgumentError("manifold rows do not form the recorded grid",
                              {"shape": list(shape), "n_points": m.n_points})
    p = m.p_points.reshape(shape + (m.p_points.shape[1],))
    q = m.q_points.reshape(shape + (m.q_points.shape[1],))
    best = 0.0
    folds = 0
    usable = 0
    for axis in range(len(shape)):
        dp = norms(np.diff(p, axis=axis))
        dq = norms(np.diff(q, axis=axis))
        ok = dp >= FOLD_TOL
        folds += int((~ok).sum())
        usable += int(ok.sum())
        if ok.any():
            best = max(best, float((dq[ok] / dp[ok]).max()))
    return LipschitzReport(value=best, fold_pairs=folds, degenerate=usable == 0)
