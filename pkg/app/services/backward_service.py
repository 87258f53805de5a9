from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Tuple
import logging

import numpy as np

from app.models import BackwardBoundsReport, CheckResult, NonlinearityKind, NumericsConfig, RateConstants
from app.numerics.backward import (
    PhiValue, ShootingResult, assemble_phi_graph, check_backward_bounds, phi_batch, shoot_batch
)
from app.numerics.estimates import rate_constants
from app.numerics.forward import default_grid_bounds, sample_flat_manifold
from app.numerics.manifold import SampledManifold
from app.numerics.oracles import constant_forcing_q, decoupled_phi
from app.numerics.problem import SpectralProblem, norms, sample_ball
from app.repositories.artifact_repository import ArtifactRepository
from app.infrastructure.executor import parallel_map

logger = logging.getLogger(__name__)

NODE_CHUNK = 16
# multistart streams for oracle samples are kept apart from the grid nodes
SAMPLE_STREAM_OFFSET = 10 ** 6
# fraction of R inside which the constant forcing oracle is exact up to O(h)
FORCING_SAMPLE_FRACTION = 0.1
SAMPLE_FRACTION = 0.5
MIN_DECAY_POINTS = 3


def _phi_job(job) -> List[PhiValue]:
    problem, nodes, offset, numerics, seed = job
    return phi_batch(
        problem, nodes, numerics.phi_n_max, numerics.n_starts, seed, numerics.h, numerics.phi_tol,
        shooting_tol=numerics.shooting_tol, node_offset=offset,
    )


def branch_decay_rate(increments, noise_floor: float) -> Optional[float]:
    """Exponent of the geometric decay of a branch's successive increments."""
    inc = np.asarray(increments, dtype=float)
    steps = np.arange(inc.size, dtype=float)
    mask = inc > noise_floor
    if int(mask.sum()) < MIN_DECAY_POINTS:
        return None
    slope, _ = np.polyfit(steps[mask], np.log(inc[mask]), 1)
    return float(-slope)


@dataclass
class BackwardResult:
    graph: SampledManifold
    values: List[PhiValue]
    sample_p0s: np.ndarray
    sample_values: List[PhiValue]
    bounds: List[BackwardBoundsReport]
    checks: List[CheckResult]
    shots: List[ShootingResult] = field(default_factory=list)


class BackwardService:
    """The backward construction: phi on a p-grid, oracles and a-priori bounds"""

    def __init__(self, repository: Optional[ArtifactRepository] = None, jobs: int = 1):
        self.repository = repository
        self.jobs = jobs

    def graph(self, problem: SpectralProblem, fingerprint: str, numerics: NumericsConfig,
              seed: int) -> Tuple[SampledManifold, List[PhiValue]]:
        res = numerics.phi_grid_resolution
        grid = sample_flat_manifold(default_grid_bounds(problem, res), res, problem.q_dim,
                                    support_radius=problem.r_trunc, h=numerics.h)
        nodes = grid.p_points
        jobs = [(problem, nodes[start:start + NODE_CHUNK], start, numerics, seed)
                for start in range(0, nodes.shape[0], NODE_CHUNK)]
        values = [v for part in parallel_map(_phi_job, jobs, self.jobs) for v in part]
        graph = assemble_phi_graph(problem, nodes, values, grid.grid_meta, fingerprint)
        logger.info("phi graph assembled", extra={
            "preset": problem.name,
            "n_points": graph.n_points,
            "horizon": max(v.horizon_used for v in values),
        })
        return graph, values

    def sample_points(self, problem: SpectralProblem, numerics: NumericsConfig, seed: int) -> np.ndarray:
        fraction = FORCING_SAMPLE_FRACTION \
            if problem.nonlinearity.kind == NonlinearityKind.CONSTANT_FORCING else SAMPLE_FRACTION
        rng = np.random.default_rng([seed, 1])
        return sample_ball(rng, numerics.phi_samples, problem.p_dim, fraction * problem.r_trunc)

    def run(self, problem: SpectralProblem, fingerprint: str, numerics: NumericsConfig, seed: int) -> BackwardResult:
        try:
            graph, values = self.graph(problem, fingerprint, numerics, seed)
            p0s = self.sample_points(problem, numerics, seed)
            sample_values = phi_batch(
                problem, p0s, numerics.phi_n_max, numerics.n_starts, seed, numerics.h, numerics.phi_tol,
                shooting_tol=numerics.shooting_tol, node_offset=SAMPLE_STREAM_OFFSET,
            )
            shots = shoot_batch(problem, p0s, numerics.phi_n_max, h=numerics.h, tol=numerics.shooting_tol)
            bounds = [check_backward_bounds(problem, r) for r in shots if r.converged]

            checks = self._oracle_checks(problem, graph, p0s, sample_values, numerics)
            checks.append(CheckResult(
                name="shooting_converged",
                passed=len(bounds) == len(shots),
                required=False,
                value=float(len(bounds)),
                threshold=float(len(shots)),
            ))
            failing = sorted({c.name for b in bounds for c in b.checks if not c.passed})
            ratios = [b.half_power_ratio for b in bounds if b.half_power_ratio is not None]
            checks.append(CheckResult(
                name="backward_bounds",
                passed=not failing,
                value=max(ratios) if ratios else None,
                detail={"failing": failing, "n_checked": len(bounds)},
            ))
            checks.append(self._decay_check(rate_constants(problem), values + sample_values, numerics))
            partial = sum(v.partial for v in values)
            checks.append(CheckResult(name="phi_complete", passed=partial == 0, required=False,
                                      value=float(partial)))

            result = BackwardResult(graph, values, p0s, sample_values, bounds, checks, shots)
            if self.repository is not None:
                self.save(result)
            return result
        except Exception as e:
            logger.error(f"Backward construction failed: {e}", extra={"preset": problem.name, "error": str(e)})
            raise

    def _oracle_checks(self, problem: SpectralProblem, graph: SampledManifold, p0s: np.ndarray,
                       sample_values: List[PhiValue], numerics: NumericsConfig) -> List[CheckResult]:
        kind = problem.nonlinearity.kind
        if kind == NonlinearityKind.ZERO:
            worst = float(norms(graph.q_points).max()) if graph.n_points else 0.0
            return [CheckResult(name="zero_oracle", passed=worst <= numerics.phi_tol,
                                value=worst, threshold=numerics.phi_tol)]
        if kind == NonlinearityKind.CONSTANT_FORCING:
            expected = [constant_forcing_q(problem)] * len(p0s)
        elif kind == NonlinearityKind.DECOUPLED:
            expected = [decoupled_phi(problem, p0) for p0 in p0s]
        else:
            return []
        gaps = []
        for value, target in zip(sample_values, expected):
            gaps.append(float(norms(value.values - target).min()) if value.branches else float("inf"))
        threshold = 10.0 * numerics.h
        return [CheckResult(
            name=f"{kind.value}_oracle",
            passed=max(gaps) <= threshold,
            value=max(gaps),
            threshold=threshold,
            detail={"gaps": gaps},
        )]

    def _decay_check(self, constants: RateConstants, values: List[PhiValue],
                     numerics: NumericsConfig) -> CheckResult:
        rates = [
            rate for v in values for b in v.branches
            if (rate := branch_decay_rate(b.increments, numerics.noise_floor)) is not None
        ]
        threshold = 0.5 * constants.rate
        worst = min(rates) if rates else None
        return CheckResult(
            name="branch_cauchy_decay",
            passed=worst is None or worst >= threshold,
            required=constants.rate_positive and worst is not None,
            value=worst,
            threshold=threshold,
            detail={"n_branches_fitted": len(rates)},
        )

    def save(self, result: BackwardResult) -> List[str]:
        written = self.repository.save_manifold("graph_Phi", result.graph)
        written.append(self.repository.save_json("phi_values.json", {
            "nodes": [self.describe_value(v) for v in result.values],
            "samples": [self.describe_value(v) for v in result.sample_values],
        }))
        written.append(self.repository.save_json("backward_bounds.json", {
            "reports": [b.model_dump(mode="json") for b in result.bounds],
        }))
        for k, shot in enumerate(result.shots):
            if shot.converged and shot.trajectory is not None:
                written.append(self.repository.save_trajectory(f"backward_trajectory_{k}", shot.trajectory))
        return written

    @staticmethod
    def describe_value(value: PhiValue) -> Dict[str, Any]:
        return {
            "p0": [float(x) for x in value.p0],
            "horizon_used": value.horizon_used,
            "partial": value.partial,
            "branches": [
                {
                    "branch_id": b.branch_id,
                    "q0": [float(x) for x in b.q0],
                    "horizon": b.horizon,
                    "increments": list(b.increments),
                    "residual": b.residual,
                    "settled": b.settled,
                }
                for b in value.branches
            ],
        }
