from dataclasses import dataclass
from functools import partial
from typing import List, Optional
import logging

import numpy as np

from app.models import CheckResult, LipschitzReport, NumericsConfig, RateConstants, RateReport, SectionMode
from app.numerics.estimates import rate_constants
from app.numerics.forward import (
    NOISE_FLOOR_FACTOR, flat_manifold_for, graph_solver_noise, limit_from_sequence, lipschitz_estimate,
    manifold_sequence, section_checks
)
from app.numerics.manifold import SampledManifold
from app.numerics.problem import SpectralProblem
from app.repositories.artifact_repository import ArtifactRepository
from app.infrastructure.executor import parallel_map

logger = logging.getLogger(__name__)

LIPSCHITZ_GROWTH = 2.0


@dataclass
class ForwardResult:
    sequence: List[SampledManifold]
    limit: SampledManifold
    report: RateReport
    constants: RateConstants
    lipschitz: List[LipschitzReport]
    checks: List[CheckResult]


class ForwardService:
    """M_n sequence from the flat manifold, its limit and the rate checks"""

    def __init__(self, repository: Optional[ArtifactRepository] = None, jobs: int = 1):
        self.repository = repository
        self.jobs = jobs

    def sequence(self, problem: SpectralProblem, grid: SampledManifold, numerics: NumericsConfig) -> List[SampledManifold]:
        return manifold_sequence(
            problem, grid, numerics.n_max, numerics.h, numerics.section_mode,
            solve_tol=numerics.shooting_tol, mapper=self._mapper(),
        )

    def noise_floor(self, problem: SpectralProblem, sequence: List[SampledManifold],
                    numerics: NumericsConfig) -> float:
        """Configured floor, raised to the measured solver noise in graph mode."""
        if numerics.section_mode != SectionMode.GRAPH:
            return numerics.noise_floor
        noise = graph_solver_noise(problem, sequence, numerics.h, mapper=self._mapper())
        floor = max(numerics.noise_floor, NOISE_FLOOR_FACTOR * noise)
        logger.info("Graph solver noise measured", extra={
            "preset": problem.name, "distance": noise, "noise_floor": floor,
        })
        return floor

    def _mapper(self):
        return partial(parallel_map, n_jobs=self.jobs)

    def run(self, problem: SpectralProblem, fingerprint: str, numerics: NumericsConfig) -> ForwardResult:
        try:
            constants = rate_constants(problem)
            grid = flat_manifold_for(problem, numerics.grid_resolution, numerics.h, fingerprint)
            sequence = self.sequence(problem, grid, numerics)
            limit, report = limit_from_sequence(
                sequence, constants, numerics.manifold_tol,
                noise_floor=self.noise_floor(problem, sequence, numerics), slack=numerics.rate_slack,
            )
            lipschitz = [lipschitz_estimate(m) for m in sequence]
            checks = self._checks(problem, sequence, report, constants, lipschitz, numerics.h)
            logger.info("Forward transform finished", extra={
                "preset": problem.name,
                "distance": report.distances[-1],
                "n_points": grid.n_points,
                "passed": all(c.passed for c in checks if c.required),
            })
            result = ForwardResult(sequence, limit, report, constants, lipschitz, checks)
            if self.repository is not None:
                self.save(result)
            return result
        except Exception as e:
            logger.error(f"Forward transform failed: {e}", extra={"preset": problem.name, "error": str(e)})
            raise

    def _checks(self, problem: SpectralProblem, sequence: List[SampledManifold], report: RateReport,
                constants: RateConstants, lipschitz: List[LipschitzReport], h: float) -> List[CheckResult]:
        checks = [
            CheckResult(
                name="rate_bound",
                passed=not report.bound_violations and not report.pair_violations,
                value=report.distances[0],
                threshold=report.prefactor * report.bound_slack,
                detail={"bound_violations": report.bound_violations,
                        "pair_violations": [list(p) for p in report.pair_violations]},
            ),
            CheckResult(
                name="rate_band",
                passed=report.rate_within_band is not False,
                required=report.rate_within_band is not None,
                value=report.fitted_rate,
                threshold=constants.rate,
                detail={"band": list(report.slack_band), "fit_indices": report.fit_indices},
            ),
            CheckResult(name="converged", passed=report.converged, required=False,
                        value=report.distances[-1], detail={"n_star": report.n_star}),
            CheckResult(name="cauchy_nonincreasing", passed=report.nonincreasing,
                        required=constants.rate_positive, detail={"noise_floor": report.noise_floor}),
        ]
        for m in sequence:
            checks.extend(section_checks(problem, m, h))

        values = [r.value for r in lipschitz]
        growth = [b / a for a, b in zip(values, values[1:]) if a > 0]
        checks.append(CheckResult(
            name="lipschitz_bounded",
            passed=all(g <= LIPSCHITZ_GROWTH for g in growth),
            required=False,
            value=max(values),
            threshold=LIPSCHITZ_GROWTH,
            detail={"per_section": values, "fold_pairs": [r.fold_pairs for r in lipschitz]},
        ))
        return checks

    def save(self, result: ForwardResult) -> List[str]:
        written = []
        for m in result.sequence:
            written.extend(self.repository.save_manifold(m.label, m))
        written.extend(self.repository.save_manifold("M_inf", result.limit))
        written.append(self.repository.save_points(
            "rate_distances",
            np.column_stack([result.report.indices, result.report.distances]),
            ["n", "distance"],
        ))
        return written
