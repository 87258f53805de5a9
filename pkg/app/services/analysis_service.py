from typing import List, Optional
import logging

import numpy as np

from app.models import CheckResult, NonlinearityKind, NumericsConfig
from app.numerics.analysis import (
    closedness_probe, containment, inclusion_check, invariance_check, resolution_tolerance,
    sample_attractor, support_check
)
from app.numerics.manifold import SampledManifold
from app.numerics.oracles import chafee_infante_stationary_states, constant_forcing_fixed_point
from app.numerics.problem import SpectralProblem, norms
from app.repositories.artifact_repository import ArtifactRepository

logger = logging.getLogger(__name__)


class AnalysisService:
    """Set-level statements: inclusion, support, invariance, closedness and the attractor"""

    def __init__(self, repository: Optional[ArtifactRepository] = None):
        self.repository = repository
        self.sections = {}

    def inclusion(self, problem: SpectralProblem, m_inf: SampledManifold, phi_graph: SampledManifold,
                  numerics: NumericsConfig, seed: int) -> List[CheckResult]:
        h = numerics.h
        tol = max(resolution_tolerance(phi_graph.grid_meta, h), resolution_tolerance(m_inf.grid_meta, h))
        try:
            inclusion = inclusion_check(m_inf, phi_graph, tol)
            support = support_check(phi_graph, problem.r_trunc, 10.0 * h)
            invariance = invariance_check(problem, phi_graph, numerics.invariance_time, h, tol)
            closedness = closedness_probe(
                problem, phi_graph, numerics.n_probes, seed, h, numerics.phi_n_max,
                numerics.n_starts, numerics.phi_tol, shooting_tol=numerics.shooting_tol,
            )
        except Exception as e:
            logger.error(f"Inclusion analysis failed: {e}", extra={"preset": problem.name, "error": str(e)})
            raise

        self.sections.update({
            "inclusion": inclusion.model_dump(mode="json"),
            "support": support.model_dump(mode="json"),
            "invariance": invariance.model_dump(mode="json"),
            "closedness": closedness.model_dump(mode="json"),
        })
        logger.info("Inclusion analysis finished", extra={
            "preset": problem.name,
            "distance": inclusion.forward_distance,
            "passed": inclusion.passed,
        })
        return [
            CheckResult(name="inclusion_forward", passed=inclusion.passed,
                        value=inclusion.forward_distance, threshold=tol),
            CheckResult(name="inclusion_reverse", passed=inclusion.reverse_passed, required=False,
                        value=inclusion.reverse_distance, threshold=tol,
                        detail={"equality_expected": inclusion.equality_expected}),
            CheckResult(name="support", passed=support.passed, value=support.max_exterior_q,
                        threshold=support.tol, detail={"n_exterior": support.n_exterior}),
            CheckResult(name="invariance", passed=invariance.passed, value=invariance.max_distance,
                        threshold=tol, detail={"n_points": invariance.n_points}),
            CheckResult(name="closedness", passed=closedness.passed, value=closedness.modulus,
                        detail={"flagged_sites": closedness.flagged_sites,
                                "consistent": closedness.consistent}),
        ]

    def attractor(self, problem: SpectralProblem, phi_graph: SampledManifold, numerics: NumericsConfig,
                  seed: int) -> List[CheckResult]:
        h = numerics.h
        tol = resolution_tolerance(phi_graph.grid_meta, h)
        try:
            points = sample_attractor(problem, numerics.attractor_seeds, seed, numerics.t_transient,
                                      numerics.t_collect, numerics.stride, h)
            report = containment(points, phi_graph, tol)
        except Exception as e:
            logger.error(f"Attractor sampling failed: {e}", extra={"preset": problem.name, "error": str(e)})
            raise

        self.sections["attractor"] = report.model_dump(mode="json")
        if self.repository is not None:
            self.repository.save_points("attractor", points,
                                        [f"x{i}" for i in range(1, problem.dim + 1)])
        checks = [CheckResult(name="attractor_containment", passed=report.passed,
                              value=report.max_distance, threshold=tol,
                              detail={"n_points": report.n_points, "worst_index": report.worst_index})]

        kind = problem.nonlinearity.kind
        if kind == NonlinearityKind.ZERO:
            worst = float(norms(points).max())
            bound = problem.r_trunc * float(np.exp(-problem.lambda1 * numerics.t_transient)) + 10.0 * h
            checks.append(CheckResult(name="attractor_at_origin", passed=worst <= bound,
                                      value=worst, threshold=bound))
        elif kind == NonlinearityKind.CONSTANT_FORCING:
            worst = float(norms(points - constant_forcing_fixed_point(problem)).max())
            checks.append(CheckResult(name="attractor_at_fixed_point", passed=worst <= 10.0 * h,
                                      value=worst, threshold=10.0 * h))
        elif kind == NonlinearityKind.CHAFEE_INFANTE:
            states = chafee_infante_stationary_states(problem, seed=seed)
            stationary = containment(states, phi_graph, tol) if len(states) else None
            self.sections["stationary_states"] = [[float(x) for x in s] for s in states]
            checks.append(CheckResult(
                name="stationary_states_in_graph",
                passed=stationary is None or stationary.passed,
                value=None if stationary is None else stationary.max_distance,
                threshold=tol,
                detail={"n_states": int(len(states))},
            ))
        logger.info("Attractor sampled", extra={
            "preset": problem.name,
            "n_points": report.n_points,
            "distance": report.max_distance,
        })
        return checks
