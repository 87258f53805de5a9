from typing import List, Optional, Tuple
import logging

import numpy as np

from app.models import CheckResult, NumericsConfig, RateConstants, SigmaRhoReport
from app.numerics.estimates import rate_constants, verify_sigma_rho
from app.numerics.flow import integrate
from app.numerics.problem import SpectralProblem, join, norms, sample_ball, split
from app.repositories.artifact_repository import ArtifactRepository

logger = logging.getLogger(__name__)

# pairs sharing their P-component, for the pure Q-decay case
SAME_P_PAIRS = 10
Q_PERTURBATION = 0.1


class EstimatesService:
    """Difference inequalities for random pairs of trajectories"""

    def __init__(self, repository: Optional[ArtifactRepository] = None):
        self.repository = repository
        self.sections = {}

    def pairs(self, problem: SpectralProblem, numerics: NumericsConfig, seed: int):
        radius = numerics.pair_radius or problem.r_trunc
        rng = np.random.default_rng([seed, 31])
        u = sample_ball(rng, numerics.pair_count, problem.dim, radius)
        v = sample_ball(rng, numerics.pair_count, problem.dim, radius)

        base = sample_ball(rng, SAME_P_PAIRS, problem.dim, radius)
        p, q = split(problem, base)
        shift = sample_ball(rng, SAME_P_PAIRS, problem.q_dim, Q_PERTURBATION * radius)
        same_p = join(problem, p[:, :problem.p_dim], q[:, problem.p_dim:] + shift)
        return u, v, base, same_p

    def _verify(self, problem: SpectralProblem, u0: np.ndarray, v0: np.ndarray, numerics: NumericsConfig,
                constants: RateConstants) -> Tuple[SigmaRhoReport, float]:
        u = integrate(problem, u0, numerics.t1, numerics.h)
        v = integrate(problem, v0, numerics.t1, numerics.h)
        report = verify_sigma_rho(problem, u, v, numerics.t0, numerics.t1, constants=constants)

        # Gronwall: |u(t) - v(t)| <= e^{(K1 - lambda1) t} |u0 - v0|
        growth = np.exp((constants.k1 - constants.lambda1) * numerics.t1)
        ratio = norms(u.final - v.final) / np.maximum(growth * norms(u0 - v0), np.finfo(float).tiny)
        return report, float(ratio.max())

    def run(self, problem: SpectralProblem, numerics: NumericsConfig, seed: int) -> List[CheckResult]:
        try:
            constants = rate_constants(problem)
            u0, v0, base, same_p = self.pairs(problem, numerics, seed)
            random_report, random_ratio = self._verify(problem, u0, v0, numerics, constants)
            same_report, same_ratio = self._verify(problem, base, same_p, numerics, constants)
        except Exception as e:
            logger.error(f"Pair estimates failed: {e}", extra={"preset": problem.name, "error": str(e)})
            raise

        self.sections["sigma_rho"] = random_report.model_dump(mode="json")
        self.sections["sigma_rho_same_p"] = same_report.model_dump(mode="json")
        logger.info("Pair estimates checked", extra={
            "preset": problem.name,
            "n_points": numerics.pair_count + SAME_P_PAIRS,
            "passed": random_report.passed and same_report.passed,
        })

        checks = []
        for label, report in (("random_pairs", random_report), ("same_p_pairs", same_report)):
            for check in report.checks:
                checks.append(CheckResult(
                    name=f"{check.name}[{label}]",
                    passed=check.passed,
                    value=check.max_violation,
                    threshold=10.0 * numerics.h,
                    detail={"skipped": check.skipped, "min_slack": check.min_slack,
                            "reason": report.skipped_reason},
                ))
        worst = max(random_ratio, same_ratio)
        checks.append(CheckResult(name="flow_lipschitz", passed=worst <= 1.0 + 10.0 * numerics.h,
                                  value=worst, threshold=1.0 + 10.0 * numerics.h))
        return checks
