from typing import Any, Dict, List, Optional, Tuple
import logging

from app.core.exceptions import InvalidProblemError
from app.models import ProblemPreset, RateConstants
from app.numerics.estimates import rate_constants
from app.numerics.problem import SpectralProblem, build_problem
from app.repositories.preset_repository import PresetRepository
from app.infrastructure.cache import problem_hash

logger = logging.getLogger(__name__)


def _merge(base: Dict[str, Any], overrides: Dict[str, Any]) -> Dict[str, Any]:
    merged = dict(base)
    for key, value in overrides.items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = _merge(merged[key], value)
        else:
            merged[key] = value
    return merged


class PresetService:
    """Resolves presets and overrides into concrete spectral problems"""

    def __init__(self, repository: PresetRepository = None):
        self.repository = repository or PresetRepository()

    def list_presets(self) -> List[str]:
        return self.repository.list_names()

    def get_preset(self, name: str, overrides: Optional[Dict[str, Any]] = None) -> ProblemPreset:
        preset = self.repository.get(name)
        if not overrides:
            return preset
        # re-validate so overrides go through the same checks as the file
        return ProblemPreset.model_validate(_merge(preset.model_dump(mode="json"), overrides))

    def load_problem(self, name: str, overrides: Optional[Dict[str, Any]] = None) -> Tuple[SpectralProblem, str]:
        """Problem and its fingerprint for a preset name plus config overrides"""
        try:
            problem = build_problem(self.get_preset(name, overrides))
            fingerprint = problem_hash(problem)
            logger.info("Problem loaded", extra={
                "preset": name,
                "problem_hash": fingerprint,
                "n_points": problem.dim,
            })
            return problem, fingerprint
        except InvalidProblemError as e:
            logger.error(f"Invalid preset {name}: {e.message}", extra={"preset": name, "error": e.message})
            raise

    def describe(self, name: str) -> Dict[str, Any]:
        problem, fingerprint = self.load_problem(name)
        constants: RateConstants = rate_constants(problem)
        preset = self.repository.get(name)
        return {
            "preset": name,
            "description": preset.description,
            "problem_hash": fingerprint,
            "modes": problem.dim,
            "split": problem.split_index,
            "nonlinearity": problem.nonlinearity.kind.value,
            "eigenvalues": [float(x) for x in problem.eigenvalues],
            "r_trunc": problem.r_trunc,
            "flags": list(problem.flags),
            "constants": constants.model_dump(mode="json"),
        }

    @staticmethod
    def format_description(info: Dict[str, Any]) -> str:
        constants = info["constants"]
        lines = [
            f"preset         {info['preset']}",
            f"problem_hash   {info['problem_hash']}",
            f"nonlinearity   {info['nonlinearity']}",
            f"modes / split  {info['modes']} / {info['split']}",
            f"eigenvalues    {', '.join(f'{x:g}' for x in info['eigenvalues'])}",
            f"R              {info['r_trunc']:.6g}",
            f"K0, K1         {constants['k0']:.6g}, {constants['k1']:.6g}",
            f"alpha, beta    {constants['alpha']:.6g}, {constants['beta']:.6g}",
            f"rate           {constants['rate']:.6g}",
            f"spectral gap   {'yes' if constants['spectral_gap_condition'] else 'no'}",
        ]
        for key in ("k2", "k3", "k4", "k5"):
            value = constants[key]
            lines.append(f"{key.upper():<15}{'n/a' if value is None else f'{value:.6g}'}")
        if info["flags"]:
            lines.append(f"flags          {', '.join(info['flags'])}")
        if info["description"]:
            lines.append(f"description    {info['description']}")
        return "\n".join(lines)
