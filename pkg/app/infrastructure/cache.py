from typing import Any, Callable, Dict, Optional
import hashlib
import json
import logging

logger = logging.getLogger(__name__)


def _canonical(value: Any) -> str:
    return json.dumps(value, sort_keys=True, separators=(",", ":"), default=str)


def problem_hash(problem) -> str:
    """Stable fingerprint of a problem's numerical content."""
    payload = {
        "eigenvalues": [repr(float(x)) for x in problem.eigenvalues],
        "split": int(problem.split_index),
        "nonlinearity": problem.nonlinearity.model_dump(mode="json"),
        "k0": repr(float(problem.k0)),
        "k1": repr(float(problem.k1)),
        "r_trunc": repr(float(problem.r_trunc)),
    }
    return hashlib.sha256(_canonical(payload).encode()).hexdigest()[:16]


class ComputationCache:
    """In-memory memo for expensive experiment stages.

    Keys combine a stage name, the problem fingerprint and the stage
    parameters, so one cache can be shared across experiments of a run.
    """

    def __init__(self):
        self._memory_cache: Dict[str, Any] = {}
        self.hits = 0
        self.misses = 0

    def _generate_key(self, stage: str, fingerprint: str, params: Dict[str, Any]) -> str:
        params_hash = hashlib.md5(_canonical(params).encode()).hexdigest()[:12]
        return f"{stage}:{fingerprint}:{params_hash}"

    def get(self, key: str) -> Optional[Any]:
        return self._memory_cache.get(key)

    def set(self, key: str, value: Any):
        self._memory_cache[key] = value
        logger.debug(f"Stored in memory cache: {key}")

    def get_or_compute(self, stage: str, fingerprint: str, params: Dict[str, Any],
                       compute: Callable[[], Any]) -> Any:
        key = self._generate_key(stage, fingerprint, params)
        if key in self._memory_cache:
            self.hits += 1
            return self._memory_cache[key]
        self.misses += 1
        value = compute()
        self.set(key, value)
        return value

    def clear(self):
        self._memory_cache.clear()
