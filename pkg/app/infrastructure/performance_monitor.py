# Stage timings for experiment runs:
# - wall time per pipeline stage
# - point counts processed per stage
# - cache hit/miss rates

from contextlib import contextmanager
from time import perf_counter
import logging
from typing import Dict, Any

logger = logging.getLogger(__name__)


class PerformanceMonitor:
    def __init__(self):
        self.stage_stats: Dict[str, Dict[str, float]] = {}
        self.cache_stats = {"hits": 0, "misses": 0}

    @contextmanager
    def track_stage(self, stage: str, n_points: int = 0):
        """Time a pipeline stage and log its duration"""
        start = perf_counter()
        try:
            yield
        finally:
            self.complete_stage(stage, perf_counter() - start, n_points)

    def complete_stage(self, stage: str, duration: float, n_points: int = 0) -> Dict[str, Any]:
        stats = self.stage_stats.setdefault(stage, {"calls": 0, "total_duration": 0.0, "total_points": 0})
        stats["calls"] += 1
        stats["total_duration"] += duration
        stats["total_points"] += n_points

        logger.info("Stage completed", extra={
            "experiment": stage,
            "duration": round(duration, 4),
            "n_points": n_points,
        })
        return {"duration_seconds": duration, "n_points": n_points}

    def record_cache(self, hit: bool):
        self.cache_stats["hits" if hit else "misses"] += 1

    def get_cache_hit_rate(self) -> float:
        """Calculate cache hit rate percentage"""
        total = self.cache_stats["hits"] + self.cache_stats["misses"]
        if total == 0:
            return 0.0
        return (self.cache_stats["hits"] / total) * 100

    def get_performance_summary(self) -> Dict[str, Any]:
        summary = {
            "cache_stats": {
                **self.cache_stats,
                "hit_rate_percent": round(self.get_cache_hit_rate(), 2),
            },
            "stages": {},
        }
        for stage, stats in self.stage_stats.items():
            summary["stages"][stage] = {
                "calls": stats["calls"],
                "total_seconds": round(stats["total_duration"], 4),
                "avg_seconds": round(stats["total_duration"] / stats["calls"], 4),
                "total_points": stats["total_points"],
            }
        return summary
