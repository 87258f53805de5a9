# Infrastructure module for stage timing, memoization and worker pools
from app.infrastructure.cache import ComputationCache, problem_hash
from app.infrastructure.executor import parallel_map
from app.infrastructure.performance_monitor import PerformanceMonitor

__all__ = [
    "ComputationCache",
    "PerformanceMonitor",
    "parallel_map",
    "problem_hash",
]
