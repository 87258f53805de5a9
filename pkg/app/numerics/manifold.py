"""Finite samples of invariant sets as (p, q) point clouds."""
from dataclasses import dataclass, replace
from typing import Optional, Union

import numpy as np

from app.core.exceptions import DimensionMismatchError
from app.models import GridMeta

LIMIT = "limit"


@dataclass(frozen=True)
class SampledManifold:
    label: str
    time: Union[float, str]
    p_points: np.ndarray
    q_points: np.ndarray
    grid_meta: GridMeta
    problem_hash: Optional[str] = None
    # graph_Phi rows: multistart branch and the p-grid node they belong to
    branch_ids: Optional[np.ndarray] = None
    node_index: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.p_points.ndim != 2 or self.q_points.ndim != 2:
            raise DimensionMismatchError("manifold points", "2-d arrays",
                                         [self.p_points.ndim, self.q_points.ndim])
        if self.p_points.shape[0] != self.q_points.shape[0]:
            raise DimensionMismatchError("manifold rows", self.p_points.shape[0], self.q_points.shape[0])

    @property
    def n_points(self) -> int:
        return int(self.p_points.shape[0])

    @property
    def points(self) -> np.ndarray:
        """Rows (p, q) in full coordinates."""
        return np.concatenate([self.p_points, self.q_points], axis=1)

    @property
    def grid_shape(self):
        return tuple(self.grid_meta.resolution)

    def relabel(self, label: str, time: Union[float, str, None] = None) -> "SampledManifold":
        return replace(self, label=label, time=self.time if time is None else time)
