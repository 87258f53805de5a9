import json
import logging
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

import numpy as np

from app.core.config import settings
from app.core.exceptions import NotFoundError, InvalidArgumentError
from app.models import GridMeta
from app.numerics.flow import Trajectory
from app.numerics.manifold import SampledManifold
from app.repositories.base_repository import BaseRepository

logger = logging.getLogger(__name__)


def manifold_header(p_dim: int, q_dim: int, with_branches: bool) -> List[str]:
    columns = [f"p{i}" for i in range(1, p_dim + 1)] + [f"q{i}" for i in range(1, q_dim + 1)]
    if with_branches:
        columns += ["branch_id", "node_index"]
    return columns


class ArtifactRepository(BaseRepository[SampledManifold]):
    """Run output directory: JSON reports, CSV point clouds and their sidecars.

    Files are written deterministically (sorted keys, fixed float format) so
    two runs with the same config produce byte-identical numerical artifacts.
    """

    def _default_root(self) -> Path:
        return Path("runs/default")

    def _entity_class(self) -> type:
        return SampledManifold

    def _ensure_root(self):
        self.root.mkdir(parents=True, exist_ok=True)

    def _require(self, name: str) -> Path:
        path = self._path(name)
        if not path.exists():
            raise NotFoundError(f"Artifact {name} not found", {"root": str(self.root), "name": name})
        return path

    # JSON and text
    def save_json(self, name: str, data: Dict[str, Any]) -> str:
        self._ensure_root()
        text = json.dumps(data, sort_keys=True, indent=settings.report_indent, default=str)
        self._path(name).write_text(text + "\n")
        logger.debug(f"Wrote {name}", extra={"n_points": len(data)})
        return name

    def load_json(self, name: str) -> Dict[str, Any]:
        return json.loads(self._require(name).read_text())

    def save_text(self, name: str, text: str) -> str:
        self._ensure_root()
        self._path(name).write_text(text if text.endswith("\n") else text + "\n")
        return name

    # Point clouds
    def _save_table(self, name: str, table: np.ndarray, header: List[str]) -> str:
        self._ensure_root()
        np.savetxt(self._path(name), table, fmt=settings.csv_float_format, delimiter=",",
                   header=",".join(header), comments="")
        return name

    def _load_table(self, name: str) -> Tuple[List[str], np.ndarray]:
        path = self._require(name)
        with open(path) as fh:
            header = fh.readline().strip().split(",")
        table = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        return header, table.reshape(-1, len(header))

    def save_manifold(self, name: str, manifold: SampledManifold) -> List[str]:
        """``<name>.csv`` with one row per point plus ``<name>.json`` metadata."""
        with_branches = manifold.branch_ids is not None
        table = manifold.points
        if with_branches:
            table = np.column_stack([table, manifold.branch_ids, manifold.node_index])
        csv_name = self._save_table(
            f"{name}.csv", table,
            manifold_header(manifold.p_points.shape[1], manifold.q_points.shape[1], with_branches),
        )
        sidecar = self.save_json(f"{name}.json", {
            "label": manifold.label,
            "time": manifold.time,
            "p_dim": int(manifold.p_points.shape[1]),
            "q_dim": int(manifold.q_points.shape[1]),
            "grid_meta": manifold.grid_meta.model_dump(mode="json"),
            "problem_hash": manifold.problem_hash,
        })
        return [csv_name, sidecar]

    def load_manifold(self, name: str) -> SampledManifold:
        meta = self.load_json(f"{name}.json")
        header, table = self._load_table(f"{name}.csv")
        p_dim, q_dim = meta["p_dim"], meta["q_dim"]
        with_branches = "branch_id" in header
        return SampledManifold(
            label=meta["label"],
            time=meta["time"],
            p_points=table[:, :p_dim],
            q_points=table[:, p_dim:p_dim + q_dim],
            grid_meta=GridMeta.model_validate(meta["grid_meta"]),
            problem_hash=meta.get("problem_hash"),
            branch_ids=table[:, -2].astype(int) if with_branches else None,
            node_index=table[:, -1].astype(int) if with_branches else None,
        )

    def save_trajectory(self, name: str, trajectory: Trajectory) -> str:
        states = trajectory.states
        if states.ndim != 2:
            raise InvalidArgumentError("only single trajectories are stored", {"shape": list(states.shape)})
        header = ["t"] + [f"x{i}" for i in range(1, states.shape[1] + 1)]
        return self._save_table(f"{name}.csv", np.column_stack([trajectory.times, states]), header)

    def load_trajectory(self, name: str, step: Optional[float] = None) -> Trajectory:
        _, table = self._load_table(f"{name}.csv")
        times = table[:, 0]
        if step is None:
            step = float(times[1] - times[0]) if times.size > 1 else 0.0
        return Trajectory(times=times, states=table[:, 1:], step=step)

    def save_points(self, name: str, points: np.ndarray, header: List[str]) -> str:
        return self._save_table(f"{name}.csv", np.atleast_2d(points), header)

    def list_artifacts(self) -> List[str]:
        if not self.root.exists():
            return []
        return sorted(p.name for p in self.root.iterdir() if p.is_file())
