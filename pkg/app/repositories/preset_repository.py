import logging
try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from pathlib import Path
from typing import Dict, List, Optional

from app.core.config import settings
from app.core.exceptions import ConfigFileError, PresetNotFoundException
from app.models import ExperimentConfig, ProblemPreset
from app.repositories.base_repository import BaseRepository

logger = logging.getLogger(__name__)


def read_toml(path: Path) -> dict:
    try:
        with open(path, "rb") as fh:
            return tomllib.load(fh)
    except FileNotFoundError:
        raise ConfigFileError(str(path), "file not found")
    except tomllib.TOMLDecodeError as e:
        raise ConfigFileError(str(path), str(e))


class PresetRepository(BaseRepository[ProblemPreset]):
    """Problem presets declared under [presets.<name>] in a TOML file"""

    def __init__(self, root: Optional[Path] = None):
        super().__init__(root)
        self._presets: Optional[Dict[str, ProblemPreset]] = None

    def _default_root(self) -> Path:
        return settings.presets_path

    def _entity_class(self) -> type:
        return ProblemPreset

    def _load(self) -> Dict[str, ProblemPreset]:
        if self._presets is None:
            raw = read_toml(self.root).get("presets", {})
            self._presets = {
                name: ProblemPreset.model_validate({"name": name, **body})
                for name, body in raw.items()
            }
            logger.debug("Loaded presets", extra={"n_points": len(self._presets)})
        return self._presets

    def list_names(self) -> List[str]:
        return sorted(self._load())

    def get(self, name: str) -> ProblemPreset:
        presets = self._load()
        if name not in presets:
            raise PresetNotFoundException(name, sorted(presets))
        return presets[name]


class ExperimentConfigRepository(BaseRepository[ExperimentConfig]):
    """Experiment configs, one TOML file each"""

    def _default_root(self) -> Path:
        return Path.cwd()

    def _entity_class(self) -> type:
        return ExperimentConfig

    def load(self, path: str) -> ExperimentConfig:
        file_path = Path(path)
        if not file_path.is_absolute():
            file_path = self.root / file_path
        return ExperimentConfig.model_validate(read_toml(file_path))
