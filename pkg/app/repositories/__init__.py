# Repositories module initialization
from app.repositories.base_repository import BaseRepository
from app.repositories.preset_repository import ExperimentConfigRepository, PresetRepository
from app.repositories.artifact_repository import ArtifactRepository

__all__ = [
    "BaseRepository",
    "PresetRepository",
    "ExperimentConfigRepository",
    "ArtifactRepository",
]
