from abc import ABC, abstractmethod
from pathlib import Path
from typing import TypeVar, Generic, Optional

T = TypeVar('T')


class BaseRepository(ABC, Generic[T]):
    """File-backed repository rooted at a directory or file path"""

    def __init__(self, root: Optional[Path] = None):
        self.root = Path(root) if root is not None else self._default_root()

    @abstractmethod
    def _default_root(self) -> Path:
        """Return the default location for this repository"""
        pass

    @abstractmethod
    def _entity_class(self) -> type:
        """Return the entity class for this repository"""
        pass

    def _path(self, name: str) -> Path:
        return self.root / name

    def exists(self, name: str) -> bool:
        return self._path(name).exists()
