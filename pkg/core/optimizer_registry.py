from __future__ import annotations

from typing import Callable, Dict, List

from core.base_optimizer import BaseSceneOptimizer
from core.errors import ConfigurationError

OptimizerFactory = Callable[..., BaseSceneOptimizer]


class OptimizerRegistry:
    """Registry mapping CLI names to scene-optimizer factories."""

    def __init__(self) -> None:
        self._factories: Dict[str, OptimizerFactory] = {}
        self._descriptions: Dict[str, str] = {}

    def register(self, name: str, factory: OptimizerFactory, description: str = "") -> None:
        """Register a factory under ``name``.

        Raises:
            TypeError: If ``factory`` is not callable.
        """
        if not callable(factory):
            raise TypeError("factory must be callable")
        self._factories[name] = factory
        self._descriptions[name] = description

    def get(self, name: str) -> OptimizerFactory | None:
        return self._factories.get(name)

    def create(self, name: str, **kwargs) -> BaseSceneOptimizer:
        factory = self._factories.get(name)
        if factory is None:
            raise ConfigurationError(f"Unknown optimizer {name!r}; expected one of {self.names()}.")
        optimizer = factory(**kwargs)
        if not isinstance(optimizer, BaseSceneOptimizer):
            raise TypeError(f"factory for {name!r} did not build a BaseSceneOptimizer")
        return optimizer

    def names(self) -> List[str]:
        return sorted(self._factories)

    def describe(self, name: str) -> str:
        return self._descriptions.get(name, "")


__all__ = ["OptimizerFactory", "OptimizerRegistry"]
