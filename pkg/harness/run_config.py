"""Per-scene optimization run settings."""
from __future__ import annotations

from dataclasses import asdict, dataclass, fields
from typing import Any, Literal, Mapping, Optional

from core.errors import ConfigurationError
from optim.groups import group_mask

OPTIMIZER_CHOICES = ("sgd", "adam-3dgs", "adam-3dgs-star", "l2s", "lo-baseline")
LEARNED_OPTIMIZERS = ("l2s", "lo-baseline")
DEFAULT_CADENCE = (1, 2, 4, 10, 20, 50, 100, 200, 500, 1000, 2000)

ViewsPolicy = Literal["fixed-all", "fps-8"]


@dataclass(frozen=True, slots=True)
class RunConfig:
    optimizer: str = "adam-3dgs"
    iterations: int = 100
    cadence: tuple[int, ...] = DEFAULT_CADENCE
    views: ViewsPolicy = "fixed-all"
    batch_size: int = 8
    seed: int = 0
    freeze: tuple[str, ...] = ()
    only: tuple[str, ...] = ()
    sgd_lr: float = 1e-3
    adam_total_steps: int = 30000
    lo_horizon: int = 100
    per_term_losses: bool = False
    snapshots: bool = True
    model_path: Optional[str] = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "cadence", tuple(int(c) for c in self.cadence))
        object.__setattr__(self, "freeze", tuple(self.freeze))
        object.__setattr__(self, "only", tuple(self.only))
        if self.optimizer not in OPTIMIZER_CHOICES:
            raise ConfigurationError(f"Unknown optimizer {self.optimizer!r}; expected one of {OPTIMIZER_CHOICES}.")
        if self.iterations < 0:
            raise ConfigurationError("iterations must be non-negative.")
        if any(c < 1 for c in self.cadence) or any(b <= a for a, b in zip(self.cadence, self.cadence[1:])):
            raise ConfigurationError("cadence must be strictly ascending positive iterations.")
        if self.views not in ("fixed-all", "fps-8"):
            raise ConfigurationError(f"Unknown views policy {self.views!r}.")
        if self.batch_size < 1 or self.sgd_lr <= 0 or self.adam_total_steps < 1 or self.lo_horizon < 1:
            raise ConfigurationError("batch_size, sgd_lr, adam_total_steps and lo_horizon must be positive.")
        if self.freeze and self.only:
            raise ConfigurationError("Use either freeze or only, not both.")
        group_mask(self.freeze + self.only)

    @property
    def evaluation_points(self) -> tuple[int, ...]:
        """Iteration 0, every cadence point inside the budget and the final iteration."""
        points = {0, self.iterations} | {c for c in self.cadence if c <= self.iterations}
        return tuple(sorted(points))

    def update_mask(self):
        """Columns the run is allowed to move."""
        if self.only:
            return group_mask(self.only)
        return ~group_mask(self.freeze)

    def as_dict(self) -> dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_mapping(cls, values: Mapping[str, Any]) -> "RunConfig":
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(values) - known)
        if unknown:
            raise ConfigurationError(f"Unknown run settings: {unknown}")
        return cls(**dict(values))


__all__ = ["DEFAULT_CADENCE", "LEARNED_OPTIMIZERS", "OPTIMIZER_CHOICES", "RunConfig"]
