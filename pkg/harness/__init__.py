"""Per-scene optimization runs, comparisons and the CLI command implementations."""
from harness.run_config import OPTIMIZER_CHOICES, RunConfig

__all__ = ["OPTIMIZER_CHOICES", "RunConfig"]
