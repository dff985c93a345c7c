"""Tolerances and ladder parameters shared across the pipeline.

Precedence when running from the CLI: command-line flags override problem
file ``options``, which override these defaults.  The sampling seed comes
from the SIPCERT_SEED environment variable so reports stay reproducible.
"""

from __future__ import annotations

import dataclasses
import os
from dataclasses import dataclass

__all__ = ["Options", "resolve_seed", "OPTION_KEYS"]


@dataclass(frozen=True)
class Options:
    tol: float = 1e-8  # certificate residual / membership tolerance
    tol_lp: float = 1e-9  # LP feasibility tolerance
    tol_feas: float = 1e-9  # constraint feasibility tolerance
    tol_hull: float = 1e-7  # ladder stabilization threshold
    tol_kink: float = 1e-12  # abs/min/max tie tolerance for gradients
    eps0: float = 1e-2  # first rung of the near-active ladder
    shrink: float = 0.5  # geometric ladder shrink factor
    max_steps: int = 20
    refine_depth: int = 8  # bisection levels per axis around near-active cells
    k_max: int = 10  # truncation order for countable-family fixtures
    lipschitz_radius: float = 0.1
    lipschitz_samples: int = 32

    def replace(self, **kwargs) -> "Options":
        known = {k: v for k, v in kwargs.items() if v is not None}
        return dataclasses.replace(self, **known)


OPTION_KEYS = tuple(f.name for f in dataclasses.fields(Options))


def resolve_seed() -> int:
    try:
        return int(os.environ.get("SIPCERT_SEED", "0"))
    except ValueError:
        return 0
