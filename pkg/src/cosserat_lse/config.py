from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

from .errors import ConfigurationError
from .liegroup import DEFAULT_DEXP_ORDER

RAMP_KINDS = ("single", "linear", "sine")
TANGENT_KINDS = ("gauss-newton", "newton")


@dataclass(frozen=True)
class Ramp:
    """Load or motion schedule over ``steps`` increments.

    ``factor(k)`` for ``k = 1..steps`` is ``k/steps`` (linear) or
    ``sin(k pi / (2 steps))`` (sine); past the last step the factor stays 1.
    """

    kind: str = "single"
    steps: int = 1

    def __post_init__(self):
        if self.kind not in RAMP_KINDS:
            raise ConfigurationError(f"unknown ramp kind {self.kind!r}")
        if int(self.steps) != self.steps or self.steps < 1:
            raise ConfigurationError(f"ramp step count must be >= 1, got {self.steps}")
        if self.kind == "single" and self.steps != 1:
            object.__setattr__(self, "steps", 1)

    @classmethod
    def parse(cls, text):
        if isinstance(text, Ramp):
            return text
        kind, _, n = str(text).partition(":")
        return cls(kind, int(n) if n else 1)

    def __str__(self):
        return self.kind if self.kind == "single" else f"{self.kind}:{self.steps}"

    def factor(self, k):
        if k <= 0:
            return 0.0
        t = min(k, self.steps) / self.steps
        if self.kind == "sine":
            return 1.0 if k >= self.steps else math.sin(0.5 * math.pi * t)
        return t if self.kind == "linear" else 1.0


@dataclass
class SolverConfig:
    residual_tol: float = 1e-9
    max_iters: int = 100
    line_search: str = "none"
    ls_factor: float = 0.5
    max_halvings: int = 25
    sufficient_decrease: float = 1e-4
    regularization: float = 0.0
    load_stiffness: bool = True  # dead-load tangent term
    max_rotation_step: float = 1.0  # rad per node and iteration; inf disables
    # also stop once |r . dq| <= decrement_tol * internal energy; 0 disables.
    # Needed where the absolute residual has a roundoff floor above residual_tol.
    decrement_tol: float = 0.0
    # "gauss-newton" or "newton" (adds the stress-dependent element stiffness)
    tangent: str = "gauss-newton"
    dexp_order: int = DEFAULT_DEXP_ORDER
    ramp: Ramp | None = None
    steps: int = 1

    def __post_init__(self):
        if not self.residual_tol > 0:
            raise ConfigurationError("residual_tol must be positive")
        if self.max_iters < 1:
            raise ConfigurationError("max_iters must be >= 1")
        if self.line_search not in ("none", "backtracking"):
            raise ConfigurationError(f"unknown line search {self.line_search!r}")
        if not self.max_rotation_step > 0:
            raise ConfigurationError("max_rotation_step must be positive")
        if self.tangent not in TANGENT_KINDS:
            raise ConfigurationError(f"unknown tangent {self.tangent!r}")
        if not self.decrement_tol >= 0:
            raise ConfigurationError("decrement_tol must be non-negative")
        if self.dexp_order < 1:
            raise ConfigurationError("dexp_order must be >= 1")
        if self.steps < 1:
            raise ConfigurationError("steps must be >= 1")
        if self.ramp is not None:
            self.ramp = Ramp.parse(self.ramp)

    def to_dict(self):
        d = asdict(self)
        d["ramp"] = None if self.ramp is None else str(self.ramp)
        return d
