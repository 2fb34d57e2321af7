"""Run configuration shared by both engines."""

from __future__ import annotations

from dataclasses import dataclass, field

from .density import UniformDensity, parse_density


@dataclass(frozen=True)
class SimConfig:
    """Everything one simulation depends on; immutable and picklable.

    seed is the 64-bit root seed; replicate_index selects the child stream
    (see rng.child_seed), so a batch of replicates shares one config except
    for this index.
    """

    n_samples: int
    rho: float = 0.0
    density: object = field(default_factory=UniformDensity)
    seed: int = 0
    replicate_index: int = 0

    def __post_init__(self):
        if self.n_samples < 2:
            raise ValueError("need at least 2 samples, got %r" % (self.n_samples,))
        if not self.rho >= 0.0:
            raise ValueError("recombination rate must be >= 0, got %r" % (self.rho,))
        if isinstance(self.density, str):
            object.__setattr__(self, "density", parse_density(self.density))
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be an unsigned 64-bit integer")
        if self.replicate_index < 0:
            raise ValueError("replicate_index must be nonnegative")

    def with_replicate(self, r):
        return SimConfig(self.n_samples, self.rho, self.density, self.seed, r)
