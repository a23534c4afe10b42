"""Reproducible streams of random probe vectors."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

__all__ = ["ProbeKind", "ProbeStream", "next_probe"]

_MASK64 = 0xFFFFFFFFFFFFFFFF


class ProbeKind(enum.Enum):
    """Distribution of the probe vectors."""

    GAUSSIAN = "gaussian"
    RADEMACHER = "rademacher"
    UNIT_BASIS = "unit-basis"

    @property
    def has_fixed_norm(self) -> bool:
        """True when every probe of dimension n has squared norm exactly n."""
        return self is not ProbeKind.GAUSSIAN

    @classmethod
    def parse(cls, name: str) -> "ProbeKind":
        for kind in cls:
            if kind.value == name.lower():
                return kind
        raise ValueError(f"unknown probe kind {name!r}")


def _generator(master_seed: int, index: int) -> np.random.Generator:
    # Counter-based keying: probe `index` is a pure function of
    # (master_seed, index), so probes can be generated in any order or
    # concurrently without shared state.
    key = np.array([master_seed & _MASK64, index & _MASK64], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


@dataclass
class ProbeStream:
    """Deterministic, seeded sequence of probe vectors.

    Probe i depends only on (kind, dimension, master_seed, i); regenerating a
    stream reproduces identical vectors regardless of evaluation order.

    Gaussian entries come from numpy's ziggurat standard-normal sampler on top
    of a Philox counter keyed by (master_seed, i).  The stream therefore
    changes only if numpy changes its bit stream, which is guarded by a
    frozen-value regression test.

    Unit-basis probes cycle through sqrt(n)*e_1, ..., sqrt(n)*e_n.  The
    sqrt(n) scaling keeps E[X X^T] = I, so averaging quadratic forms over one
    full cycle of n probes reproduces the trace exactly.
    """

    kind: ProbeKind
    dimension: int
    master_seed: int
    index: int = 0

    def __post_init__(self) -> None:
        if not isinstance(self.kind, ProbeKind):
            self.kind = ProbeKind.parse(str(self.kind))
        if self.dimension < 1:
            raise ValueError(f"dimension must be >= 1, got {self.dimension}")

    def probe(self, index: int) -> np.ndarray:
        """Return probe `index` without advancing the stream."""
        n = self.dimension
        if self.kind is ProbeKind.UNIT_BASIS:
            x = np.zeros(n)
            x[index % n] = math.sqrt(n)
            return x
        rng = _generator(self.master_seed, index)
        if self.kind is ProbeKind.GAUSSIAN:
            return rng.standard_normal(n)
        # Rademacher: i.i.d. uniform on {-1, +1}.
        return 2.0 * rng.integers(0, 2, size=n).astype(np.float64) - 1.0

    def next_probe(self) -> np.ndarray:
        x = self.probe(self.index)
        self.index += 1
        return x


def next_probe(stream: ProbeStream) -> np.ndarray:
    """Draw the next probe from the stream and advance its position."""
    return stream.next_probe()
