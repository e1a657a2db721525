"""Deterministic randomness, audit traces, and timing.

Every randomized algorithm in the toolkit draws from a named stream of an
RngHub seeded on the command line.  Nothing reads OS entropy, so a fixed
seed reproduces results bit for bit, and adding a new diagnostic stream
never perturbs the draws seen by an existing one.
"""

from __future__ import annotations

import hashlib
import time
from dataclasses import dataclass, field

import numpy as np

_MASK64 = (1 << 64) - 1


class RngHub:
    """Source of independent, named random streams for one run.

    The same (seed, name) pair yields the same sequence on every platform;
    streams with different names are independent by construction.
    """

    def __init__(self, seed: int):
        self.seed = int(seed) & _MASK64

    def _derive(self, name: str) -> int:
        digest = hashlib.sha256(f"{self.seed}:{name}".encode()).digest()
        return int.from_bytes(digest[:16], "little")

    def stream(self, name: str) -> np.random.Generator:
        """A fresh generator for the given stream name."""
        return np.random.Generator(np.random.PCG64(self._derive(name)))

    def spawn(self, name: str) -> "RngHub":
        """A child hub, independent of this hub's other streams."""
        return RngHub(self._derive("hub:" + name) & _MASK64)


def seeded_rng(seed: int) -> RngHub:
    """Deterministic generator hub, splittable into named streams."""
    return RngHub(seed)


@dataclass
class AuditTrace:
    """Ordered (step, label, value) events recorded by an algorithm.

    Step indices are assigned on record and strictly increase, so traces
    double as evidence for monotonicity checks on objectives.
    """

    events: list[tuple[int, str, float]] = field(default_factory=list)

    def record(self, label: str, value: float) -> None:
        self.events.append((len(self.events), label, float(value)))

    def values(self, label: str) -> list[float]:
        return [v for _, lab, v in self.events if lab == label]

    def labels(self) -> list[str]:
        return [lab for _, lab, _ in self.events]

    def to_csv(self) -> str:
        lines = ["step,label,value"]
        lines += [f"{i},{lab},{v!r}" for i, lab, v in self.events]
        return "\n".join(lines) + "\n"


class Timer:
    """Context manager measuring wall time in milliseconds."""

    def __enter__(self) -> "Timer":
        self._t0 = time.perf_counter()
        self.ms = 0.0
        return self

    def __exit__(self, *exc) -> None:
        self.ms = (time.perf_counter() - self._t0) * 1000.0
