"""Renewal inter-arrival models and the discounted arrival-rate estimator."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

import numpy as np

# All sampling uses numpy's PCG64 generator; the identifier is recorded in
# run outputs so results are reproducible bit-for-bit.
RNG_ALGORITHM = "pcg64"


def make_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(seed))


@dataclass(frozen=True)
class Exponential:
    """Exponential inter-arrival times (Poisson arrivals) with rate [veh/s]."""

    rate: float

    def __post_init__(self):
        if not self.rate > 0.0:
            raise ValueError(f"rate must be positive, got {self.rate!r}")

    def density(self, x: float) -> float:
        if x < 0.0:
            raise ValueError("inter-arrival times are non-negative")
        return self.rate * np.exp(-self.rate * x)

    def tail_mass(self, x: float) -> float:
        if x < 0.0:
            raise ValueError("inter-arrival times are non-negative")
        return float(np.exp(-self.rate * x))

    def sample(self, rng: np.random.Generator) -> float:
        return float(rng.exponential(1.0 / self.rate))

    def mean(self) -> float:
        return 1.0 / self.rate


@dataclass(frozen=True)
class DiscreteRandom:
    """Discrete headway mixture: point masses p_i at headways h_i."""

    atoms: tuple[tuple[float, float], ...]

    def __post_init__(self):
        atoms = tuple((float(h), float(prob)) for h, prob in self.atoms)
        object.__setattr__(self, "atoms", atoms)
        if not atoms:
            raise ValueError("at least one atom required")
        if any(h <= 0.0 for h, _ in atoms):
            raise ValueError("headways must be positive")
        if any(prob <= 0.0 for _, prob in atoms):
            raise ValueError("probabilities must be positive")
        total = sum(prob for _, prob in atoms)
        if abs(total - 1.0) > 1e-12:
            raise ValueError(f"probabilities must sum to 1, got {total!r}")

    def density(self, x: float) -> float:
        """Point mass at x (not a density in the continuous sense)."""
        if x < 0.0:
            raise ValueError("inter-arrival times are non-negative")
        return sum(prob for h, prob in self.atoms if h == x)

    def tail_mass(self, x: float) -> float:
        if x < 0.0:
            raise ValueError("inter-arrival times are non-negative")
        return sum(prob for h, prob in self.atoms if h > x)

    def sample(self, rng: np.random.Generator) -> float:
        u = rng.random()
        acc = 0.0
        for h, prob in self.atoms:
            acc += prob
            if u < acc:
                return h
        return self.atoms[-1][0]

    def mean(self) -> float:
        return sum(h * prob for h, prob in self.atoms)


@dataclass(frozen=True)
class Constant:
    """Deterministic headway."""

    headway: float

    def __post_init__(self):
        if not self.headway > 0.0:
            raise ValueError(f"headway must be positive, got {self.headway!r}")

    def density(self, x: float) -> float:
        if x < 0.0:
            raise ValueError("inter-arrival times are non-negative")
        return 1.0 if x == self.headway else 0.0

    def tail_mass(self, x: float) -> float:
        if x < 0.0:
            raise ValueError("inter-arrival times are non-negative")
        return 1.0 if x < self.headway else 0.0

    def sample(self, rng: np.random.Generator) -> float:
        return self.headway

    def mean(self) -> float:
        return self.headway


ArrivalModel = Exponential | DiscreteRandom | Constant


def atoms_of(model: ArrivalModel) -> tuple[tuple[float, float], ...] | None:
    """Point masses of a discrete-type model, or None for continuous ones."""
    if isinstance(model, DiscreteRandom):
        return model.atoms
    if isinstance(model, Constant):
        return ((model.headway, 1.0),)
    return None


def model_from_json(obj: dict) -> ArrivalModel:
    """Parse {"type": "exponential", "lambda": ...} style dicts."""
    kind = obj.get("type")
    if kind == "exponential":
        return Exponential(rate=float(obj["lambda"]))
    if kind == "discrete":
        return DiscreteRandom(atoms=tuple((h, prob) for h, prob in obj["atoms"]))
    if kind == "constant":
        return Constant(headway=float(obj["headway"]))
    raise ValueError(f"unknown arrival model type: {kind!r}")


def model_to_json(model: ArrivalModel) -> dict:
    if isinstance(model, Exponential):
        return {"type": "exponential", "lambda": model.rate}
    if isinstance(model, DiscreteRandom):
        return {"type": "discrete", "atoms": [[h, prob] for h, prob in model.atoms]}
    return {"type": "constant", "headway": model.headway}


@dataclass
class RateEstimator:
    """Discounted rolling estimate of the arrival rate from recent headways.

    The estimate is the reciprocal of the discounted sum of the last
    ``m_steps`` inter-arrival times with discount ``beta``. Fewer than
    ``m_steps`` observations use only the terms available (warm-up).
    """

    beta: float = 0.9
    m_steps: int = 50
    _window: deque = field(default_factory=deque, repr=False)

    def __post_init__(self):
        if not 0.0 < self.beta < 1.0:
            raise ValueError(f"beta must lie in (0, 1), got {self.beta!r}")
        if self.m_steps < 1:
            raise ValueError(f"m_steps must be >= 1, got {self.m_steps!r}")
        self._window = deque(self._window, maxlen=self.m_steps)

    def observe(self, headway: float) -> None:
        if not headway > 0.0:
            raise ValueError(f"headway must be positive, got {headway!r}")
        self._window.appendleft(headway)

    @property
    def count(self) -> int:
        return len(self._window)

    def estimate(self) -> float:
        """Estimated arrival rate [veh/s]."""
        if not self._window:
            raise ValueError("no headways observed yet")
        acc = 0.0
        weight = 1.0
        for headway in self._window:
            acc += weight * headway
            weight *= self.beta
        return 1.0 / ((1.0 - self.beta) * acc)
