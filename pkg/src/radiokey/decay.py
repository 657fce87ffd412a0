"""Stochastic primitives shared by every stage of the simulator.

Covers the statistics of the encoding medium: Poisson-distributed counts of
excited nuclei per standard sample, exponential decay times, and half-life
arithmetic.  All durations are in days unless stated otherwise.

Counts are sampled by CDF inversion from an explicit probability table.
The table doubles as the extension point for non-Poissonian sources: build
a :class:`CountTable` from any probability vector and attach it to a
:class:`SourceParams`.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import AssumptionWarning

LN2 = math.log(2.0)

# Probability mass ignored in the tail of a truncated count table.  Draws
# falling in this region (probability < 1e-15) map to the largest
# tabulated count.
_TAIL_EPS = 1e-15


def half_life_to_mean_life(half_life: float) -> float:
    """Convert a half-life to the mean lifetime of the exponential law.

    The half-life equals ln(2) times the mean lifetime, so the mean
    lifetime is the half-life divided by ln(2).

    Args:
        half_life: positive duration, any time unit.

    Returns:
        The mean lifetime in the same unit.
    """
    if not half_life > 0:
        raise ValueError(f"half_life must be positive, got {half_life}")
    return half_life / LN2


def mean_life_to_half_life(mean_life: float) -> float:
    """Inverse of :func:`half_life_to_mean_life`."""
    if not mean_life > 0:
        raise ValueError(f"mean_life must be positive, got {mean_life}")
    return mean_life * LN2


@dataclass(frozen=True)
class DecayParams:
    """Exponential decay law of the encoding isotope.

    Attributes:
        mean_life: expectation of the decay-time distribution, in days.
    """

    mean_life: float

    def __post_init__(self):
        if not self.mean_life > 0:
            raise ValueError(f"mean_life must be positive, got {self.mean_life}")

    @property
    def half_life(self) -> float:
        """Half-life in days; equals ln(2) times the mean lifetime."""
        return self.mean_life * LN2

    @classmethod
    def from_half_life(cls, half_life: float) -> "DecayParams":
        return cls(mean_life=half_life_to_mean_life(half_life))


@dataclass(frozen=True, eq=False)
class CountTable:
    """Probability table over nucleus counts 0, 1, ..., kmax.

    Sampling inverts the cumulative table with a single uniform draw per
    sample, which is exact for the truncated support and fully
    deterministic given the stream.
    """

    probabilities: np.ndarray
    _cdf: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        probs = np.asarray(self.probabilities, dtype=float)
        if probs.ndim != 1 or probs.size == 0:
            raise ValueError("probabilities must be a non-empty 1-D vector")
        if np.any(probs < 0):
            raise ValueError("probabilities must be non-negative")
        total = probs.sum()
        if not math.isclose(total, 1.0, rel_tol=0, abs_tol=1e-9):
            raise ValueError(f"probabilities must sum to 1, got {total}")
        probs = probs / total
        cdf = np.cumsum(probs)
        cdf[-1] = 1.0
        object.__setattr__(self, "probabilities", probs)
        object.__setattr__(self, "_cdf", cdf)

    @classmethod
    def poisson(cls, mu: float) -> "CountTable":
        """Poisson(mu) truncated where the tail mass drops below 1e-15."""
        if mu < 0:
            raise ValueError(f"mu must be non-negative, got {mu}")
        if mu == 0:
            return cls(np.array([1.0]))
        pmf = [math.exp(-mu)]
        cumulative = pmf[0]
        k = 0
        while cumulative < 1.0 - _TAIL_EPS and k < 4 * (mu + 10):
            k += 1
            pmf.append(pmf[-1] * mu / k)
            cumulative += pmf[-1]
        probs = np.array(pmf)
        return cls(probs / probs.sum())

    def conditioned_on_nonzero(self) -> "CountTable":
        """The same table conditioned on a count of at least one."""
        probs = self.probabilities.copy()
        if probs.size < 2 or probs[1:].sum() <= 0:
            raise ValueError("distribution has no mass above zero")
        probs[0] = 0.0
        return CountTable(probs / probs.sum())

    def mean(self) -> float:
        return float(np.dot(np.arange(self.probabilities.size), self.probabilities))

    def sample(self, rng: np.random.Generator, size=None):
        """Draw counts by inversion; returns an int for ``size=None``."""
        if size is None:
            return int(np.searchsorted(self._cdf, rng.random(), side="right"))
        u = rng.random(size)
        return np.searchsorted(self._cdf, u, side="right").astype(np.int64)


@dataclass(frozen=True)
class SourceParams:
    """Dosimetry of the diluted radioactive substance.

    Attributes:
        mu: mean number of excited nuclei per standard sample.
        counts: optional explicit count distribution replacing the default
            Poisson(mu) table, for sources with calibrated non-Poissonian
            populations.
    """

    mu: float
    counts: CountTable | None = None

    def __post_init__(self):
        if self.mu < 0:
            raise ValueError(f"mu must be non-negative, got {self.mu}")
        if self.mu > 0.5:
            warnings.warn(
                f"mu = {self.mu} is large; the protocol statistics assume a mean "
                "occupancy well below one",
                AssumptionWarning,
                stacklevel=2,
            )

    def count_table(self) -> CountTable:
        if self.counts is not None:
            return self.counts
        return CountTable.poisson(self.mu)


def sample_excited_count(source: SourceParams, rng: np.random.Generator, size=None):
    """Draw excited-nucleus counts for one or many standard samples."""
    return source.count_table().sample(rng, size)


def sample_decay_time(decay: DecayParams, rng: np.random.Generator, size=None):
    """Draw decay times (days since production) from Exponential(mean_life)."""
    return rng.exponential(decay.mean_life, size)


def decay_probability(elapsed, decay: DecayParams):
    """Probability that a nucleus has decayed within ``elapsed`` days.

    Accepts a scalar or array of non-negative elapsed times and returns
    ``1 - exp(-elapsed / mean_life)`` with the same shape.
    """
    t = np.asarray(elapsed, dtype=float)
    if np.any(t < 0):
        raise ValueError("elapsed time must be non-negative")
    out = -np.expm1(-t / decay.mean_life)
    if np.isscalar(elapsed) or t.ndim == 0:
        return float(out)
    return out
