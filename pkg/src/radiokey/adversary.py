"""Eavesdropping strategies, Bob's tampering test, and the security bounds.

Two attacks are modelled.  The translucent attack is passive: Eve watches
the plate during its exposure window and, whenever a multi-nucleus sample
shows exactly one decay, she learns the bit while leaving the sample able
to reveal itself to Bob later.  The opaque (intercept-resend) attack is
active: Eve reads decayed samples just before delivery and swaps them for
"bright" samples guaranteed to decay during Bob's watch, constrained by
the arrival-count statistics Bob can check.

The analytic bounds quantify each strategy per delivered non-empty sample;
they are first-order in the mean occupancy ``mu`` and go to zero as the
exposure-to-lifetime ratio does.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .decay import CountTable, SourceParams, sample_decay_time
from .errors import ProtocolError, TruncationWarning
from .protocol import DetectorModel, Plate, TimelineParams

#: One-sided z-value at 99% confidence, used by Eve's automatic budget.
AUTO_CONFIDENCE_Z = 2.3263478740408408

MECH_TRANSLUCENT = "translucent"
MECH_OPAQUE = "opaque"


class Strategy(Enum):
    NONE = "none"
    TRANSLUCENT = "translucent"
    OPAQUE = "opaque"
    BOTH = "both"


@dataclass(frozen=True)
class AttackConfig:
    """Which strategy Eve runs and what she is allowed to see.

    Attributes:
        strategy: attack selection.
        window: time interval (days since production) Eve can observe;
            ``None`` means the full exposure window.
        replacement_budget: number of decayed samples the opaque attack
            replaces, or ``"auto"`` for the largest budget that evades the
            tampering test with high confidence.
        efficiency_eve: Eve's per-decay detection probability.
    """

    strategy: Strategy = Strategy.NONE
    window: tuple[float, float] | None = None
    replacement_budget: int | str = "auto"
    efficiency_eve: float = 1.0

    def __post_init__(self):
        if isinstance(self.replacement_budget, str):
            if self.replacement_budget != "auto":
                raise ValueError("replacement_budget must be an integer or 'auto'")
        elif self.replacement_budget < 0:
            raise ValueError("replacement_budget must be non-negative")
        if not 0.0 <= self.efficiency_eve <= 1.0:
            raise ValueError("efficiency_eve must lie in [0, 1]")

    def resolve_window(self, timeline: TimelineParams) -> tuple[float, float]:
        if self.window is None:
            return (0.0, timeline.exposure_time)
        lo, hi = self.window
        if not 0.0 <= lo <= hi <= timeline.exposure_time:
            raise ValueError(
                f"observation window {self.window} must lie within "
                f"[0, {timeline.exposure_time}]"
            )
        return (lo, hi)


@dataclass(frozen=True)
class BrightSourceSpec:
    """Sample source conditioned on holding at least one excited nucleus.

    Mimics Alice's count distribution given non-emptiness, so replacements
    do not disturb the relative singlet/pair/triplet populations.
    """

    counts: CountTable

    def __post_init__(self):
        if self.counts.probabilities[0] != 0.0:
            raise ValueError("a bright source must have zero mass at count 0")

    @classmethod
    def from_source(cls, source: SourceParams) -> "BrightSourceSpec":
        return cls(source.count_table().conditioned_on_nonzero())


@dataclass
class EveRecord:
    """Eve's per-pair knowledge: at most one (index, guessed bit) entry per pair."""

    pair_indices: np.ndarray
    guessed_bits: np.ndarray
    mechanisms: np.ndarray
    replaced_count: int = 0

    def __post_init__(self):
        self.pair_indices = np.asarray(self.pair_indices, dtype=np.int64)
        self.guessed_bits = np.asarray(self.guessed_bits, dtype=np.uint8)
        self.mechanisms = np.asarray(self.mechanisms)
        if not (
            self.pair_indices.size == self.guessed_bits.size == self.mechanisms.size
        ):
            raise ProtocolError("record columns must have identical length")
        if np.unique(self.pair_indices).size != self.pair_indices.size:
            raise ProtocolError("at most one knowledge entry per pair")

    def __len__(self) -> int:
        return self.pair_indices.size

    @classmethod
    def empty(cls) -> "EveRecord":
        return cls(
            np.empty(0, dtype=np.int64),
            np.empty(0, dtype=np.uint8),
            np.empty(0, dtype="<U11"),
        )

    @classmethod
    def combine(cls, primary: "EveRecord", secondary: "EveRecord") -> "EveRecord":
        """Merge two records; on duplicate pairs the primary entry wins."""
        keep = ~np.isin(secondary.pair_indices, primary.pair_indices)
        return cls(
            np.concatenate([primary.pair_indices, secondary.pair_indices[keep]]),
            np.concatenate([primary.guessed_bits, secondary.guessed_bits[keep]]),
            np.concatenate([primary.mechanisms, secondary.mechanisms[keep]]),
            replaced_count=primary.replaced_count + secondary.replaced_count,
        )


@dataclass
class Estimate:
    """A Monte Carlo estimate with its standard error."""

    value: float
    std_error: float

    def to_dict(self) -> dict:
        return {"value": self.value, "std_error": self.std_error}


@dataclass
class BoundsReport:
    """Analytic eavesdropping bounds, optionally paired with Monte Carlo estimates."""

    scenario: str
    translucent: float
    intercept_resend: float
    intercept_resend_approx: float
    prearrival: float
    combined: float
    mc_translucent: Estimate | None = None
    mc_prearrival: Estimate | None = None
    mc_eve_fraction: Estimate | None = None

    def to_dict(self) -> dict:
        out = {
            "scenario": self.scenario,
            "translucent": self.translucent,
            "intercept_resend": self.intercept_resend,
            "intercept_resend_approx": self.intercept_resend_approx,
            "prearrival": self.prearrival,
            "combined": self.combined,
        }
        for name in ("mc_translucent", "mc_prearrival", "mc_eve_fraction"):
            estimate = getattr(self, name)
            out[name] = None if estimate is None else estimate.to_dict()
        return out


def _clamp01(value: float) -> float:
    return min(1.0, max(0.0, value))


def translucent_probability(mu: float, timeline: TimelineParams) -> float:
    """Success probability of the passive attack, per non-empty sample.

    First order in ``mu``: the chance a delivered sample is a nucleus pair
    (mu/2 of non-empty samples), times the chance exactly one of the two
    decays during exposure, times the chance the survivor reveals itself to
    Bob during the revelation window.
    """
    if mu < 0:
        raise ValueError("mu must be non-negative")
    x = timeline.exposure_ratio
    y = timeline.reveal_ratio
    return _clamp01(mu * (-math.expm1(-x)) * math.exp(-x) * (-math.expm1(-y)))


def prearrival_fraction(
    timeline: TimelineParams, masking_correction: bool = False
) -> float:
    """Fraction of nuclei decayed before the plate reaches Bob.

    This is also the bound on the bit fraction Eve can have read (and
    replaced) in scenario "b".  With ``masking_correction`` the bound
    becomes P/(1-P), accounting for Eve blanking an equal fraction of
    Bob's bits to hide her substitutions; by default that second-order
    effect is neglected.
    """
    p = -math.expm1(-timeline.exposure_ratio)
    if masking_correction:
        if p >= 1.0:
            return 1.0
        return _clamp01(p / (1.0 - p))
    return p


def intercept_resend_bound(
    mu: float,
    prearrival_p: float,
    efficiency_bob: float,
    pair_count: int,
    sigmas: float = 5.0,
    approximate: bool = False,
) -> float:
    """Bound on Eve's per-bit knowledge from the opaque attack, scenario "a".

    Eve can hide at most ``sigmas`` standard deviations of the
    arrival-count statistics, which caps her haul relative to the bits Bob
    gains; the bound is clamped to 1 (no security) when it diverges.

    Args:
        approximate: return the small-``mu`` form with
            ``1 - exp(-efficiency_bob * mu)`` linearised.
    """
    if pair_count < 1:
        raise ValueError("pair_count must be at least 1")
    if mu < 0 or not 0.0 <= efficiency_bob <= 1.0:
        raise ValueError("mu must be non-negative and efficiency_bob in [0, 1]")
    if not 0.0 <= prearrival_p <= 1.0:
        raise ValueError("prearrival_p must lie in [0, 1]")
    if prearrival_p == 0.0:
        return 0.0
    if prearrival_p == 1.0 or efficiency_bob == 0.0 or mu == 0.0:
        return 1.0
    if approximate:
        ratio = prearrival_p / (
            (1.0 - prearrival_p) * efficiency_bob**2 * mu
        )
    else:
        revealed = -math.expm1(-efficiency_bob * mu)
        ratio = mu * prearrival_p / ((1.0 - prearrival_p) * revealed**2)
    return _clamp01(sigmas * math.sqrt(ratio) / math.sqrt(pair_count))


def combined_bound(bounds: BoundsReport) -> float:
    """Total per-bit knowledge bound: translucent plus the scenario's opaque term."""
    opaque = bounds.intercept_resend if bounds.scenario == "a" else bounds.prearrival
    return _clamp01(bounds.translucent + opaque)


def security_bounds(
    mu: float,
    timeline: TimelineParams,
    detector: DetectorModel,
    pair_count: int,
    scenario: str = "a",
    sigmas: float = 5.0,
) -> BoundsReport:
    """Evaluate all analytic bounds for one parameter point."""
    if scenario not in ("a", "b"):
        raise ValueError(f"scenario must be 'a' or 'b', got {scenario!r}")
    p = prearrival_fraction(timeline)
    report = BoundsReport(
        scenario=scenario,
        translucent=translucent_probability(mu, timeline),
        intercept_resend=intercept_resend_bound(
            mu, p, detector.efficiency_bob, pair_count, sigmas
        ),
        intercept_resend_approx=intercept_resend_bound(
            mu, p, detector.efficiency_bob, pair_count, sigmas, approximate=True
        ),
        prearrival=p,
        combined=0.0,
    )
    report.combined = combined_bound(report)
    return report


def _detected_window_counts(
    plate: Plate,
    window: tuple[float, float],
    efficiency_eve: float,
    rng: np.random.Generator,
) -> np.ndarray:
    """Per-pair number of decays Eve detects inside her observation window."""
    t = plate.decay_times
    u = rng.random(plate.total_nuclei)
    seen = (t > window[0]) & (t <= window[1]) & (u < efficiency_eve)
    return np.bincount(plate.nucleus_pair_index()[seen], minlength=plate.pair_count)


def eve_translucent(
    plate: Plate,
    timeline: TimelineParams,
    config: AttackConfig,
    rng: np.random.Generator,
) -> EveRecord:
    """Passive attack: remember pairs whose sample glowed exactly once.

    A multi-nucleus sample with a single detected decay inside Eve's window
    betrays its side (hence its bit) while still carrying undecayed nuclei
    to Bob.  The plate is never modified.
    """
    window = config.resolve_window(timeline)
    det_counts = _detected_window_counts(plate, window, config.efficiency_eve, rng)
    candidates = np.flatnonzero((plate.counts >= 2) & (det_counts == 1))
    return EveRecord(
        pair_indices=candidates,
        guessed_bits=plate.hidden_bits[candidates],
        mechanisms=np.full(candidates.size, MECH_TRANSLUCENT),
        replaced_count=0,
    )


def auto_replacement_budget(
    pair_count: int,
    mu: float,
    prearrival_p: float,
    efficiency_bob: float = 1.0,
    sigmas: float = 5.0,
    confidence_z: float = AUTO_CONFIDENCE_Z,
) -> int:
    """Largest replacement budget expected to evade the tampering test.

    Bob's test tolerates a deficit of ``sigmas`` model standard deviations
    below the expected detected arrival count.  Eve spends that allowance,
    minus a ``confidence_z`` Poisson-fluctuation margin so the honest
    spread itself does not push her over the threshold, and scales by
    Bob's detection efficiency since only detected decays count.
    """
    lam = pair_count * mu * prearrival_p * efficiency_bob
    if lam <= 0 or efficiency_bob <= 0:
        return 0
    sigma_test = math.sqrt(lam * (1.0 - prearrival_p))
    sigma_poisson = math.sqrt(lam)
    budget = (sigmas * sigma_test - confidence_z * sigma_poisson) / efficiency_bob
    return max(0, math.floor(budget))


def eve_opaque(
    plate: Plate,
    timeline: TimelineParams,
    config: AttackConfig,
    bright: BrightSourceSpec,
    rng: np.random.Generator,
    detector: DetectorModel | None = None,
    source: SourceParams | None = None,
    sigmas: float = 5.0,
) -> tuple[Plate, EveRecord]:
    """Intercept-resend attack: swap decayed samples for bright ones.

    Eve selects pairs with a detected decay in her window (fewest observed
    decays first, to minimise her statistical footprint), notes their bits,
    and installs fresh bright samples whose decay clocks start at the end
    of her window.  Returns the modified plate and her record; the input
    plate is left untouched.

    ``detector`` and ``source`` are required when the budget is ``"auto"``.
    """
    window = config.resolve_window(timeline)
    det_counts = _detected_window_counts(plate, window, config.efficiency_eve, rng)
    candidates = np.flatnonzero(det_counts > 0)
    order = np.lexsort((candidates, det_counts[candidates]))
    candidates = candidates[order]

    budget = config.replacement_budget
    if budget == "auto":
        if detector is None or source is None:
            raise ProtocolError(
                "auto replacement budget needs the detector model and source params"
            )
        budget = auto_replacement_budget(
            plate.pair_count,
            source.mu,
            prearrival_fraction(timeline),
            detector.efficiency_bob,
            sigmas,
        )
    if budget > candidates.size:
        warnings.warn(
            f"replacement budget {budget} exceeds the {candidates.size} pairs with "
            "an observed decay; truncating",
            TruncationWarning,
            stacklevel=2,
        )
        budget = candidates.size

    selected = candidates[:budget]
    new_counts = bright.counts.sample(rng, size=budget)
    new_times = window[1] + sample_decay_time(
        timeline.decay, rng, size=int(new_counts.sum())
    )
    modified = plate.replace_samples(selected, new_counts, new_times)
    record = EveRecord(
        pair_indices=selected.copy(),
        guessed_bits=plate.hidden_bits[selected],
        mechanisms=np.full(selected.size, MECH_OPAQUE),
        replaced_count=int(budget),
    )
    return modified, record


@dataclass
class DetectionResult:
    """Outcome of Bob's arrival-count tampering test."""

    passed: bool
    z_score: float
    expected: float
    threshold: float
    sigmas: float

    def to_dict(self) -> dict:
        return {
            "passed": self.passed,
            "z_score": self.z_score,
            "expected": self.expected,
            "threshold": self.threshold,
            "sigmas": self.sigmas,
        }


def bob_detection_test(
    arrival_count: int,
    pair_count: int,
    mu: float,
    prearrival_p: float,
    efficiency_bob: float = 1.0,
    sigmas: float = 5.0,
) -> DetectionResult:
    """Compare the detected arrival count against its honest expectation.

    The expectation is ``pair_count * mu * prearrival_p`` thinned by Bob's
    efficiency; the variance uses the binomial form with the same thinning
    (an approximation: the true source-count mixture is slightly wider).
    The test is one-sided: only a deficit betrays substitution.
    """
    mean = pair_count * mu * prearrival_p * efficiency_bob
    variance = mean * (1.0 - prearrival_p)
    sigma = math.sqrt(variance)
    if sigma > 0:
        z = (arrival_count - mean) / sigma
    else:
        z = 0.0 if arrival_count == mean else math.inf * np.sign(arrival_count - mean)
    threshold = mean - sigmas * sigma
    return DetectionResult(
        passed=bool(arrival_count >= threshold),
        z_score=float(z),
        expected=float(mean),
        threshold=float(threshold),
        sigmas=float(sigmas),
    )
