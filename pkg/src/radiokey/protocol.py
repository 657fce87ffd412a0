"""Honest protocol run over a radioactive plate.

Alice encodes a random bit string by spotting a radioactive sample on one
cell of each cell pair (left cell = bit 1, right cell = bit 0) and a
chemically identical placebo on the other.  The plate travels to Bob, who
optionally photographs decays accumulated en route (scenario "a"), then
watches the plate for a revelation window and announces, by pair index
only, where decays appeared.  Those indices form the shared raw key.

Decay clocks start at nucleus production (t = 0), so decays during the
production and transport phases are possible and are exactly the ones an
eavesdropper can exploit.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from enum import IntEnum

import numpy as np

from .decay import CountTable, DecayParams, SourceParams, sample_decay_time, sample_excited_count
from .errors import AssumptionWarning, ProtocolError

LEFT_BIT = 1
RIGHT_BIT = 0

SCHEMA_VERSION = 1


class DecayPhase(IntEnum):
    """Which protocol phase a nucleus decays in (NEVER: after the run ends)."""

    PRE_ARRIVAL = 0
    REVEALED = 1
    NEVER = 2


class ObservationStatus(IntEnum):
    """Bob's per-pair reading during the revelation window."""

    NONE = 0
    BIT = 1
    CONFLICT = 2


@dataclass(frozen=True)
class TimelineParams:
    """The four durations governing every probability in the scheme.

    Attributes:
        production_time: days between nucleus production and hand-off to
            the courier (encoding included).
        transport_time: days in transit to Bob.
        reveal_time: days Bob watches the plate.
        decay: decay law of the encoding isotope.
    """

    production_time: float
    transport_time: float
    reveal_time: float
    decay: DecayParams

    def __post_init__(self):
        for name in ("production_time", "transport_time", "reveal_time"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")
        mean_life = self.decay.mean_life
        if mean_life > self.reveal_time:
            warnings.warn(
                "revelation window is shorter than the mean decay time; "
                "few bits will be revealed to Bob",
                AssumptionWarning,
                stacklevel=2,
            )
        if self.production_time >= mean_life:
            warnings.warn(
                "production-to-encoding time is not smaller than the mean decay "
                "time; many bits decay before dispatch",
                AssumptionWarning,
                stacklevel=2,
            )
        if self.transport_time >= mean_life:
            warnings.warn(
                "transport time is not smaller than the mean decay time; many "
                "bits decay underway",
                AssumptionWarning,
                stacklevel=2,
            )

    @property
    def exposure_time(self) -> float:
        """Days from production until the plate reaches Bob."""
        return self.production_time + self.transport_time

    @property
    def total_time(self) -> float:
        return self.exposure_time + self.reveal_time

    @property
    def exposure_ratio(self) -> float:
        """Exposure time in units of the mean lifetime."""
        return self.exposure_time / self.decay.mean_life

    @property
    def reveal_ratio(self) -> float:
        """Revelation time in units of the mean lifetime."""
        return self.reveal_time / self.decay.mean_life


@dataclass(frozen=True)
class PlateSpec:
    """Layout and environment of the plate Alice prepares.

    Attributes:
        pair_count: number of cell pairs (one hidden bit each).
        source: dosimetry of the radioactive substance.
        background_rate: spurious detectable events per cell per day
            (cosmic-ray strikes and the like).
    """

    pair_count: int
    source: SourceParams
    background_rate: float = 0.0

    def __post_init__(self):
        if self.pair_count < 1:
            raise ValueError(f"pair_count must be at least 1, got {self.pair_count}")
        if self.pair_count < 1000:
            warnings.warn(
                f"pair_count = {self.pair_count} is below the large-sample regime "
                "(at least ~1000 pairs) that the statistical tests assume",
                AssumptionWarning,
                stacklevel=2,
            )
        if self.background_rate < 0:
            raise ValueError("background_rate must be non-negative")


@dataclass(frozen=True)
class DetectorModel:
    """Per-decay detection probabilities for the two observers."""

    efficiency_bob: float = 1.0
    efficiency_eve: float = 1.0

    def __post_init__(self):
        for name in ("efficiency_bob", "efficiency_eve"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {value}")


def side_of_bit(bit: int) -> str:
    """Cell carrying the radioactive sample: left encodes 1, right encodes 0."""
    return "left" if bit == LEFT_BIT else "right"


@dataclass(frozen=True)
class CellPair:
    """Read-only view of one cell pair of a plate."""

    index: int
    hidden_bit: int
    radioactive_side: str
    decay_times: np.ndarray


@dataclass
class Plate:
    """Alice's encoded artifact, stored column-wise for fast simulation.

    ``decay_times`` concatenates the decay times (days since production) of
    the excited nuclei of every pair; ``offsets[i]:offsets[i+1]`` slices out
    pair ``i``.  The placebo cell of each pair holds no excited nuclei and
    is therefore not stored.
    """

    hidden_bits: np.ndarray
    counts: np.ndarray
    decay_times: np.ndarray
    offsets: np.ndarray
    background_rate: float = 0.0

    def __post_init__(self):
        self.hidden_bits = np.asarray(self.hidden_bits, dtype=np.uint8)
        self.counts = np.asarray(self.counts, dtype=np.int64)
        self.decay_times = np.asarray(self.decay_times, dtype=float)
        self.offsets = np.asarray(self.offsets, dtype=np.int64)
        m = self.hidden_bits.size
        if self.counts.shape != (m,) or self.offsets.shape != (m + 1,):
            raise ProtocolError("counts/offsets do not match the number of pairs")
        if not np.array_equal(np.diff(self.offsets), self.counts):
            raise ProtocolError("offsets are inconsistent with counts")
        if self.offsets[0] != 0 or self.offsets[-1] != self.decay_times.size:
            raise ProtocolError("offsets do not span the decay-time array")
        if np.any(self.hidden_bits > 1):
            raise ProtocolError("hidden bits must be 0 or 1")

    @property
    def pair_count(self) -> int:
        return self.hidden_bits.size

    @property
    def total_nuclei(self) -> int:
        return self.decay_times.size

    def nucleus_pair_index(self) -> np.ndarray:
        """Pair index of each entry of ``decay_times``."""
        return np.repeat(np.arange(self.pair_count, dtype=np.int64), self.counts)

    def pair(self, index: int) -> CellPair:
        bit = int(self.hidden_bits[index])
        lo, hi = self.offsets[index], self.offsets[index + 1]
        return CellPair(
            index=index,
            hidden_bit=bit,
            radioactive_side=side_of_bit(bit),
            decay_times=self.decay_times[lo:hi],
        )

    def __len__(self) -> int:
        return self.pair_count

    def __iter__(self):
        return (self.pair(i) for i in range(self.pair_count))

    def copy(self) -> "Plate":
        return Plate(
            self.hidden_bits.copy(),
            self.counts.copy(),
            self.decay_times.copy(),
            self.offsets.copy(),
            self.background_rate,
        )

    def replace_samples(
        self, pair_indices: np.ndarray, new_counts: np.ndarray, new_times: np.ndarray
    ) -> "Plate":
        """Return a plate with the listed pairs' samples swapped out.

        ``new_times`` concatenates the decay times of the replacement
        samples in the order of ``pair_indices``.
        """
        pair_indices = np.asarray(pair_indices, dtype=np.int64)
        new_counts = np.asarray(new_counts, dtype=np.int64)
        if new_times.size != new_counts.sum():
            raise ProtocolError("replacement times do not match replacement counts")
        replaced = np.zeros(self.pair_count, dtype=bool)
        replaced[pair_indices] = True
        keep = ~replaced[self.nucleus_pair_index()]
        all_idx = np.concatenate(
            [self.nucleus_pair_index()[keep], np.repeat(pair_indices, new_counts)]
        )
        all_times = np.concatenate([self.decay_times[keep], new_times])
        order = np.argsort(all_idx, kind="stable")
        counts = np.bincount(all_idx, minlength=self.pair_count).astype(np.int64)
        offsets = np.zeros(self.pair_count + 1, dtype=np.int64)
        np.cumsum(counts, out=offsets[1:])
        return Plate(
            self.hidden_bits.copy(),
            counts,
            all_times[order],
            offsets,
            self.background_rate,
        )

    def to_dict(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "hidden_bits": self.hidden_bits.tolist(),
            "counts": self.counts.tolist(),
            "decay_times": self.decay_times.tolist(),
            "background_rate": self.background_rate,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Plate":
        counts = np.asarray(data["counts"], dtype=np.int64)
        offsets = np.zeros(counts.size + 1, dtype=np.int64)
        np.cumsum(counts, out=offsets[1:])
        return cls(
            np.asarray(data["hidden_bits"], dtype=np.uint8),
            counts,
            np.asarray(data["decay_times"], dtype=float),
            offsets,
            float(data.get("background_rate", 0.0)),
        )


@dataclass
class ArrivalReport:
    """Outcome of Bob's non-invasive decay check at plate arrival.

    ``flags`` marks pairs with at least one detected en-route decay (to be
    discarded publicly); ``detected_decays`` counts detected decayed nuclei
    and feeds the tampering test.
    """

    flags: np.ndarray
    flagged_pairs: int
    detected_decays: int

    def __post_init__(self):
        self.flags = np.asarray(self.flags, dtype=bool)
        if self.flagged_pairs != int(self.flags.sum()):
            raise ProtocolError("flagged_pairs must equal the number of set flags")


@dataclass
class Observations:
    """Bob's per-pair reading after the revelation window."""

    status: np.ndarray
    bits: np.ndarray

    def __post_init__(self):
        self.status = np.asarray(self.status, dtype=np.uint8)
        self.bits = np.asarray(self.bits, dtype=np.uint8)
        if self.status.shape != self.bits.shape:
            raise ProtocolError("status and bits must have identical shape")

    @property
    def pair_count(self) -> int:
        return self.status.size


@dataclass
class SiftTranscript:
    """Everything exchanged on the public channel: indices, never bit values."""

    pair_count: int
    announced: np.ndarray
    discarded: np.ndarray
    raw_key_length: int

    def __post_init__(self):
        self.announced = np.asarray(self.announced, dtype=np.int64)
        self.discarded = np.asarray(self.discarded, dtype=np.int64)
        if self.raw_key_length != self.announced.size:
            raise ProtocolError("raw_key_length must equal the announced count")
        if np.intersect1d(self.announced, self.discarded).size:
            raise ProtocolError("announced and discarded indices must be disjoint")
        for name, idx in (("announced", self.announced), ("discarded", self.discarded)):
            if idx.size and (idx.min() < 0 or idx.max() >= self.pair_count):
                raise ProtocolError(f"{name} indices out of range")

    def to_dict(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "pair_count": self.pair_count,
            "announced": self.announced.tolist(),
            "discarded": self.discarded.tolist(),
            "raw_key_length": self.raw_key_length,
        }


def encode_plate(
    spec: PlateSpec, timeline: TimelineParams, rng: np.random.Generator
) -> tuple[Plate, np.ndarray]:
    """Prepare a plate and return it with Alice's hidden key.

    Each pair gets a uniform random hidden bit; the radioactive cell
    receives a Poisson(mu) nucleus count (or the source's custom table) and
    each nucleus an exponential decay time measured from production.
    """
    m = spec.pair_count
    bits = rng.integers(0, 2, size=m, dtype=np.uint8)
    counts = sample_excited_count(spec.source, rng, size=m)
    total = int(counts.sum())
    times = sample_decay_time(timeline.decay, rng, size=total)
    offsets = np.zeros(m + 1, dtype=np.int64)
    np.cumsum(counts, out=offsets[1:])
    plate = Plate(bits, counts, times, offsets, spec.background_rate)
    return plate, bits.copy()


def classify_events(plate: Plate, timeline: TimelineParams) -> np.ndarray:
    """Label every nucleus with the phase its decay falls in.

    Returns an array aligned with ``plate.decay_times`` holding
    :class:`DecayPhase` values; the three labels partition all nuclei.
    """
    t = plate.decay_times
    arrival = timeline.exposure_time
    end = arrival + timeline.reveal_time
    phases = np.full(t.shape, DecayPhase.NEVER, dtype=np.uint8)
    phases[t <= arrival] = DecayPhase.PRE_ARRIVAL
    phases[(t > arrival) & (t <= end)] = DecayPhase.REVEALED
    return phases


def bob_arrival_check(
    plate: Plate,
    timeline: TimelineParams,
    detector: DetectorModel,
    rng: np.random.Generator,
) -> ArrivalReport:
    """Scenario (a): develop the film that travelled with the plate.

    Every decay that happened before arrival is detected independently
    with probability ``efficiency_bob``.
    """
    phases = classify_events(plate, timeline)
    u = rng.random(plate.total_nuclei)
    detected = (phases == DecayPhase.PRE_ARRIVAL) & (u < detector.efficiency_bob)
    per_pair = np.bincount(
        plate.nucleus_pair_index()[detected], minlength=plate.pair_count
    )
    flags = per_pair > 0
    return ArrivalReport(
        flags=flags,
        flagged_pairs=int(flags.sum()),
        detected_decays=int(detected.sum()),
    )


def bob_measure(
    plate: Plate,
    timeline: TimelineParams,
    detector: DetectorModel,
    rng: np.random.Generator,
) -> Observations:
    """Watch the plate for the revelation window and read bits by location.

    A pair yields a bit when exactly one of its cells shows events (decays
    detected with probability ``efficiency_bob``, plus background events in
    either cell); events in both cells mark the pair CONFLICT.  Repeated
    events in one cell still read as a single bit: a bit is a location,
    not a count.
    """
    m = plate.pair_count
    phases = classify_events(plate, timeline)
    u = rng.random(plate.total_nuclei)
    detected = (phases == DecayPhase.REVEALED) & (u < detector.efficiency_bob)
    revealed_counts = np.bincount(plate.nucleus_pair_index()[detected], minlength=m)

    lam = plate.background_rate * timeline.reveal_time
    if lam > 0:
        background = CountTable.poisson(lam)
        keyed_bg = background.sample(rng, size=m)
        placebo_bg = background.sample(rng, size=m)
    else:
        keyed_bg = np.zeros(m, dtype=np.int64)
        placebo_bg = np.zeros(m, dtype=np.int64)

    keyed_events = (revealed_counts > 0) | (keyed_bg > 0)
    placebo_events = placebo_bg > 0

    status = np.full(m, ObservationStatus.NONE, dtype=np.uint8)
    status[keyed_events ^ placebo_events] = ObservationStatus.BIT
    status[keyed_events & placebo_events] = ObservationStatus.CONFLICT
    # Events in the keyed cell read as the hidden bit; background firing
    # only in the placebo cell reads as the opposite side.
    bits = np.where(keyed_events, plate.hidden_bits, 1 - plate.hidden_bits)
    bits = np.where(status == ObservationStatus.BIT, bits, 0).astype(np.uint8)
    return Observations(status=status, bits=bits)


def sift(
    alice_key: np.ndarray,
    observations: Observations,
    arrival_report: ArrivalReport | None = None,
) -> tuple[np.ndarray, np.ndarray, SiftTranscript]:
    """Public sifting: align both raw keys on Bob's announced pair indices.

    Pairs flagged at arrival (scenario "a") are discarded first; Bob then
    announces the indices where he observed a bit, CONFLICT pairs excluded.
    Both raw keys always have equal length.
    """
    alice_key = np.asarray(alice_key, dtype=np.uint8)
    m = observations.pair_count
    if alice_key.size != m:
        raise ProtocolError(
            f"alice key length {alice_key.size} does not match {m} observed pairs"
        )
    if arrival_report is not None and arrival_report.flags.size != m:
        raise ProtocolError("arrival report does not match the observed pair count")

    keep = observations.status == ObservationStatus.BIT
    if arrival_report is not None:
        discarded = np.flatnonzero(arrival_report.flags)
        keep &= ~arrival_report.flags
    else:
        discarded = np.empty(0, dtype=np.int64)
    announced = np.flatnonzero(keep)
    raw_alice = alice_key[announced]
    raw_bob = observations.bits[announced]
    transcript = SiftTranscript(
        pair_count=m,
        announced=announced,
        discarded=discarded,
        raw_key_length=announced.size,
    )
    return raw_alice, raw_bob, transcript
