"""Experiment runner: seeded batch Monte Carlo and analytic-vs-empirical reports.

A :class:`RunConfig` pins every knob of a run; a run's report is a pure
function of the config plus master seed, so its canonical JSON
serialisation is byte-identical across repetitions and worker counts.
Wall-clock timing is kept out of the canonical serialisation for exactly
that reason.
"""
from __future__ import annotations

import dataclasses
import json
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .adversary import (
    AttackConfig,
    BoundsReport,
    BrightSourceSpec,
    Estimate,
    EveRecord,
    MECH_TRANSLUCENT,
    Strategy,
    bob_detection_test,
    eve_opaque,
    eve_translucent,
    prearrival_fraction,
    security_bounds,
)
from .decay import DecayParams, SourceParams
from .errors import ConfigError
from .postproc import distill_key
from .protocol import (
    DecayPhase,
    DetectorModel,
    PlateSpec,
    TimelineParams,
    bob_arrival_check,
    bob_measure,
    classify_events,
    encode_plate,
    sift,
)
from .rng import RngSeed

SCHEMA_VERSION = 1

#: Parameters run_sweep can vary, as exposed on the command line.
SWEEP_PARAMETERS = ("mu", "tau_D", "tau_T", "tau_B", "N", "epsilon_bob")

SWEEP_COLUMNS = (
    "parameter",
    "value",
    "translucent",
    "intercept_resend",
    "intercept_resend_approx",
    "prearrival",
    "combined",
    "raw_yield",
    "key_rate",
)

SWEEP_MC_COLUMNS = (
    "mc_raw_yield",
    "mc_qber",
    "mc_detection_pass_rate",
    "mc_final_fraction",
)


@dataclass(frozen=True)
class RunConfig:
    """Everything a simulation run depends on.

    Defaults: tin-like decay law (20-day mean life), two days of production
    and two of transport, a 40-day revelation window, 2400 pairs at
    mu = 0.1, perfect detectors, no attack, scenario "a" with a
    five-sigma tampering threshold.
    """

    timeline: TimelineParams = field(
        default_factory=lambda: TimelineParams(2.0, 2.0, 40.0, DecayParams(20.0))
    )
    plate: PlateSpec = field(
        default_factory=lambda: PlateSpec(2400, SourceParams(0.1), 0.0)
    )
    detector: DetectorModel = field(default_factory=DetectorModel)
    attack: AttackConfig = field(default_factory=AttackConfig)
    scenario: str = "a"
    trials: int = 20
    master_seed: int = 1
    sigmas: float = 5.0
    postprocess: bool = True
    sample_fraction: float = 0.2
    security_bits: int = 64
    confidence_bits: int = 30
    include_transcripts: bool = False
    workers: int = 1

    def __post_init__(self):
        if self.scenario not in ("a", "b"):
            raise ConfigError(f"scenario: must be 'a' or 'b', got {self.scenario!r}")
        if self.trials < 1:
            raise ConfigError("trials: must be at least 1")
        if self.workers < 1:
            raise ConfigError("workers: must be at least 1")
        if not 0.0 < self.sample_fraction <= 1.0:
            raise ConfigError("sample_fraction: must lie in (0, 1]")
        if self.security_bits < 0:
            raise ConfigError("security_bits: must be non-negative")
        if self.confidence_bits < 1:
            raise ConfigError("confidence_bits: must be at least 1")
        if self.sigmas <= 0:
            raise ConfigError("sigmas: must be positive")

    def to_dict(self) -> dict:
        # workers is an execution detail, deliberately left out: the report
        # must serialise identically for any worker count.
        attack_window = self.attack.window
        return {
            "schema_version": SCHEMA_VERSION,
            "timeline": {
                "production_time": self.timeline.production_time,
                "transport_time": self.timeline.transport_time,
                "reveal_time": self.timeline.reveal_time,
                "mean_life": self.timeline.decay.mean_life,
            },
            "plate": {
                "pair_count": self.plate.pair_count,
                "mu": self.plate.source.mu,
                "background_rate": self.plate.background_rate,
            },
            "detector": {
                "efficiency_bob": self.detector.efficiency_bob,
                "efficiency_eve": self.detector.efficiency_eve,
            },
            "attack": {
                "strategy": self.attack.strategy.value,
                "window": None if attack_window is None else list(attack_window),
                "replacement_budget": self.attack.replacement_budget,
                "efficiency_eve": self.attack.efficiency_eve,
            },
            "scenario": self.scenario,
            "trials": self.trials,
            "master_seed": self.master_seed,
            "sigmas": self.sigmas,
            "postprocess": self.postprocess,
            "sample_fraction": self.sample_fraction,
            "security_bits": self.security_bits,
            "confidence_bits": self.confidence_bits,
            "include_transcripts": self.include_transcripts,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        data = dict(data)
        version = data.pop("schema_version", SCHEMA_VERSION)
        if version != SCHEMA_VERSION:
            raise ConfigError(f"schema_version: unsupported version {version}")
        defaults = cls()

        timeline = _take_section(data, "timeline")
        decay = _build(
            DecayParams,
            "timeline",
            mean_life=_pop_number(
                timeline, "mean_life", defaults.timeline.decay.mean_life, "timeline"
            ),
        )
        timeline_params = _build(
            TimelineParams,
            "timeline",
            production_time=_pop_number(
                timeline, "production_time", defaults.timeline.production_time, "timeline"
            ),
            transport_time=_pop_number(
                timeline, "transport_time", defaults.timeline.transport_time, "timeline"
            ),
            reveal_time=_pop_number(
                timeline, "reveal_time", defaults.timeline.reveal_time, "timeline"
            ),
            decay=decay,
        )
        _reject_unknown(timeline, "timeline")

        plate = _take_section(data, "plate")
        plate_spec = _build(
            PlateSpec,
            "plate",
            pair_count=int(_pop_number(plate, "pair_count", defaults.plate.pair_count, "plate")),
            source=SourceParams(_pop_number(plate, "mu", defaults.plate.source.mu, "plate")),
            background_rate=_pop_number(
                plate, "background_rate", defaults.plate.background_rate, "plate"
            ),
        )
        _reject_unknown(plate, "plate")

        detector = _take_section(data, "detector")
        detector_model = _build(
            DetectorModel,
            "detector",
            efficiency_bob=_pop_number(
                detector, "efficiency_bob", defaults.detector.efficiency_bob, "detector"
            ),
            efficiency_eve=_pop_number(
                detector, "efficiency_eve", defaults.detector.efficiency_eve, "detector"
            ),
        )
        _reject_unknown(detector, "detector")

        attack = _take_section(data, "attack")
        strategy_name = attack.pop("strategy", defaults.attack.strategy.value)
        try:
            strategy = Strategy(strategy_name)
        except ValueError:
            raise ConfigError(
                f"attack.strategy: unknown strategy {strategy_name!r}"
            ) from None
        window = attack.pop("window", defaults.attack.window)
        if window is not None:
            window = tuple(float(v) for v in window)
            if len(window) != 2:
                raise ConfigError("attack.window: must hold exactly two times")
        budget = attack.pop("replacement_budget", defaults.attack.replacement_budget)
        if not isinstance(budget, str):
            budget = int(budget)
        attack_config = _build(
            AttackConfig,
            "attack",
            strategy=strategy,
            window=window,
            replacement_budget=budget,
            efficiency_eve=_pop_number(
                attack, "efficiency_eve", defaults.attack.efficiency_eve, "attack"
            ),
        )
        _reject_unknown(attack, "attack")

        kwargs = {}
        for name, caster in (
            ("scenario", str),
            ("trials", int),
            ("master_seed", int),
            ("sigmas", float),
            ("postprocess", bool),
            ("sample_fraction", float),
            ("security_bits", int),
            ("confidence_bits", int),
            ("include_transcripts", bool),
            ("workers", int),
        ):
            if name in data:
                kwargs[name] = caster(data.pop(name))
        _reject_unknown(data, "")
        return cls(
            timeline=timeline_params,
            plate=plate_spec,
            detector=detector_model,
            attack=attack_config,
            **kwargs,
        )

    @classmethod
    def from_json(cls, text: str) -> "RunConfig":
        return cls.from_dict(json.loads(text))

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"


def _take_section(data: dict, name: str) -> dict:
    section = data.pop(name, {})
    if not isinstance(section, dict):
        raise ConfigError(f"{name}: must be an object")
    return dict(section)


def _pop_number(section: dict, name: str, default, path: str) -> float:
    value = section.pop(name, default)
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{path}.{name}: must be a number, got {value!r}")
    return value


def _reject_unknown(section: dict, path: str):
    if section:
        name = next(iter(section))
        where = f"{path}.{name}" if path else name
        raise ConfigError(f"{where}: unknown field")


def _build(cls, path: str, **kwargs):
    try:
        return cls(**kwargs)
    except ValueError as exc:
        raise ConfigError(f"{path}: {exc}") from exc


def load_config(path) -> RunConfig:
    with open(path, encoding="utf-8") as handle:
        try:
            data = json.load(handle)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: not valid JSON ({exc})") from exc
    return RunConfig.from_dict(data)


def _run_trial(config: RunConfig, index: int) -> dict:
    """Simulate one protocol round on the trial's own random substream."""
    rng = RngSeed(config.master_seed).stream("trial", index)
    timeline = config.timeline
    detector = config.detector
    mu = config.plate.source.mu

    plate, alice_key = encode_plate(config.plate, timeline, rng)
    phases = classify_events(plate, timeline)
    prearrival_decays = int(np.sum(phases == DecayPhase.PRE_ARRIVAL))
    nonempty_pairs = int(np.sum(plate.counts >= 1))
    total_nuclei = plate.total_nuclei

    record = EveRecord.empty()
    working = plate
    strategy = config.attack.strategy
    if strategy in (Strategy.TRANSLUCENT, Strategy.BOTH):
        record = eve_translucent(working, timeline, config.attack, rng)
    if strategy in (Strategy.OPAQUE, Strategy.BOTH):
        bright = BrightSourceSpec.from_source(config.plate.source)
        working, opaque_record = eve_opaque(
            working,
            timeline,
            config.attack,
            bright,
            rng,
            detector=detector,
            source=config.plate.source,
            sigmas=config.sigmas,
        )
        record = EveRecord.combine(opaque_record, record)

    arrival = None
    if config.scenario == "a":
        arrival = bob_arrival_check(working, timeline, detector, rng)
    observations = bob_measure(working, timeline, detector, rng)
    raw_alice, raw_bob, transcript = sift(alice_key, observations, arrival)

    detection = None
    if arrival is not None:
        detection = bob_detection_test(
            arrival.detected_decays,
            config.plate.pair_count,
            mu,
            prearrival_fraction(timeline),
            detector.efficiency_bob,
            config.sigmas,
        ).to_dict()

    eve_known = 0
    translucent_successes = 0
    if len(record):
        announced_mask = np.isin(record.pair_indices, transcript.announced)
        bit_match = observations.bits[record.pair_indices] == record.guessed_bits
        known_mask = announced_mask & bit_match
        eve_known = int(np.sum(known_mask))
        translucent_successes = int(
            np.sum(known_mask & (record.mechanisms == MECH_TRANSLUCENT))
        )

    qber = float(np.mean(raw_alice != raw_bob)) if raw_alice.size else 0.0

    ledger = None
    if config.postprocess and raw_alice.size:
        bounds = security_bounds(
            mu, timeline, detector, config.plate.pair_count, config.scenario, config.sigmas
        )
        ledger = distill_key(
            raw_alice,
            raw_bob,
            bounds.combined,
            rng,
            sample_fraction=config.sample_fraction,
            security_bits=config.security_bits,
            confidence_bits=config.confidence_bits,
        ).to_dict()

    return {
        "index": index,
        "total_nuclei": total_nuclei,
        "nonempty_pairs": nonempty_pairs,
        "prearrival_decays": prearrival_decays,
        "raw_key_length": int(raw_alice.size),
        "qber": qber,
        "conflicts": int(np.sum(observations.status == 2)),
        "discarded_pairs": int(transcript.discarded.size),
        "eve_entries": len(record),
        "eve_known_sifted": eve_known,
        "eve_replaced": record.replaced_count,
        "translucent_successes": translucent_successes,
        "detection": detection,
        "arrival": None
        if arrival is None
        else {
            "flagged_pairs": arrival.flagged_pairs,
            "detected_decays": arrival.detected_decays,
        },
        "transcript": transcript.to_dict() if config.include_transcripts else None,
        "ledger": ledger,
    }


def _run_trial_args(args) -> dict:
    return _run_trial(*args)


def _pooled_binomial(successes: int, observations: int) -> Estimate | None:
    if observations <= 0:
        return None
    p = successes / observations
    return Estimate(value=p, std_error=math.sqrt(p * (1.0 - p) / observations))


def _mean_and_se(values: list[float]) -> dict:
    arr = np.asarray(values, dtype=float)
    mean = float(arr.mean()) if arr.size else 0.0
    se = float(arr.std(ddof=1) / math.sqrt(arr.size)) if arr.size > 1 else 0.0
    return {"mean": mean, "std_error": se}


@dataclass
class RunReport:
    """Config echo, per-trial summaries, aggregates, and the bounds comparison."""

    config: RunConfig
    bounds: BoundsReport
    trials: list[dict]
    aggregate: dict
    wall_clock_seconds: float = 0.0

    def to_dict(self, include_timing: bool = False) -> dict:
        out = {
            "schema_version": SCHEMA_VERSION,
            "config": self.config.to_dict(),
            "bounds": self.bounds.to_dict(),
            "aggregate": self.aggregate,
            "trials": self.trials,
        }
        if include_timing:
            out["wall_clock_seconds"] = self.wall_clock_seconds
        return out

    def to_json(self, include_timing: bool = False) -> str:
        return json.dumps(self.to_dict(include_timing), indent=2, sort_keys=True) + "\n"


def run_simulation(config: RunConfig) -> RunReport:
    """Execute the configured trials and aggregate them against the bounds.

    Trial ``i`` draws only from substream (master_seed, "trial", i), so the
    report does not depend on how trials are scheduled across workers.
    """
    started = time.perf_counter()
    indices = range(config.trials)
    if config.workers > 1:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            trials = list(pool.map(_run_trial_args, [(config, i) for i in indices]))
    else:
        trials = [_run_trial(config, i) for i in indices]

    bounds = security_bounds(
        config.plate.source.mu,
        config.timeline,
        config.detector,
        config.plate.pair_count,
        config.scenario,
        config.sigmas,
    )
    bounds.mc_prearrival = _pooled_binomial(
        sum(t["prearrival_decays"] for t in trials),
        sum(t["total_nuclei"] for t in trials),
    )
    if config.attack.strategy in (Strategy.TRANSLUCENT, Strategy.BOTH):
        bounds.mc_translucent = _pooled_binomial(
            sum(t["translucent_successes"] for t in trials),
            sum(t["nonempty_pairs"] for t in trials),
        )
    if config.attack.strategy is not Strategy.NONE:
        bounds.mc_eve_fraction = _pooled_binomial(
            sum(t["eve_known_sifted"] for t in trials),
            sum(t["raw_key_length"] for t in trials),
        )

    detection_runs = [t["detection"] for t in trials if t["detection"] is not None]
    ledgers = [t["ledger"] for t in trials if t["ledger"] is not None]
    aggregate = {
        "trials": config.trials,
        "raw_key_length": _mean_and_se([t["raw_key_length"] for t in trials]),
        "qber": _mean_and_se([t["qber"] for t in trials]),
        "detection_pass_rate": (
            sum(d["passed"] for d in detection_runs) / len(detection_runs)
            if detection_runs
            else None
        ),
        "final_key_length": _mean_and_se([l["final_length"] for l in ledgers])
        if ledgers
        else None,
        "aborted_trials": sum(1 for l in ledgers if l["status"] != "OK"),
        "postprocessed_trials": len(ledgers),
    }
    return RunReport(
        config=config,
        bounds=bounds,
        trials=trials,
        aggregate=aggregate,
        wall_clock_seconds=time.perf_counter() - started,
    )


def run_bounds(config: RunConfig) -> BoundsReport:
    """Analytic-only evaluation of the bounds for one parameter point."""
    return security_bounds(
        config.plate.source.mu,
        config.timeline,
        config.detector,
        config.plate.pair_count,
        config.scenario,
        config.sigmas,
    )


def _apply_parameter(config: RunConfig, parameter: str, value: float) -> RunConfig:
    timeline = config.timeline
    if parameter == "mu":
        plate = dataclasses.replace(config.plate, source=SourceParams(float(value)))
        return dataclasses.replace(config, plate=plate)
    if parameter == "tau_D":
        new_timeline = dataclasses.replace(timeline, decay=DecayParams(float(value)))
        return dataclasses.replace(config, timeline=new_timeline)
    if parameter == "tau_T":
        new_timeline = dataclasses.replace(timeline, transport_time=float(value))
        return dataclasses.replace(config, timeline=new_timeline)
    if parameter == "tau_B":
        new_timeline = dataclasses.replace(timeline, reveal_time=float(value))
        return dataclasses.replace(config, timeline=new_timeline)
    if parameter == "N":
        plate = dataclasses.replace(config.plate, pair_count=int(value))
        return dataclasses.replace(config, plate=plate)
    if parameter == "epsilon_bob":
        detector = dataclasses.replace(config.detector, efficiency_bob=float(value))
        return dataclasses.replace(config, detector=detector)
    raise ConfigError(
        f"parameter: must be one of {', '.join(SWEEP_PARAMETERS)}, got {parameter!r}"
    )


def analytic_raw_yield(mu: float, timeline: TimelineParams, efficiency_bob: float) -> float:
    """Expected announced fraction: survivors times the chance a sample shows."""
    p = prearrival_fraction(timeline)
    return (1.0 - p) * (-math.expm1(-efficiency_bob * mu))


@dataclass
class SweepResult:
    """Tabular bounds (and optional simulation summaries) over a parameter grid."""

    parameter: str
    columns: tuple
    rows: list[dict]

    def to_csv(self) -> str:
        lines = [",".join(self.columns)]
        for row in self.rows:
            lines.append(",".join(_csv_cell(row[c]) for c in self.columns))
        return "\n".join(lines) + "\n"

    def to_dict(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "parameter": self.parameter,
            "columns": list(self.columns),
            "rows": self.rows,
        }


def _csv_cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def run_sweep(
    config: RunConfig, parameter: str, values, simulate: bool = False
) -> SweepResult:
    """Evaluate the bounds (and optionally full simulations) over a grid."""
    values = list(values)
    if not values:
        raise ConfigError("grid: must contain at least one value")
    columns = SWEEP_COLUMNS + (SWEEP_MC_COLUMNS if simulate else ())
    rows = []
    for value in values:
        point = _apply_parameter(config, parameter, value)
        bounds = run_bounds(point)
        yield_frac = analytic_raw_yield(
            point.plate.source.mu, point.timeline, point.detector.efficiency_bob
        )
        row = {
            "parameter": parameter,
            "value": float(value),
            "translucent": bounds.translucent,
            "intercept_resend": bounds.intercept_resend,
            "intercept_resend_approx": bounds.intercept_resend_approx,
            "prearrival": bounds.prearrival,
            "combined": bounds.combined,
            "raw_yield": yield_frac,
            "key_rate": yield_frac * max(0.0, 1.0 - bounds.combined),
        }
        if simulate:
            report = run_simulation(point)
            pair_count = point.plate.pair_count
            final = report.aggregate["final_key_length"]
            row.update(
                {
                    "mc_raw_yield": report.aggregate["raw_key_length"]["mean"] / pair_count,
                    "mc_qber": report.aggregate["qber"]["mean"],
                    "mc_detection_pass_rate": report.aggregate["detection_pass_rate"],
                    "mc_final_fraction": None
                    if final is None
                    else final["mean"] / pair_count,
                }
            )
        rows.append(row)
    return SweepResult(parameter=parameter, columns=columns, rows=rows)
