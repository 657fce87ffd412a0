"""Irradiation yield arithmetic, isotope catalog, and dilution planning.

Converts accelerator output (thick-target yield times beam charge) into
activity, activity into a metastable-nucleus inventory, and an inventory
into the number of standard samples at a target mean occupancy.  Decay
during irradiation (saturation) is ignored, consistent with quoting a
linear yield figure.
"""
from __future__ import annotations

import json
import warnings
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

from .decay import LN2
from .errors import AssumptionWarning

SCHEMA_VERSION = 1

DAYS_PER_YEAR = 365.25
SECONDS_PER_DAY = 86400.0

_UNIT_TO_DAYS = {
    "seconds": 1.0 / SECONDS_PER_DAY,
    "minutes": 1.0 / 1440.0,
    "hours": 1.0 / 24.0,
    "days": 1.0,
    "years": DAYS_PER_YEAR,
}


@dataclass(frozen=True)
class IsotopeSpec:
    """One catalog entry.

    Attributes:
        name: unique identifier, e.g. ``"Sn-117m"``.
        half_life_days: half-life in days.
        gamma_lines_kev: characteristic gamma energies.
        thick_target_yield: activity per unit beam charge, MBq per uAh.
        notes: free-form production remarks.
    """

    name: str
    half_life_days: float
    gamma_lines_kev: tuple[float, ...] = ()
    thick_target_yield: float = 0.0
    notes: str = ""

    def __post_init__(self):
        if not self.half_life_days > 0:
            raise ValueError(f"{self.name}: half-life must be positive")
        if self.thick_target_yield < 0:
            raise ValueError(f"{self.name}: yield must be non-negative")

    @property
    def mean_life_days(self) -> float:
        return self.half_life_days / LN2


class Catalog:
    """Ordered collection of isotopes with unique names."""

    def __init__(self, specs: list[IsotopeSpec]):
        names = [spec.name for spec in specs]
        if len(set(names)) != len(names):
            raise ValueError("catalog names must be unique")
        self._specs = {spec.name: spec for spec in specs}

    def __len__(self) -> int:
        return len(self._specs)

    def __iter__(self):
        return iter(self._specs.values())

    def __contains__(self, name: str) -> bool:
        return name in self._specs

    def __getitem__(self, name: str) -> IsotopeSpec:
        try:
            return self._specs[name]
        except KeyError:
            raise KeyError(f"unknown isotope {name!r}") from None

    @property
    def names(self) -> list[str]:
        return list(self._specs)

    @classmethod
    def from_dict(cls, data: dict) -> "Catalog":
        specs = []
        for record in data["isotopes"]:
            half_life = record["half_life"]
            unit = half_life["unit"]
            if unit not in _UNIT_TO_DAYS:
                raise ValueError(f"unknown half-life unit {unit!r}")
            specs.append(
                IsotopeSpec(
                    name=record["name"],
                    half_life_days=float(half_life["value"]) * _UNIT_TO_DAYS[unit],
                    gamma_lines_kev=tuple(record.get("gamma_lines_kev", ())),
                    thick_target_yield=float(
                        record.get("thick_target_yield_mbq_per_uah", 0.0)
                    ),
                    notes=record.get("notes", ""),
                )
            )
        return cls(specs)

    @classmethod
    def load(cls, path: str | Path) -> "Catalog":
        with open(path, encoding="utf-8") as handle:
            return cls.from_dict(json.load(handle))

    @classmethod
    def builtin(cls) -> "Catalog":
        """The catalog shipped with the package (tin isotopes)."""
        text = resources.files("radiokey.data").joinpath("isotopes.json").read_text()
        return cls.from_dict(json.loads(text))


@dataclass(frozen=True)
class ProductionPlan:
    """Target figures for one production and dilution campaign."""

    beam_current_ua: float
    irradiation_hours: float
    target_mu: float
    sample_volume_mm3: float = 1.0

    def __post_init__(self):
        for name in (
            "beam_current_ua",
            "irradiation_hours",
            "target_mu",
            "sample_volume_mm3",
        ):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")


def activity_from_irradiation(
    spec: IsotopeSpec, current_ua: float, duration_h: float
) -> float:
    """Activity in Bq produced by a beam of ``current_ua`` for ``duration_h``."""
    if current_ua < 0 or duration_h < 0:
        raise ValueError("current and duration must be non-negative")
    return spec.thick_target_yield * current_ua * duration_h * 1e6


def nuclei_from_activity(activity_bq, spec: IsotopeSpec) -> float:
    """Metastable-nucleus count sustaining ``activity_bq``.

    count = activity * mean_life = activity * half_life_seconds / ln 2.
    """
    if activity_bq < 0:
        raise ValueError("activity must be non-negative")
    return activity_bq * spec.half_life_days * SECONDS_PER_DAY / LN2


def required_nuclei(sample_count: float, mu: float) -> float:
    """Nuclei needed to fill ``sample_count`` samples at mean occupancy mu."""
    if sample_count < 0 or mu < 0:
        raise ValueError("inputs must be non-negative")
    return sample_count * mu


@dataclass
class DilutionReport:
    """How far to dilute a production batch to reach the target occupancy."""

    total_nuclei: float
    target_mu: float
    samples_available: float
    dilution_factor: float
    sample_volume_mm3: float

    def to_dict(self) -> dict:
        return {
            "total_nuclei": self.total_nuclei,
            "target_mu": self.target_mu,
            "samples_available": self.samples_available,
            "dilution_factor": self.dilution_factor,
            "sample_volume_mm3": self.sample_volume_mm3,
        }


def dilution_plan(total_nuclei: float, plan: ProductionPlan) -> DilutionReport:
    """Standard samples obtainable from ``total_nuclei`` at the plan's occupancy.

    The dilution factor is taken relative to packing the whole batch into a
    single standard sample volume, so it numerically equals the sample
    count.
    """
    if total_nuclei < 1:
        raise ValueError("total_nuclei must be at least 1")
    if plan.target_mu >= 1:
        warnings.warn(
            f"target_mu = {plan.target_mu} is not below one; the protocol assumes "
            "a mean occupancy well under one per sample",
            AssumptionWarning,
            stacklevel=2,
        )
    samples = total_nuclei / plan.target_mu
    return DilutionReport(
        total_nuclei=total_nuclei,
        target_mu=plan.target_mu,
        samples_available=samples,
        dilution_factor=samples,
        sample_volume_mm3=plan.sample_volume_mm3,
    )


@dataclass
class ContaminantActivity:
    """Decay budget of one co-produced isotope over the protocol window."""

    name: str
    half_life_days: float
    decayed_fraction: float
    flagged: bool

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "half_life_days": self.half_life_days,
            "decayed_fraction": self.decayed_fraction,
            "flagged": self.flagged,
        }


def contamination_report(
    catalog: Catalog,
    protocol_duration_days: float,
    primary: str = "Sn-117m",
    flag_threshold: float = 0.01,
) -> list[ContaminantActivity]:
    """Fraction of each contaminant that decays during the protocol.

    Entries whose decayed fraction reaches ``flag_threshold`` are flagged
    as a non-negligible activity within the protocol window.  The primary
    isotope is excluded.
    """
    if protocol_duration_days < 0:
        raise ValueError("protocol duration must be non-negative")
    import math

    report = []
    for spec in catalog:
        if spec.name == primary:
            continue
        fraction = -math.expm1(-protocol_duration_days / spec.mean_life_days)
        report.append(
            ContaminantActivity(
                name=spec.name,
                half_life_days=spec.half_life_days,
                decayed_fraction=fraction,
                flagged=fraction >= flag_threshold,
            )
        )
    return report
