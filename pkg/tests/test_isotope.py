"""Catalog handling and production arithmetic."""
import json
import math

import pytest

from radiokey import (
    AssumptionWarning,
    Catalog,
    IsotopeSpec,
    ProductionPlan,
    activity_from_irradiation,
    contamination_report,
    dilution_plan,
    nuclei_from_activity,
    required_nuclei,
)

LN2 = math.log(2.0)


@pytest.fixture
def catalog():
    return Catalog.builtin()


def test_builtin_catalog_contents(catalog):
    assert set(catalog.names) == {"Sn-117m", "Sn-113", "Sn-119m", "Sn-121m", "Sn-123"}
    tin = catalog["Sn-117m"]
    assert tin.half_life_days == 13.6
    assert tin.gamma_lines_kev == (156.0, 158.56)
    assert tin.thick_target_yield == 1.0
    assert catalog["Sn-121m"].half_life_days == pytest.approx(50 * 365.25)
    assert catalog["Sn-113"].half_life_days == 115.1


def test_catalog_rejects_duplicates_and_bad_half_life():
    with pytest.raises(ValueError):
        Catalog([IsotopeSpec("X", 1.0), IsotopeSpec("X", 2.0)])
    with pytest.raises(ValueError):
        IsotopeSpec("bad", half_life_days=0.0)
    with pytest.raises(ValueError):
        IsotopeSpec("bad", half_life_days=1.0, thick_target_yield=-1.0)


def test_catalog_unknown_name(catalog):
    with pytest.raises(KeyError):
        catalog["Sn-999"]


def test_catalog_file_round_trip(tmp_path, catalog):
    path = tmp_path / "catalog.json"
    payload = {
        "schema_version": 1,
        "isotopes": [
            {
                "name": "Demo-1",
                "half_life": {"value": 36.0, "unit": "hours"},
                "gamma_lines_kev": [100.0],
                "thick_target_yield_mbq_per_uah": 2.0,
                "notes": "test entry",
            }
        ],
    }
    path.write_text(json.dumps(payload))
    loaded = Catalog.load(path)
    assert loaded["Demo-1"].half_life_days == pytest.approx(1.5)
    bad = dict(payload)
    bad["isotopes"] = [dict(payload["isotopes"][0], half_life={"value": 1, "unit": "eons"})]
    path.write_text(json.dumps(bad))
    with pytest.raises(ValueError):
        Catalog.load(path)


def test_activity_reference_case(catalog):
    tin = catalog["Sn-117m"]
    assert activity_from_irradiation(tin, 1.0, 1.0) == 1e6
    assert activity_from_irradiation(tin, 0.0, 1.0) == 0.0
    assert activity_from_irradiation(tin, 10.0, 0.5) == 5e6
    with pytest.raises(ValueError):
        activity_from_irradiation(tin, -1.0, 1.0)


def test_nuclei_from_activity(catalog):
    tin = catalog["Sn-117m"]
    count = nuclei_from_activity(1e6, tin)
    assert count == pytest.approx(1e6 * 13.6 * 24 * 3600 / LN2, rel=1e-12)
    assert count == pytest.approx(1.695e12, rel=5e-3)
    assert nuclei_from_activity(0.0, tin) == 0.0
    second_iso = IsotopeSpec("unit", half_life_days=LN2 / 86400.0)
    assert nuclei_from_activity(1.0, second_iso) == pytest.approx(1.0, rel=1e-12)


def test_activity_round_trip_is_linear(catalog):
    tin = catalog["Sn-117m"]
    base = nuclei_from_activity(activity_from_irradiation(tin, 1.0, 1.0), tin)
    doubled = nuclei_from_activity(activity_from_irradiation(tin, 2.0, 1.0), tin)
    longer = nuclei_from_activity(activity_from_irradiation(tin, 1.0, 3.0), tin)
    assert doubled == pytest.approx(2 * base, rel=1e-12)
    assert longer == pytest.approx(3 * base, rel=1e-12)


def test_dilution_plan_reference_cases():
    plan = ProductionPlan(1.0, 1.0, target_mu=0.1)
    report = dilution_plan(1e12, plan)
    assert report.samples_available == pytest.approx(1e13, rel=1e-12)
    assert report.dilution_factor == report.samples_available
    with pytest.warns(AssumptionWarning):
        unit_plan = ProductionPlan(1.0, 1.0, target_mu=1.0)
        assert dilution_plan(1.0, unit_plan).samples_available == 1.0
    with pytest.raises(ValueError):
        dilution_plan(0.5, plan)


def test_required_nuclei_for_plate():
    assert required_nuclei(2400, 0.1) == pytest.approx(240.0)


def test_contamination_reference_values(catalog):
    report = {entry.name: entry for entry in contamination_report(catalog, 30.0)}
    assert "Sn-117m" not in report  # primary excluded
    assert report["Sn-121m"].decayed_fraction == pytest.approx(1.1e-3, rel=0.05)
    assert report["Sn-113"].decayed_fraction == pytest.approx(0.165, abs=1e-3)
    assert report["Sn-113"].flagged
    assert not report["Sn-121m"].flagged


def test_contamination_zero_duration(catalog):
    assert all(
        entry.decayed_fraction == 0.0 for entry in contamination_report(catalog, 0.0)
    )


def test_production_plan_validation():
    with pytest.raises(ValueError):
        ProductionPlan(0.0, 1.0, 0.1)
    with pytest.raises(ValueError):
        ProductionPlan(1.0, 1.0, -0.1)
