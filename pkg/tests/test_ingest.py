import csv
import shutil

import pytest

from evsiting import config as cf
from evsiting import ingest


@pytest.fixture
def data(tmp_path, fixture_dir):
    d = tmp_path / "data"
    shutil.copytree(fixture_dir, d)
    return d


def validate(d):
    return ingest.validate_inputs(cf.load_config(d / "config.json"))


def rewrite(path, edit):
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    fields = list(rows[0])
    edit(rows, fields)
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fields, lineterminator="\n")
        w.writeheader()
        w.writerows(rows)


def test_fixture_is_valid(data):
    rep = validate(data)
    assert rep.ok
    assert any("R1" in w.message for w in rep.warnings)


def test_unknown_poi_class_fatal(data):
    rewrite(data / "pois.csv", lambda rows, f: rows[0].update(canonical_class="airport"))
    rep = validate(data)
    assert [str(e) for e in rep.errors] == [
        f"{data / 'pois.csv'}:2: canonical_class: unknown canonical class 'airport'"]


def test_zero_vehicles_fatal(data):
    rewrite(data / "counties.csv", lambda rows, f: rows[1].update(vehicle_count="0"))
    rep = validate(data)
    assert len(rep.errors) == 1
    err = rep.errors[0]
    assert (err.line, err.field) == (3, "vehicle_count")
    assert "division by zero" in err.message


def test_missing_hour_column_named(data):
    def drop(rows, fields):
        fields.remove("h23")
        for r in rows:
            del r["h23"]
    rewrite(data / "traffic.csv", drop)
    rep = validate(data)
    assert rep.errors[0].field == "h23"


def test_blank_hour_named(data):
    rewrite(data / "traffic.csv", lambda rows, f: rows[0].update(h7=""))
    rep = validate(data)
    assert (rep.errors[0].line, rep.errors[0].field) == (2, "h7")


def test_wrong_cell_resolution(data):
    rewrite(data / "cells.csv", lambda rows, f: rows[0].update(res="9"))
    assert "expected resolution 8" in validate(data).errors[0].message


def test_edge_with_unknown_zone(data):
    rewrite(data / "edges.csv", lambda rows, f: rows[0].update(zone_id="ZZ"))
    assert "unknown zone 'ZZ'" in validate(data).errors[0].message


def test_missing_file_reported(data):
    (data / "counties.csv").unlink()
    rep = validate(data)
    assert any("cannot open" in e.message for e in rep.errors)


def test_validation_error_lists_issues(data):
    rewrite(data / "pois.csv", lambda rows, f: rows[0].update(count="-2"))
    err = ingest.ValidationError(validate(data))
    assert "count" in str(err)


def test_zones_round_trip(data):
    zones = ingest.load_zones(data / "zones.geojson")
    assert [z.zone_id for z in zones] == ["Z1", "Z2", "Z3", "R1"]
    doc = ingest.zones_geojson(zones)
    assert doc["features"][0]["properties"]["county_id"] == "C1"
