import json
from pathlib import Path

import pytest

from evsiting import config as cf
from evsiting.config import ConfigError

GOLDEN = Path(__file__).parent / "golden" / "default_config.json"


def test_defaults_match_golden():
    assert cf.dumps(cf.default_config()) == GOLDEN.read_text()


def test_load_without_file_equals_defaults():
    assert cf.public(cf.load_config()) == cf.default_config()


def test_file_and_overrides(tmp_path):
    p = tmp_path / "c.json"
    p.write_text(json.dumps({"mclp": {"P": 4}, "inputs": {"zones": "z.geojson"}}))
    cfg = cf.load_config(p, ["queue.rho_cap=0.8", "report.radii_m=[1000]"], seed=9)
    assert cfg["mclp"]["P"] == 4 and cfg["queue"]["rho_cap"] == 0.8
    assert cfg["report"]["radii_m"] == [1000] and cfg["seed"] == 9
    assert cf.resolve_input(cfg, "zones") == tmp_path / "z.geojson"
    assert cf.resolve_input(cfg, "hubs") is None


def test_string_override_kept_as_text():
    cfg = cf.default_config()
    cf.apply_override(cfg, "queue.convention=floor")
    assert cfg["queue"]["convention"] == "floor"


@pytest.mark.parametrize("item", ["mclp.nope=1", "nosection.x=1", "mclp.P"])
def test_bad_overrides(item):
    with pytest.raises(ConfigError):
        cf.apply_override(cf.default_config(), item)


def test_unknown_file_key(tmp_path):
    p = tmp_path / "c.json"
    p.write_text('{"mclp": {"budget": 3}}')
    with pytest.raises(ConfigError, match="mclp.budget"):
        cf.load_config(p)


def test_malformed_json_names_line(tmp_path):
    p = tmp_path / "c.json"
    p.write_text('{\n"seed": 1,\n}')
    with pytest.raises(ConfigError, match="c.json:3"):
        cf.load_config(p)


@pytest.mark.parametrize("items", [
    ["mclp.alpha=0.8"],
    ["mclp.P=null"],
    ["centrality.tau=1.0"],
    ["demand.w_pop=-1"],
    ["queue.convention=round"],
    ['stages=["grid"]'],
    ['demand.poi_weights={"parking": 1}'],
])
def test_invalid_settings_rejected(items):
    with pytest.raises(ConfigError):
        cf.load_config(overrides=items)


def test_alpha_alone_accepted():
    cfg = cf.load_config(overrides=["mclp.P=null", "mclp.alpha=0.8"])
    assert cfg["mclp"]["alpha"] == 0.8
