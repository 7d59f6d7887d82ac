"""
Lint-like checks that the shipped schemas follow common conventions. There may be
reason to violate these conventions, but they help to avoid problems.
"""
import json
from pathlib import Path

import pytest

from pydegrade.visuals import vega

_schema_root = Path(__file__).parent.parent.parent / "pydegrade" / "visuals" / "schemas"


def schemas():
    found = [*_schema_root.glob("*.vg.json")]
    assert len(found) > 0, "No schemas found"
    return found


@pytest.mark.parametrize("schema_file", schemas())
def test_schema_loads_by_name(schema_file):
    with open(schema_file) as f:
        on_disk = json.load(f)
    assert vega.load_schema(schema_file.name) == on_disk


@pytest.mark.parametrize("schema_file", schemas())
def test_data_sources_are_named_and_empty(schema_file):
    with open(schema_file) as f:
        schema = json.load(f)
    for data in schema["data"]:
        assert "name" in data
        assert data.get("values", []) == [], f"{schema_file.name} ships with data"


@pytest.mark.parametrize("schema_file", schemas())
def test_axes_are_named(schema_file):
    with open(schema_file) as f:
        schema = json.load(f)
    names = [axis.get("name") for axis in schema.get("axes", [])]
    assert {"x_axis", "y_axis"} <= set(names)


@pytest.mark.parametrize("schema_file", schemas())
def test_scales_reference_known_data(schema_file):
    with open(schema_file) as f:
        schema = json.load(f)
    data_names = {d["name"] for d in schema["data"]}
    for scale in schema["scales"]:
        domain = scale.get("domain", {})
        if isinstance(domain, dict) and "data" in domain:
            assert domain["data"] in data_names


def test_missing_schema():
    with pytest.raises((ValueError, FileNotFoundError, OSError)):
        vega.load_schema("no_such_schema.vg.json")
