"""Helpers for the Vega schemas shipped with pydegrade."""

import json
import pkgutil
from copy import deepcopy
from typing import Any, Dict, List, Optional

VegaSchema = Dict[str, Any]


def load_schema(name: str) -> VegaSchema:
    """Load one of the schemas stored in `pydegrade/visuals/schemas`.

    Not meant for arbitrary schema files; use the json package for those.
    """
    data = pkgutil.get_data(__name__, f"schemas/{name}")
    if data is None:
        raise ValueError(f"Could not locate requested schema file: {name}")
    return json.loads(data)


def save_schema(schema: VegaSchema, path: str) -> None:
    with open(path, "w") as f:
        json.dump(schema, f, indent=3)


def find_keyed(ls: List[dict], key: str, value: Any) -> dict:
    """The first dict in `ls` whose `key` equals `value`."""
    for e in ls:
        if isinstance(e, dict) and e.get(key) == value:
            return e
    raise ValueError(f"Attempted to find, but {key}={value} not found.")


def resize(
    schema: VegaSchema, *, w: Optional[int] = None, h: Optional[int] = None
) -> VegaSchema:
    """Copy of `schema` with a new width and/or height."""
    schema = deepcopy(schema)
    if h is not None:
        schema["height"] = h
    if w is not None:
        schema["width"] = w
    return schema


def set_title(schema: VegaSchema, title: str) -> VegaSchema:
    schema = deepcopy(schema)
    if isinstance(schema.get("title"), dict):
        schema["title"]["text"] = title
    else:
        schema["title"] = title
    return schema
