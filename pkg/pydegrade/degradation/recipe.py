"""
Degradation recipes: ordered, fully parameterized lists of degradation ops.

Text format (one record per line, `#` starts a comment)::

    pydegrade-recipe
    schema_version = 1
    master_seed = 1234
    passes = 1
    op = blur sigma_x=1.25 sigma_y=0.5 angle=0.3
    op = noise sigma=0.05 mode=gray seed=77
    op = clip

Floats are written with `repr`, which round-trips exactly.
"""
from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from typing import List, Optional, Tuple

from pydegrade.degradation.ops import (
    OP_TYPES,
    ClipOp,
    DegradationOp,
    apply_op,
    param_types,
)
from pydegrade.errors import RecipeParseError
from pydegrade.imaging.tensor import ImageTensor

RECIPE_MAGIC = "pydegrade-recipe"
SCHEMA_VERSION = 1


@dataclass(frozen=True)
class DegradationRecipe:
    ops: Tuple[DegradationOp, ...]
    master_seed: int = 0
    schema_version: int = SCHEMA_VERSION
    passes: int = 1

    def __post_init__(self):
        object.__setattr__(self, "ops", tuple(self.ops))
        if not self.ops or not isinstance(self.ops[-1], ClipOp):
            raise ValueError("A recipe must end with a clip op")
        kinds = Counter(op.kind for op in self.ops)
        if kinds["clip"] != 1:
            raise ValueError("A recipe must contain exactly one clip op")
        repeated = [kind for kind, n in kinds.items() if kind != "clip" and n > self.passes]
        if repeated:
            raise ValueError(
                f"Op kinds {repeated} appear more than {self.passes} time(s) in the recipe"
            )

    @property
    def kinds(self) -> Tuple[str, ...]:
        return tuple(op.kind for op in self.ops)


def apply_recipe(
    img: ImageTensor,
    recipe: DegradationRecipe,
    *,
    trace: Optional[List[Tuple[str, dict]]] = None,
) -> ImageTensor:
    """
    Apply each op of `recipe` in order. Resolution is preserved and the final clip
    puts the output in [0, 1]. When `trace` is given, every executed op is appended
    to it as (kind, params) so two applications can be compared.
    """
    out = img
    for op in recipe.ops:
        out = apply_op(op, out)
        if trace is not None:
            trace.append((op.kind, op.params()))
    return out


def _format_value(value) -> str:
    return repr(value) if isinstance(value, float) else str(value)


def serialize_recipe(recipe: DegradationRecipe) -> str:
    lines = [
        RECIPE_MAGIC,
        f"schema_version = {recipe.schema_version}",
        f"master_seed = {recipe.master_seed}",
        f"passes = {recipe.passes}",
    ]
    for op in recipe.ops:
        params = " ".join(f"{k}={_format_value(v)}" for k, v in op.params().items())
        lines.append(f"op = {op.kind} {params}".rstrip())
    return "\n".join(lines) + "\n"


def _parse_op(text: str, line_number: int) -> DegradationOp:
    kind, *assignments = text.split()
    if kind not in OP_TYPES:
        raise RecipeParseError(f"line {line_number}: unknown op kind '{kind}'")
    op_type = OP_TYPES[kind]
    types = param_types(op_type)

    params = {}
    for assignment in assignments:
        name, sep, raw = assignment.partition("=")
        if not sep or name not in types:
            raise RecipeParseError(
                f"line {line_number}: bad parameter '{assignment}' for op '{kind}'"
            )
        try:
            params[name] = types[name](raw)
        except ValueError as e:
            raise RecipeParseError(f"line {line_number}: {e}") from e

    missing = set(types) - set(params)
    if missing:
        raise RecipeParseError(f"line {line_number}: op '{kind}' is missing {sorted(missing)}")
    return op_type(**params)


def deserialize_recipe(text: str) -> DegradationRecipe:
    lines = [
        (n, line.split("#", 1)[0].strip())
        for n, line in enumerate(text.splitlines(), start=1)
    ]
    lines = [(n, line) for n, line in lines if line]
    if not lines:
        raise RecipeParseError("Empty recipe text")
    if lines[0][1] != RECIPE_MAGIC:
        raise RecipeParseError(f"Recipe text must start with '{RECIPE_MAGIC}'")

    header = {}
    ops: List[DegradationOp] = []
    for n, line in lines[1:]:
        key, sep, value = (part.strip() for part in line.partition("="))
        if not sep:
            raise RecipeParseError(f"line {n}: expected 'key = value', got '{line}'")
        if key == "op":
            if not value:
                raise RecipeParseError(f"line {n}: empty op")
            ops.append(_parse_op(value, n))
        elif key in ("schema_version", "master_seed", "passes"):
            try:
                header[key] = int(value)
            except ValueError as e:
                raise RecipeParseError(f"line {n}: {key} must be an integer") from e
        else:
            raise RecipeParseError(f"line {n}: unknown key '{key}'")

    if "schema_version" not in header:
        raise RecipeParseError("Recipe text has no schema_version")
    if header["schema_version"] != SCHEMA_VERSION:
        raise RecipeParseError(
            f"Unsupported recipe schema_version {header['schema_version']}"
        )

    try:
        return DegradationRecipe(
            ops=tuple(ops),
            master_seed=header.get("master_seed", 0),
            schema_version=header["schema_version"],
            passes=header.get("passes", 1),
        )
    except ValueError as e:
        raise RecipeParseError(str(e)) from e
