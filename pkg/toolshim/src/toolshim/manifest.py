"""Manifest reading and parameter validation.

The manifest sidecar is a JSON file (``<name>.manifest.json``) produced by
the orchestration engine; this module consumes that file format directly
and validates values against its parameter specs. The validation here is an
independent implementation of the same semantics the engine applies at its
boundary, on purpose: the two checks back each other up.

Supported parameter types: integer, number, string, boolean, enum, list,
record, file-path. Supported constraints: numeric min/max, string regex,
enum membership. Unknown keys are rejected; booleans never pass as numbers.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping, Optional, Sequence


class InputValidationError(Exception):
    pass


class OutputValidationError(Exception):
    pass


@dataclass
class Param:
    name: str
    type: str
    required: bool = True
    constraints: Optional[Mapping] = None
    values: Optional[list] = None
    item: Optional["Param"] = None
    fields: list["Param"] = field(default_factory=list)

    @classmethod
    def from_dict(cls, d: Mapping) -> "Param":
        return cls(
            name=d["name"],
            type=d["type"],
            required=d.get("required", True),
            constraints=d.get("constraints"),
            values=d.get("values"),
            item=cls.from_dict(d["item"]) if d.get("item") else None,
            fields=[cls.from_dict(f) for f in d.get("fields") or []],
        )


@dataclass
class Manifest:
    name: str
    inputs: list[Param]
    outputs: list[Param]
    source: str
    callable: str
    enforce_schemas: bool
    path: Path

    @classmethod
    def load(cls, path: Path) -> "Manifest":
        path = Path(path)
        doc = json.loads(path.read_text(encoding="utf-8"))
        ep = doc.get("entrypoint") or {}
        return cls(
            name=doc["name"],
            inputs=[Param.from_dict(p) for p in doc.get("inputs", [])],
            outputs=[Param.from_dict(p) for p in doc.get("outputs", [])],
            source=ep.get("source", ""),
            callable=ep.get("callable", ""),
            enforce_schemas=bool(doc.get("enforce_schemas", True)),
            path=path,
        )

    @property
    def source_path(self) -> Path:
        return self.path.parent / self.source


def _type_error(where: str, expected: str, value: Any) -> str:
    return f"{where}: expected {expected}, got {type(value).__name__}"


def _check(param: Param, value: Any, where: str) -> list[str]:
    t = param.type
    if t == "integer":
        if isinstance(value, bool) or not isinstance(value, int):
            return [_type_error(where, "integer", value)]
    elif t == "number":
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            return [_type_error(where, "number", value)]
    elif t in ("string", "file-path"):
        if not isinstance(value, str):
            return [_type_error(where, "string", value)]
    elif t == "boolean":
        if not isinstance(value, bool):
            return [_type_error(where, "boolean", value)]
    elif t == "enum":
        if value not in (param.values or []):
            return [f"{where}: {value!r} is not one of {param.values}"]
    elif t == "list":
        if not isinstance(value, list):
            return [_type_error(where, "list", value)]
        problems = []
        for i, element in enumerate(value):
            problems.extend(_check(param.item, element, f"{where}[{i}]"))
        return problems
    elif t == "record":
        if not isinstance(value, dict):
            return [_type_error(where, "record", value)]
        return check_record(param.fields, value, where)
    else:
        return [f"{where}: unsupported parameter type {t!r}"]

    problems = []
    c = param.constraints or {}
    if "min" in c and isinstance(value, (int, float)) and value < c["min"]:
        problems.append(f"{where}: {value} < min {c['min']}")
    if "max" in c and isinstance(value, (int, float)) and value > c["max"]:
        problems.append(f"{where}: {value} > max {c['max']}")
    if "regex" in c and isinstance(value, str) and re.fullmatch(c["regex"], value) is None:
        problems.append(f"{where}: {value!r} does not match /{c['regex']}/")
    return problems


def check_record(params: Sequence[Param], record: Mapping, where: str) -> list[str]:
    problems = []
    known = {p.name for p in params}
    for p in params:
        if p.name not in record:
            if p.required:
                problems.append(f"{where}.{p.name}: required value missing")
            continue
        problems.extend(_check(p, record[p.name], f"{where}.{p.name}"))
    for key in record:
        if key not in known:
            problems.append(f"{where}.{key}: unexpected key")
    return problems


def validate_inputs(manifest: Manifest, inputs: Mapping) -> None:
    problems = check_record(manifest.inputs, inputs, "inputs")
    if problems:
        raise InputValidationError("; ".join(problems))


def validate_outputs(manifest: Manifest, outputs: Any) -> None:
    if not isinstance(outputs, dict):
        raise OutputValidationError(
            f"entrypoint must return a record of outputs, got {type(outputs).__name__}"
        )
    problems = check_record(manifest.outputs, outputs, "outputs")
    if problems:
        raise OutputValidationError("; ".join(problems))
