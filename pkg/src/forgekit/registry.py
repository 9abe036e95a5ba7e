"""Hierarchical toolset registry: manifests, disclosure listing, invocation.

On-disk layout: ``<root>/<category...>/<name>.py`` next to
``<name>.manifest.json``; a generated ``INDEX.md`` at the root. The manifest
sidecar is a canonical-key-order JSON document so regeneration is diffable.

Listing is deliberately narrow: :func:`list_children` returns only the
immediate children of one category and is the sole listing primitive exposed
to agent prompts (progressive disclosure).
"""

from __future__ import annotations

import json
import re
import shlex
import sys
import threading
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping, Optional, Sequence

from .errors import ForgekitError
from .executor import ExecutorConfig, JobRequest, submit

_NAME_RE = re.compile(r"^[A-Za-z_][A-Za-z0-9_]*$")

SEMANTIC_TYPES = ("integer", "number", "string", "boolean", "enum", "list", "record", "file-path")

MANIFEST_SUFFIX = ".manifest.json"
INDEX_NAME = "INDEX.md"

# Default wire command for dispatching a tool through the contract shim.
# The shim is an external process; the engine never imports tool code.
DEFAULT_SHIM_COMMAND = (sys.executable, "-m", "toolshim", "run")


class RegistryError(ForgekitError):
    pass


class ManifestValidationError(RegistryError):
    def __init__(self, violations: list[str]):
        super().__init__("; ".join(violations))
        self.violations = violations


class NameConflictError(RegistryError):
    pass


class CategoryNotFoundError(RegistryError):
    pass


class ToolNotFoundError(RegistryError):
    pass


class AmbiguousToolError(RegistryError):
    pass


class InputSchemaError(RegistryError):
    pass


class OutputSchemaError(RegistryError):
    pass


class ToolInvocationError(RegistryError):
    """Structured error propagated verbatim from a failing tool."""

    def __init__(self, error_type: str, message: str, detail: Optional[str] = None):
        super().__init__(f"{error_type}: {message}")
        self.error_type = error_type
        self.message = message
        self.detail = detail


# One writer lock per toolset root; reads are lock-free.
_WRITER_LOCKS: dict[str, threading.RLock] = {}
_WRITER_LOCKS_GUARD = threading.Lock()


def writer_lock(root: Path) -> threading.RLock:
    key = str(Path(root).resolve())
    with _WRITER_LOCKS_GUARD:
        return _WRITER_LOCKS.setdefault(key, threading.RLock())


@dataclass
class ParamSpec:
    """A typed tool parameter (input or output)."""

    name: str
    semantic_type: str
    units: Optional[str] = None
    required: bool = True
    constraints: Optional[dict] = None  # {"min":..,"max":..} | {"regex":..}
    values: Optional[list[str]] = None  # enum members
    item: Optional["ParamSpec"] = None  # list element spec
    fields: Optional[list["ParamSpec"]] = None  # record field specs

    def violations(self, path: str = "") -> list[str]:
        where = path or self.name
        out = []
        if not self.name or not _NAME_RE.match(self.name):
            out.append(f"{where}: invalid parameter name {self.name!r}")
        if self.semantic_type not in SEMANTIC_TYPES:
            out.append(f"{where}: unknown type {self.semantic_type!r}")
        if self.semantic_type == "enum" and not self.values:
            out.append(f"{where}: enum must declare at least one value")
        if self.semantic_type == "list":
            if self.item is None:
                out.append(f"{where}: list must declare an element spec")
            else:
                out.extend(self.item.violations(f"{where}[]"))
        if self.semantic_type == "record":
            if not self.fields:
                out.append(f"{where}: record must declare field specs")
            else:
                for f in self.fields:
                    out.extend(f.violations(f"{where}.{f.name}"))
        return out

    def to_dict(self) -> dict:
        d: dict[str, Any] = {"name": self.name, "type": self.semantic_type, "required": self.required}
        if self.units is not None:
            d["units"] = self.units
        if self.constraints is not None:
            d["constraints"] = self.constraints
        if self.values is not None:
            d["values"] = self.values
        if self.item is not None:
            d["item"] = self.item.to_dict()
        if self.fields is not None:
            d["fields"] = [f.to_dict() for f in self.fields]
        return d

    @classmethod
    def from_dict(cls, d: Mapping) -> "ParamSpec":
        return cls(
            name=d["name"],
            semantic_type=d["type"],
            units=d.get("units"),
            required=d.get("required", True),
            constraints=d.get("constraints"),
            values=d.get("values"),
            item=cls.from_dict(d["item"]) if d.get("item") else None,
            fields=[cls.from_dict(f) for f in d["fields"]] if d.get("fields") else None,
        )


def check_value(spec: ParamSpec, value: Any, where: str = "") -> list[str]:
    """Engine-side schema check of one value against a ParamSpec.

    This is the registry's boundary check; the contract shim re-validates
    inside the tool process (defense in depth, two independent routes).
    """
    where = where or spec.name
    t = spec.semantic_type
    out: list[str] = []
    if t == "integer":
        if not isinstance(value, int) or isinstance(value, bool):
            return [f"{where}: expected integer, got {type(value).__name__}"]
    elif t == "number":
        if not isinstance(value, (int, float)) or isinstance(value, bool):
            return [f"{where}: expected number, got {type(value).__name__}"]
    elif t in ("string", "file-path"):
        if not isinstance(value, str):
            return [f"{where}: expected string, got {type(value).__name__}"]
    elif t == "boolean":
        if not isinstance(value, bool):
            return [f"{where}: expected boolean, got {type(value).__name__}"]
    elif t == "enum":
        if value not in (spec.values or []):
            return [f"{where}: {value!r} not in enum {spec.values}"]
    elif t == "list":
        if not isinstance(value, list):
            return [f"{where}: expected list, got {type(value).__name__}"]
        for i, v in enumerate(value):
            out.extend(check_value(spec.item, v, f"{where}[{i}]"))
        return out
    elif t == "record":
        if not isinstance(value, dict):
            return [f"{where}: expected record, got {type(value).__name__}"]
        return _check_record(spec.fields or [], value, where)
    c = spec.constraints or {}
    if "min" in c and isinstance(value, (int, float)) and value < c["min"]:
        out.append(f"{where}: {value} below minimum {c['min']}")
    if "max" in c and isinstance(value, (int, float)) and value > c["max"]:
        out.append(f"{where}: {value} above maximum {c['max']}")
    if "regex" in c and isinstance(value, str) and not re.fullmatch(c["regex"], value):
        out.append(f"{where}: {value!r} does not match /{c['regex']}/")
    return out


def _check_record(specs: Sequence[ParamSpec], record: Mapping, where: str) -> list[str]:
    out: list[str] = []
    by_name = {s.name: s for s in specs}
    for s in specs:
        if s.name not in record:
            if s.required:
                out.append(f"{where}.{s.name}: required value missing")
            continue
        out.extend(check_value(s, record[s.name], f"{where}.{s.name}"))
    for k in record:
        if k not in by_name:
            out.append(f"{where}.{k}: unexpected value")
    return out


def check_record(specs: Sequence[ParamSpec], record: Mapping, where: str = "input") -> list[str]:
    return _check_record(specs, record, where)


@dataclass
class ToolManifest:
    """Identity, typed I/O schema, entrypoint, and provenance of a tool."""

    name: str
    description: str
    category_path: list[str] = field(default_factory=list)
    version: int = 1
    inputs: list[ParamSpec] = field(default_factory=list)
    outputs: list[ParamSpec] = field(default_factory=list)
    entrypoint: tuple[str, str] = ("", "")  # (source relative path, callable)
    provenance: dict = field(default_factory=dict)  # generated_by, task_id, created_at
    tests_passed: bool = False
    enforce_schemas: bool = True  # shim-side validation toggle; off only for fixtures
    probe_input: Optional[dict] = None  # manifest-declared conforming test input

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "description": self.description,
            "category_path": list(self.category_path),
            "version": self.version,
            "inputs": [p.to_dict() for p in self.inputs],
            "outputs": [p.to_dict() for p in self.outputs],
            "entrypoint": {"source": self.entrypoint[0], "callable": self.entrypoint[1]},
            "provenance": dict(self.provenance),
            "tests_passed": self.tests_passed,
            "enforce_schemas": self.enforce_schemas,
            "probe_input": self.probe_input,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2) + "\n"

    @classmethod
    def from_dict(cls, d: Mapping) -> "ToolManifest":
        ep = d.get("entrypoint") or {}
        return cls(
            name=d["name"],
            description=d.get("description", ""),
            category_path=list(d.get("category_path", [])),
            version=int(d.get("version", 1)),
            inputs=[ParamSpec.from_dict(p) for p in d.get("inputs", [])],
            outputs=[ParamSpec.from_dict(p) for p in d.get("outputs", [])],
            entrypoint=(ep.get("source", ""), ep.get("callable", "")),
            provenance=dict(d.get("provenance", {})),
            tests_passed=bool(d.get("tests_passed", False)),
            enforce_schemas=bool(d.get("enforce_schemas", True)),
            probe_input=d.get("probe_input"),
        )

    @classmethod
    def load(cls, path: Path) -> "ToolManifest":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


@dataclass(frozen=True)
class CategoryNode:
    path: tuple[str, ...]
    subcategories: tuple[str, ...]
    tools: tuple[str, ...]


def validate_manifest(manifest: ToolManifest) -> list[str]:
    """Return the list of contract violations; empty means valid."""
    out: list[str] = []
    if not manifest.name:
        out.append("name: empty")
    elif not _NAME_RE.match(manifest.name):
        out.append(f"name: invalid identifier {manifest.name!r}")
    if not manifest.description:
        out.append("description: empty")
    for part in manifest.category_path:
        if not _NAME_RE.match(part):
            out.append(f"category_path: invalid segment {part!r}")
    if manifest.version < 1:
        out.append("version: must be >= 1")
    for p in manifest.inputs:
        out.extend(p.violations(f"inputs.{p.name}"))
    for p in manifest.outputs:
        out.extend(p.violations(f"outputs.{p.name}"))
    src, func = manifest.entrypoint
    if not src:
        out.append("entrypoint: source file missing")
    if not func or not _NAME_RE.match(func):
        out.append(f"entrypoint: invalid callable {func!r}")
    for key in ("generated_by", "task_id", "created_at"):
        if not manifest.provenance.get(key):
            out.append(f"provenance.{key}: missing")
    return out


def _category_dir(root: Path, path: Sequence[str]) -> Path:
    d = Path(root)
    for part in path:
        d = d / part
    return d


def _is_hidden(name: str) -> bool:
    return name.startswith(".")


def _manifest_paths(root: Path) -> list[Path]:
    root = Path(root)
    found = []
    for p in sorted(root.rglob(f"*{MANIFEST_SUFFIX}")):
        if any(_is_hidden(part) for part in p.relative_to(root).parts):
            continue
        found.append(p)
    return found


def _source_path_for(manifest_path: Path, manifest: ToolManifest) -> Path:
    return manifest_path.parent / manifest.entrypoint[0]


def register(manifest: ToolManifest, source: bytes, root: Path) -> Path:
    """Write a tool's source and manifest sidecar into the tree.

    Collision policy: re-registering byte-identical content is a no-op;
    changed content bumps the version and replaces the tool in place (at its
    current location, which may have been moved by reorganization). A same
    version with different content is only an error when auto-bumping is
    bypassed, which the engine never does.
    """
    root = Path(root)
    violations = validate_manifest(manifest)
    if violations:
        raise ManifestValidationError(violations)
    if not manifest.tests_passed:
        raise ManifestValidationError(["tests_passed: must be true before registration"])
    with writer_lock(root):
        existing = _find_by_name(root, manifest.name)
        if len(existing) > 1:
            raise AmbiguousToolError(f"duplicate manifests for {manifest.name!r}")
        if existing:
            existing_path = existing[0]
            current = ToolManifest.load(existing_path)
            current_source = _source_path_for(existing_path, current).read_bytes()
            same = current_source == source and _content_equal(current, manifest)
            if same:
                return existing_path
            bumped = ToolManifest.from_dict(manifest.to_dict())
            bumped.version = current.version + 1
            bumped.category_path = list(current.category_path)
            target_dir = existing_path.parent
            _source_path_for(existing_path, current).unlink()
            _write_tool(target_dir, bumped, source)
            return target_dir / f"{manifest.name}{MANIFEST_SUFFIX}"
        target_dir = _category_dir(root, manifest.category_path)
        target_dir.mkdir(parents=True, exist_ok=True)
        _write_tool(target_dir, manifest, source)
        return target_dir / f"{manifest.name}{MANIFEST_SUFFIX}"


def _content_equal(a: ToolManifest, b: ToolManifest) -> bool:
    da, db = a.to_dict(), b.to_dict()
    for d in (da, db):
        d.pop("version", None)
        d.pop("category_path", None)
        d.get("provenance", {}).pop("created_at", None)
    return da == db


def _write_tool(target_dir: Path, manifest: ToolManifest, source: bytes) -> None:
    src_name = manifest.entrypoint[0]
    (target_dir / src_name).write_bytes(source)
    (target_dir / f"{manifest.name}{MANIFEST_SUFFIX}").write_text(
        manifest.to_json(), encoding="utf-8"
    )


def _find_by_name(root: Path, name: str) -> list[Path]:
    return [p for p in _manifest_paths(root) if p.name == f"{name}{MANIFEST_SUFFIX}"]


def list_children(root: Path, path: Sequence[str] = ()) -> CategoryNode:
    """Immediate subcategories and tools of one category; never recurses."""
    d = _category_dir(root, path)
    if not d.is_dir():
        raise CategoryNotFoundError("/".join(path) or "(root)")
    subs, tools = [], []
    for entry in sorted(d.iterdir(), key=lambda p: p.name):
        if _is_hidden(entry.name) or entry.name == INDEX_NAME:
            continue
        if entry.is_dir():
            subs.append(entry.name)
        elif entry.name.endswith(MANIFEST_SUFFIX):
            tools.append(entry.name[: -len(MANIFEST_SUFFIX)])
    return CategoryNode(path=tuple(path), subcategories=tuple(subs), tools=tuple(tools))


def resolve(root: Path, name: str) -> tuple[ToolManifest, Path]:
    """Find the unique tool with this name anywhere in the tree."""
    hits = _find_by_name(root, name)
    if not hits:
        raise ToolNotFoundError(name)
    if len(hits) > 1:
        raise AmbiguousToolError(f"{name!r} found in {len(hits)} locations")
    manifest = ToolManifest.load(hits[0])
    return manifest, _source_path_for(hits[0], manifest)


def iter_manifests(root: Path) -> list[tuple[ToolManifest, Path]]:
    """All manifests in the tree with their sidecar paths, sorted by path."""
    return [(ToolManifest.load(p), p) for p in _manifest_paths(root)]


def generate_index(root: Path) -> str:
    """Write a deterministic INDEX.md: categories depth-first, entries sorted."""
    root = Path(root)
    lines = ["# Tool Index", ""]

    def emit(path: tuple[str, ...]) -> None:
        node = list_children(root, path)
        label = "/".join(path) or "(root)"
        lines.append(f"## {label}")
        for name in node.tools:
            manifest = ToolManifest.load(_category_dir(root, path) / f"{name}{MANIFEST_SUFFIX}")
            first_line = manifest.description.strip().splitlines()[0] if manifest.description else ""
            lines.append(f"- {name} — {first_line}")
        lines.append("")
        for sub in node.subcategories:
            emit(path + (sub,))

    with writer_lock(root):
        emit(())
        text = "\n".join(lines).rstrip("\n") + "\n"
        (root / INDEX_NAME).write_text(text, encoding="utf-8")
    return text


def invoke_tool(
    root: Path,
    name: str,
    input: Mapping,
    executor: ExecutorConfig,
    logs_dir: Optional[Path] = None,
    shim_command: Sequence[str] = DEFAULT_SHIM_COMMAND,
    timeout: float = 120.0,
) -> dict:
    """Invoke a tool through the wire contract and return its parsed output.

    Inputs are schema-checked before dispatch; outputs are schema-checked
    after. A structured tool failure is re-raised verbatim as
    :class:`ToolInvocationError`, never swallowed or defaulted.
    """
    manifest, source_path = resolve(root, name)
    violations = check_record(manifest.inputs, input, "input")
    if violations:
        raise InputSchemaError("; ".join(violations))
    # The shim runs with its own cwd; the manifest path must survive that.
    manifest_path = (source_path.parent / f"{name}{MANIFEST_SUFFIX}").resolve()
    wire_input = json.dumps({"tool": name, "inputs": dict(input)}).encode("utf-8")
    job = JobRequest(
        command=[*shim_command, str(manifest_path)],
        working_dir=source_path.parent,
        timeout=timeout,
        label=f"invoke_{name}",
        stdin_data=wire_input,
    )
    result = submit(job, logs_dir or source_path.parent, executor)
    raw = Path(result.stdout_log).read_bytes().strip()
    if not raw:
        raise ToolInvocationError(
            "WireProtocolError",
            f"tool produced no wire output (exit {result.exit_code})",
            detail=shlex.join(job.command),
        )
    try:
        doc = json.loads(raw.decode("utf-8"))
    except (ValueError, UnicodeDecodeError) as exc:
        raise ToolInvocationError("WireProtocolError", f"unparseable wire output: {exc}") from exc
    if not isinstance(doc, dict) or "ok" not in doc:
        raise ToolInvocationError("WireProtocolError", "wire output missing 'ok' field")
    if not doc["ok"]:
        raise ToolInvocationError(
            str(doc.get("error_type", "UnknownError")),
            str(doc.get("message", "")),
            detail=doc.get("detail"),
        )
    outputs = doc.get("outputs")
    if not isinstance(outputs, dict):
        raise OutputSchemaError("ok=true document carried no outputs record")
    violations = check_record(manifest.outputs, outputs, "output")
    if violations:
        raise OutputSchemaError("; ".join(violations))
    return outputs
