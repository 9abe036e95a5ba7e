"""The wire protocol: one input document in, exactly one output document out.

Success::

    {"ok": true, "outputs": {...}}            exit 0

Failure::

    {"ok": false, "error_type": "...", "message": "...", "detail": ...}
    exit 1

Totality is the core guarantee: any byte stream on stdin yields exactly one
well-formed output document and a consistent exit code. A malformed stream
is an ``ok=false`` document with error type ``WireParseError``, never a
traceback and never silence.
"""

from __future__ import annotations

import importlib.util
import json
import sys
from pathlib import Path
from typing import Any, Optional

from .manifest import (
    InputValidationError,
    Manifest,
    OutputValidationError,
    validate_inputs,
    validate_outputs,
)


class ToolLoadError(Exception):
    pass


def _failure(error_type: str, message: str, detail: Optional[str] = None) -> dict:
    doc: dict[str, Any] = {"ok": False, "error_type": error_type, "message": message}
    if detail is not None:
        doc["detail"] = detail
    return doc


def _parse_wire_input(data: bytes, expected_tool: str) -> dict:
    try:
        text = data.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise ValueError(f"stdin is not UTF-8: {exc}") from exc
    doc = json.loads(text)
    if not isinstance(doc, dict):
        raise ValueError("wire input must be a JSON object")
    if "tool" not in doc or "inputs" not in doc:
        raise ValueError("wire input must carry 'tool' and 'inputs'")
    if doc["tool"] != expected_tool:
        raise ValueError(f"wire input names tool {doc['tool']!r}, manifest is {expected_tool!r}")
    if not isinstance(doc["inputs"], dict):
        raise ValueError("'inputs' must be a record")
    return doc


def _load_entrypoint(manifest: Manifest):
    source = manifest.source_path
    if not source.exists():
        raise ToolLoadError(f"entrypoint source missing: {source}")
    spec = importlib.util.spec_from_file_location(f"toolshim_tool_{manifest.name}", source)
    if spec is None or spec.loader is None:
        raise ToolLoadError(f"cannot load module from {source}")
    module = importlib.util.module_from_spec(spec)
    try:
        spec.loader.exec_module(module)
    except Exception as exc:
        raise ToolLoadError(f"import of {source.name} failed: {exc}") from exc
    fn = getattr(module, manifest.callable, None)
    if not callable(fn):
        raise ToolLoadError(f"{source.name} has no callable {manifest.callable!r}")
    return fn


def run_tool(manifest_path: Path, stdin_data: bytes) -> tuple[dict, int]:
    """Run one wire invocation; returns (output document, exit code).

    Never raises: every failure mode becomes an ok=false document carrying
    the exception's type name and message.
    """
    try:
        manifest = Manifest.load(manifest_path)
    except Exception as exc:
        return _failure("ManifestError", f"cannot read manifest {manifest_path}: {exc}"), 1

    try:
        wire = _parse_wire_input(stdin_data, manifest.name)
    except ValueError as exc:
        return _failure("WireParseError", str(exc)), 1

    inputs = wire["inputs"]
    try:
        if manifest.enforce_schemas:
            validate_inputs(manifest, inputs)
        fn = _load_entrypoint(manifest)
        result = fn(**inputs)
        if not isinstance(result, dict):
            raise OutputValidationError(
                f"entrypoint must return a record of outputs, got {type(result).__name__}"
            )
        if manifest.enforce_schemas:
            validate_outputs(manifest, result)
    except InputValidationError as exc:
        return _failure("InputValidationError", str(exc)), 1
    except OutputValidationError as exc:
        return _failure("OutputValidationError", str(exc)), 1
    except ToolLoadError as exc:
        return _failure("ToolLoadError", str(exc)), 1
    except TypeError as exc:
        # Signature mismatches land here; so do TypeErrors raised inside the
        # tool, which is fine: both are explicit failures of this invocation.
        return _failure("TypeError", str(exc)), 1
    except Exception as exc:
        return _failure(type(exc).__name__, str(exc)), 1
    return {"ok": True, "outputs": result}, 0


def run_tool_stdio(manifest_path: Path) -> int:
    """Process entry: stdin to stdout with the matching exit code."""
    data = sys.stdin.buffer.read()
    doc, code = run_tool(manifest_path, data)
    sys.stdout.write(json.dumps(doc) + "\n")
    sys.stdout.flush()
    return code
