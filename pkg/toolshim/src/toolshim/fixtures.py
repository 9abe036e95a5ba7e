"""Fixture tool corpus.

Installs a deterministic set of manifest-described tools into a toolset
directory, in the engine's on-disk layout (``<name>.py`` plus
``<name>.manifest.json`` at the root). The corpus covers the behaviors the
orchestration engine's tests need from real tool processes:

- strict arithmetic tools (``add``, ``stats``) that honor the wire contract;
- a deliberately broken ``silent_scale`` that swallows errors and returns a
  default, for negative contract tests (its manifest disables shim-side
  schema enforcement so the bad behavior is reachable);
- a ``slow_echo`` tool for timeout tests;
- category-filler no-op tools with descriptive manifests, including
  near-duplicate pairs whose summaries embed close together, for
  reorganization and merge tests.

Installation is byte-deterministic (fixed provenance timestamp), so
repeated installs of the same selection are identical.
"""

from __future__ import annotations

import json
from pathlib import Path

FIXTURE_TIMESTAMP = "2026-01-01T00:00:00+00:00"


def _param(name: str, ptype: str, **extra) -> dict:
    d = {"name": name, "type": ptype, "required": extra.pop("required", True)}
    d.update(extra)
    return d


def _manifest(
    name: str,
    description: str,
    inputs: list[dict],
    outputs: list[dict],
    probe_input: dict | None,
    enforce_schemas: bool = True,
) -> dict:
    return {
        "name": name,
        "description": description,
        "category_path": [],
        "version": 1,
        "inputs": inputs,
        "outputs": outputs,
        "entrypoint": {"source": f"{name}.py", "callable": name},
        "provenance": {
            "generated_by": "fixture-corpus",
            "task_id": "fixtures",
            "created_at": FIXTURE_TIMESTAMP,
        },
        "tests_passed": True,
        "enforce_schemas": enforce_schemas,
        "probe_input": probe_input,
    }


_ADD_SOURCE = '''\
def add(a, b):
    """Add two integers and return their sum."""
    return {"sum": a + b}
'''

_STATS_SOURCE = '''\
def stats(values):
    """Mean and count of a nonempty list of numbers."""
    if not values:
        raise ValueError("values must be nonempty")
    return {"mean": sum(values) / len(values), "count": len(values)}
'''

_SILENT_SCALE_SOURCE = '''\
def silent_scale(**kwargs):
    """Scale x by factor. Deliberately broken: swallows every error."""
    try:
        return {"result": int(kwargs["x"]) * int(kwargs["factor"])}
    except Exception:
        return {"result": 0}
'''

_SLOW_ECHO_SOURCE = '''\
import time


def slow_echo(text, delay_s):
    """Echo text back after sleeping for delay_s seconds."""
    time.sleep(delay_s)
    return {"text": text}
'''


def _core_tools() -> list[tuple[dict, str]]:
    return [
        (
            _manifest(
                "add",
                "Add two integers and return their sum.",
                [_param("a", "integer"), _param("b", "integer")],
                [_param("sum", "integer")],
                {"a": 2, "b": 3},
            ),
            _ADD_SOURCE,
        ),
        (
            _manifest(
                "stats",
                "Mean and count of a nonempty list of numbers.",
                [_param("values", "list", item=_param("element", "number"))],
                [_param("mean", "number"), _param("count", "integer")],
                {"values": [1.0, 2.0, 3.0]},
            ),
            _STATS_SOURCE,
        ),
        (
            _manifest(
                "silent_scale",
                "Scale an integer by a factor.",
                [_param("x", "integer"), _param("factor", "integer")],
                [_param("result", "integer")],
                {"x": 3, "factor": 2},
                enforce_schemas=False,
            ),
            _SILENT_SCALE_SOURCE,
        ),
        (
            _manifest(
                "slow_echo",
                "Echo a text string back after a configurable delay.",
                [_param("text", "string"), _param("delay_s", "number")],
                [_param("text", "string")],
                {"text": "hi", "delay_s": 0.01},
            ),
            _SLOW_ECHO_SOURCE,
        ),
    ]


def _numeric_tool(name: str, description: str, arg: str, out: str) -> tuple[dict, str]:
    source = (
        f"def {name}({arg}):\n"
        f'    """{description}"""\n'
        f"    return {{{out!r}: float({arg})}}\n"
    )
    manifest = _manifest(
        name,
        description,
        [_param(arg, "number")],
        [_param(out, "number")],
        {arg: 1.0},
    )
    return manifest, source


_PAIR_SPECS = [
    (
        (
            "single_point_energy",
            "Compute the single point electronic energy of a molecular geometry "
            "at a chosen method and basis set in the gas phase.",
        ),
        (
            "single_point_energy_solvated",
            "Compute the single point electronic energy of a molecular geometry "
            "at a chosen method and basis set in implicit solvent.",
        ),
    ),
    (
        (
            "optimize_geometry",
            "Optimize a molecular geometry to its minimum energy structure "
            "with a chosen method and basis set in the gas phase.",
        ),
        (
            "optimize_geometry_solvated",
            "Optimize a molecular geometry to its minimum energy structure "
            "with a chosen method and basis set in implicit solvent.",
        ),
    ),
    (
        (
            "vibrational_frequencies",
            "Compute the molecular Hessian of an optimized structure with mass "
            "weighted projection of translation and rotation, then report the "
            "harmonic vibrational frequency spectrum of the structure.",
        ),
        (
            "thermochemistry_report",
            "Compute the molecular Hessian of an optimized structure with mass "
            "weighted projection of translation and rotation, then report the "
            "harmonic vibrational thermodynamic corrections of the structure.",
        ),
    ),
]

_FILLER_SPECS = [
    ("convert_line_notation", "Convert a molecular line notation string into an embedded three dimensional structure.", "depth"),
    ("plot_series_chart", "Draw a publication quality chart comparing several labelled data series on shared axes.", "width"),
    ("fit_decay_constant", "Fit an exponential decay curve to sampled measurements and report the fitted constant.", "rate"),
    ("build_lattice_graph", "Build the adjacency graph of a periodic lattice with configurable connectivity.", "spacing"),
    ("sample_random_state", "Draw a reproducible pseudo random quantum state vector from a seeded generator.", "seed_scale"),
    ("integrate_trajectory", "Integrate an ordinary differential equation trajectory with adaptive step control.", "step"),
    ("parse_table_file", "Parse a delimited text table file into typed columns with unit annotations.", "columns"),
    ("estimate_error_bars", "Bootstrap resampling confidence intervals for a scalar estimator over observations.", "resamples"),
    ("render_contour_map", "Render a filled contour map of a scalar field slice over a rectangular grid.", "levels"),
    ("align_point_clouds", "Rigidly align two labelled point clouds and report the residual deviation.", "tolerance_scale"),
    ("expand_basis_functions", "Expand a target function over an orthogonal basis and report truncation error.", "order"),
    ("schedule_retry_backoff", "Compute capped exponential backoff delays for a retry schedule.", "base_delay"),
    ("hash_dataset_rows", "Digest dataset rows into stable content identifiers for caching.", "rows"),
    ("trim_outlier_points", "Trim outlier points from a sample using a robust spread criterion.", "spread"),
    ("interpolate_missing", "Interpolate missing entries of a numeric sequence with monotone splines.", "window"),
    ("pack_job_payload", "Pack scattered result artifacts into one portable archive payload.", "count"),
    ("diff_spectra_peaks", "Match and difference peak positions between two measured spectra.", "shift"),
    ("normalize_units_table", "Normalize a table of quantities into one consistent unit system.", "factor"),
    ("cluster_reaction_paths", "Group sampled reaction paths by terminal state connectivity.", "paths"),
    ("verify_convergence_log", "Check a solver convergence log for stalls and oscillations.", "iterations"),
]


def corpus(core: bool = True, pairs: int = 3, fillers: int = 12) -> list[tuple[dict, str]]:
    """Assemble the selected fixture tools as (manifest, source) entries."""
    if not 0 <= pairs <= len(_PAIR_SPECS):
        raise ValueError(f"pairs must be in 0..{len(_PAIR_SPECS)}")
    if not 0 <= fillers <= len(_FILLER_SPECS):
        raise ValueError(f"fillers must be in 0..{len(_FILLER_SPECS)}")
    tools: list[tuple[dict, str]] = []
    if core:
        tools.extend(_core_tools())
    for first, second in _PAIR_SPECS[:pairs]:
        for name, description in (first, second):
            tools.append(_numeric_tool(name, description, "value", "value"))
    for name, description, arg in _FILLER_SPECS[:fillers]:
        tools.append(_numeric_tool(name, description, arg, "value"))
    return tools


def install_corpus(target: Path, core: bool = True, pairs: int = 3, fillers: int = 12) -> int:
    """Write the selected corpus into a toolset directory; returns tool count."""
    target = Path(target)
    target.mkdir(parents=True, exist_ok=True)
    tools = corpus(core=core, pairs=pairs, fillers=fillers)
    for manifest, source in tools:
        (target / f"{manifest['name']}.py").write_text(source, encoding="utf-8")
        (target / f"{manifest['name']}.manifest.json").write_text(
            json.dumps(manifest, indent=2) + "\n", encoding="utf-8"
        )
    return len(tools)
