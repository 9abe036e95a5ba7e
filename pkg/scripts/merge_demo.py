#!/usr/bin/env python3
"""Toolset merge demo: 18 fixture tools with three near-duplicate pairs.

Installs the fixture corpus, clusters tool summaries with the deterministic
hash embedder, merges each pair through the verification-with-rollback
pipeline, and prints the before/after inventory.

Usage: python scripts/merge_demo.py [--target DIR]
"""

import argparse
import subprocess
import sys
import tempfile
from pathlib import Path

from forgekit.backends import MockBackend
from forgekit.embedding import HashEmbedder
from forgekit.executor import ExecutorConfig
from forgekit.optimizer import (
    apply_merge_with_rollback,
    embed_and_cluster,
    extract_signatures,
    propose_merge,
    tool_count,
)


def unified_payload(unified: str, supersedes: list[str], optional_flag: str | None) -> dict:
    inputs = [{"name": "value", "type": "number", "required": True}]
    signature = "value"
    if optional_flag:
        inputs.append({"name": optional_flag, "type": "boolean", "required": False})
        signature = f"value, {optional_flag}=False"
    return {
        "merge": True,
        "unified_name": unified,
        "unified_source": f"def {unified}({signature}):\n    return {{'value': float(value)}}\n",
        "supersedes": supersedes,
        "rationale": "capabilities folded behind one interface",
        "manifest": {
            "name": unified,
            "description": f"Unified replacement for {' and '.join(supersedes)}.",
            "category_path": [],
            "version": 1,
            "inputs": inputs,
            "outputs": [{"name": "value", "type": "number", "required": True}],
            "entrypoint": {"source": f"{unified}.py", "callable": unified},
            "provenance": {
                "generated_by": "mock",
                "task_id": "merge_demo",
                "created_at": "2026-01-02T00:00:00+00:00",
            },
            "tests_passed": True,
            "enforce_schemas": True,
            "probe_input": {"value": 1.0},
        },
    }


PROPOSALS = {
    ("optimize_geometry", "optimize_geometry_solvated"): unified_payload(
        "optimize_geometry", ["optimize_geometry", "optimize_geometry_solvated"], "solvated"
    ),
    ("single_point_energy", "single_point_energy_solvated"): unified_payload(
        "single_point_energy", ["single_point_energy", "single_point_energy_solvated"], "solvated"
    ),
    ("thermochemistry_report", "vibrational_frequencies"): unified_payload(
        "hessian_analysis", ["thermochemistry_report", "vibrational_frequencies"], None
    ),
}


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--target", help="toolset directory (default: a temp dir)")
    args = parser.parse_args()

    root = Path(args.target) if args.target else Path(tempfile.mkdtemp(prefix="merge_demo_")) / "toolset"
    subprocess.run(
        [sys.executable, "-m", "toolshim", "install-fixtures", str(root),
         "--no-core", "--pairs", "3", "--fillers", "12"],
        check=True,
    )

    before = tool_count(root)
    clusters = embed_and_cluster(extract_signatures(root), HashEmbedder(), 0.85)
    print(f"clusters found: {len(clusters)}")
    for cluster in clusters:
        print(f"  {' + '.join(cluster.members)} (similarity {cluster.similarity:.3f})")

    entries = {str(i + 1): {"proposal": PROPOSALS[c.members]} for i, c in enumerate(clusters)}
    merger = MockBackend({root.name: {"tool-merge": entries}})
    reviewer = MockBackend({root.name: {"tool-review": {"*": {"review": {"verdict": "approved"}}}}})
    executor = ExecutorConfig()

    for cluster in clusters:
        proposal = propose_merge(cluster, root, merger)
        if proposal is None:
            continue
        outcome = apply_merge_with_rollback(proposal, root, reviewer, executor)
        print(f"  {proposal.unified_name}: {outcome.kind} after {outcome.attempts} attempt(s)")

    print(f"tools: {before} → {tool_count(root)}")
    print(f"toolset: {root}")


if __name__ == "__main__":
    main()
