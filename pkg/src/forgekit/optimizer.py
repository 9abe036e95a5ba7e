"""Toolset optimization: hierarchy reorganization and near-duplicate merging.

Reorganization is threshold-driven: any directory whose direct child count
(tools plus subdirectories) exceeds the threshold gets split into proposed
subcategories, conserving the (name, source digest) multiset and keeping
every tool resolvable.

Merging is the riskier pipeline, so it is transactional: superseded tools
are backed up byte-identically first, the unified replacement must pass a
behavioral contract check and a review (with one feedback retry), and any
re-failure restores the original set exactly. The registry only ever ends
in the full pre-state or the full post-state.
"""

from __future__ import annotations

import datetime as _dt
import json
import shutil
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Optional, Sequence

import numpy as np

from . import registry as reg
from .backends import AgentBackend, AgentRequest
from .embedding import EmbeddingProvider, as_matrix, cosine_matrix
from .errors import ForgekitError
from .executor import ExecutorConfig
from .forge import check_manifest
from .registry import ToolManifest
from .workspace import _digest

DEFAULT_CHILD_THRESHOLD = 10
DEFAULT_SIM_THRESHOLD = 0.85

BACKUP_DIR_NAME = ".merge_backup"


class OptimizerError(ForgekitError):
    pass


class InvalidPlanError(OptimizerError):
    pass


class InvalidProposalError(OptimizerError):
    pass


@dataclass
class ReorgPlan:
    target_dir: tuple[str, ...]
    new_subcategories: list[tuple[str, list[str]]]
    unmoved: list[str]
    flagged: bool = False  # best-effort plan leaves the dir still oversized


@dataclass(frozen=True)
class MergeCluster:
    members: tuple[str, ...]
    similarity: float


@dataclass
class MergeProposal:
    cluster: MergeCluster
    unified_name: str
    unified_source: bytes
    unified_manifest: ToolManifest
    supersedes: list[str]
    rationale: str = ""


@dataclass
class BackupSnapshot:
    backup_dir: Path
    entries: list[tuple[str, str]]  # (original relative path, digest)


@dataclass
class MergeOutcome:
    kind: str  # "merged" | "rolled_back"
    reason: str = ""
    attempts: int = 0
    backup: Optional[BackupSnapshot] = None


def scan_oversized(root: Path, threshold: int = DEFAULT_CHILD_THRESHOLD) -> list[tuple[str, ...]]:
    """Every category whose direct child count strictly exceeds the threshold."""
    if threshold < 1:
        raise ValueError("threshold must be >= 1")
    root = Path(root)
    oversized: list[tuple[str, ...]] = []

    def walk(path: tuple[str, ...]) -> None:
        node = reg.list_children(root, path)
        if len(node.subcategories) + len(node.tools) > threshold:
            oversized.append(path)
        for sub in node.subcategories:
            walk(path + (sub,))

    walk(())
    return oversized


def propose_reorg(
    dir_path: Sequence[str],
    tools_root: Path,
    backend: AgentBackend,
    threshold: int = DEFAULT_CHILD_THRESHOLD,
) -> ReorgPlan:
    """Ask the backend to group a directory's tools into new subcategories.

    The plan is validated structurally (membership partitions a subset of
    the directory's tools, subcategories nonempty, names fresh). A plan that
    leaves the directory oversized is accepted but flagged: the optimizer is
    best-effort.

    Optimizer sessions run against the toolset root, so scripted playbooks
    key them by the toolset directory's name.
    """
    node = reg.list_children(tools_root, dir_path)
    listing = []
    for name in node.tools:
        manifest, _ = reg.resolve(tools_root, name)
        listing.append(f"- {name}: {manifest.description.strip().splitlines()[0]}")
    prompt = (
        "Stage: toolset reorganization.\n\n"
        f"Category {'/'.join(dir_path) or '(root)'} has {len(node.tools)} tools and "
        f"{len(node.subcategories)} subdirectories (threshold {threshold}).\n"
        "Group the tools below into new subcategories by function.\n\n" + "\n".join(listing)
    )
    response = backend.spawn_session(
        AgentRequest(stage="toolset-reorg", prompt=prompt, workspace_root=Path(tools_root))
    )
    if not response.ok:
        raise OptimizerError(f"reorg session failed: {response.exit_status}")
    raw = (response.payload or {}).get("reorg")
    if raw is None:
        raise InvalidPlanError("reorg session produced no plan payload")
    subcats: list[tuple[str, list[str]]] = []
    seen_members: set[str] = set()
    existing = set(node.subcategories) | set(node.tools)
    for item in raw.get("new_subcategories", []):
        name, members = item["name"], list(item["members"])
        if not members:
            raise InvalidPlanError(f"empty subcategory {name!r}")
        if name in existing:
            raise InvalidPlanError(f"subcategory name {name!r} collides with an existing child")
        for m in members:
            if m not in node.tools:
                raise InvalidPlanError(f"{m!r} is not a tool directly in the target directory")
            if m in seen_members:
                raise InvalidPlanError(f"{m!r} assigned to more than one subcategory")
            seen_members.add(m)
        subcats.append((name, members))
    unmoved = [t for t in node.tools if t not in seen_members]
    # Still-oversized check on the simulated result of applying the plan.
    child_count_after = len(node.subcategories) + len(subcats) + len(unmoved)
    return ReorgPlan(
        target_dir=tuple(dir_path),
        new_subcategories=subcats,
        unmoved=unmoved,
        flagged=child_count_after > threshold,
    )


def apply_reorg(
    plan: ReorgPlan,
    tools_root: Path,
    _failpoint: Optional[Callable[[int], None]] = None,
) -> None:
    """Move tools into the plan's new subcategories, atomically.

    Each move relocates the source and its manifest sidecar and rewrites the
    manifest's category path. On any failure every completed move is
    reversed, so a crash mid-plan leaves the pre-plan tree. The index is
    regenerated after a successful application.

    ``_failpoint(n)`` is a test hook invoked after the n-th move.
    """
    tools_root = Path(tools_root)
    target = tools_root
    for part in plan.target_dir:
        target = target / part
    done: list[tuple[str, Path, Path, list[str]]] = []

    with reg.writer_lock(tools_root):
        try:
            count = 0
            for subcat, members in plan.new_subcategories:
                dest_dir = target / subcat
                dest_dir.mkdir(parents=True, exist_ok=True)
                for name in members:
                    manifest_path = target / f"{name}{reg.MANIFEST_SUFFIX}"
                    manifest = ToolManifest.load(manifest_path)
                    source_path = target / manifest.entrypoint[0]
                    old_category = list(manifest.category_path)
                    shutil.move(str(source_path), str(dest_dir / source_path.name))
                    shutil.move(str(manifest_path), str(dest_dir / manifest_path.name))
                    manifest.category_path = list(plan.target_dir) + [subcat]
                    (dest_dir / manifest_path.name).write_text(manifest.to_json(), encoding="utf-8")
                    done.append((name, dest_dir, target, old_category))
                    count += 1
                    if _failpoint is not None:
                        _failpoint(count)
        except Exception:
            _undo_moves(done)
            raise
        reg.generate_index(tools_root)


def _undo_moves(done: list) -> None:
    for name, dest_dir, origin_dir, old_category in reversed(done):
        manifest_path = dest_dir / f"{name}{reg.MANIFEST_SUFFIX}"
        manifest = ToolManifest.load(manifest_path)
        source_path = dest_dir / manifest.entrypoint[0]
        shutil.move(str(source_path), str(origin_dir / source_path.name))
        manifest.category_path = old_category
        (origin_dir / manifest_path.name).write_text(manifest.to_json(), encoding="utf-8")
        manifest_path.unlink()
        if not any(dest_dir.iterdir()):
            dest_dir.rmdir()


def optimize_toolset(
    tools_root: Path,
    backend: AgentBackend,
    threshold: int = DEFAULT_CHILD_THRESHOLD,
    max_passes: int = 10,
) -> int:
    """Scan/propose/apply until no directory is oversized. Returns pass count."""
    passes = 0
    for _ in range(max_passes):
        oversized = scan_oversized(tools_root, threshold)
        if not oversized:
            break
        for dir_path in oversized:
            plan = propose_reorg(dir_path, tools_root, backend, threshold)
            apply_reorg(plan, tools_root)
        passes += 1
    return passes


def extract_signatures(tools_root: Path) -> list[tuple[str, str]]:
    """One deterministic summary line per tool: rendered signature + description."""
    out = []
    for manifest, _path in reg.iter_manifests(tools_root):
        sig_in = ", ".join(f"{p.name}: {p.semantic_type}" for p in manifest.inputs)
        sig_out = ", ".join(f"{p.name}: {p.semantic_type}" for p in manifest.outputs)
        desc = manifest.description.strip().splitlines()[0] if manifest.description else ""
        out.append((manifest.name, f"{manifest.name}({sig_in}) -> {sig_out} — {desc}"))
    return sorted(out)


def cluster_from_similarity(
    names: Sequence[str], sims: np.ndarray, sim_threshold: float
) -> list[MergeCluster]:
    """Single-linkage clusters over pairs at or above the threshold.

    Size-1 clusters are dropped; a cluster's similarity is its maximum
    pairwise similarity.
    """
    n = len(names)
    parent = list(range(n))

    def find(i: int) -> int:
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for i in range(n):
        for j in range(i + 1, n):
            if sims[i, j] >= sim_threshold:
                parent[find(i)] = find(j)

    groups: dict[int, list[int]] = {}
    for i in range(n):
        groups.setdefault(find(i), []).append(i)
    clusters = []
    for members in groups.values():
        if len(members) < 2:
            continue
        best = max(sims[i, j] for i in members for j in members if i < j)
        clusters.append(
            MergeCluster(members=tuple(sorted(names[i] for i in members)), similarity=float(best))
        )
    return sorted(clusters, key=lambda c: c.members)


def embed_and_cluster(
    summaries: Sequence[tuple[str, str]],
    embedder: EmbeddingProvider,
    sim_threshold: float = DEFAULT_SIM_THRESHOLD,
) -> list[MergeCluster]:
    if not 0 < sim_threshold < 1:
        raise ValueError("sim_threshold must be in (0, 1)")
    if not summaries:
        return []
    names = [name for name, _ in summaries]
    matrix = as_matrix(embedder.embed([text for _, text in summaries]))
    return cluster_from_similarity(names, cosine_matrix(matrix), sim_threshold)


def propose_merge(
    cluster: MergeCluster,
    tools_root: Path,
    backend: AgentBackend,
) -> Optional[MergeProposal]:
    """Ask the backend whether and how to unify a cluster.

    Returns None on a no-merge verdict. A proposal superseding anything
    outside the cluster is invalid.
    """
    for name in cluster.members:
        reg.resolve(tools_root, name)
    listing = "\n".join(f"- {n}" for n in cluster.members)
    prompt = (
        "Stage: tool merge.\n\n"
        "These tools look functionally overlapping. Decide whether to merge\n"
        "them into one unified tool whose inputs cover the union of their\n"
        f"capabilities, or leave them unchanged.\n\n{listing}"
    )
    response = backend.spawn_session(
        AgentRequest(stage="tool-merge", prompt=prompt, workspace_root=Path(tools_root))
    )
    if not response.ok:
        raise OptimizerError(f"merge session failed: {response.exit_status}")
    raw = (response.payload or {}).get("proposal")
    if raw is None or raw.get("merge") is False:
        return None
    return _proposal_from_payload(raw, cluster)


def _proposal_from_payload(raw: dict, cluster: MergeCluster) -> MergeProposal:
    supersedes = list(raw.get("supersedes", []))
    outside = [s for s in supersedes if s not in cluster.members]
    if outside:
        raise InvalidProposalError(f"supersedes tools outside the cluster: {outside}")
    if not supersedes:
        raise InvalidProposalError("proposal supersedes nothing")
    manifest = ToolManifest.from_dict(raw["manifest"])
    return MergeProposal(
        cluster=cluster,
        unified_name=raw["unified_name"],
        unified_source=raw["unified_source"].encode("utf-8"),
        unified_manifest=manifest,
        supersedes=supersedes,
        rationale=raw.get("rationale", ""),
    )


def _backup_tools(tools_root: Path, names: Sequence[str]) -> BackupSnapshot:
    stamp = _dt.datetime.now(_dt.timezone.utc).strftime("%Y%m%d_%H%M%S_%f")
    backup_dir = Path(tools_root) / BACKUP_DIR_NAME / stamp
    entries: list[tuple[str, str]] = []
    for name in names:
        manifest, source_path = reg.resolve(tools_root, name)
        manifest_path = source_path.parent / f"{name}{reg.MANIFEST_SUFFIX}"
        for p in (source_path, manifest_path):
            rel = p.relative_to(tools_root).as_posix()
            dest = backup_dir / rel
            dest.parent.mkdir(parents=True, exist_ok=True)
            shutil.copy2(p, dest)
            entries.append((rel, _digest(p.read_bytes())))
    return BackupSnapshot(backup_dir=backup_dir, entries=entries)


def _restore_backup(tools_root: Path, backup: BackupSnapshot) -> None:
    for rel, _digest_hex in backup.entries:
        src = backup.backup_dir / rel
        dest = Path(tools_root) / rel
        dest.parent.mkdir(parents=True, exist_ok=True)
        shutil.copy2(src, dest)


def apply_merge_with_rollback(
    proposal: MergeProposal,
    tools_root: Path,
    reviewer_backend: AgentBackend,
    executor: ExecutorConfig,
    shim_command: Sequence[str] = reg.DEFAULT_SHIM_COMMAND,
    _failpoint: Optional[Callable[[str], None]] = None,
) -> MergeOutcome:
    """Verify the unified tool and commit the merge, or roll everything back.

    Verification = behavioral contract check plus one review session, staged
    outside the registry. First failure sends feedback to the backend for
    one revised attempt; a second failure restores the originals
    byte-identically from the backup. The backup directory survives every
    path, success included.
    """
    tools_root = Path(tools_root)
    with reg.writer_lock(tools_root):
        backup = _backup_tools(tools_root, proposal.supersedes)
        staging = backup.backup_dir / ".staging"
        staging.mkdir(parents=True, exist_ok=True)

        attempts = 0
        failure_reason = ""
        current = proposal
        while attempts < 2:
            attempts += 1
            manifest = ToolManifest.from_dict(current.unified_manifest.to_dict())
            manifest.name = current.unified_name
            manifest.entrypoint = (f"{current.unified_name}.py", manifest.entrypoint[1] or current.unified_name)
            (staging / manifest.entrypoint[0]).write_bytes(current.unified_source)
            manifest_path = staging / f"{manifest.name}{reg.MANIFEST_SUFFIX}"
            manifest_path.write_text(manifest.to_json(), encoding="utf-8")

            check = check_manifest(manifest_path, executor, logs_dir=staging, shim_command=shim_command)
            review_ok, review_issues = _review_merge(current, reviewer_backend, tools_root)
            if check.passed and review_ok:
                progress: dict = {}
                try:
                    _commit_merge(tools_root, current, manifest, progress, _failpoint)
                except Exception:
                    # Unregister whatever this commit wrote, then restore the
                    # originals: full pre-state, never a hybrid.
                    registered = progress.get("registered_manifest")
                    if registered and Path(registered).exists():
                        written = ToolManifest.load(registered)
                        (Path(registered).parent / written.entrypoint[0]).unlink(missing_ok=True)
                        Path(registered).unlink(missing_ok=True)
                    _restore_backup(tools_root, backup)
                    raise
                reg.generate_index(tools_root)
                return MergeOutcome(kind="merged", attempts=attempts, backup=backup)
            failure_reason = "; ".join([*check.reasons, *review_issues]) or "verification failed"
            if attempts < 2:
                current = _retry_proposal(current, failure_reason, reviewer_backend, tools_root)

        _restore_backup(tools_root, backup)
        return MergeOutcome(kind="rolled_back", reason=failure_reason, attempts=attempts, backup=backup)


def _review_merge(
    proposal: MergeProposal, backend: AgentBackend, tools_root: Path
) -> tuple[bool, list[str]]:
    prompt = (
        "Stage: tool review.\n\n"
        f"Review the unified tool {proposal.unified_name!r} replacing "
        f"{', '.join(proposal.supersedes)}. Verdict: approved or revise."
    )
    response = backend.spawn_session(
        AgentRequest(stage="tool-review", prompt=prompt, workspace_root=Path(tools_root))
    )
    if not response.ok:
        raise OptimizerError(f"merge review session failed: {response.exit_status}")
    raw = (response.payload or {}).get("review") or {}
    verdict = raw.get("verdict", "revise")
    return verdict == "approved", list(raw.get("issues", []))


def _retry_proposal(
    proposal: MergeProposal, failure_reason: str, backend: AgentBackend, tools_root: Path
) -> MergeProposal:
    prompt = (
        "Stage: tool merge.\n\n"
        f"The unified tool {proposal.unified_name!r} failed verification:\n"
        f"{failure_reason}\n\nRevise the merged implementation and try again."
    )
    response = backend.spawn_session(
        AgentRequest(stage="tool-merge", prompt=prompt, workspace_root=Path(tools_root))
    )
    if not response.ok:
        raise OptimizerError(f"merge retry session failed: {response.exit_status}")
    raw = (response.payload or {}).get("proposal")
    if raw is None or raw.get("merge") is False:
        return proposal  # backend declined to revise; re-verify as-is
    return _proposal_from_payload(raw, proposal.cluster)


def _commit_merge(
    tools_root: Path,
    proposal: MergeProposal,
    manifest: ToolManifest,
    progress: dict,
    _failpoint: Optional[Callable[[str], None]],
) -> None:
    for name in proposal.supersedes:
        _, source_path = reg.resolve(tools_root, name)
        manifest_path = source_path.parent / f"{name}{reg.MANIFEST_SUFFIX}"
        source_path.unlink()
        manifest_path.unlink()
        if _failpoint is not None:
            _failpoint(f"deleted:{name}")
    registered = ToolManifest.from_dict(manifest.to_dict())
    registered.tests_passed = True
    registered.category_path = []
    progress["registered_manifest"] = reg.register(registered, proposal.unified_source, tools_root)
    if _failpoint is not None:
        _failpoint("registered")


def tool_count(tools_root: Path) -> int:
    return len(reg.iter_manifests(tools_root))


def merge_pipeline(
    tools_root: Path,
    backend: AgentBackend,
    reviewer_backend: AgentBackend,
    embedder: EmbeddingProvider,
    executor: ExecutorConfig,
    sim_threshold: float = DEFAULT_SIM_THRESHOLD,
    shim_command: Sequence[str] = reg.DEFAULT_SHIM_COMMAND,
) -> list[MergeOutcome]:
    """Full merge pass: signatures, clustering, proposal, guarded application."""
    outcomes = []
    clusters = embed_and_cluster(extract_signatures(tools_root), embedder, sim_threshold)
    for cluster in clusters:
        proposal = propose_merge(cluster, tools_root, backend)
        if proposal is None:
            continue
        outcomes.append(
            apply_merge_with_rollback(
                proposal, tools_root, reviewer_backend, executor, shim_command=shim_command
            )
        )
    return outcomes
