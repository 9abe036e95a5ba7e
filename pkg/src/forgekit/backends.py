"""Agent backend interface: external CLI adapters and the scripted mock.

A backend does exactly one thing: run a single isolated session from an
:class:`AgentRequest` and report what happened. No conversational state
survives between sessions; the only shared medium is the workspace files.

The mock backend replays a playbook keyed by ``(task_id, stage, n-th call)``
and is the deterministic substrate for every offline test: identical
playbook and keys produce byte-identical artifacts and token usage.
"""

from __future__ import annotations

import json
import subprocess
import tempfile
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping, Optional, Protocol, Sequence

from .errors import ForgekitError


class BackendError(ForgekitError):
    pass


class BackendUnavailableError(BackendError):
    pass


class SessionTimeoutError(BackendError):
    pass


class PlaybookMissError(BackendError):
    """No playbook entry for this (task, stage, call) key: a test-authoring bug."""


@dataclass(frozen=True)
class TokenUsage:
    input: int = 0
    cache_write: int = 0
    cache_read: int = 0
    output: int = 0

    def __post_init__(self) -> None:
        for name in ("input", "cache_write", "cache_read", "output"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} tokens must be >= 0")

    def __add__(self, other: "TokenUsage") -> "TokenUsage":
        return TokenUsage(
            input=self.input + other.input,
            cache_write=self.cache_write + other.cache_write,
            cache_read=self.cache_read + other.cache_read,
            output=self.output + other.output,
        )

    @classmethod
    def from_dict(cls, d: Mapping) -> "TokenUsage":
        return cls(
            input=int(d.get("input", 0)),
            cache_write=int(d.get("cache_write", 0)),
            cache_read=int(d.get("cache_read", 0)),
            output=int(d.get("output", 0)),
        )

    def to_dict(self) -> dict:
        return {
            "input": self.input,
            "cache_write": self.cache_write,
            "cache_read": self.cache_read,
            "output": self.output,
        }


@dataclass
class AgentRequest:
    stage: str
    prompt: str
    workspace_root: Path
    attachments: list[Path] = field(default_factory=list)
    session_budget: Optional[float] = None  # seconds

    def __post_init__(self) -> None:
        if not self.prompt:
            raise ValueError("prompt must be nonempty")


@dataclass
class AgentResponse:
    transcript: list[tuple[str, str]] = field(default_factory=list)  # (step kind, summary)
    artifacts_written: list[str] = field(default_factory=list)
    token_usage: TokenUsage = field(default_factory=TokenUsage)
    exit_status: str = "ok"  # "ok" | "failed:<reason>"
    payload: Optional[dict] = None  # structured stage result (plan, verdict, review, ...)

    @property
    def ok(self) -> bool:
        return self.exit_status == "ok"


class AgentBackend(Protocol):
    id: str
    model: str

    def spawn_session(self, req: AgentRequest) -> AgentResponse: ...


def load_playbook(path: Path) -> dict:
    return json.loads(Path(path).read_text(encoding="utf-8"))


class MockBackend:
    """Deterministic scripted backend.

    Playbook shape::

        {"<task_id>": {"<stage>": {"<n>": entry, "*": entry}}}

    where ``n`` counts calls of that (task, stage) pair from 1 and ``"*"``
    is a fallback for any call count. An entry may carry:

    - ``files``: [{"path": rel, "content": str}] written under the workspace
    - ``commands``: argv lists run in the workspace via the job executor
    - ``payload`` (or the shorthands ``plan`` / ``evaluation`` / ``review`` /
      ``verdict`` / ``reorg`` / ``proposal``): the stage's structured result
    - ``token_usage``: synthetic usage counts
    - ``exit_status``: defaults to "ok"

    Evaluation-stage entries with an ``evaluation`` payload also write
    ``evaluation.json`` into the workspace, since that file is the
    evaluator's contract.
    """

    id = "mock"
    model = "mock"

    _PAYLOAD_KEYS = ("plan", "evaluation", "review", "verdict", "reorg", "proposal")

    def __init__(self, playbook: Mapping, executor=None, executor_config=None):
        self.playbook = playbook
        self._executor_config = executor_config
        self._calls: dict[tuple[str, str], int] = {}
        self.requests: list[AgentRequest] = []  # recorded for assertions

    def spawn_session(self, req: AgentRequest) -> AgentResponse:
        self.requests.append(req)
        task_id = Path(req.workspace_root).name
        key = (task_id, req.stage)
        self._calls[key] = self._calls.get(key, 0) + 1
        n = self._calls[key]
        entry = self._lookup(task_id, req.stage, n)

        root = Path(req.workspace_root)
        artifacts: list[str] = []
        transcript: list[tuple[str, str]] = []
        for spec in entry.get("files", []):
            rel = spec["path"]
            dest = root / rel
            if not dest.resolve().is_relative_to(root.resolve()):
                raise BackendError(f"playbook file escapes workspace: {rel}")
            dest.parent.mkdir(parents=True, exist_ok=True)
            if "content" in spec:
                dest.write_text(spec["content"], encoding="utf-8")
            else:
                import base64

                dest.write_bytes(base64.b64decode(spec["content_b64"]))
            artifacts.append(rel)
            transcript.append(("write", rel))

        for argv in entry.get("commands", []):
            transcript.append(("run", " ".join(argv)))
            if self._executor_config is not None:
                from .executor import JobRequest, submit

                submit(
                    JobRequest(command=list(argv), working_dir=root, label=f"{req.stage}_cmd"),
                    root / "logs" if (root / "logs").is_dir() else root,
                    self._executor_config,
                )
            else:
                subprocess.run(argv, cwd=root, capture_output=True)

        payload = entry.get("payload")
        for k in self._PAYLOAD_KEYS:
            if k in entry:
                payload = dict(payload or {})
                payload[k] = entry[k]
        if req.stage == "evaluation" and payload and "evaluation" in payload:
            eval_path = root / "evaluation.json"
            eval_path.write_text(json.dumps(payload["evaluation"], indent=2), encoding="utf-8")
            if "evaluation.json" not in artifacts:
                artifacts.append("evaluation.json")

        if not transcript:
            transcript.append(("note", f"scripted {req.stage} session"))
        return AgentResponse(
            transcript=transcript,
            artifacts_written=artifacts,
            token_usage=TokenUsage.from_dict(entry.get("token_usage", {})),
            exit_status=entry.get("exit_status", "ok"),
            payload=payload,
        )

    def _lookup(self, task_id: str, stage: str, n: int) -> Mapping:
        stages = self.playbook.get(task_id)
        entry = None
        if stages is not None:
            by_call = stages.get(stage)
            if by_call is not None:
                entry = by_call.get(str(n), by_call.get("*"))
        if entry is None:
            raise PlaybookMissError(f"no playbook entry for ({task_id!r}, {stage!r}, {n})")
        return entry

    def session_count(self, stage: str, task_id: Optional[str] = None) -> int:
        return sum(
            c
            for (t, s), c in self._calls.items()
            if s == stage and (task_id is None or t == task_id)
        )


class ExternalCliBackend:
    """Adapter that treats a coding-agent CLI as a black box.

    The command template gets ``{prompt_file}`` and ``{workspace}``
    substituted; the prompt is handed over via a temp file. Transcript
    parsing is best-effort (stdout lines); token usage is read from an
    optional JSON file the CLI is configured to drop in the workspace.
    """

    def __init__(
        self,
        backend_id: str,
        command_template: Sequence[str],
        model: str = "",
        usage_file: Optional[str] = None,
        timeout: float = 3600.0,
    ):
        self.id = backend_id
        self.model = model or backend_id
        self.command_template = list(command_template)
        self.usage_file = usage_file
        self.timeout = timeout

    def spawn_session(self, req: AgentRequest) -> AgentResponse:
        with tempfile.NamedTemporaryFile("w", suffix=".md", delete=False) as f:
            f.write(req.prompt)
            prompt_file = f.name
        argv = [
            part.format(prompt_file=prompt_file, workspace=str(req.workspace_root))
            for part in self.command_template
        ]
        budget = req.session_budget or self.timeout
        try:
            proc = subprocess.run(
                argv,
                cwd=str(req.workspace_root),
                capture_output=True,
                text=True,
                timeout=budget,
            )
        except FileNotFoundError as exc:
            raise BackendUnavailableError(f"agent CLI not found: {argv[0]}") from exc
        except subprocess.TimeoutExpired as exc:
            raise SessionTimeoutError(f"session exceeded {budget}s") from exc
        transcript = [("output", line) for line in proc.stdout.splitlines() if line.strip()]
        usage = TokenUsage()
        if self.usage_file:
            usage_path = Path(req.workspace_root) / self.usage_file
            if usage_path.exists():
                try:
                    usage = TokenUsage.from_dict(json.loads(usage_path.read_text()))
                except (ValueError, TypeError):
                    pass  # usage capture is best-effort by design
        status = "ok" if proc.returncode == 0 else f"failed:exit {proc.returncode}"
        return AgentResponse(transcript=transcript, token_usage=usage, exit_status=status)


def backend_for(backends: Any, stage: str) -> AgentBackend:
    """Resolve a backend for a stage from either one backend or a mapping."""
    if isinstance(backends, Mapping):
        if stage in backends:
            return backends[stage]
        if "default" in backends:
            return backends["default"]
        raise BackendError(f"no backend configured for stage {stage!r}")
    return backends
