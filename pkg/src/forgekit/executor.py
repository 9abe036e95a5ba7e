"""Command execution: local subprocesses or batch-scheduler submission.

Both paths produce the same artifacts: timestamped stdout/stderr logs named
``<UTC YYYYMMDD_HHMMSS>_<label>.out|.err`` and one :class:`JobResult` per
job. Retries are caller policy, never executor policy.

Benchmark runs force the local path even when a scheduler is configured
(``force_local``), so results are reproducible on a single machine; real
submission is restored by flipping that flag.
"""

from __future__ import annotations

import shlex
import subprocess
import time
import re
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Optional, Sequence

from .errors import ForgekitError

TIMEOUT_EXIT_CODE = 124

LOG_NAME_RE = re.compile(r"^[0-9]{8}_[0-9]{6}_.+\.(out|err)$")

_TERMINAL_STATES = frozenset({"COMPLETED", "FAILED", "CANCELLED", "TIMEOUT"})


class ExecutorError(ForgekitError):
    pass


class SpawnError(ExecutorError):
    pass


class SubmitError(ExecutorError):
    """The scheduler rejected the job."""


class PollTimeoutError(ExecutorError):
    pass


class LogNotFoundError(ExecutorError):
    pass


@dataclass
class Resources:
    cpus: int = 1
    mem_mb: int = 1024
    time_limit: float = 3600.0  # seconds

    def overridden_by(self, override: Optional["Resources"]) -> "Resources":
        # A job's resource block replaces the defaults wholesale when present.
        return override if override is not None else self


@dataclass
class JobRequest:
    command: list[str]
    working_dir: Path
    env_overrides: dict[str, str] = field(default_factory=dict)
    timeout: float = 600.0
    resources: Optional[Resources] = None
    label: str = "job"
    stdin_data: Optional[bytes] = None  # local backend only (wire-protocol input)

    def __post_init__(self) -> None:
        if not self.command:
            raise ValueError("command must be nonempty")
        if self.timeout <= 0:
            raise ValueError("timeout must be positive")


@dataclass
class JobResult:
    exit_code: int
    stdout_log: Path
    stderr_log: Path
    wall_time: float
    timed_out: bool = False


@dataclass
class ExecutorConfig:
    backend: str = "local"  # "local" | "slurm"
    slurm_defaults: Resources = field(default_factory=Resources)
    poll_interval: float = 1.0
    force_local: bool = True  # benchmark mode: simulate scheduler with subprocesses
    submit_command: list[str] = field(default_factory=lambda: ["sbatch", "{script}"])
    poll_command: list[str] = field(default_factory=lambda: ["squeue-state", "{job_id}"])
    job_id_pattern: str = r"(\d+)"

    def __post_init__(self) -> None:
        if self.backend == "slurm" and self.poll_interval <= 0:
            raise ValueError("poll_interval must be positive for the slurm backend")


def _logs_dir_of(ws) -> Path:
    return Path(getattr(ws, "logs_dir", ws))


def _log_stem(logs_dir: Path, label: str, now: Optional[datetime] = None) -> str:
    """UTC-timestamped log stem; same-second collisions get a label suffix."""
    now = now or datetime.now(timezone.utc)
    ts = now.strftime("%Y%m%d_%H%M%S")
    stem = f"{ts}_{label}"
    n = 2
    while (logs_dir / f"{stem}.out").exists() or (logs_dir / f"{stem}.err").exists():
        stem = f"{ts}_{label}-{n}"
        n += 1
    return stem


def submit(job: JobRequest, ws, config: ExecutorConfig) -> JobResult:
    """Run a job to completion and return its result.

    ``ws`` is either a workspace path bundle (its ``logs_dir`` is used) or a
    plain directory for the logs.
    """
    logs_dir = _logs_dir_of(ws)
    logs_dir.mkdir(parents=True, exist_ok=True)
    if not Path(job.working_dir).is_dir():
        raise SpawnError(f"working dir does not exist: {job.working_dir}")
    if config.backend == "slurm" and not config.force_local:
        return _submit_slurm(job, logs_dir, config)
    return _submit_local(job, logs_dir)


def _submit_local(job: JobRequest, logs_dir: Path) -> JobResult:
    stem = _log_stem(logs_dir, job.label)
    out_path = logs_dir / f"{stem}.out"
    err_path = logs_dir / f"{stem}.err"
    env = None
    if job.env_overrides:
        import os

        env = dict(os.environ)
        env.update(job.env_overrides)
    started = time.monotonic()
    # Streaming both pipes straight into files means the child can never
    # block on a full pipe no matter how much it writes.
    with open(out_path, "wb") as out_f, open(err_path, "wb") as err_f:
        try:
            proc = subprocess.Popen(
                job.command,
                cwd=str(job.working_dir),
                env=env,
                stdout=out_f,
                stderr=err_f,
                stdin=subprocess.PIPE if job.stdin_data is not None else subprocess.DEVNULL,
            )
        except OSError as exc:
            raise SpawnError(f"failed to spawn {job.command[0]!r}: {exc}") from exc
        timed_out = False
        try:
            proc.communicate(input=job.stdin_data, timeout=job.timeout)
            exit_code = proc.returncode
        except subprocess.TimeoutExpired:
            proc.kill()
            proc.communicate()
            timed_out = True
            exit_code = TIMEOUT_EXIT_CODE
    return JobResult(
        exit_code=exit_code,
        stdout_log=out_path,
        stderr_log=err_path,
        wall_time=time.monotonic() - started,
        timed_out=timed_out,
    )


def render_slurm_script(
    job: JobRequest,
    defaults: Resources,
    log_stem: str = "00000000_000000_job",
    logs_dir: str = "logs",
) -> str:
    """Render a deterministic batch submission script.

    Byte-identical for identical inputs; the caller supplies the log stem so
    rendering itself stays pure.
    """
    res = defaults.overridden_by(job.resources)
    total = int(res.time_limit)
    hh, rem = divmod(total, 3600)
    mm, ss = divmod(rem, 60)
    lines = [
        "#!/bin/bash",
        f"#SBATCH --job-name={job.label}",
        f"#SBATCH --cpus-per-task={res.cpus}",
        f"#SBATCH --mem={res.mem_mb}M",
        f"#SBATCH --time={hh:02d}:{mm:02d}:{ss:02d}",
        f"#SBATCH --output={logs_dir}/{log_stem}.out",
        f"#SBATCH --error={logs_dir}/{log_stem}.err",
        "",
        f"cd {shlex.quote(str(job.working_dir))}",
    ]
    for key in sorted(job.env_overrides):
        lines.append(f"export {key}={shlex.quote(job.env_overrides[key])}")
    lines.append(shlex.join(job.command))
    return "\n".join(lines) + "\n"


def _run_argv(template: Sequence[str], **subs: str) -> subprocess.CompletedProcess:
    argv = [part.format(**subs) for part in template]
    return subprocess.run(argv, capture_output=True, text=True)


def _submit_slurm(job: JobRequest, logs_dir: Path, config: ExecutorConfig) -> JobResult:
    if job.stdin_data is not None:
        raise SubmitError("stdin payloads are only supported by the local backend")
    stem = _log_stem(logs_dir, job.label)
    script_path = logs_dir / f"{stem}.sbatch"
    script = render_slurm_script(job, config.slurm_defaults, log_stem=stem, logs_dir=str(logs_dir))
    script_path.write_text(script, encoding="utf-8")

    started = time.monotonic()
    proc = _run_argv(config.submit_command, script=str(script_path))
    if proc.returncode != 0:
        raise SubmitError(proc.stderr.strip() or f"submit exited {proc.returncode}")
    m = re.search(config.job_id_pattern, proc.stdout)
    if not m:
        raise SubmitError(f"could not parse job id from {proc.stdout!r}")
    job_id = m.group(1)

    state = "PENDING"
    deadline = time.monotonic() + job.timeout
    while state not in _TERMINAL_STATES:
        if time.monotonic() > deadline:
            raise PollTimeoutError(f"job {job_id} not terminal after {job.timeout}s")
        time.sleep(config.poll_interval)
        poll = _run_argv(config.poll_command, job_id=job_id)
        state = poll.stdout.strip().upper() or state

    out_path = logs_dir / f"{stem}.out"
    err_path = logs_dir / f"{stem}.err"
    for p in (out_path, err_path):
        if not p.exists():
            p.write_bytes(b"")
    timed_out = state == "TIMEOUT"
    exit_code = 0 if state == "COMPLETED" else (TIMEOUT_EXIT_CODE if timed_out else 1)
    return JobResult(
        exit_code=exit_code,
        stdout_log=out_path,
        stderr_log=err_path,
        wall_time=time.monotonic() - started,
        timed_out=timed_out,
    )


def tail_log(path: Path, n: int) -> str:
    """Last ``n`` lines of a log file, order preserved."""
    path = Path(path)
    if n < 1:
        raise ValueError("n must be positive")
    if not path.exists():
        raise LogNotFoundError(str(path))
    lines = path.read_text(encoding="utf-8", errors="replace").splitlines()
    return "\n".join(lines[-n:])
