"""Executor for one-shot tools.

Each job runs the tool's entry point as a child process in a private job
directory::

    {data_dir}/jobs/{job_id}/
        inputs/       uploaded input files
        outputs/      whatever the tool writes; collected after exit
        params.json   effective parameters (defaults filled in)

The entry point is invoked with the params.json path as its single argument,
cwd set to the job directory and SSELAB_JOB_ID in its environment. The child
gets its own session so a timeout can kill the whole process group.

Job directories are deleted by a sweeper thread once the terminal result has
been retrieved and the retention window has passed.
"""

from __future__ import annotations

import json
import os
import re
import shutil
import signal
import subprocess
import threading
import time
import uuid
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Mapping

from sselab import errors
from sselab.model import PluginManifest
from sselab.ostp.params import fill_defaults, validate_params

LOG_CAP_BYTES = 1 << 20
TRUNCATION_MARKER = "\n[log truncated at 1 MiB]\n"
INPUT_CAP_BYTES = 64 << 20
DEFAULT_TIMEOUT_S = 60.0
TIMEOUT_CAP_S = 600.0
TERMINAL_STATUSES = ("succeeded", "failed", "timeout", "rejected")

_INPUT_SEGMENT_RE = re.compile(r"[A-Za-z0-9._-]{1,255}")


@dataclass(frozen=True)
class JobSpec:
    """Everything needed to run one job."""

    manifest: PluginManifest
    plugin_dir: Path
    params: Mapping[str, Any]
    inputs: tuple[tuple[str, bytes], ...] = ()
    timeout_s: float | None = None


@dataclass(frozen=True)
class JobResult:
    job_id: str
    service_id: str
    version: str
    status: str
    exit_code: int | None
    stdout_log: str
    stderr_log: str
    outputs: tuple[str, ...]
    created_at: float
    finished_at: float | None

    @property
    def terminal(self) -> bool:
        return self.status in TERMINAL_STATUSES

    @property
    def duration_ms(self) -> int:
        if self.finished_at is None:
            return 0
        return max(0, int(round((self.finished_at - self.created_at) * 1000)))

    def to_wire(self) -> dict:
        doc = {
            "job_id": self.job_id,
            "service_id": self.service_id,
            "version": self.version,
            "status": self.status,
            "stdout_log": self.stdout_log,
            "stderr_log": self.stderr_log,
            "outputs": list(self.outputs),
            "duration_ms": self.duration_ms,
        }
        if self.exit_code is not None:
            doc["exit_code"] = self.exit_code
        return doc

    @classmethod
    def from_wire(cls, doc: Mapping[str, Any]) -> "JobResult":
        duration_ms = doc.get("duration_ms", 0)
        return cls(
            job_id=doc["job_id"],
            service_id=doc["service_id"],
            version=doc["version"],
            status=doc["status"],
            exit_code=doc.get("exit_code"),
            stdout_log=doc.get("stdout_log", ""),
            stderr_log=doc.get("stderr_log", ""),
            outputs=tuple(doc.get("outputs", ())),
            created_at=0.0,
            finished_at=duration_ms / 1000.0,
        )


def check_input_name(name: str) -> str:
    """Accept relative file paths; anything escaping the inputs dir is refused."""
    if not name or name.startswith("/") or "\\" in name:
        raise errors.BadInputName(f"unacceptable input file name {name!r}")
    for segment in name.split("/"):
        if not _INPUT_SEGMENT_RE.fullmatch(segment) or segment in (".", ".."):
            raise errors.BadInputName(f"unacceptable input file name {name!r}")
    return name


def check_input_names(inputs: tuple[tuple[str, bytes], ...]) -> None:
    seen = set()
    for name, _ in inputs:
        check_input_name(name)
        if name in seen:
            raise errors.BadInputName(f"duplicate input file name {name!r}")
        seen.add(name)


def stage_job(jobs_root: Path, job_id: str, params: Mapping[str, Any],
              inputs: tuple[tuple[str, bytes], ...]) -> Path:
    job_dir = jobs_root / job_id
    (job_dir / "inputs").mkdir(parents=True)
    (job_dir / "outputs").mkdir()
    for name, data in inputs:
        path = job_dir / "inputs" / check_input_name(name)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_bytes(data)
    params_blob = json.dumps(dict(params), sort_keys=True, indent=2) + "\n"
    (job_dir / "params.json").write_text(params_blob, encoding="utf-8")
    return job_dir


def _read_log(path: Path) -> str:
    try:
        with open(path, "rb") as fh:
            data = fh.read(LOG_CAP_BYTES + 1)
    except OSError:
        return ""
    text = data[:LOG_CAP_BYTES].decode("utf-8", errors="replace")
    if len(data) > LOG_CAP_BYTES:
        text += TRUNCATION_MARKER
    return text


def invoke(manifest: PluginManifest, plugin_dir: Path, job_dir: Path,
           job_id: str, timeout_s: float) -> tuple[str, int | None, str, str]:
    """Run the tool entry; returns (status, exit_code, stdout_log, stderr_log)."""
    entry = plugin_dir / manifest.entry
    if not entry.is_file():
        raise errors.SpawnFailed(f"entry point {manifest.entry!r} not found")
    stdout_path = job_dir / ".stdout"
    stderr_path = job_dir / ".stderr"
    env = dict(os.environ)
    env["SSELAB_JOB_ID"] = job_id
    with open(stdout_path, "wb") as out, open(stderr_path, "wb") as err:
        try:
            proc = subprocess.Popen(
                [str(entry), str(job_dir / "params.json")],
                cwd=str(job_dir), env=env,
                stdout=out, stderr=err, stdin=subprocess.DEVNULL,
                start_new_session=True)
        except OSError as exc:
            raise errors.SpawnFailed(f"could not start {entry}: {exc}")
        try:
            exit_code = proc.wait(timeout=timeout_s)
            status = "succeeded" if exit_code == 0 else "failed"
        except subprocess.TimeoutExpired:
            try:
                os.killpg(proc.pid, signal.SIGKILL)
            except (ProcessLookupError, PermissionError):
                pass
            proc.wait()
            status, exit_code = "timeout", None
    return status, exit_code, _read_log(stdout_path), _read_log(stderr_path)


def collect_outputs(job_dir: Path) -> tuple[str, ...]:
    """Every regular file under outputs/, named relative to outputs/."""
    outputs_dir = job_dir / "outputs"
    if not outputs_dir.is_dir():
        return ()
    names = [path.relative_to(outputs_dir).as_posix()
             for path in outputs_dir.rglob("*") if path.is_file()]
    return tuple(sorted(names))


class _Job:
    __slots__ = ("job_id", "spec", "created_at", "status", "exit_code",
                 "stdout_log", "stderr_log", "outputs", "finished_at",
                 "retrieved_at", "done")

    def __init__(self, job_id: str, spec: JobSpec):
        self.job_id = job_id
        self.spec = spec
        self.created_at = time.time()
        self.status = "queued"
        self.exit_code: int | None = None
        self.stdout_log = ""
        self.stderr_log = ""
        self.outputs: tuple[str, ...] = ()
        self.finished_at: float | None = None
        self.retrieved_at: float | None = None
        self.done = threading.Event()

    def snapshot(self) -> JobResult:
        return JobResult(
            job_id=self.job_id,
            service_id=self.spec.manifest.id,
            version=self.spec.manifest.version,
            status=self.status,
            exit_code=self.exit_code,
            stdout_log=self.stdout_log,
            stderr_log=self.stderr_log,
            outputs=self.outputs,
            created_at=self.created_at,
            finished_at=self.finished_at,
        )


class OstpExecutor:
    """Bounded-concurrency job runner with result retention."""

    def __init__(self, data_dir: Path | str, max_concurrent_jobs: int = 4,
                 default_timeout_s: float = DEFAULT_TIMEOUT_S,
                 timeout_cap_s: float = TIMEOUT_CAP_S,
                 job_ttl_seconds: float = 3600.0,
                 sweep_interval_s: float | None = None):
        self.jobs_root = Path(data_dir) / "jobs"
        self.jobs_root.mkdir(parents=True, exist_ok=True)
        self.default_timeout_s = default_timeout_s
        self.timeout_cap_s = timeout_cap_s
        self.job_ttl_seconds = job_ttl_seconds
        self._jobs: dict[str, _Job] = {}
        self._lock = threading.RLock()
        self._pool = ThreadPoolExecutor(
            max_workers=max_concurrent_jobs, thread_name_prefix="ostp-job")
        self._stop = threading.Event()
        interval = sweep_interval_s or max(0.2, min(5.0, job_ttl_seconds / 4))
        self._sweeper = threading.Thread(
            target=self._sweep_loop, args=(interval,), daemon=True,
            name="ostp-sweeper")
        self._sweeper.start()

    # -- submission ----------------------------------------------------------

    def submit(self, spec: JobSpec) -> str:
        job_id = uuid.uuid4().hex
        check_input_names(spec.inputs)
        job = _Job(job_id, spec)

        total_input = sum(len(data) for _, data in spec.inputs)
        if total_input > INPUT_CAP_BYTES:
            self._finish(job, "rejected", None, "",
                         f"total input size {total_input} exceeds the "
                         f"{INPUT_CAP_BYTES} byte cap")
            with self._lock:
                self._jobs[job_id] = job
            return job_id

        report = validate_params(spec.manifest, spec.params)
        if not report.ok:
            lines = [f"{f.code}: {f.message}" for f in report.findings]
            self._finish(job, "rejected", None, "", "\n".join(lines) + "\n")
            with self._lock:
                self._jobs[job_id] = job
            return job_id

        with self._lock:
            self._jobs[job_id] = job
        self._pool.submit(self._run, job)
        return job_id

    def _effective_timeout(self, spec: JobSpec) -> float:
        timeout = spec.timeout_s if spec.timeout_s else self.default_timeout_s
        return max(0.1, min(float(timeout), self.timeout_cap_s))

    def _run(self, job: _Job) -> None:
        spec = job.spec
        with self._lock:
            job.status = "running"
        try:
            effective = fill_defaults(spec.manifest, spec.params)
            job_dir = stage_job(self.jobs_root, job.job_id, effective,
                                spec.inputs)
        except OSError as exc:
            self._finish(job, "failed", None, "", f"staging failed: {exc}")
            return
        try:
            status, exit_code, out_log, err_log = invoke(
                spec.manifest, spec.plugin_dir, job_dir, job.job_id,
                self._effective_timeout(spec))
        except errors.ApiError as exc:
            self._finish(job, "failed", None, "", exc.message,
                         collect_outputs(job_dir))
            return
        self._finish(job, status, exit_code, out_log, err_log,
                     collect_outputs(job_dir))

    def _finish(self, job: _Job, status: str, exit_code: int | None,
                stdout_log: str, stderr_log: str,
                outputs: tuple[str, ...] = ()) -> None:
        with self._lock:
            job.status = status
            job.exit_code = exit_code
            job.stdout_log = stdout_log
            job.stderr_log = stderr_log
            job.outputs = outputs
            job.finished_at = time.time()
        job.done.set()

    # -- retrieval -----------------------------------------------------------

    def _get(self, job_id: str) -> _Job:
        with self._lock:
            job = self._jobs.get(job_id)
        if job is None:
            raise errors.NoSuchJob(f"no job {job_id!r}")
        return job

    def result(self, job_id: str, wait_s: float | None = None) -> JobResult:
        """Snapshot the job; waits up to wait_s for a terminal state.

        Fetching a terminal result starts the retention clock.
        """
        job = self._get(job_id)
        if wait_s:
            job.done.wait(wait_s)
        with self._lock:
            snap = job.snapshot()
            if snap.terminal and job.retrieved_at is None:
                job.retrieved_at = time.time()
        return snap

    def output_bytes(self, job_id: str, name: str) -> bytes:
        job = self._get(job_id)
        with self._lock:
            outputs = job.outputs
        if name not in outputs:
            raise errors.NotFound(f"job {job_id} has no output {name!r}")
        path = self.jobs_root / job_id / "outputs" / name
        try:
            return path.read_bytes()
        except OSError:
            raise errors.NotFound(f"output {name!r} is no longer retained")

    def active_for(self, service_id: str, version: str) -> bool:
        """True while any job for that tool version has not finished."""
        with self._lock:
            return any(
                job.spec.manifest.id == service_id
                and job.spec.manifest.version == version
                and job.status not in TERMINAL_STATUSES
                for job in self._jobs.values())

    def running_count(self) -> int:
        with self._lock:
            return sum(1 for job in self._jobs.values()
                       if job.status not in TERMINAL_STATUSES)

    # -- retention -----------------------------------------------------------

    def sweep_now(self) -> int:
        """Drop jobs whose retention window has passed; returns count."""
        cutoff = time.time() - self.job_ttl_seconds
        with self._lock:
            expired = [job_id for job_id, job in self._jobs.items()
                       if job.retrieved_at is not None
                       and job.retrieved_at <= cutoff]
            for job_id in expired:
                del self._jobs[job_id]
        for job_id in expired:
            shutil.rmtree(self.jobs_root / job_id, ignore_errors=True)
        return len(expired)

    def _sweep_loop(self, interval: float) -> None:
        while not self._stop.wait(interval):
            self.sweep_now()

    def shutdown(self) -> None:
        self._stop.set()
        self._pool.shutdown(wait=True, cancel_futures=True)
