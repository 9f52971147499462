"""Lifecycle and reverse proxy for base-service instances.

A base plugin's entry understands four actions, each invoked as
``<entry> <action> --dir <instance_dir> --port <port>``:

    provision   one-time setup of the instance directory; must exit 0
    serve       long-running HTTP server on the given loopback port
    configure   re-apply configuration (optional for the host)
    destroy     final cleanup before the directory is archived

Instances are child processes bound to loopback ports. The local port is
persisted for recovery but never leaves this process via the wire: clients
reach instances only through the proxy. Destroyed instance directories are
moved to ``{data_dir}/trash/`` rather than deleted."""

from __future__ import annotations

import json
import os
import signal
import socket
import subprocess
import threading
import time
import uuid
from dataclasses import dataclass, replace
from pathlib import Path

import httpx

from sselab import errors, wire

PROVISION_TIMEOUT_S = 30.0
SERVE_START_TIMEOUT_S = 10.0
DESTROY_TIMEOUT_S = 10.0
PROXY_TIMEOUT_S = 30.0


@dataclass(frozen=True)
class InstanceInfo:
    instance_id: str
    project_id: str
    service_id: str
    version: str
    local_port: int
    state: str  # running | stopped | failed
    created_at: float

    def to_wire(self) -> dict:
        # local_port stays private to the host
        return {
            "instance_id": self.instance_id,
            "project_id": self.project_id,
            "service_id": self.service_id,
            "version": self.version,
            "state": self.state,
            "created_at": self.created_at,
        }


def _free_port() -> int:
    with socket.socket() as sock:
        sock.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        sock.bind(("127.0.0.1", 0))
        return sock.getsockname()[1]


def _wait_listening(port: int, deadline: float) -> bool:
    while time.monotonic() < deadline:
        try:
            with socket.create_connection(("127.0.0.1", port), timeout=0.25):
                return True
        except OSError:
            time.sleep(0.05)
    return False


class InstanceManager:
    """Owns instance records, their child processes and the proxy."""

    def __init__(self, data_dir: Path | str, store,
                 serve_start_timeout_s: float = SERVE_START_TIMEOUT_S):
        self.data_dir = Path(data_dir)
        self.instances_root = self.data_dir / "instances"
        self.trash_root = self.data_dir / "trash"
        self.logs_root = self.data_dir / "logs"
        self.state_path = self.data_dir / "instances.json"
        for directory in (self.instances_root, self.trash_root, self.logs_root):
            directory.mkdir(parents=True, exist_ok=True)
        self.store = store
        self.serve_start_timeout_s = serve_start_timeout_s
        self._instances: dict[str, InstanceInfo] = {}
        self._procs: dict[str, subprocess.Popen] = {}
        self._pending: set[tuple[str, str]] = set()
        self._lock = threading.RLock()
        self._recover()

    # -- persistence ---------------------------------------------------------

    def _persist(self) -> None:
        with self._lock:
            docs = [dict(info.to_wire(), local_port=info.local_port)
                    for info in sorted(self._instances.values(),
                                       key=lambda i: i.instance_id)]
        blob = json.dumps({"instances": docs}, indent=2, sort_keys=True)
        tmp = self.state_path.with_suffix(".tmp")
        tmp.write_text(blob, encoding="utf-8")
        os.replace(tmp, self.state_path)

    def _recover(self) -> None:
        if not self.state_path.exists():
            return
        doc = json.loads(self.state_path.read_text(encoding="utf-8"))
        for entry in doc.get("instances", ()):
            info = InstanceInfo(
                instance_id=entry["instance_id"],
                project_id=entry["project_id"],
                service_id=entry["service_id"],
                version=entry["version"],
                local_port=entry["local_port"],
                state=entry["state"],
                created_at=entry["created_at"],
            )
            if info.state == "running":
                info = self._respawn(info)
            self._instances[info.instance_id] = info
        self._persist()

    def _respawn(self, info: InstanceInfo) -> InstanceInfo:
        try:
            manifest = self.store.manifest_for(info.service_id, info.version)
            plugin_dir = self.store.plugin_dir(info.service_id, info.version)
            proc = self._spawn_serve(manifest, plugin_dir,
                                     self.instances_root / info.instance_id,
                                     info.local_port, info.instance_id)
        except errors.ApiError:
            return replace(info, state="failed")
        deadline = time.monotonic() + self.serve_start_timeout_s
        if not _wait_listening(info.local_port, deadline):
            self._kill_proc(proc)
            return replace(info, state="failed")
        self._procs[info.instance_id] = proc
        return info

    # -- lifecycle -------------------------------------------------------------

    def _run_action(self, manifest, plugin_dir: Path, action: str,
                    instance_dir: Path, port: int,
                    timeout_s: float) -> subprocess.CompletedProcess:
        entry = plugin_dir / manifest.entry
        return subprocess.run(
            [str(entry), action, "--dir", str(instance_dir),
             "--port", str(port)],
            cwd=str(plugin_dir), capture_output=True, timeout=timeout_s)

    def _spawn_serve(self, manifest, plugin_dir: Path, instance_dir: Path,
                     port: int, instance_id: str) -> subprocess.Popen:
        entry = plugin_dir / manifest.entry
        log_path = self.logs_root / f"{instance_id}.log"
        log_file = open(log_path, "ab")
        try:
            return subprocess.Popen(
                [str(entry), "serve", "--dir", str(instance_dir),
                 "--port", str(port)],
                cwd=str(plugin_dir), stdout=log_file, stderr=log_file,
                stdin=subprocess.DEVNULL, start_new_session=True)
        except OSError as exc:
            raise errors.ProvisionFailed(f"could not start serve: {exc}")
        finally:
            log_file.close()

    @staticmethod
    def _kill_proc(proc: subprocess.Popen | None) -> None:
        if proc is None or proc.poll() is not None:
            return
        try:
            os.killpg(proc.pid, signal.SIGKILL)
        except (ProcessLookupError, PermissionError):
            pass
        proc.wait()

    def create(self, project_id: str, service_id: str,
               version: str) -> InstanceInfo:
        manifest = self.store.manifest_for(service_id, version)
        plugin_dir = self.store.plugin_dir(service_id, version)
        key = (project_id, service_id)
        with self._lock:
            occupied = key in self._pending or any(
                info.project_id == project_id
                and info.service_id == service_id
                and info.state == "running"
                for info in self._instances.values())
            if occupied:
                raise errors.AlreadyProvisioned(
                    f"project {project_id} already has an instance of "
                    f"{service_id}")
            self._pending.add(key)
        try:
            return self._create_locked_out(manifest, plugin_dir, project_id,
                                           service_id, version)
        finally:
            with self._lock:
                self._pending.discard(key)

    def _create_locked_out(self, manifest, plugin_dir, project_id: str,
                           service_id: str, version: str) -> InstanceInfo:
        instance_id = uuid.uuid4().hex
        instance_dir = self.instances_root / instance_id
        instance_dir.mkdir()
        port = _free_port()
        try:
            proc = self._run_action(manifest, plugin_dir, "provision",
                                    instance_dir, port, PROVISION_TIMEOUT_S)
        except subprocess.TimeoutExpired:
            self._discard_dir(instance_dir)
            raise errors.ProvisionFailed("provision action timed out")
        if proc.returncode != 0:
            self._discard_dir(instance_dir)
            raise errors.ProvisionFailed(
                f"provision exited {proc.returncode}: "
                + proc.stderr.decode("utf-8", "replace").strip())

        serve_proc = self._spawn_serve(manifest, plugin_dir, instance_dir,
                                       port, instance_id)
        deadline = time.monotonic() + self.serve_start_timeout_s
        if not _wait_listening(port, deadline):
            self._kill_proc(serve_proc)
            self._discard_dir(instance_dir)
            raise errors.StartTimeout(
                f"{service_id} did not listen on its port within "
                f"{self.serve_start_timeout_s}s")

        info = InstanceInfo(
            instance_id=instance_id,
            project_id=project_id,
            service_id=service_id,
            version=version,
            local_port=port,
            state="running",
            created_at=time.time(),
        )
        with self._lock:
            self._instances[instance_id] = info
            self._procs[instance_id] = serve_proc
        self._persist()
        return info

    def _discard_dir(self, instance_dir: Path) -> None:
        if instance_dir.exists():
            target = self.trash_root / f"{instance_dir.name}.aborted"
            os.replace(instance_dir, target)

    def destroy(self, instance_id: str) -> InstanceInfo:
        with self._lock:
            info = self._instances.get(instance_id)
            if info is None:
                raise errors.NoSuchInstance(f"no instance {instance_id!r}")
            if info.state == "stopped":
                return info
            proc = self._procs.pop(instance_id, None)
        self._kill_proc(proc)
        instance_dir = self.instances_root / instance_id
        try:
            manifest = self.store.manifest_for(info.service_id, info.version)
            plugin_dir = self.store.plugin_dir(info.service_id, info.version)
            self._run_action(manifest, plugin_dir, "destroy", instance_dir,
                             info.local_port, DESTROY_TIMEOUT_S)
        except (errors.ApiError, subprocess.TimeoutExpired, OSError):
            pass  # archive regardless; destroy is best effort
        if instance_dir.exists():
            os.replace(instance_dir, self.trash_root / instance_id)
        with self._lock:
            info = replace(info, state="stopped")
            self._instances[instance_id] = info
        self._persist()
        return info

    def configure(self, instance_id: str) -> None:
        """Re-run the plugin's configure action for a live instance."""
        info = self._require(instance_id)
        if info.state != "running":
            raise errors.InstanceDown(f"instance {instance_id} is {info.state}")
        manifest = self.store.manifest_for(info.service_id, info.version)
        plugin_dir = self.store.plugin_dir(info.service_id, info.version)
        proc = self._run_action(manifest, plugin_dir, "configure",
                                self.instances_root / instance_id,
                                info.local_port, PROVISION_TIMEOUT_S)
        if proc.returncode != 0:
            raise errors.ProvisionFailed(
                f"configure exited {proc.returncode}")

    # -- queries -----------------------------------------------------------

    def _require(self, instance_id: str) -> InstanceInfo:
        with self._lock:
            info = self._instances.get(instance_id)
        if info is None:
            raise errors.NoSuchInstance(f"no instance {instance_id!r}")
        return info

    def get(self, instance_id: str) -> InstanceInfo:
        return self._require(instance_id)

    def list_instances(self) -> tuple[InstanceInfo, ...]:
        with self._lock:
            return tuple(sorted(self._instances.values(),
                                key=lambda i: i.created_at))

    def has_running_for(self, service_id: str, version: str) -> bool:
        with self._lock:
            return any(info.service_id == service_id
                       and info.version == version
                       and info.state == "running"
                       for info in self._instances.values())

    def _mark_failed(self, instance_id: str) -> None:
        with self._lock:
            info = self._instances.get(instance_id)
            if info is not None and info.state == "running":
                self._instances[instance_id] = replace(info, state="failed")
        self._persist()

    # -- proxy --------------------------------------------------------------

    def proxy(self, instance_id: str, method: str, path: str, query: str,
              headers, body: bytes, user_id: str,
              role: str) -> tuple[int, dict[str, str], bytes]:
        """Forward one request to the instance, tagging the caller identity."""
        info = self._require(instance_id)
        if info.state != "running":
            raise errors.InstanceDown(
                f"instance {instance_id} is {info.state}")
        upstream = wire.forwardable_headers(headers)
        upstream[wire.USER_HEADER] = user_id
        upstream[wire.ROLE_HEADER] = role
        url = f"http://127.0.0.1:{info.local_port}/{path.lstrip('/')}"
        if query:
            url += "?" + query
        try:
            response = httpx.request(method, url, headers=upstream,
                                     content=body, timeout=PROXY_TIMEOUT_S)
        except httpx.TransportError as exc:
            self._mark_failed(instance_id)
            raise errors.InstanceDown(
                f"instance {instance_id} is not answering: {exc}")
        return (response.status_code,
                wire.forwardable_headers(response.headers),
                response.content)

    def shutdown(self) -> None:
        with self._lock:
            procs = list(self._procs.values())
            self._procs.clear()
        for proc in procs:
            self._kill_proc(proc)
