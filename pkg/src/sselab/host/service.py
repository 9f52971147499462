"""HTTP surface of a back-end host.

One process serves exactly one category. Every endpoint except /be/health
and /be/handshake requires the shared secret header; the secret is set once
by the front-end during registration and persisted with owner-only
permissions so restarts keep it."""

from __future__ import annotations

import json
import os
import time
from pathlib import Path

from sselab import errors, wire
from sselab.base import InstanceManager
from sselab.host.storage import PluginStore
from sselab.model import ServiceCategory, manifest_to_wire
from sselab.ostp import JobSpec, OstpExecutor
from sselab.social import fetch_profile

INTERFACE_VERSIONS = {
    ServiceCategory.BASE: 1,
    ServiceCategory.OSTP: 1,
    ServiceCategory.SOCIAL: 1,
}

RESULT_WAIT_CAP_S = 30.0


class BackendHost:
    def __init__(self, data_dir: Path | str, category: ServiceCategory,
                 max_concurrent_jobs: int = 4,
                 job_ttl_seconds: float = 3600.0,
                 default_timeout_s: float = 60.0,
                 serve_start_timeout_s: float = 10.0):
        self.data_dir = Path(data_dir)
        self.data_dir.mkdir(parents=True, exist_ok=True)
        self.category = category
        self.started_at = time.time()
        self.store = PluginStore(self.data_dir, category)
        self.secret_path = self.data_dir / "secret.txt"
        self.secret: str | None = None
        if self.secret_path.exists():
            self.secret = self.secret_path.read_text(encoding="utf-8").strip() or None
        self.executor: OstpExecutor | None = None
        self.instances: InstanceManager | None = None
        if category == ServiceCategory.OSTP:
            self.executor = OstpExecutor(
                self.data_dir, max_concurrent_jobs=max_concurrent_jobs,
                default_timeout_s=default_timeout_s,
                job_ttl_seconds=job_ttl_seconds)
        elif category == ServiceCategory.BASE:
            self.instances = InstanceManager(
                self.data_dir, self.store,
                serve_start_timeout_s=serve_start_timeout_s)

    # -- registration ---------------------------------------------------------

    def handshake(self, secret: str) -> None:
        if not secret:
            raise errors.Unauthorized("handshake needs a secret")
        if self.secret is not None and secret != self.secret:
            raise errors.Unauthorized("host already paired with another secret")
        if self.secret is None:
            self.secret_path.write_text(secret + "\n", encoding="utf-8")
            os.chmod(self.secret_path, 0o600)
            self.secret = secret

    def health(self) -> dict:
        running = self.executor.running_count() if self.executor else 0
        return {
            "category": str(self.category),
            "interface_version": INTERFACE_VERSIONS[self.category],
            "uptime_seconds": max(0.0, time.time() - self.started_at),
            "running_jobs": running,
        }

    # -- plugin lifecycle -----------------------------------------------------

    def busy(self, plugin_id: str, version: str) -> bool:
        if self.executor is not None:
            return self.executor.active_for(plugin_id, version)
        if self.instances is not None:
            return self.instances.has_running_for(plugin_id, version)
        return False

    def require_category(self, category: ServiceCategory) -> None:
        if self.category != category:
            raise errors.CategoryMismatch(
                f"this host serves {self.category}, not {category}")

    def shutdown(self) -> None:
        if self.executor is not None:
            self.executor.shutdown()
        if self.instances is not None:
            self.instances.shutdown()


class HostHandler(wire.ApiHandler):
    ROUTES = (
        wire.Route("POST", r"/be/handshake", "h_handshake"),
        wire.Route("GET", r"/be/health", "h_health"),
        wire.Route("GET", r"/be/plugins", "h_list_plugins"),
        wire.Route("PUT", r"/be/plugins", "h_install_plugin"),
        wire.Route("DELETE", r"/be/plugins/([^/]+)/([^/]+)", "h_remove_plugin"),
        wire.Route("POST", r"/be/jobs", "h_submit_job"),
        wire.Route("GET", r"/be/jobs/([0-9a-f]+)", "h_job_result"),
        wire.Route("GET", r"/be/jobs/([0-9a-f]+)/outputs/(.+)", "h_job_output"),
        wire.Route("POST", r"/be/instances", "h_create_instance"),
        wire.Route("DELETE", r"/be/instances/([0-9a-f]+)", "h_destroy_instance"),
        wire.Route("*", r"/be/instances/([0-9a-f]+)/proxy(/.*)?", "h_proxy"),
        wire.Route("POST", r"/be/profile", "h_profile"),
    )
    OPEN_PATHS = ("/be/health", "/be/handshake")

    @property
    def host(self) -> BackendHost:
        return self.server.service

    def before_route(self, method: str) -> None:
        if self.route_path in self.OPEN_PATHS:
            return
        presented = self.headers.get(wire.SECRET_HEADER)
        if self.host.secret is None or presented != self.host.secret:
            raise errors.Unauthorized("missing or wrong backend secret")

    # -- registration -----------------------------------------------------

    def h_handshake(self, match):
        doc = self.read_json()
        secret = doc.get("secret")
        if not isinstance(secret, str):
            raise errors.BadFieldValue("handshake body needs a secret string")
        self.host.handshake(secret)
        self.send_json(200, dict(self.host.health(), ok=True))

    def h_health(self, match):
        self.send_json(200, self.host.health())

    # -- plugins ------------------------------------------------------------

    def h_list_plugins(self, match):
        docs = [manifest_to_wire(m) for m in self.host.store.list_plugins()]
        self.send_json(200, docs)

    def h_install_plugin(self, match):
        archive = self.read_body()
        expected = self.headers.get(wire.CHECKSUM_HEADER)
        manifest = self.host.store.install(archive, expected)
        self.send_json(201, manifest_to_wire(manifest))

    def h_remove_plugin(self, match):
        plugin_id, version = match.group(1), match.group(2)
        self.host.store.remove(plugin_id, version, busy=self.host.busy)
        self.send_json(200, {"removed": [plugin_id, version]})

    # -- ostp jobs ----------------------------------------------------------

    def h_submit_job(self, match):
        self.host.require_category(ServiceCategory.OSTP)
        service_id = self.headers.get(wire.SERVICE_ID_HEADER, "")
        version = self.headers.get(wire.SERVICE_VERSION_HEADER, "")
        manifest = self.host.store.manifest_for(service_id, version)
        plugin_dir = self.host.store.plugin_dir(service_id, version)

        parts = wire.parse_multipart(self.headers.get("Content-Type"),
                                     self.read_body())
        params = {}
        inputs: list[tuple[str, bytes]] = []
        for part in parts:
            if part.name == "params" and part.filename is None:
                try:
                    params = json.loads(part.data.decode("utf-8"))
                except (json.JSONDecodeError, UnicodeDecodeError) as exc:
                    raise errors.BadFieldValue(f"params part is not JSON: {exc}")
                if not isinstance(params, dict):
                    raise errors.BadFieldValue("params part must be an object")
            else:
                inputs.append((part.filename or part.name, part.data))

        timeout_s = None
        raw_timeout = self.headers.get(wire.TIMEOUT_HEADER)
        if raw_timeout:
            try:
                timeout_s = float(raw_timeout)
            except ValueError:
                raise errors.BadFieldValue(
                    f"bad timeout value {raw_timeout!r}")

        job_id = self.host.executor.submit(JobSpec(
            manifest=manifest, plugin_dir=plugin_dir, params=params,
            inputs=tuple(inputs), timeout_s=timeout_s))
        self.send_json(202, {"job_id": job_id})

    def h_job_result(self, match):
        self.host.require_category(ServiceCategory.OSTP)
        wait_s = None
        raw_wait = self.query_value("wait")
        if raw_wait:
            try:
                wait_s = min(float(raw_wait), RESULT_WAIT_CAP_S)
            except ValueError:
                raise errors.BadFieldValue(f"bad wait value {raw_wait!r}")
        result = self.host.executor.result(match.group(1), wait_s=wait_s)
        self.send_json(200, result.to_wire())

    def h_job_output(self, match):
        self.host.require_category(ServiceCategory.OSTP)
        data = self.host.executor.output_bytes(match.group(1), match.group(2))
        self.send_bytes(200, data)

    # -- base instances ----------------------------------------------------

    def h_create_instance(self, match):
        self.host.require_category(ServiceCategory.BASE)
        doc = self.read_json()
        for key in ("project_id", "service_id", "version"):
            if not isinstance(doc.get(key), str) or not doc[key]:
                raise errors.MissingField(f"instance request needs {key}")
        info = self.host.instances.create(doc["project_id"],
                                          doc["service_id"], doc["version"])
        self.send_json(201, info.to_wire())

    def h_destroy_instance(self, match):
        self.host.require_category(ServiceCategory.BASE)
        info = self.host.instances.destroy(match.group(1))
        self.send_json(200, info.to_wire())

    def h_proxy(self, match):
        self.host.require_category(ServiceCategory.BASE)
        instance_id = match.group(1)
        rest = (match.group(2) or "/").lstrip("/")
        status, headers, body = self.host.instances.proxy(
            instance_id, self.command, rest, self.raw_query, self.headers,
            self.read_body(),
            self.headers.get(wire.USER_HEADER, ""),
            self.headers.get(wire.ROLE_HEADER, ""))
        self.send_proxied(status, headers, body)

    # -- social profiles ------------------------------------------------------

    def h_profile(self, match):
        self.host.require_category(ServiceCategory.SOCIAL)
        doc = self.read_json()
        for key in ("service_id", "version", "grant"):
            if not isinstance(doc.get(key), str):
                raise errors.MissingField(f"profile request needs {key}")
        manifest = self.host.store.manifest_for(doc["service_id"],
                                                doc["version"])
        plugin_dir = self.host.store.plugin_dir(doc["service_id"],
                                                doc["version"])
        raw = fetch_profile(manifest, plugin_dir, doc["grant"])
        self.send_json(200, raw)
