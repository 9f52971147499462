"""The front-end HTTP service.

Every client request lands here: account and project management, plugin
uploads, back-end administration, and the brokered paths that relay tool
jobs, provisioned project services and profile imports to back-ends.
Clients never talk to a back-end directly; back-ends only accept requests
carrying the per-backend secret this service issued at registration.
"""

from __future__ import annotations

import http.cookies
import json
import mimetypes
import os
import secrets
import threading
import time
from pathlib import Path

import httpx

from sselab import errors, wire
from sselab.frontend.reconciler import Reconciler
from sselab.frontend.store import (
    READ_METHODS,
    BackendRecord,
    Registry,
    ServiceRoute,
    User,
    new_token,
)
from sselab.host.service import INTERFACE_VERSIONS
from sselab.model import ServiceCategory, manifest_to_wire, open_package, validate_manifest
from sselab.social import merge_profiles, normalize

PROBE_TIMEOUT_S = 10.0
PROXY_TIMEOUT_S = 30.0
JOB_POLL_WAIT_S = 5.0
TERMINAL_JOB_STATUSES = frozenset({"succeeded", "failed", "timeout", "rejected"})

COOKIE_NAME = "sselab_token"


class FrontendService:
    """Operations behind the HTTP surface; owns the registry and reconciler."""

    def __init__(self, data_dir, ui_dir=None) -> None:
        self.registry = Registry(data_dir)
        self.client = httpx.Client()
        self.reconciler = Reconciler(self.registry, self.client)
        self.ui_dir = Path(ui_dir).resolve() if ui_dir else None
        self._rr: dict[tuple, int] = {}
        self._rr_lock = threading.Lock()
        self._jobs: dict[str, str] = {}
        self._jobs_lock = threading.Lock()
        self.started_at = time.time()

    def shutdown(self) -> None:
        self.client.close()

    # -- auth ------------------------------------------------------------

    def login(self, username: str, password: str) -> dict:
        token = self.registry.authenticate(username, password)
        user = self.registry.users[token.user_id]
        return {
            "token": token.token,
            "expires_at": token.expires_at,
            "scopes": sorted(token.scopes),
            "user_id": user.user_id,
            "username": user.username,
        }

    # -- back-end management ----------------------------------------------

    def register_backend(self, url: str, category_name: str) -> tuple[BackendRecord, dict]:
        try:
            category = ServiceCategory.parse(category_name)
        except (ValueError, TypeError) as exc:
            raise errors.BadFieldValue(str(exc)) from exc
        url = url.rstrip("/")
        with self.registry.lock:
            if any(b.url == url for b in self.registry.backends.values()):
                raise errors.DuplicateUrl("backend already registered: %s" % url)

        try:
            response = self.client.get(url + "/be/health", timeout=PROBE_TIMEOUT_S)
            wire.raise_for_api_error(response)
        except httpx.TransportError as exc:
            raise errors.Unreachable("cannot reach backend at %s: %s" % (url, exc)) from exc
        health = response.json()
        if health.get("category") != category.value:
            raise errors.InterfaceMismatch(
                "backend serves category %r, not %r" % (health.get("category"), category.value))
        expected = INTERFACE_VERSIONS[category]
        if health.get("interface_version") != expected:
            raise errors.InterfaceMismatch(
                "backend speaks interface version %r, this front-end requires %d"
                % (health.get("interface_version"), expected))

        secret = new_token()
        try:
            response = self.client.post(
                url + "/be/handshake", json={"secret": secret}, timeout=PROBE_TIMEOUT_S)
            wire.raise_for_api_error(response)
        except httpx.TransportError as exc:
            raise errors.Unreachable("handshake with %s failed: %s" % (url, exc)) from exc

        record = BackendRecord(
            backend_id="b-" + secrets.token_hex(6),
            url=url,
            category=category,
            secret=secret,
            interface_version=expected,
        )
        self.registry.add_backend(record)
        report = self.reconciler.reconcile(record.backend_id)
        return self.registry.get_backend(record.backend_id), report

    def upload_plugin(self, archive: bytes) -> dict:
        package = open_package(archive)
        report = validate_manifest(package.manifest)
        if not report.ok:
            raise errors.ValidationFailed(
                "plugin failed validation", detail=report.to_wire())
        self.registry.add_catalog_entry(package.manifest, archive)
        reconciled = self.reconciler.reconcile_category(package.manifest.category)
        return {
            "plugin": manifest_to_wire(package.manifest),
            "validation": report.to_wire(),
            "reconciled": reconciled,
        }

    # -- brokering ---------------------------------------------------------

    def _pick_backend(self, category: ServiceCategory, key: tuple[str, str]) -> BackendRecord:
        eligible = self.registry.eligible_backends(category, key)
        if not eligible:
            raise errors.NoBackendAvailable(
                "no healthy %s backend provides %s@%s" % (category.value, key[0], key[1]))
        counter_key = (category.value, key[0], key[1])
        with self._rr_lock:
            idx = self._rr.get(counter_key, 0)
            self._rr[counter_key] = idx + 1
        return eligible[idx % len(eligible)]

    def run_job(self, service_id: str, version: str, params: dict,
                inputs: list[tuple[str, bytes]], timeout_s: float | None = None) -> dict:
        key = (service_id, version)
        manifest = self.registry.catalog.get(key)
        if manifest is None or manifest.category is not ServiceCategory.OSTP:
            raise errors.NoSuchService("no tool service %s@%s" % key)
        record = self._pick_backend(ServiceCategory.OSTP, key)
        headers = {
            wire.SECRET_HEADER: record.secret,
            wire.SERVICE_ID_HEADER: service_id,
            wire.SERVICE_VERSION_HEADER: version,
        }
        if timeout_s is not None:
            headers[wire.TIMEOUT_HEADER] = str(timeout_s)
        response = self.client.post(
            record.url + "/be/jobs",
            files=wire.job_payload(params, inputs),
            headers=headers,
            timeout=PROXY_TIMEOUT_S,
        )
        wire.raise_for_api_error(response)
        job_id = response.json()["job_id"]
        with self._jobs_lock:
            self._jobs[job_id] = record.backend_id

        effective = min(timeout_s, 600.0) if timeout_s else 60.0
        deadline = time.time() + effective + 60.0
        while True:
            response = self.client.get(
                "%s/be/jobs/%s" % (record.url, job_id),
                params={"wait": str(JOB_POLL_WAIT_S)},
                headers={wire.SECRET_HEADER: record.secret},
                timeout=JOB_POLL_WAIT_S + PROBE_TIMEOUT_S,
            )
            wire.raise_for_api_error(response)
            doc = response.json()
            if doc.get("status") in TERMINAL_JOB_STATUSES:
                return doc
            if time.time() > deadline:
                raise errors.Unreachable(
                    "backend %s never delivered a result for job %s" % (record.backend_id, job_id))

    def job_output(self, job_id: str, name: str) -> tuple[bytes, str]:
        with self._jobs_lock:
            backend_id = self._jobs.get(job_id)
        if backend_id is None:
            raise errors.NoSuchJob("unknown job: %s" % job_id)
        record = self.registry.get_backend(backend_id)
        response = self.client.get(
            "%s/be/jobs/%s/outputs/%s" % (record.url, job_id, name),
            headers={wire.SECRET_HEADER: record.secret},
            timeout=PROXY_TIMEOUT_S,
        )
        wire.raise_for_api_error(response)
        return response.content, response.headers.get("content-type", "application/octet-stream")

    # -- provisioned project services ----------------------------------------

    def provision(self, user: User, project_id: str, service_id: str) -> dict:
        project = self.registry.get_project(project_id)
        if project.role_of(user.user_id) != "owner":
            raise errors.Unauthorized("only the project owner may provision services")
        if (project_id, service_id) in self.registry.routes:
            raise errors.AlreadyProvisioned(
                "service already provisioned: %s for %s" % (service_id, project_id))
        manifest = self.registry.latest_version(service_id, ServiceCategory.BASE)
        if manifest is None:
            raise errors.NoSuchService("no project service in catalog: %s" % service_id)
        record = self._pick_backend(ServiceCategory.BASE, manifest.key)
        response = self.client.post(
            record.url + "/be/instances",
            json={"project_id": project_id, "service_id": service_id,
                  "version": manifest.version},
            headers={wire.SECRET_HEADER: record.secret},
            timeout=60.0,
        )
        wire.raise_for_api_error(response)
        instance = response.json()
        route = ServiceRoute(
            project_id=project_id,
            service_id=service_id,
            version=manifest.version,
            backend_id=record.backend_id,
            instance_id=instance["instance_id"],
        )
        self.registry.add_route(route)
        return {**route.to_wire(), "instance": instance}

    def deprovision(self, user: User, project_id: str, service_id: str) -> dict:
        project = self.registry.get_project(project_id)
        if project.role_of(user.user_id) != "owner":
            raise errors.Unauthorized("only the project owner may remove services")
        route = self.registry.get_route(project_id, service_id)
        try:
            record = self.registry.get_backend(route.backend_id)
            response = self.client.delete(
                "%s/be/instances/%s" % (record.url, route.instance_id),
                headers={wire.SECRET_HEADER: record.secret},
                timeout=60.0,
            )
            wire.raise_for_api_error(response)
        except (httpx.TransportError, errors.ApiError):
            pass
        self.registry.remove_route(project_id, service_id)
        return {"removed": route.to_wire()}

    def proxy(self, user: User, project_id: str, service_id: str, method: str,
              rest: str, raw_query: str, headers_in, body: bytes) -> tuple[int, dict, bytes]:
        route = self.registry.get_route(project_id, service_id)
        project = self.registry.get_project(project_id)
        role = project.role_of(user.user_id)
        if role is None:
            raise errors.Unauthorized("not a member of project %s" % project_id)
        if role == "guest" and method not in READ_METHODS:
            raise errors.Unauthorized("guests may only read this service")
        record = self.registry.get_backend(route.backend_id)
        url = "%s/be/instances/%s/proxy%s" % (record.url, route.instance_id, rest or "/")
        if raw_query:
            url += "?" + raw_query
        headers = wire.forwardable_headers(headers_in)
        for key in list(headers):
            if key.lower().startswith("x-sselab-"):
                del headers[key]
        headers[wire.SECRET_HEADER] = record.secret
        headers[wire.USER_HEADER] = user.username
        headers[wire.ROLE_HEADER] = role
        try:
            response = self.client.request(
                method, url, content=body, headers=headers, timeout=PROXY_TIMEOUT_S)
        except httpx.TransportError as exc:
            raise errors.Unreachable("backend %s unreachable: %s" % (record.backend_id, exc)) from exc
        return response.status_code, dict(response.headers), response.content

    # -- profile import --------------------------------------------------------

    def import_profile(self, user: User, provider_id: str, grant: str) -> dict:
        if not isinstance(grant, str) or not grant.strip():
            raise errors.GrantRejected("grant must be a non-empty string")
        manifest = self.registry.latest_version(provider_id, ServiceCategory.SOCIAL)
        if manifest is None:
            raise errors.NoSuchProvider("no such profile provider: %s" % provider_id)
        record = self._pick_backend(ServiceCategory.SOCIAL, manifest.key)
        response = self.client.post(
            record.url + "/be/profile",
            json={"service_id": provider_id, "version": manifest.version, "grant": grant},
            headers={wire.SECRET_HEADER: record.secret},
            timeout=PROXY_TIMEOUT_S,
        )
        wire.raise_for_api_error(response)
        fetched = normalize(response.json(), source=provider_id)
        merged = merge_profiles(user.profile, fetched)
        self.registry.update_profile(user.user_id, merged)
        return merged.to_wire()

    # -- snapshots for the API ---------------------------------------------

    def stats(self) -> dict:
        registry = self.registry
        with registry.lock:
            return {
                "users": len(registry.users),
                "projects": len(registry.projects),
                "backends": len(registry.backends),
                "plugins": len(registry.catalog),
                "routes": len(registry.routes),
                "uptime_seconds": round(time.time() - self.started_at, 3),
            }


class FrontendHandler(wire.ApiHandler):
    ROUTES = (
        wire.Route("POST", r"/api/auth/login", "h_login"),
        wire.Route("GET", r"/api/profile", "h_profile"),
        wire.Route("POST", r"/api/profile/import", "h_profile_import"),
        wire.Route("GET", r"/api/plugins", "h_list_plugins"),
        wire.Route("POST", r"/api/projects", "h_create_project"),
        wire.Route("GET", r"/api/projects", "h_list_projects"),
        wire.Route("GET", r"/api/projects/([^/]+)", "h_get_project"),
        wire.Route("POST", r"/api/projects/([^/]+)/roles", "h_set_role"),
        wire.Route("POST", r"/api/projects/([^/]+)/services", "h_provision"),
        wire.Route("DELETE", r"/api/projects/([^/]+)/services/([^/]+)", "h_deprovision"),
        wire.Route("POST", r"/api/ostp/([^/]+)/([^/]+)/jobs", "h_run_job"),
        wire.Route("GET", r"/api/ostp/jobs/([0-9a-f]+)/outputs/(.+)", "h_job_output"),
        wire.Route("POST", r"/api/admin/users", "h_create_user"),
        wire.Route("GET", r"/api/admin/users", "h_list_users"),
        wire.Route("POST", r"/api/admin/backends", "h_register_backend"),
        wire.Route("GET", r"/api/admin/backends", "h_list_backends"),
        wire.Route("POST", r"/api/admin/backends/([^/]+)/reconcile", "h_reconcile"),
        wire.Route("POST", r"/api/admin/plugins", "h_upload_plugin"),
        wire.Route("GET", r"/api/stats", "h_stats"),
        wire.Route("*", r"/p/([^/]+)/([^/]+)(/.*)?", "h_proxy"),
        wire.Route("GET", r"/(?:ui(?:/.*)?)?", "h_ui"),
    )

    @property
    def service(self) -> FrontendService:
        return self.server.service

    # -- auth helpers ------------------------------------------------------

    def bearer_token(self) -> str | None:
        header = self.headers.get("Authorization", "")
        if header.startswith("Bearer "):
            return header[len("Bearer "):].strip()
        header_token = self.headers.get(wire.TOKEN_HEADER)
        if header_token:
            return header_token.strip()
        raw_cookie = self.headers.get("Cookie")
        if raw_cookie:
            jar = http.cookies.SimpleCookie()
            try:
                jar.load(raw_cookie)
            except http.cookies.CookieError:
                return None
            if COOKIE_NAME in jar:
                return jar[COOKIE_NAME].value
        return None

    def require_user(self, scope: str | None = None) -> User:
        token_str = self.bearer_token()
        if not token_str:
            raise errors.Unauthorized("authentication required")
        token, user = self.service.registry.verify_token(token_str)
        if scope is not None and scope not in token.scopes:
            raise errors.Unauthorized("scope %r required" % scope)
        return user

    # -- handlers ------------------------------------------------------------

    def h_login(self, match):
        doc = self.read_json()
        username = doc.get("username")
        password = doc.get("password")
        if not isinstance(username, str) or not isinstance(password, str):
            raise errors.BadFieldValue("username and password must be strings")
        result = self.service.login(username, password)
        cookie = "%s=%s; Path=/; HttpOnly; SameSite=Strict" % (COOKIE_NAME, result["token"])
        payload = json.dumps(result, sort_keys=True).encode("utf-8")
        self.send_bytes(200, payload, "application/json", {"Set-Cookie": cookie})

    def h_profile(self, match):
        user = self.require_user()
        self.send_json(200, {
            "user": user.to_wire(),
            "profile": user.profile.to_wire(),
        })

    def h_profile_import(self, match):
        user = self.require_user("profile")
        doc = self.read_json()
        provider_id = doc.get("provider_id")
        grant = doc.get("grant")
        if not isinstance(provider_id, str):
            raise errors.BadFieldValue("provider_id must be a string")
        merged = self.service.import_profile(user, provider_id, grant)
        self.send_json(200, {"profile": merged})

    def h_list_plugins(self, match):
        self.require_user()
        raw = self.query_value("category")
        category = None
        if raw is not None:
            try:
                category = ServiceCategory.parse(raw)
            except (ValueError, TypeError) as exc:
                raise errors.BadFieldValue(str(exc)) from exc
        entries = self.service.registry.catalog_entries(category)
        self.send_json(200, [manifest_to_wire(m) for m in entries])

    def h_create_project(self, match):
        user = self.require_user("use")
        doc = self.read_json()
        name = doc.get("name")
        if not isinstance(name, str) or not name.strip():
            raise errors.BadFieldValue("name must be a non-empty string")
        project = self.service.registry.create_project(user, name.strip())
        self.send_json(201, self.service.registry.project_wire(project))

    def h_list_projects(self, match):
        user = self.require_user()
        registry = self.service.registry
        with registry.lock:
            mine = [
                registry.project_wire(p)
                for p in sorted(registry.projects.values(), key=lambda p: p.project_id)
                if p.role_of(user.user_id) is not None or user.is_admin
            ]
        self.send_json(200, mine)

    def h_get_project(self, match):
        user = self.require_user()
        registry = self.service.registry
        project = registry.get_project(match.group(1))
        if project.role_of(user.user_id) is None and not user.is_admin:
            raise errors.Unauthorized("not a member of this project")
        self.send_json(200, registry.project_wire(project))

    def h_set_role(self, match):
        user = self.require_user("use")
        doc = self.read_json()
        username = doc.get("username")
        role = doc.get("role")
        if not isinstance(username, str) or not isinstance(role, str):
            raise errors.BadFieldValue("username and role must be strings")
        project = self.service.registry.set_role(user, match.group(1), username, role)
        self.send_json(200, self.service.registry.project_wire(project))

    def h_provision(self, match):
        user = self.require_user("use")
        doc = self.read_json()
        service_id = doc.get("service_id")
        if not isinstance(service_id, str):
            raise errors.BadFieldValue("service_id must be a string")
        result = self.service.provision(user, match.group(1), service_id)
        self.send_json(201, result)

    def h_deprovision(self, match):
        user = self.require_user("use")
        result = self.service.deprovision(user, match.group(1), match.group(2))
        self.send_json(200, result)

    def h_run_job(self, match):
        self.require_user("use")
        service_id, version = match.group(1), match.group(2)
        body = self.read_body()
        parts = wire.parse_multipart(self.headers.get("Content-Type"), body)
        params: dict = {}
        inputs: list[tuple[str, bytes]] = []
        for part in parts:
            if part.name == "params" and part.filename is None:
                try:
                    params = json.loads(part.data.decode("utf-8"))
                except (json.JSONDecodeError, UnicodeDecodeError) as exc:
                    raise errors.BadFieldValue("params part is not valid JSON: %s" % exc)
                if not isinstance(params, dict):
                    raise errors.BadFieldValue("params must be a JSON object")
            else:
                inputs.append((part.filename or part.name, part.data))
        timeout_s = None
        raw_timeout = self.query_value("timeout_s")
        if raw_timeout is not None:
            try:
                timeout_s = float(raw_timeout)
            except ValueError:
                raise errors.BadFieldValue("timeout_s must be a number")
        result = self.service.run_job(service_id, version, params, inputs, timeout_s)
        self.send_json(200, result)

    def h_job_output(self, match):
        self.require_user("use")
        data, content_type = self.service.job_output(match.group(1), match.group(2))
        self.send_bytes(200, data, content_type)

    def h_create_user(self, match):
        self.require_user("admin")
        doc = self.read_json()
        username = doc.get("username")
        password = doc.get("password")
        if not isinstance(username, str) or not isinstance(password, str) or not username:
            raise errors.BadFieldValue("username and password must be strings")
        user = self.service.registry.add_user(
            username, password, is_admin=bool(doc.get("admin", False)))
        self.send_json(201, user.to_wire())

    def h_list_users(self, match):
        self.require_user("admin")
        registry = self.service.registry
        with registry.lock:
            users = [u.to_wire() for u in sorted(registry.users.values(),
                                                 key=lambda u: u.username)]
        self.send_json(200, users)

    def h_register_backend(self, match):
        self.require_user("admin")
        doc = self.read_json()
        url = doc.get("url")
        category = doc.get("category")
        if not isinstance(url, str) or not isinstance(category, str):
            raise errors.BadFieldValue("url and category must be strings")
        record, report = self.service.register_backend(url, category)
        self.send_json(201, {"backend": record.to_wire(), "reconcile": report})

    def h_list_backends(self, match):
        self.require_user("admin")
        registry = self.service.registry
        with registry.lock:
            backends = [b.to_wire() for b in sorted(registry.backends.values(),
                                                    key=lambda b: b.backend_id)]
        self.send_json(200, backends)

    def h_reconcile(self, match):
        self.require_user("admin")
        self.service.registry.get_backend(match.group(1))
        report = self.service.reconciler.reconcile(match.group(1))
        self.send_json(200, report)

    def h_upload_plugin(self, match):
        self.require_user("admin")
        archive = self.read_body()
        result = self.service.upload_plugin(archive)
        self.send_json(201, result)

    def h_stats(self, match):
        self.require_user()
        self.send_json(200, self.service.stats())

    def h_proxy(self, match):
        user = self.require_user("use")
        status, headers, body = self.service.proxy(
            user,
            match.group(1),
            match.group(2),
            self.command,
            match.group(3) or "/",
            self.raw_query,
            self.headers,
            self.read_body(),
        )
        self.send_proxied(status, headers, body)

    def h_ui(self, match):
        service = self.service
        if service.ui_dir is None:
            raise errors.NotFound("no UI bundle configured")
        rel = self.route_path
        if rel in ("/", "/ui", "/ui/"):
            rel = "index.html"
        else:
            rel = rel[len("/ui/"):]
        target = (service.ui_dir / rel).resolve()
        if not target.is_relative_to(service.ui_dir):
            raise errors.NotFound("no such file")
        if not target.is_file() and "." not in target.name:
            target = service.ui_dir / "index.html"
        if not target.is_file():
            raise errors.NotFound("no such file: %s" % rel)
        content_type = mimetypes.guess_type(str(target))[0] or "application/octet-stream"
        self.send_bytes(200, target.read_bytes(), content_type)
