"""Persistent registry state for the front-end service.

The registry is the single source of truth for accounts, projects,
back-end records, the plugin catalog and provisioned service routes.
Every mutation is flushed to a JSON snapshot so that a restarted
front-end observes exactly the state it had before shutdown.  Plugin
archive payloads live next to the snapshot as ordinary files; the
snapshot only records their manifests.
"""

from __future__ import annotations

import base64
import hashlib
import json
import os
import secrets
import threading
import time
from dataclasses import dataclass, field, replace
from pathlib import Path

from sselab import errors
from sselab.model import (
    PluginManifest,
    ServiceCategory,
    manifest_to_wire,
    parse_manifest,
    semver_key,
)
from sselab.social import ProfileData

ROLES = ("owner", "developer", "guest")
READ_METHODS = frozenset({"GET", "HEAD", "OPTIONS"})

TOKEN_TTL_S = 24 * 60 * 60
LOCKOUT_THRESHOLD = 10

PBKDF2_ROUNDS = 100_000

HEALTH_STATES = ("healthy", "degraded", "unreachable")


def hash_password(password: str, salt: bytes | None = None) -> str:
    if salt is None:
        salt = secrets.token_bytes(16)
    digest = hashlib.pbkdf2_hmac("sha256", password.encode("utf-8"), salt, PBKDF2_ROUNDS)
    return "pbkdf2_sha256$%d$%s$%s" % (PBKDF2_ROUNDS, salt.hex(), digest.hex())


def check_password(stored: str, password: str) -> bool:
    try:
        _scheme, rounds, salt_hex, digest_hex = stored.split("$")
        salt = bytes.fromhex(salt_hex)
        expected = bytes.fromhex(digest_hex)
        actual = hashlib.pbkdf2_hmac("sha256", password.encode("utf-8"), salt, int(rounds))
    except (ValueError, TypeError):
        return False
    return secrets.compare_digest(expected, actual)


def new_token() -> str:
    return base64.urlsafe_b64encode(secrets.token_bytes(32)).decode("ascii").rstrip("=")


@dataclass
class User:
    user_id: str
    username: str
    password_hash: str
    is_admin: bool = False
    failed_logins: int = 0
    locked: bool = False
    profile: ProfileData = field(default_factory=ProfileData)
    created_at: float = field(default_factory=time.time)

    def scopes(self) -> frozenset[str]:
        base = {"use", "profile"}
        if self.is_admin:
            base.add("admin")
        return frozenset(base)

    def to_doc(self) -> dict:
        return {
            "user_id": self.user_id,
            "username": self.username,
            "password_hash": self.password_hash,
            "is_admin": self.is_admin,
            "failed_logins": self.failed_logins,
            "locked": self.locked,
            "profile": self.profile.to_wire(),
            "created_at": self.created_at,
        }

    @classmethod
    def from_doc(cls, doc: dict) -> "User":
        return cls(
            user_id=doc["user_id"],
            username=doc["username"],
            password_hash=doc["password_hash"],
            is_admin=bool(doc.get("is_admin", False)),
            failed_logins=int(doc.get("failed_logins", 0)),
            locked=bool(doc.get("locked", False)),
            profile=ProfileData.from_wire(doc.get("profile", {})),
            created_at=float(doc.get("created_at", 0.0)),
        )

    def to_wire(self) -> dict:
        return {
            "user_id": self.user_id,
            "username": self.username,
            "admin": self.is_admin,
            "locked": self.locked,
        }


@dataclass
class Project:
    project_id: str
    name: str
    memberships: dict[str, str]
    created_at: float = field(default_factory=time.time)

    def owner_ids(self) -> list[str]:
        return [uid for uid, role in self.memberships.items() if role == "owner"]

    def role_of(self, user_id: str) -> str | None:
        return self.memberships.get(user_id)

    def to_doc(self) -> dict:
        return {
            "project_id": self.project_id,
            "name": self.name,
            "memberships": dict(sorted(self.memberships.items())),
            "created_at": self.created_at,
        }

    @classmethod
    def from_doc(cls, doc: dict) -> "Project":
        return cls(
            project_id=doc["project_id"],
            name=doc["name"],
            memberships=dict(doc["memberships"]),
            created_at=float(doc.get("created_at", 0.0)),
        )


@dataclass
class BackendRecord:
    backend_id: str
    url: str
    category: ServiceCategory
    secret: str
    interface_version: int
    health: str = "healthy"
    reported: frozenset = frozenset()
    registered_at: float = field(default_factory=time.time)

    def to_doc(self) -> dict:
        return {
            "backend_id": self.backend_id,
            "url": self.url,
            "category": self.category.value,
            "secret": self.secret,
            "interface_version": self.interface_version,
            "health": self.health,
            "reported": sorted([pid, ver] for pid, ver in self.reported),
            "registered_at": self.registered_at,
        }

    @classmethod
    def from_doc(cls, doc: dict) -> "BackendRecord":
        return cls(
            backend_id=doc["backend_id"],
            url=doc["url"],
            category=ServiceCategory(doc["category"]),
            secret=doc["secret"],
            interface_version=int(doc["interface_version"]),
            health=doc.get("health", "healthy"),
            reported=frozenset((p, v) for p, v in doc.get("reported", [])),
            registered_at=float(doc.get("registered_at", 0.0)),
        )

    def to_wire(self) -> dict:
        return {
            "backend_id": self.backend_id,
            "url": self.url,
            "category": self.category.value,
            "health": self.health,
            "interface_version": self.interface_version,
            "plugins": sorted([pid, ver] for pid, ver in self.reported),
        }


@dataclass
class AuthToken:
    token: str
    user_id: str
    scopes: frozenset
    expires_at: float

    def expired(self, now: float | None = None) -> bool:
        return (time.time() if now is None else now) >= self.expires_at

    def to_doc(self) -> dict:
        return {
            "token": self.token,
            "user_id": self.user_id,
            "scopes": sorted(self.scopes),
            "expires_at": self.expires_at,
        }

    @classmethod
    def from_doc(cls, doc: dict) -> "AuthToken":
        return cls(
            token=doc["token"],
            user_id=doc["user_id"],
            scopes=frozenset(doc["scopes"]),
            expires_at=float(doc["expires_at"]),
        )


@dataclass
class ServiceRoute:
    """A provisioned per-project service instance reachable under /p/."""

    project_id: str
    service_id: str
    version: str
    backend_id: str
    instance_id: str
    created_at: float = field(default_factory=time.time)

    @property
    def path(self) -> str:
        return "/p/%s/%s/" % (self.project_id, self.service_id)

    def to_doc(self) -> dict:
        return {
            "project_id": self.project_id,
            "service_id": self.service_id,
            "version": self.version,
            "backend_id": self.backend_id,
            "instance_id": self.instance_id,
            "created_at": self.created_at,
        }

    @classmethod
    def from_doc(cls, doc: dict) -> "ServiceRoute":
        return cls(
            project_id=doc["project_id"],
            service_id=doc["service_id"],
            version=doc["version"],
            backend_id=doc["backend_id"],
            instance_id=doc["instance_id"],
            created_at=float(doc.get("created_at", 0.0)),
        )

    def to_wire(self) -> dict:
        return {
            "project_id": self.project_id,
            "service_id": self.service_id,
            "version": self.version,
            "route": self.path,
        }


class Registry:
    """All durable front-end state behind one lock and one snapshot file."""

    def __init__(self, data_dir: str | os.PathLike) -> None:
        self.data_dir = Path(data_dir)
        self.catalog_dir = self.data_dir / "catalog"
        self.snapshot_path = self.data_dir / "registry.json"
        self.data_dir.mkdir(parents=True, exist_ok=True)
        self.catalog_dir.mkdir(parents=True, exist_ok=True)
        self.lock = threading.RLock()
        self.users: dict[str, User] = {}
        self.projects: dict[str, Project] = {}
        self.backends: dict[str, BackendRecord] = {}
        self.catalog: dict[tuple[str, str], PluginManifest] = {}
        self.tokens: dict[str, AuthToken] = {}
        self.routes: dict[tuple[str, str], ServiceRoute] = {}
        self._load()

    # -- persistence ---------------------------------------------------

    def _load(self) -> None:
        if not self.snapshot_path.exists():
            return
        doc = json.loads(self.snapshot_path.read_text("utf-8"))
        self.users = {u["user_id"]: User.from_doc(u) for u in doc.get("users", [])}
        self.projects = {p["project_id"]: Project.from_doc(p) for p in doc.get("projects", [])}
        self.backends = {b["backend_id"]: BackendRecord.from_doc(b) for b in doc.get("backends", [])}
        self.tokens = {t["token"]: AuthToken.from_doc(t) for t in doc.get("tokens", [])}
        self.routes = {}
        for r in doc.get("routes", []):
            route = ServiceRoute.from_doc(r)
            self.routes[(route.project_id, route.service_id)] = route
        self.catalog = {}
        for entry in doc.get("catalog", []):
            raw = dict(entry)
            checksum = raw.pop("checksum", None)
            manifest = parse_manifest(json.dumps(raw))
            manifest = replace(manifest, checksum=checksum)
            self.catalog[(manifest.id, manifest.version)] = manifest

    def persist(self) -> None:
        with self.lock:
            doc = {
                "users": [u.to_doc() for u in sorted(self.users.values(), key=lambda u: u.user_id)],
                "projects": [p.to_doc() for p in sorted(self.projects.values(), key=lambda p: p.project_id)],
                "backends": [b.to_doc() for b in sorted(self.backends.values(), key=lambda b: b.backend_id)],
                "tokens": [t.to_doc() for t in sorted(self.tokens.values(), key=lambda t: t.token)],
                "routes": [r.to_doc() for r in sorted(self.routes.values(), key=lambda r: (r.project_id, r.service_id))],
                "catalog": [manifest_to_wire(m) for _, m in sorted(self.catalog.items())],
            }
            payload = json.dumps(doc, indent=2, sort_keys=True).encode("utf-8")
            tmp = self.snapshot_path.with_suffix(".json.tmp")
            tmp.write_bytes(payload)
            os.replace(tmp, self.snapshot_path)

    # -- users and tokens ----------------------------------------------

    def add_user(self, username: str, password: str, is_admin: bool = False) -> User:
        with self.lock:
            if any(u.username == username for u in self.users.values()):
                raise errors.DuplicateName("username already taken: %s" % username)
            user = User(
                user_id="u-" + secrets.token_hex(6),
                username=username,
                password_hash=hash_password(password),
                is_admin=is_admin,
            )
            self.users[user.user_id] = user
            self.persist()
            return user

    def user_by_name(self, username: str) -> User | None:
        with self.lock:
            for user in self.users.values():
                if user.username == username:
                    return user
        return None

    def authenticate(self, username: str, password: str) -> AuthToken:
        """Check credentials and mint a token.

        Unknown usernames and wrong passwords produce the same error so
        the response does not leak which accounts exist.  Ten failures
        in a row lock the account until an administrator resets it.
        """
        with self.lock:
            user = self.user_by_name(username)
            if user is None:
                raise errors.BadCredentials("invalid username or password")
            if user.locked:
                raise errors.AccountLocked("account is locked: %s" % username)
            if not check_password(user.password_hash, password):
                user.failed_logins += 1
                if user.failed_logins >= LOCKOUT_THRESHOLD:
                    user.locked = True
                self.persist()
                if user.locked:
                    raise errors.AccountLocked("account is locked: %s" % username)
                raise errors.BadCredentials("invalid username or password")
            user.failed_logins = 0
            token = AuthToken(
                token=new_token(),
                user_id=user.user_id,
                scopes=user.scopes(),
                expires_at=time.time() + TOKEN_TTL_S,
            )
            self.tokens[token.token] = token
            self.persist()
            return token

    def unlock_user(self, username: str) -> User:
        with self.lock:
            user = self.user_by_name(username)
            if user is None:
                raise errors.NoSuchUser("no such user: %s" % username)
            user.locked = False
            user.failed_logins = 0
            self.persist()
            return user

    def verify_token(self, token_str: str) -> tuple[AuthToken, User]:
        with self.lock:
            token = self.tokens.get(token_str)
            if token is None or token.expired():
                raise errors.Unauthorized("missing or expired token")
            user = self.users.get(token.user_id)
            if user is None:
                raise errors.Unauthorized("token user no longer exists")
            return token, user

    def update_profile(self, user_id: str, profile: ProfileData) -> None:
        with self.lock:
            self.users[user_id].profile = profile
            self.persist()

    # -- projects and roles ----------------------------------------------

    def create_project(self, owner: User, name: str) -> Project:
        with self.lock:
            for project in self.projects.values():
                if project.name == name and project.role_of(owner.user_id) == "owner":
                    raise errors.DuplicateName("project name already used: %s" % name)
            project = Project(
                project_id="p-" + secrets.token_hex(6),
                name=name,
                memberships={owner.user_id: "owner"},
            )
            self.projects[project.project_id] = project
            self.persist()
            return project

    def get_project(self, project_id: str) -> Project:
        with self.lock:
            project = self.projects.get(project_id)
            if project is None:
                raise errors.NoSuchProject("no such project: %s" % project_id)
            return project

    def set_role(self, actor: User, project_id: str, username: str, role: str) -> Project:
        """Grant or change a member's role; only owners may do this.

        Granting ``owner`` transfers ownership: the previous owner
        becomes a developer so exactly one owner exists at all times.
        Demoting yourself while you are the only owner is refused.
        """
        if role not in ROLES:
            raise errors.BadRequest("unknown role: %s" % role)
        with self.lock:
            project = self.get_project(project_id)
            if project.role_of(actor.user_id) != "owner":
                raise errors.Unauthorized("only the project owner may assign roles")
            target = self.user_by_name(username)
            if target is None:
                raise errors.NoSuchUser("no such user: %s" % username)
            owners = project.owner_ids()
            if (
                target.user_id in owners
                and role != "owner"
                and len(owners) == 1
            ):
                raise errors.LastOwner("cannot demote the only owner")
            if role == "owner" and target.user_id not in owners:
                for uid in owners:
                    project.memberships[uid] = "developer"
            project.memberships[target.user_id] = role
            self.persist()
            return project

    def project_wire(self, project: Project) -> dict:
        with self.lock:
            members = []
            for uid, role in project.memberships.items():
                user = self.users.get(uid)
                members.append({
                    "user_id": uid,
                    "username": user.username if user else uid,
                    "role": role,
                })
            members.sort(key=lambda m: m["username"])
            doc = {
                "project_id": project.project_id,
                "name": project.name,
                "members": members,
                "services": sorted(
                    route.to_wire()["service_id"]
                    for route in self.routes.values()
                    if route.project_id == project.project_id
                ),
            }
            return doc

    # -- catalog and reference state -------------------------------------

    def archive_path(self, plugin_id: str, version: str) -> Path:
        return self.catalog_dir / ("%s-%s.tar.gz" % (plugin_id, version))

    def add_catalog_entry(self, manifest: PluginManifest, archive: bytes) -> None:
        with self.lock:
            key = (manifest.id, manifest.version)
            if key in self.catalog:
                raise errors.DuplicatePlugin(
                    "plugin already in catalog: %s@%s" % key
                )
            path = self.archive_path(*key)
            tmp = path.with_suffix(".tmp")
            tmp.write_bytes(archive)
            os.replace(tmp, path)
            self.catalog[key] = manifest
            self.persist()

    def archive_bytes(self, plugin_id: str, version: str) -> bytes:
        path = self.archive_path(plugin_id, version)
        if not path.exists():
            raise errors.NoSuchPlugin("archive missing for %s@%s" % (plugin_id, version))
        return path.read_bytes()

    def reference_for(self, category: ServiceCategory) -> frozenset:
        """The (id, version) set every healthy back-end of a category must hold."""
        with self.lock:
            return frozenset(
                key for key, manifest in self.catalog.items()
                if manifest.category is category
            )

    def catalog_entries(self, category: ServiceCategory | None = None) -> list[PluginManifest]:
        with self.lock:
            entries = [
                m for m in self.catalog.values()
                if category is None or m.category is category
            ]
            entries.sort(key=lambda m: (m.id, semver_key(m.version)))
            return entries

    def latest_version(self, plugin_id: str, category: ServiceCategory) -> PluginManifest | None:
        candidates = [
            m for m in self.catalog_entries(category)
            if m.id == plugin_id
        ]
        if not candidates:
            return None
        return max(candidates, key=lambda m: semver_key(m.version))

    # -- back-ends -------------------------------------------------------

    def add_backend(self, record: BackendRecord) -> None:
        with self.lock:
            for existing in self.backends.values():
                if existing.url == record.url:
                    raise errors.DuplicateUrl("backend already registered: %s" % record.url)
            self.backends[record.backend_id] = record
            self.persist()

    def get_backend(self, backend_id: str) -> BackendRecord:
        with self.lock:
            record = self.backends.get(backend_id)
            if record is None:
                raise errors.NoSuchBackend("no such backend: %s" % backend_id)
            return record

    def update_backend(self, backend_id: str, **changes) -> BackendRecord:
        with self.lock:
            record = replace(self.get_backend(backend_id), **changes)
            self.backends[backend_id] = record
            self.persist()
            return record

    def backends_for(self, category: ServiceCategory) -> list[BackendRecord]:
        with self.lock:
            records = [b for b in self.backends.values() if b.category is category]
            records.sort(key=lambda b: b.backend_id)
            return records

    def eligible_backends(self, category: ServiceCategory, key: tuple[str, str]) -> list[BackendRecord]:
        """Healthy back-ends of the category that report the plugin installed."""
        return [
            b for b in self.backends_for(category)
            if b.health == "healthy" and key in b.reported
        ]

    # -- provisioned routes ------------------------------------------------

    def add_route(self, route: ServiceRoute) -> None:
        with self.lock:
            key = (route.project_id, route.service_id)
            if key in self.routes:
                raise errors.AlreadyProvisioned(
                    "service already provisioned: %s for %s" % (route.service_id, route.project_id)
                )
            self.routes[key] = route
            self.persist()

    def get_route(self, project_id: str, service_id: str) -> ServiceRoute:
        with self.lock:
            route = self.routes.get((project_id, service_id))
            if route is None:
                raise errors.NoSuchService(
                    "no provisioned service %s in project %s" % (service_id, project_id)
                )
            return route

    def remove_route(self, project_id: str, service_id: str) -> ServiceRoute:
        with self.lock:
            route = self.get_route(project_id, service_id)
            del self.routes[(project_id, service_id)]
            self.persist()
            return route
