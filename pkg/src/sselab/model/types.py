"""Core value types: manifests, packages, reference state, plans, reports."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field


class ServiceCategory(enum.Enum):
    """The three back-end categories. Fixed taxonomy, no runtime extension."""

    BASE = "base"
    OSTP = "ostp"
    SOCIAL = "social"

    @classmethod
    def parse(cls, value: str) -> "ServiceCategory":
        for member in cls:
            if member.value == value:
                return member
        raise ValueError(f"unknown service category: {value!r}")

    def __str__(self) -> str:
        return self.value


PARAM_KINDS = ("string", "int", "bool", "enum")
ACCESS_CONTROL_LEVELS = ("none", "per-project", "per-user")


@dataclass(frozen=True)
class ParamSpec:
    """One declared tool parameter.

    Invariants (enforced at parse time): required implies no default; enum
    requires non-empty choices and any default must be one of them.
    """

    name: str
    kind: str
    required: bool = False
    default: object = None
    choices: tuple[str, ...] = ()


@dataclass(frozen=True)
class PropertySet:
    """Integration properties a plugin declares about its tool."""

    headless: bool = False
    runtime_deps: tuple[str, ...] = ()
    supports_sso: bool = False
    access_control: str = "none"


@dataclass(frozen=True)
class PluginManifest:
    """Identity, category, parameters and entry point of a tool plugin.

    ``checksum`` is the SHA-256 of the package archive, filled when the
    package is ingested; it is never part of the manifest file itself.
    ``extra_fields`` records unknown keys seen at parse time so that
    validation can surface them as warnings.
    """

    id: str
    version: str
    category: ServiceCategory
    entry: str
    display_name: str = ""
    description: str = ""
    params: tuple[ParamSpec, ...] = ()
    properties: PropertySet = field(default_factory=PropertySet)
    checksum: str | None = None
    extra_fields: tuple[str, ...] = ()

    @property
    def key(self) -> tuple[str, str]:
        return (self.id, self.version)

    def param(self, name: str) -> ParamSpec | None:
        for spec in self.params:
            if spec.name == name:
                return spec
        return None


@dataclass(frozen=True)
class PluginPackage:
    """A parsed plugin archive: manifest, raw bytes and the member listing."""

    manifest: PluginManifest
    archive_bytes: bytes
    file_listing: tuple[str, ...]


@dataclass(frozen=True)
class Finding:
    code: str
    severity: str  # "error" | "warning"
    message: str

    def to_wire(self) -> dict:
        return {"code": self.code, "severity": self.severity, "message": self.message}


@dataclass(frozen=True)
class ValidationReport:
    """Outcome of a rule check. ok is true iff no error-severity finding."""

    findings: tuple[Finding, ...] = ()

    @property
    def ok(self) -> bool:
        return not any(f.severity == "error" for f in self.findings)

    def errors(self) -> tuple[Finding, ...]:
        return tuple(f for f in self.findings if f.severity == "error")

    def to_wire(self) -> dict:
        return {"ok": self.ok, "findings": [f.to_wire() for f in self.findings]}


@dataclass(frozen=True)
class ReconciliationPlan:
    """Install/removal steps that turn a reported plugin set into the reference set."""

    installs: tuple[tuple[str, str], ...] = ()
    removals: tuple[tuple[str, str], ...] = ()

    @property
    def empty(self) -> bool:
        return not self.installs and not self.removals

    def to_wire(self) -> dict:
        return {
            "installs": [{"id": i, "version": v} for i, v in self.installs],
            "removals": [{"id": i, "version": v} for i, v in self.removals],
        }


@dataclass(frozen=True)
class ReferenceState:
    """The canonical per-category set of installed (id, version) pairs."""

    base: frozenset[tuple[str, str]] = frozenset()
    ostp: frozenset[tuple[str, str]] = frozenset()
    social: frozenset[tuple[str, str]] = frozenset()

    def for_category(self, category: ServiceCategory) -> frozenset[tuple[str, str]]:
        return getattr(self, category.value)

    def with_category(
        self, category: ServiceCategory, entries: frozenset[tuple[str, str]]
    ) -> "ReferenceState":
        parts = {c.value: self.for_category(c) for c in ServiceCategory}
        parts[category.value] = frozenset(entries)
        return ReferenceState(**parts)

    def to_wire(self) -> dict:
        return {
            c.value: [{"id": i, "version": v} for i, v in sorted(self.for_category(c))]
            for c in ServiceCategory
        }
