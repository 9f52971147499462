"""Parsing, serialization and rule validation of plugin manifests.

The manifest file format is a single UTF-8 JSON document named
``manifest.json`` at the archive root. Field names are part of the wire
contract: id, version, category, display_name, description, entry,
params[{name,kind,required,default,choices}],
properties{headless,runtime_deps,supports_sso,access_control}.
"""

from __future__ import annotations

import json
import re

from sselab import errors
from sselab.model.types import (
    ACCESS_CONTROL_LEVELS,
    PARAM_KINDS,
    Finding,
    ParamSpec,
    PluginManifest,
    PropertySet,
    ServiceCategory,
    ValidationReport,
)

ID_RE = re.compile(r"^[a-z][a-z0-9-]{1,63}$")
SEMVER_RE = re.compile(
    r"^(0|[1-9]\d*)\.(0|[1-9]\d*)\.(0|[1-9]\d*)"
    r"(?:-[0-9A-Za-z-]+(?:\.[0-9A-Za-z-]+)*)?"
    r"(?:\+[0-9A-Za-z-]+(?:\.[0-9A-Za-z-]+)*)?$"
)

KNOWN_FIELDS = {
    "id", "version", "category", "display_name", "description",
    "entry", "params", "properties",
}
PARAM_FIELDS = {"name", "kind", "required", "default", "choices"}
PROPERTY_FIELDS = {"headless", "runtime_deps", "supports_sso", "access_control"}

# Over this many declared runtime dependencies a plugin draws a weight warning.
HEAVY_DEPS_THRESHOLD = 8


def _require(doc: dict, key: str) -> object:
    if key not in doc or doc[key] is None:
        raise errors.MissingField(f"manifest is missing required field {key!r}")
    return doc[key]


def _text(doc: dict, key: str, default: str = "") -> str:
    value = doc.get(key, default)
    if not isinstance(value, str):
        raise errors.BadFieldValue(f"field {key!r} must be a string")
    return value


def _entry_ok(entry: str) -> bool:
    if not entry or entry.startswith("/") or "\\" in entry:
        return False
    return ".." not in entry.split("/")


def _parse_param(raw: object, index: int) -> ParamSpec:
    if not isinstance(raw, dict):
        raise errors.BadFieldValue(f"params[{index}] must be an object")
    name = raw.get("name")
    if not isinstance(name, str) or not name:
        raise errors.BadFieldValue(f"params[{index}].name must be a non-empty string")
    kind = raw.get("kind")
    if kind not in PARAM_KINDS:
        raise errors.BadFieldValue(
            f"params[{index}].kind must be one of {PARAM_KINDS}, got {kind!r}"
        )
    required = raw.get("required", False)
    if not isinstance(required, bool):
        raise errors.BadFieldValue(f"params[{index}].required must be a boolean")
    default = raw.get("default")
    choices = raw.get("choices")
    if kind == "enum":
        if not isinstance(choices, list) or not choices or not all(
            isinstance(c, str) for c in choices
        ):
            raise errors.BadFieldValue(
                f"params[{index}].choices must be a non-empty string list for enum"
            )
        choices = tuple(choices)
    elif choices is not None:
        raise errors.BadFieldValue(f"params[{index}].choices only allowed for enum kind")
    else:
        choices = ()
    if required and default is not None:
        raise errors.BadFieldValue(
            f"params[{index}] is required and must not carry a default"
        )
    if default is not None and not _value_matches_kind(default, kind, choices):
        raise errors.BadFieldValue(f"params[{index}].default does not match kind {kind}")
    return ParamSpec(name=name, kind=kind, required=required, default=default,
                     choices=choices)


def _value_matches_kind(value: object, kind: str, choices: tuple[str, ...]) -> bool:
    if kind == "string":
        return isinstance(value, str)
    if kind == "int":
        return isinstance(value, int) and not isinstance(value, bool)
    if kind == "bool":
        return isinstance(value, bool)
    if kind == "enum":
        return isinstance(value, str) and value in choices
    return False


def _parse_properties(raw: object) -> PropertySet:
    if raw is None:
        return PropertySet()
    if not isinstance(raw, dict):
        raise errors.BadFieldValue("properties must be an object")
    headless = raw.get("headless", False)
    supports_sso = raw.get("supports_sso", False)
    if not isinstance(headless, bool) or not isinstance(supports_sso, bool):
        raise errors.BadFieldValue("properties.headless and supports_sso must be booleans")
    deps = raw.get("runtime_deps", [])
    if not isinstance(deps, list) or not all(isinstance(d, str) for d in deps):
        raise errors.BadFieldValue("properties.runtime_deps must be a string list")
    access = raw.get("access_control", "none")
    if access not in ACCESS_CONTROL_LEVELS:
        raise errors.BadFieldValue(
            f"properties.access_control must be one of {ACCESS_CONTROL_LEVELS}"
        )
    return PropertySet(headless=headless, runtime_deps=tuple(deps),
                       supports_sso=supports_sso, access_control=access)


def parse_manifest(data: bytes | str) -> PluginManifest:
    """Parse manifest file bytes into a structurally valid PluginManifest.

    Unknown top-level fields are retained on ``extra_fields`` and surfaced as
    warnings by validate_manifest; they never fail the parse.
    """
    if isinstance(data, bytes):
        try:
            data = data.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise errors.MalformedManifest(f"manifest is not UTF-8: {exc}") from exc
    try:
        doc = json.loads(data)
    except json.JSONDecodeError as exc:
        raise errors.MalformedManifest(f"manifest is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise errors.MalformedManifest("manifest must be a JSON object")

    plugin_id = _require(doc, "id")
    if not isinstance(plugin_id, str) or not ID_RE.match(plugin_id):
        raise errors.BadFieldValue(
            f"id must match {ID_RE.pattern}, got {plugin_id!r}"
        )
    version = _require(doc, "version")
    if not isinstance(version, str) or not SEMVER_RE.match(version):
        raise errors.BadFieldValue(f"version must be a semantic version, got {version!r}")
    raw_category = _require(doc, "category")
    try:
        category = ServiceCategory.parse(raw_category)
    except (ValueError, TypeError) as exc:
        raise errors.BadFieldValue(str(exc)) from exc
    entry = _require(doc, "entry")
    if not isinstance(entry, str) or not _entry_ok(entry):
        raise errors.BadFieldValue(
            f"entry must be a relative path without '..' segments, got {entry!r}"
        )

    raw_params = doc.get("params", [])
    if not isinstance(raw_params, list):
        raise errors.BadFieldValue("params must be a list")
    params = tuple(_parse_param(p, i) for i, p in enumerate(raw_params))
    seen: set[str] = set()
    for spec in params:
        if spec.name in seen:
            raise errors.BadFieldValue(f"duplicate param name {spec.name!r}")
        seen.add(spec.name)

    return PluginManifest(
        id=plugin_id,
        version=version,
        category=category,
        entry=entry,
        display_name=_text(doc, "display_name", plugin_id),
        description=_text(doc, "description"),
        params=params,
        properties=_parse_properties(doc.get("properties")),
        extra_fields=tuple(sorted(set(doc) - KNOWN_FIELDS)),
    )


def semver_key(version: str) -> tuple:
    """Sort key for dotted version strings; numeric segments compare as ints."""
    parts = []
    for chunk in version.split("."):
        if chunk.isdigit():
            parts.append((1, int(chunk), ""))
        else:
            parts.append((0, 0, chunk))
    return tuple(parts)


def serialize_manifest(manifest: PluginManifest) -> bytes:
    """Canonical manifest.json bytes; the checksum is deliberately excluded."""
    doc = {
        "id": manifest.id,
        "version": manifest.version,
        "category": manifest.category.value,
        "display_name": manifest.display_name,
        "description": manifest.description,
        "entry": manifest.entry,
        "params": [
            {
                "name": p.name,
                "kind": p.kind,
                "required": p.required,
                **({"default": p.default} if p.default is not None else {}),
                **({"choices": list(p.choices)} if p.kind == "enum" else {}),
            }
            for p in manifest.params
        ],
        "properties": {
            "headless": manifest.properties.headless,
            "runtime_deps": list(manifest.properties.runtime_deps),
            "supports_sso": manifest.properties.supports_sso,
            "access_control": manifest.properties.access_control,
        },
    }
    return json.dumps(doc, indent=2, sort_keys=True).encode("utf-8") + b"\n"


def manifest_to_wire(manifest: PluginManifest) -> dict:
    """Catalog/API JSON shape: the file fields plus the ingest checksum."""
    doc = json.loads(serialize_manifest(manifest))
    doc["checksum"] = manifest.checksum
    return doc


def validate_manifest(manifest: PluginManifest) -> ValidationReport:
    """Apply the per-category integration rules. Pure; never raises."""
    findings: list[Finding] = []
    props = manifest.properties

    if manifest.category is ServiceCategory.OSTP:
        if not props.headless:
            findings.append(Finding(
                "E_NOT_HEADLESS", "error",
                "ostp plugins must run headless (properties.headless=true)"))
        if len(props.runtime_deps) > HEAVY_DEPS_THRESHOLD:
            findings.append(Finding(
                "W_HEAVY_DEPS", "warning",
                f"{len(props.runtime_deps)} runtime dependencies declared; "
                f"keep the runtime footprint minimal"))
    elif manifest.category is ServiceCategory.BASE:
        if not props.supports_sso:
            findings.append(Finding(
                "E_NO_SSO", "error",
                "base plugins must support single sign-on (properties.supports_sso=true)"))
        if props.access_control != "per-project":
            findings.append(Finding(
                "E_COARSE_ACL", "error",
                f"base plugins need per-project access control, "
                f"got {props.access_control!r}"))
    elif manifest.category is ServiceCategory.SOCIAL:
        grant = manifest.param("grant")
        if grant is None or grant.kind != "string" or not grant.required:
            findings.append(Finding(
                "E_NO_GRANT", "error",
                "social plugins must declare a required string param named 'grant'"))

    for name in manifest.extra_fields:
        findings.append(Finding(
            "W_UNKNOWN_FIELD", "warning", f"unknown manifest field {name!r} ignored"))

    return ValidationReport(findings=tuple(findings))
