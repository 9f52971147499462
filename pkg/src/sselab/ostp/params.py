"""Job parameter checking against a tool's declared parameter specs.

Findings use stable codes so clients can react programmatically:

  E_MISSING        required parameter absent
  E_KIND           value has the wrong kind
  E_ENUM           enum value outside the declared choices
  E_UNKNOWN        parameter not declared by the tool
  W_DEFAULT_FILLED optional parameter absent, default applied
"""

from __future__ import annotations

from typing import Any, Mapping

from sselab.model import Finding, PluginManifest, ValidationReport


def _kind_ok(kind: str, value: Any) -> bool:
    if kind == "string" or kind == "enum":
        return isinstance(value, str)
    if kind == "int":
        return isinstance(value, int) and not isinstance(value, bool)
    if kind == "bool":
        return isinstance(value, bool)
    return False


def validate_params(manifest: PluginManifest,
                    params: Mapping[str, Any]) -> ValidationReport:
    findings: list[Finding] = []
    declared = {spec.name: spec for spec in manifest.params}

    for name in sorted(params):
        if name not in declared:
            findings.append(Finding(
                "E_UNKNOWN", "error",
                f"parameter {name!r} is not declared by {manifest.id}"))

    for spec in manifest.params:
        if spec.name not in params:
            if spec.required:
                findings.append(Finding(
                    "E_MISSING", "error",
                    f"required parameter {spec.name!r} is missing"))
            elif spec.default is not None:
                findings.append(Finding(
                    "W_DEFAULT_FILLED", "warning",
                    f"parameter {spec.name!r} filled with default "
                    f"{spec.default!r}"))
            continue
        value = params[spec.name]
        if not _kind_ok(spec.kind, value):
            findings.append(Finding(
                "E_KIND", "error",
                f"parameter {spec.name!r} must be of kind {spec.kind}, "
                f"got {type(value).__name__}"))
            continue
        if spec.kind == "enum" and value not in spec.choices:
            findings.append(Finding(
                "E_ENUM", "error",
                f"parameter {spec.name!r} must be one of "
                f"{list(spec.choices)}, got {value!r}"))

    return ValidationReport(tuple(findings))


def fill_defaults(manifest: PluginManifest,
                  params: Mapping[str, Any]) -> dict[str, Any]:
    """Effective parameters: caller values plus defaults for absent ones."""
    effective = dict(params)
    for spec in manifest.params:
        if spec.name not in effective and spec.default is not None:
            effective[spec.name] = spec.default
    return effective
