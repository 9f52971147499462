"""Domain model shared by the front-end, back-end hosts and clients.

Everything here is an immutable value; the operations are pure functions and
safe under arbitrary concurrency.
"""

from sselab.model.types import (
    ServiceCategory,
    ParamSpec,
    PropertySet,
    PluginManifest,
    PluginPackage,
    Finding,
    ValidationReport,
    ReconciliationPlan,
    ReferenceState,
)
from sselab.model.manifest import (
    manifest_to_wire,
    parse_manifest,
    semver_key,
    serialize_manifest,
    validate_manifest,
)
from sselab.model.packaging import (
    archive_from_dir,
    build_archive,
    extract_package,
    open_package,
)
from sselab.model.reconcile import diff_state

__all__ = [
    "ServiceCategory",
    "ParamSpec",
    "PropertySet",
    "PluginManifest",
    "PluginPackage",
    "Finding",
    "ValidationReport",
    "ReconciliationPlan",
    "ReferenceState",
    "manifest_to_wire",
    "parse_manifest",
    "semver_key",
    "serialize_manifest",
    "validate_manifest",
    "archive_from_dir",
    "build_archive",
    "extract_package",
    "open_package",
    "diff_state",
]
