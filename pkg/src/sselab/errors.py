"""Error taxonomy shared by all components.

Every failure that crosses a module or wire boundary is an ApiError with a
stable machine-readable code. HTTP services serialize these as
``{"error": code, "message": ...}`` with the class's status code; clients map
them back by code.
"""

from __future__ import annotations

from typing import Any


class ApiError(Exception):
    """Base error; subclasses pin a wire code and an HTTP status."""

    code = "InternalError"
    status = 500

    def __init__(self, message: str = "", detail: Any = None):
        super().__init__(message or self.code)
        self.message = message or self.code
        self.detail = detail

    def to_wire(self) -> dict:
        body = {"error": self.code, "message": self.message}
        if self.detail is not None:
            body["detail"] = self.detail
        return body


def error_class(code: str, status: int) -> type[ApiError]:
    return type(code, (ApiError,), {"code": code, "status": status})


# -- core-model ----------------------------------------------------------
MalformedManifest = error_class("MalformedManifest", 422)
MissingField = error_class("MissingField", 422)
BadFieldValue = error_class("BadFieldValue", 422)
NotAnArchive = error_class("NotAnArchive", 422)
NoManifest = error_class("NoManifest", 422)
EntryMissing = error_class("EntryMissing", 422)
PathTraversal = error_class("PathTraversal", 422)

# -- frontend ------------------------------------------------------------
BadCredentials = error_class("BadCredentials", 401)
AccountLocked = error_class("AccountLocked", 423)
Unauthorized = error_class("Unauthorized", 403)
DuplicateName = error_class("DuplicateName", 409)
LastOwner = error_class("LastOwner", 409)
NoSuchUser = error_class("NoSuchUser", 404)
NoSuchProject = error_class("NoSuchProject", 404)
DuplicateUrl = error_class("DuplicateUrl", 409)
Unreachable = error_class("Unreachable", 502)
InterfaceMismatch = error_class("InterfaceMismatch", 409)
ValidationFailed = error_class("ValidationFailed", 422)
DuplicatePlugin = error_class("DuplicatePlugin", 409)
NoSuchService = error_class("NoSuchService", 404)
NoSuchBackend = error_class("NoSuchBackend", 404)
NoSuchPlugin = error_class("NoSuchPlugin", 404)
BadRequest = error_class("BadRequest", 400)
NoBackendAvailable = error_class("NoBackendAvailable", 503)
NoSuchProvider = error_class("NoSuchProvider", 404)
GrantRejected = error_class("GrantRejected", 403)
NoSuchJob = error_class("NoSuchJob", 404)

# -- backend host --------------------------------------------------------
CategoryMismatch = error_class("CategoryMismatch", 409)
ChecksumMismatch = error_class("ChecksumMismatch", 422)
AlreadyInstalled = error_class("AlreadyInstalled", 409)
Unpackable = error_class("Unpackable", 422)
NotInstalled = error_class("NotInstalled", 404)
InUse = error_class("InUse", 409)

# -- ostp executor -------------------------------------------------------
BadInputName = error_class("BadInputName", 422)
DiskFull = error_class("DiskFull", 507)
SpawnFailed = error_class("SpawnFailed", 500)

# -- base provisioner ----------------------------------------------------
AlreadyProvisioned = error_class("AlreadyProvisioned", 409)
ProvisionFailed = error_class("ProvisionFailed", 502)
StartTimeout = error_class("StartTimeout", 502)
NoSuchInstance = error_class("NoSuchInstance", 404)
InstanceDown = error_class("InstanceDown", 502)

# -- social connector ----------------------------------------------------
ProviderFailed = error_class("ProviderFailed", 502)
Malformed = error_class("Malformed", 502)

# -- transport -------------------------------------------------------------
NotFound = error_class("NotFound", 404)
TooLarge = error_class("TooLarge", 413)

_BY_CODE = {cls.code: cls for cls in list(globals().values())
            if isinstance(cls, type) and issubclass(cls, ApiError)}


def from_wire(status: int, body: Any) -> ApiError:
    """Rebuild an ApiError from a wire error body (client side)."""
    if isinstance(body, dict) and isinstance(body.get("error"), str):
        cls = _BY_CODE.get(body["error"])
        if cls is not None:
            return cls(body.get("message", ""), body.get("detail"))
        err = ApiError(body.get("message", body["error"]), body.get("detail"))
        err.code = body["error"]
        err.status = status
        return err
    err = ApiError(f"HTTP {status}")
    err.status = status
    return err
