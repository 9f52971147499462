"""Drives a back-end's installed plugin set towards the reference state.

One reconcile run per back-end at a time; runs against different
back-ends may proceed in parallel. A run fetches what the back-end
reports, diffs it against the catalog-derived reference for that
category, applies removals before installs and verifies the result.
Any failed step stops the run and marks the back-end degraded so the
broker stops routing work to it until a later run converges.
"""

from __future__ import annotations

import threading

import httpx

from sselab import errors, wire
from sselab.frontend.store import BackendRecord, Registry
from sselab.model import diff_state

PROBE_TIMEOUT_S = 10.0
TRANSFER_TIMEOUT_S = 60.0


def fetch_reported(record: BackendRecord, client: httpx.Client) -> frozenset:
    """Ask the back-end which plugins it currently holds."""
    response = client.get(
        record.url + "/be/plugins",
        headers={wire.SECRET_HEADER: record.secret},
        timeout=PROBE_TIMEOUT_S,
    )
    wire.raise_for_api_error(response)
    return frozenset((doc["id"], doc["version"]) for doc in response.json())


class Reconciler:
    def __init__(self, registry: Registry, client: httpx.Client | None = None) -> None:
        self.registry = registry
        self.client = client or httpx.Client()
        self._locks: dict[str, threading.Lock] = {}
        self._locks_guard = threading.Lock()

    def _lock_for(self, backend_id: str) -> threading.Lock:
        with self._locks_guard:
            return self._locks.setdefault(backend_id, threading.Lock())

    def reconcile(self, backend_id: str) -> dict:
        with self._lock_for(backend_id):
            return self._run(backend_id)

    def reconcile_category(self, category) -> list[dict]:
        """Reconcile every non-unreachable back-end of a category."""
        reports = []
        for record in self.registry.backends_for(category):
            if record.health == "unreachable":
                continue
            reports.append(self.reconcile(record.backend_id))
        return reports

    def _run(self, backend_id: str) -> dict:
        record = self.registry.get_backend(backend_id)
        reference = self.registry.reference_for(record.category)
        report: dict = {
            "backend_id": backend_id,
            "completed": [],
            "failed": None,
        }

        try:
            reported = fetch_reported(record, self.client)
        except (httpx.TransportError, errors.ApiError) as exc:
            self.registry.update_backend(backend_id, health="unreachable")
            report.update({"health": "unreachable", "noop": False,
                           "error": str(exc), "plan": None})
            return report

        plan = diff_state(reference, reported)
        report["plan"] = plan.to_wire()
        if plan.empty:
            self.registry.update_backend(backend_id, health="healthy", reported=reported)
            report.update({"health": "healthy", "noop": True})
            return report
        report["noop"] = False

        headers = {wire.SECRET_HEADER: record.secret}
        steps = [("remove", key) for key in plan.removals]
        steps += [("install", key) for key in plan.installs]
        for op, key in steps:
            step_doc = {"op": op, "id": key[0], "version": key[1]}
            try:
                self._apply(record, op, key, headers)
            except (httpx.TransportError, errors.ApiError) as exc:
                step_doc["error"] = str(exc)
                report["failed"] = step_doc
                health = "unreachable" if isinstance(exc, httpx.TransportError) else "degraded"
                reported = self._refetch(record, reported)
                self.registry.update_backend(backend_id, health=health, reported=reported)
                report["health"] = health
                return report
            report["completed"].append(step_doc)

        reported = self._refetch(record, reported)
        if reported == reference:
            self.registry.update_backend(backend_id, health="healthy", reported=reported)
            report["health"] = "healthy"
        else:
            self.registry.update_backend(backend_id, health="degraded", reported=reported)
            report["health"] = "degraded"
            report["failed"] = {"op": "verify", "error": "reported state does not match reference"}
        return report

    def _apply(self, record: BackendRecord, op: str, key: tuple, headers: dict) -> None:
        plugin_id, version = key
        if op == "remove":
            response = self.client.delete(
                "%s/be/plugins/%s/%s" % (record.url, plugin_id, version),
                headers=headers,
                timeout=TRANSFER_TIMEOUT_S,
            )
            if response.status_code == 404:
                return
            wire.raise_for_api_error(response)
            return
        archive = self.registry.archive_bytes(plugin_id, version)
        manifest = self.registry.catalog[key]
        put_headers = dict(headers)
        if manifest.checksum:
            put_headers[wire.CHECKSUM_HEADER] = manifest.checksum
        response = self.client.put(
            record.url + "/be/plugins",
            content=archive,
            headers=put_headers,
            timeout=TRANSFER_TIMEOUT_S,
        )
        if response.status_code == 409:
            body = response.json()
            if isinstance(body, dict) and body.get("error") == "AlreadyInstalled":
                return
        wire.raise_for_api_error(response)

    def _refetch(self, record: BackendRecord, fallback: frozenset) -> frozenset:
        try:
            return fetch_reported(record, self.client)
        except (httpx.TransportError, errors.ApiError):
            return fallback
