"""State diffing: the plan that makes a reported plugin set match the reference."""

from __future__ import annotations

from collections.abc import Iterable

from sselab.model.types import ReconciliationPlan

Pair = tuple[str, str]


def diff_state(reference: Iterable[Pair], reported: Iterable[Pair]) -> ReconciliationPlan:
    """installs = reference \\ reported; removals = reported \\ reference.

    Both lists are sorted by (id, version) so plans are deterministic.
    """
    ref = set(reference)
    rep = set(reported)
    return ReconciliationPlan(
        installs=tuple(sorted(ref - rep)),
        removals=tuple(sorted(rep - ref)),
    )
