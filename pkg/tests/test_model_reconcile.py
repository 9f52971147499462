"""diff_state: plan correctness against a brute-force set-application oracle."""

from __future__ import annotations

from hypothesis import given, strategies as st

from sselab.model import diff_state


def apply_plan(reported: set, plan) -> set:
    """Independent oracle: apply installs then removals to the reported set."""
    return (set(reported) | set(plan.installs)) - set(plan.removals)


class TestDiffState:
    def test_mixed_diff(self):
        ref = {("a", "1.0.0"), ("b", "2.1.0")}
        rep = {("a", "1.0.0"), ("c", "0.9.0")}
        plan = diff_state(ref, rep)
        assert plan.installs == (("b", "2.1.0"),)
        assert plan.removals == (("c", "0.9.0"),)

    def test_identity_is_empty_plan(self):
        ref = {("a", "1.0.0"), ("b", "2.1.0")}
        plan = diff_state(ref, set(ref))
        assert plan.empty

    def test_coexisting_versions_of_one_id(self):
        ref = {("a", "1.0.0"), ("a", "1.1.0")}
        rep = {("a", "1.0.0")}
        plan = diff_state(ref, rep)
        assert plan.installs == (("a", "1.1.0"),)
        assert plan.removals == ()
        assert apply_plan(rep, plan) == ref

    def test_plan_is_sorted(self):
        ref = {("z", "1.0.0"), ("a", "2.0.0"), ("a", "1.0.0")}
        plan = diff_state(ref, set())
        assert list(plan.installs) == sorted(plan.installs)


pairs = st.tuples(st.from_regex(r"[a-z][a-z0-9-]{1,8}", fullmatch=True),
                  st.from_regex(r"\d{1,2}\.\d{1,2}\.\d{1,2}", fullmatch=True))
pair_sets = st.frozensets(pairs, max_size=12)


@given(reference=pair_sets, reported=pair_sets)
def test_applying_plan_reaches_reference(reference, reported):
    plan = diff_state(reference, reported)
    assert apply_plan(reported, plan) == set(reference)
    assert not (set(plan.installs) & set(plan.removals))


@given(state=pair_sets)
def test_identical_states_yield_empty_plan(state):
    assert diff_state(state, state).empty
