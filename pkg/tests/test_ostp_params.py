"""Parameter validation and default filling for one-shot tools."""

from __future__ import annotations

from hypothesis import given
from hypothesis import strategies as st

from sselab.model import ParamSpec, parse_manifest
from sselab.ostp import fill_defaults, validate_params

from helpers import manifest_bytes, manifest_doc, social_manifest_doc

LINE_SORT = parse_manifest(manifest_bytes(manifest_doc()))
SOCIAL = parse_manifest(manifest_bytes(social_manifest_doc()))


def codes(report):
    return [f.code for f in report.findings]


def error_codes(report):
    return [f.code for f in report.findings if f.severity == "error"]


class TestValidateParams:
    def test_empty_params_fill_both_defaults(self):
        report = validate_params(LINE_SORT, {})
        assert report.ok
        assert sorted(codes(report)) == ["W_DEFAULT_FILLED", "W_DEFAULT_FILLED"]

    def test_partial_params_fill_remaining_default(self):
        report = validate_params(LINE_SORT, {"order": "desc"})
        assert report.ok
        assert codes(report) == ["W_DEFAULT_FILLED"]
        assert "unique" in report.findings[0].message

    def test_full_params_are_clean(self):
        report = validate_params(LINE_SORT, {"order": "asc", "unique": True})
        assert report.ok and not report.findings

    def test_enum_value_outside_choices(self):
        report = validate_params(LINE_SORT, {"order": "descc", "unique": True})
        assert not report.ok
        assert codes(report) == ["E_ENUM"]

    def test_enum_value_of_wrong_kind(self):
        report = validate_params(LINE_SORT, {"order": 5})
        assert error_codes(report) == ["E_KIND"]

    def test_bool_param_rejects_string(self):
        report = validate_params(LINE_SORT, {"unique": "yes"})
        assert error_codes(report) == ["E_KIND"]

    def test_bool_param_rejects_int(self):
        # a default-fill warning for the other param is fine; the error is not
        report = validate_params(LINE_SORT, {"unique": 1})
        assert error_codes(report) == ["E_KIND"]
        assert not report.ok

    def test_unknown_param_flagged(self):
        report = validate_params(LINE_SORT, {"order": "asc", "unique": False,
                                             "extra": 1})
        assert codes(report) == ["E_UNKNOWN"]

    def test_missing_required_param(self):
        report = validate_params(SOCIAL, {})
        assert codes(report) == ["E_MISSING"]

    def test_int_param_accepts_int_rejects_bool(self):
        doc = manifest_doc(params=[
            {"name": "n", "kind": "int"},
        ])
        manifest = parse_manifest(manifest_bytes(doc))
        assert validate_params(manifest, {"n": 3}).ok
        assert error_codes(validate_params(manifest, {"n": True})) == ["E_KIND"]
        # optional without default: absence is silent
        assert not validate_params(manifest, {}).findings

    def test_string_param_rejects_int(self):
        report = validate_params(SOCIAL, {"grant": 42})
        assert error_codes(report) == ["E_KIND"]


class TestFillDefaults:
    def test_fills_absent_defaults(self):
        assert fill_defaults(LINE_SORT, {}) == {"order": "asc", "unique": False}

    def test_never_overwrites_provided_values(self):
        effective = fill_defaults(LINE_SORT, {"order": "desc"})
        assert effective == {"order": "desc", "unique": False}

    def test_passes_unknown_keys_through(self):
        # validation rejects unknowns; filling is not the gatekeeper
        assert fill_defaults(LINE_SORT, {"x": 1})["x"] == 1


@given(st.dictionaries(
    st.sampled_from(["order", "unique"]),
    st.sampled_from(["asc", "desc", True, False])))
def test_filled_params_never_warn_again(params):
    effective = fill_defaults(LINE_SORT, params)
    report = validate_params(LINE_SORT, effective)
    assert "W_DEFAULT_FILLED" not in codes(report)
    for key, value in params.items():
        assert effective[key] == value
