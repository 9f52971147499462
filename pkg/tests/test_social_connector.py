"""Provider fetch contract and profile normalization."""

from __future__ import annotations

import json
from pathlib import Path

import pytest
from hypothesis import given
from hypothesis import strategies as st

from sselab import errors
from sselab.model import parse_manifest
from sselab.social import ProfileData, fetch_profile, merge_profiles, normalize

from helpers import manifest_bytes, social_manifest_doc

PROVIDER = """#!/usr/bin/env python3
import json, sys
from pathlib import Path

Path("invoked.marker").write_text("yes")
grant = sys.argv[sys.argv.index("--grant") + 1]
if grant == "expired":
    print("grant expired", file=sys.stderr)
    sys.exit(2)
if grant == "boom":
    sys.exit(1)
if grant == "garbled":
    print("not json at all")
    sys.exit(0)
print(json.dumps({"name": "Ada Example", "avatar": "https://img.example/a.png",
                  "hobbies": ["chess", "go", "chess"],
                  "links": [{"label": "blog", "url": "https://blog.example/"}],
                  "shoe_size": 37}))
"""


@pytest.fixture
def provider(tmp_path):
    manifest = parse_manifest(manifest_bytes(social_manifest_doc()))
    plugin_dir = tmp_path / "provider"
    (plugin_dir / "bin").mkdir(parents=True)
    entry = plugin_dir / "bin" / "run"
    entry.write_text(PROVIDER)
    entry.chmod(0o755)
    return manifest, plugin_dir


class TestFetchProfile:
    def test_fetch_returns_raw_document(self, provider):
        manifest, plugin_dir = provider
        doc = fetch_profile(manifest, plugin_dir, "fixture-1")
        assert doc["name"] == "Ada Example"
        assert doc["shoe_size"] == 37

    def test_same_grant_is_deterministic(self, provider):
        manifest, plugin_dir = provider
        first = fetch_profile(manifest, plugin_dir, "fixture-1")
        second = fetch_profile(manifest, plugin_dir, "fixture-1")
        assert first == second

    def test_exit_2_is_grant_rejected(self, provider):
        manifest, plugin_dir = provider
        with pytest.raises(errors.GrantRejected) as exc_info:
            fetch_profile(manifest, plugin_dir, "expired")
        assert "expired" in exc_info.value.message

    def test_other_nonzero_is_provider_failed(self, provider):
        manifest, plugin_dir = provider
        with pytest.raises(errors.ProviderFailed):
            fetch_profile(manifest, plugin_dir, "boom")

    def test_unparseable_output_is_malformed(self, provider):
        manifest, plugin_dir = provider
        with pytest.raises(errors.Malformed):
            fetch_profile(manifest, plugin_dir, "garbled")

    def test_empty_grant_rejected_without_invoking(self, provider):
        manifest, plugin_dir = provider
        with pytest.raises(errors.GrantRejected):
            fetch_profile(manifest, plugin_dir, "")
        assert not (plugin_dir / "invoked.marker").exists()


class TestNormalize:
    def test_hobby_dedup_keeps_order(self):
        profile = normalize({"name": "Ada Example",
                             "hobbies": ["chess", "go", "chess"]})
        assert profile.display_name == "Ada Example"
        assert profile.interests == ("chess", "go")

    def test_field_mapping(self):
        profile = normalize({
            "name": "Ada Example",
            "avatar": "https://img.example/a.png",
            "tags": ["science"],
            "links": [{"label": "blog", "url": "https://blog.example/"},
                      ["code", "https://code.example/ada"]],
            "shoe_size": 37,
        }, source="mock-social", now=123.0)
        assert profile == ProfileData(
            display_name="Ada Example",
            avatar_url="https://img.example/a.png",
            interests=("science",),
            links=(("blog", "https://blog.example/"),
                   ("code", "https://code.example/ada")),
            source="mock-social",
            fetched_at=123.0,
        )

    def test_first_present_interest_source_wins(self):
        doc = {"interests": ["a"], "tags": ["b"], "hobbies": ["c"]}
        assert normalize(doc).interests == ("a",)
        assert normalize({"tags": ["b"], "hobbies": ["c"]}).interests == ("b",)

    def test_missing_fields_become_empty(self):
        profile = normalize({}, now=0.0)
        assert profile == ProfileData()

    def test_relative_urls_are_emptied(self):
        profile = normalize({"avatar": "/me.png",
                             "links": [{"label": "x", "url": "me/page"}]})
        assert profile.avatar_url == ""
        assert profile.links == (("x", ""),)

    def test_non_string_junk_is_dropped(self):
        profile = normalize({"name": 42, "hobbies": ["ok", 7, None, "ok"],
                             "links": ["dangling", {"url": 3}]}, now=0.0)
        assert profile.display_name == ""
        assert profile.interests == ("ok",)
        assert profile.links == (("", ""),)

    def test_normalize_own_wire_form_is_identity(self):
        original = normalize({
            "name": "Ada Example",
            "avatar": "https://img.example/a.png",
            "hobbies": ["chess", "go"],
            "links": [{"label": "blog", "url": "https://blog.example/"}],
        }, source="mock-social", now=5.0)
        again = normalize(original.to_wire(), now=5.0)
        assert again == original


profile_docs = st.fixed_dictionaries({}, optional={
    "name": st.text(max_size=20),
    "avatar": st.sampled_from(["https://a.example/x.png", "/rel", "", "ftp://x/y"]),
    "interests": st.lists(st.text(min_size=1, max_size=8), max_size=6),
    "tags": st.lists(st.text(min_size=1, max_size=8), max_size=6),
    "hobbies": st.lists(st.text(min_size=1, max_size=8), max_size=6),
    "links": st.lists(st.fixed_dictionaries(
        {"label": st.text(max_size=8),
         "url": st.sampled_from(["https://l.example/", "rel/x", ""])}),
        max_size=4),
    "noise": st.integers(),
})


@given(profile_docs)
def test_normalize_is_idempotent_over_wire(doc):
    once = normalize(doc, source="prov", now=1.0)
    twice = normalize(once.to_wire(), now=1.0)
    assert twice == once


@given(profile_docs)
def test_normalized_urls_absolute_or_empty(doc):
    profile = normalize(doc)
    for url in (profile.avatar_url, *(u for _, u in profile.links)):
        assert url == "" or url.startswith(("http://", "https://"))


@given(profile_docs)
def test_interests_unique_preserving_order(doc):
    interests = normalize(doc).interests
    assert len(set(interests)) == len(interests)


class TestMergeProfiles:
    def test_fetched_nonempty_fields_overwrite(self):
        current = ProfileData(display_name="Old", avatar_url="https://o.example/",
                              interests=("x",), fetched_at=1.0)
        fetched = ProfileData(display_name="New", interests=("y",),
                              source="mock-social", fetched_at=2.0)
        merged = merge_profiles(current, fetched)
        assert merged.display_name == "New"
        assert merged.interests == ("y",)
        assert merged.avatar_url == "https://o.example/"
        assert merged.source == "mock-social"
        assert merged.fetched_at == 2.0

    def test_empty_fetch_changes_nothing(self):
        current = ProfileData(display_name="Keep", interests=("a", "b"),
                              fetched_at=9.0)
        assert merge_profiles(current, ProfileData()) == current
