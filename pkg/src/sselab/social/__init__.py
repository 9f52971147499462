"""Profile fetching from provider plugins and normalization."""

from sselab.social.connector import (
    ProfileData,
    fetch_profile,
    merge_profiles,
    normalize,
)

__all__ = ["ProfileData", "fetch_profile", "merge_profiles", "normalize"]
