"""sselab: a plug-in based framework for web-based project portals.

A central registry front-end brokers users, projects and roles; category
back-ends (base / ostp / social) install tool plugins at runtime and execute
category-specific work; CLI clients run hosted tools with a transparent
local-or-remote fallback.
"""

__version__ = "0.1.0"
