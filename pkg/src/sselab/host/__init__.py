"""Back-end host: plugin storage plus the category-specific HTTP service."""

from sselab.host.storage import PluginStore
from sselab.host.service import BackendHost, HostHandler, INTERFACE_VERSIONS

__all__ = ["PluginStore", "BackendHost", "HostHandler", "INTERFACE_VERSIONS"]
