"""Per-project instances of long-running base services."""

from sselab.base.provisioner import InstanceInfo, InstanceManager

__all__ = ["InstanceInfo", "InstanceManager"]
