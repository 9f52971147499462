"""Central registry service: users, projects, catalog, back-ends, brokering."""

from sselab.frontend.store import Registry
from sselab.frontend.reconciler import Reconciler
from sselab.frontend.service import FrontendService, FrontendHandler

__all__ = ["Registry", "Reconciler", "FrontendService", "FrontendHandler"]
