"""One-shot tool execution: parameter checking and the job executor."""

from sselab.ostp.params import fill_defaults, validate_params
from sselab.ostp.executor import JobResult, JobSpec, OstpExecutor

__all__ = [
    "fill_defaults",
    "validate_params",
    "JobResult",
    "JobSpec",
    "OstpExecutor",
]
