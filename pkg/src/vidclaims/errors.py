"""Exception types shared across pipeline stages."""

from __future__ import annotations


class PipelineError(Exception):
    """Base class for all vidclaims errors."""


class ConfigError(PipelineError):
    """A configuration value is out of its documented range."""


class IngestError(PipelineError):
    """A grounding artifact (detections / OCR / ASR) could not be ingested."""


class ManifestError(PipelineError):
    """A corpus manifest could not be read at all (I/O or JSON failure)."""


class BackendError(PipelineError):
    """A backend reply violated its contract (e.g. ragged embedding batch)."""


class TransportError(PipelineError):
    """A transient transport failure (connection, timeout, 5xx/429)."""


class BudgetExceededError(PipelineError):
    """Pre-flight token estimate exceeds the backend context limit."""

    def __init__(self, estimate: int, limit: int):
        self.estimate = estimate
        self.limit = limit
        super().__init__(
            f"request estimate of {estimate} tokens exceeds the "
            f"{limit}-token context limit"
        )


class TransportExhaustedError(PipelineError):
    """All transport attempts against a remote backend failed."""


class RemoteBackendError(PipelineError):
    """The remote backend answered with a non-retryable error status."""

    def __init__(self, status: int, payload: str):
        self.status = status
        self.payload = payload
        super().__init__(f"backend error {status}: {payload[:200]}")


class StructuredOutputError(PipelineError):
    """No JSON value could be extracted, even after one repair round-trip."""

    def __init__(self, raw_responses: list[str]):
        self.raw_responses = list(raw_responses)
        super().__init__(
            f"structured output failed after {len(raw_responses)} responses"
        )


class FramePlanError(PipelineError):
    """A frame plan references image files that do not exist."""

    def __init__(self, missing_indices: list[int]):
        self.missing_indices = list(missing_indices)
        super().__init__(f"missing frame images for indices {missing_indices}")


class DependencyError(PipelineError):
    """A requested stage is missing an upstream artifact."""

    def __init__(self, stage: str, detail: str):
        self.stage = stage
        super().__init__(f"stage '{stage}' missing dependency: {detail}")
