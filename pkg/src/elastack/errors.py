"""Exception hierarchy for elastack."""


class ElastackError(Exception):
    """Base class for all simulator errors."""


class UnknownFlowError(ElastackError):
    """Raised when an operation names a flow that is not established."""

    def __init__(self, flow_id: int) -> None:
        """Initialize the error.

        Args:
            flow_id: The unknown flow.
        """
        super().__init__(f"Unknown flow: {flow_id}")
        self.flow_id = flow_id


class PrivateFieldBoundsError(ElastackError):
    """Raised when a private field access falls outside the 64-byte area."""


class UnsupportedLayerError(ElastackError):
    """Raised when a callback is registered at a layer that has no hook."""


class UnknownConsumerError(ElastackError):
    """Raised when an event binding names a consumer that does not exist."""


class NoSamplesError(ElastackError):
    """Raised when a percentile is requested for a class with no samples."""


class EfficiencyUndefinedError(ElastackError):
    """Raised when CPU efficiency is requested with zero consumed cycles."""


class InvalidPlanError(ElastackError):
    """Raised when a resource plan cannot be applied."""


class ScenarioError(ElastackError):
    """Raised when a scenario file or override is invalid."""


class UnknownPresetError(ScenarioError):
    """Raised when a preset name is not known."""
