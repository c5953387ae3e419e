"""Exception types shared across the package."""


class InvalidDomainError(ValueError):
    """Domain endpoints are not ordered (b <= a)."""


class TooCoarseError(ValueError):
    """Grid has fewer subintervals than the scheme supports."""


class GridMismatchError(ValueError):
    """Two fields live on different grids."""


class TruncationTooLargeError(ValueError):
    """Requested more noise modes than the grid can represent."""


class DegenerateActuatorsError(RuntimeError):
    """Gram matrix factorization failed even at maximum jitter."""


class NonFiniteStateError(RuntimeError):
    """A simulation step produced NaN or Inf state values."""

    def __init__(self, step_index: int, detail: str = ""):
        self.step_index = step_index
        msg = f"non-finite state after step {step_index}"
        if detail:
            msg += f" ({detail})"
        super().__init__(msg)


class AllRolloutsFailedError(RuntimeError):
    """Every rollout in a batch produced a non-finite cost."""


class InsufficientSamplesError(ValueError):
    """A Monte-Carlo estimator was given too few samples."""


class ConfigError(ValueError):
    """Experiment configuration is invalid."""
