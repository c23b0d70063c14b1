"""Exception types shared across design_forge."""


class DesignForgeError(Exception):
    pass


class InvalidParameter(DesignForgeError, ValueError):
    pass


class ResourceLimit(DesignForgeError):
    """A configured enumeration or size cap was exceeded."""


class PreconditionViolation(DesignForgeError, ValueError):
    pass


class NotFound(DesignForgeError):
    pass


class NonTermination(DesignForgeError):
    """A resampling loop exceeded its iteration cap."""


class StageFailure(DesignForgeError):
    """A pipeline stage failed; carries enough context to replay it."""

    def __init__(self, stage, message, *, seed=None, retries=None):
        super().__init__(f"[{stage}] {message} (seed={seed}, retries={retries})")
        self.stage = stage
        self.seed = seed
        self.retries = retries


class RetryExhausted(DesignForgeError):
    """A randomized acceptance test failed on every allowed retry."""

    def __init__(self, message, statistic=None):
        super().__init__(message)
        self.statistic = statistic
