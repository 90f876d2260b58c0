"""Exception types shared across the package."""


class DreamPipeError(Exception):
    """Base class for all errors raised by this package."""


class ConfigError(DreamPipeError):
    """Invalid or inconsistent pipeline configuration (CLI exit code 2)."""


class BackendError(DreamPipeError):
    """Stylizer backend failure: transport, timeout or broken response
    contract (CLI exit code 3)."""


class StageError(DreamPipeError):
    """A pipeline stage failed; carries the stage name (CLI exit code 4)."""

    def __init__(self, stage: str, message: str):
        super().__init__(f"stage {stage!r}: {message}")
        self.stage = stage
