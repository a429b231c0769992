"""Exception types shared across the toolkit."""


class DataFormatError(ValueError):
    """An input file violates one of the documented on-disk formats."""


class PipelineStageError(RuntimeError):
    """A pipeline stage failed; carries the stage name for error reporting."""

    def __init__(self, stage: str, cause: BaseException):
        super().__init__(f"stage '{stage}' failed: {cause}")
        self.stage = stage
        self.cause = cause
