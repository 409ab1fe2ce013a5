"""Exception and warning types shared across the package."""


class ImageFormatError(Exception):
    """Unreadable, unsupported, or structurally invalid image file."""


class PipelineError(RuntimeError):
    """A denoising stage failed after its inputs were validated."""


class ConvergenceError(PipelineError):
    """Eigensolver hit its iteration cap before reaching tolerance."""

    def __init__(self, message: str, achieved_residual: float | None = None):
        super().__init__(message)
        self.achieved_residual = achieved_residual


class IsolatedVertexError(ValueError):
    """A graph vertex has zero degree where positive degree is required."""


class DisconnectedGraphWarning(UserWarning):
    """The patch graph is disconnected; unreachable distances were inflated."""
