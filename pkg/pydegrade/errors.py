from typing import Optional


class ShapeError(ValueError):
    """Raised when tensors or images have incompatible shapes."""


class ImageFormatError(ValueError):
    """Raised when an image file is not an 8-bit RGB or grayscale PNG."""


class RecipeParseError(ValueError):
    """Raised when serialized recipe text is malformed or has an unknown version."""


class ArchiveFormatError(ValueError):
    """Raised when a checkpoint or pool file has a bad header or is truncated."""


class TrainingDivergenceError(RuntimeError):
    """
    Raised when a loss or parameter becomes non-finite during training.

    The offending step, the loss component and the provenance of the batch
    (recipe texts / source ids) are kept on the exception for the diagnostic dump.
    """

    def __init__(
        self,
        component: str,
        *,
        step: Optional[int] = None,
        provenance: Optional[list] = None,
    ):
        self.component = component
        self.step = step
        self.provenance = provenance or []
        super().__init__(
            f"Non-finite value in '{component}' at step {step}; "
            f"batch provenance: {self.provenance}"
        )
