"""svxsynth: ROI-guided supervoxel masking and inpainting dataset synthesis."""

__version__ = "0.1.0"

from .errors import ConstraintError, FormatError, NoCandidatesError, SvxError
from .volume import (LabelVolume, MaskVolume, MultiModalVolume, VolumeMeta,
                     apply_mask, center_crop, invert_mask,
                     normalize_intensities)

__all__ = [
    "__version__",
    "SvxError", "FormatError", "ConstraintError", "NoCandidatesError",
    "VolumeMeta", "MultiModalVolume", "LabelVolume", "MaskVolume",
    "apply_mask", "center_crop", "invert_mask", "normalize_intensities",
]
