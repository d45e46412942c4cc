"""Exception types shared across the package.

The CLI maps these onto its exit-code contract: FormatError -> 3,
ConstraintError -> 4. Anything else is a bug.
"""


class SvxError(Exception):
    """Base class for all svxsynth errors."""


class FormatError(SvxError):
    """A file or payload does not conform to its documented format."""


class ConstraintError(SvxError):
    """Inputs are well-formed but violate an operation precondition."""


class NoCandidatesError(ConstraintError):
    """A masking strategy produced an empty candidate set.

    Carries the reason so callers can distinguish an empty ROI from a
    volume floor that filtered everything out.
    """

    def __init__(self, reason: str):
        super().__init__(f"no candidate regions: {reason}")
        self.reason = reason
