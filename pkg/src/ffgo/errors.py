"""Exception hierarchy shared by all ffgo modules.

``exit_code`` drives the CLI: 1 for validation problems, 2 for I/O and
endpoint failures.
"""

from __future__ import annotations


class FfgoError(Exception):
    exit_code = 1


# frame sequences

class MissingFrames(FfgoError):
    """Frame directory has a gap or no frames at all."""


class DimensionMismatch(FfgoError):
    """Frames in one sequence disagree on width/height."""


class TooShort(FfgoError):
    """Sequence has fewer frames than the requested head crop."""


class CutTooLarge(FfgoError):
    """Cut length is not smaller than the sequence length."""


# canvas / layers

class AllTransparent(FfgoError):
    """Layer has no opaque pixel left."""


class TooManyElements(FfgoError):
    pass


class EmptyElementList(FfgoError):
    pass


class PlanMismatch(FfgoError):
    """Layout plan does not correspond to the given element set."""


# VLM orchestration

class UnknownTemplate(FfgoError):
    pass


class MissingSlot(FfgoError):
    """A required template slot is absent or blank."""


class EndpointError(FfgoError):
    """Remote endpoint failed after the retry budget was spent."""

    exit_code = 2


class ResolutionViolation(FfgoError):
    """Returned image does not match the input resolution."""


class NoCaptionTag(FfgoError):
    pass


class EmptyCaption(FfgoError):
    pass


class CaptionTooLong(FfgoError):
    pass


# dataset manifest

class AlreadyPrefixed(FfgoError):
    """Caption already starts with the transition phrase."""


class ValidationFailed(FfgoError):
    def __init__(self, report: list[str]):
        super().__init__("; ".join(report))
        self.report = report


class DuplicateId(FfgoError):
    pass


class EmptyManifest(FfgoError):
    pass


class InvalidOverride(FfgoError):
    pass


# low-rank adapter kernel

class BadRank(FfgoError):
    pass


class ShapeMismatch(FfgoError):
    pass


# generation pipeline

class FrameCountMismatch(FfgoError):
    exit_code = 2


class ResolutionMismatch(FfgoError):
    exit_code = 2


# study service

class UnknownSet(FfgoError):
    pass


class RankViolation(FfgoError):
    """Ranks are not a bijection onto {1, 2, 3, 4}."""


class RatingOutOfRange(FfgoError):
    pass


class DuplicateSubmission(FfgoError):
    pass


class EmptyStudy(FfgoError):
    pass
