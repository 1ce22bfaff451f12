"""Exception types shared across the pipeline.

Exit-code mapping for the CLI lives in scootsense.cli: I/O problems exit 2,
stream protocol violations exit 3, evaluation/assertion failures exit 1.
"""


class PipelineError(Exception):
    """Base class for all scootsense errors."""


class InvalidSampleError(PipelineError):
    """An IMU sample or filter input contains non-finite values."""


class GravityNotReadyError(PipelineError):
    """Gravity estimate used before the first sample seeded it."""


class EmptyWindowError(PipelineError):
    """A metric window contained no points."""


class InvalidDepthError(PipelineError):
    """A depth value outside (0, inf) where a positive depth is required."""


class OutOfBoundsError(PipelineError):
    """A pixel coordinate fell outside the frame."""


class BehindCameraError(PipelineError):
    """Projection requested for a point with Z <= 0."""


class EndOfStreamError(PipelineError):
    """A detection source was asked for a frame beyond its recording."""


class ParseError(PipelineError):
    """A malformed record in a replay file, stream, log, or annotation file.

    Carries the offending location when known.
    """

    def __init__(self, message, path=None, line=None):
        loc = ""
        if path is not None:
            loc += f"{path}:"
        if line is not None:
            loc += f"{line}:"
        super().__init__(f"{loc} {message}" if loc else message)
        self.path = path
        self.line = line


class ProtocolError(PipelineError):
    """A detection source was driven out of contract (e.g. frame ids went backwards)."""


class CategoryError(PipelineError):
    """A category id outside the fixed 0..5 map."""


class RangeError(ParseError):
    """A normalized annotation coordinate outside [0, 1]."""


class OrderError(PipelineError):
    """Timestamps or frame ids that must increase did not."""


class ConfigError(PipelineError):
    """Invalid configuration values (ratios, thresholds, sizes)."""


class FormatError(PipelineError):
    """A file with the wrong bit depth, channel count, or structure."""
