"""Exception types shared across the pipeline.

Everything raised here is a data-level failure: the CLI maps any
:class:`PipelineError` (and plain OSError from file I/O) to exit code 2,
while argument/usage problems exit with code 1.
"""


class PipelineError(Exception):
    """Base class for data-level failures in the enhancement pipeline."""


class DecodeError(PipelineError):
    """Image file exists but cannot be decoded (corrupt, or unsupported bit depth)."""


class WrongSpaceError(PipelineError):
    """An operation received an image tagged with the wrong color space."""


class DimensionMismatchError(PipelineError):
    """Two images that must share dimensions do not."""


class ShapeMismatchError(PipelineError):
    """Tensor shapes are inconsistent with the requested operation."""


class BadRangeError(PipelineError):
    """Input values fall outside the declared [0, 1] range."""


class ModeMismatchError(PipelineError):
    """Network channel count does not match the requested enhancement mode."""


class FormatError(PipelineError):
    """Weight checkpoint file is malformed (bad magic, version, or shape table)."""


class MissingDirectoryError(PipelineError):
    """A dataset directory expected on disk is absent."""


class UnpairedImageError(PipelineError):
    """A low-light image has no same-named reference (or vice versa)."""


class EmptySplitError(PipelineError):
    """A dataset split that must contain images is empty."""


class TooSmallError(PipelineError):
    """Image is smaller than the metric's window size."""


class ConfigError(PipelineError):
    """Run configuration file contains unknown or invalid keys."""
