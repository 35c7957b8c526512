"""Exception taxonomy for the pipeline.

The hierarchy is load-bearing: the CLI maps error families onto process
exit codes (validation -> 2, model client -> 3, renderer -> 4), so new
exceptions should subclass the family they belong to.
"""

from __future__ import annotations


class ComuiError(Exception):
    """Base class for everything raised deliberately by this package."""


class ValidationError(ComuiError):
    """Bad inputs: schemas, geometry, stage preconditions.  Exit code 2."""


class ParseError(ValidationError):
    """An input file could not be parsed at all."""


class ImageDecodeError(ValidationError):
    """Image bytes that do not decode to a raster."""


class EmptyInput(ValidationError):
    """An operation that needs at least one item got none."""


class StageOrderError(ValidationError):
    """A pipeline stage was invoked before its prerequisites ran."""


class NotAPartition(ValidationError):
    """Block groups that do not partition the block set."""


class LabelSetMismatch(ValidationError):
    """Two clusterings defined over different item sets."""


class BothEmpty(ValidationError):
    """A tree comparison where neither side has any nodes."""


class MissingEntry(ValidationError):
    """A precomputed distance matrix has no entry for a requested pair."""


class MissingSnippet(ValidationError):
    """Integration found a placeholder marker with no snippet to fill it."""


class ClientError(ComuiError):
    """Model client family: transport, fixtures, reply quality.  Exit code 3."""


class ReplyParseError(ClientError):
    """A model reply that does not parse into the expected shape."""


class ReplayMissError(ClientError):
    """Replay mode was asked for a request with no recorded fixture."""


class MarkerValidationError(ClientError):
    """A generated skeleton whose placeholder markers fail validation."""


class OutputParseError(ClientError):
    """A component-generation reply missing required tags."""


class FeedbackApplyError(ClientError):
    """A feedback-application reply with no usable code."""


class RenderCommandError(ComuiError):
    """The external render command failed or produced no image.  Exit code 4."""
