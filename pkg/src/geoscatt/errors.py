"""Exception hierarchy shared across the pipeline."""


class GeoscattError(Exception):
    """Base class for every error raised by this package."""

    category = "error"


# --- SMILES parsing ---------------------------------------------------------

class ParseError(GeoscattError):
    """Malformed SMILES input. Carries the offending position."""

    category = "parse"

    def __init__(self, message, position=None):
        if position is not None:
            message = f"{message} (at position {position})"
        super().__init__(message)
        self.position = position


class EmptyInput(ParseError):
    category = "parse.empty"


class UnknownElement(ParseError):
    category = "parse.element"


class UnmatchedRingBond(ParseError):
    category = "parse.ring"


class UnbalancedParenthesis(ParseError):
    category = "parse.paren"


# --- preprocessing / dataset ------------------------------------------------

class EmptyAfterPreprocess(GeoscattError):
    category = "ingest.empty"


class DegenerateSplit(GeoscattError):
    category = "split.degenerate"


class DegenerateLabels(GeoscattError):
    category = "labels.degenerate"


# --- linear algebra ---------------------------------------------------------

class NotSymmetric(GeoscattError):
    category = "linalg.symmetry"


class NoConvergence(GeoscattError):
    category = "linalg.convergence"


# --- filters / features -----------------------------------------------------

class InvalidScaleParams(GeoscattError):
    category = "filters.scale"


class DimensionMismatch(GeoscattError):
    category = "shapes.dimension"


class ShapeMismatch(GeoscattError):
    category = "shapes.parameter"


class SizeTooSmall(GeoscattError):
    category = "image.size"


class ZeroVariance(GeoscattError):
    category = "metagraph.variance"


class EmptyInputError(GeoscattError):
    category = "metrics.empty"


class FormatError(GeoscattError):
    """Corrupt or unrecognized on-disk artifact."""

    category = "io.format"


class ConfigError(GeoscattError):
    category = "config"
