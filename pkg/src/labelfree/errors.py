"""Exception hierarchy shared by the parsing, estimation and CLI layers."""


class LabelFreeError(Exception):
    """Base class. ``code`` is the machine-readable name used in CLI reports."""

    code = "LabelFreeError"

    def __init__(self, message: str = ""):
        super().__init__(message or self.code)
        self.message = message or self.code

    def as_dict(self) -> dict:
        return {"error": self.code, "message": self.message}


class ParseError(LabelFreeError, ValueError):
    code = "ParseError"


class RaggedRows(ParseError):
    code = "RaggedRows"


class BadToken(ParseError):
    code = "BadToken"


class BadLabel(ParseError):
    code = "BadLabel"


class EmptyCell(ParseError):
    code = "EmptyCell"


class TooFewClassifiers(ParseError):
    code = "TooFewClassifiers"


class InsufficientSamples(LabelFreeError, ValueError):
    code = "InsufficientSamples"


class ParamOutOfRange(LabelFreeError, ValueError):
    code = "ParamOutOfRange"


class BOutOfRange(ParamOutOfRange):
    code = "BOutOfRange"


class SpecOutOfRange(ParamOutOfRange):
    code = "SpecOutOfRange"


class PerturbationOutOfRange(ParamOutOfRange):
    code = "PerturbationOutOfRange"


class BadSubset(LabelFreeError, ValueError):
    code = "BadSubset"


class OneClassOnly(LabelFreeError, ValueError):
    code = "OneClassOnly"


class NonPositiveValue(LabelFreeError, ValueError):
    code = "NonPositiveValue"


class UnclippedAccuracies(LabelFreeError, ValueError):
    code = "UnclippedAccuracies"


class EstimatorDegeneracy(LabelFreeError, ArithmeticError):
    """Raised when the data carry no usable signal for an estimator."""

    code = "EstimatorDegeneracy"


class DegenerateSpectrum(EstimatorDegeneracy):
    code = "DegenerateSpectrum"


class DegenerateDesign(EstimatorDegeneracy):
    code = "DegenerateDesign"
