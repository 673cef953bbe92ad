"""Exception hierarchy.

Every error raised by the toolkit derives from :class:`DomainAdaptError`, so
the command line can map them to exit code 1 in one place.
"""


class DomainAdaptError(Exception):
    """Base class for toolkit failures."""


class UsageError(DomainAdaptError):
    """Bad arguments or configuration; the CLI maps this to exit code 2."""


class InvalidConfig(UsageError):
    pass


class UnknownMethod(UsageError):
    pass


# -- dataset validation -----------------------------------------------------

class DatasetError(DomainAdaptError):
    pass


class NonFiniteValue(DatasetError):
    def __init__(self, row, col):
        super().__init__(f"NonFiniteValue at row {row}, column {col}")
        self.row = row
        self.col = col


class RaggedRow(DatasetError):
    def __init__(self, line, expected=None, got=None):
        msg = f"RaggedRow at line {line}"
        if expected is not None:
            msg += f" (expected {expected} entries, got {got})"
        super().__init__(msg)
        self.line = line


class LabelCountMismatch(DatasetError):
    pass


class NegativeLabel(DatasetError):
    def __init__(self, index, value):
        super().__init__(f"NegativeLabel {value} at index {index}")
        self.index = index


class EmptyDataset(DatasetError):
    pass


class DimMismatch(DomainAdaptError):
    pass


class ShapeMismatch(DimMismatch):
    pass


class NotPSD(DomainAdaptError):
    pass


# -- io ----------------------------------------------------------------------

class FormatError(DomainAdaptError):
    pass


class NonNumericCell(FormatError):
    def __init__(self, line, col):
        super().__init__(f"NonNumericCell at line {line}, column {col}")
        self.line = line
        self.col = col


class NonIntegerLabel(FormatError):
    def __init__(self, line):
        super().__init__(f"NonIntegerLabel at line {line}")
        self.line = line


class EmptyFile(FormatError):
    pass


class BadMagic(FormatError):
    pass


class UnsupportedDatatype(FormatError):
    pass


class UnsupportedDim(FormatError):
    pass


class TruncatedFile(FormatError):
    pass


class CompressedInput(FormatError):
    pass


class IoFailure(DomainAdaptError):
    pass


# -- algorithms ----------------------------------------------------------------

class MissingSourceLabels(DomainAdaptError):
    pass


class DegenerateSubspace(DomainAdaptError):
    pass


class SubspaceTooLarge(DomainAdaptError):
    pass


class EigenFailure(DomainAdaptError):
    pass


class SinkhornDiverged(DomainAdaptError):
    pass


class ThresholdTooLarge(DomainAdaptError):
    pass


class NotNormalized(DomainAdaptError):
    pass


# -- metrics / embedding -------------------------------------------------------

class TooFewSamples(DomainAdaptError):
    pass


class ConstantImage(DomainAdaptError):
    pass


class NoValidSlices(DomainAdaptError):
    pass


class TooFewPoints(DomainAdaptError):
    pass


class PerplexityInfeasible(DomainAdaptError):
    pass
