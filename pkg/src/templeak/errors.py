"""Exception types raised by templeak."""


class TempleakError(Exception):
    """Base class for all templeak errors."""


class MalformedAnnotation(TempleakError):
    """An annotation file is structurally invalid (missing key, bad box, wrong type)."""


class UnknownLabel(TempleakError):
    """An entity label falls outside the dataset's closed label set."""


class MalformedOcrLine(TempleakError):
    """An OCR line does not start with 8 integer coordinate fields."""


class DuplicateDocId(TempleakError):
    """Two source files map to the same document id."""


class UnknownDocId(TempleakError):
    """An operation referenced a document id absent from the corpus."""


class UnassignedDocument(TempleakError):
    """A document without a train/test assignment reached a split-sensitive operation."""


class InvalidParameter(TempleakError):
    """An argument is outside its documented range."""


class InfeasibleRatios(TempleakError):
    """A single group is larger than every split's share of the corpus."""
