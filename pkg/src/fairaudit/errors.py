"""Exception hierarchy.

Every error carries a stable ``code`` (its class name) so the CLI can report
the originating failure without parsing messages.
"""

from __future__ import annotations


class FairAuditError(Exception):
    """Base class for all toolkit errors."""

    @property
    def code(self) -> str:
        return type(self).__name__


# --- data model -------------------------------------------------------------

class SchemaError(FairAuditError):
    pass


class UnsupportedCardinality(SchemaError):
    pass


class MissingColumn(FairAuditError):
    def __init__(self, column: str):
        super().__init__(f"column {column!r} not found in CSV header")
        self.column = column


class BadValue(FairAuditError):
    def __init__(self, row: int, column: str, value: str, reason: str = ""):
        msg = f"row {row}, column {column!r}: bad value {value!r}"
        if reason:
            msg += f" ({reason})"
        super().__init__(msg)
        self.row = row
        self.column = column
        self.value = value


class MissingTarget(FairAuditError):
    pass


# --- group metrics ----------------------------------------------------------

class DegenerateBins(FairAuditError):
    pass


class BinningError(FairAuditError):
    pass


class EmptyOutcomeClass(FairAuditError):
    pass


# --- individual metrics -----------------------------------------------------

class UnknownFeature(FairAuditError):
    pass


class MissingScore(FairAuditError):
    pass


# --- counterfactual ---------------------------------------------------------

class GraphError(FairAuditError):
    pass


class CycleDetected(GraphError):
    pass


class LatentWithParents(GraphError):
    pass


class Unidentifiable(GraphError):
    pass


class RankDeficient(FairAuditError):
    pass


class OneGroupOnly(FairAuditError):
    pass


class InsufficientData(FairAuditError):
    pass


class ZeroLatentCoefficient(FairAuditError):
    pass


# --- analysis / synth / cli -------------------------------------------------

class TooLarge(FairAuditError):
    pass


class DuplicateMeasure(FairAuditError):
    pass


class UnknownScenario(FairAuditError):
    pass


class ConfigError(FairAuditError):
    pass
