"""Engine error hierarchy and the machine-readable diagnostic catalog.

Every error the engine can surface carries a stable ``kind`` string. The CLI
prints ``{"kind": ..., "message": ..., "details": ...}`` on stderr and the
HTTP service returns the same payload with status 400 (or 409 for write
conflicts). Clients key their rendering off ``kind``, so the catalog below is
a public contract: adding a kind is fine, renaming one is a breaking change.
"""

from __future__ import annotations

from typing import Any


class EngineError(Exception):
    """Base class for all engine errors.

    Subclasses set ``kind`` to a stable catalog identifier; ``details``
    carries structured context (offending names, positions, ...).
    """

    kind = "engine-error"

    def __init__(self, message: str, **details: Any):
        super().__init__(message)
        self.message = message
        self.details = details

    def to_diagnostic(self) -> dict[str, Any]:
        return {"kind": self.kind, "message": self.message, "details": self.details}


# -- schema level ----------------------------------------------------------

class SchemaParseError(EngineError):
    kind = "parse-error"


class DanglingEndpointError(EngineError):
    kind = "dangling-endpoint"


class InheritanceCycleError(EngineError):
    kind = "inheritance-cycle"


class DuplicateNameError(EngineError):
    kind = "duplicate-name"


class TypeMismatchError(EngineError):
    kind = "type-mismatch"


class UnresolvedReferenceError(EngineError):
    kind = "unresolved-reference"


class UnknownClassError(EngineError):
    kind = "unknown-class"


class UnknownAttributeError(EngineError):
    kind = "unknown-attribute"


class UnknownLinkError(EngineError):
    kind = "unknown-link"


class CardinalityViolationError(EngineError):
    kind = "cardinality-violation"


# -- warehouse level -------------------------------------------------------

class NameCollisionError(EngineError):
    kind = "name-collision"


class NotProjectedError(EngineError):
    kind = "not-projected"


class InvalidRestructureError(EngineError):
    kind = "invalid-restructure"


class ClosureViolationError(EngineError):
    kind = "closure-violation"


class NonBooleanPredicateError(EngineError):
    kind = "non-boolean-predicate"


# -- expressions -----------------------------------------------------------

class FormulaSyntaxError(EngineError):
    kind = "syntax-error"


class UnknownOperatorError(EngineError):
    kind = "unknown-operator"


class ArityError(EngineError):
    kind = "arity-error"


class EvaluationError(EngineError):
    kind = "evaluation-error"


class DivisionByZeroError(EvaluationError):
    kind = "division-by-zero"


class NullOperandError(EvaluationError):
    kind = "null-operand"


class EmptyAggregationError(EvaluationError):
    kind = "empty-aggregation"


class NonDateAttributeError(EngineError):
    kind = "non-date-attribute"


# -- temporal store --------------------------------------------------------

class SpecificAttributeHistorizationError(EngineError):
    kind = "specific-attribute-historization"


class OutOfOrderRunError(EngineError):
    kind = "out-of-order-run"


class DisjointnessViolationError(EngineError):
    kind = "disjointness-violation"


class EnvironmentEndpointError(EngineError):
    kind = "endpoint-outside-environment"


class NotHistorizedError(EngineError):
    kind = "not-historized"


class UnknownObjectError(EngineError):
    kind = "unknown-object"


# -- marts -----------------------------------------------------------------

class NotRepresentativeError(EngineError):
    kind = "not-representative"


class FactAlreadyDefinedError(EngineError):
    kind = "fact-already-defined"


class NonDependentClassError(EngineError):
    kind = "non-dependent-class"


class EmptySampleError(EngineError):
    kind = "empty-sample"


class UnknownDimensionError(EngineError):
    kind = "unknown-dimension"


class ParameterCollisionError(EngineError):
    kind = "parameter-collision"


class HierarchyCycleError(EngineError):
    kind = "hierarchy-cycle"


class HierarchyDependencyError(EngineError):
    kind = "hierarchy-dependency"


class ComplexMeasureError(EngineError):
    kind = "complex-measure"


class AmbiguousLinkageError(EngineError):
    kind = "ambiguous-linkage"


class ValidationDiagnosticsError(EngineError):
    kind = "validation-diagnostics"


# -- codegen / project / service --------------------------------------------

class UnvalidatedDefinitionError(EngineError):
    kind = "unvalidated-definition"


class PlanExecutionError(EngineError):
    kind = "plan-execution-error"


class ProjectFormatError(EngineError):
    kind = "project-format-error"


class ReplayMismatchError(EngineError):
    kind = "replay-mismatch"


class SourceHashMismatchError(EngineError):
    kind = "source-hash-mismatch"


class VersionConflictError(EngineError):
    kind = "version-conflict"


class UnknownMartError(EngineError):
    kind = "unknown-mart"


def _collect_kinds() -> list[str]:
    kinds: set[str] = set()
    stack: list[type] = [EngineError]
    while stack:
        cls = stack.pop()
        kinds.add(cls.kind)
        stack.extend(cls.__subclasses__())
    return sorted(kinds)


#: Every diagnostic kind the engine can emit. Clients (the admin studio in
#: particular) test that each kind has a rendering.
DIAGNOSTIC_KINDS: list[str] = _collect_kinds()
