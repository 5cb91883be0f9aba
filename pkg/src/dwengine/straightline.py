"""Stack-machine formula execution, independent of the tree walker.

Formulas compile to a flat postfix program executed with an explicit value
stack. Attribute access goes through caller-supplied lookup functions, so
this module has no notion of schemas or link navigation. The refresh-plan
executor runs on it, and the test suite uses it as the second opinion
against the recursive evaluator.
"""

from __future__ import annotations

import datetime as _dt
from decimal import Decimal
from typing import Any, Callable

from .errors import (
    DivisionByZeroError,
    EmptyAggregationError,
    EvaluationError,
    NonDateAttributeError,
    NullOperandError,
)
from .expressions import (
    AGGREGATION_OPS,
    COMPARISON_OPS,
    DATEPART_OPS,
    SCALAR_OPS,
    WEEKDAY_LABELS,
    Node,
)

# instruction: (opcode, payload)
#   push      constant
#   load      (class | None, attribute)         -> scalar value
#   aggregate (op, (class | None, attribute))   -> folded collection value
#   apply     (op, argument count)

ScalarLookup = Callable[[str | None, str], Any]
CollectionLookup = Callable[[str | None, str], list]


def compile_formula(root: Node) -> list[tuple[str, Any]]:
    program: list[tuple[str, Any]] = []

    def emit(node: Node) -> None:
        if node.op == "lit":
            program.append(("push", node.value))
        elif node.op == "ref":
            program.append(("load", node.value))
        elif node.op in AGGREGATION_OPS:
            child = node.children[0]
            if child.op != "ref":
                raise EvaluationError(f"{node.op} takes an attribute reference")
            program.append(("aggregate", (node.op, child.value)))
        else:
            for child in node.children:
                emit(child)
            program.append(("apply", (node.op, len(node.children))))

    emit(root)
    return program


def _num(value: Any) -> Decimal:
    if isinstance(value, bool) or not isinstance(value, (int, Decimal)):
        raise EvaluationError(f"expected a number, got {value!r}")
    return Decimal(value) if isinstance(value, int) else value


def _fold(op: str, values: list) -> Any:
    present = [v for v in values if v is not None]
    if op == "count":
        return len(present)
    if op == "sum":
        total = Decimal(0)
        for v in present:
            total = total + _num(v)
        return total
    if not present:
        raise EmptyAggregationError(f"{op} over an empty collection")
    if op == "average":
        total = Decimal(0)
        for v in present:
            total = total + _num(v)
        return total / Decimal(len(present))
    nums = [_num(v) for v in present]
    return min(nums) if op == "min" else max(nums)


def _apply(op: str, args: list) -> Any:
    if op in SCALAR_OPS:
        left, right = args
        if left is None or right is None:
            raise NullOperandError(f"{op} over absent operand")
        l, r = _num(left), _num(right)
        if op == "add":
            return l + r
        if op == "subtract":
            return l - r
        if op == "multiply":
            return l * r
        if r == 0:
            raise DivisionByZeroError("division by zero")
        return l / r
    if op in COMPARISON_OPS:
        left, right = args
        if left is None or right is None:
            raise NullOperandError(f"{op} over absent operand")
        same_family = (
            (isinstance(left, (int, Decimal)) and not isinstance(left, bool)
             and isinstance(right, (int, Decimal)) and not isinstance(right, bool))
            or (isinstance(left, str) and isinstance(right, str))
            or (isinstance(left, _dt.date) and isinstance(right, _dt.date))
            or (isinstance(left, bool) and isinstance(right, bool))
        )
        if op == "equal":
            if isinstance(left, int) and not isinstance(left, bool):
                left = Decimal(left)
            if isinstance(right, int) and not isinstance(right, bool):
                right = Decimal(right)
            return same_family and left == right
        if not same_family or isinstance(left, bool):
            raise EvaluationError(
                f"cannot order {type(left).__name__} against {type(right).__name__}")
        l = Decimal(left) if isinstance(left, int) else left
        r = Decimal(right) if isinstance(right, int) else right
        return l > r if op == "greater" else l < r
    if op == "and":
        _bools(args)
        return all(args)
    if op == "or":
        _bools(args)
        return any(args)
    if op == "not":
        _bools(args)
        return not args[0]
    if op in DATEPART_OPS:
        value = args[0]
        if value is None:
            raise NullOperandError(f"{op} over absent operand")
        if not isinstance(value, _dt.date):
            raise NonDateAttributeError(f"{op} over non-date value {value!r}")
        if op == "month":
            return value.month
        if op == "year":
            return value.year
        if op == "quarter":
            return (value.month + 2) // 3
        return WEEKDAY_LABELS[value.weekday()]
    raise EvaluationError(f"unknown operator {op!r}")


def _bools(args: list) -> None:
    for a in args:
        if not isinstance(a, bool):
            raise EvaluationError(f"boolean operator over non-boolean {a!r}")


def run(program: list[tuple[str, Any]], scalar: ScalarLookup,
        collection: CollectionLookup) -> Any:
    stack: list[Any] = []
    for opcode, payload in program:
        if opcode == "push":
            stack.append(payload)
        elif opcode == "load":
            stack.append(scalar(*payload))
        elif opcode == "aggregate":
            op, target = payload
            stack.append(_fold(op, collection(*target)))
        else:
            op, argc = payload
            args = stack[len(stack) - argc:]
            del stack[len(stack) - argc:]
            stack.append(_apply(op, args))
    if len(stack) != 1:
        raise EvaluationError("malformed program")
    return stack[0]


def run_tree(root: Node, scalar: ScalarLookup, collection: CollectionLookup) -> Any:
    return run(compile_formula(root), scalar, collection)
