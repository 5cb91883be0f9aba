"""Formula trees: parsing, validation, evaluation, printing.

Two tree families share one node model and one grammar:

- calculation trees produce a value: scalar arithmetic (``+ - * /``),
  aggregations (``sum average count min max``) and date parts
  (``month quarter year day_label``) over attribute references;
- selection trees produce a boolean: comparisons (``= > <``) composed with
  ``and``, ``or``, ``not``.

The canonical textual form is the interchange format between the engine, the
project log and the studio. Its shape:

    ("Actes.Quantité" * "Actes.Prix Unitaire") * "Actes.Taux Remb"
    Ville = "Toulouse" and date_creation > 1975-01-01
    sum("Actes.Quantité")

Lexical rules: a double-quoted atom containing exactly one dot is a
qualified reference ``Class.Attribute``; without a dot it is a string
literal. Bare identifiers are unqualified references resolved against the
anchor class. Dates are unquoted ISO (``1975-01-01``), numbers are exact
decimals. Keywords are case-insensitive; printing lowercases them.

Evaluation is pure. References navigate from an anchor object across schema
links (both directions, inheritance hops preserve identity); a reference
whose path crosses a many-valued hop is a collection and only valid under an
aggregation. Absent operands are errors for scalar and comparison operators;
aggregations skip them. ``average``/``min``/``max`` over nothing is an
error, ``count`` and ``sum`` are 0.
"""

from __future__ import annotations

import datetime as _dt
from dataclasses import dataclass, field
from decimal import Decimal
from typing import Any, Iterator

from .errors import (
    ArityError,
    DivisionByZeroError,
    EmptyAggregationError,
    EvaluationError,
    FormulaSyntaxError,
    NonDateAttributeError,
    NullOperandError,
)
from .jsonutil import canonical_decimal, format_number
from .schema_core import MANY, Link, ObjectGraph, SchemaGraph

SCALAR_OPS = ("add", "subtract", "multiply", "divide")
AGGREGATION_OPS = ("sum", "average", "count", "min", "max")
DATEPART_OPS = ("month", "quarter", "year", "day_label")
COMPARISON_OPS = ("equal", "greater", "less")
BOOLEAN_OPS = ("and", "or", "not")

_SYMBOL = {"add": "+", "subtract": "-", "multiply": "*", "divide": "/",
           "equal": "=", "greater": ">", "less": "<"}
_FUNCTIONS = {name: name for name in (*AGGREGATION_OPS, *DATEPART_OPS)}

WEEKDAY_LABELS = ("Monday", "Tuesday", "Wednesday", "Thursday",
                  "Friday", "Saturday", "Sunday")


@dataclass(frozen=True)
class Node:
    op: str  # "ref", "lit", or an operator name
    children: tuple["Node", ...] = ()
    value: Any = None  # ref: (class | None, attribute); lit: the constant

    def refs(self) -> Iterator["Node"]:
        if self.op == "ref":
            yield self
        for child in self.children:
            yield from child.refs()


def ref(class_name: str | None, attribute: str) -> Node:
    return Node("ref", value=(class_name, attribute))


def lit(value: Any) -> Node:
    if isinstance(value, Decimal):
        value = canonical_decimal(value)
    return Node("lit", value=value)


def _boolean_rooted(op: str) -> bool:
    return op in BOOLEAN_OPS or op in COMPARISON_OPS


@dataclass(frozen=True)
class ExpressionTree:
    """A validated-arity formula with its kind (calculation or selection)."""

    root: Node

    @property
    def kind(self) -> str:
        if _boolean_rooted(self.root.op):
            return "selection"
        if self.root.op == "lit" and isinstance(self.root.value, bool):
            return "selection"
        return "calculation"

    @property
    def text(self) -> str:
        return print_formula(self.root)


# -- arity -------------------------------------------------------------------

def check_arity(node: Node) -> None:
    n = len(node.children)
    if node.op in ("ref", "lit"):
        ok = n == 0
    elif node.op in SCALAR_OPS or node.op in COMPARISON_OPS:
        ok = n == 2
    elif node.op == "not":
        ok = n == 1
    elif node.op in AGGREGATION_OPS or node.op in DATEPART_OPS:
        ok = n == 1
    elif node.op in ("and", "or"):
        ok = n >= 2
    else:
        raise FormulaSyntaxError(f"unknown operator {node.op!r}", operator=node.op)
    if not ok:
        raise ArityError(f"operator {node.op!r} cannot take {n} operand(s)",
                         operator=node.op, arity=n)
    for child in node.children:
        check_arity(child)


# -- lexer -------------------------------------------------------------------

_KEYWORDS = ("and", "or", "not", "true", "false")


@dataclass(frozen=True)
class _Token:
    kind: str  # op lparen rparen comma quoted ident number date end
    text: str
    pos: int


def _is_ident_char(ch: str) -> bool:
    return ch.isalnum() or ch == "_"


def _lex(text: str) -> list[_Token]:
    tokens: list[_Token] = []
    i, n = 0, len(text)
    while i < n:
        ch = text[i]
        if ch.isspace():
            i += 1
            continue
        if ch in "+-*/=<>":
            tokens.append(_Token("op", ch, i))
            i += 1
            continue
        if ch == "(":
            tokens.append(_Token("lparen", ch, i))
            i += 1
            continue
        if ch == ")":
            tokens.append(_Token("rparen", ch, i))
            i += 1
            continue
        if ch == ",":
            tokens.append(_Token("comma", ch, i))
            i += 1
            continue
        if ch == "\"":
            j = i + 1
            while j < n and text[j] != "\"":
                j += 1
            if j >= n:
                raise FormulaSyntaxError(f"unterminated quote at position {i}", position=i)
            tokens.append(_Token("quoted", text[i + 1:j], i))
            i = j + 1
            continue
        if ch.isdigit():
            # A contiguous ISO date wins over subtraction: 1975-01-01 is one token.
            if (i + 10 <= n and text[i:i + 10].count("-") == 2
                    and text[i + 4] == "-" and text[i + 7] == "-"
                    and text[i:i + 4].isdigit() and text[i + 5:i + 7].isdigit()
                    and text[i + 8:i + 10].isdigit()):
                tokens.append(_Token("date", text[i:i + 10], i))
                i += 10
                continue
            j = i
            while j < n and text[j].isdigit():
                j += 1
            if j < n and text[j] == "." and j + 1 < n and text[j + 1].isdigit():
                j += 1
                while j < n and text[j].isdigit():
                    j += 1
            tokens.append(_Token("number", text[i:j], i))
            i = j
            continue
        if _is_ident_char(ch):
            j = i
            while j < n and _is_ident_char(text[j]):
                j += 1
            tokens.append(_Token("ident", text[i:j], i))
            i = j
            continue
        raise FormulaSyntaxError(f"unexpected character {ch!r} at position {i}",
                                 position=i, character=ch)
    tokens.append(_Token("end", "", n))
    return tokens


# -- parser ------------------------------------------------------------------

class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.tokens = _lex(text)
        self.i = 0

    def peek(self) -> _Token:
        return self.tokens[self.i]

    def next(self) -> _Token:
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, kind: str) -> _Token:
        tok = self.next()
        if tok.kind != kind:
            raise FormulaSyntaxError(
                f"expected {kind} at position {tok.pos}, got {tok.text!r}",
                position=tok.pos)
        return tok

    def _keyword(self, tok: _Token) -> str | None:
        if tok.kind == "ident" and tok.text.lower() in _KEYWORDS:
            return tok.text.lower()
        return None

    def parse(self) -> Node:
        node = self.or_expr()
        tok = self.peek()
        if tok.kind != "end":
            raise FormulaSyntaxError(
                f"trailing input at position {tok.pos}: {tok.text!r}", position=tok.pos)
        return node

    def or_expr(self) -> Node:
        parts = [self.and_expr()]
        while self._keyword(self.peek()) == "or":
            self.next()
            parts.append(self.and_expr())
        return parts[0] if len(parts) == 1 else Node("or", tuple(parts))

    def and_expr(self) -> Node:
        parts = [self.not_expr()]
        while self._keyword(self.peek()) == "and":
            self.next()
            parts.append(self.not_expr())
        return parts[0] if len(parts) == 1 else Node("and", tuple(parts))

    def not_expr(self) -> Node:
        if self._keyword(self.peek()) == "not":
            self.next()
            # Call form not(a, b, ...) parses its operands, then checks arity.
            if self.peek().kind == "lparen":
                self.next()
                args = self._args()
                if len(args) != 1:
                    raise ArityError(
                        f"operator 'not' cannot take {len(args)} operand(s)",
                        operator="not", arity=len(args))
                return Node("not", (args[0],))
            return Node("not", (self.not_expr(),))
        return self.comparison()

    def _args(self) -> list[Node]:
        args = [self.or_expr()]
        while self.peek().kind == "comma":
            self.next()
            args.append(self.or_expr())
        self.expect("rparen")
        return args

    def comparison(self) -> Node:
        left = self.additive()
        tok = self.peek()
        if tok.kind == "op" and tok.text in ("=", ">", "<"):
            self.next()
            right = self.additive()
            op = {"=": "equal", ">": "greater", "<": "less"}[tok.text]
            node = Node(op, (left, right))
            nxt = self.peek()
            if nxt.kind == "op" and nxt.text in ("=", ">", "<"):
                raise FormulaSyntaxError(
                    f"chained comparison at position {nxt.pos}", position=nxt.pos)
            return node
        return left

    def additive(self) -> Node:
        node = self.multiplicative()
        while True:
            tok = self.peek()
            if tok.kind == "op" and tok.text in ("+", "-"):
                self.next()
                right = self.multiplicative()
                node = Node("add" if tok.text == "+" else "subtract", (node, right))
            else:
                return node

    def multiplicative(self) -> Node:
        node = self.atom()
        while True:
            tok = self.peek()
            if tok.kind == "op" and tok.text in ("*", "/"):
                self.next()
                right = self.atom()
                node = Node("multiply" if tok.text == "*" else "divide", (node, right))
            else:
                return node

    def atom(self) -> Node:
        tok = self.next()
        if tok.kind == "lparen":
            node = self.or_expr()
            self.expect("rparen")
            return node
        if tok.kind == "op" and tok.text == "-":
            nxt = self.peek()
            if nxt.kind == "number":
                self.next()
                return lit(-self._number(nxt))
            raise FormulaSyntaxError(
                f"unexpected '-' at position {tok.pos}", position=tok.pos)
        if tok.kind == "number":
            return lit(self._number(tok))
        if tok.kind == "date":
            try:
                return lit(_dt.date.fromisoformat(tok.text))
            except ValueError:
                raise FormulaSyntaxError(
                    f"invalid date {tok.text!r} at position {tok.pos}",
                    position=tok.pos) from None
        if tok.kind == "quoted":
            dots = tok.text.count(".")
            if dots == 0:
                return lit(tok.text)
            if dots == 1:
                cls, attr = tok.text.split(".")
                if not cls or not attr:
                    raise FormulaSyntaxError(
                        f"malformed reference {tok.text!r} at position {tok.pos}",
                        position=tok.pos)
                return ref(cls, attr)
            raise FormulaSyntaxError(
                f"ambiguous quoted atom {tok.text!r} at position {tok.pos} "
                "(one dot makes a reference, none a string)", position=tok.pos)
        if tok.kind == "ident":
            word = tok.text.lower()
            if word == "true":
                return lit(True)
            if word == "false":
                return lit(False)
            if word in ("and", "or", "not"):
                raise FormulaSyntaxError(
                    f"misplaced keyword {tok.text!r} at position {tok.pos}",
                    position=tok.pos)
            if word in _FUNCTIONS and self.peek().kind == "lparen":
                self.next()
                args = self._args()
                if len(args) != 1:
                    raise ArityError(
                        f"operator {word!r} cannot take {len(args)} operand(s)",
                        operator=word, arity=len(args))
                return Node(_FUNCTIONS[word], (args[0],))
            return ref(None, tok.text)
        raise FormulaSyntaxError(
            f"unexpected token {tok.text!r} at position {tok.pos}", position=tok.pos)

    @staticmethod
    def _number(tok: _Token) -> Decimal | int:
        if "." in tok.text:
            return Decimal(tok.text)
        return int(tok.text)


def parse_formula(text: str) -> ExpressionTree:
    """Parse canonical formula text into a tree with verified arities."""
    root = _Parser(text).parse()
    check_arity(root)
    return ExpressionTree(root)


# -- printer -----------------------------------------------------------------

def _needs_parens(child: Node) -> bool:
    return child.op in SCALAR_OPS or child.op in COMPARISON_OPS or child.op in BOOLEAN_OPS


def print_formula(node: Node) -> str:
    """Canonical text; parse(print(tree)) reproduces the tree."""
    if node.op == "lit":
        v = node.value
        if isinstance(v, bool):
            return "true" if v else "false"
        if isinstance(v, (int, Decimal)):
            return format_number(v) if v >= 0 else "-" + format_number(-v)
        if isinstance(v, _dt.date):
            return v.isoformat()
        if isinstance(v, str):
            if "\"" in v or "." in v:
                raise FormulaSyntaxError(
                    f"string literal {v!r} is not printable in the formula grammar")
            return f"\"{v}\""
        raise FormulaSyntaxError(f"unprintable literal {v!r}")
    if node.op == "ref":
        cls, attr = node.value
        if cls is None:
            if not attr or not all(_is_ident_char(c) for c in attr):
                raise FormulaSyntaxError(
                    f"unqualified reference {attr!r} is not printable")
            return attr
        return f"\"{cls}.{attr}\""
    if node.op in AGGREGATION_OPS or node.op in DATEPART_OPS:
        return f"{node.op}({print_formula(node.children[0])})"
    if node.op == "not":
        child = node.children[0]
        inner = print_formula(child)
        return f"not ({inner})" if child.op in ("and", "or") else f"not {inner}"
    if node.op in ("and", "or"):
        parts = []
        for child in node.children:
            inner = print_formula(child)
            parts.append(f"({inner})" if child.op in ("and", "or") else inner)
        return f" {node.op} ".join(parts)
    if node.op in _SYMBOL:
        left, right = node.children
        lhs = print_formula(left)
        rhs = print_formula(right)
        if _needs_parens(left):
            lhs = f"({lhs})"
        if _needs_parens(right):
            rhs = f"({rhs})"
        return f"{lhs} {_SYMBOL[node.op]} {rhs}"
    raise FormulaSyntaxError(f"unknown operator {node.op!r}")


# -- navigation and contexts -------------------------------------------------

@dataclass(frozen=True)
class Hop:
    link: Link
    forward: bool

    @property
    def multi(self) -> bool:
        if self.link.kind == "inheritance":
            return False
        end = "target" if self.forward else "source"
        mx = self.link.card(end).max
        return mx is MANY or mx > 1


@dataclass(frozen=True)
class PathInfo:
    target_class: str
    hops: tuple[Hop, ...]

    @property
    def multi(self) -> bool:
        return any(h.multi for h in self.hops)

    def witness(self) -> list[str]:
        out = []
        for hop in self.hops:
            arrow = "->" if hop.forward else "<-"
            out.append(f"{hop.link.name}{arrow}")
        return out


def reachable_paths(schema: SchemaGraph, anchor: str) -> dict[str, PathInfo]:
    """Breadth-first shortest link paths from the anchor to every class.

    Exploration order is deterministic (link names sorted, forward before
    reverse), so witness paths are stable across runs.
    """
    schema.get_class(anchor)
    paths: dict[str, PathInfo] = {anchor: PathInfo(anchor, ())}
    queue = [anchor]
    while queue:
        current = queue.pop(0)
        base = paths[current]
        for link in sorted(schema.links.values(), key=lambda l: l.name):
            steps = []
            if link.source == current:
                steps.append(Hop(link, True))
            if link.target == current:
                steps.append(Hop(link, False))
            for hop in steps:
                nxt = hop.link.target if hop.forward else hop.link.source
                if nxt not in paths:
                    paths[nxt] = PathInfo(nxt, base.hops + (hop,))
                    queue.append(nxt)
    return paths


@dataclass
class EvaluationContext:
    """Where references resolve: a schema, an anchor class, optional aliases.

    ``aliases`` maps class name -> exposed attribute name -> stored attribute
    name. The warehouse uses it so formulas can keep writing source attribute
    names against derived classes.
    """

    schema: SchemaGraph
    anchor: str
    aliases: dict[str, dict[str, str]] = field(default_factory=dict)

    def __post_init__(self):
        self._paths = reachable_paths(self.schema, self.anchor)

    def resolve(self, node: Node) -> tuple[str, str, PathInfo] | None:
        """(class, stored attribute, path) for a ref node, or None."""
        cls, attr = node.value
        cls = cls or self.anchor
        path = self._paths.get(cls)
        if path is None:
            return None
        stored = self.aliases.get(cls, {}).get(attr, attr)
        attrs = self.schema.effective_attributes(cls) if cls in self.schema.classes else {}
        if stored not in attrs:
            return None
        return cls, stored, path

    def attribute_type(self, cls: str, stored: str):
        return self.schema.effective_attributes(cls)[stored].type


def validate(tree: ExpressionTree, context: EvaluationContext) -> list[dict[str, Any]]:
    """Static diagnostics; an empty list means the tree is evaluable."""
    diags: list[dict[str, Any]] = []

    def visit(node: Node, under_aggregation: bool) -> None:
        if node.op == "ref":
            resolved = context.resolve(node)
            cls, attr = node.value
            shown = attr if cls is None else f"{cls}.{attr}"
            if resolved is None:
                diags.append({"kind": "unresolvable-reference",
                              "message": f"reference {shown!r} does not resolve from "
                                         f"class {context.anchor!r}",
                              "reference": shown})
                return
            _, _, path = resolved
            if path.multi and not under_aggregation:
                diags.append({"kind": "collection-outside-aggregation",
                              "message": f"reference {shown!r} reaches many objects; "
                                         "wrap it in an aggregation",
                              "reference": shown})
            return
        if node.op in AGGREGATION_OPS:
            child = node.children[0]
            if child.op != "ref":
                diags.append({"kind": "invalid-aggregation-operand",
                              "message": f"{node.op} takes an attribute reference"})
                return
            resolved = context.resolve(child)
            if resolved is None:
                visit(child, True)
                return
            _, _, path = resolved
            if not path.multi:
                cls, attr = child.value
                shown = attr if cls is None else f"{cls}.{attr}"
                diags.append({"kind": "aggregation-over-scalar",
                              "message": f"{node.op} over single-valued path to {shown!r}",
                              "reference": shown})
            return
        if node.op in DATEPART_OPS:
            child = node.children[0]
            if child.op == "ref":
                resolved = context.resolve(child)
                if resolved is None:
                    visit(child, under_aggregation)
                    return
                cls, stored, path = resolved
                if context.attribute_type(cls, stored).kind != "date":
                    diags.append({"kind": "non-date-attribute",
                                  "message": f"{node.op} needs a date attribute",
                                  "reference": f"{cls}.{stored}"})
                if path.multi:
                    diags.append({"kind": "collection-outside-aggregation",
                                  "message": f"{node.op} over a many-valued path"})
            elif not (child.op == "lit" and isinstance(child.value, _dt.date)):
                diags.append({"kind": "non-date-attribute",
                              "message": f"{node.op} needs a date operand"})
            return
        for child in node.children:
            visit(child, under_aggregation)

    visit(tree.root, False)
    return diags


# -- evaluation ---------------------------------------------------------------

@dataclass
class Binding:
    """An anchor object inside a navigable batch of snapshots."""

    objects: ObjectGraph
    anchor_id: str


def _navigate(context: EvaluationContext, binding: Binding, path: PathInfo) -> list[str]:
    current = [(context.anchor, binding.anchor_id)]
    for hop in path.hops:
        nxt: list[tuple[str, str]] = []
        seen: set[str] = set()
        if hop.link.kind == "inheritance":
            # Same entity, viewed as the other class.
            next_class = hop.link.target if hop.forward else hop.link.source
            for cls, oid in current:
                if oid not in seen and binding.objects.get(next_class, oid) is not None:
                    seen.add(oid)
                    nxt.append((next_class, oid))
        else:
            next_class = hop.link.target if hop.forward else hop.link.source
            for cls, oid in current:
                snap = binding.objects.get(cls, oid)
                if snap is None:
                    continue
                for tid in binding.objects.follow(snap, hop.link, hop.forward):
                    if tid not in seen:
                        seen.add(tid)
                        nxt.append((next_class, tid))
        current = nxt
    return [oid for _, oid in current]


def _ref_values(context: EvaluationContext, binding: Binding, node: Node) -> list[Any]:
    resolved = context.resolve(node)
    if resolved is None:
        cls, attr = node.value
        shown = attr if cls is None else f"{cls}.{attr}"
        raise EvaluationError(f"unresolvable reference {shown!r}", reference=shown)
    cls, stored, path = resolved
    ids = _navigate(context, binding, path)
    return [binding.objects.value(cls, oid, stored) for oid in ids]


def _as_number(value: Any, where: str) -> Decimal:
    if isinstance(value, bool):
        raise EvaluationError(f"{where}: boolean is not a number")
    if isinstance(value, int):
        return Decimal(value)
    if isinstance(value, Decimal):
        return value
    raise EvaluationError(f"{where}: expected a number, got {value!r}")


def _compare(op: str, left: Any, right: Any) -> bool:
    if left is None or right is None:
        raise NullOperandError(f"comparison {op} over absent operand")
    num_kinds = (int, Decimal)
    if isinstance(left, bool) or isinstance(right, bool):
        if op == "equal":
            return isinstance(left, bool) and isinstance(right, bool) and left == right
        raise EvaluationError(f"{op} is not defined on booleans")
    if isinstance(left, num_kinds) and isinstance(right, num_kinds):
        l, r = Decimal(left) if isinstance(left, int) else left, \
            Decimal(right) if isinstance(right, int) else right
    elif isinstance(left, _dt.date) and isinstance(right, _dt.date):
        l, r = left, right
    elif isinstance(left, str) and isinstance(right, str):
        l, r = left, right
    else:
        if op == "equal":
            return False
        raise EvaluationError(
            f"cannot order {type(left).__name__} against {type(right).__name__}")
    if op == "equal":
        return l == r
    if op == "greater":
        return l > r
    return l < r


def evaluate(tree: ExpressionTree, context: EvaluationContext, binding: Binding) -> Any:
    """Evaluate the tree for one anchor object. Deterministic and pure."""
    return _eval(tree.root, context, binding)


def _eval(node: Node, context: EvaluationContext, binding: Binding) -> Any:
    op = node.op
    if op == "lit":
        return node.value
    if op == "ref":
        values = _ref_values(context, binding, node)
        if len(values) > 1:
            cls, attr = node.value
            raise EvaluationError(
                f"reference reached {len(values)} objects in scalar position",
                reference=attr if cls is None else f"{cls}.{attr}")
        return values[0] if values else None
    if op in SCALAR_OPS:
        left = _eval(node.children[0], context, binding)
        right = _eval(node.children[1], context, binding)
        if left is None or right is None:
            raise NullOperandError(f"{op} over absent operand")
        l, r = _as_number(left, op), _as_number(right, op)
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
        left = _eval(node.children[0], context, binding)
        right = _eval(node.children[1], context, binding)
        return _compare(op, left, right)
    if op in ("and", "or"):
        result = op == "and"
        for child in node.children:
            value = _eval(child, context, binding)
            if not isinstance(value, bool):
                raise EvaluationError(f"{op} over non-boolean operand {value!r}")
            if op == "and":
                result = result and value
            else:
                result = result or value
        return result
    if op == "not":
        value = _eval(node.children[0], context, binding)
        if not isinstance(value, bool):
            raise EvaluationError(f"not over non-boolean operand {value!r}")
        return not value
    if op in AGGREGATION_OPS:
        child = node.children[0]
        if child.op != "ref":
            raise EvaluationError(f"{op} takes an attribute reference")
        values = [v for v in _ref_values(context, binding, child) if v is not None]
        if op == "count":
            return len(values)
        if op == "sum":
            total = Decimal(0)
            for v in values:
                total += _as_number(v, "sum")
            return total
        if not values:
            raise EmptyAggregationError(f"{op} over an empty collection")
        if op == "average":
            total = Decimal(0)
            for v in values:
                total += _as_number(v, "average")
            return total / Decimal(len(values))
        numbers = [_as_number(v, op) for v in values]
        return min(numbers) if op == "min" else max(numbers)
    if op in DATEPART_OPS:
        value = _eval(node.children[0], context, binding)
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


# -- date-origin parameters ---------------------------------------------------

#: Parameter names generated for a date attribute, in display order.
DATE_PARAMETER_OPS = (("Libelle_jour", "day_label"), ("Mois", "month"),
                      ("Trimestre", "quarter"), ("Annee", "year"))


def derive_date_parameters(class_name: str, attribute: str,
                           context: EvaluationContext) -> dict[str, ExpressionTree]:
    """Day-label/month/quarter/year calculation trees over a date attribute."""
    reference = ref(class_name, attribute)
    resolved = context.resolve(reference)
    if resolved is None:
        raise NonDateAttributeError(
            f"no attribute {class_name}.{attribute} reachable from {context.anchor!r}",
            reference=f"{class_name}.{attribute}")
    cls, stored, _ = resolved
    if context.attribute_type(cls, stored).kind != "date":
        raise NonDateAttributeError(
            f"{class_name}.{attribute} is not date-typed",
            reference=f"{class_name}.{attribute}")
    return {name: ExpressionTree(Node(op, (reference,)))
            for name, op in DATE_PARAMETER_OPS}
