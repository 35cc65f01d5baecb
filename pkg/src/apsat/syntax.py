"""S-expression surface syntax for the IR (and for rewrite patterns).

Grammar::

    expr := name | (access expr NAT) | (transpose expr (list NAT+))
          | (cartProd expr expr) | (windows expr (shape NAT+) (shape NAT+))
          | (slice expr NAT NAT NAT) | (squeeze expr NAT) | (flatten expr)
          | (reshape expr (accessShape (shape NAT*) (shape NAT*)))
          | (pair expr expr) | (concat expr expr NAT)
          | (compute OP expr) | (systolicArray NAT NAT expr expr)

``;`` starts a comment running to the end of the line.  In pattern mode a
token ``?x`` may stand for any sub-expression or any literal argument.
"""
from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Callable, Sequence, Union

from .ir import CONSTRUCTS, APShape, Expr, Op, TensorRef, build


class ParseError(Exception):
    def __init__(self, message: str, line: int = 0, col: int = 0):
        self.line = line
        self.col = col
        super().__init__(f"{line}:{col}: {message}" if line else message)


class UnknownHead(ParseError):
    pass


class ArityError(ParseError):
    pass


@dataclass(frozen=True)
class Atom:
    text: str
    line: int
    col: int


@dataclass(frozen=True)
class SList:
    items: tuple
    line: int
    col: int


SExp = Union[Atom, SList]

_TOKEN = re.compile(r"\s+|;[^\n]*|\(|\)|[^\s();]+")


def _tokenize(text: str):
    line, line_start = 1, 0
    for m in _TOKEN.finditer(text):
        tok = m.group()
        col = m.start() - line_start + 1
        if tok[0].isspace() or tok[0] == ";":
            nl = tok.count("\n")
            if nl:
                line += nl
                line_start = m.start() + tok.rfind("\n") + 1
            continue
        yield tok, line, col


def read(text: str) -> SExp:
    """Read exactly one s-expression from ``text``."""
    tokens = list(_tokenize(text))
    if not tokens:
        raise ParseError("empty input", 1, 1)
    pos = 0

    def read_one() -> SExp:
        nonlocal pos
        tok, line, col = tokens[pos]
        pos += 1
        if tok == ")":
            raise ParseError("unbalanced ')'", line, col)
        if tok != "(":
            return Atom(tok, line, col)
        items = []
        while True:
            if pos >= len(tokens):
                raise ParseError("unclosed '('", line, col)
            if tokens[pos][0] == ")":
                pos += 1
                return SList(tuple(items), line, col)
            items.append(read_one())

    sexp = read_one()
    if pos != len(tokens):
        _, line, col = tokens[pos]
        raise ParseError("trailing input after expression", line, col)
    return sexp


# --------------------------------------------------------------------------
# Conversion from s-expressions
# --------------------------------------------------------------------------


def _is_var(s: SExp) -> bool:
    return isinstance(s, Atom) and s.text.startswith("?")


def _nat(s: SExp) -> int:
    if isinstance(s, Atom) and s.text.isdigit():
        return int(s.text)
    raise ParseError(f"expected a natural number, got {_show(s)}", s.line, s.col)


def _tagged(s: SExp, tag: str, allow_empty: bool) -> tuple[int, ...]:
    if not (isinstance(s, SList) and s.items and isinstance(s.items[0], Atom) and s.items[0].text == tag):
        raise ParseError(f"expected ({tag} ...), got {_show(s)}", s.line, s.col)
    vals = tuple(_nat(x) for x in s.items[1:])
    if not vals and not allow_empty:
        raise ParseError(f"({tag}) needs at least one entry", s.line, s.col)
    return vals


def _apshape(s: SExp) -> APShape:
    if not (isinstance(s, SList) and len(s.items) == 3 and isinstance(s.items[0], Atom)
            and s.items[0].text == "accessShape"):
        raise ParseError(f"expected (accessShape (shape ...) (shape ...)), got {_show(s)}", s.line, s.col)
    return APShape(_tagged(s.items[1], "shape", True), _tagged(s.items[2], "shape", True))


def _op(s: SExp) -> Op:
    if isinstance(s, Atom):
        for op in Op:
            if op.value == s.text:
                return op
    raise ParseError(f"expected one of dotProd/reduceSum/reduceMax, got {_show(s)}", s.line, s.col)


_LITERAL_READERS: dict[str, Callable[[SExp], object]] = {
    "nat": _nat,
    "list": lambda s: _tagged(s, "list", False),
    "shape": lambda s: _tagged(s, "shape", False),
    "apshape": _apshape,
    "op": _op,
}


def _show(s: SExp) -> str:
    if isinstance(s, Atom):
        return repr(s.text)
    return "(" + " ".join(_show(x).strip("'") for x in s.items) + ")"


def convert(
    s: SExp,
    make: Callable[[str, Sequence, Sequence], object] = build,
    var: Callable[[str], object] | None = None,
    lit_var: Callable[[str], object] | None = None,
):
    """Convert a read s-expression into a tree.

    ``make(head, literals, children)`` builds nodes.  ``var``/``lit_var``
    enable pattern variables in expression/literal positions.
    """
    if isinstance(s, Atom):
        if s.text.startswith("?"):
            if var is None:
                raise ParseError(f"pattern variable {s.text} outside a pattern", s.line, s.col)
            return var(s.text[1:])
        if s.text.isdigit():
            raise ParseError(f"expected an expression, got number {s.text}", s.line, s.col)
        return make("tensor", (s.text,), ())
    if not s.items:
        raise ParseError("empty list", s.line, s.col)
    head_atom = s.items[0]
    if not isinstance(head_atom, Atom):
        raise ParseError("expected a construct name", head_atom.line, head_atom.col)
    head = head_atom.text
    cls = CONSTRUCTS.get(head)
    if cls is None or head == "tensor":
        raise UnknownHead(f"unknown construct {head!r}", head_atom.line, head_atom.col)
    args = s.items[1:]
    if len(args) != len(cls.slots):
        raise ArityError(f"{head} takes {len(cls.slots)} operands, got {len(args)}", s.line, s.col)
    literals, children = [], []
    for kind, arg in zip(cls.slots, args):
        if kind == "expr":
            children.append(convert(arg, make, var, lit_var))
        elif lit_var is not None and _is_var(arg):
            literals.append(lit_var(arg.text[1:]))
        else:
            literals.append(_LITERAL_READERS[kind](arg))
    return make(head, literals, children)


def parse(text: str) -> Expr:
    """Parse program text into an :class:`Expr`."""
    return convert(read(text))


# --------------------------------------------------------------------------
# Printing
# --------------------------------------------------------------------------


def render_literal(kind: str, value) -> str:
    if kind == "nat":
        return str(value)
    if kind == "list":
        return "(list " + " ".join(map(str, value)) + ")"
    if kind == "shape":
        return "(shape " + " ".join(map(str, value)) + ")"
    if kind == "apshape":
        return f"(accessShape {_shape_lit(value.access)} {_shape_lit(value.compute)})"
    if kind == "op":
        return str(value)
    raise ValueError(kind)


def _shape_lit(dims) -> str:
    return "(shape" + "".join(f" {d}" for d in dims) + ")"


def render(head: str, literals: Sequence[str], children: Sequence[str]) -> str:
    """Render a node whose literal and child texts are already rendered."""
    if head == "tensor":
        return literals[0]
    lits, kids = iter(literals), iter(children)
    parts = [next(kids) if k == "expr" else next(lits) for k in CONSTRUCTS[head].slots]
    return "(" + head + " " + " ".join(parts) + ")"


def literal_texts(head: str, literals: Sequence) -> list[str]:
    if head == "tensor":
        return [str(literals[0])]
    kinds = [k for k in CONSTRUCTS[head].slots if k != "expr"]
    return [render_literal(k, v) for k, v in zip(kinds, literals)]


def pretty_print(e: Expr) -> str:
    """Canonical single-line text of ``e``."""
    if isinstance(e, TensorRef):
        return e.name
    return render(e.head, literal_texts(e.head, e.literals()), [pretty_print(c) for c in e.children()])


def pretty_print_indented(e: Expr, indent: int = 0) -> str:
    """Multi-line layout with one construct per line; parses back to ``e``."""
    pad = " " * indent
    if isinstance(e, TensorRef):
        return pad + e.name
    lits = iter(literal_texts(e.head, e.literals()))
    kids = iter(e.children())
    short = pretty_print(e)
    if len(short) + indent <= 80:
        return pad + short
    lines = [pad + "(" + e.head]
    for kind in e.slots:
        if kind == "expr":
            lines.append(pretty_print_indented(next(kids), indent + 1))
        else:
            lines.append(pad + " " + next(lits))
    lines[-1] += ")"
    return "\n".join(lines)


def parse_shape_env(text: str) -> dict[str, tuple[int, ...]]:
    """Parse ``name: d0 d1 ...`` lines (``#`` or ``;`` comments allowed)."""
    env: dict[str, tuple[int, ...]] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = re.split(r"[#;]", raw, maxsplit=1)[0].strip()
        if not line:
            continue
        name, sep, rest = line.partition(":")
        name = name.strip()
        if not sep or not name:
            raise ParseError(f"expected 'name: dims', got {raw!r}", lineno, 1)
        try:
            dims = tuple(int(tok) for tok in rest.split())
        except ValueError:
            raise ParseError(f"non-integer dimension in {raw!r}", lineno, 1) from None
        if any(d < 1 for d in dims):
            raise ParseError(f"dimensions must be positive in {raw!r}", lineno, 1)
        env[name] = dims
    return env


def format_shape_env(env) -> str:
    return "".join(f"{name}: {' '.join(map(str, dims))}\n" for name, dims in env.items())
