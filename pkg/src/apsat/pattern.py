"""Rewrite patterns and conditional rewrite rules.

Patterns are written in the IR's surface syntax, with ``?name`` tokens for
variables.  A variable in an expression position binds an e-class (or a
sub-expression, when matching plain trees); a variable in a literal position
binds the literal's value.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Callable, Iterator, Mapping, Union

from .ir import CONSTRUCTS, APShape, Expr, ShapeEnv, build, infer_shape
from .syntax import convert, read, render, render_literal

if TYPE_CHECKING:
    from .egraph import EGraph


@dataclass(frozen=True)
class PVar:
    name: str

    def __str__(self) -> str:
        return "?" + self.name


@dataclass(frozen=True)
class LVar:
    """Variable standing for a literal argument."""

    name: str

    def __str__(self) -> str:
        return "?" + self.name


@dataclass(frozen=True)
class PNode:
    head: str
    literals: tuple
    children: tuple

    def __str__(self) -> str:
        if self.head == "tensor":
            return str(self.literals[0])
        kinds = [k for k in CONSTRUCTS[self.head].slots if k != "expr"]
        lits = [str(v) if isinstance(v, LVar) else render_literal(k, v) for k, v in zip(kinds, self.literals)]
        return render(self.head, lits, [str(c) for c in self.children])


Pattern = Union[PVar, PNode]


def parse_pattern(text: str) -> Pattern:
    return convert(
        read(text),
        make=lambda head, lits, kids: PNode(head, tuple(lits), tuple(kids)),
        var=PVar,
        lit_var=LVar,
    )


def variables(p: Pattern) -> set[str]:
    if isinstance(p, PVar):
        return {p.name}
    names = {v.name for v in p.literals if isinstance(v, LVar)}
    for c in p.children:
        names |= variables(c)
    return names


def match_expr(p: Pattern, e: Expr, subst: dict | None = None) -> dict | None:
    """Syntactic match of ``p`` against a plain expression tree."""
    subst = {} if subst is None else subst
    if isinstance(p, PVar):
        if p.name in subst:
            return subst if subst[p.name] == e else None
        return {**subst, p.name: e}
    if p.head != e.head:
        return None
    for pv, ev in zip(p.literals, e.literals()):
        if isinstance(pv, LVar):
            if pv.name in subst and subst[pv.name] != ev:
                return None
            subst = {**subst, pv.name: ev}
        elif pv != ev:
            return None
    for pc, ec in zip(p.children, e.children()):
        subst = match_expr(pc, ec, subst)
        if subst is None:
            return None
    return subst


def instantiate_expr(p: Pattern, subst: Mapping) -> Expr:
    if isinstance(p, PVar):
        return subst[p.name]
    lits = [subst[v.name] if isinstance(v, LVar) else v for v in p.literals]
    return build(p.head, lits, [instantiate_expr(c, subst) for c in p.children])


# A condition sees the shape of each bound sub-expression variable and the
# literal bindings.  It returns extra literal bindings (possibly empty) when
# the rule applies, or None to reject the match.
Condition = Callable[[Callable[[str], APShape], Mapping], "dict | None"]
# A graph guard throttles exploratory rules using e-graph state; it is only
# consulted during saturation.
GraphGuard = Callable[["EGraph", int, Mapping], bool]


def _always(shape, subst):
    return {}


@dataclass(frozen=True)
class RewriteRule:
    """``lhs => rhs`` guarded by a shape condition.

    The right-hand side is a pattern instantiated with the match's bindings
    plus any literals the condition computes (``?newShape`` and the like).
    """

    name: str
    lhs: Pattern
    rhs: Pattern
    condition: Condition = field(default=_always, compare=False)
    guard: GraphGuard | None = field(default=None, compare=False)

    @classmethod
    def parse(cls, name: str, lhs: str, rhs: str, condition: Condition = _always,
              guard: GraphGuard | None = None) -> "RewriteRule":
        return cls(name, parse_pattern(lhs), parse_pattern(rhs), condition, guard)

    def __str__(self) -> str:
        return f"{self.name}: {self.lhs} => {self.rhs}"

    # -- e-graph side -----------------------------------------------------

    def search(self, g: "EGraph") -> list[tuple[int, dict]]:
        found = []
        for cid, subst in g.ematch(self.lhs):
            if self.guard is not None and not self.guard(g, cid, subst):
                continue
            extra = self.condition(lambda v, s=subst: g.shape(s[v]), subst)
            if extra is None:
                continue
            found.append((cid, {**subst, **extra}))
        return found

    def apply(self, g: "EGraph", cid: int, subst: Mapping) -> int:
        new = g.add_pattern(self.rhs, subst)
        return g.union(cid, new)

    # -- plain-tree side --------------------------------------------------

    def rewrite_expr(self, e: Expr, env: ShapeEnv) -> Expr | None:
        """Apply the rule at the root of ``e``; None if it does not apply."""
        subst = match_expr(self.lhs, e)
        if subst is None:
            return None
        extra = self.condition(lambda v: infer_shape(subst[v], env), subst)
        if extra is None:
            return None
        return instantiate_expr(self.rhs, {**subst, **extra})


def iter_matches(p: Pattern, e: Expr) -> Iterator[tuple[Expr, dict]]:
    """All syntactic matches of ``p`` at any position of ``e``."""
    from .ir import iter_nodes

    for node in iter_nodes(e):
        subst = match_expr(p, node)
        if subst is not None:
            yield node, subst
