"""E-graph with a shape analysis, e-matching and equality saturation.

Every e-class carries the :class:`~apsat.ir.APShape` of the terms it
represents.  Shapes never change under rewriting, so the analysis "merge" is
an equality assertion: unioning classes of different shapes means a rewrite
is unsound, and is reported as :class:`AnalysisMismatch`.
"""
from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Iterator, Mapping, NamedTuple, Sequence

from .ir import APShape, Expr, ShapeEnv, build, infer_node
from .pattern import LVar, Pattern, PNode, PVar


class ENode(NamedTuple):
    head: str
    literals: tuple
    children: tuple[int, ...]


class AnalysisMismatch(Exception):
    """Two e-classes with different shapes were asserted equal."""

    def __init__(self, a: APShape, b: APShape, rule: str | None = None):
        self.shapes = (a, b)
        self.rule = rule
        where = f" (rule {rule})" if rule else ""
        super().__init__(f"cannot merge classes of shapes {a} and {b}{where}")


@dataclass
class EClass:
    id: int
    shape: APShape
    nodes: list[ENode] = field(default_factory=list)
    parents: list[tuple[ENode, int]] = field(default_factory=list)


class EGraph:
    def __init__(self, env: ShapeEnv):
        self.env = dict(env)
        self._parent: list[int] = []
        self.classes: dict[int, EClass] = {}
        self.memo: dict[ENode, int] = {}
        self._pending: list[int] = []
        self.union_count = 0

    # -- union-find -------------------------------------------------------

    def find(self, a: int) -> int:
        root = a
        while self._parent[root] != root:
            root = self._parent[root]
        while self._parent[a] != root:
            self._parent[a], a = root, self._parent[a]
        return root

    def canonicalize(self, n: ENode) -> ENode:
        return ENode(n.head, n.literals, tuple(self.find(c) for c in n.children))

    # -- queries ----------------------------------------------------------

    def shape(self, a: int) -> APShape:
        return self.classes[self.find(a)].shape

    def nodes(self, a: int) -> list[ENode]:
        return self.classes[self.find(a)].nodes

    @property
    def num_classes(self) -> int:
        return len(self.classes)

    @property
    def num_nodes(self) -> int:
        return len(self.memo)

    def is_equal(self, a: int, b: int) -> bool:
        return self.find(a) == self.find(b)

    # -- mutation ---------------------------------------------------------

    def add(self, n: ENode) -> int:
        """Add an e-node; its shape is inferred from its children's classes.

        Raises :class:`~apsat.ir.ShapeError` (leaving the graph unchanged) if
        the node is ill-shaped.
        """
        n = self.canonicalize(n)
        existing = self.memo.get(n)
        if existing is not None:
            return self.find(existing)
        shape = infer_node(n.head, n.literals, [self.classes[c].shape for c in n.children], self.env)
        cid = len(self._parent)
        self._parent.append(cid)
        self.classes[cid] = EClass(cid, shape, [n])
        self.memo[n] = cid
        for c in set(n.children):
            self.classes[c].parents.append((n, cid))
        return cid

    def add_expr(self, e: Expr) -> int:
        kids = tuple(self.add_expr(c) for c in e.children())
        return self.add(ENode(e.head, tuple(e.literals()), kids))

    def add_pattern(self, p: Pattern, subst: Mapping) -> int:
        if isinstance(p, PVar):
            return self.find(subst[p.name])
        lits = tuple(subst[v.name] if isinstance(v, LVar) else v for v in p.literals)
        kids = tuple(self.add_pattern(c, subst) for c in p.children)
        return self.add(ENode(p.head, lits, kids))

    def union(self, a: int, b: int) -> int:
        a, b = self.find(a), self.find(b)
        if a == b:
            return a
        ca, cb = self.classes[a], self.classes[b]
        if ca.shape != cb.shape:
            raise AnalysisMismatch(ca.shape, cb.shape)
        if len(ca.parents) < len(cb.parents):
            a, b, ca, cb = b, a, cb, ca
        self._parent[b] = a
        ca.nodes.extend(cb.nodes)
        ca.parents.extend(cb.parents)
        del self.classes[b]
        self._pending.append(a)
        self.union_count += 1
        return a

    def rebuild(self) -> None:
        """Restore the congruence and hashcons invariants."""
        if not self._pending:
            return
        while self._pending:
            todo = {self.find(c) for c in self._pending}
            self._pending = []
            for c in sorted(todo):
                self._repair(self.find(c))
        # A node that is a parent of several repaired classes can leave stale
        # keys behind, so the hashcons is rebuilt from the class node lists.
        self.memo = {}
        for cid, cls in self.classes.items():
            cls.nodes = list(dict.fromkeys(self.canonicalize(n) for n in cls.nodes))
            for n in cls.nodes:
                self.memo[n] = cid

    def _repair(self, cid: int) -> None:
        # Take the parent list out first: unions below may merge this class
        # and append other classes' parents, which must not be overwritten.
        cls = self.classes[cid]
        parents, cls.parents = cls.parents, []
        for pnode, pclass in parents:
            self.memo.pop(pnode, None)
            self.memo[self.canonicalize(pnode)] = self.find(pclass)
        fresh: dict[ENode, int] = {}
        for pnode, pclass in parents:
            pnode = self.canonicalize(pnode)
            if pnode in fresh:
                self.union(pclass, fresh[pnode])
            fresh[pnode] = self.find(pclass)
        self.classes[self.find(cid)].parents.extend(fresh.items())

    # -- matching ---------------------------------------------------------

    def ematch(self, p: Pattern) -> list[tuple[int, dict]]:
        """All (class, substitution) matches of ``p`` modulo the graph's equalities.

        The graph must be rebuilt.  Repeated variables must bind equal classes
        (or equal literals).
        """
        out = []
        for cid in sorted(self.classes):
            for subst in self._match(p, cid, {}):
                out.append((cid, subst))
        return out

    def _match(self, p: Pattern, cid: int, subst: dict) -> Iterator[dict]:
        cid = self.find(cid)
        if isinstance(p, PVar):
            bound = subst.get(p.name)
            if bound is None:
                yield {**subst, p.name: cid}
            elif self.find(bound) == cid:
                yield subst
            return
        for node in self.classes[cid].nodes:
            if node.head != p.head:
                continue
            s = self._match_literals(p, node, subst)
            if s is not None:
                yield from self._match_children(p.children, node.children, s)

    @staticmethod
    def _match_literals(p: PNode, node: ENode, subst: dict) -> dict | None:
        for pv, nv in zip(p.literals, node.literals):
            if isinstance(pv, LVar):
                if pv.name in subst:
                    if subst[pv.name] != nv:
                        return None
                else:
                    subst = {**subst, pv.name: nv}
            elif pv != nv:
                return None
        return subst

    def _match_children(self, pats: Sequence[Pattern], ids: Sequence[int], subst: dict) -> Iterator[dict]:
        if not pats:
            yield subst
            return
        for s in self._match(pats[0], ids[0], subst):
            yield from self._match_children(pats[1:], ids[1:], s)

    # -- inspection -------------------------------------------------------

    def node_expr(self, n: ENode, kids: Sequence[Expr]) -> Expr:
        return build(n.head, n.literals, kids)

    def dump(self) -> str:
        """One line per class: ``id : shape : node*`` (debugging aid)."""
        from .syntax import literal_texts, render

        lines = []
        for cid in sorted(self.classes):
            cls = self.classes[cid]
            texts = [
                render(n.head, literal_texts(n.head, n.literals), [f"#{self.find(c)}" for c in n.children])
                for n in cls.nodes
            ]
            lines.append(f"{cid} : {cls.shape} : " + " ".join(texts))
        return "\n".join(lines)

    def check_invariants(self) -> None:
        """Full scan of hashcons and congruence invariants; call after rebuild."""
        seen: dict[ENode, int] = {}
        for cid, cls in self.classes.items():
            assert self.find(cid) == cid, f"class {cid} is not canonical"
            for n in cls.nodes:
                cn = self.canonicalize(n)
                assert cn == n, f"node {n} in class {cid} is not canonical"
                other = seen.setdefault(cn, cid)
                assert other == cid, f"node {cn} appears in classes {other} and {cid}"
                assert self.find(self.memo[cn]) == cid, f"hashcons maps {cn} to the wrong class"
        assert set(seen) == set(self.memo), "hashcons holds stale entries"


# --------------------------------------------------------------------------
# Saturation
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class SaturationLimits:
    max_iterations: int = 12
    max_nodes: int = 1_000_000
    timeout: float = 120.0

    def __post_init__(self) -> None:
        if self.max_iterations < 1 or self.max_nodes < 1 or self.timeout <= 0:
            raise ValueError("saturation limits must be positive")


@dataclass
class SaturationReport:
    iterations: int
    stop_reason: str  # saturated | iteration_limit | node_limit | timeout
    nodes: int
    classes: int
    elapsed: float
    applied: dict[str, int] = field(default_factory=dict)

    def __str__(self) -> str:
        fired = ", ".join(f"{k}={v}" for k, v in self.applied.items() if v)
        return (
            f"stop={self.stop_reason} iterations={self.iterations} nodes={self.nodes} "
            f"classes={self.classes} time={self.elapsed:.2f}s"
            + (f" unions[{fired}]" if fired else "")
        )


class RuleFailure(Exception):
    def __init__(self, rule: str, cause: Exception):
        self.rule = rule
        self.cause = cause
        super().__init__(f"rule {rule}: {cause}")


def saturate(g: EGraph, rules: Sequence, limits: SaturationLimits = SaturationLimits()) -> SaturationReport:
    """Run equality saturation until fixpoint or a limit is hit.

    Each iteration first collects every rule's matches against the current
    graph, then applies them all and rebuilds, so the outcome of an
    iteration does not depend on rule order.
    """
    start = time.monotonic()
    g.rebuild()
    applied = {r.name: 0 for r in rules}
    iterations = 0
    reason = "saturated"
    while True:
        if iterations >= limits.max_iterations:
            reason = "iteration_limit"
            break
        if time.monotonic() - start > limits.timeout:
            reason = "timeout"
            break
        matches = [(rule, cid, subst) for rule in rules for cid, subst in rule.search(g)]
        if not matches:
            break
        iterations += 1
        before = (g.num_nodes, g.union_count)
        stopped = None
        for rule, cid, subst in matches:
            if g.num_nodes > limits.max_nodes:
                stopped = "node_limit"
                break
            if time.monotonic() - start > limits.timeout:
                stopped = "timeout"
                break
            unions = g.union_count
            try:
                rule.apply(g, cid, subst)
            except AnalysisMismatch as err:
                raise AnalysisMismatch(*err.shapes, rule=rule.name) from None
            except Exception as err:
                raise RuleFailure(rule.name, err) from err
            applied[rule.name] += g.union_count - unions
        g.rebuild()
        if stopped:
            reason = stopped
            break
        if (g.num_nodes, g.union_count) == before:
            reason = "saturated"
            break
    return SaturationReport(iterations, reason, g.num_nodes, g.num_classes,
                            time.monotonic() - start, applied)
