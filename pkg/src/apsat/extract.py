"""Cost-based extraction of a single program from a saturated e-graph."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

from .egraph import EGraph, ENode
from .ir import TRANSFORMERS, APShape, Expr, Op, build
from .syntax import literal_texts, render


class ExtractionError(Exception):
    pass


@dataclass(frozen=True)
class CostModel:
    """Per-construct costs.

    ``head_costs`` gives the flat cost of transformers, tensor references and
    ``systolicArray``.  A ``compute`` node costs ``compute_factors[op]`` per
    element of its access dimensions (i.e. per output element).
    """

    head_costs: dict[str, float] = field(default_factory=dict)
    compute_factors: dict[Op, float] = field(default_factory=dict)

    def node_cost(self, head: str, literals: tuple, shape: APShape) -> float:
        if head == "compute":
            return self.compute_factors[literals[0]] * math.prod(shape.access)
        return self.head_costs[head]

    def with_overrides(self, overrides: dict[str, float]) -> "CostModel":
        heads = dict(self.head_costs)
        factors = dict(self.compute_factors)
        for key, value in overrides.items():
            if value < 0:
                raise ValueError(f"cost for {key} must be non-negative")
            if key in {op.value for op in Op}:
                factors[Op(key)] = value
            elif key in heads:
                heads[key] = value
            else:
                raise ValueError(f"unknown cost key {key!r}")
        return CostModel(heads, factors)


def default_cost_model() -> CostModel:
    heads = {h: 1.0 for h in TRANSFORMERS}
    heads["systolicArray"] = 10.0
    heads["tensor"] = 0.0
    return CostModel(heads, {Op.DOT_PROD: 1000.0, Op.REDUCE_SUM: 1.0, Op.REDUCE_MAX: 1.0})


@dataclass(frozen=True)
class ExtractionResult:
    expr: Expr
    cost: float


def _node_text(n: ENode, kid_texts) -> str:
    return render(n.head, literal_texts(n.head, n.literals), kid_texts)


def extract(g: EGraph, root: int, cm: CostModel | None = None) -> ExtractionResult:
    """Minimum-cost term of ``root``'s class.

    Costs are computed bottom-up to a fixpoint; among equal-cost choices the
    one whose printed form is lexicographically smallest wins, so the result
    does not depend on class numbering.
    """
    cm = cm or default_cost_model()
    g.rebuild()
    best: dict[int, tuple[float, str, ENode]] = {}
    order = sorted(g.classes)
    passes = 0
    changed = True
    while changed:
        changed = False
        passes += 1
        if passes > len(order) + 2:
            break
        for cid in order:
            cls = g.classes[cid]
            cur = best.get(cid)
            for n in cls.nodes:
                kids = [best.get(c) for c in n.children]
                if any(k is None for k in kids):
                    continue
                cost = cm.node_cost(n.head, n.literals, cls.shape) + sum(k[0] for k in kids)
                if cur is not None and cost > cur[0]:
                    continue
                text = _node_text(n, [k[1] for k in kids])
                if cur is None or (cost, text) < cur[:2]:
                    cur = (cost, text, n)
                    best[cid] = cur
                    changed = True
    root = g.find(root)
    if root not in best:
        raise ExtractionError(f"class {root} has no finite-cost term")

    def build_expr(cid: int, depth: int = 0) -> Expr:
        if depth > len(order):
            raise ExtractionError("cyclic choice during extraction")
        n = best[cid][2]
        return build(n.head, n.literals, [build_expr(c, depth + 1) for c in n.children])

    return ExtractionResult(build_expr(root), best[root][0])
