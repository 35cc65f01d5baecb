"""Accelerator-mapping rewrite rules.

Four rule sets:

* ``systolic``  maps ``(compute dotProd (cartProd ...))`` onto a weight
  stationary systolic array of fixed size;
* ``im2col``    flattens access patterns and bubbles the compensating
  reshapes outwards, exposing convolutions as matrix multiplications;
* ``blocking``  splits oversized dimensions in half and bubbles the
  resulting concatenations outwards, so large multiplications become
  several array-sized ones;
* ``cleanup``   shape-preserving simplifications.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

from .ir import APShape
from .pattern import RewriteRule

RULE_SET_NAMES = ("systolic", "im2col", "blocking", "cleanup")


@dataclass(frozen=True)
class RuleSet:
    name: str
    rules: tuple[RewriteRule, ...]
    params: dict = field(default_factory=dict, compare=False)


def _is_access_dim(shape: APShape, d: int) -> bool:
    return d < shape.n_access


# --------------------------------------------------------------------------
# Systolic array
# --------------------------------------------------------------------------


def rule_systolic_array(rows: int, cols: int) -> RewriteRule:
    """Matrix multiplication onto a ``rows`` x ``cols`` systolic array.

    Fires when the activations are ``((batch), (rows))`` and the weights are
    ``((cols), (rows))`` for exactly the array's dimensions.
    """
    if rows < 1 or cols < 1:
        raise ValueError("array dimensions must be positive")

    def condition(shape, s):
        a0, a1 = shape("a0"), shape("a1")
        if a0.n_access != 1 or a0.compute != (rows,):
            return None
        if a1.n_access != 1 or a1.compute != (rows,) or a1.access != (cols,):
            return None
        return {"rows": rows, "cols": cols}

    return RewriteRule.parse(
        f"systolic-array-{rows}x{cols}",
        "(compute dotProd (cartProd ?a0 ?a1))",
        "(systolicArray ?rows ?cols ?a0 (access (transpose ?a1 (list 1 0)) 0))",
        condition,
    )


def rules_systolic(rows: int, cols: int) -> RuleSet:
    return RuleSet("systolic", (rule_systolic_array(rows, cols),), {"rows": rows, "cols": cols})


# --------------------------------------------------------------------------
# im2col discovery
# --------------------------------------------------------------------------


def _has_flatten_chain(g, cid, s) -> bool:
    for n in g.nodes(cid):
        if n.head == "flatten":
            return True
        if n.head == "reshape" and any(m.head == "flatten" for m in g.nodes(n.children[0])):
            return True
    return False


def _flatten_reshape_condition(shape, s):
    return {"shape": shape("a")}


def _cartprod_reshape_condition(shape, s):
    s0, s1 = s["s0"], s["s1"]
    if s0.compute != s1.compute or shape("a0").compute != shape("a1").compute:
        return None
    return {"newShape": APShape(s0.access + s1.access, (2,) + s0.compute)}


def _dotprod_reshape_condition(shape, s):
    target, inner = s["shape"], shape("a")
    if not target.compute or not inner.compute:
        return None
    if target.compute[0] != inner.compute[0]:
        return None
    if math.prod(target.compute[1:]) != math.prod(inner.compute[1:]):
        return None
    return {"newShape": APShape(target.access, ())}


def rules_im2col() -> RuleSet:
    return RuleSet("im2col", (
        RewriteRule.parse(
            "im2col-flatten-reshape", "?a", "(reshape (flatten ?a) ?shape)",
            _flatten_reshape_condition,
            guard=lambda g, cid, s: not _has_flatten_chain(g, cid, s),
        ),
        RewriteRule.parse(
            "im2col-cartprod-reshape",
            "(cartProd (reshape ?a0 ?s0) (reshape ?a1 ?s1))",
            "(reshape (cartProd ?a0 ?a1) ?newShape)",
            _cartprod_reshape_condition,
        ),
        RewriteRule.parse(
            "im2col-dotprod-reshape",
            "(compute dotProd (reshape ?a ?shape))",
            "(reshape (compute dotProd ?a) ?newShape)",
            _dotprod_reshape_condition,
        ),
    ))


# --------------------------------------------------------------------------
# Blocking
# --------------------------------------------------------------------------


def _split_condition(block: int):
    # Dimensions are blocked outermost first: a class is split along its
    # first dimension wider than the block, and the halves take care of the
    # remaining dimensions.
    def condition(shape, s):
        dims = shape("a").dims
        for d, extent in enumerate(dims):
            if extent > block:
                if extent % 2:
                    return None
                return {"dim": d, "b0": 0, "b1": extent // 2, "b2": extent}
        return None

    return condition


def _not_yet_split(block: int):
    condition = _split_condition(block)

    def guard(g, cid, s):
        binding = condition(lambda v: g.shape(s[v]), s)
        if binding is None:
            return False
        return not any(n.head == "concat" and n.literals[0] == binding["dim"] for n in g.nodes(cid))

    return guard


def _cartprod_concat_right(shape, s):
    if not _is_access_dim(shape("b0"), s["dim"]):
        return None
    return {"newDim": shape("a").n_access + s["dim"]}


def _cartprod_concat_left(shape, s):
    if not _is_access_dim(shape("a0"), s["dim"]):
        return None
    return {}


def _cartprod_concat_both(shape, s):
    a0, a2 = shape("a0"), shape("a2")
    j = s["dim0"] - a0.n_access
    if j < 0 or s["dim1"] - a2.n_access != j:
        return None
    if a0.compute != a2.compute or shape("a1").compute != shape("a3").compute:
        return None
    return {"newDim": a0.n_access + a2.n_access + 1 + j}


def _dotprod_concat_access(shape, s):
    return {} if _is_access_dim(shape("a0"), s["dim"]) else None


def _dotprod_concat_reduction(shape, s):
    # The first compute dimension is the tuple being multiplied; only the
    # dimensions after it are summed over.
    return {} if s["dim"] > shape("a0").n_access else None


def rules_blocking(block: int) -> RuleSet:
    if block < 1:
        raise ValueError("block size must be positive")
    return RuleSet("blocking", (
        RewriteRule.parse(
            "blocking-slice-concat", "?a",
            "(concat (slice ?a ?dim ?b0 ?b1) (slice ?a ?dim ?b1 ?b2) ?dim)",
            _split_condition(block),
            guard=_not_yet_split(block),
        ),
        RewriteRule.parse(
            "blocking-cartprod-concat-right",
            "(cartProd ?a (concat ?b0 ?b1 ?dim))",
            "(concat (cartProd ?a ?b0) (cartProd ?a ?b1) ?newDim)",
            _cartprod_concat_right,
        ),
        RewriteRule.parse(
            "blocking-cartprod-concat-left",
            "(cartProd (concat ?a0 ?a1 ?dim) ?b)",
            "(concat (cartProd ?a0 ?b) (cartProd ?a1 ?b) ?dim)",
            _cartprod_concat_left,
        ),
        RewriteRule.parse(
            "blocking-cartprod-concat-both",
            "(cartProd (concat ?a0 ?a1 ?dim0) (concat ?a2 ?a3 ?dim1))",
            "(concat (cartProd ?a0 ?a2) (cartProd ?a1 ?a3) ?newDim)",
            _cartprod_concat_both,
        ),
        RewriteRule.parse(
            "blocking-dotprod-concat-access",
            "(compute dotProd (concat ?a0 ?a1 ?dim))",
            "(concat (compute dotProd ?a0) (compute dotProd ?a1) ?dim)",
            _dotprod_concat_access,
        ),
        RewriteRule.parse(
            "blocking-dotprod-concat-reduce",
            "(compute dotProd (concat ?a0 ?a1 ?dim))",
            "(compute reduceSum (pair (compute dotProd ?a0) (compute dotProd ?a1)))",
            _dotprod_concat_reduction,
        ),
    ), {"block": block})


# --------------------------------------------------------------------------
# Cleanup
# --------------------------------------------------------------------------


def _inverse(perm) -> tuple[int, ...]:
    inv = [0] * len(perm)
    for i, p in enumerate(perm):
        inv[p] = i
    return tuple(inv)


def rules_cleanup() -> RuleSet:
    return RuleSet("cleanup", (
        RewriteRule.parse(
            "cleanup-access-access", "(access (access ?a ?m) ?n)", "(access ?a ?n)",
        ),
        RewriteRule.parse(
            "cleanup-transpose-inverse", "(transpose (transpose ?a ?p) ?q)", "?a",
            lambda shape, s: {} if tuple(s["q"]) == _inverse(s["p"]) else None,
        ),
        RewriteRule.parse(
            "cleanup-identity-reshape", "(reshape ?a ?s)", "?a",
            lambda shape, s: {} if shape("a") == s["s"] else None,
        ),
        RewriteRule.parse(
            "cleanup-flat-flatten", "(flatten ?a)", "?a",
            lambda shape, s: {} if shape("a").n_access <= 1 and len(shape("a").compute) <= 1 else None,
        ),
    ))


def rule_sets(names, rows: int = 16, cols: int = 16, block: int = 16) -> list[RuleSet]:
    """Build rule sets by name (``systolic``, ``im2col``, ``blocking``, ``cleanup``)."""
    out = []
    for name in names:
        if name == "systolic":
            out.append(rules_systolic(rows, cols))
        elif name == "im2col":
            out.append(rules_im2col())
        elif name == "blocking":
            out.append(rules_blocking(block))
        elif name == "cleanup":
            out.append(rules_cleanup())
        else:
            raise ValueError(f"unknown rule set {name!r}; choose from {', '.join(RULE_SET_NAMES)}")
    return out


def all_rules(sets) -> list[RewriteRule]:
    return [r for rs in sets for r in rs.rules]
