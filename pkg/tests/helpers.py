"""Random program and rule-instance generators shared by the test modules."""
from __future__ import annotations

import itertools
import math

import numpy as np

from apsat.ir import (
    APShape, Access, CartProd, Compute, Concat, Expr, Flatten, Op, Pair, Reshape, Slice,
    Squeeze, TensorRef, Transpose, Windows, infer_shape,
)
from apsat.interp import evaluate, random_env
from apsat.rewrites import rule_systolic_array, rules_blocking, rules_cleanup, rules_im2col


class Namer:
    def __init__(self):
        self._count = itertools.count()

    def __call__(self) -> str:
        return f"t{next(self._count)}"


def leaf(rng, env: dict, shape: APShape, names: Namer, transposed: bool | None = None) -> Expr:
    """A fresh tensor accessed to ``shape``, sometimes through a transpose."""
    name = names()
    if transposed is None:
        transposed = shape.rank >= 2 and rng.random() < 0.3
    if not transposed:
        env[name] = shape.dims
        return Access(TensorRef(name), shape.n_access)
    perm = tuple(int(p) for p in rng.permutation(shape.rank))
    inv = [0] * shape.rank
    for i, p in enumerate(perm):
        inv[p] = i
    # transpose(x, perm) has dims x.dims[perm[k]]; choose x.dims so that equals shape.dims.
    stored = tuple(shape.dims[inv[i]] for i in range(shape.rank))
    env[name] = stored
    return Transpose(Access(TensorRef(name), shape.n_access), perm)


def random_dims(rng, rank: int, lo: int = 1, hi: int = 4) -> tuple[int, ...]:
    return tuple(int(d) for d in rng.integers(lo, hi + 1, size=rank))


def random_shape(rng, max_access: int = 2, max_compute: int = 2, lo: int = 1, hi: int = 4) -> APShape:
    na = int(rng.integers(0, max_access + 1))
    nc = int(rng.integers(0, max_compute + 1))
    return APShape(random_dims(rng, na, lo, hi), random_dims(rng, nc, lo, hi))


def factorize(rng, n: int, parts: int) -> tuple[int, ...]:
    """Random ordered factorization of ``n`` into ``parts`` positive factors."""
    if parts == 0:
        return ()
    out = []
    for _ in range(parts - 1):
        divisors = [d for d in range(1, n + 1) if n % d == 0]
        d = int(rng.choice(divisors))
        out.append(d)
        n //= d
    out.append(n)
    return tuple(out)


def random_reshape_target(rng, s: APShape) -> APShape:
    pa, pc = math.prod(s.access), math.prod(s.compute)
    na = int(rng.integers(0 if pa == 1 else 1, 3))
    nc = int(rng.integers(0 if pc == 1 else 1, 3))
    return APShape(factorize(rng, pa, na), factorize(rng, pc, nc))


def random_program(rng, depth: int = 3, env: dict | None = None, names: Namer | None = None):
    """A random shape-valid program; returns ``(expr, shape_env)``."""
    env = {} if env is None else env
    names = names or Namer()
    e = _grow(rng, depth, env, names)
    return e, env


def _grow(rng, depth, env, names) -> Expr:
    if depth == 0:
        return leaf(rng, env, random_shape(rng), names)
    child = _grow(rng, depth - 1, env, names)
    s = infer_shape(child, env)
    options = ["access", "transpose", "flatten", "reshape", "pair", "concat", "slice", "cartProd", "reduce"]
    if s.compute and s.compute[0] >= 2:
        options.append("dotProd")
    if s.compute:
        options.append("windows")
    if 1 in s.dims:
        options.append("squeeze")
    choice = options[int(rng.integers(len(options)))]
    if choice == "access":
        return Access(child, int(rng.integers(0, s.rank + 1)))
    if choice == "transpose":
        return Transpose(child, tuple(int(p) for p in rng.permutation(s.rank))) if s.rank else child
    if choice == "flatten":
        return Flatten(child)
    if choice == "reshape":
        return Reshape(child, random_reshape_target(rng, s))
    if choice == "pair":
        return Pair(child, leaf(rng, env, s, names))
    if choice == "cartProd":
        other = APShape(random_dims(rng, int(rng.integers(0, 2))), s.compute)
        return CartProd(child, leaf(rng, env, other, names))
    if choice == "concat" and s.rank:
        d = int(rng.integers(s.rank))
        dims = list(s.dims)
        dims[d] = int(rng.integers(1, 4))
        return Concat(child, leaf(rng, env, APShape.split(dims, s.n_access), names), d)
    if choice == "slice" and s.rank:
        d = int(rng.integers(s.rank))
        lo = int(rng.integers(0, s.dims[d]))
        hi = int(rng.integers(lo + 1, s.dims[d] + 1))
        return Slice(child, d, lo, hi)
    if choice == "squeeze":
        return Squeeze(child, s.dims.index(1))
    if choice == "windows":
        window = tuple(int(rng.integers(1, b + 1)) for b in s.compute)
        strides = tuple(int(rng.integers(1, 3)) for _ in s.compute)
        return Windows(child, window, strides)
    if choice == "dotProd":
        return Compute(Op.DOT_PROD, child)
    if choice == "reduce":
        return Compute(Op.REDUCE_SUM if rng.random() < 0.5 else Op.REDUCE_MAX, child)
    return child


def agree(a: Expr, b: Expr, shapes: dict, rng, trials: int = 1, exact: bool = False) -> bool:
    from apsat.interp import allclose

    for _ in range(trials):
        env = random_env(shapes, rng)
        x, y = evaluate(a, env), evaluate(b, env)
        if exact:
            if x.shape != y.shape or not np.array_equal(x, y):
                return False
        elif not allclose(x, y):
            return False
    return True


# --------------------------------------------------------------------------
# Per-rule LHS instances.  Each generator returns (rule, lhs, shape_env) with
# the rule's condition satisfied.
# --------------------------------------------------------------------------


def _by_name(rule_set, name):
    return next(r for r in rule_set.rules if r.name == name)


def gen_systolic(rng):
    env, names = {}, Namer()
    rows, cols, batch = (int(x) for x in rng.integers(1, 5, size=3))
    a0 = leaf(rng, env, APShape((batch,), (rows,)), names)
    a1 = leaf(rng, env, APShape((cols,), (rows,)), names)
    return rule_systolic_array(rows, cols), Compute(Op.DOT_PROD, CartProd(a0, a1)), env


def gen_flatten_reshape(rng):
    env, names = {}, Namer()
    e = leaf(rng, env, random_shape(rng, 3, 3), names)
    return _by_name(rules_im2col(), "im2col-flatten-reshape"), e, env


def gen_cartprod_reshape(rng):
    env, names = {}, Namer()
    total = int(rng.choice([1, 2, 4, 6, 8, 12]))
    cx = factorize(rng, total, int(rng.integers(1 if total > 1 else 0, 3)))
    cs = factorize(rng, total, int(rng.integers(1 if total > 1 else 0, 3)))

    def side():
        a = random_dims(rng, int(rng.integers(0, 3)))
        inner = leaf(rng, env, APShape(a, cx), names)
        target = APShape(factorize(rng, math.prod(a), int(rng.integers(0 if math.prod(a) == 1 else 1, 3))), cs)
        return Reshape(inner, target)

    return _by_name(rules_im2col(), "im2col-cartprod-reshape"), CartProd(side(), side()), env


def gen_dotprod_reshape(rng):
    env, names = {}, Namer()
    t = int(rng.integers(2, 4))
    rest = int(rng.choice([1, 2, 4, 6]))
    inner = APShape(random_dims(rng, int(rng.integers(0, 3))), (t,) + factorize(rng, rest, int(rng.integers(0 if rest == 1 else 1, 3))))
    x = leaf(rng, env, inner, names)
    pa = math.prod(inner.access)
    target = APShape(
        factorize(rng, pa, int(rng.integers(0 if pa == 1 else 1, 3))),
        (t,) + factorize(rng, rest, int(rng.integers(0 if rest == 1 else 1, 3))),
    )
    return _by_name(rules_im2col(), "im2col-dotprod-reshape"), Compute(Op.DOT_PROD, Reshape(x, target)), env


def gen_slice_concat(rng):
    env, names = {}, Namer()
    block = int(rng.integers(1, 4))
    s = random_shape(rng, 2, 2, 1, 3)
    dims = list(s.dims) or [1]
    d = int(rng.integers(len(dims)))
    for i in range(d):
        dims[i] = min(dims[i], block)
    dims[d] = 2 * int(rng.integers(block // 2 + 1, block + 3))
    shape = APShape.split(dims, min(s.n_access, len(dims)))
    return _by_name(rules_blocking(block), "blocking-slice-concat"), leaf(rng, env, shape, names), env


def _split_pair(rng, env, names, shape: APShape, d: int):
    """Two leaves whose concatenation along ``d`` has ``shape``."""
    total = shape.dims[d]
    first = int(rng.integers(1, total))
    d0, d1 = list(shape.dims), list(shape.dims)
    d0[d], d1[d] = first, total - first
    return (leaf(rng, env, APShape.split(d0, shape.n_access), names),
            leaf(rng, env, APShape.split(d1, shape.n_access), names))


def gen_cartprod_concat_right(rng):
    env, names = {}, Namer()
    c = random_dims(rng, int(rng.integers(0, 3)))
    bshape = APShape(random_dims(rng, int(rng.integers(1, 3)), 2, 4), c)
    d = int(rng.integers(bshape.n_access))
    b0, b1 = _split_pair(rng, env, names, bshape, d)
    a = leaf(rng, env, APShape(random_dims(rng, int(rng.integers(0, 3))), c), names)
    rule = _by_name(rules_blocking(1), "blocking-cartprod-concat-right")
    return rule, CartProd(a, Concat(b0, b1, d)), env


def gen_cartprod_concat_left(rng):
    env, names = {}, Namer()
    c = random_dims(rng, int(rng.integers(0, 3)))
    ashape = APShape(random_dims(rng, int(rng.integers(1, 3)), 2, 4), c)
    d = int(rng.integers(ashape.n_access))
    a0, a1 = _split_pair(rng, env, names, ashape, d)
    b = leaf(rng, env, APShape(random_dims(rng, int(rng.integers(0, 3))), c), names)
    rule = _by_name(rules_blocking(1), "blocking-cartprod-concat-left")
    return rule, CartProd(Concat(a0, a1, d), b), env


def gen_cartprod_concat_both(rng):
    env, names = {}, Namer()
    c = random_dims(rng, int(rng.integers(1, 3)), 2, 4)
    j = int(rng.integers(len(c)))
    split = int(rng.integers(1, c[j]))
    lo, hi = list(c), list(c)
    lo[j], hi[j] = split, c[j] - split
    aa = random_dims(rng, int(rng.integers(0, 3)))
    ab = random_dims(rng, int(rng.integers(0, 3)))
    a0 = leaf(rng, env, APShape(aa, tuple(lo)), names)
    a1 = leaf(rng, env, APShape(aa, tuple(hi)), names)
    a2 = leaf(rng, env, APShape(ab, tuple(lo)), names)
    a3 = leaf(rng, env, APShape(ab, tuple(hi)), names)
    rule = _by_name(rules_blocking(1), "blocking-cartprod-concat-both")
    return rule, CartProd(Concat(a0, a1, len(aa) + j), Concat(a2, a3, len(ab) + j)), env


def gen_dotprod_concat_access(rng):
    env, names = {}, Namer()
    shape = APShape(random_dims(rng, int(rng.integers(1, 3)), 2, 4),
                    (int(rng.integers(2, 4)),) + random_dims(rng, int(rng.integers(0, 2))))
    d = int(rng.integers(shape.n_access))
    a0, a1 = _split_pair(rng, env, names, shape, d)
    rule = _by_name(rules_blocking(1), "blocking-dotprod-concat-access")
    return rule, Compute(Op.DOT_PROD, Concat(a0, a1, d)), env


def gen_dotprod_concat_reduce(rng):
    env, names = {}, Namer()
    shape = APShape(random_dims(rng, int(rng.integers(0, 3))),
                    (int(rng.integers(2, 4)),) + random_dims(rng, int(rng.integers(1, 3)), 2, 5))
    d = shape.n_access + 1 + int(rng.integers(len(shape.compute) - 1))
    a0, a1 = _split_pair(rng, env, names, shape, d)
    rule = _by_name(rules_blocking(1), "blocking-dotprod-concat-reduce")
    return rule, Compute(Op.DOT_PROD, Concat(a0, a1, d)), env


def gen_access_access(rng):
    env, names = {}, Namer()
    s = random_shape(rng, 2, 2)
    x = leaf(rng, env, s, names)
    m = int(rng.integers(0, s.rank + 1))
    n = int(rng.integers(0, s.rank + 1))
    return _by_name(rules_cleanup(), "cleanup-access-access"), Access(Access(x, m), n), env


def gen_transpose_inverse(rng):
    env, names = {}, Namer()
    s = random_shape(rng, 2, 2)
    while s.rank == 0:
        s = random_shape(rng, 2, 2)
    x = leaf(rng, env, s, names)
    p = tuple(int(v) for v in rng.permutation(s.rank))
    q = [0] * s.rank
    for i, v in enumerate(p):
        q[v] = i
    return _by_name(rules_cleanup(), "cleanup-transpose-inverse"), Transpose(Transpose(x, p), tuple(q)), env


def gen_identity_reshape(rng):
    env, names = {}, Namer()
    s = random_shape(rng, 2, 2)
    return _by_name(rules_cleanup(), "cleanup-identity-reshape"), Reshape(leaf(rng, env, s, names), s), env


def gen_flat_flatten(rng):
    env, names = {}, Namer()
    s = APShape(random_dims(rng, int(rng.integers(0, 2))), random_dims(rng, int(rng.integers(0, 2))))
    return _by_name(rules_cleanup(), "cleanup-flat-flatten"), Flatten(leaf(rng, env, s, names)), env


RULE_GENERATORS = {
    "systolic-array": gen_systolic,
    "im2col-flatten-reshape": gen_flatten_reshape,
    "im2col-cartprod-reshape": gen_cartprod_reshape,
    "im2col-dotprod-reshape": gen_dotprod_reshape,
    "blocking-slice-concat": gen_slice_concat,
    "blocking-cartprod-concat-right": gen_cartprod_concat_right,
    "blocking-cartprod-concat-left": gen_cartprod_concat_left,
    "blocking-cartprod-concat-both": gen_cartprod_concat_both,
    "blocking-dotprod-concat-access": gen_dotprod_concat_access,
    "blocking-dotprod-concat-reduce": gen_dotprod_concat_reduce,
    "cleanup-access-access": gen_access_access,
    "cleanup-transpose-inverse": gen_transpose_inverse,
    "cleanup-identity-reshape": gen_identity_reshape,
    "cleanup-flat-flatten": gen_flat_flatten,
}

# Rules whose two sides sum in a different order.
REASSOCIATING = {"blocking-dotprod-concat-reduce"}


def check_rule_instances(name: str, count: int, seed: int = 0) -> tuple[int, int]:
    """Run ``count`` random instances of a rule; returns (sound, shape-preserved) counts."""
    rng = np.random.default_rng(seed)
    sound = preserved = 0
    for _ in range(count):
        rule, lhs, env = RULE_GENERATORS[name](rng)
        rhs = rule.rewrite_expr(lhs, env)
        assert rhs is not None, f"{rule.name} did not apply to {lhs}"
        if infer_shape(lhs, env) == infer_shape(rhs, env):
            preserved += 1
        if agree(lhs, rhs, env, rng, exact=name not in REASSOCIATING):
            sound += 1
    return sound, preserved


# --------------------------------------------------------------------------
# Random e-graph workloads
# --------------------------------------------------------------------------


def random_egraph_workload(g, rng, ops: int, rebuild_every: int = 25):
    """Interleave random adds, same-shape unions and rebuilds on ``g``.

    Leaves come from a handful of small tensors; new nodes are built over
    existing classes with unary transformers and ``pair``.  After every
    rebuild the invariants are checked, node counts must not grow, and a
    second rebuild must change nothing.  Returns the list of ids that were
    explicitly unioned.
    """
    from apsat.egraph import ENode
    from apsat.ir import ShapeError

    for name, dims in g.env.items():
        g.add(ENode("tensor", (name,), ()))
    unioned = []
    for step in range(ops):
        ids = sorted(g.classes)
        kind = rng.random()
        if kind < 0.6:
            c = int(rng.choice(ids))
            s = g.shape(c)
            pick = int(rng.integers(4))
            if pick == 0:
                n = ENode("access", (int(rng.integers(0, s.rank + 1)),), (c,))
            elif pick == 1 and s.rank:
                n = ENode("transpose", (tuple(int(p) for p in rng.permutation(s.rank)),), (c,))
            elif pick == 2:
                n = ENode("flatten", (), (c,))
            else:
                n = ENode("pair", (), (c, int(rng.choice(ids))))
            try:
                g.add(n)
            except ShapeError:
                pass
        else:
            a = int(rng.choice(ids))
            same = [b for b in ids if g.shape(b) == g.shape(a) and b != g.find(a)]
            if same:
                b = int(rng.choice(same))
                g.union(a, b)
                unioned.append((a, b))
        if step % rebuild_every == rebuild_every - 1:
            before = g.num_nodes
            g.rebuild()
            g.check_invariants()
            assert g.num_nodes <= before
            snapshot = (g.num_nodes, g.num_classes, sorted(g.classes))
            g.rebuild()
            assert (g.num_nodes, g.num_classes, sorted(g.classes)) == snapshot
    g.rebuild()
    g.check_invariants()
    return unioned
