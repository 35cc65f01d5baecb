"""Reference evaluator for the IR over dense float64 tensors.

Tensors are plain ``numpy.ndarray`` values of dtype float64 in row-major
order; a rank-0 array is a scalar.  Reductions accumulate sequentially,
left to right in row-major order, so results are reproducible bit for bit.
"""
from __future__ import annotations

import math
from pathlib import Path
from typing import Mapping

import numpy as np

from .ir import APShape, Expr, Op, infer_node

TensorEnv = Mapping[str, np.ndarray]

RTOL = 1e-10
ATOL = 1e-12


class EvalError(Exception):
    pass


def evaluate(e: Expr, env: TensorEnv) -> np.ndarray:
    """Evaluate ``e``; the result's shape is the combined dims of its type."""
    value, _ = _eval(e, env)
    return value


def _eval(e: Expr, env: TensorEnv) -> tuple[np.ndarray, APShape]:
    if e.head == "tensor":
        if e.name not in env:
            raise EvalError(f"unbound tensor {e.name!r}")
        t = np.asarray(env[e.name], dtype=np.float64)
        return t, infer_node("tensor", (e.name,), (), {e.name: t.shape})

    kids = [_eval(c, env) for c in e.children()]
    shape = infer_node(e.head, e.literals(), [s for _, s in kids])
    xs = [v for v, _ in kids]
    out = _APPLY[e.head](e, xs, [s for _, s in kids], shape)
    assert out.shape == shape.dims, (e.head, out.shape, shape)
    return out, shape


def _reshape(e, xs, kids, shape):
    return xs[0].reshape(shape.dims)


def _transpose(e, xs, kids, shape):
    return np.transpose(xs[0], e.perm).copy(order="C")


def _cart_prod(e, xs, kids, shape):
    a, b = xs
    sa, sb = kids
    na, nb, c = sa.n_access, sb.n_access, sa.compute
    full = sa.access + sb.access + c
    left = np.broadcast_to(a.reshape(sa.access + (1,) * nb + c), full)
    right = np.broadcast_to(b.reshape((1,) * na + sb.access + c), full)
    return np.stack([left, right], axis=na + nb)


def _windows(e, xs, kids, shape):
    (x,), (s,) = xs, kids
    axes = tuple(range(s.n_access, s.rank))
    view = np.lib.stride_tricks.sliding_window_view(x, e.window, axis=axes)
    # view: access + positions + window; keep every stride-th position.
    index = (slice(None),) * s.n_access + tuple(slice(None, None, st) for st in e.strides)
    return view[index].copy(order="C")


def _slice(e, xs, kids, shape):
    index = [slice(None)] * kids[0].rank
    index[e.dim] = slice(e.lo, e.hi)
    return xs[0][tuple(index)].copy(order="C")


def _squeeze(e, xs, kids, shape):
    return np.squeeze(xs[0], axis=e.dim)


def _pair(e, xs, kids, shape):
    return np.stack(xs, axis=kids[0].n_access)


def _concat(e, xs, kids, shape):
    return np.concatenate(xs, axis=e.dim)


def _seq_sum(rows: np.ndarray) -> np.ndarray:
    """Sum over axis 1 of a 2-d array, one column at a time from the left."""
    acc = rows[:, 0].copy()
    for k in range(1, rows.shape[1]):
        acc += rows[:, k]
    return acc


def _compute(e, xs, kids, shape):
    (x,), (s,) = xs, kids
    n_out = math.prod(s.access)
    if e.op is Op.DOT_PROD:
        t = s.compute[0]
        x = x.reshape(n_out, t, -1)
        prod = x[:, 0, :].copy()
        for j in range(1, t):
            prod *= x[:, j, :]
        out = _seq_sum(prod)
    else:
        rows = x.reshape(n_out, -1)
        out = _seq_sum(rows) if e.op is Op.REDUCE_SUM else rows.max(axis=1)
    return out.reshape(shape.dims)


def _systolic(e, xs, kids, shape):
    a, w = xs
    acc = np.outer(a[:, 0], w[0, :])
    for k in range(1, e.rows):
        acc += np.outer(a[:, k], w[k, :])
    return acc


_APPLY = {
    "access": _reshape,
    "flatten": _reshape,
    "reshape": _reshape,
    "transpose": _transpose,
    "cartProd": _cart_prod,
    "windows": _windows,
    "slice": _slice,
    "squeeze": _squeeze,
    "pair": _pair,
    "concat": _concat,
    "compute": _compute,
    "systolicArray": _systolic,
}


# --------------------------------------------------------------------------
# Comparison
# --------------------------------------------------------------------------


def discrepancy(x: np.ndarray, y: np.ndarray) -> float:
    """Largest elementwise |x - y|."""
    if x.shape != y.shape:
        return math.inf
    if x.size == 0:
        return 0.0
    return float(np.max(np.abs(x - y)))


def allclose(x: np.ndarray, y: np.ndarray, rtol: float = RTOL, atol: float = ATOL) -> bool:
    """Elementwise |x - y| <= max(atol, rtol * max(|x|, |y|))."""
    if x.shape != y.shape:
        return False
    bound = np.maximum(atol, rtol * np.maximum(np.abs(x), np.abs(y)))
    return bool(np.all(np.abs(x - y) <= bound))


def random_env(shapes: Mapping[str, tuple[int, ...]], rng: np.random.Generator) -> dict[str, np.ndarray]:
    """Uniform [-1, 1] tensors, drawn in sorted-name order."""
    return {name: rng.uniform(-1.0, 1.0, size=tuple(shapes[name])) for name in sorted(shapes)}


# --------------------------------------------------------------------------
# Tensor files
# --------------------------------------------------------------------------


class TensorFormatError(ValueError):
    pass


def format_tensor(t: np.ndarray) -> str:
    """Line 1: rank; line 2: dims; then row-major values, one per line."""
    t = np.asarray(t, dtype=np.float64)
    lines = [str(t.ndim), " ".join(str(d) for d in t.shape)]
    lines.extend(repr(float(v)) for v in t.reshape(-1))
    return "\n".join(lines) + "\n"


def parse_tensor(text: str) -> np.ndarray:
    lines = text.split("\n", 2)
    if len(lines) < 2:
        raise TensorFormatError("expected a rank line and a dims line")
    try:
        rank = int(lines[0].strip())
        dims = tuple(int(d) for d in lines[1].split())
        values = [float(v) for v in (lines[2].split() if len(lines) > 2 else [])]
    except ValueError as err:
        raise TensorFormatError(str(err)) from None
    if len(dims) != rank or any(d < 1 for d in dims):
        raise TensorFormatError(f"rank {rank} does not match dims {dims}")
    if len(values) != math.prod(dims):
        raise TensorFormatError(f"expected {math.prod(dims)} values, got {len(values)}")
    return np.array(values, dtype=np.float64).reshape(dims)


def load_tensor(path: str | Path) -> np.ndarray:
    return parse_tensor(Path(path).read_text())


def save_tensor(path: str | Path, t: np.ndarray) -> None:
    Path(path).write_text(format_tensor(t))


def load_tensor_env(path: str | Path) -> dict[str, np.ndarray]:
    """Read ``name = path`` lines; relative paths resolve against the env file."""
    path = Path(path)
    env = {}
    for lineno, raw in enumerate(path.read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        name, sep, target = line.partition("=")
        if not sep:
            raise TensorFormatError(f"{path}:{lineno}: expected 'name = path'")
        env[name.strip()] = load_tensor(path.parent / target.strip())
    return env
