"""Brute-force kernel definitions written as explicit index loops.

These share no code with the evaluator; they are the independent side of
every interpreter cross-check.
"""
from __future__ import annotations

import itertools

import numpy as np


def oracle_matmul(p: np.ndarray, q: np.ndarray) -> np.ndarray:
    m, n = p.shape
    n2, o = q.shape
    if n != n2:
        raise ValueError(f"inner dimensions differ: {p.shape} x {q.shape}")
    out = np.zeros((m, o))
    for i in range(m):
        for j in range(o):
            acc = 0.0
            for k in range(n):
                acc += float(p[i, k]) * float(q[k, j])
            out[i, j] = acc
    return out


def _out_extent(size: int, window: int, stride: int) -> int:
    if window > size:
        raise ValueError(f"window {window} larger than input extent {size}")
    return (size - window) // stride + 1


def oracle_conv2d(a: np.ndarray, w: np.ndarray, strides: tuple[int, int] = (1, 1)) -> np.ndarray:
    """out[n, o, x, y] = sum over (dx, dy, c) of A[n, c, sh*x+dx, sw*y+dy] * W[o, c, dx, dy]."""
    n_batch, c_in, h, wd = a.shape
    o_ch, c2, kh, kw = w.shape
    if c_in != c2:
        raise ValueError(f"channel mismatch: {a.shape} vs {w.shape}")
    sh, sw = strides
    ho, wo = _out_extent(h, kh, sh), _out_extent(wd, kw, sw)
    out = np.zeros((n_batch, o_ch, ho, wo))
    for n, o, x, y in itertools.product(range(n_batch), range(o_ch), range(ho), range(wo)):
        acc = 0.0
        for c in range(c_in):
            for dx in range(kh):
                for dy in range(kw):
                    acc += float(a[n, c, sh * x + dx, sw * y + dy]) * float(w[o, c, dx, dy])
        out[n, o, x, y] = acc
    return out


def oracle_maxpool(a: np.ndarray, window: tuple[int, int], strides: tuple[int, int]) -> np.ndarray:
    n_batch, c_in, h, wd = a.shape
    kh, kw = window
    sh, sw = strides
    ho, wo = _out_extent(h, kh, sh), _out_extent(wd, kw, sw)
    out = np.zeros((n_batch, c_in, ho, wo))
    for n, c, x, y in itertools.product(range(n_batch), range(c_in), range(ho), range(wo)):
        best = -np.inf
        for dx in range(kh):
            for dy in range(kw):
                best = max(best, float(a[n, c, sh * x + dx, sw * y + dy]))
        out[n, c, x, y] = best
    return out
