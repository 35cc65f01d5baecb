"""Builders for the standard kernels and access to the shipped corpus."""
from __future__ import annotations

from importlib import resources

from .ir import Expr
from .syntax import parse, parse_shape_env


def matmul() -> Expr:
    return parse(
        "(compute dotProd (cartProd (access activations 1)"
        " (transpose (access weights 1) (list 1 0))))"
    )


def conv2d(channels: int, kh: int, kw: int, sh: int = 1, sw: int = 1) -> Expr:
    """NCHW activations, OCHW weights; result laid out (N, O, H', W')."""
    return parse(
        f"""(transpose
             (squeeze
              (compute dotProd
               (cartProd
                (windows (access activations 1) (shape {channels} {kh} {kw}) (shape 1 {sh} {sw}))
                (access weights 1)))
              1)
             (list 0 3 1 2))"""
    )


def maxpool(kh: int, kw: int, sh: int, sw: int) -> Expr:
    return parse(
        f"(compute reduceMax (windows (access activations 2) (shape {kh} {kw}) (shape {sh} {sw})))"
    )


def corpus_path(name: str):
    return resources.files("apsat") / "corpus" / name


def load_program(name: str) -> Expr:
    return parse(corpus_path(name).read_text())


def load_shapes(name: str) -> dict[str, tuple[int, ...]]:
    return parse_shape_env(corpus_path(name).read_text())
