"""Access-pattern IR: shapes, expression constructs and shape inference.

An access pattern is a tensor whose dimensions are split into *access*
dimensions (iterated over) and *compute* dimensions (computed on).  Every
expression in the IR denotes an access pattern; its type is an
:class:`APShape`.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, fields
from typing import ClassVar, Mapping, Sequence

Dims = tuple[int, ...]
ShapeEnv = Mapping[str, Dims]


class ShapeError(Exception):
    """A construct was applied to operands of the wrong shape."""

    def __init__(self, construct: str, expected: str, got: str, path: tuple[str, ...] = ()):
        self.construct = construct
        self.expected = expected
        self.got = got
        self.path = path
        super().__init__(self._message())

    def _message(self) -> str:
        where = " > ".join(self.path) if self.path else self.construct
        return f"{where}: expected {self.expected}, got {self.got}"

    def at(self, path: tuple[str, ...]) -> "ShapeError":
        return ShapeError(self.construct, self.expected, self.got, path)


class UnboundTensor(ShapeError):
    def __init__(self, name: str, path: tuple[str, ...] = ()):
        self.name = name
        super().__init__("tensor", "a bound tensor name", repr(name), path)

    def at(self, path: tuple[str, ...]) -> "UnboundTensor":
        return UnboundTensor(self.name, path)


@dataclass(frozen=True)
class APShape:
    """Pair of dimension tuples ``(access, compute)``."""

    access: Dims
    compute: Dims

    def __post_init__(self) -> None:
        object.__setattr__(self, "access", tuple(int(d) for d in self.access))
        object.__setattr__(self, "compute", tuple(int(d) for d in self.compute))

    @property
    def dims(self) -> Dims:
        return self.access + self.compute

    @property
    def n_access(self) -> int:
        return len(self.access)

    @property
    def rank(self) -> int:
        return len(self.access) + len(self.compute)

    @classmethod
    def split(cls, dims: Sequence[int], n_access: int) -> "APShape":
        dims = tuple(dims)
        return cls(dims[:n_access], dims[n_access:])

    def __str__(self) -> str:
        return f"({_tuple_str(self.access)}, {_tuple_str(self.compute)})"


def _tuple_str(t: Dims) -> str:
    return "(" + ", ".join(str(d) for d in t) + ")"


class Op(str, enum.Enum):
    REDUCE_SUM = "reduceSum"
    REDUCE_MAX = "reduceMax"
    DOT_PROD = "dotProd"

    def __str__(self) -> str:
        return self.value


# --------------------------------------------------------------------------
# Expression constructs
#
# Each construct declares its surface syntax as a sequence of slot kinds.
# Dataclass fields follow the same order.  ``expr`` slots are children; the
# rest are literals and become part of an e-node's identity.
# --------------------------------------------------------------------------


class Expr:
    head: ClassVar[str]
    slots: ClassVar[tuple[str, ...]]

    def children(self) -> tuple["Expr", ...]:
        return tuple(getattr(self, f.name) for f, k in zip(fields(self), self.slots) if k == "expr")

    def literals(self) -> tuple:
        return tuple(getattr(self, f.name) for f, k in zip(fields(self), self.slots) if k != "expr")

    def __str__(self) -> str:
        from .syntax import pretty_print

        return pretty_print(self)


@dataclass(frozen=True)
class TensorRef(Expr):
    name: str
    head = "tensor"
    slots = ("name",)


@dataclass(frozen=True)
class Access(Expr):
    child: Expr
    n: int
    head = "access"
    slots = ("expr", "nat")


@dataclass(frozen=True)
class Transpose(Expr):
    child: Expr
    perm: Dims
    head = "transpose"
    slots = ("expr", "list")


@dataclass(frozen=True)
class CartProd(Expr):
    left: Expr
    right: Expr
    head = "cartProd"
    slots = ("expr", "expr")


@dataclass(frozen=True)
class Windows(Expr):
    child: Expr
    window: Dims
    strides: Dims
    head = "windows"
    slots = ("expr", "shape", "shape")


@dataclass(frozen=True)
class Slice(Expr):
    child: Expr
    dim: int
    lo: int
    hi: int
    head = "slice"
    slots = ("expr", "nat", "nat", "nat")


@dataclass(frozen=True)
class Squeeze(Expr):
    child: Expr
    dim: int
    head = "squeeze"
    slots = ("expr", "nat")


@dataclass(frozen=True)
class Flatten(Expr):
    child: Expr
    head = "flatten"
    slots = ("expr",)


@dataclass(frozen=True)
class Reshape(Expr):
    child: Expr
    target: APShape
    head = "reshape"
    slots = ("expr", "apshape")


@dataclass(frozen=True)
class Pair(Expr):
    left: Expr
    right: Expr
    head = "pair"
    slots = ("expr", "expr")


@dataclass(frozen=True)
class Concat(Expr):
    left: Expr
    right: Expr
    dim: int
    head = "concat"
    slots = ("expr", "expr", "nat")


@dataclass(frozen=True)
class Compute(Expr):
    op: Op
    child: Expr
    head = "compute"
    slots = ("op", "expr")


@dataclass(frozen=True)
class SystolicArray(Expr):
    rows: int
    cols: int
    activations: Expr
    weights: Expr
    head = "systolicArray"
    slots = ("nat", "nat", "expr", "expr")


CONSTRUCTS: dict[str, type[Expr]] = {
    cls.head: cls
    for cls in (
        TensorRef, Access, Transpose, CartProd, Windows, Slice, Squeeze,
        Flatten, Reshape, Pair, Concat, Compute, SystolicArray,
    )
}

# Shape-manipulating constructs that perform no arithmetic.
TRANSFORMERS = frozenset(
    {"access", "transpose", "cartProd", "windows", "slice", "squeeze",
     "flatten", "reshape", "pair", "concat"}
)


def build(head: str, literals: Sequence, children: Sequence[Expr]) -> Expr:
    """Assemble a construct from its head, literals and children (in slot order)."""
    cls = CONSTRUCTS[head]
    lits = iter(literals)
    kids = iter(children)
    args = [next(kids) if kind == "expr" else next(lits) for kind in cls.slots]
    return cls(*args)


def arity(head: str) -> int:
    return CONSTRUCTS[head].slots.count("expr")


# --------------------------------------------------------------------------
# Shape inference
# --------------------------------------------------------------------------


def _prod(dims: Sequence[int]) -> int:
    return math.prod(dims)


def _check_index(construct: str, d: int, rank: int) -> None:
    if not 0 <= d < rank:
        raise ShapeError(construct, f"dimension index in [0, {rank})", str(d))


def infer_node(head: str, literals: Sequence, kids: Sequence[APShape], env: ShapeEnv | None = None) -> APShape:
    """Shape of one construct given its literals and its children's shapes."""
    if head == "tensor":
        (name,) = literals
        if env is None or name not in env:
            raise UnboundTensor(name)
        dims = tuple(env[name])
        if any(d < 1 for d in dims):
            raise ShapeError("tensor", "positive dimensions", str(dims))
        return APShape((), dims)

    if head == "access":
        (n,) = literals
        (s,) = kids
        if not 0 <= n <= s.rank:
            raise ShapeError(head, f"access depth in [0, {s.rank}]", str(n))
        return APShape.split(s.dims, n)

    if head == "transpose":
        (perm,) = literals
        (s,) = kids
        if sorted(perm) != list(range(s.rank)):
            raise ShapeError(head, f"a permutation of 0..{s.rank - 1}", str(tuple(perm)))
        return APShape.split(tuple(s.dims[p] for p in perm), s.n_access)

    if head == "cartProd":
        a, b = kids
        if a.compute != b.compute:
            raise ShapeError(head, "equal compute dimensions", f"{a} and {b}")
        return APShape(a.access + b.access, (2,) + a.compute)

    if head == "windows":
        window, strides = literals
        (s,) = kids
        if not (len(window) == len(strides) == len(s.compute)):
            raise ShapeError(head, f"window and strides of length {len(s.compute)}",
                             f"window {tuple(window)}, strides {tuple(strides)}")
        if any(w < 1 for w in window) or any(st < 1 for st in strides):
            raise ShapeError(head, "positive window and strides", f"{tuple(window)}, {tuple(strides)}")
        out = []
        for b, w, st in zip(s.compute, window, strides):
            if w > b:
                raise ShapeError(head, f"window extent <= {b}", str(w))
            out.append(-(-(b - (w - 1)) // st))
        return APShape(s.access + tuple(out), tuple(window))

    if head == "slice":
        d, lo, hi = literals
        (s,) = kids
        _check_index(head, d, s.rank)
        if not 0 <= lo < hi <= s.dims[d]:
            raise ShapeError(head, f"bounds 0 <= lo < hi <= {s.dims[d]}", f"[{lo}, {hi})")
        dims = list(s.dims)
        dims[d] = hi - lo
        return APShape.split(dims, s.n_access)

    if head == "squeeze":
        (d,) = literals
        (s,) = kids
        _check_index(head, d, s.rank)
        if s.dims[d] != 1:
            raise ShapeError(head, f"extent 1 at dimension {d}", str(s.dims[d]))
        dims = s.dims[:d] + s.dims[d + 1:]
        return APShape.split(dims, s.n_access - (d < s.n_access))

    if head == "flatten":
        (s,) = kids
        return APShape(
            (_prod(s.access),) if s.access else (),
            (_prod(s.compute),) if s.compute else (),
        )

    if head == "reshape":
        (target,) = literals
        (s,) = kids
        if any(d < 1 for d in target.dims):
            raise ShapeError(head, "positive target dimensions", str(target))
        if _prod(s.access) != _prod(target.access) or _prod(s.compute) != _prod(target.compute):
            raise ShapeError(head, f"a target with the element counts of {s}", str(target))
        return target

    if head == "pair":
        a, b = kids
        if a != b:
            raise ShapeError(head, "operands of equal shape", f"{a} and {b}")
        return APShape(a.access, (2,) + a.compute)

    if head == "concat":
        (d,) = literals
        a, b = kids
        _check_index(head, d, a.rank)
        if a.n_access != b.n_access or a.rank != b.rank or any(
            x != y for i, (x, y) in enumerate(zip(a.dims, b.dims)) if i != d
        ):
            raise ShapeError(head, f"shapes equal except at dimension {d}", f"{a} and {b}")
        dims = list(a.dims)
        dims[d] += b.dims[d]
        return APShape.split(dims, a.n_access)

    if head == "compute":
        (op,) = literals
        (s,) = kids
        if op is Op.DOT_PROD and (not s.compute or s.compute[0] < 2):
            raise ShapeError("compute dotProd", "compute dimensions (t, ...) with t >= 2", str(s))
        return APShape(s.access, ())

    if head == "systolicArray":
        rows, cols = literals
        a, w = kids
        if a.n_access != 1 or a.compute != (rows,):
            raise ShapeError(head, f"activations of shape ((batch), ({rows}))", str(a))
        if w != APShape((), (rows, cols)):
            raise ShapeError(head, f"weights of shape ((), ({rows}, {cols}))", str(w))
        return APShape((a.access[0], cols), ())

    raise ShapeError(head, "a known construct", head)


def infer_shape(e: Expr, env: ShapeEnv, _path: tuple[str, ...] = ()) -> APShape:
    """Infer the access-pattern shape of ``e``.

    Raises :class:`ShapeError` whose ``path`` lists the construct heads from
    the root down to the failing node.
    """
    path = _path + (e.head,)
    kids = [infer_shape(c, env, path) for c in e.children()]
    try:
        return infer_node(e.head, e.literals(), kids, env)
    except ShapeError as err:
        raise err.at(path) from None


def iter_nodes(e: Expr):
    """Pre-order traversal."""
    yield e
    for c in e.children():
        yield from iter_nodes(c)


def count_heads(e: Expr, head: str, op: Op | str | None = None) -> int:
    op = None if op is None else Op(op)
    return sum(1 for n in iter_nodes(e) if n.head == head and (op is None or getattr(n, "op", None) is op))
