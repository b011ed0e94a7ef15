"""Polynomial functions of a matrix, as evaluated by the workers.

Two representations are supported:

- matrix_poly: an expression tree over the input matrix built from addition,
  matrix products, transposition, scalar multiples and products with constant
  matrices. Evaluated with ordinary matrix algebra.
- general_entrywise: every output entry is an explicit multivariate
  polynomial in the input entries (variables are the row-major positions of
  the input). Used for small-instance oracles and arbitrary entrywise maps.
"""

from dataclasses import dataclass
from functools import reduce

import numpy as np

# Input sizes (m*n variables) up to which coefficient bounds are computed by
# full monomial expansion
EXACT_EXPANSION_LIMIT = 256


# =============================================================================
# Expression tree
# =============================================================================

class Expr:
    def __add__(self, other):
        return Add(self, other)

    def __matmul__(self, other):
        return MatMul(self, other)

    def __rmul__(self, scalar):
        return ScalarMul(float(scalar), self)

    @property
    def T(self):
        return Transpose(self)


@dataclass(frozen=True)
class Input(Expr):
    pass


@dataclass(frozen=True)
class Add(Expr):
    left: Expr
    right: Expr


@dataclass(frozen=True)
class MatMul(Expr):
    left: Expr
    right: Expr


@dataclass(frozen=True)
class Transpose(Expr):
    arg: Expr


@dataclass(frozen=True)
class ScalarMul(Expr):
    scalar: float
    arg: Expr


@dataclass(frozen=True)
class ConstMatMul(Expr):
    """const @ arg (side="left") or arg @ const (side="right")."""
    const: tuple[tuple[float, ...], ...]
    arg: Expr
    side: str = "left"

    def __post_init__(self):
        if self.side not in ("left", "right"):
            raise ValueError(f"side must be 'left' or 'right', got {self.side!r}")

    @property
    def matrix(self) -> np.ndarray:
        return np.array(self.const, dtype=np.float64)


X = Input()


def const_matmul(const, arg: Expr, side: str = "left") -> ConstMatMul:
    rows = tuple(tuple(float(v) for v in row) for row in np.atleast_2d(np.asarray(const, dtype=np.float64)))
    return ConstMatMul(rows, arg, side)


def expr_degree(e: Expr) -> int:
    match e:
        case Input():
            return 1
        case Add(a, b):
            return max(expr_degree(a), expr_degree(b))
        case MatMul(a, b):
            return expr_degree(a) + expr_degree(b)
        case Transpose(a) | ScalarMul(_, a) | ConstMatMul(_, a, _):
            return expr_degree(a)
    raise TypeError(f"unknown expression node {e!r}")


def expr_is_homogeneous(e: Expr) -> bool:
    match e:
        case Input():
            return True
        case Add(a, b):
            return expr_is_homogeneous(a) and expr_is_homogeneous(b) and expr_degree(a) == expr_degree(b)
        case MatMul(a, b):
            return expr_is_homogeneous(a) and expr_is_homogeneous(b)
        case Transpose(a) | ScalarMul(_, a) | ConstMatMul(_, a, _):
            return expr_is_homogeneous(a)
    raise TypeError(f"unknown expression node {e!r}")


def expr_shape(e: Expr, shape: tuple[int, int]) -> tuple[int, int]:
    match e:
        case Input():
            return tuple(shape)
        case Add(a, b):
            sa, sb = expr_shape(a, shape), expr_shape(b, shape)
            if sa != sb:
                raise ValueError(f"dimension mismatch: add of {sa} and {sb}")
            return sa
        case MatMul(a, b):
            sa, sb = expr_shape(a, shape), expr_shape(b, shape)
            if sa[1] != sb[0]:
                raise ValueError(f"dimension mismatch: matmul of {sa} and {sb}")
            return sa[0], sb[1]
        case Transpose(a):
            sa = expr_shape(a, shape)
            return sa[1], sa[0]
        case ScalarMul(_, a):
            return expr_shape(a, shape)
        case ConstMatMul(const, a, side):
            sa = expr_shape(a, shape)
            rows, cols = len(const), len(const[0])
            if side == "left":
                if cols != sa[0]:
                    raise ValueError(f"dimension mismatch: ({rows}, {cols}) @ {sa}")
                return rows, sa[1]
            if sa[1] != rows:
                raise ValueError(f"dimension mismatch: {sa} @ ({rows}, {cols})")
            return sa[0], cols
    raise TypeError(f"unknown expression node {e!r}")


def expr_eval(e: Expr, x: np.ndarray) -> np.ndarray:
    match e:
        case Input():
            return x
        case Add(a, b):
            return expr_eval(a, x) + expr_eval(b, x)
        case MatMul(a, b):
            return expr_eval(a, x) @ expr_eval(b, x)
        case Transpose(a):
            return expr_eval(a, x).T
        case ScalarMul(c, a):
            return c * expr_eval(a, x)
        case ConstMatMul(_, a, side):
            inner = expr_eval(a, x)
            return e.matrix @ inner if side == "left" else inner @ e.matrix
    raise TypeError(f"unknown expression node {e!r}")


# =============================================================================
# Sparse polynomials: {monomial (sorted tuple of variable ids): coefficient}
# =============================================================================

def _padd(p: dict, q: dict) -> dict:
    out = dict(p)
    for mono, c in q.items():
        out[mono] = out.get(mono, 0.0) + c
    return {mono: c for mono, c in out.items() if c != 0.0}


def _pmul(p: dict, q: dict) -> dict:
    out: dict = {}
    for m1, c1 in p.items():
        for m2, c2 in q.items():
            mono = tuple(sorted(m1 + m2))
            out[mono] = out.get(mono, 0.0) + c1 * c2
    return {mono: c for mono, c in out.items() if c != 0.0}


def _pscale(p: dict, c: float) -> dict:
    return {mono: c * v for mono, v in p.items()} if c != 0.0 else {}


def _expand(e: Expr, shape: tuple[int, int]) -> list[list[dict]]:
    match e:
        case Input():
            m, n = shape
            return [[{(i * n + j,): 1.0} for j in range(n)] for i in range(m)]
        case Add(a, b):
            A, B = _expand(a, shape), _expand(b, shape)
            return [[_padd(pa, pb) for pa, pb in zip(ra, rb)] for ra, rb in zip(A, B)]
        case MatMul(a, b):
            A, B = _expand(a, shape), _expand(b, shape)
            inner = len(B)
            return [[reduce(_padd, (_pmul(A[i][l], B[l][j]) for l in range(inner)), {})
                     for j in range(len(B[0]))] for i in range(len(A))]
        case Transpose(a):
            A = _expand(a, shape)
            return [list(col) for col in zip(*A)]
        case ScalarMul(c, a):
            return [[_pscale(p, c) for p in row] for row in _expand(a, shape)]
        case ConstMatMul(const, a, side):
            A = _expand(a, shape)
            C = const
            if side == "left":
                return [[reduce(_padd, (_pscale(A[l][j], C[i][l]) for l in range(len(A))), {})
                         for j in range(len(A[0]))] for i in range(len(C))]
            return [[reduce(_padd, (_pscale(A[i][l], C[l][j]) for l in range(len(C))), {})
                     for j in range(len(C[0]))] for i in range(len(A))]
    raise TypeError(f"unknown expression node {e!r}")


def _eval_poly(p: dict, flat: np.ndarray):
    total = 0.0
    for mono, c in p.items():
        term = c
        for v in mono:
            term = term * flat[v]
        total = total + term
    return total


# =============================================================================
# PolyFn
# =============================================================================

@dataclass(frozen=True)
class PolyFn:
    kind: str
    expr: Expr | None = None
    entries: tuple | None = None  # general_entrywise: rows of ((monomial, coef), ...) tuples
    input_shape: tuple[int, int] | None = None
    name: str = ""

    def __post_init__(self):
        if self.kind == "matrix_poly":
            if self.expr is None:
                raise ValueError("matrix_poly requires an expression")
        elif self.kind == "general_entrywise":
            if self.entries is None or self.input_shape is None:
                raise ValueError("general_entrywise requires entries and input_shape")
        else:
            raise ValueError(f"unknown polynomial kind {self.kind!r}")

    @classmethod
    def matrix(cls, expr: Expr, name: str = "") -> "PolyFn":
        return cls("matrix_poly", expr=expr, name=name)

    @classmethod
    def general(cls, polys, input_shape, name: str = "") -> "PolyFn":
        """Build from a nested list (rows) of {monomial: coef} dicts."""
        entries = tuple(
            tuple(tuple(sorted((tuple(sorted(mono)), float(c)) for mono, c in p.items() if c != 0.0)) for p in row)
            for row in polys
        )
        return cls("general_entrywise", entries=entries, input_shape=tuple(input_shape), name=name)

    def _polys(self) -> list[list[dict]]:
        return [[dict(p) for p in row] for row in self.entries]

    @property
    def degree(self) -> int:
        if self.kind == "matrix_poly":
            return expr_degree(self.expr)
        degs = [len(mono) for row in self.entries for p in row for mono, _ in p]
        return max(degs, default=0)

    def output_shape(self, shape) -> tuple[int, int]:
        if self.kind == "matrix_poly":
            return expr_shape(self.expr, tuple(shape))
        self._check_shape(shape)
        return len(self.entries), len(self.entries[0])

    def _check_shape(self, shape):
        if tuple(shape) != self.input_shape:
            raise ValueError(f"dimension mismatch: input {tuple(shape)}, expected {self.input_shape}")

    def __call__(self, x) -> np.ndarray:
        return evaluate(self, x)


def evaluate(f: PolyFn, x) -> np.ndarray:
    """Evaluate f at a real or complex matrix."""
    x = np.asarray(x)
    if x.ndim != 2:
        raise ValueError(f"dimension mismatch: expected a matrix, got shape {x.shape}")
    if f.kind == "matrix_poly":
        expr_shape(f.expr, x.shape)
        return expr_eval(f.expr, x)
    f._check_shape(x.shape)
    flat = x.ravel()
    dtype = np.result_type(x.dtype, np.float64)
    return np.array([[_eval_poly(dict(p), flat) for p in row] for row in f.entries], dtype=dtype)


def expand(f: PolyFn, shape) -> PolyFn:
    """General entrywise form of f for a given input shape."""
    if f.kind == "general_entrywise":
        f._check_shape(shape)
        return f
    expr_shape(f.expr, tuple(shape))
    return PolyFn.general(_expand(f.expr, tuple(shape)), shape, name=f.name)


def is_homogeneous(f: PolyFn) -> bool:
    if f.kind == "matrix_poly":
        return expr_is_homogeneous(f.expr)
    degs = {len(mono) for row in f.entries for p in row for mono, _ in p}
    return len(degs) <= 1


@dataclass(frozen=True)
class PolyBounds:
    D: int
    c: float
    s_a: float
    exact: bool


def _bounds_from_polys(polys) -> tuple[float, float]:
    c = max((abs(v) for row in polys for p in row for v in p.values()), default=0.0)
    s_a = max((sum(abs(v) for v in p.values()) for row in polys for p in row), default=0.0)
    return c, s_a


def _max_product(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """out[i, j] = max_l a[i, l] * b[l, j], one row at a time."""
    out = np.zeros((a.shape[0], b.shape[1]))
    if a.shape[1] == 0:
        return out
    for i in range(a.shape[0]):
        out[i] = np.max(a[i][:, None] * b, axis=0)
    return out


def _propagate(e: Expr, shape) -> dict[int, tuple[np.ndarray, np.ndarray]]:
    """Per-degree (abs coefficient sum, max abs coefficient) matrices.

    Assumes monomials produced by different terms never coincide, which holds
    for products and sums of distinct input entries (gram, square).
    """
    match e:
        case Input():
            ones = np.ones(shape)
            return {1: (ones, ones)}
        case Add(a, b):
            A, B = _propagate(a, shape), _propagate(b, shape)
            out = dict(A)
            for d, (s, c) in B.items():
                if d in out:
                    out[d] = (out[d][0] + s, np.maximum(out[d][1], c))
                else:
                    out[d] = (s, c)
            return out
        case MatMul(a, b):
            A, B = _propagate(a, shape), _propagate(b, shape)
            out: dict = {}
            for d1, (s1, c1) in A.items():
                for d2, (s2, c2) in B.items():
                    s = s1 @ s2
                    c = _max_product(c1, c2)
                    if d1 + d2 in out:
                        ps, pc = out[d1 + d2]
                        out[d1 + d2] = (ps + s, np.maximum(pc, c))
                    else:
                        out[d1 + d2] = (s, c)
            return out
        case Transpose(a):
            return {d: (s.T, c.T) for d, (s, c) in _propagate(a, shape).items()}
        case ScalarMul(k, a):
            return {d: (abs(k) * s, abs(k) * c) for d, (s, c) in _propagate(a, shape).items()}
        case ConstMatMul(_, a, side):
            M = np.abs(e.matrix)
            out = {}
            for d, (s, c) in _propagate(a, shape).items():
                if side == "left":
                    out[d] = (M @ s, _max_product(M, c))
                else:
                    out[d] = (s @ M, _max_product(c, M))
            return out
    raise TypeError(f"unknown expression node {e!r}")


def degree_and_bounds(f: PolyFn, shape=None) -> PolyBounds:
    """True degree D, max coefficient c and max per-entry coefficient abs-sum s_a.

    For matrix polynomials the input shape is required. Small inputs are
    expanded exactly; larger ones use per-degree propagation (exact=False).
    """
    if f.kind == "general_entrywise":
        c, s_a = _bounds_from_polys(f._polys())
        return PolyBounds(f.degree, c, s_a, True)
    if shape is None:
        raise ValueError("input shape required for matrix polynomial bounds")
    shape = tuple(shape)
    expr_shape(f.expr, shape)
    if shape[0] * shape[1] <= EXACT_EXPANSION_LIMIT:
        c, s_a = _bounds_from_polys(_expand(f.expr, shape))
        return PolyBounds(f.degree, c, s_a, True)
    comps = _propagate(f.expr, shape)
    total = sum(s for s, _ in comps.values())
    c = max(float(np.max(cm)) for _, cm in comps.values())
    return PolyBounds(f.degree, c, float(np.max(total)), False)


# =============================================================================
# Presets and JSON schema
# =============================================================================

def identity() -> PolyFn:
    return PolyFn.matrix(X, name="identity")


def gram() -> PolyFn:
    """X^T X."""
    return PolyFn.matrix(MatMul(Transpose(X), X), name="gram")


def square() -> PolyFn:
    """X X, square inputs only."""
    return PolyFn.matrix(MatMul(X, X), name="square")


def scaled_gram_plus(a: float, b: float) -> PolyFn:
    """a X^T X + b X, square inputs only."""
    return PolyFn.matrix(Add(ScalarMul(a, MatMul(Transpose(X), X)), ScalarMul(b, X)),
                         name=f"{a:g}*gram+{b:g}*X")


PRESETS = {
    "identity": identity,
    "gram": gram,
    "square": square,
}


def preset(name: str) -> PolyFn:
    if name not in PRESETS:
        raise ValueError(f"unknown polynomial preset {name!r}; choose from {sorted(PRESETS)}")
    return PRESETS[name]()


def _expr_to_json(e: Expr) -> dict:
    match e:
        case Input():
            return {"op": "input"}
        case Add(a, b):
            return {"op": "add", "args": [_expr_to_json(a), _expr_to_json(b)]}
        case MatMul(a, b):
            return {"op": "matmul", "args": [_expr_to_json(a), _expr_to_json(b)]}
        case Transpose(a):
            return {"op": "transpose", "args": [_expr_to_json(a)]}
        case ScalarMul(c, a):
            return {"op": "scale", "scalar": c, "args": [_expr_to_json(a)]}
        case ConstMatMul(const, a, side):
            return {"op": "const_matmul", "side": side, "const": [list(r) for r in const],
                    "args": [_expr_to_json(a)]}
    raise TypeError(f"unknown expression node {e!r}")


def _expr_from_json(node: dict) -> Expr:
    op = node.get("op")
    args = [_expr_from_json(a) for a in node.get("args", [])]
    arity = {"input": 0, "add": 2, "matmul": 2, "transpose": 1, "scale": 1, "const_matmul": 1}
    if op not in arity:
        raise ValueError(f"unknown expression op {op!r}")
    if len(args) != arity[op]:
        raise ValueError(f"op {op!r} takes {arity[op]} args, got {len(args)}")
    if op == "input":
        return X
    if op == "add":
        return Add(*args)
    if op == "matmul":
        return MatMul(*args)
    if op == "transpose":
        return Transpose(args[0])
    if op == "scale":
        return ScalarMul(float(node["scalar"]), args[0])
    return const_matmul(node["const"], args[0], node.get("side", "left"))


def to_json(f: PolyFn) -> dict:
    if f.kind == "matrix_poly":
        return {"kind": f.kind, "name": f.name, "expr": _expr_to_json(f.expr)}
    return {
        "kind": f.kind,
        "name": f.name,
        "input_shape": list(f.input_shape),
        "entries": [[[{"monomial": list(mono), "coef": c} for mono, c in p] for p in row] for row in f.entries],
    }


def from_json(doc: dict) -> PolyFn:
    kind = doc.get("kind")
    if kind == "matrix_poly":
        return PolyFn.matrix(_expr_from_json(doc["expr"]), name=doc.get("name", ""))
    if kind == "general_entrywise":
        polys = [[{tuple(t["monomial"]): t["coef"] for t in p} for p in row] for row in doc["entries"]]
        return PolyFn.general(polys, doc["input_shape"], name=doc.get("name", ""))
    raise ValueError(f"unknown polynomial kind {kind!r}")
