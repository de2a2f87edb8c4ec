"""Box-bounded multi-objective test problems.

Builtins: ZDT1, ZDT2, ZDT3, ZDT4, ZDT6 (default 20 variables) and VLMOP2
(6 variables). Other problems, such as the RE real-world suite, are
described in a small key-value file and loaded with :func:`load_problem`.
"""

import ast
import math
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional

import numpy as np

from .exceptions import (
    BoundsViolationError,
    ProblemFormatError,
    UnknownProblemError,
    UnsupportedMetricError,
)
from .hypervolume import hv, non_dominated

FRONT_POINTS = 1000


@dataclass(frozen=True)
class Problem:
    name: str
    n_var: int
    n_obj: int
    lower_bounds: np.ndarray
    upper_bounds: np.ndarray
    objective: Callable[[np.ndarray], np.ndarray] = field(repr=False)
    true_front: Optional[np.ndarray] = field(default=None, repr=False)

    def __post_init__(self):
        lo = np.asarray(self.lower_bounds, dtype=float).reshape(-1)
        hi = np.asarray(self.upper_bounds, dtype=float).reshape(-1)
        if lo.shape != (self.n_var,) or hi.shape != (self.n_var,):
            raise BoundsViolationError(
                f"bounds must have length n_var={self.n_var}, "
                f"got {lo.shape[0]} and {hi.shape[0]}"
            )
        bad = np.flatnonzero(~(lo < hi))
        if bad.size:
            i = int(bad[0])
            raise BoundsViolationError(
                f"lower bound {lo[i]} is not below upper bound {hi[i]} at index {i}",
                index=i,
            )
        if self.n_obj < 2:
            raise ValueError("a multi-objective problem needs n_obj >= 2")
        object.__setattr__(self, "lower_bounds", lo)
        object.__setattr__(self, "upper_bounds", hi)
        if self.true_front is not None:
            front = np.asarray(self.true_front, dtype=float).reshape(-1, self.n_obj)
            object.__setattr__(self, "true_front", non_dominated(front))

    def check_bounds(self, X):
        X = np.asarray(X, dtype=float)
        rows = X.reshape(-1, X.shape[-1]) if X.ndim else X.reshape(1, 1)
        if rows.shape[1] != self.n_var:
            raise ValueError(
                f"{self.name}: expected {self.n_var} decision variables, got {rows.shape[1]}"
            )
        outside = (rows < self.lower_bounds) | (rows > self.upper_bounds)
        if outside.any():
            r, i = np.argwhere(outside)[0]
            raise BoundsViolationError(
                f"{self.name}: x[{i}]={rows[r, i]!r} outside "
                f"[{self.lower_bounds[i]}, {self.upper_bounds[i]}]",
                index=int(i),
            )
        return rows

    def evaluate(self, X):
        """Objective vector(s) for one decision vector or a batch of rows."""
        X = np.asarray(X, dtype=float)
        rows = self.check_bounds(X)
        Y = np.asarray(self.objective(rows), dtype=float).reshape(len(rows), self.n_obj)
        if not np.all(np.isfinite(Y)):
            raise FloatingPointError(f"{self.name}: non-finite objective value")
        return Y[0] if X.ndim == 1 else Y

    def default_ref_point(self):
        """Nadir of the reference front pushed out by 10%."""
        if self.true_front is None:
            raise UnsupportedMetricError(f"{self.name} has no reference front")
        return expand_nadir(self.true_front.max(axis=0))

    def true_front_hv(self, ref_point=None):
        """Hypervolume of the reference front (points outside the box are clipped)."""
        if self.true_front is None:
            raise UnsupportedMetricError(f"{self.name} has no reference front")
        ref = self.default_ref_point() if ref_point is None else np.asarray(ref_point, float)
        return hv(self.true_front, ref)


def expand_nadir(nadir, margin=0.1):
    """Scale a nadir vector by ``1 + margin``; zero or negative entries move up
    by ``margin * |value|`` (or ``margin`` at zero) so the box keeps volume."""
    nadir = np.asarray(nadir, dtype=float)
    step = margin * np.abs(nadir)
    step[step == 0] = margin
    return nadir + step


def true_front_hv(problem, ref_point=None):
    return problem.true_front_hv(ref_point)


# --- builtins -------------------------------------------------------------


def _zdt_g(X):
    n = X.shape[1]
    return 1.0 + 9.0 * X[:, 1:].sum(axis=1) / (n - 1)


def _zdt1(X):
    f1 = X[:, 0]
    g = _zdt_g(X)
    return np.column_stack([f1, g * (1.0 - np.sqrt(f1 / g))])


def _zdt2(X):
    f1 = X[:, 0]
    g = _zdt_g(X)
    return np.column_stack([f1, g * (1.0 - (f1 / g) ** 2)])


def _zdt3(X):
    f1 = X[:, 0]
    g = _zdt_g(X)
    h = 1.0 - np.sqrt(f1 / g) - (f1 / g) * np.sin(10.0 * np.pi * f1)
    return np.column_stack([f1, g * h])


def _zdt4(X):
    f1 = X[:, 0]
    rest = X[:, 1:]
    g = 1.0 + 10.0 * rest.shape[1] + np.sum(rest**2 - 10.0 * np.cos(4.0 * np.pi * rest), axis=1)
    return np.column_stack([f1, g * (1.0 - np.sqrt(f1 / g))])


def _zdt6(X):
    x1 = X[:, 0]
    f1 = 1.0 - np.exp(-4.0 * x1) * np.sin(6.0 * np.pi * x1) ** 6
    n = X.shape[1]
    g = 1.0 + 9.0 * (X[:, 1:].sum(axis=1) / (n - 1)) ** 0.25
    return np.column_stack([f1, g * (1.0 - (f1 / g) ** 2)])


def _vlmop2(X):
    n = X.shape[1]
    s = 1.0 / math.sqrt(n)
    f1 = 1.0 - np.exp(-np.sum((X - s) ** 2, axis=1))
    f2 = 1.0 - np.exp(-np.sum((X + s) ** 2, axis=1))
    return np.column_stack([f1, f2])


def _front_zdt1(k=FRONT_POINTS):
    f1 = np.linspace(0.0, 1.0, k)
    return np.column_stack([f1, 1.0 - np.sqrt(f1)])


def _front_zdt2(k=FRONT_POINTS):
    f1 = np.linspace(0.0, 1.0, k)
    return np.column_stack([f1, 1.0 - f1**2])


def _front_zdt3(k=FRONT_POINTS):
    f1 = np.linspace(0.0, 1.0, 200 * k)
    dense = np.column_stack([f1, 1.0 - np.sqrt(f1) - f1 * np.sin(10.0 * np.pi * f1)])
    front = non_dominated(dense)
    front = front[np.argsort(front[:, 0])]
    pick = np.unique(np.round(np.linspace(0, len(front) - 1, k)).astype(int))
    return front[pick]


def _front_zdt6(k=FRONT_POINTS):
    # smallest attainable f1 (x1 = 0.0821...) solved numerically once
    x = np.linspace(0.0, 1.0, 200001)
    f1_min = float(np.min(1.0 - np.exp(-4.0 * x) * np.sin(6.0 * np.pi * x) ** 6))
    f1 = np.linspace(f1_min, 1.0, k)
    return np.column_stack([f1, 1.0 - f1**2])


def _front_vlmop2(n_var, k=FRONT_POINTS):
    s = 1.0 / math.sqrt(n_var)
    t = np.linspace(-s, s, k)
    X = np.repeat(t[:, None], n_var, axis=1)
    return _vlmop2(X)


_BUILTINS = {
    "zdt1": (_zdt1, lambda n: _front_zdt1(), 20, (0.0, 1.0)),
    "zdt2": (_zdt2, lambda n: _front_zdt2(), 20, (0.0, 1.0)),
    "zdt3": (_zdt3, lambda n: _front_zdt3(), 20, (0.0, 1.0)),
    "zdt4": (_zdt4, lambda n: _front_zdt1(), 20, (-5.0, 5.0)),
    "zdt6": (_zdt6, lambda n: _front_zdt6(), 20, (0.0, 1.0)),
    "vlmop2": (_vlmop2, _front_vlmop2, 6, (-2.0, 2.0)),
}


def builtin_names():
    return sorted(_BUILTINS)


def get_problem(name, n_var=None):
    """Instantiate a builtin problem by (case-insensitive) name."""
    key = name.lower()
    if key not in _BUILTINS:
        raise UnknownProblemError(
            f"unknown builtin problem {name!r}; available: {', '.join(builtin_names())}"
        )
    func, front, default_n, (lo, hi) = _BUILTINS[key]
    n = default_n if n_var is None else int(n_var)
    if n < 2:
        raise ValueError("builtin problems need n_var >= 2")
    lower = np.full(n, lo)
    upper = np.full(n, hi)
    if key == "zdt4":
        lower[0], upper[0] = 0.0, 1.0
    return Problem(key, n, 2, lower, upper, func, front(n))


# --- problem-spec files ---------------------------------------------------

_SPEC_KEYS = {"name", "n_var", "n_obj", "lower", "upper", "builtin", "objectives", "front_file"}

_EXPR_FUNCS = {
    "sin": np.sin, "cos": np.cos, "tan": np.tan, "arctan": np.arctan,
    "exp": np.exp, "log": np.log, "sqrt": np.sqrt, "abs": np.abs,
    "sum": np.sum, "prod": np.prod, "mean": np.mean, "min": np.min, "max": np.max,
    "minimum": np.minimum, "maximum": np.maximum, "where": np.where,
}
_EXPR_CONSTS = {"pi": math.pi, "e": math.e}
_EXPR_NODES = (
    ast.Expression, ast.BinOp, ast.UnaryOp, ast.Call, ast.Name, ast.Load,
    ast.Constant, ast.Subscript, ast.Slice, ast.Tuple, ast.Compare,
    ast.operator, ast.unaryop, ast.cmpop,
)


def compile_expression(text, line=None):
    """Compile a restricted arithmetic expression of ``x`` (0-based) and ``n``."""
    try:
        tree = ast.parse(text.strip(), mode="eval")
    except SyntaxError as exc:
        raise ProblemFormatError(f"invalid expression {text.strip()!r}: {exc.msg}", line) from None
    allowed = set(_EXPR_FUNCS) | set(_EXPR_CONSTS) | {"x", "n"}
    for node in ast.walk(tree):
        if not isinstance(node, _EXPR_NODES):
            raise ProblemFormatError(
                f"disallowed syntax {type(node).__name__} in {text.strip()!r}", line
            )
        if isinstance(node, ast.Name) and node.id not in allowed:
            raise ProblemFormatError(f"unknown name {node.id!r} in {text.strip()!r}", line)
        if isinstance(node, ast.Call) and not (
            isinstance(node.func, ast.Name) and node.func.id in _EXPR_FUNCS
        ):
            raise ProblemFormatError(f"only builtin math calls allowed in {text.strip()!r}", line)
    code = compile(tree, "<objective>", "eval")
    scope = {"__builtins__": {}, **_EXPR_FUNCS, **_EXPR_CONSTS}

    def f(x):
        return float(eval(code, scope, {"x": x, "n": len(x)}))

    return f


def _parse_floats(text, line, what):
    parts = [p for p in re.split(r"[,\s]+", text.strip()) if p]
    try:
        vals = [float(p) for p in parts]
    except ValueError:
        raise ProblemFormatError(f"{what}: expected numbers, got {text.strip()!r}", line) from None
    if not vals or not all(math.isfinite(v) for v in vals):
        raise ProblemFormatError(f"{what}: expected finite numbers", line)
    return vals


def load_front(path, n_obj):
    """Read a reference front: one objective vector per line.

    Values are separated by commas and/or whitespace. Blank lines and lines
    starting with ``#`` are ignored.
    """
    rows = []
    with open(path) as fh:
        for lineno, raw in enumerate(fh, start=1):
            text = raw.strip()
            if not text or text.startswith("#"):
                continue
            vals = _parse_floats(text, lineno, "front row")
            if len(vals) != n_obj:
                raise ProblemFormatError(
                    f"front row has {len(vals)} values, expected {n_obj}", lineno
                )
            rows.append(vals)
    if not rows:
        raise ProblemFormatError(f"front file {path} contains no points")
    return np.array(rows, dtype=float)


def save_front(path, points, header=None):
    with open(path, "w") as fh:
        if header:
            for h in header.splitlines():
                fh.write(f"# {h}\n")
        for row in np.atleast_2d(points):
            fh.write(" ".join(repr(float(v)) for v in row) + "\n")


def load_problem(spec_path):
    """Build a :class:`Problem` from a key-value problem-spec file."""
    spec_path = Path(spec_path)
    entries = {}
    with open(spec_path) as fh:
        for lineno, raw in enumerate(fh, start=1):
            text = raw.split("#", 1)[0].strip()
            if not text:
                continue
            if "=" not in text:
                raise ProblemFormatError(f"expected 'key = value', got {text!r}", lineno)
            key, value = (s.strip() for s in text.split("=", 1))
            key = key.lower()
            if key not in _SPEC_KEYS:
                raise ProblemFormatError(f"unknown key {key!r}", lineno)
            if key in entries:
                raise ProblemFormatError(f"duplicate key {key!r}", lineno)
            entries[key] = (value, lineno)

    def get(key, default=None):
        return entries[key][0] if key in entries else default

    def lineof(key):
        return entries[key][1] if key in entries else None

    def as_int(key):
        try:
            return int(get(key))
        except ValueError:
            raise ProblemFormatError(f"{key} must be an integer", lineof(key)) from None

    if ("builtin" in entries) == ("objectives" in entries):
        raise ProblemFormatError("exactly one of 'builtin' or 'objectives' is required")

    def read_front(n_obj):
        if "front_file" not in entries:
            return None
        fpath = Path(get("front_file"))
        if not fpath.is_absolute():
            fpath = spec_path.parent / fpath
        return load_front(fpath, n_obj)

    if "builtin" in entries:
        for key in ("lower", "upper"):
            if key in entries:
                raise ProblemFormatError(f"{key!r} cannot be combined with a builtin", lineof(key))
        if "n_obj" in entries and as_int("n_obj") != 2:
            raise ProblemFormatError("builtin problems have n_obj = 2", lineof("n_obj"))
        n_var = as_int("n_var") if "n_var" in entries else None
        base = get_problem(get("builtin"), n_var)
        front = read_front(2)
        return Problem(
            get("name", base.name), base.n_var, base.n_obj,
            base.lower_bounds, base.upper_bounds, base.objective,
            base.true_front if front is None else front,
        )

    for key in ("name", "n_var", "n_obj", "lower", "upper"):
        if key not in entries:
            raise ProblemFormatError(f"missing required key {key!r}")
    n_var = as_int("n_var")
    n_obj = as_int("n_obj")
    if n_var < 1:
        raise ProblemFormatError("n_var must be positive", lineof("n_var"))
    lower = _parse_floats(get("lower"), lineof("lower"), "lower")
    upper = _parse_floats(get("upper"), lineof("upper"), "upper")
    if len(lower) == 1:
        lower = lower * n_var
    if len(upper) == 1:
        upper = upper * n_var
    if len(lower) != n_var or len(upper) != n_var:
        raise ProblemFormatError("lower/upper must list 1 or n_var values", lineof("lower"))
    exprs = [e for e in get("objectives").split(";") if e.strip()]
    if len(exprs) != n_obj:
        raise ProblemFormatError(
            f"{len(exprs)} objective expressions for n_obj={n_obj}", lineof("objectives")
        )
    funcs = [compile_expression(e, lineof("objectives")) for e in exprs]
    front = read_front(n_obj)

    def objective(X):
        return np.array([[f(x) for f in funcs] for x in X])

    return Problem(get("name"), n_var, n_obj, np.array(lower), np.array(upper), objective, front)
