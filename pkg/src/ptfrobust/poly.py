"""Degree-<=2 polynomials, threshold classifiers, and labeled point sets.

The sign convention everywhere is sgn(t) = +1 for t >= 0 and -1 otherwise.
Classifiers are sgn(g(x)) for g(x) = x^T A x + b^T x + c with A symmetric.
"""
from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np


def sign_pm1(t):
    """Sign with sgn(0) = +1, elementwise for arrays."""
    return np.where(np.asarray(t) >= 0, 1, -1)


class DimensionMismatch(ValueError):
    pass


class UnsupportedDegree(ValueError):
    pass


def _as_vector(x, n: int, what: str) -> np.ndarray:
    x = np.asarray(x, dtype=float).reshape(-1)
    if x.shape[0] != n:
        raise DimensionMismatch(f"{what} has dimension {x.shape[0]}, expected {n}")
    return x


@dataclass(frozen=True)
class QuadPoly:
    """g(x) = x^T A x + b^T x + c with A stored exactly symmetric.

    A is symmetrized via (A + A^T)/2 at construction so that the gradient
    2 A x + b is exact.
    """

    A: np.ndarray
    b: np.ndarray
    c: float

    def __post_init__(self):
        A = np.atleast_2d(np.asarray(self.A, dtype=float))
        if A.shape[0] != A.shape[1]:
            raise ValueError(f"A must be square, got {A.shape}")
        A = (A + A.T) / 2.0
        b = np.asarray(self.b, dtype=float).reshape(-1)
        if b.shape[0] != A.shape[0]:
            raise DimensionMismatch(
                f"b has dimension {b.shape[0]}, A is {A.shape[0]}x{A.shape[1]}"
            )
        A.setflags(write=False)
        b.setflags(write=False)
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "c", float(self.c))

    @property
    def n(self) -> int:
        return self.A.shape[0]

    def degree(self) -> int:
        if np.any(self.A != 0.0):
            return 2
        if np.any(self.b != 0.0):
            return 1
        return 0

    def __call__(self, x) -> float:
        return evaluate(self, x)

    def gradient(self, x) -> np.ndarray:
        x = _as_vector(x, self.n, "x")
        return 2.0 * (self.A @ x) + self.b

    def scale(self, s: float) -> "QuadPoly":
        return QuadPoly(s * self.A, s * self.b, s * self.c)

    @classmethod
    def linear(cls, b, c: float = 0.0) -> "QuadPoly":
        b = np.asarray(b, dtype=float).reshape(-1)
        return cls(np.zeros((b.shape[0], b.shape[0])), b, c)

    @classmethod
    def constant(cls, c: float, n: int = 1) -> "QuadPoly":
        return cls(np.zeros((n, n)), np.zeros(n), c)

    def to_dict(self) -> dict:
        return {"n": self.n, "A": self.A.tolist(), "b": self.b.tolist(), "c": self.c}

    @classmethod
    def from_dict(cls, d: dict) -> "QuadPoly":
        g = cls(np.asarray(d["A"], dtype=float), np.asarray(d["b"], dtype=float), float(d["c"]))
        if "n" in d and int(d["n"]) != g.n:
            raise DimensionMismatch(f"declared n={d['n']} but A is {g.n}x{g.n}")
        return g

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, s: str) -> "QuadPoly":
        return cls.from_dict(json.loads(s))


def evaluate(g: QuadPoly, x) -> float:
    """x^T A x + b^T x + c."""
    x = _as_vector(x, g.n, "x")
    return float(x @ (g.A @ x) + g.b @ x + g.c)


def evaluate_many(g: QuadPoly, X: np.ndarray) -> np.ndarray:
    """Evaluate g at each row of X (m x n)."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if X.shape[1] != g.n:
        raise DimensionMismatch(f"points have dimension {X.shape[1]}, expected {g.n}")
    return np.einsum("mi,ij,mj->m", X, g.A, X) + X @ g.b + g.c


def shift(g: QuadPoly, x0) -> QuadPoly:
    """h with h(z) = g(x0 + z): coefficients (A, 2 A x0 + b, g(x0))."""
    x0 = _as_vector(x0, g.n, "x0")
    return QuadPoly(g.A, 2.0 * (g.A @ x0) + g.b, evaluate(g, x0))


def negate_for_label(g: QuadPoly, y: int) -> QuadPoly:
    """-y * g, the polynomial whose positivity witnesses a flip away from label y."""
    if y not in (-1, 1):
        raise ValueError(f"label must be +-1, got {y}")
    return g.scale(-float(y))


@dataclass(frozen=True)
class PtfClassifier:
    """sgn(g(x)) with sgn(0) = +1; degree tag is 1 or 2 (constants count as 1)."""

    g: QuadPoly

    @property
    def degree(self) -> int:
        return max(1, self.g.degree())

    @property
    def n(self) -> int:
        return self.g.n

    def classify(self, x) -> int:
        return int(sign_pm1(evaluate(self.g, x)))

    def classify_many(self, X) -> np.ndarray:
        return sign_pm1(evaluate_many(self.g, X))

    def to_dict(self) -> dict:
        return self.g.to_dict()

    @classmethod
    def from_dict(cls, d: dict) -> "PtfClassifier":
        return cls(QuadPoly.from_dict(d))


@dataclass(frozen=True)
class LabeledSet:
    """Points in R^n with +-1 labels and an optional l-inf budget delta."""

    X: np.ndarray
    y: np.ndarray
    delta: float | None = None
    provenance: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        X = np.atleast_2d(np.asarray(self.X, dtype=float))
        y = np.asarray(self.y, dtype=int).reshape(-1)
        if X.shape[0] != y.shape[0]:
            raise DimensionMismatch(f"{X.shape[0]} points but {y.shape[0]} labels")
        if not np.all(np.isin(y, (-1, 1))):
            raise ValueError("labels must be in {-1, +1}")
        if self.delta is not None and self.delta < 0:
            raise ValueError("delta must be nonnegative")
        X.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)

    @property
    def dim(self) -> int:
        return self.X.shape[1]

    def __len__(self) -> int:
        return self.X.shape[0]

    def __iter__(self):
        return ((self.X[i], int(self.y[i])) for i in range(len(self)))

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow([f"x_{j + 1}" for j in range(self.dim)] + ["label"])
        for i in range(len(self)):
            w.writerow([repr(float(v)) for v in self.X[i]] + [int(self.y[i])])
        return buf.getvalue()

    def save_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            fh.write(self.to_csv())

    @classmethod
    def from_csv(cls, text: str, delta: float | None = None) -> "LabeledSet":
        rows = list(csv.reader(io.StringIO(text)))
        if not rows:
            raise ValueError("empty CSV")
        header = rows[0]
        if header[-1] != "label" or not all(h.startswith("x_") for h in header[:-1]):
            raise ValueError("CSV header must be x_1,...,x_n,label")
        n = len(header) - 1
        X, y = [], []
        for k, row in enumerate(rows[1:], start=2):
            if not row:
                continue
            if len(row) != n + 1:
                raise ValueError(f"row {k} has {len(row)} fields, expected {n + 1}")
            X.append([float(v) for v in row[:-1]])
            lab = float(row[-1])
            if lab not in (-1.0, 1.0):
                raise ValueError(f"row {k}: label must be -1 or 1, got {row[-1]}")
            y.append(int(lab))
        if not X:
            raise ValueError("CSV contains no data rows")
        return cls(np.asarray(X), np.asarray(y), delta=delta)

    @classmethod
    def load_csv(cls, path, delta: float | None = None) -> "LabeledSet":
        with open(path, newline="") as fh:
            return cls.from_csv(fh.read(), delta=delta)


def flips_label(flip_max: float, y: int) -> bool:
    """Whether a maximum value `flip_max` of -y*g over the ball witnesses a flip.

    sgn(0) = +1 makes the predicate asymmetric: for y = -1 a perturbation
    reaching g = 0 already flips, so the boundary value 0 counts.
    """
    return flip_max > 0 or (flip_max == 0 and y == -1)


# An oracle maps (flip polynomial, delta) to an object with a .value attribute
# holding (an approximation of) max over the l-inf ball; see boxmax.
BoxOracle = Callable[[QuadPoly, float], "object"]


def robust_empirical_error(
    f: PtfClassifier,
    S: LabeledSet,
    delta: float,
    oracle: BoxOracle,
    mode: str = "label",
) -> float:
    """Fraction of points of S admitting a flip within the l-inf ball of delta.

    mode='label' tests sgn(g(x+z)) != y; mode='model' tests against sgn(g(x)).
    With an exact oracle this is the empirical delta-robust error; with the SDP
    oracle it over-estimates (perturbations may only be found within gamma*delta).
    At delta = 0 it reduces to the plain misclassification rate.
    """
    if delta < 0:
        raise ValueError("delta must be nonnegative")
    if S.dim != f.n:
        raise DimensionMismatch(f"data dim {S.dim} != classifier dim {f.n}")
    if mode not in ("label", "model"):
        raise ValueError(f"mode must be 'label' or 'model', got {mode!r}")
    bad = 0
    for x, y in S:
        y_ref = y if mode == "label" else f.classify(x)
        if mode == "label" and f.classify(x) != y:
            bad += 1  # already misclassified: z = 0 works
            continue
        h = negate_for_label(shift(f.g, x), y_ref)
        res = oracle(h, delta)
        if flips_label(float(res.value), y_ref):
            bad += 1
    return bad / len(S)
