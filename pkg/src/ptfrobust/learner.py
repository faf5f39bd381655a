"""Robust empirical risk minimization by cutting planes.

The classifier is sought as a coefficient vector in the monomial embedding
(quadratic terms for i <= j, then linear terms, then the constant), together
with one slack r_i per training point, subject to

    y_i g(x_i) >= r_i + kappa          (margin constraints, linear)
    r_i >= y_i (g(x_i) - g(x_i + z))   for all z in the delta ball,

the second family enforced approximately through the box-maximization attack
as a separation oracle at budget delta/gamma (gamma = 1 exactly for degree 1,
4*sqrt(log n) for degree 2). Two engines share the oracle: a Chebyshev-center
cutting-plane method (practical default; may batch several violated cuts per
round) and the classical central-cut ellipsoid method (reference; one cut per
round). Any returned classifier has zero kappa-margin robust empirical error
at delta/gamma, re-checkable with the exact oracles at desk scale.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.optimize import linprog

from . import boxmax
from .poly import LabeledSet, PtfClassifier, QuadPoly

SUCCESS = "success"
INFEASIBLE = "infeasible"
BUDGET_EXHAUSTED = "budget-exhausted"

KAPPA_RELATIVE = 1e-6


def coeff_dimension(degree: int, n: int) -> int:
    if degree == 1:
        return n + 1
    if degree == 2:
        return n * (n + 1) // 2 + n + 1
    raise ValueError("degree must be 1 or 2")


def embed(X: np.ndarray, degree: int) -> np.ndarray:
    """Monomial features: [x_i x_j for i<=j] + [x_i] + [1] per row."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    m, n = X.shape
    cols = []
    if degree == 2:
        for i in range(n):
            for j in range(i, n):
                cols.append(X[:, i] * X[:, j])
    cols.extend(X[:, i] for i in range(n))
    cols.append(np.ones(m))
    return np.stack(cols, axis=1)


def coeff_to_poly(w: np.ndarray, degree: int, n: int) -> QuadPoly:
    w = np.asarray(w, dtype=float).reshape(-1)
    if w.shape[0] != coeff_dimension(degree, n):
        raise ValueError("coefficient vector has the wrong dimension")
    A = np.zeros((n, n))
    pos = 0
    if degree == 2:
        for i in range(n):
            for j in range(i, n):
                if i == j:
                    A[i, i] = w[pos]
                else:
                    A[i, j] = A[j, i] = w[pos] / 2.0
                pos += 1
    b = w[pos:pos + n]
    c = w[pos + n]
    return QuadPoly(A, b, c)


def poly_to_coeff(g: QuadPoly, degree: int) -> np.ndarray:
    n = g.n
    parts = []
    if degree == 2:
        for i in range(n):
            for j in range(i, n):
                parts.append(g.A[i, i] if i == j else 2.0 * g.A[i, j])
    parts.extend(g.b)
    parts.append(g.c)
    return np.asarray(parts)


def sample_size(degree: int, n: int, epsilon: float, eta: float, c: float = 8.0) -> int:
    """Training-set size from the uniform-convergence bound: the VC dimension
    of degree-d thresholds in the monomial embedding is binom(n+d, d), and
    m = ceil(c (Delta + ln(1/eta)) / epsilon^2) with default c = 8."""
    if not (0 < epsilon < 1 and 0 < eta < 1):
        raise ValueError("epsilon and eta must lie in (0, 1)")
    delta_vc = math.comb(n + degree, degree)
    return math.ceil(c * (delta_vc + math.log(1.0 / eta)) / epsilon**2)


@dataclass(frozen=True)
class Cut:
    """Halfspace a.w <= b (violated by the emitting iterate), stored sparsely:
    a[cols] = vals, zero elsewhere."""

    cols: np.ndarray
    vals: np.ndarray
    b: float
    kind: str  # "margin" | "robust" | "norm"
    index: int

    def __post_init__(self):
        cols = np.asarray(self.cols, dtype=np.int64)
        vals = np.asarray(self.vals, dtype=float)
        cols.setflags(write=False)
        vals.setflags(write=False)
        object.__setattr__(self, "cols", cols)
        object.__setattr__(self, "vals", vals)

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.vals))

    def dot(self, w: np.ndarray) -> float:
        return float(w[self.cols] @ self.vals)

    def dense(self, dim: int) -> np.ndarray:
        a = np.zeros(dim)
        a[self.cols] = self.vals
        return a


@dataclass
class LearnerState:
    coeff: np.ndarray
    r: np.ndarray
    kappa: float
    iteration: int = 0
    localizer: object | None = None

    @property
    def w(self) -> np.ndarray:
        return np.concatenate([self.coeff, self.r])


@dataclass(frozen=True)
class LearnResult:
    f: PtfClassifier | None
    achieved_gamma: float
    train_robust_error_at_delta_over_gamma: float | None
    oracle_calls: int
    status: str
    iterations: int = 0
    transcript: list = field(default_factory=list, compare=False)


def _gamma_for(degree: int, n: int) -> float:
    if degree == 1 or n < 2:
        return 1.0
    return boxmax.ROUNDING_CAP_CONSTANT * math.sqrt(math.log(n))


class _Problem:
    """Shared data: embedding, scales, kappa, and the violation scan."""

    def __init__(self, S: LabeledSet, degree: int, delta: float, gamma: float,
                 eta_prime: float, seed: int):
        self.S = S
        self.degree = degree
        self.n = S.dim
        self.m = len(S)
        self.delta = delta
        self.gamma = gamma
        self.delta_oracle = delta / gamma
        self.eta_prime = eta_prime
        self.seed = seed
        self.D = coeff_dimension(degree, self.n)
        self.Dp = self.D + self.m
        self.Psi = embed(S.X, degree)
        self.psi_scale = float(np.max(np.linalg.norm(self.Psi, axis=1)))
        self.kappa = KAPPA_RELATIVE * (1.0 + self.psi_scale)
        self.r_bound = 1.0 + 2.0 * self._inflated_psi_scale()
        self.oracle_calls = 0
        self.skipped_points: list[tuple[int, int]] = []

    def _inflated_psi_scale(self) -> float:
        Xa = np.abs(self.S.X) + self.delta
        return float(np.max(np.linalg.norm(embed(Xa, self.degree), axis=1)))

    def margin_cut(self, i: int) -> Cut:
        # y_i <coeff, psi_i> - r_i >= kappa, i.e. -y_i psi_i . coeff + r_i <= -kappa
        cols = np.concatenate([np.arange(self.D), [self.D + i]])
        vals = np.concatenate([-self.S.y[i] * self.Psi[i], [1.0]])
        return Cut(cols, vals, -self.kappa, "margin", i)

    def robust_cut(self, i: int, z_hat: np.ndarray) -> Cut:
        # r_i >= y_i <coeff, psi(x_i) - psi(x_i + z)>
        psi_diff = self.Psi[i] - embed(self.S.X[i] + z_hat, self.degree)[0]
        return self._robust_cut_from_diff(i, psi_diff)

    def _robust_cut_from_diff(self, i: int, psi_diff: np.ndarray) -> Cut:
        cols = np.concatenate([np.arange(self.D), [self.D + i]])
        vals = np.concatenate([self.S.y[i] * psi_diff, [-1.0]])
        return Cut(cols, vals, 0.0, "robust", i)

    def norm_cut(self, coeff: np.ndarray) -> Cut:
        return Cut(np.arange(self.D), coeff / np.linalg.norm(coeff), 1.0, "norm", -1)

    def drop_poly(self, i: int, g: QuadPoly) -> QuadPoly:
        """y_i (g(x_i) - g(x_i + z)) as a polynomial in z (constant 0)."""
        y = float(self.S.y[i])
        return QuadPoly(-y * g.A, -y * g.gradient(self.S.X[i]), 0.0)

    def _maximize_drop(self, i: int, g: QuadPoly, iteration: int, attempt: int):
        h = self.drop_poly(i, g)
        self.oracle_calls += 1
        s = boxmax.derive_seed(self.seed, (iteration * self.m + i) * 4 + attempt)
        if self.degree == 1 or h.degree() <= 1:
            return boxmax.maximize_linear(h.b, h.c, self.delta_oracle)
        return boxmax.maximize_quadratic(h, self.delta_oracle, eta=self.eta_prime, seed=s)

    def scan(self, w: np.ndarray, iteration: int, first_only: bool) -> list[Cut]:
        """Violated constraints at w: margin constraints first (by index),
        then the robustness constraints through the box-maximization oracle.
        A failed or out-of-cap oracle call is retried once with a fresh seed
        and then skipped (the cut must stay valid for every robust point)."""
        coeff, r = w[: self.D], w[self.D:]
        cuts: list[Cut] = []
        margins = self.S.y * (self.Psi @ coeff)
        for i in np.flatnonzero(margins < r + self.kappa):
            cuts.append(self.margin_cut(int(i)))
            if first_only:
                return cuts
        g = coeff_to_poly(coeff, self.degree, self.n)
        if self.degree == 1 and g.degree() <= 1:
            return cuts + self._scan_robust_linear(g, r, first_only)
        for i in range(self.m):
            res = None
            for attempt in range(2):
                try:
                    cand = self._maximize_drop(i, g, iteration, attempt)
                except boxmax.SolverError:
                    continue
                if cand.linf <= self.delta * (1 + 1e-12):
                    res = cand
                    break
            if res is None:
                self.skipped_points.append((iteration, i))
                continue
            if res.value > r[i]:
                cuts.append(self.robust_cut(i, res.x_hat))
                if first_only:
                    return cuts
        return cuts

    def _scan_robust_linear(self, g: QuadPoly, r: np.ndarray, first_only: bool) -> list[Cut]:
        """Exact vectorized oracle for linear candidates: the ball drop is
        delta'*||b||_1 for every point, maximized at z = -y*delta'*sgn(b)."""
        self.oracle_calls += self.m
        drop = self.delta_oracle * float(np.sum(np.abs(g.b)))
        viol = np.flatnonzero(drop > r)
        if viol.size == 0:
            return []
        if first_only:
            viol = viol[:1]
        from .poly import sign_pm1

        z_dir = self.delta_oracle * sign_pm1(-g.b).astype(float)
        Z = np.where((self.S.y[viol] == 1)[:, None], z_dir[None, :], -z_dir[None, :])
        Psi_pert = embed(self.S.X[viol] + Z, self.degree)
        diffs = self.Psi[viol] - Psi_pert
        return [self._robust_cut_from_diff(int(i), diffs[k]) for k, i in enumerate(viol)]


def separation_oracle(
    state: LearnerState,
    S: LabeledSet,
    delta: float,
    gamma: float,
    eta_prime: float,
    seed: int,
    degree: int | None = None,
) -> Cut | None:
    """Single-cut oracle: the first violated margin constraint, else the first
    point whose delta/gamma-ball drop exceeds its slack, else None (feasible)."""
    if degree is None:
        degree = 2 if coeff_dimension(2, S.dim) == state.coeff.shape[0] else 1
    prob = _Problem(S, degree, delta, gamma, eta_prime, seed)
    prob.kappa = state.kappa
    cuts = prob.scan(state.w, state.iteration, first_only=True)
    return cuts[0] if cuts else None


class EllipsoidLocalizer:
    """Central-cut ellipsoid {w : (w-c)^T P^-1 (w-c) <= 1}; every cut shrinks
    the volume by the fixed factor exp(-1/(2(D+1))) or better."""

    def __init__(self, dim: int, radius: float):
        self.dim = dim
        self.center = np.zeros(dim)
        self.P = np.eye(dim) * radius**2
        self.logvol_drop = 0.0

    def cut(self, a: np.ndarray) -> None:
        Pa = self.P @ a
        denom = float(a @ Pa)
        if denom <= 0:
            raise boxmax.SolverError("ellipsoid degenerated (cut direction has no extent)")
        g = Pa / math.sqrt(denom)
        d = self.dim
        self.center = self.center - g / (d + 1)
        self.P = (d**2 / (d**2 - 1.0)) * (self.P - (2.0 / (d + 1)) * np.outer(g, g))
        self.P = (self.P + self.P.T) / 2.0
        self.logvol_drop += 0.5 * (
            d * math.log(d**2 / (d**2 - 1.0)) + math.log(1.0 - 2.0 / (d + 1))
        )


def _default_budget(Dp: int, m: int, kappa: float) -> int:
    return math.ceil(10.0 * Dp**2 * math.log(Dp * max(m, 2) / kappa))


def _train_robust_error(f: PtfClassifier, S: LabeledSet, delta_check: float,
                        kappa: float) -> float | None:
    """Exact robust empirical error at delta_check, counting flips with
    positive margin beyond the kappa tolerance (the strict-inequality reading
    of the constraints); None when no exact oracle applies."""
    from .poly import evaluate_many, negate_for_label, shift, sign_pm1

    preds = f.classify_many(S.X)
    if f.g.degree() <= 1:
        # flip-poly maximum is -y*g(x) + delta*||b||_1, identical structure per point
        flip_max = -S.y * evaluate_many(f.g, S.X) + delta_check * float(np.sum(np.abs(f.g.b)))
        bad = (preds != S.y) | (flip_max > kappa)
        return float(np.mean(bad))
    bad = 0
    for x, y in S:
        if f.classify(x) != y:
            bad += 1
            continue
        h = negate_for_label(shift(f.g, x), y)
        try:
            res = boxmax.exact_boxmax(h, delta_check)
        except ValueError:
            return None
        if res.value > kappa:
            bad += 1
    return bad / len(S)


def robust_learn(
    S: LabeledSet,
    degree: int,
    delta: float,
    epsilon: float = 0.1,
    eta: float = 0.05,
    seed: int = 0,
    budget: int | None = None,
    engine: str = "chebyshev",
    time_budget: float | None = None,
) -> LearnResult:
    """Learn a degree-1 or degree-2 threshold classifier with zero kappa-margin
    robust empirical error at delta/gamma, assuming realizability at delta.

    engine='chebyshev' (default) localizes with Chebyshev centers of the
    accumulated cuts and may add every violated cut found in a round;
    engine='ellipsoid' is the one-cut-per-round reference method. epsilon and
    eta enter through the oracle failure-probability split eta/(m*T) and are
    echoed into the transcript; epsilon itself is a property of the sample
    size, not of this optimization loop.
    """
    if degree not in (1, 2):
        raise ValueError("degree must be 1 or 2")
    if delta <= 0:
        raise ValueError("delta must be positive")
    gamma = _gamma_for(degree, S.dim)
    prob = _Problem(S, degree, delta, gamma, eta_prime=0.0, seed=seed)
    if budget is None:
        budget = _default_budget(prob.Dp, prob.m, prob.kappa)
    # failure-probability split over all potential oracle invocations
    prob.eta_prime = eta / (prob.m * max(budget, 1))
    start = time.monotonic()

    if engine == "chebyshev":
        result = _run_chebyshev(prob, budget, time_budget, start)
    elif engine == "ellipsoid":
        result = _run_ellipsoid(prob, budget, time_budget, start)
    else:
        raise ValueError(f"unknown engine {engine!r}")

    if result.status != SUCCESS or result.f is None:
        return result
    err = _train_robust_error(result.f, S, delta / gamma, prob.kappa)
    return LearnResult(result.f, gamma, err, prob.oracle_calls, SUCCESS,
                       result.iterations, result.transcript)


def _finish(prob: _Problem, w: np.ndarray, status: str, iters: int, transcript: list):
    if status != SUCCESS:
        return LearnResult(None, prob.gamma, None, prob.oracle_calls, status,
                           iters, transcript)
    g = coeff_to_poly(w[: prob.D], prob.degree, prob.n)
    return LearnResult(PtfClassifier(g), prob.gamma, None, prob.oracle_calls,
                       SUCCESS, iters, transcript)


def _run_chebyshev(prob: _Problem, budget: int, time_budget, start) -> LearnResult:
    Dp = prob.Dp
    bounds_lo = np.concatenate([-np.ones(prob.D), -prob.r_bound * np.ones(prob.m)])
    bounds_hi = -bounds_lo
    # sparse LP rows accumulated as flat coordinate lists
    row_cols: list[np.ndarray] = []
    row_vals: list[np.ndarray] = []
    row_norm: list[float] = []
    rhs: list[float] = []
    transcript: list[dict] = []
    w = np.zeros(Dp)
    rho_min = 1e-10 * prob.r_bound
    eye = sp.eye(Dp, format="csr")
    ones = sp.csr_matrix(np.ones((Dp, 1)))
    A_box = sp.vstack([sp.hstack([eye, ones]), sp.hstack([-eye, ones])], format="csr")
    c = np.zeros(Dp + 1)
    c[-1] = -1.0

    for it in range(budget):
        if time_budget is not None and time.monotonic() - start > time_budget:
            return _finish(prob, w, BUDGET_EXHAUSTED, it, transcript)
        coeff = w[: prob.D]
        nrm = np.linalg.norm(coeff)
        if nrm > 1.0:
            cuts = [prob.norm_cut(coeff)]
        else:
            cuts = prob.scan(w, it, first_only=False)
        if not cuts:
            return _finish(prob, w, SUCCESS, it, transcript)
        for cut in cuts:
            row_cols.append(cut.cols)
            row_vals.append(cut.vals)
            row_norm.append(cut.norm)
            rhs.append(cut.b)
        transcript.append({
            "iteration": it,
            "new_cuts": len(cuts),
            "kinds": sorted({c.kind for c in cuts}),
        })
        # Chebyshev center of all cuts within the variable box:
        # rows [a_k, ||a_k||] . [w, rho] <= b_k
        n_rows = len(rhs)
        counts = np.fromiter((len(c) for c in row_cols), int, n_rows)
        rows_idx = np.repeat(np.arange(n_rows), counts)
        cols_idx = np.concatenate(row_cols)
        vals = np.concatenate(row_vals)
        A_cuts = sp.coo_matrix(
            (np.concatenate([vals, row_norm]),
             (np.concatenate([rows_idx, np.arange(n_rows)]),
              np.concatenate([cols_idx, np.full(n_rows, Dp)]))),
            shape=(n_rows, Dp + 1),
        ).tocsr()
        A_full = sp.vstack([A_cuts, A_box], format="csr")
        b_full = np.concatenate([np.asarray(rhs), bounds_hi, -bounds_lo])
        lp = linprog(c, A_ub=A_full, b_ub=b_full,
                     bounds=[(None, None)] * Dp + [(0.0, None)], method="highs")
        if not lp.success or lp.x is None:
            return _finish(prob, w, INFEASIBLE, it + 1, transcript)
        rho = lp.x[-1]
        transcript[-1]["chebyshev_radius"] = float(rho)
        if rho <= rho_min:
            return _finish(prob, w, INFEASIBLE, it + 1, transcript)
        w = lp.x[:-1]
    return _finish(prob, w, BUDGET_EXHAUSTED, budget, transcript)


def _run_ellipsoid(prob: _Problem, budget: int, time_budget, start) -> LearnResult:
    Dp = prob.Dp
    radius = math.sqrt(1.0 + prob.m * prob.r_bound**2)
    ell = EllipsoidLocalizer(Dp, radius)
    transcript: list[dict] = []
    # stop when the volume shrank as if the average radius fell below 1e-9 R
    logvol_floor = Dp * math.log(1e-9)

    for it in range(budget):
        if time_budget is not None and time.monotonic() - start > time_budget:
            return _finish(prob, ell.center, BUDGET_EXHAUSTED, it, transcript)
        w = ell.center
        coeff = w[: prob.D]
        nrm = np.linalg.norm(coeff)
        if nrm > 1.0:
            cut = prob.norm_cut(coeff)
        else:
            cuts = prob.scan(w, it, first_only=True)
            if not cuts:
                return _finish(prob, w, SUCCESS, it, transcript)
            cut = cuts[0]
        ell.cut(cut.dense(Dp))
        transcript.append({
            "iteration": it,
            "kind": cut.kind,
            "index": cut.index,
            "logvol_drop": ell.logvol_drop,
        })
        if ell.logvol_drop < logvol_floor:
            return _finish(prob, ell.center, INFEASIBLE, it + 1, transcript)
    return _finish(prob, ell.center, BUDGET_EXHAUSTED, budget, transcript)
