"""Maximization of degree-<=2 polynomials over l-inf balls.

Linear forms are maximized exactly in closed form. Quadratics go through a
semidefinite relaxation solved by block-coordinate ascent on a low-rank vector
factorization, followed by Gaussian randomized rounding; the rounded point may
leave the delta ball by an O(sqrt(log n)) factor but never loses objective
value relative to the ball maximum (with the configured success probability).
Brute-force oracles (vertex / grid / first-order pattern enumeration) provide
independent ground truth at small n.
"""
from __future__ import annotations

import json
import math
import sys
from dataclasses import dataclass, field

import numpy as np

from .poly import QuadPoly, evaluate, evaluate_many, sign_pm1

# Gaussian-rounding blowup constant: the l-inf guarantee is C*sqrt(log n)*delta.
ROUNDING_CAP_CONSTANT = 4.0
# Trials per unit of ln(1/eta) in the repeated-rounding schedule.
TRIALS_PER_LOG = 8


class SolverError(RuntimeError):
    """Raised when the SDP coordinate ascent fails to converge.

    Carries the best iterate found so far for post-mortem inspection.
    """

    def __init__(self, message, best=None, residual=None):
        super().__init__(message)
        self.best = best
        self.residual = residual


def make_stream(seed: int, namespace: int = 0) -> np.random.Generator:
    """Counter-based Philox stream keyed by (seed, namespace).

    Draws are reproducible across platforms; batch draws are prefix-stable, so
    row k of a batch depends only on (seed, namespace, shape[1:], k).
    """
    key = [np.uint64(seed & 0xFFFFFFFFFFFFFFFF), np.uint64(namespace & 0xFFFFFFFFFFFFFFFF)]
    return np.random.Generator(np.random.Philox(key=key))


def derive_seed(seed: int, index: int) -> int:
    """Stable per-example sub-seed for batch work split across workers."""
    return int(make_stream(seed, namespace=0x5EED ^ index).integers(0, 2**63 - 1))


def objective_scale(g: QuadPoly, delta: float) -> float:
    """Additive-error scale for tolerances: max(1, |A|max n d^2, |b|max n d, |c|)."""
    n = g.n
    a_max = float(np.max(np.abs(g.A))) if g.A.size else 0.0
    b_max = float(np.max(np.abs(g.b))) if g.b.size else 0.0
    return max(1.0, a_max * n * delta**2, b_max * n * delta, abs(g.c))


@dataclass(frozen=True)
class BoxMaxResult:
    """A candidate maximizer with honest l-inf accounting (never clipped)."""

    x_hat: np.ndarray
    value: float
    linf: float
    blowup: float
    trials_used: int
    sdp_value: float | None = None
    within_cap: bool = True

    def __post_init__(self):
        x = np.asarray(self.x_hat, dtype=float).reshape(-1)
        x.setflags(write=False)
        object.__setattr__(self, "x_hat", x)


def _result(g: QuadPoly, x_hat: np.ndarray, delta: float, trials: int,
            sdp_value: float | None = None, within_cap: bool = True) -> BoxMaxResult:
    x_hat = np.asarray(x_hat, dtype=float).reshape(-1)
    linf = float(np.max(np.abs(x_hat))) if x_hat.size else 0.0
    if delta > 0:
        blowup = linf / delta
    else:
        blowup = 1.0 if linf == 0.0 else math.inf
    return BoxMaxResult(x_hat, evaluate(g, x_hat), linf, blowup, trials,
                        sdp_value=sdp_value, within_cap=within_cap)


def maximize_linear(b, c: float, delta: float) -> BoxMaxResult:
    """Exact maximum of b^T x + c over the l-inf ball: x_i = delta*sgn(b_i)."""
    if delta < 0:
        raise ValueError("delta must be nonnegative")
    b = np.asarray(b, dtype=float).reshape(-1)
    x_hat = delta * sign_pm1(b).astype(float)
    g = QuadPoly.linear(b, c)
    return _result(g, x_hat, delta, trials=0)


@dataclass(frozen=True)
class SdpInstance:
    """The vector program max sum A_ij <u_i,u_j> + sum b_i <u_i,u_0> + c
    subject to ||u_i||^2 <= delta^2 and ||u_0||^2 = 1."""

    g: QuadPoly
    delta: float

    @property
    def n(self) -> int:
        return self.g.n


def build_sdp(g: QuadPoly, delta: float) -> SdpInstance:
    if delta <= 0:
        raise ValueError("delta must be positive")
    return SdpInstance(g, float(delta))


@dataclass(frozen=True)
class SdpSolution:
    """Factorized solution; row 0 of U is u_0, rows 1..n are u_1..u_n."""

    U: np.ndarray
    objective: float
    feasibility: float
    delta: float

    def __post_init__(self):
        U = np.asarray(self.U, dtype=float)
        U.setflags(write=False)
        object.__setattr__(self, "U", U)

    @property
    def u0(self) -> np.ndarray:
        return self.U[0]

    @property
    def rank(self) -> int:
        return self.U.shape[1]

    def gram_with_u0(self) -> np.ndarray:
        """<u_i, u_0> for i = 1..n (the 'mean' part of the rounding)."""
        return self.U[1:] @ self.U[0]

    def orthogonal_parts(self) -> np.ndarray:
        """u_i minus its component along u_0, rows i = 1..n."""
        t = self.gram_with_u0()
        return self.U[1:] - np.outer(t, self.U[0])


def _recompute_objective(g: QuadPoly, U: np.ndarray) -> float:
    V = U[1:]
    return float(np.sum(g.A * (V @ V.T)) + g.b @ (V @ U[0]) + g.c)


def _feasibility_residual(U: np.ndarray, delta: float) -> float:
    norms2 = np.sum(U * U, axis=1)
    return max(abs(norms2[0] - 1.0), float(np.max(np.maximum(norms2[1:] - delta**2, 0.0), initial=0.0)))


def _greedy_box_point(g: QuadPoly, delta: float, sweeps: int = 8) -> np.ndarray:
    """Cheap primal warm start: exact coordinate ascent on the box itself."""
    n = g.n
    x = delta * sign_pm1(g.b).astype(float)
    for _ in range(sweeps):
        moved = False
        for i in range(n):
            a = g.A[i, i]
            lin = 2.0 * (g.A[i] @ x - a * x[i]) + g.b[i]
            # maximize a*t^2 + lin*t over [-delta, delta]
            cands = [-delta, delta]
            if a < 0:
                t_int = -lin / (2.0 * a)
                if -delta < t_int < delta:
                    cands.append(t_int)
            vals = [a * t * t + lin * t for t in cands]
            t_best = cands[int(np.argmax(vals))]
            if t_best != x[i]:
                x[i] = t_best
                moved = True
        if not moved:
            break
    return x


def solve_sdp(
    instance: SdpInstance,
    tol: float = 1e-10,
    max_iters: int = 4000,
    seed: int = 0,
    restarts: int = 3,
    verbose: bool = False,
    log_stream=None,
) -> SdpSolution:
    """Block-coordinate ascent on the factorized vectors, rank n + 2.

    Each u_i subproblem (maximize A_ii ||u||^2 + <l_i, u> over ||u|| <= delta)
    has a closed-form solution; the u_0 step normalizes its linear coefficient
    to the unit sphere. Restart 0 embeds a greedy primal point (a feasible
    rank-1 warm start), the rest are random. Raises SolverError if no restart
    meets the tolerance within max_iters sweeps.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    g, delta = instance.g, instance.delta
    n = g.n
    d = n + 2
    log = log_stream if log_stream is not None else sys.stderr

    best_U, best_obj = None, -math.inf
    best_conv_U, best_conv_obj = None, -math.inf
    for r in range(max(1, restarts)):
        rng = make_stream(seed, namespace=0x100 + r)
        if r == 0:
            # greedy primal warm start, plus a small off-u0 component so the
            # ascent can grow orthogonal parts (rank-1 iterates are invariant)
            U = 0.05 * delta * rng.standard_normal((n + 1, d))
            U[0] = 0.0
            U[0, 0] = 1.0
            U[1:, 0] = _greedy_box_point(g, delta)
            norms = np.linalg.norm(U[1:], axis=1, keepdims=True)
            U[1:] *= np.minimum(1.0, delta / np.maximum(norms, 1e-300))
        else:
            U = rng.standard_normal((n + 1, d))
            U[0] /= np.linalg.norm(U[0])
            norms = np.linalg.norm(U[1:], axis=1, keepdims=True)
            U[1:] *= delta * rng.uniform(0.2, 1.0, size=(n, 1)) / np.maximum(norms, 1e-300)

        obj = _recompute_objective(g, U)
        converged = False
        for sweep in range(max_iters):
            # u_0 step: linear coefficient is sum_i b_i u_i
            l0 = U[1:].T @ g.b
            nl0 = np.linalg.norm(l0)
            if nl0 > 0:
                U[0] = l0 / nl0
            for i in range(n):
                a = g.A[i, i]
                li = 2.0 * (g.A[i] @ U[1:] - a * U[i + 1]) + g.b[i] * U[0]
                nl = np.linalg.norm(li)
                if nl == 0.0:
                    if a <= 0:
                        U[i + 1] = 0.0
                    elif np.linalg.norm(U[i + 1]) > 0:
                        U[i + 1] *= delta / np.linalg.norm(U[i + 1])
                    else:
                        U[i + 1] = 0.0
                        U[i + 1, (i + 1) % d] = delta
                    continue
                if a >= 0:
                    s = delta
                else:
                    s = min(delta, nl / (2.0 * abs(a)))
                U[i + 1] = (s / nl) * li
            new_obj = _recompute_objective(g, U)
            gain = new_obj - obj
            obj = new_obj
            if verbose and sweep % 50 == 0:
                print(json.dumps({"restart": r, "sweep": sweep, "objective": obj,
                                  "residual": _feasibility_residual(U, delta)}), file=log)
            if gain <= tol * max(1.0, abs(obj)) and _feasibility_residual(U, delta) <= tol:
                converged = True
                break
        if obj > best_obj:
            best_obj, best_U = obj, U.copy()
        if converged and obj > best_conv_obj:
            best_conv_obj, best_conv_U = obj, U.copy()

    if best_conv_U is None:
        residual = _feasibility_residual(best_U, delta)
        raise SolverError(
            f"coordinate ascent did not converge within {max_iters} sweeps",
            best=SdpSolution(best_U, best_obj, residual, delta),
            residual=residual,
        )
    return SdpSolution(best_conv_U, best_conv_obj, _feasibility_residual(best_conv_U, delta), delta)


def gaussian_round(
    sol: SdpSolution,
    g: QuadPoly,
    trials: int,
    seed: int = 0,
    linf_cap: float | None = None,
) -> BoxMaxResult:
    """Rounding x_hat_i = <u_i,u_0> + <u_i-perp, zeta>, zeta standard Gaussian.

    Returns the best trial by value; with linf_cap set, the best trial among
    those with ||x_hat||_inf <= cap (falling back to the unconstrained best,
    flagged via within_cap=False, if no trial lands inside).
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    t = sol.gram_with_u0()
    Uperp = sol.orthogonal_parts()
    if not np.any(Uperp):
        x_hat = t  # degenerate (rank-1) solution rounds deterministically
        return _result(g, x_hat, sol.delta, trials, sdp_value=sol.objective)
    Z = make_stream(seed, namespace=0x200).standard_normal((trials, sol.rank))
    X = t[None, :] + Z @ Uperp.T
    vals = evaluate_many(g, X)
    k_all = int(np.argmax(vals))
    if linf_cap is not None:
        ok = np.max(np.abs(X), axis=1) <= linf_cap
        if np.any(ok):
            idx = np.flatnonzero(ok)
            k = idx[int(np.argmax(vals[idx]))]
            return _result(g, X[k], sol.delta, trials, sdp_value=sol.objective)
        return _result(g, X[k_all], sol.delta, trials, sdp_value=sol.objective,
                       within_cap=False)
    return _result(g, X[k_all], sol.delta, trials, sdp_value=sol.objective)


def rounding_cap(n: int, delta: float, constant: float = ROUNDING_CAP_CONSTANT) -> float | None:
    """l-inf cap C*sqrt(log n)*delta; degenerate (None) for n < 2."""
    if n < 2:
        return None
    return constant * math.sqrt(math.log(n)) * delta


def default_trials(eta: float) -> int:
    return max(1, math.ceil(TRIALS_PER_LOG * math.log(1.0 / eta)))


def maximize_quadratic(
    g: QuadPoly,
    delta: float,
    eta: float = 0.01,
    seed: int = 0,
    trials: int | None = None,
    tol: float = 1e-10,
    enforce_cap: bool = True,
) -> BoxMaxResult:
    """SDP relaxation + Gaussian rounding with trials = ceil(8*ln(1/eta)).

    Degree-1 inputs short-circuit to the exact linear rule (blowup 1). The
    returned value dominates the ball maximum with probability >= 1 - eta;
    the perturbation itself may have l-inf norm up to 4*sqrt(log n)*delta.
    A negative sdp_value is a certificate that the ball maximum is negative.
    """
    if not 0 < eta < 1:
        raise ValueError("eta must be in (0, 1)")
    if g.degree() <= 1:
        return maximize_linear(g.b, g.c, delta)
    if trials is None:
        trials = default_trials(eta)
    sol = solve_sdp(build_sdp(g, delta), tol=tol, seed=seed)
    cap = rounding_cap(g.n, delta) if enforce_cap else None
    return gaussian_round(sol, g, trials, seed=seed, linf_cap=cap)


# ---------------------------------------------------------------------------
# Brute-force oracles (test fixtures; exact ground truth at small n).
# ---------------------------------------------------------------------------

_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


def _golden_section_max(f, lo: float, hi: float, iters: int = 60) -> float:
    a, b = lo, hi
    c = b - _GOLDEN * (b - a)
    d = a + _GOLDEN * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(iters):
        if fc > fd:
            b, d, fd = d, c, fc
            c = b - _GOLDEN * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + _GOLDEN * (b - a)
            fd = f(d)
    xs = [a, b, c, d]
    return xs[int(np.argmax([f(x) for x in xs]))]


def _vertex_boxmax(g: QuadPoly, delta: float) -> np.ndarray:
    n = g.n
    best_val, best_x = -math.inf, None
    chunk = 1 << min(n, 16)
    total = 1 << n
    for start in range(0, total, chunk):
        idx = np.arange(start, min(start + chunk, total), dtype=np.int64)
        bits = ((idx[:, None] >> np.arange(n)[None, :]) & 1).astype(float)
        X = delta * (2.0 * bits - 1.0)
        vals = evaluate_many(g, X)
        k = int(np.argmax(vals))
        if vals[k] > best_val:
            best_val, best_x = float(vals[k]), X[k].copy()
    return best_x


def _grid_boxmax(g: QuadPoly, delta: float, grid_points: int) -> np.ndarray:
    n = g.n
    if grid_points < 2:
        raise ValueError("grid_points must be >= 2")
    if grid_points**n > (1 << 26):
        raise ValueError(f"grid of {grid_points}^{n} points exceeds the evaluation budget")
    axis = np.linspace(-delta, delta, grid_points)
    best_val, best_x = -math.inf, None
    if n == 1:
        vals = g.A[0, 0] * axis**2 + g.b[0] * axis + g.c
        k = int(np.argmax(vals))
        best_val, best_x = float(vals[k]), np.array([axis[k]])
    else:
        # slab over x_1: only the linear part of the sub-problem depends on it
        mesh = np.meshgrid(*([axis] * (n - 1)), indexing="ij")
        sub = np.stack([m.ravel() for m in mesh], axis=1)
        quad_sub = np.einsum("mi,ij,mj->m", sub, g.A[1:, 1:], sub)
        for t in axis:
            b_sub = g.b[1:] + 2.0 * g.A[0, 1:] * t
            c_sub = g.c + g.b[0] * t + g.A[0, 0] * t * t
            vals = quad_sub + sub @ b_sub + c_sub
            k = int(np.argmax(vals))
            if vals[k] > best_val:
                best_val = float(vals[k])
                best_x = np.concatenate(([t], sub[k]))
    # one coordinate-wise golden-section pass around the best grid cell
    h = 2.0 * delta / (grid_points - 1)
    x = best_x.copy()
    for i in range(n):
        lo, hi = max(-delta, x[i] - h), min(delta, x[i] + h)

        def f(t, i=i):
            xt = x.copy()
            xt[i] = t
            return evaluate(g, xt)

        x[i] = _golden_section_max(f, lo, hi)
    if evaluate(g, x) < best_val:
        x = best_x
    return x


def _active_set_boxmax(g: QuadPoly, delta: float) -> np.ndarray:
    """Exact maximum via first-order conditions: every box maximum has each
    coordinate either at +-delta or with vanishing partial derivative, so
    enumerating the 3^n bound/free patterns and solving the stationary system
    on the free coordinates covers the optimum."""
    n = g.n
    if n > 8:
        raise ValueError("pattern enumeration limited to n <= 8")
    best_val, best_x = -math.inf, None
    for code in range(3**n):
        pattern, rem = [], code
        for _ in range(n):
            pattern.append(rem % 3)
            rem //= 3
        pattern = np.asarray(pattern)  # 0: -delta, 1: +delta, 2: free
        free = np.flatnonzero(pattern == 2)
        x = np.where(pattern == 1, delta, -delta).astype(float)
        if free.size:
            bound = np.flatnonzero(pattern != 2)
            Aff = g.A[np.ix_(free, free)]
            rhs = -(g.b[free] + 2.0 * g.A[np.ix_(free, bound)] @ x[bound]) / 2.0
            xf, _, _, _ = np.linalg.lstsq(Aff, rhs, rcond=None)
            if np.max(np.abs(Aff @ xf - rhs)) > 1e-9 * max(1.0, np.max(np.abs(rhs))):
                continue  # inconsistent stationarity: no interior candidate here
            if np.max(np.abs(xf)) > delta * (1 + 1e-12):
                continue
            x[free] = np.clip(xf, -delta, delta)
        val = evaluate(g, x)
        if val > best_val:
            best_val, best_x = val, x
    return best_x


def brute_force_boxmax(
    g: QuadPoly,
    delta: float,
    mode: str = "vertex",
    grid_points: int = 401,
) -> BoxMaxResult:
    """Exhaustive ball maximization used as a verification oracle.

    vertex: all 2^n corners (valid only for zero-diagonal A, where the
    objective is multilinear and the box maximum sits at a vertex); n <= 24.
    grid: uniform grid plus one coordinate-wise golden-section refinement.
    active: exact 3^n first-order pattern enumeration, n <= 8.
    """
    if delta < 0:
        raise ValueError("delta must be nonnegative")
    n = g.n
    if mode == "vertex":
        if np.any(np.diag(g.A) != 0.0):
            raise ValueError("vertex mode requires zero diagonal on A")
        if n > 24:
            raise ValueError("vertex mode limited to n <= 24")
        x = _vertex_boxmax(g, delta)
    elif mode == "grid":
        if n > 6:
            raise ValueError("grid mode limited to n <= 6")
        x = _grid_boxmax(g, delta, grid_points)
    elif mode == "active":
        x = _active_set_boxmax(g, delta)
    else:
        raise ValueError(f"unknown mode {mode!r}")
    return _result(g, x, delta, trials=0)


def exact_boxmax(g: QuadPoly, delta: float, grid_points: int = 401) -> BoxMaxResult:
    """Best available exact oracle: closed form for degree <= 1, vertex
    enumeration for multilinear quadratics, pattern enumeration otherwise."""
    if g.degree() <= 1:
        return maximize_linear(g.b, g.c, delta)
    if not np.any(np.diag(g.A)) and g.n <= 24:
        return brute_force_boxmax(g, delta, mode="vertex")
    if g.n <= 8:
        return brute_force_boxmax(g, delta, mode="active")
    raise ValueError(f"no exact oracle for n = {g.n}")


def exact_box_oracle():
    """Exact ball-maximization oracle (small n only); with this oracle
    robust_empirical_error is the true empirical robust error."""
    return exact_boxmax


def sdp_box_oracle(eta: float = 0.01, seed: int = 0):
    """Relaxation-based oracle; robust_empirical_error computed with it
    over-estimates the true delta-error, since flips may be found anywhere
    within the gamma*delta ball."""

    def oracle(g: QuadPoly, delta: float) -> BoxMaxResult:
        return maximize_quadratic(g, delta, eta=eta, seed=seed)

    return oracle
