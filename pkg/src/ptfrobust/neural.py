"""Adversarial attacks and certificates for 2-layer ReLU classifiers.

A net x -> V sigma(W x) (+ optional shared linear term) is reduced, per
example, to the mixed problem

    max_{|z|_inf <= delta}  ||c2 + A z||_1 + c1^T z - ||beta + B z||_1 + c0

whose value is max over the ball of -l(x*) f(x*+z): positive iff an
adversarial example exists within delta. The SDP relaxation of this problem
is solved by coordinate ascent (with the absolute values smoothed and
annealed), then rounded with asymmetric Gaussian scalings: perturbation
coordinates get 1/eps times the orthogonal noise while the auxiliary sign
variables get eps times, keeping the latter essentially feasible. A PGD
baseline and the multiclass second-best targeting rule round out the toolbox.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linprog

from . import boxmax
from .attack import CERTIFIED, FOUND, UNKNOWN, AttackOutcome
from .poly import flips_label, sign_pm1


class AmbiguousLabel(ValueError):
    """f(x*) = 0: the attack needs a definite side to flip from."""


@dataclass(frozen=True)
class TwoLayerNet:
    """Weights W (k x n), per-class output rows V (C x k), optional shared
    direct term v_prime (cancels in class differences; it only matters for
    single-output nets, where row 0 of V is the binary margin)."""

    W: np.ndarray
    V: np.ndarray
    v_prime: np.ndarray | None = None

    def __post_init__(self):
        W = np.atleast_2d(np.asarray(self.W, dtype=float))
        V = np.atleast_2d(np.asarray(self.V, dtype=float))
        if V.shape[1] != W.shape[0]:
            raise ValueError(f"V has {V.shape[1]} columns but W has {W.shape[0]} rows")
        vp = self.v_prime
        if vp is not None:
            vp = np.asarray(vp, dtype=float).reshape(-1)
            if vp.shape[0] != W.shape[1]:
                raise ValueError(f"v_prime has dim {vp.shape[0]}, inputs have dim {W.shape[1]}")
            vp.setflags(write=False)
        W.setflags(write=False)
        V.setflags(write=False)
        object.__setattr__(self, "W", W)
        object.__setattr__(self, "V", V)
        object.__setattr__(self, "v_prime", vp)

    @property
    def n(self) -> int:
        return self.W.shape[1]

    @property
    def k(self) -> int:
        return self.W.shape[0]

    @property
    def n_outputs(self) -> int:
        return self.V.shape[0]

    def forward(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float).reshape(-1)
        out = self.V @ np.maximum(self.W @ x, 0.0)
        if self.v_prime is not None:
            out = out + self.v_prime @ x
        return out

    def predict(self, x) -> int:
        """Predicted class; single-output nets use sgn with sgn(0) = +1
        mapping +1 to class 0 and -1 to class 1."""
        out = self.forward(x)
        if self.n_outputs == 1:
            return 0 if out[0] >= 0 else 1
        return int(np.argmax(out))

    def margin_weights(self, pair: tuple[int, int] | None = None):
        """(v, v') of the binary margin f = v^T sigma(Wx) + v'^T x.

        For multi-output nets the margin is the class-i-minus-class-j output
        difference and the shared direct term cancels.
        """
        if self.n_outputs == 1:
            vp = self.v_prime if self.v_prime is not None else np.zeros(self.n)
            return self.V[0], vp
        if pair is None:
            raise ValueError("multi-output net needs a class pair")
        i, j = pair
        return self.V[i] - self.V[j], np.zeros(self.n)

    def margin(self, x, pair: tuple[int, int] | None = None) -> float:
        v, vp = self.margin_weights(pair)
        x = np.asarray(x, dtype=float).reshape(-1)
        return float(v @ np.maximum(self.W @ x, 0.0) + vp @ x)

    def to_dict(self) -> dict:
        return {
            "W": self.W.tolist(),
            "V": self.V.tolist(),
            "v_prime": None if self.v_prime is None else self.v_prime.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TwoLayerNet":
        vp = d.get("v_prime")
        return cls(np.asarray(d["W"], dtype=float), np.asarray(d["V"], dtype=float),
                   None if vp is None else np.asarray(vp, dtype=float))


def target_second_best(net: TwoLayerNet, x_star) -> tuple[int, int]:
    """(predicted class, runner-up class), ties broken by lowest index."""
    if net.n_outputs < 2:
        raise ValueError("second-best targeting needs a multi-output net")
    out = net.forward(x_star)
    i = int(np.argmax(out))
    rest = out.copy()
    rest[i] = -np.inf
    j = int(np.argmax(rest))
    return i, j


@dataclass(frozen=True)
class NnOptInstance:
    """Data of the mixed l1/linear box problem; rows of A come from hidden
    units whose (sign-adjusted) output weight is nonnegative, rows of B from
    the rest."""

    A: np.ndarray
    B: np.ndarray
    beta: np.ndarray
    c0: float
    c1: np.ndarray
    c2: np.ndarray
    delta: float

    def __post_init__(self):
        for name in ("A", "B", "beta", "c1", "c2"):
            arr = np.asarray(getattr(self, name), dtype=float)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        object.__setattr__(self, "c0", float(self.c0))
        object.__setattr__(self, "delta", float(self.delta))

    @property
    def n(self) -> int:
        return self.c1.shape[0]

    @property
    def m1(self) -> int:
        return self.A.shape[0]

    @property
    def m2(self) -> int:
        return self.B.shape[0]

    def objective(self, z, y=None) -> float:
        """Instance objective at z; y defaults to the closed-form optimum
        sgn(Az + c2), which dominates every |y|_inf <= 1."""
        z = np.asarray(z, dtype=float).reshape(-1)
        az = self.A @ z + self.c2 if self.m1 else np.zeros(0)
        if y is None:
            a_term = float(np.sum(np.abs(az)))
        else:
            y = np.asarray(y, dtype=float).reshape(-1)
            a_term = float(y @ az)
        b_term = float(np.sum(np.abs(self.beta + self.B @ z))) if self.m2 else 0.0
        return a_term + float(self.c1 @ z) - b_term + self.c0

    def scale(self) -> float:
        d = self.delta
        parts = [
            1.0,
            float(np.sum(np.abs(self.c2))) + float(np.sum(np.abs(self.A))) * d,
            float(np.sum(np.abs(self.c1))) * d,
            float(np.sum(np.abs(self.beta))) + float(np.sum(np.abs(self.B))) * d,
            abs(self.c0),
        ]
        return max(parts)


def reduce_net(
    net: TwoLayerNet,
    x_star,
    delta: float,
    target: tuple[int, int] | None = None,
) -> NnOptInstance:
    """Split hidden units by the sign of -l(x*) v_j and build the instance
    whose box maximum equals max -l(x*) f(x*+z).

    The units with -l*v_j >= 0 contribute |<W_j, x>| terms the adversary may
    exploit (the A rows, 1/2 |v_j| W_j each); the rest contribute the
    -||beta + Bz||_1 penalty. The linear remainder carries 1/2 v^T W plus the
    direct term, both taken with the -l sign.
    """
    x_star = np.asarray(x_star, dtype=float).reshape(-1)
    v, vp = net.margin_weights(target)
    fx = float(v @ np.maximum(net.W @ x_star, 0.0) + vp @ x_star)
    if fx == 0.0:
        raise AmbiguousLabel("f(x*) = 0; perturb the input or pick a label")
    ell = 1 if fx > 0 else -1
    vt = -ell * v
    vpt = -ell * vp
    pos = vt >= 0
    half_abs = 0.5 * np.abs(v)
    A = half_abs[pos, None] * net.W[pos]
    B = half_abs[~pos, None] * net.W[~pos]
    c1 = 0.5 * (vt @ net.W) + vpt
    c0 = float(0.5 * (vt @ net.W) @ x_star + vpt @ x_star)
    c2 = A @ x_star if A.shape[0] else np.zeros(0)
    beta = B @ x_star if B.shape[0] else np.zeros(0)
    return NnOptInstance(A, B, beta, c0, c1, c2, delta)


# ---------------------------------------------------------------------------
# SDP relaxation
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class NnSdpSolution:
    """Factorized solution: U rows are u_0, u_1..u_n; V rows are the v_j.
    r_j = |beta_j + sum_i B_ji <u_i,u_0>| at the optimum, so it is recomputed
    rather than stored as a variable."""

    U: np.ndarray
    V: np.ndarray
    objective: float
    feasibility: float
    delta: float

    def __post_init__(self):
        for name in ("U", "V"):
            arr = np.asarray(getattr(self, name), dtype=float)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def u0(self) -> np.ndarray:
        return self.U[0]

    @property
    def rank(self) -> int:
        return self.U.shape[1]

    def z_means(self) -> np.ndarray:
        return self.U[1:] @ self.U[0]

    def y_means(self) -> np.ndarray:
        return self.V @ self.U[0] if self.V.shape[0] else np.zeros(0)

    def z_orth(self) -> np.ndarray:
        return self.U[1:] - np.outer(self.z_means(), self.U[0])

    def y_orth(self) -> np.ndarray:
        if not self.V.shape[0]:
            return np.zeros((0, self.rank))
        return self.V - np.outer(self.y_means(), self.U[0])

    def r_values(self, inst: NnOptInstance) -> np.ndarray:
        t = self.z_means()
        return np.abs(inst.beta + inst.B @ t) if inst.m2 else np.zeros(0)


def _nn_objective(inst: NnOptInstance, U: np.ndarray, V: np.ndarray, mu: float = 0.0) -> float:
    t = U[1:] @ U[0]
    obj = float(inst.c1 @ t) + inst.c0
    if inst.m1:
        obj += float(np.sum(inst.A * (V @ U[1:].T))) + float(inst.c2 @ (V @ U[0]))
    if inst.m2:
        resid = inst.beta + inst.B @ t
        if mu > 0:
            obj -= float(np.sum(np.sqrt(resid**2 + mu**2)))
        else:
            obj -= float(np.sum(np.abs(resid)))
    return obj


def _maximize_1d_concave(phi, lo: float, hi: float, iters: int = 80) -> float:
    golden = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c = b - golden * (b - a)
    d = a + golden * (b - a)
    fc, fd = phi(c), phi(d)
    for _ in range(iters):
        if fc > fd:
            b, d, fd = d, c, fc
            c = b - golden * (b - a)
            fc = phi(c)
        else:
            a, c, fc = c, d, fd
            d = a + golden * (b - a)
            fd = phi(d)
    cands = [a, b, c, d, lo, hi]
    return cands[int(np.argmax([phi(x) for x in cands]))]


def _solve_t_block(inst: NnOptInstance, V: np.ndarray, t0: np.ndarray, mu: float) -> np.ndarray:
    """Maximize the smoothed objective over the u_0-components t, with the
    orthogonal parts eliminated: each u_i aligns its off-u_0 mass of norm
    sqrt(delta^2 - t_i^2) with its bilinear coefficient, leaving the jointly
    concave problem

        sum_i [q0_i t_i + p_i sqrt(delta^2 - t_i^2)] - sum_j s_mu(beta_j + B_j t).
    """
    from scipy.optimize import minimize

    delta, m1, m2 = inst.delta, inst.m1, inst.m2
    if m1:
        q0 = V[:, 0] @ inst.A + inst.c1
        p = np.linalg.norm(inst.A.T @ V[:, 1:], axis=1)
    else:
        q0 = inst.c1.copy()
        p = np.zeros(inst.n)

    def neg(t):
        rad = np.sqrt(np.maximum(delta**2 - t * t, 0.0))
        val = q0 @ t + p @ rad
        grad = q0 - p * t / np.maximum(rad, 1e-300)
        if m2:
            resid = inst.beta + inst.B @ t
            smooth = np.sqrt(resid**2 + mu * mu)
            val -= float(np.sum(smooth))
            grad = grad - (resid / smooth) @ inst.B
        return -val, -grad

    shrink = delta * (1.0 - 1e-10)
    bounds = [(-delta, delta) if p[i] == 0 else (-shrink, shrink) for i in range(inst.n)]
    t0 = np.clip(t0, [b[0] for b in bounds], [b[1] for b in bounds])
    res = minimize(neg, t0, jac=True, method="L-BFGS-B", bounds=bounds,
                   options={"maxiter": 500, "ftol": 1e-15, "gtol": 1e-12})
    return res.x


def _rebuild_U(inst: NnOptInstance, V: np.ndarray, t: np.ndarray, d: int) -> np.ndarray:
    U = np.zeros((inst.n + 1, d))
    U[0, 0] = 1.0
    U[1:, 0] = t
    if inst.m1:
        Q = inst.A.T @ V[:, 1:]  # rows: off-u_0 bilinear coefficient of u_i
        norms = np.linalg.norm(Q, axis=1)
        rad = np.sqrt(np.maximum(inst.delta**2 - t * t, 0.0))
        nz = norms > 0
        U[1:, 1:][nz] = (rad[nz] / norms[nz])[:, None] * Q[nz]
    return U


def solve_nn_sdp(
    inst: NnOptInstance,
    tol: float = 1e-9,
    seed: int = 0,
    restarts: int = 3,
    max_iters: int = 200,
    v_norm_bound: float = 1.0,
) -> NnSdpSolution:
    """Block ascent on the factorized net SDP with u_0 pinned to a basis
    vector (a rotation, so no generality is lost). The r_j constraints are
    eliminated: at the optimum r_j = |beta_j + B_j^T <u,u_0>|, and the
    resulting absolute values are smoothed as sqrt(t^2 + mu^2) with mu
    annealed 1e-2 -> 1e-8; the reported objective uses the exact |.|.

    Each v_j block is a norm-bound alignment in closed form (v_norm_bound
    shrinks the |v_j| <= 1 constraints when a y-margin is wanted); the
    u-block is a jointly concave bound-constrained problem over the
    u_0-components once the orthogonal parts are eliminated, solved by
    projected quasi-Newton.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    if not 0 < v_norm_bound <= 1.0:
        raise ValueError("v_norm_bound must lie in (0, 1]")
    n, m1, m2, delta = inst.n, inst.m1, inst.m2, inst.delta
    d = n + m1 + 2
    best_U = best_V = None
    best_obj = -math.inf
    converged_some = False

    for r in range(max(1, restarts)):
        rng = boxmax.make_stream(seed, namespace=0x300 + r)
        if r == 0:
            t = np.zeros(n)
            V = rng.standard_normal((m1, d))
        else:
            t = rng.uniform(-delta, delta, n)
            V = rng.standard_normal((m1, d))
        if m1:
            V[:, 0] = rng.uniform(-1, 1, m1) * (0.0 if r == 0 else 1.0)
            V /= np.maximum(np.linalg.norm(V, axis=1, keepdims=True), 1e-300)
        U = _rebuild_U(inst, V, t, d)

        converged = True
        for mu in (1e-2, 1e-4, 1e-6, 1e-8):
            obj = _nn_objective(inst, U, V, mu)
            stage_tol = max(tol, mu * 1e-4)
            stage_ok = False
            for _ in range(max_iters):
                for j in range(m1):
                    lv = inst.A[j] @ U[1:] + inst.c2[j] * U[0]
                    nl = np.linalg.norm(lv)
                    V[j] = (v_norm_bound / nl) * lv if nl > 0 else 0.0
                t = _solve_t_block(inst, V, U[1:, 0], mu)
                U = _rebuild_U(inst, V, t, d)
                new_obj = _nn_objective(inst, U, V, mu)
                gain = new_obj - obj
                obj = new_obj
                if gain <= stage_tol * max(1.0, abs(obj)):
                    stage_ok = True
                    break
            converged = converged and stage_ok
        exact_obj = _nn_objective(inst, U, V, 0.0)
        if converged:
            converged_some = True
            if exact_obj > best_obj:
                best_obj, best_U, best_V = exact_obj, U.copy(), V.copy()
        elif best_U is None:
            best_obj, best_U, best_V = exact_obj, U.copy(), V.copy()

    if not converged_some:
        raise boxmax.SolverError(
            f"net SDP block ascent did not converge within {max_iters} iterations",
            best=NnSdpSolution(best_U, best_V, best_obj, 0.0, delta),
        )
    norms2u = np.sum(best_U * best_U, axis=1)
    feas = max(abs(norms2u[0] - 1.0),
               float(np.max(np.maximum(norms2u[1:] - delta**2, 0.0), initial=0.0)))
    if m1:
        feas = max(feas, float(np.max(np.maximum(np.sum(best_V * best_V, axis=1) - 1.0, 0.0))))
    return NnSdpSolution(best_U, best_V, best_obj, feas, delta)


def rounding_eps(m1: int, a: float = 1.0) -> float:
    """eps = a / sqrt(log m1), clamped to (0, 1]; degenerate m1 gives 1."""
    if m1 <= 1:
        return 1.0
    return min(1.0, a / math.sqrt(math.log(m1)))


@dataclass(frozen=True)
class NnRoundResult:
    z_hat: np.ndarray
    y_hat: np.ndarray
    value: float
    linf: float
    trials_used: int
    within_cap: bool = True

    def __post_init__(self):
        for name in ("z_hat", "y_hat"):
            arr = np.asarray(getattr(self, name), dtype=float)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)


def round_nn(
    sol: NnSdpSolution,
    inst: NnOptInstance,
    trials: int = 256,
    seed: int = 0,
    a: float = 1.0,
    linf_cap: float | None = None,
) -> NnRoundResult:
    """Asymmetric Gaussian rounding: z gets 1/eps of the orthogonal noise,
    y gets eps of it and is clamped to [-1, 1]. The reported value uses the
    closed-form optimal y* = sgn(A z + c2), which dominates any clamped y_hat;
    y_hat is returned for diagnostics only. Best trial by true value, with
    within-cap trials preferred when a cap is given.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    eps = rounding_eps(inst.m1, a)
    t = sol.z_means()
    Uperp = sol.z_orth()
    y0 = sol.y_means()
    Vperp = sol.y_orth()
    if not np.any(Uperp):
        z = t
        y = np.clip(y0, -1.0, 1.0)
        return NnRoundResult(z, y, inst.objective(z), float(np.max(np.abs(z), initial=0.0)), trials)
    Z = boxmax.make_stream(seed, namespace=0x400).standard_normal((trials, sol.rank))
    Zs = t[None, :] + (1.0 / eps) * (Z @ Uperp.T)
    if inst.m1:
        Ys = np.clip(y0[None, :] + eps * (Z @ Vperp.T), -1.0, 1.0)
    else:
        Ys = np.zeros((trials, 0))
    az = Zs @ inst.A.T + inst.c2[None, :] if inst.m1 else np.zeros((trials, 0))
    a_term = np.sum(np.abs(az), axis=1)
    b_term = (
        np.sum(np.abs(inst.beta[None, :] + Zs @ inst.B.T), axis=1) if inst.m2 else 0.0
    )
    vals = a_term + Zs @ inst.c1 - b_term + inst.c0
    linfs = np.max(np.abs(Zs), axis=1)
    k = int(np.argmax(vals))
    within = True
    if linf_cap is not None:
        ok = linfs <= linf_cap
        if np.any(ok):
            idx = np.flatnonzero(ok)
            k = idx[int(np.argmax(vals[idx]))]
        else:
            within = False
    return NnRoundResult(Zs[k], Ys[k] if inst.m1 else np.zeros(0), float(vals[k]),
                         float(linfs[k]), trials, within_cap=within)


def net_rounding_cap(n: int, k: int, delta: float,
                     constant: float = boxmax.ROUNDING_CAP_CONSTANT) -> float | None:
    """l-inf cap C*sqrt(log n * log k)*delta; degenerate below n, k = 2."""
    if n < 2 or k < 2:
        return None
    return constant * math.sqrt(math.log(n) * math.log(k)) * delta


def attack_net(
    net: TwoLayerNet,
    x_star,
    delta: float,
    seed: int = 0,
    trials: int = 256,
    tol: float = 1e-9,
    alpha: float = 1.0,
    target: tuple[int, int] | None = None,
) -> AttackOutcome:
    """SDP attack on a 2-layer net at x_star.

    The SDP runs at the internal radius delta' = alpha*delta (alpha <= 1
    trades certification power for rounded perturbations that stay small).
    found: rounded objective > 0 and the prediction actually flips under a
    forward pass. certified: SDP value < -tol*scale, only claimed when
    delta' >= delta so the certificate covers the requested ball. Anything
    else is unknown. The perturbation's l-inf norm is reported unclipped.
    """
    if delta <= 0:
        raise ValueError("delta must be positive")
    x_star = np.asarray(x_star, dtype=float).reshape(-1)
    if net.n_outputs >= 2 and target is None:
        target = target_second_best(net, x_star)
    pred0 = net.predict(x_star)
    fx = net.margin(x_star, target)
    if fx == 0.0:
        raise AmbiguousLabel("f(x*) = 0; perturb the input or pick a label")
    ell = 1 if fx > 0 else -1
    delta_prime = alpha * delta
    inst = reduce_net(net, x_star, delta_prime, target)
    sol = solve_nn_sdp(inst, tol=min(tol, 1e-9), seed=seed)
    scale = inst.scale()
    if sol.objective < -tol * scale and delta_prime >= delta:
        return AttackOutcome(CERTIFIED, None, 0.0, sol.objective, sol.objective, 1.0)
    cap = net_rounding_cap(net.n, net.k, delta)
    res = round_nn(sol, inst, trials=trials, seed=seed, linf_cap=cap)
    flipped = net.predict(x_star + res.z_hat) != pred0
    if flips_label(res.value, ell) and flipped:
        gamma = res.linf / delta if delta > 0 else 1.0
        return AttackOutcome(FOUND, res.z_hat, res.linf, res.value, None, gamma)
    return AttackOutcome(UNKNOWN, None, 0.0, res.value, None, 1.0)


def pgd_attack(
    net: TwoLayerNet,
    x_star,
    delta: float,
    steps: int = 40,
    step_size: float | None = None,
    restarts: int = 5,
    seed: int = 0,
    target: tuple[int, int] | None = None,
) -> AttackOutcome:
    """Projected sign-gradient ascent on -l(x*) f(x*+z) over the delta box.

    The ReLU subgradient at 0 is taken as 0. Restart 0 starts from z = 0,
    the rest from uniform points in the box. Heuristic: never certifies.
    """
    if delta <= 0:
        raise ValueError("delta must be positive")
    x_star = np.asarray(x_star, dtype=float).reshape(-1)
    if net.n_outputs >= 2 and target is None:
        target = target_second_best(net, x_star)
    v, vp = net.margin_weights(target)
    fx = net.margin(x_star, target)
    if fx == 0.0:
        raise AmbiguousLabel("f(x*) = 0; perturb the input or pick a label")
    ell = 1 if fx > 0 else -1
    pred0 = net.predict(x_star)
    if step_size is None:
        step_size = delta / 10.0
    best_val, best_z = -math.inf, np.zeros(net.n)
    for r in range(max(1, restarts)):
        if r == 0:
            z = np.zeros(net.n)
        else:
            z = boxmax.make_stream(seed, namespace=0x500 + r).uniform(-delta, delta, net.n)
        for _ in range(steps):
            pre = net.W @ (x_star + z)
            active = pre > 0
            grad_f = (v * active) @ net.W + vp
            g = -ell * grad_f
            z = np.clip(z + step_size * np.sign(g), -delta, delta)
            val = -ell * net.margin(x_star + z, target)
            if val > best_val:
                best_val, best_z = val, z.copy()
            if flips_label(val, ell) and net.predict(x_star + z) != pred0:
                return AttackOutcome(FOUND, z, float(np.max(np.abs(z))), val, None, 1.0)
    return AttackOutcome(UNKNOWN, None, 0.0, best_val, None, 1.0)


def net_flip_boxmax(
    net: TwoLayerNet,
    x_star,
    delta: float,
    target: tuple[int, int] | None = None,
) -> float:
    """Exact max of -l(x*) f(x*+z) over the box by enumerating the 2^k ReLU
    activation patterns and solving one LP per feasible pattern (verification
    oracle; k <= 16)."""
    x_star = np.asarray(x_star, dtype=float).reshape(-1)
    if net.n_outputs >= 2 and target is None:
        target = target_second_best(net, x_star)
    v, vp = net.margin_weights(target)
    fx = net.margin(x_star, target)
    ell = 1 if fx >= 0 else -1
    if net.k > 16:
        raise ValueError("pattern enumeration limited to k <= 16")
    n, k = net.n, net.k
    Wx = net.W @ x_star
    best = -math.inf
    bounds = [(-delta, delta)] * n
    for code in range(1 << k):
        active = np.array([(code >> j) & 1 for j in range(k)], dtype=bool)
        # maximize -ell*(sum_active v_j W_j + vp) @ (x*+z): linprog minimizes
        c_vec = ell * ((v * active) @ net.W + vp)
        A_ub = np.vstack([-net.W[active], net.W[~active]])
        b_ub = np.concatenate([Wx[active], -Wx[~active]])
        if A_ub.shape[0] == 0:
            A_ub, b_ub = None, None
        res = linprog(c_vec, A_ub=A_ub, b_ub=b_ub, bounds=bounds, method="highs")
        if not res.success:
            continue
        z = res.x
        val = -ell * net.margin(x_star + z, target)
        best = max(best, val)
    return best


def net_flip_exists(net, x_star, delta, target=None) -> bool:
    """Exact flip decision against the prediction at x_star (sgn(0) = +1)."""
    fx = net.margin(x_star, target if net.n_outputs >= 2 else None)
    ell = 1 if fx >= 0 else -1
    best = net_flip_boxmax(net, x_star, delta, target)
    return flips_label(best, ell)
