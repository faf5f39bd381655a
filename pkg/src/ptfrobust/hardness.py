"""Generators and desk-scale verifiers for the hardness gadget point sets.

The gadgets live in R^{n+1} (coordinates x_1..x_n plus a threshold coordinate
written z). Each generator records full parameter provenance so the verifiers
can re-derive every claimed structural property: zero plain error of the
intended quadratic threshold, per-point robustness (exact, via vertex
enumeration: the intended polynomials are multilinear), the exact-2*delta
pair separation, and the rank-(r-1) uniqueness system. Nothing here proves
hardness; the point is to make the constructions runnable and auditable.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import boxmax
from .poly import (
    LabeledSet,
    PtfClassifier,
    QuadPoly,
    evaluate,
    flips_label,
    negate_for_label,
    shift,
    sign_pm1,
)

MAIN = "main"
APPENDIX = "appendix"
REDUNDANT = "redundant"


def _quad_in_xz(A_x: np.ndarray, z_sign: float) -> QuadPoly:
    """Polynomial q(x, z) = sign * z + x^T A_x x on R^{n+1} (z last)."""
    n = A_x.shape[0]
    A = np.zeros((n + 1, n + 1))
    A[:n, :n] = A_x
    b = np.zeros(n + 1)
    b[n] = z_sign
    return QuadPoly(A, b, 0.0)


def main_gadget_size(n: int) -> int:
    return 6 + 4 * n + 12 * (n * (n - 1) // 2)


@dataclass(frozen=True)
class GadgetInstance:
    S: LabeledSet
    kind: str
    intended: PtfClassifier
    params: dict = field(compare=False)
    event_holds: bool | None = None

    @property
    def n(self) -> int:
        return self.S.dim - 1

    @property
    def delta(self) -> float:
        return float(self.params["delta"])

    def to_dict(self) -> dict:
        return {
            "schema": "gadget/1",
            "kind": self.kind,
            "params": self.params,
            "intended": self.intended.to_dict(),
            "event_holds": self.event_holds,
            "dataset_csv": self.S.to_csv(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "GadgetInstance":
        S = LabeledSet.from_csv(d["dataset_csv"], delta=d["params"].get("delta"))
        return cls(S, d["kind"], PtfClassifier.from_dict(d["intended"]), d["params"],
                   d.get("event_holds"))


def _check_qp_matrix(A: np.ndarray) -> np.ndarray:
    A = np.atleast_2d(np.asarray(A, dtype=float))
    if A.shape[0] != A.shape[1] or A.shape[0] < 2:
        raise ValueError("A must be a square matrix with n >= 2")
    if not np.allclose(A, A.T):
        raise ValueError("A must be symmetric")
    if np.any(np.diag(A) != 0.0):
        raise ValueError("A must have zeros on the diagonal")
    if not np.any(A):
        raise ValueError("A must not be all zero")
    return A


def gen_main_gadget(A, s: float, theta_const: float = 1.0) -> GadgetInstance:
    """The fixed (deterministic) point family transporting box-quadratic
    maximization hardness to robust consistency.

    Inputs are the (symmetric, zero-diagonal) quadratic-form matrix and the
    threshold s > 100; the YES case is max over the unit cube of x^T A x < s.
    A and s are rescaled together (so YES/NO is untouched) until every nonzero
    monomial coefficient a_ij = 2 A_ij strictly exceeds max(10, 2*eps) with
    eps = 200/n^2; the lower threshold 10 alone would let small instances
    misclassify the doubled pair points, since eps is not small at desk scale.
    Then delta = 1/s and the five point families are emitted.
    """
    A = _check_qp_matrix(A)
    if s <= 100:
        raise ValueError("s must exceed 100")
    n = A.shape[0]
    eps = 200.0 / n**2
    a = 2.0 * A  # monomial coefficients of x^T A x
    nz = np.abs(a[np.triu_indices(n, 1)])
    nz = nz[nz > 0]
    threshold = max(10.0, 2.0 * eps)
    factor = 1.0
    if nz.min() <= threshold:
        factor = float(threshold * (1.0 + 1e-9) / nz.min())
    a = a * factor
    s = float(s * factor)
    delta = 1.0 / s
    min_pair = float(np.min(np.abs(a[np.triu_indices(n, 1)])))
    coeff_term = max(1.0, 1.0 / (eps + min_pair))
    tau_prime = theta_const * (n**2 / eps) * coeff_term
    tau = theta_const * (n / eps) * coeff_term
    gamma_gadget = 4.0 * n * tau

    pts: list[np.ndarray] = []
    labels: list[int] = []

    def add(x_head: np.ndarray, z: float, label: int):
        pts.append(np.concatenate([x_head, [z]]))
        labels.append(label)

    zero = np.zeros(n)
    for z, lab in ((1.0, -1), (-1.0, 1), (tau_prime, -1), (-tau_prime, 1),
                   (2 * delta, -1), (-2 * delta, 1)):
        add(zero, z, lab)
    for i in range(n):
        e = np.zeros(n)
        e[i] = tau
        for sgn_e in (1.0, -1.0):
            add(sgn_e * e, gamma_gadget, -1)
            add(sgn_e * e, -gamma_gadget, 1)
    for i in range(n):
        for j in range(i + 1, n):
            w = 1.0 / math.sqrt(2.0 * (eps + abs(a[i, j])))
            patterns = ((1, 1), (-1, 1), (1, -1), (-1, -1))
            for si, sj in patterns:
                e = np.zeros(n)
                e[i], e[j] = si * w, sj * w
                add(e, 2.0, -1)       # S3
                add(e, -2.0, 1)       # S5
            lam = int(sign_pm1(a[i, j])) if a[i, j] != 0 else None
            for si, sj in patterns:
                e = np.zeros(n)
                e[i], e[j] = 2 * si * w, 2 * sj * w
                # doubled points sit on the a_ij side of the z = 1 slice;
                # zero coefficients leave all four on the negative side
                lab = -1 if lam is None else lam * si * sj
                add(e, 1.0, lab)      # S4

    intended = PtfClassifier(_quad_in_xz(a / 2.0, z_sign=-1.0))
    S = LabeledSet(np.vstack(pts), np.asarray(labels), delta=delta)
    params = {
        "A_source": A.tolist(),
        "a_scaled": a.tolist(),
        "s": s,
        "scale_factor": factor,
        "delta": delta,
        "epsilon": eps,
        "tau": tau,
        "tau_prime": tau_prime,
        "gamma_gadget": gamma_gadget,
        "theta_const": theta_const,
        "n": n,
        "yes_case": _cube_max(a / 2.0) < s,
    }
    return GadgetInstance(S, MAIN, intended, params)


def _cube_max(A: np.ndarray) -> float:
    """max over {-1,1}^n of x^T A x (A zero-diagonal so the max is a vertex)."""
    g = QuadPoly(A, np.zeros(A.shape[0]), 0.0)
    return boxmax.brute_force_boxmax(g, 1.0, mode="vertex").value


RHO_CONSTANT = 10.0  # rho >= RHO_CONSTANT * delta * n^(3/2) * m


def gen_appendix_gadget(A, beta: float, delta: float, m: int, rho: float | None = None,
                        seed: int = 0) -> GadgetInstance:
    """Randomized gadget: sample x ~ N(0, rho^2)^n on the surface
    z = x^T A x, then split each base point into a pair displaced by delta
    along the gradient sign vector, labeled by the intended sgn(z - x^T A x).

    With power-of-two delta (and coordinates within float range) the pair
    coordinates are exactly representable, making the 2*delta-per-coordinate
    separation a bit-exact invariant.
    """
    A = _check_qp_matrix(A)
    n = A.shape[0]
    if m <= (n + 1) ** 2:
        raise ValueError(f"m must exceed (n+1)^2 = {(n + 1) ** 2}")
    if delta <= 0 or beta <= 0:
        raise ValueError("delta and beta must be positive")
    rho_min = RHO_CONSTANT * delta * n**1.5 * m
    if rho is None:
        rho = rho_min
    if rho < rho_min:
        raise ValueError(f"rho must be at least {rho_min}")
    rng = boxmax.make_stream(seed, namespace=0x700)
    # snap the samples onto the 2*delta lattice: lattice points and their
    # +-delta displacements are exactly representable (for dyadic delta),
    # making the 2*delta pair separation bit-exact with no binade crossings
    K = np.rint(rho * rng.standard_normal((m, n)) / (2.0 * delta))
    X = K * (2.0 * delta)
    Z = np.einsum("mi,ij,mj->m", X, A, X)
    grads = X @ (2.0 * A.T)
    Ssign = sign_pm1(grads).astype(float)

    intended_poly = _quad_in_xz(-A, z_sign=+1.0)  # z - x^T A x

    pts, labels, pairs = [], [], []
    for j in range(m):
        u = (2.0 * K[j] - Ssign[j]) * delta
        v = (2.0 * K[j] + Ssign[j]) * delta
        # derive one z endpoint from the other, stepping toward zero so the
        # 2*delta subtraction cannot round
        if Z[j] >= 0:
            zu = Z[j] + delta
            zv = zu - 2.0 * delta
        else:
            zv = Z[j] - delta
            zu = zv + 2.0 * delta
        yu = int(sign_pm1(evaluate(intended_poly, np.concatenate([u, [zu]]))))
        yv = int(sign_pm1(evaluate(intended_poly, np.concatenate([v, [zv]]))))
        pairs.append((len(pts), len(pts) + 1))
        pts.append(np.concatenate([u, [zu]]))
        labels.append(yu)
        pts.append(np.concatenate([v, [zv]]))
        labels.append(yv)
    alpha = delta**2 * beta + delta
    pts.append(np.concatenate([np.zeros(n), [alpha]]))
    labels.append(1)

    event = bool(np.all(np.abs(X @ A.T) > delta * np.sum(np.abs(A), axis=1)[None, :]))
    intended = PtfClassifier(intended_poly)
    S = LabeledSet(np.vstack(pts), np.asarray(labels), delta=delta)
    params = {
        "A_source": A.tolist(),
        "beta": beta,
        "alpha": alpha,
        "delta": delta,
        "rho": rho,
        "m": m,
        "seed": seed,
        "n": n,
        "base_x": X.tolist(),
        "base_z": Z.tolist(),
        "grad_signs": Ssign.tolist(),
        "pairs": pairs,
        "yes_case": _cube_max(A) < beta,
    }
    return GadgetInstance(S, APPENDIX, intended, params, event_holds=event)


def gen_redundant_gadget(A, beta: float, delta: float, seed: int = 0,
                         rho: float | None = None, jitter: bool = False) -> GadgetInstance:
    """Error-tolerant variant: n^3 copies of the threshold point plus n^3
    displaced pairs (3 n^3 points total), sized so that dropping any epsilon
    fraction below 2/7 still pins the unique consistent quadratic."""
    A = _check_qp_matrix(A)
    n = A.shape[0]
    if n > 8:
        raise ValueError("redundant gadget limited to n <= 8 (3 n^3 points)")
    m = n**3
    if m <= (n + 1) ** 2:
        raise ValueError(f"n^3 = {m} pairs do not exceed (n+1)^2; need n >= 3")
    base = gen_appendix_gadget(A, beta, delta, m, rho=rho, seed=seed)
    alpha = base.params["alpha"]
    extra = np.tile(np.concatenate([np.zeros(n), [alpha]]), (m - 1, 1))
    if jitter:
        rng = boxmax.make_stream(seed, namespace=0x701)
        extra[:, :n] += 1e-9 * delta * rng.standard_normal((m - 1, n))
    X = np.vstack([base.S.X, extra])
    y = np.concatenate([base.S.y, np.ones(m - 1, dtype=int)])
    params = dict(base.params)
    eps_max = redundancy_eps_threshold(n)
    params.update({"N1": m, "N2": 2 * m, "jitter": jitter, "eps_threshold": eps_max})
    if eps_max < 2 / 7:
        warnings.warn(
            f"at n = {n} the count inequalities only tolerate an error fraction "
            f"below {eps_max:.4f} (the 2/7 bound needs larger n); epsilon >= 1/3 "
            "always violates them",
            stacklevel=2,
        )
    S = LabeledSet(X, y, delta=delta)
    return GadgetInstance(S, REDUNDANT, base.intended, params, event_holds=base.event_holds)


def redundancy_count_inequalities(n: int, eps: float) -> tuple[bool, bool]:
    """The two pigeonhole inequalities behind the error-tolerant gadget:
    N1 > eps*(N1+N2) and (1-eps)*(N1+N2) > N1 + N2/2 + (n+1)^2."""
    n1, n2 = n**3, 2 * n**3
    total = n1 + n2
    return (n1 > eps * total, (1 - eps) * total > n1 + n2 / 2 + (n + 1) ** 2)


def redundancy_eps_threshold(n: int) -> float:
    """Largest error fraction below which both count inequalities hold;
    min(1/3, 1 - (N1 + N2/2 + (n+1)^2)/(N1+N2)), approaching 1/3 for large n."""
    n1, n2 = n**3, 2 * n**3
    total = n1 + n2
    return min(1.0 / 3.0, 1.0 - (n1 + n2 / 2 + (n + 1) ** 2) / total)


# ---------------------------------------------------------------------------
# Verifiers
# ---------------------------------------------------------------------------

def verify_counts(inst: GadgetInstance) -> bool:
    if inst.kind == MAIN:
        return len(inst.S) == main_gadget_size(inst.n)
    if inst.kind == APPENDIX:
        return len(inst.S) == 2 * inst.params["m"] + 1
    if inst.kind == REDUNDANT:
        return len(inst.S) == 3 * inst.n**3
    raise ValueError(f"unknown kind {inst.kind!r}")


def verify_zero_plain_error(inst: GadgetInstance) -> bool:
    return bool(np.all(inst.intended.classify_many(inst.S.X) == inst.S.y))


def point_is_robust(f: PtfClassifier, x, y: int, delta: float,
                    oracle: str = "auto", grid_points: int = 101,
                    margin_tol: float = 1e-9) -> bool:
    """Robustness of sgn(g) at (x, y): no perturbation in the ball reaches a
    strictly positive flip margin.

    The sampled gadgets put the decision surface at l-inf distance exactly
    delta from the paired points, so the flip polynomial attains 0 (up to
    roundoff) on the ball boundary; a flip therefore requires margin above
    margin_tol times the objective scale, i.e. the open-ball reading.
    """
    h = negate_for_label(shift(f.g, np.asarray(x, dtype=float)), y)
    if oracle == "auto":
        res = boxmax.exact_boxmax(h, delta)
    elif oracle == "grid":
        res = boxmax.brute_force_boxmax(h, delta, mode="grid", grid_points=grid_points)
    elif oracle == "vertex":
        res = boxmax.brute_force_boxmax(h, delta, mode="vertex")
    else:
        raise ValueError(f"unknown oracle {oracle!r}")
    return res.value <= margin_tol * boxmax.objective_scale(h, delta)


def verify_robustness(inst: GadgetInstance, delta: float | None = None,
                      oracle: str = "auto", grid_points: int = 101) -> tuple[bool, list[int]]:
    """Check delta-robustness of the intended classifier at every point;
    returns (all_robust, indices of failures). Labels must also match."""
    delta = inst.delta if delta is None else delta
    bad = []
    for i, (x, y) in enumerate(inst.S):
        if inst.intended.classify(x) != y or not point_is_robust(
            inst.intended, x, y, delta, oracle=oracle, grid_points=grid_points
        ):
            bad.append(i)
    return (not bad, bad)


def verify_pair_separation(inst: GadgetInstance) -> bool:
    """Bit-exact check that each pair differs by exactly 2*delta in every x
    coordinate and in z (guaranteed for power-of-two delta)."""
    if inst.kind not in (APPENDIX, REDUNDANT):
        raise ValueError("pair separation applies to sampled gadgets")
    delta = inst.delta
    Ssign = np.asarray(inst.params["grad_signs"], dtype=float)
    for j, (iu, iv) in enumerate(inst.params["pairs"]):
        u, v = inst.S.X[iu], inst.S.X[iv]
        if not np.array_equal(v[:-1] - u[:-1], 2.0 * delta * Ssign[j]):
            return False
        if u[-1] - v[-1] != 2.0 * delta:
            return False
    return True


@dataclass(frozen=True)
class RankReport:
    r: int
    expected_rank: int
    numerical_rank: int
    null_dimension: int
    null_cosine: float
    singular_values: np.ndarray

    @property
    def ok(self) -> bool:
        return (
            self.numerical_rank == self.expected_rank
            and self.null_dimension == 1
            and self.null_cosine >= 1.0 - 1e-8
        )


def monomial_row(x: np.ndarray, z: float) -> np.ndarray:
    """(1, x, {x_i x_j}_{i<=j}, {x_i z}, z^2, z)."""
    n = x.shape[0]
    quad = [x[i] * x[j] for i in range(n) for j in range(i, n)]
    return np.concatenate([[1.0], x, quad, x * z, [z * z, z]])


def uniqueness_dimension(n: int) -> int:
    return (n + 1) * n // 2 + 2 * n + 3


def verify_uniqueness_rank(inst: GadgetInstance, sv_tol: float = 1e-8) -> RankReport:
    """Numerical rank of the monomial system through the base points, and the
    direction of its null space, which must match z - x^T A x.

    The columns are rescaled to unit norm before the SVD (pure conditioning;
    the null space maps back through the scaling).
    """
    if inst.kind not in (APPENDIX, REDUNDANT):
        raise ValueError("rank verification applies to sampled gadgets")
    n = inst.n
    m = inst.params["m"]
    if m <= (n + 1) ** 2:
        raise ValueError("not enough base points for the rank argument")
    X = np.asarray(inst.params["base_x"], dtype=float)
    Z = np.asarray(inst.params["base_z"], dtype=float)
    M = np.vstack([monomial_row(X[j], Z[j]) for j in range(m)])
    r = M.shape[1]
    assert r == uniqueness_dimension(n)
    col_scale = np.linalg.norm(M, axis=0)
    col_scale[col_scale == 0] = 1.0
    Ms = M / col_scale
    _, sv, Vt = np.linalg.svd(Ms, full_matrices=False)
    rank = int(np.sum(sv > sv_tol * sv[0]))
    null_dim = r - rank
    null_scaled = Vt[-1]
    null_vec = null_scaled / col_scale
    null_vec /= np.linalg.norm(null_vec)

    A = np.asarray(inst.params["A_source"], dtype=float)
    expected = np.zeros(r)
    pos = 1 + n
    for i in range(n):
        for j in range(i, n):
            expected[pos] = -2.0 * A[i, j] if i != j else -A[i, i]
            pos += 1
    expected[-1] = 1.0
    expected /= np.linalg.norm(expected)
    cosine = float(abs(null_vec @ expected))
    return RankReport(r, r - 1, rank, null_dim, cosine, sv)


@dataclass(frozen=True)
class CandidateVerdict:
    zero_plain_error: bool
    robust_everywhere: bool
    failures: tuple[int, ...]

    @property
    def ok(self) -> bool:
        return self.zero_plain_error and self.robust_everywhere


def verify_no_robust_ptf_candidates(
    inst: GadgetInstance, candidate: PtfClassifier, delta_prime: float
) -> CandidateVerdict:
    """Empirically test whether a candidate quadratic threshold classifies
    all of S correctly and is delta'-robust at every point. Exact oracles
    are used up to ambient dimension 8; beyond that, a negative SDP value is
    required per point (sound, possibly incomplete)."""
    preds = candidate.classify_many(inst.S.X)
    correct = bool(np.all(preds == inst.S.y))
    bad = []
    exact = inst.S.dim <= 8 or (
        not np.any(np.diag(candidate.g.A)) and inst.S.dim <= 24
    )
    for i, (x, y) in enumerate(inst.S):
        if preds[i] != y:
            bad.append(i)
            continue
        if exact:
            if not point_is_robust(candidate, x, y, delta_prime):
                bad.append(i)
        else:
            h = negate_for_label(shift(candidate.g, x), y)
            sol = boxmax.solve_sdp(boxmax.build_sdp(h, delta_prime), seed=i)
            if sol.objective >= -1e-9 * boxmax.objective_scale(h, delta_prime):
                bad.append(i)
    return CandidateVerdict(correct, not bad, tuple(bad))
