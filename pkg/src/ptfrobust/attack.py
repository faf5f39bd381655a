"""Per-example adversarial search or certification for threshold classifiers.

For sgn(g) at a point x* with reference label y, a flip within the ball
corresponds to positivity of h(z) = -y * g(x* + z). Degree-1 h is maximized
exactly (gamma = 1); degree-2 h goes through the SDP relaxation and Gaussian
rounding (perturbations up to 4*sqrt(log n) * delta). A negative exact
maximum, or a negative SDP value, certifies that no flip exists within delta.
"""
from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import boxmax
from .poly import (
    LabeledSet,
    PtfClassifier,
    QuadPoly,
    UnsupportedDegree,
    evaluate,
    flips_label,
    negate_for_label,
    shift,
    sign_pm1,
)

FOUND = "found"
CERTIFIED = "certified"
UNKNOWN = "unknown"


@dataclass(frozen=True)
class AttackOutcome:
    """Result of one attack: a flip with its perturbation, a certificate, or
    neither (degree-2 values inside the solver tolerance band).

    margin is the flip-polynomial value -y*g(x*+z) at the returned z (positive
    exactly when the prediction flips away from y, given sgn(0) = +1).
    """

    verdict: str
    z: np.ndarray | None
    linf: float
    margin: float
    certificate_value: float | None
    gamma_used: float

    def __post_init__(self):
        if self.z is not None:
            z = np.asarray(self.z, dtype=float).reshape(-1)
            z.setflags(write=False)
            object.__setattr__(self, "z", z)

    def to_dict(self) -> dict:
        return {
            "verdict": self.verdict,
            "z": None if self.z is None else self.z.tolist(),
            "linf": self.linf,
            "margin": self.margin,
            "certificate_value": self.certificate_value,
            "gamma_used": self.gamma_used,
        }


def attack_ptf(
    f: PtfClassifier,
    x_star,
    delta: float,
    eta: float = 0.01,
    mode: str = "model",
    y: int | None = None,
    seed: int = 0,
    tol: float = 1e-10,
    trials: int | None = None,
) -> AttackOutcome:
    """Find an adversarial example near x_star or certify there is none.

    mode='model' flips against sgn(g(x*)); mode='label' flips against the
    given y. Degree 1 is exact in both directions. For degree 2, 'found'
    requires a strictly positive achieved value (the boundary value 0 counts
    only for y = -1, where sgn(0) = +1 already flips the prediction); SDP
    values in [-tol*scale, 0] give 'unknown'.
    """
    if delta <= 0:
        raise ValueError("delta must be positive")
    x_star = np.asarray(x_star, dtype=float).reshape(-1)
    if mode == "label":
        if y not in (-1, 1):
            raise ValueError("label mode requires y in {-1, +1}")
        y_ref = int(y)
    elif mode == "model":
        y_ref = int(sign_pm1(evaluate(f.g, x_star)))
    else:
        raise ValueError(f"mode must be 'model' or 'label', got {mode!r}")
    if f.degree > 2:
        raise UnsupportedDegree(f"degree {f.degree} classifiers are not supported")

    h = negate_for_label(shift(f.g, x_star), y_ref)

    if h.degree() <= 1:
        res = boxmax.maximize_linear(h.b, h.c, delta)
        if flips_label(res.value, y_ref):
            return AttackOutcome(FOUND, res.x_hat, res.linf, res.value, None, 1.0)
        # exact maximum is an upper bound over the ball; < 0 in all but the
        # measure-zero tie at 0 with y = +1, which is still a valid no-flip proof
        return AttackOutcome(CERTIFIED, None, 0.0, res.value, res.value, 1.0)

    scale = boxmax.objective_scale(h, delta)
    sol = boxmax.solve_sdp(boxmax.build_sdp(h, delta), tol=min(tol, 1e-10), seed=seed)
    nominal_gamma = boxmax.ROUNDING_CAP_CONSTANT * math.sqrt(math.log(h.n)) if h.n >= 2 else 1.0
    if sol.objective < -tol * scale:
        return AttackOutcome(CERTIFIED, None, 0.0, sol.objective, sol.objective, nominal_gamma)
    if trials is None:
        trials = boxmax.default_trials(eta)
    cap = boxmax.rounding_cap(h.n, delta)
    res = boxmax.gaussian_round(sol, h, trials, seed=seed, linf_cap=cap)
    if flips_label(res.value, y_ref):
        gamma = nominal_gamma if res.within_cap else res.blowup
        return AttackOutcome(FOUND, res.x_hat, res.linf, res.value, None, gamma)
    return AttackOutcome(UNKNOWN, None, 0.0, res.value, None, nominal_gamma)


@dataclass(frozen=True)
class BatchSummary:
    total: int
    found: int
    certified: int
    unknown: int
    errors: int
    gamma: float
    delta: float

    @property
    def robust_accuracy_lower_bound(self) -> float:
        """Certified fraction: lower bound on delta-robust accuracy."""
        return self.certified / self.total if self.total else 0.0

    @property
    def robust_error_lower_bound(self) -> float:
        """Found fraction: lower bound on (gamma*delta)-robust error."""
        return self.found / self.total if self.total else 0.0

    def to_dict(self) -> dict:
        return {
            "total": self.total,
            "found": self.found,
            "certified": self.certified,
            "unknown": self.unknown,
            "errors": self.errors,
            "gamma": self.gamma,
            "delta": self.delta,
            "robust_accuracy_lower_bound": self.robust_accuracy_lower_bound,
            "robust_error_lower_bound": self.robust_error_lower_bound,
        }


def _attack_one(args):
    f, x, y, delta, eta, mode, seed, i = args
    try:
        out = attack_ptf(f, x, delta, eta=eta, mode=mode, y=y, seed=boxmax.derive_seed(seed, i))
        return out, None
    except boxmax.SolverError as e:
        return None, str(e)


def batch_attack(
    f: PtfClassifier,
    S: LabeledSet,
    delta: float,
    eta: float = 0.01,
    seed: int = 0,
    mode: str = "label",
    jobs: int = 1,
) -> tuple[list[AttackOutcome | None], list[str | None], BatchSummary]:
    """Attack every point of S; deterministic per (inputs, seed, mode).

    Returns order-preserving per-point outcomes, per-point error messages
    (solver failures are recorded, not fatal), and a summary whose certified
    fraction lower-bounds delta-robust accuracy and whose found fraction
    lower-bounds the robust error at gamma*delta.
    """
    tasks = [
        (f, S.X[i], int(S.y[i]), delta, eta, mode, seed, i) for i in range(len(S))
    ]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            results = list(ex.map(_attack_one, tasks))
    else:
        results = [_attack_one(t) for t in tasks]
    outcomes = [r[0] for r in results]
    errors = [r[1] for r in results]
    n_err = sum(e is not None for e in errors)
    found = sum(1 for o in outcomes if o is not None and o.verdict == FOUND)
    cert = sum(1 for o in outcomes if o is not None and o.verdict == CERTIFIED)
    unk = sum(1 for o in outcomes if o is not None and o.verdict == UNKNOWN)
    gammas = [o.gamma_used for o in outcomes if o is not None]
    summary = BatchSummary(
        total=len(S),
        found=found,
        certified=cert,
        unknown=unk,
        errors=n_err,
        gamma=max(gammas) if gammas else 1.0,
        delta=delta,
    )
    return outcomes, errors, summary
