"""Provable l-inf adversarial examples and robustness certificates for
degree-<=2 polynomial threshold classifiers and 2-layer ReLU networks, plus a
cutting-plane robust learner driven by the attack as a separation oracle."""

from .attack import AttackOutcome, attack_ptf, batch_attack
from .boxmax import (
    BoxMaxResult,
    SdpSolution,
    SolverError,
    brute_force_boxmax,
    build_sdp,
    exact_boxmax,
    gaussian_round,
    maximize_linear,
    maximize_quadratic,
    solve_sdp,
)
from .learner import LearnResult, robust_learn, sample_size, separation_oracle
from .neural import TwoLayerNet, attack_net, pgd_attack, reduce_net, target_second_best
from .poly import (
    LabeledSet,
    PtfClassifier,
    QuadPoly,
    evaluate,
    negate_for_label,
    robust_empirical_error,
    shift,
)

__all__ = [
    "AttackOutcome", "attack_ptf", "batch_attack",
    "BoxMaxResult", "SdpSolution", "SolverError", "brute_force_boxmax",
    "build_sdp", "exact_boxmax", "gaussian_round", "maximize_linear",
    "maximize_quadratic", "solve_sdp",
    "LearnResult", "robust_learn", "sample_size", "separation_oracle",
    "TwoLayerNet", "attack_net", "pgd_attack", "reduce_net", "target_second_best",
    "LabeledSet", "PtfClassifier", "QuadPoly", "evaluate", "negate_for_label",
    "robust_empirical_error", "shift",
]

__version__ = "0.1.0"
