import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ptfrobust.hardness import (
    GadgetInstance,
    gen_appendix_gadget,
    gen_main_gadget,
    gen_redundant_gadget,
    main_gadget_size,
    monomial_row,
    redundancy_count_inequalities,
    redundancy_eps_threshold,
    uniqueness_dimension,
    verify_counts,
    verify_no_robust_ptf_candidates,
    verify_pair_separation,
    verify_robustness,
    verify_uniqueness_rank,
    verify_zero_plain_error,
)
from ptfrobust.poly import PtfClassifier, QuadPoly


def qp_matrix(n, rng=None, density=1.0):
    if rng is None:
        entries = np.ones((n, n))
    else:
        entries = rng.uniform(0.5, 2.0, (n, n)) * rng.choice([-1.0, 1.0], (n, n))
        entries[rng.uniform(size=(n, n)) > density] = 0.0
    A = np.triu(entries, 1)
    A = A + A.T
    if not np.any(A):
        A[0, 1] = A[1, 0] = 1.0
    return A


# --- main gadget -----------------------------------------------------------------

def test_main_gadget_counts():
    assert main_gadget_size(2) == 26
    assert main_gadget_size(3) == 54
    inst = gen_main_gadget(qp_matrix(2), s=150.0)
    assert len(inst.S) == 26
    assert verify_counts(inst)
    inst3 = gen_main_gadget(qp_matrix(3), s=150.0)
    assert len(inst3.S) == 54


def test_main_gadget_preconditions():
    with pytest.raises(ValueError):
        gen_main_gadget(qp_matrix(2), s=100.0)
    with pytest.raises(ValueError):
        gen_main_gadget(np.zeros((2, 2)), s=150.0)
    with pytest.raises(ValueError):
        gen_main_gadget(np.eye(3), s=150.0)  # nonzero diagonal
    with pytest.raises(ValueError):
        gen_main_gadget(np.zeros((1, 1)), s=150.0)


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 10**6), st.integers(2, 5))
def test_main_gadget_zero_plain_error(seed, n):
    rng = np.random.default_rng(seed)
    inst = gen_main_gadget(qp_matrix(n, rng, density=0.7), s=120.0 + seed % 100)
    assert verify_zero_plain_error(inst)
    assert verify_counts(inst)


def test_main_gadget_scaling_preserves_yes_case():
    A = qp_matrix(2)  # a_12 coefficient 2 after doubling
    inst = gen_main_gadget(A, s=150.0)
    a = np.asarray(inst.params["a_scaled"])
    s = inst.params["s"]
    assert np.all((np.abs(a[np.triu_indices(2, 1)]) > max(10.0, 2 * inst.params["epsilon"]))
                  | (a[np.triu_indices(2, 1)] == 0))
    # max over {-1,1}^2 of the scaled form is a_12 (coefficient of x1 x2)
    assert abs(a[0, 1]) < s  # still the YES case


def test_main_gadget_yes_case_robustness_exact_and_grid():
    inst = gen_main_gadget(qp_matrix(2), s=150.0)
    ok, bad = verify_robustness(inst)
    assert ok, bad
    ok2, bad2 = verify_robustness(inst, oracle="grid", grid_points=101)
    assert ok2, bad2


def test_main_gadget_zero_coefficient_pairs():
    # a sparse matrix with a zero off-diagonal pair still yields a consistent set
    A = np.zeros((3, 3))
    A[0, 1] = A[1, 0] = 1.0  # pair (0,2) and (1,2) have zero coefficients
    inst = gen_main_gadget(A, s=200.0)
    assert verify_zero_plain_error(inst)
    assert verify_counts(inst)


# --- appendix gadget -------------------------------------------------------------

@pytest.fixture
def appendix_yes():
    # beta = 2.0 = max over the unit cube of x^T A x: strict YES case
    return gen_appendix_gadget(qp_matrix(2), beta=2.5, delta=0.125, m=12, seed=5)


def test_appendix_counts(appendix_yes):
    assert len(appendix_yes.S) == 25
    assert verify_counts(appendix_yes)


def test_appendix_preconditions():
    with pytest.raises(ValueError):
        gen_appendix_gadget(qp_matrix(2), beta=1.0, delta=0.1, m=9)  # m <= (n+1)^2
    with pytest.raises(ValueError):
        gen_appendix_gadget(qp_matrix(2), beta=1.0, delta=0.1, m=12, rho=0.1)


def test_appendix_zero_plain_error(appendix_yes):
    assert verify_zero_plain_error(appendix_yes)


def test_appendix_pair_separation_bit_exact(appendix_yes):
    assert verify_pair_separation(appendix_yes)


def test_appendix_event_and_labels(appendix_yes):
    assert appendix_yes.event_holds
    # under the gradient anti-concentration event, u points get +1, v points -1
    for iu, iv in appendix_yes.params["pairs"]:
        assert appendix_yes.S.y[iu] == 1
        assert appendix_yes.S.y[iv] == -1


def test_appendix_robustness(appendix_yes):
    ok, bad = verify_robustness(appendix_yes)
    assert ok, bad
    ok2, _ = verify_robustness(appendix_yes, oracle="grid", grid_points=101)
    assert ok2


def test_appendix_event_checked_directly(appendix_yes):
    X = np.asarray(appendix_yes.params["base_x"])
    A = np.asarray(appendix_yes.params["A_source"])
    d = appendix_yes.delta
    assert np.all(np.abs(X @ A.T) > d * np.sum(np.abs(A), axis=1)[None, :])


def test_appendix_no_case_flips_at_threshold_point():
    # beta below the cube maximum: the intended classifier is not robust at
    # (0, alpha), witnessed by the vertex oracle on the zero-diagonal form
    inst = gen_appendix_gadget(qp_matrix(2), beta=1.0, delta=0.125, m=12, seed=7)
    verdict = verify_no_robust_ptf_candidates(inst, inst.intended, inst.delta)
    assert verdict.zero_plain_error
    assert not verdict.ok
    assert verdict.failures == (len(inst.S) - 1,)


def test_constant_classifier_fails_on_mixed_labels():
    inst = gen_main_gadget(qp_matrix(2), s=150.0)
    const = PtfClassifier(QuadPoly(np.zeros((3, 3)), np.zeros(3), 1.0))
    verdict = verify_no_robust_ptf_candidates(inst, const, inst.delta)
    assert not verdict.zero_plain_error
    assert not verdict.ok


def test_intended_robust_verdict_on_yes_main():
    inst = gen_main_gadget(qp_matrix(2), s=150.0)
    verdict = verify_no_robust_ptf_candidates(inst, inst.intended, inst.delta)
    assert verdict.ok


# --- uniqueness rank -------------------------------------------------------------

def test_uniqueness_dimension_formula():
    assert uniqueness_dimension(3) == 15
    assert uniqueness_dimension(2) == 10


def test_monomial_row_layout():
    row = monomial_row(np.array([2.0, 3.0]), 5.0)
    # (1, x1, x2, x1^2, x1x2, x2^2, x1z, x2z, z^2, z)
    assert np.allclose(row, [1, 2, 3, 4, 6, 9, 10, 15, 25, 5])


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 10**6), st.sampled_from([2, 3]))
def test_uniqueness_rank_and_null_direction(seed, n):
    rng = np.random.default_rng(seed)
    m = 12 if n == 2 else 20
    inst = gen_appendix_gadget(qp_matrix(n, rng), beta=2.0, delta=0.125, m=m, seed=seed)
    rep = verify_uniqueness_rank(inst)
    assert rep.numerical_rank == rep.expected_rank == rep.r - 1
    assert rep.null_dimension == 1
    assert rep.null_cosine >= 1.0 - 1e-8


# --- redundant gadget ------------------------------------------------------------

def test_redundant_counts_and_structure():
    with pytest.warns(UserWarning):
        inst = gen_redundant_gadget(qp_matrix(3), beta=3.0, delta=0.125, seed=1)
    assert len(inst.S) == 81
    assert verify_counts(inst)
    assert verify_zero_plain_error(inst)
    assert verify_pair_separation(inst)


def test_redundant_rejects_small_n():
    with pytest.raises(ValueError):
        gen_redundant_gadget(qp_matrix(2), beta=1.0, delta=0.1)


def test_redundant_size_guard():
    with pytest.raises(ValueError):
        gen_redundant_gadget(np.zeros((9, 9)), beta=1.0, delta=0.1)


def test_redundant_jitter_perturbs_type_a():
    with pytest.warns(UserWarning):
        inst = gen_redundant_gadget(qp_matrix(3), beta=3.0, delta=0.125, seed=2, jitter=True)
    alpha = inst.params["alpha"]
    type_a = inst.S.X[inst.S.X[:, -1] == alpha]
    # jittered copies are distinct but still classified +1
    assert len(np.unique(type_a, axis=0)) >= len(type_a) - 1
    assert verify_zero_plain_error(inst)


def test_redundancy_count_inequalities():
    # epsilon >= 1/3 always violates the first inequality
    for n in range(3, 9):
        assert not redundancy_count_inequalities(n, 1 / 3)[0]
        thr = redundancy_eps_threshold(n)
        eps_lo, eps_hi = thr - 1e-6, thr + 1e-6
        assert all(redundancy_count_inequalities(n, eps_lo))
        assert not all(redundancy_count_inequalities(n, eps_hi))
    # the asymptotic 2/7 tolerance needs n beyond desk scale
    assert redundancy_eps_threshold(3) < 2 / 7
    assert redundancy_eps_threshold(30) > 2 / 7


def test_gadget_json_roundtrip():
    inst = gen_main_gadget(qp_matrix(2), s=150.0)
    d = inst.to_dict()
    assert d["schema"] == "gadget/1"
    inst2 = GadgetInstance.from_dict(d)
    assert np.array_equal(inst.S.X, inst2.S.X)
    assert np.array_equal(inst.S.y, inst2.S.y)
    assert inst2.kind == "main"


def test_redundant_n4_point_count():
    import warnings

    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        inst = gen_redundant_gadget(qp_matrix(4), beta=50.0, delta=0.125, seed=0)
    assert len(inst.S) == 192  # 3 * 4^3
    assert verify_counts(inst)
