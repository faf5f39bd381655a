import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ptfrobust.boxmax import brute_force_boxmax, exact_boxmax, maximize_linear
from ptfrobust.poly import (
    DimensionMismatch,
    LabeledSet,
    PtfClassifier,
    QuadPoly,
    evaluate,
    evaluate_many,
    negate_for_label,
    robust_empirical_error,
    shift,
    sign_pm1,
)


def random_poly(rng, n, degree=2):
    A = rng.uniform(-1, 1, (n, n)) if degree == 2 else np.zeros((n, n))
    return QuadPoly(A, rng.uniform(-1, 1, n), rng.uniform(-1, 1))


def test_evaluate_constant():
    g = QuadPoly(np.zeros((2, 2)), np.zeros(2), 5.0)
    assert evaluate(g, [3.7, -1.2]) == 5.0
    assert g.degree() == 0


def test_evaluate_bilinear():
    g = QuadPoly([[0, 0.5], [0.5, 0]], [0, 0], 0.0)
    assert evaluate(g, [1, 1]) == pytest.approx(1.0)


def test_evaluate_1d():
    g = QuadPoly([[1.0]], [2.0], -1.0)
    assert evaluate(g, [3.0]) == pytest.approx(14.0)


def test_symmetrization():
    g = QuadPoly([[0, 2], [0, 0]], [0, 0], 0)
    assert np.array_equal(g.A, g.A.T)
    # x1*x2 coefficient preserved: 2*A_12 = 2
    assert evaluate(g, [1, 1]) == pytest.approx(2.0)


def test_dimension_mismatch():
    g = QuadPoly(np.eye(2), np.zeros(2), 0)
    with pytest.raises(DimensionMismatch):
        evaluate(g, [1.0])
    with pytest.raises(DimensionMismatch):
        shift(g, [1.0, 2.0, 3.0])


def test_shift_linear():
    g = QuadPoly.linear([2.0, -1.0], 3.0)
    h = shift(g, [1.0, 1.0])
    assert np.array_equal(h.b, g.b)
    assert h.c == pytest.approx(2.0 - 1.0 + 3.0)


def test_shift_square():
    g = QuadPoly([[1.0]], [0.0], 0.0)  # x^2
    h = shift(g, [1.0])  # (z+1)^2 = z^2 + 2z + 1
    assert h.A[0, 0] == pytest.approx(1.0)
    assert h.b[0] == pytest.approx(2.0)
    assert h.c == pytest.approx(1.0)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 10**6), st.integers(1, 8))
def test_shift_identity_property(seed, n):
    rng = np.random.default_rng(seed)
    g = random_poly(rng, n)
    x0 = rng.uniform(-3, 3, n)
    z = rng.uniform(-3, 3, n)
    lhs = evaluate(shift(g, x0), z)
    rhs = evaluate(g, x0 + z)
    assert lhs == pytest.approx(rhs, rel=1e-12, abs=1e-12)


def test_shift_identity_large_n():
    rng = np.random.default_rng(7)
    g = random_poly(rng, 64)
    x0, z = rng.uniform(-1, 1, 64), rng.uniform(-1, 1, 64)
    assert evaluate(shift(g, x0), z) == pytest.approx(evaluate(g, x0 + z), rel=1e-12)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10**6), st.sampled_from([-1, 1]))
def test_negate_for_label_property(seed, y):
    rng = np.random.default_rng(seed)
    g = random_poly(rng, 3)
    x = rng.uniform(-2, 2, 3)
    assert evaluate(negate_for_label(g, y), x) == pytest.approx(-y * evaluate(g, x), rel=1e-12)


def test_negate_for_label_signs():
    g = QuadPoly.linear([1.0], 2.0)
    assert negate_for_label(g, 1).c == -2.0
    assert negate_for_label(g, -1).c == 2.0
    with pytest.raises(ValueError):
        negate_for_label(g, 0)


def test_sign_convention():
    assert sign_pm1(0.0) == 1
    assert sign_pm1(-1e-300) == -1
    f = PtfClassifier(QuadPoly.linear([1.0], 0.0))
    assert f.classify([0.0]) == 1


def test_classifier_degree_tag():
    assert PtfClassifier(QuadPoly.linear([1.0], 0.0)).degree == 1
    assert PtfClassifier(QuadPoly.constant(3.0)).degree == 1
    assert PtfClassifier(QuadPoly([[1.0]], [0.0], 0.0)).degree == 2


def exact_oracle(g, delta):
    return exact_boxmax(g, delta)


def test_robust_error_margin_cases():
    f = PtfClassifier(QuadPoly.linear([1.0], 0.0))
    S = LabeledSet([[1.0], [-1.0]], [1, -1])
    assert robust_empirical_error(f, S, 0.5, exact_oracle) == 0.0
    # sgn(0) = +1 makes the negative point flippable at z = +1
    assert robust_empirical_error(f, S, 1.5, exact_oracle) == 1.0
    assert robust_empirical_error(f, S, 1.0, exact_oracle) == 0.5


def test_robust_error_boundary_quadratic():
    # max of x1*x2 - 1 over the unit box is 0 and sgn(0) = +1 keeps the label
    f = PtfClassifier(QuadPoly([[0, -0.5], [-0.5, 0]], [0, 0], 1.0))
    S = LabeledSet([[0.0, 0.0]], [1])
    assert robust_empirical_error(f, S, 1.0, exact_oracle) == 0.0


def test_robust_error_zero_delta_is_plain_error():
    rng = np.random.default_rng(3)
    g = random_poly(rng, 2)
    f = PtfClassifier(g)
    X = rng.uniform(-2, 2, (30, 2))
    y = rng.choice([-1, 1], 30)
    S = LabeledSet(X, y)
    plain = float(np.mean(f.classify_many(X) != y))
    assert robust_empirical_error(f, S, 0.0, exact_oracle) == pytest.approx(plain)


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 10**6))
def test_robust_error_monotone_in_delta(seed):
    rng = np.random.default_rng(seed)
    g = random_poly(rng, 2)
    f = PtfClassifier(g)
    S = LabeledSet(rng.uniform(-2, 2, (12, 2)), rng.choice([-1, 1], 12))
    errs = [robust_empirical_error(f, S, d, exact_oracle) for d in (0.0, 0.3, 0.8, 2.0)]
    assert all(a <= b for a, b in zip(errs, errs[1:]))


def test_labeled_set_csv_roundtrip(tmp_path):
    S = LabeledSet([[0.1, -2.5], [1e-17, 3.0]], [1, -1], delta=0.25)
    p = tmp_path / "d.csv"
    S.save_csv(p)
    T = LabeledSet.load_csv(p, delta=0.25)
    assert np.array_equal(S.X, T.X)
    assert np.array_equal(S.y, T.y)


def test_labeled_set_csv_rejects_bad_header():
    with pytest.raises(ValueError):
        LabeledSet.from_csv("a,b\n1,1\n")


def test_labeled_set_rejects_bad_labels():
    with pytest.raises(ValueError):
        LabeledSet([[1.0]], [0])


def test_quadpoly_json_roundtrip():
    g = QuadPoly([[1.0, 0.25], [0.25, -3.0]], [0.5, 0.0], 2.0)
    h = QuadPoly.from_json(g.to_json())
    assert np.array_equal(g.A, h.A) and np.array_equal(g.b, h.b) and g.c == h.c
