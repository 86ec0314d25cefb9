import numpy as np
import pytest

from greenbvp import (
    LinearOperator,
    cauchy_value,
    integrate_fundamental,
    integrate_fundamental_batch,
    transition,
)


def test_double_integrator_fundamental(second_order_op):
    fs = integrate_fundamental(second_order_op)
    for t in (0.0, 0.3, 1.0):
        assert fs.phi([t])[0] == pytest.approx(np.array([[1.0, t], [0.0, 1.0]]), abs=1e-12)


def test_fourth_order_polynomial_row(const_fourth_op):
    fs = integrate_fundamental(const_fourth_op)
    for t in (0.25, 0.8, 1.0):
        row = fs.phi([t])[0][0]
        assert row == pytest.approx([1.0, t, t ** 2 / 2, t ** 3 / 6], abs=1e-12)


def test_harmonic_oscillator_closed_form():
    op = LinearOperator.from_exprs(1, 2.0, ["1", "0"])
    fs = integrate_fundamental(op)
    for t in (0.5, 1.0, 2.0):
        expected = np.array([[np.cos(t), np.sin(t)], [-np.sin(t), np.cos(t)]])
        assert fs.phi([t])[0] == pytest.approx(expected, abs=1e-12)


def test_harmonic_oscillator_rk_path_matches():
    op = LinearOperator.from_exprs(1, 2.0, ["1", "0"])
    fs = integrate_fundamental(op, tol=1e-12, force_rk=True)
    t = 1.7
    expected = np.array([[np.cos(t), np.sin(t)], [-np.sin(t), np.cos(t)]])
    assert fs.phi([t])[0] == pytest.approx(expected, abs=1e-10)


def test_transition_identity_and_shift(second_order_op):
    op = LinearOperator.from_exprs(1, 3.0, ["0", "0"])
    fs = integrate_fundamental(op)
    assert transition(fs, 1.2, 1.2) == pytest.approx(np.eye(2), abs=1e-12)
    assert transition(fs, 1.0, 3.0) == pytest.approx(np.array([[1.0, 2.0], [0.0, 1.0]]),
                                                     abs=1e-11)


@pytest.mark.parametrize("n", [1, 2, 3])
def test_transition_group_property(n):
    rng = np.random.default_rng(1234 + n)
    coeffs = [f"{c:.4f}" for c in rng.uniform(-1.5, 1.5, size=2 * n)]
    op = LinearOperator.from_exprs(n, 2.0, coeffs)
    fs = integrate_fundamental(op)
    for _ in range(4):
        r, s, t = np.sort(rng.uniform(0, 2.0, size=3))
        lhs = transition(fs, s, t) @ transition(fs, r, s)
        rhs = transition(fs, r, t)
        assert np.abs(lhs - rhs).max() < 1e-10


def test_cauchy_kernel_closed_forms(second_order_op, const_fourth_op):
    fs2 = integrate_fundamental(second_order_op)
    assert cauchy_value(fs2, 0.9, 0.2) == pytest.approx(0.7, abs=1e-12)
    fs4 = integrate_fundamental(const_fourth_op)
    assert cauchy_value(fs4, 0.9, 0.3) == pytest.approx(0.6 ** 3 / 6, abs=1e-12)
    osc = integrate_fundamental(LinearOperator.from_exprs(1, 2.0, ["1", "0"]))
    assert cauchy_value(osc, 1.5, 0.4) == pytest.approx(np.sin(1.1), abs=1e-11)


def test_cauchy_requires_ordered_arguments(second_order_op):
    fs = integrate_fundamental(second_order_op)
    with pytest.raises(ValueError):
        cauchy_value(fs, 0.2, 0.9)


def test_cauchy_diagonal_contact(const_fourth_op):
    # k(t, t) = 0 and its first 2n-2 t-derivatives vanish at t = s
    fs = integrate_fundamental(const_fourth_op)
    s = 0.4
    h = 1e-5
    vals = np.array([cauchy_value(fs, s + k * h, s) for k in range(5)])
    assert abs(vals[0]) < 1e-12
    d1 = (vals[1] - vals[0]) / h
    d2 = (vals[2] - 2 * vals[1] + vals[0]) / h ** 2
    assert abs(d1) < 1e-4
    assert abs(d2) < 1e-4


def test_tolerance_halving_is_convergent():
    # exercise the adaptive integrator (fast path disabled) against cos/sin
    op = LinearOperator.from_exprs(1, 2.0, ["1", "0"])
    t = 2.0
    expected = np.array([[np.cos(t), np.sin(t)], [-np.sin(t), np.cos(t)]])
    tols = [1e-5, 5e-6, 2.5e-6, 1.25e-6, 6.25e-7]
    errors = []
    for tol in tols:
        fs = integrate_fundamental(op, tol=tol, force_rk=True)
        errors.append(np.abs(fs.phi([t])[0] - expected).max())
    for a, b in zip(errors, errors[1:]):
        assert b <= 4 * a + 1e-15
    assert errors[-1] < errors[0]


def test_segments_never_straddle_breakpoints(parabolic_weight_op):
    from greenbvp import extend_to_double

    ext = extend_to_double(parabolic_weight_op)
    fs = integrate_fundamental(ext, lam=1.0)
    for b in ext.breakpoints():
        assert np.min(np.abs(fs.nodes - b)) < 1e-12


def test_batched_matches_single(quartic_weight_op):
    lams = np.array([-2.0, 0.5, 2.0])
    batch = integrate_fundamental_batch(quartic_weight_op, lams, dense=False)
    ends = batch.phi_end()
    for i, lam in enumerate(lams):
        single = integrate_fundamental(quartic_weight_op, lam, dense=False)
        assert np.abs(ends[i] - single.phi_end()[0]).max() < 1e-7 * np.abs(ends[i]).max()


def test_nonsingular_transition_matrices(quartic_weight_op):
    fs = integrate_fundamental(quartic_weight_op, lam=2.0)
    for t in np.linspace(0, 2, 9):
        assert abs(np.linalg.det(fs.phi([t])[0])) > 1e-8


def test_invalid_tolerance():
    op = LinearOperator.from_exprs(1, 1.0, ["0", "0"])
    with pytest.raises(ValueError):
        integrate_fundamental(op, tol=0.0)
