import numpy as np
import pytest

from greenbvp import LinearOperator


@pytest.fixture(scope="session")
def quartic_weight_op():
    """u'''' + (t-2)^4 u on [0, 2]."""
    return LinearOperator.from_exprs(2, 2.0, ["(t-2)^4", "0", "0", "0"])


@pytest.fixture(scope="session")
def parabolic_weight_op():
    """u'''' + t(t-3) u on [0, 3/2]."""
    return LinearOperator.from_exprs(2, 1.5, ["t*(t-3)", "0", "0", "0"])


@pytest.fixture(scope="session")
def const_fourth_op():
    """u'''' on [0, 1]."""
    return LinearOperator.from_exprs(2, 1.0, ["0", "0", "0", "0"])


@pytest.fixture(scope="session")
def second_order_op():
    """u'' on [0, 1]."""
    return LinearOperator.from_exprs(1, 1.0, ["0", "0"])


def fd_stencil(offsets, derivative):
    """Finite-difference weights for the given derivative on integer offsets."""
    import math

    offsets = np.asarray(offsets, dtype=float)
    A = np.vander(offsets, increasing=True).T
    b = np.zeros(len(offsets))
    b[derivative] = math.factorial(derivative)
    return np.linalg.solve(A, b)
