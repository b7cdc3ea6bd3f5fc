import numpy as np
import pytest

# 4x4 path matrix with edge values 0.3, -0.4, 0.2 and unit diagonal.
EX1 = np.array([
    [1.0, 0.3, 0.0, 0.0],
    [0.3, 1.0, -0.4, 0.0],
    [0.0, -0.4, 1.0, 0.2],
    [0.0, 0.0, 0.2, 1.0],
])


@pytest.fixture
def ex1():
    return EX1.copy()


def ex1_sigma(lam):
    """Covariance whose residue at ``lam`` reproduces the path matrix."""
    s = EX1.copy()
    off = s != 0
    np.fill_diagonal(off, False)
    s[off] += lam * np.sign(s[off])
    return s


def random_pd(rng, d, cond=10.0):
    q, _ = np.linalg.qr(rng.standard_normal((d, d)))
    ev = np.exp(rng.uniform(0, np.log(cond), d))
    return (q * ev) @ q.T


def random_tree_edges(rng, d):
    return [(int(rng.integers(0, i)), i) for i in range(1, d)]
