import math

import numpy as np
import pytest

from trace_sketch.operators import SparseSymmetricMatrix, from_dense, gen_random_spd


def random_symmetric(n: int, seed: int, scale: float = 1.0) -> np.ndarray:
    rng = np.random.default_rng(seed)
    a = rng.standard_normal((n, n))
    return scale * 0.5 * (a + a.T)


def spd_operator(a: np.ndarray, pad: float = 0.01):
    """Wrap a dense SPD matrix with a true (slightly padded) spectral interval."""
    lam = np.linalg.eigvalsh(a)
    interval = (float(lam[0]) * (1 - pad), float(lam[-1]) * (1 + pad))
    return from_dense(a, spectral_interval=interval, check=False)


def random_spd(n: int, kappa: float, seed: int):
    """(dense matrix, operator with true interval)."""
    a = gen_random_spd(n, kappa, seed)
    return a, spd_operator(a)


def sparse_from_dense(a: np.ndarray) -> SparseSymmetricMatrix:
    rows, cols = np.tril_indices(a.shape[0])
    vals = a[rows, cols]
    keep = vals != 0.0
    return SparseSymmetricMatrix(a.shape[0], rows[keep], cols[keep], vals[keep])


def binom_3sigma(p: float, trials: int) -> float:
    p = min(max(p, 0.0), 1.0)
    return 3.0 * math.sqrt(p * (1.0 - p) / trials)


def path_graph(n: int) -> SparseSymmetricMatrix:
    rows = np.arange(1, n)
    cols = np.arange(0, n - 1)
    return SparseSymmetricMatrix(n, rows, cols, np.ones(n - 1))


def complete_graph(n: int) -> SparseSymmetricMatrix:
    rows, cols = np.tril_indices(n, k=-1)
    return SparseSymmetricMatrix(n, rows, cols, np.ones(rows.size))


@pytest.fixture
def k3():
    return complete_graph(3)
