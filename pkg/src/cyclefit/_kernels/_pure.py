"""Pure numpy reference implementation of the hot kernels.

Kept intentionally close to the compiled version: Householder QR, the same
relative rank threshold, and the same resample loop structure, so the two
backends agree to floating-point noise.
"""

from __future__ import annotations

import numpy as np
from scipy.linalg import solve_triangular

RANK_RCOND = 1e-10


def lstsq_qr(X: np.ndarray, y: np.ndarray) -> tuple[np.ndarray | None, bool]:
    """Solve min ||y - X b|| by QR; (None, False) when X is rank deficient."""
    n, p = X.shape
    if n < p:
        return None, False
    Q, R = np.linalg.qr(X, mode="reduced")
    diag = np.abs(np.diag(R))
    if diag.max() == 0.0 or diag.min() <= RANK_RCOND * diag.max():
        return None, False
    beta = solve_triangular(R, Q.T @ y)
    return beta, True


def bootstrap_curves(
    y: np.ndarray,
    design: np.ndarray,
    user_ptr: np.ndarray,
    draws: np.ndarray,
    grid_design: np.ndarray,
) -> tuple[np.ndarray, np.ndarray]:
    """Refit the model on each user-resample and evaluate it on the grid.

    ``y`` and ``design`` hold all observations grouped by user (per
    ``user_ptr``); ``draws[b]`` lists the user indices drawn for resample
    ``b``. Returns (curves, ok) where failed (rank-deficient) refits leave a
    zero row and ok[b] = False.
    """
    n_b = draws.shape[0]
    n_grid = grid_design.shape[0]
    curves = np.zeros((n_b, n_grid))
    ok = np.zeros(n_b, dtype=bool)
    for b in range(n_b):
        rows = np.concatenate(
            [np.arange(user_ptr[u], user_ptr[u + 1]) for u in draws[b]]
        )
        beta, good = lstsq_qr(design[rows], y[rows])
        if good:
            curves[b] = grid_design @ beta
            ok[b] = True
    return curves, ok
