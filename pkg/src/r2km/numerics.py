"""Dense linear algebra used by every model.

Matrices are plain float64 ``numpy`` arrays with samples as rows. The only
solver is a Cholesky-based symmetric positive definite solve; explicit
inverses are never formed.
"""

from __future__ import annotations

import logging

import numpy as np
from scipy import linalg

from .errors import DimensionError, ParameterError, SingularSystemError

log = logging.getLogger(__name__)

JITTER_LADDER = (1e-12, 1e-10, 1e-8)
EXTENDED = np.longdouble
SYMMETRY_RTOL = 1e-10


def as_matrix(a, name="matrix"):
    """Return ``a`` as a finite 2-D float64 array (1-D input becomes a column)."""
    arr = np.asarray(a, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr.reshape(-1, 1)
    if arr.ndim != 2:
        raise DimensionError(f"{name} must be 2-D, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ParameterError(f"{name} contains NaN or Inf")
    return arr


def matmul(a, b):
    a = as_matrix(a, "a")
    b = as_matrix(b, "b")
    if a.shape[1] != b.shape[0]:
        raise DimensionError(f"cannot multiply {a.shape} by {b.shape}")
    return a @ b


def cholesky_with_jitter(a):
    """Factor a symmetric matrix, adding ``tau * I`` only if plain Cholesky fails.

    Returns ``(factor, tau)`` where ``factor`` is the ``scipy.linalg.cho_factor``
    pair and ``tau`` is the jitter that was needed (0.0 when none).
    """
    a = as_matrix(a, "a")
    n, m = a.shape
    if n != m:
        raise DimensionError(f"expected a square matrix, got {a.shape}")
    scale = max(1.0, float(np.max(np.abs(a))) if a.size else 1.0)
    if np.max(np.abs(a - a.T), initial=0.0) > SYMMETRY_RTOL * scale:
        raise ParameterError("matrix is not symmetric")
    a = 0.5 * (a + a.T)

    for tau in (0.0,) + JITTER_LADDER:
        shifted = a if tau == 0.0 else a + tau * np.eye(n)
        try:
            factor = linalg.cho_factor(shifted, lower=True, check_finite=False)
        except linalg.LinAlgError:
            continue
        if tau:
            log.debug("cholesky needed jitter %.0e on a %dx%d system", tau, n, n)
        return factor, tau
    raise SingularSystemError(
        f"cholesky failed on a {n}x{n} system even with jitter {JITTER_LADDER[-1]:g}"
    )


def solve_spd(a, b, refine=True, max_steps=10):
    """Solve ``a @ x = b`` for symmetric positive definite ``a``.

    The Cholesky factorization runs in float64. With ``refine`` the solution
    is polished by iterative refinement with residuals accumulated in
    ``numpy.longdouble`` and returned in that dtype. ``a`` may itself be a
    longdouble matrix; it is rounded only for the factorization, so the
    refined solution answers the unrounded system. This matters at the grid
    corners (eta = lambda = 1e-5) where ``cond(a)`` reaches ~1e12. A 1-D ``b``
    gives a 1-D result.
    """
    squeeze = np.ndim(b) == 1
    a_in = np.asarray(a)
    b_in = np.asarray(b)
    b = as_matrix(b_in, "b")
    a = as_matrix(a_in, "a")
    if b.shape[0] != a.shape[0]:
        raise DimensionError(f"rhs has {b.shape[0]} rows, system has {a.shape[0]}")
    factor, tau = cholesky_with_jitter(a)
    x = linalg.cho_solve(factor, b, check_finite=False)
    if refine:
        a_ext = a_in.astype(EXTENDED)
        b_ext = b_in.astype(EXTENDED).reshape(b.shape)
        x = _refine(a_ext, b_ext, tau, factor, x, max_steps)
    return x.ravel() if squeeze else x


def _refine(a_ext, b_ext, tau, factor, x, max_steps):
    if not np.array_equal(a_ext, a_ext.T):
        a_ext = 0.5 * (a_ext + a_ext.T)
    if tau:
        a_ext = a_ext + tau * np.eye(a_ext.shape[0], dtype=EXTENDED)
    x = x.astype(EXTENDED)
    tol = 8 * np.finfo(EXTENDED).eps
    prev = np.inf
    for _ in range(max_steps):
        r = b_ext - a_ext @ x
        d = linalg.cho_solve(factor, r.astype(np.float64), check_finite=False)
        x += d
        if not np.all(np.isfinite(x)):
            raise SingularSystemError("iterative refinement diverged")
        step = float(np.max(np.abs(d), initial=0.0))
        # stop once converged or once corrections no longer shrink (noise floor)
        if step <= tol * max(1.0, float(np.max(np.abs(x)))) or step > 0.5 * prev:
            break
        prev = step
    return x
