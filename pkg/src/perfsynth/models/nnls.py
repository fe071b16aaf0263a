import numpy as np

from ..errors import ConvergenceError, NumericError, ShapeError

KKT_RTOL = 1e-8


def nnls(A, b, max_cycles=None):
    """
    Solve ``min ||A x - b||_2`` subject to ``x >= 0``.

    Lawson-Hanson active-set method. Each outer cycle moves the coordinate
    with the largest positive dual value into the passive set, then the
    inner loop steps back towards feasibility whenever the unconstrained
    solution on the passive set leaves the orthant.

    Parameters
    ----------
    A : array_like, shape (m, p)
    b : array_like, shape (m,)
    max_cycles : int, optional
        Cap on outer cycles, ``3 * p`` by default.

    Returns
    -------
    x : numpy.ndarray, shape (p,)

    Raises
    ------
    NumericError
        On non-finite input.
    ConvergenceError
        When the cycle cap is hit; ``exc.best`` holds the last iterate.
    """
    A = np.asarray(A, dtype=float)
    b = np.asarray(b, dtype=float)
    if A.ndim != 2 or b.ndim != 1 or A.shape[0] != b.shape[0] or A.size == 0:
        raise ShapeError(f"nnls needs A (m, p) and b (m,), got {A.shape} and {b.shape}")
    if not (np.all(np.isfinite(A)) and np.all(np.isfinite(b))):
        raise NumericError("nnls input contains non-finite values")
    m, p = A.shape
    if max_cycles is None:
        max_cycles = 3 * p

    # work on unit-norm columns; x >= 0 is invariant under positive scaling
    norms = np.linalg.norm(A, axis=0)
    norms[norms == 0] = 1.0
    As = A / norms

    tol = 10 * np.finfo(float).eps * max(m, p) * max(1.0, np.abs(b).max()) * max(1.0, np.sqrt(m))
    x = np.zeros(p)
    passive = np.zeros(p, dtype=bool)
    w = As.T @ (b - As @ x)
    cycles = 0
    while not passive.all() and np.any(w[~passive] > tol):
        if cycles >= max_cycles:
            raise ConvergenceError(f"nnls did not converge in {max_cycles} cycles",
                                   best=x / norms)
        cycles += 1
        cand = np.where(passive, -np.inf, w)
        passive[int(np.argmax(cand))] = True

        while True:
            z = np.zeros(p)
            z[passive] = np.linalg.lstsq(As[:, passive], b, rcond=None)[0]
            if np.all(z[passive] > 0):
                x = z
                break
            blocking = passive & (z <= 0)
            alpha = np.min(x[blocking] / (x[blocking] - z[blocking]))
            x = x + alpha * (z - x)
            passive &= x > tol
            x[~passive] = 0.0
            if not passive.any():
                break
        w = As.T @ (b - As @ x)

    return x / norms


def kkt_residual(A, b, x):
    """Largest violation of the optimality conditions, relative to ||b||.

    For ``x_j > 0`` the gradient must vanish; for ``x_j = 0`` it must be
    non-negative. Returns 0 for an exact optimum.
    """
    A = np.asarray(A, dtype=float)
    b = np.asarray(b, dtype=float)
    grad = A.T @ (A @ x - b)
    scale = max(np.linalg.norm(b), np.finfo(float).tiny)
    viol = np.where(x > 0, np.abs(grad), np.maximum(-grad, 0.0))
    return float(viol.max() / scale) if viol.size else 0.0
