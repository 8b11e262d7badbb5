"""Symmetric positive-definite matrix kernel.

Eigendecomposition-backed matrix functions, the affine-invariant metric,
the Karcher mean, tangent-space projection at a reference point, and a
Frobenius-preserving vectorization of symmetric matrices. All operations
are pure and accept plain ndarrays; invariants are enforced by the
validation helpers at entry.
"""

from __future__ import annotations

import numpy as np

from .errors import ConvergenceError, DataError, NumericalError
from .validation import check_same_shape, check_symmetric

CONDITION_LIMIT = 1e12


def _sym(M: np.ndarray) -> np.ndarray:
    return 0.5 * (M + M.T)


def _eigh_checked(M: np.ndarray, name: str) -> tuple[np.ndarray, np.ndarray]:
    try:
        eigvals, eigvecs = np.linalg.eigh(M)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"eigendecomposition of {name} failed: {exc}") from exc
    if not np.all(np.isfinite(eigvals)):
        raise NumericalError(f"{name} produced non-finite eigenvalues")
    return eigvals, eigvecs


def spd_power(C: np.ndarray, p: float) -> np.ndarray:
    """Matrix power of a positive-definite matrix via its eigensystem.

    Returns ``U diag(lambda**p) U^T``; the output is symmetric, and
    positive definite for positive-definite input.
    """
    C = check_symmetric(C, name="matrix")
    eigvals, eigvecs = _eigh_checked(C, "matrix")
    if eigvals[0] <= 0.0:
        raise NumericalError(
            f"matrix power {p} requires positive eigenvalues "
            f"(smallest is {eigvals[0]:.3e})"
        )
    return _sym((eigvecs * eigvals**p) @ eigvecs.T)


def spd_log(C: np.ndarray) -> np.ndarray:
    """Matrix logarithm of a positive-definite matrix."""
    C = check_symmetric(C, name="matrix")
    eigvals, eigvecs = _eigh_checked(C, "matrix")
    if eigvals[0] <= 0.0:
        raise NumericalError(
            f"matrix logarithm requires positive eigenvalues "
            f"(smallest is {eigvals[0]:.3e})"
        )
    return _sym((eigvecs * np.log(eigvals)) @ eigvecs.T)


def sym_exp(S: np.ndarray) -> np.ndarray:
    """Matrix exponential of a symmetric matrix (always positive definite)."""
    S = check_symmetric(S, name="matrix")
    eigvals, eigvecs = _eigh_checked(S, "matrix")
    return _sym((eigvecs * np.exp(eigvals)) @ eigvecs.T)


def affine_invariant_distance(A: np.ndarray, B: np.ndarray) -> float:
    """Affine-invariant distance ``||log(A^{-1/2} B A^{-1/2})||_F``.

    Symmetric in its arguments, zero iff ``A == B``, and invariant under
    congruence ``X -> W X W^T`` by any invertible ``W``.
    """
    A = check_symmetric(A, name="A")
    B = check_symmetric(B, name="B")
    check_same_shape(A, B, name="distance arguments")
    whitener = spd_power(A, -0.5)
    inner = _sym(whitener @ B @ whitener)
    return float(np.linalg.norm(spd_log(inner), ord="fro"))


def riemannian_mean(covs, tol: float = 1e-8, max_iter: int = 50) -> np.ndarray:
    """Karcher mean of positive-definite matrices by fixed-point iteration.

    Starting from the arithmetic mean, iterates
    ``M <- M^{1/2} exp(mean_i log(M^{-1/2} C_i M^{-1/2})) M^{1/2}``
    until the Frobenius norm of the mean log residual drops below ``tol``.

    Raises
    ------
    ConvergenceError
        If the residual is still at least ``tol`` after ``max_iter``
        iterations; the exception carries the last residual.
    """
    mats = [check_symmetric(C, name=f"covs[{i}]") for i, C in enumerate(covs)]
    if not mats:
        raise DataError("riemannian_mean needs at least one matrix")
    for i, M in enumerate(mats[1:], start=1):
        check_same_shape(mats[0], M, name="covariance inputs")
    if not tol > 0:
        raise DataError("tol must be positive")
    stack = np.stack(mats)
    mean = _sym(stack.mean(axis=0))
    residual = np.inf
    for _ in range(max_iter):
        root = spd_power(mean, 0.5)
        inv_root = spd_power(mean, -0.5)
        logs = np.stack([spd_log(_sym(inv_root @ C @ inv_root)) for C in stack])
        step = logs.mean(axis=0)
        residual = float(np.linalg.norm(step, ord="fro"))
        if residual < tol:
            return mean
        mean = _sym(root @ sym_exp(step) @ root)
    raise ConvergenceError(
        f"Karcher mean did not converge in {max_iter} iterations "
        f"(residual {residual:.3e}, tol {tol:.1e})",
        residual=residual,
    )


def tangent_project(C: np.ndarray, mean: np.ndarray, variant: str = "sandwiched") -> np.ndarray:
    """Project a positive-definite matrix to the tangent space at ``mean``.

    Two constructions are available:

    - ``"standard"``: ``log(M^{-1/2} C M^{-1/2})`` (the whitened log map,
      whose vectorized norm equals the affine-invariant distance to the
      reference).
    - ``"sandwiched"``: the same log sandwiched between two extra
      ``M^{-1/2}`` factors, ``M^{-1/2} log(M^{-1/2} C M^{-1/2}) M^{-1/2}``.

    Both return a symmetric matrix and vanish when ``C == mean``.
    """
    if variant not in ("sandwiched", "standard"):
        raise DataError(f"unknown tangent variant {variant!r}")
    C = check_symmetric(C, name="C")
    mean = check_symmetric(mean, name="mean")
    check_same_shape(C, mean, name="tangent arguments")
    inv_root = spd_power(mean, -0.5)
    inner = spd_log(_sym(inv_root @ C @ inv_root))
    if variant == "standard":
        return inner
    return _sym(inv_root @ inner @ inv_root)


def tangent_dim(n: int) -> int:
    """Length of the vectorized tangent space of n x n symmetric matrices."""
    return n * (n + 1) // 2


def vectorize_symmetric(S: np.ndarray) -> np.ndarray:
    """Vectorize the upper triangle, row-major, with sqrt(2)-scaled off-diagonals.

    The scaling makes the map an isometry: the Euclidean norm of the output
    equals the Frobenius norm of the input.
    """
    S = check_symmetric(S, name="matrix")
    n = S.shape[0]
    rows, cols = np.triu_indices(n)
    weights = np.where(rows == cols, 1.0, np.sqrt(2.0))
    return S[rows, cols] * weights


def regularize_spd(M: np.ndarray, eps_scale: float = 1e-8) -> np.ndarray:
    """Shift a symmetric matrix onto the positive-definite cone if needed.

    Adds ``eps * I`` with ``eps = eps_scale * trace(M) / n`` when the
    smallest eigenvalue is non-positive or the condition number exceeds
    ``1e12``; well-conditioned input passes through unchanged.
    """
    M = check_symmetric(M, name="matrix")
    n = M.shape[0]
    trace = float(np.trace(M))
    if trace <= 0.0:
        raise DataError(f"cannot regularize matrix with non-positive trace {trace:g}")
    eigvals = np.linalg.eigvalsh(M)
    smallest, largest = float(eigvals[0]), float(eigvals[-1])
    well_conditioned = smallest > 0.0 and largest / smallest <= CONDITION_LIMIT
    if well_conditioned:
        return M
    shifted = M + (eps_scale * trace / n) * np.eye(n)
    if np.linalg.eigvalsh(shifted)[0] <= 0.0:
        raise NumericalError(
            "regularization shift did not restore positive definiteness"
        )
    return shifted
