"""Domain types and elementary matrix operations.

Covariance paths are stored as ``(T, p, p)`` float arrays; a single
symmetric matrix is a ``(p, p)`` array.  Symmetry is enforced eagerly on
construction (via :func:`sym`) so that no update can introduce drift.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


def sym(a: np.ndarray) -> np.ndarray:
    """Symmetrize ``a`` as (a + a.T) / 2 (over the last two axes)."""
    return 0.5 * (a + np.swapaxes(a, -1, -2))


def frobenius_norm(a: np.ndarray) -> float:
    """Frobenius norm of a matrix (or the stacked norm of an array)."""
    return float(np.sqrt(np.sum(np.asarray(a, dtype=float) ** 2)))


def offdiag_l1(a: np.ndarray) -> float:
    """Sum of absolute off-diagonal entries, over ordered pairs (u, v), u != v."""
    a = np.asarray(a, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError("offdiag_l1 expects a square matrix")
    return float(np.abs(a).sum() - np.abs(np.diag(a)).sum())


def offdiag(a: np.ndarray) -> np.ndarray:
    """Copy of ``a`` (stacked or single) with zeroed diagonals."""
    out = np.array(a, dtype=float, copy=True)
    if out.ndim == 2:
        np.fill_diagonal(out, 0.0)
    else:
        p = out.shape[-1]
        out[..., np.arange(p), np.arange(p)] = 0.0
    return out


def project_psd(s: np.ndarray, floor: float = 0.0) -> np.ndarray:
    """Project onto ``{M : M >= floor * I}`` in Frobenius norm.

    Works on a single symmetric matrix or a stack of them.  Computed by
    eigendecomposition with eigenvalues clipped from below at ``floor``.
    Slices already satisfying the constraint (detected by a Cholesky
    test, far cheaper than eigh) are returned as-is.
    """
    from scipy.linalg.lapack import dpotrf

    s = sym(np.asarray(s, dtype=float))
    if not np.all(np.isfinite(s)):
        raise ValueError("project_psd requires finite entries")

    single = s.ndim == 2
    stack = s[None] if single else s.reshape(-1, *s.shape[-2:])
    p = stack.shape[-1]
    eye = floor * np.eye(p)
    out = stack.copy()
    todo = []
    for i in range(stack.shape[0]):
        _, info = dpotrf(stack[i] - eye, lower=1)
        if info != 0:
            todo.append(i)
    if todo:
        w, q = np.linalg.eigh(stack[todo])
        w = np.maximum(w, floor)
        out[todo] = sym(np.einsum("...ik,...k,...jk->...ij", q, w, q))
    return out[0] if single else out.reshape(s.shape)


@dataclass(frozen=True)
class ObservationSeries:
    """A sample of T observations of a p-dimensional vector, row t = X_t."""

    data: np.ndarray

    def __post_init__(self):
        data = np.atleast_2d(np.asarray(self.data, dtype=float))
        if data.ndim != 2 or data.shape[0] < 1 or data.shape[1] < 1:
            raise ValueError("observation series must be a T x p matrix, T,p >= 1")
        if not np.all(np.isfinite(data)):
            raise ValueError("observation series contains non-finite entries")
        object.__setattr__(self, "data", data)

    @property
    def T(self) -> int:
        return self.data.shape[0]

    @property
    def p(self) -> int:
        return self.data.shape[1]

    def outer_products(self) -> np.ndarray:
        """The (T, p, p) stack of rank-one matrices X_t X_t'."""
        return np.einsum("ti,tj->tij", self.data, self.data)


GOLDEN_STEP_LIMIT = (np.sqrt(5.0) + 1.0) / 2.0


@dataclass(frozen=True)
class PenaltySpec:
    """Penalty levels and algorithm constants for one solve.

    ``epsilon`` is the eigenvalue floor of the feasible set, ``beta`` the
    quadratic penalty of the splitting, ``gamma`` the dual step scale
    (must lie in (0, (sqrt(5)+1)/2)).
    """

    lambda1: float
    lambda2: float
    epsilon: float = 0.01
    beta: float = 1.0
    gamma: float = 1.61

    def __post_init__(self):
        if self.lambda1 < 0:
            raise ValueError("lambda1 must be >= 0")
        if self.lambda2 <= 0:
            raise ValueError("lambda2 must be > 0")
        if self.epsilon <= 0:
            raise ValueError("epsilon must be > 0")
        if self.beta <= 0:
            raise ValueError("beta must be > 0")
        if not 0.0 < self.gamma < GOLDEN_STEP_LIMIT:
            raise ValueError("gamma must lie in (0, (sqrt(5)+1)/2)")


@dataclass(frozen=True)
class WeightSet:
    """Entrywise LASSO weights and per-time fusion weights.

    ``xi1`` has shape (T, p, p): symmetric, nonnegative, zero diagonal.
    ``xi2`` has shape (T - 1,): strictly positive, entry i is the weight
    of the difference between times i+2 and i+1 (1-based t = 2..T).
    """

    xi1: np.ndarray
    xi2: np.ndarray

    def __post_init__(self):
        xi1 = np.asarray(self.xi1, dtype=float)
        xi2 = np.asarray(self.xi2, dtype=float)
        if xi1.ndim != 3 or xi1.shape[1] != xi1.shape[2]:
            raise ValueError("xi1 must have shape (T, p, p)")
        if xi2.shape != (xi1.shape[0] - 1,):
            raise ValueError("xi2 must have shape (T - 1,)")
        p = xi1.shape[1]
        if np.any(xi1[:, np.arange(p), np.arange(p)] != 0.0):
            raise ValueError("xi1 diagonals must be zero")
        if np.any(xi1 < 0):
            raise ValueError("xi1 entries must be >= 0")
        if xi2.size and np.min(xi2) <= 0:
            raise ValueError("xi2 entries must be > 0")
        object.__setattr__(self, "xi1", xi1)
        object.__setattr__(self, "xi2", xi2)


@dataclass(frozen=True)
class Segmentation:
    """Ordered break indices plus one covariance estimate per block.

    A break at t (1-based, 2 <= t <= T) means the estimate changes
    between t-1 and t.  Blocks partition {1..T}; block j runs from
    break j-1 (or 1) up to break j - 1 (or T).
    """

    breakpoints: tuple
    block_covs: tuple
    T: int

    def __post_init__(self):
        bps = tuple(int(b) for b in self.breakpoints)
        if any(b2 <= b1 for b1, b2 in zip(bps, bps[1:])):
            raise ValueError("breakpoints must be strictly increasing")
        if any(not 1 < b <= self.T for b in bps):
            raise ValueError("breakpoints must lie in (1, T]")
        if len(self.block_covs) != len(bps) + 1:
            raise ValueError("need exactly one block covariance per block")
        object.__setattr__(self, "breakpoints", bps)
        object.__setattr__(self, "block_covs", tuple(np.asarray(c, dtype=float) for c in self.block_covs))

    @property
    def n_breaks(self) -> int:
        return len(self.breakpoints)

    def block_starts(self) -> list:
        """1-based start index of every block."""
        return [1, *self.breakpoints]

    def block_bounds(self) -> list:
        """(start, end) inclusive 1-based bounds of every block."""
        starts = self.block_starts()
        ends = [*(b - 1 for b in self.breakpoints), self.T]
        return list(zip(starts, ends))

    def expand_path(self) -> np.ndarray:
        """Piecewise-constant (T, p, p) path implied by the blocks."""
        p = self.block_covs[0].shape[0]
        path = np.empty((self.T, p, p))
        for (start, end), cov in zip(self.block_bounds(), self.block_covs):
            path[start - 1 : end] = cov
        return path
