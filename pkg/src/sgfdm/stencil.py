"""Weighted least-squares derivative stencils on stars.

For a star with offsets (p, q, r) and weights w_i, the unknown derivative
vector d at the centre solves ``H d = f`` with

    H = sum_i w_i^2 a_i a_i^T,      f = sum_i w_i^2 (u_i - u_c) a_i,

where a_i holds the second-order Taylor monomials of the offsets, ordered

    1D: dx, dxx
    2D: dx, dy, dxx, dyy, dxy
    3D: dx, dy, dz, dxx, dyy, dzz, dxy, dxz, dyz

The coefficient of u_i in d is therefore ``w_i^2 (H^-1 a_i)`` and the centre
coefficient is minus their sum.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg
import scipy.sparse as sp

from .errors import InvalidArgumentError, RankDeficiencyError, SingularStarError
from .stars import Star
from .weights import WeightSpec, star_weights

N_UNKNOWNS = {1: 2, 2: 5, 3: 9}
DERIVATIVE_NAMES = {
    1: ("dx", "dxx"),
    2: ("dx", "dy", "dxx", "dyy", "dxy"),
    3: ("dx", "dy", "dz", "dxx", "dyy", "dzz", "dxy", "dxz", "dyz"),
}
# rows of d holding pure second derivatives
LAPLACIAN_ROWS = {1: (1,), 2: (2, 3), 3: (3, 4, 5)}

PD_RTOL = 1e-13


def taylor_basis(offsets: np.ndarray) -> np.ndarray:
    """Rows a_i of Taylor monomials for an (M, D) array of offsets."""
    offsets = np.atleast_2d(np.asarray(offsets, dtype=float))
    dim = offsets.shape[1]
    p = offsets[:, 0]
    if dim == 1:
        cols = [p, p * p / 2]
    elif dim == 2:
        q = offsets[:, 1]
        cols = [p, q, p * p / 2, q * q / 2, p * q]
    elif dim == 3:
        q, r = offsets[:, 1], offsets[:, 2]
        cols = [p, q, r, p * p / 2, q * q / 2, r * r / 2, p * q, p * r, q * r]
    else:
        raise InvalidArgumentError(f"unsupported dimension {dim}")
    return np.stack(cols, axis=1)


@dataclass(frozen=True, eq=False)
class MomentSystem:
    star: Star
    basis: np.ndarray   # (M, C)
    weights: np.ndarray  # (M,)
    H: np.ndarray        # (C, C)

    @property
    def size(self) -> int:
        return self.H.shape[0]

    @property
    def alpha(self) -> np.ndarray:
        """w_i^2 a_i as an (M, C) array."""
        return self.basis * (self.weights**2)[:, None]


@dataclass(frozen=True, eq=False)
class CholeskyPair:
    S: np.ndarray
    R: np.ndarray


@dataclass(frozen=True, eq=False)
class DerivativeStencils:
    """``d[l] ~= center[l] * u_c + neighbors[l] @ u_nbrs`` for each derivative l."""

    star: Star
    center: np.ndarray     # (C,)
    neighbors: np.ndarray  # (C, M)

    def evaluate(self, u_center, u_neighbors) -> np.ndarray:
        return self.center * u_center + self.neighbors @ np.asarray(u_neighbors, dtype=float)


@dataclass(frozen=True, eq=False)
class LaplacianStencil:
    star: Star
    theta: np.ndarray
    theta_c: float

    @property
    def center(self) -> int:
        return self.star.center


def assemble_moment_system(star: Star, weights) -> MomentSystem:
    w = np.asarray(weights, dtype=float).reshape(-1)
    if w.shape[0] != star.size:
        raise InvalidArgumentError(f"{w.shape[0]} weights for a star of {star.size} neighbours")
    if np.any(w < 0) or not np.all(np.isfinite(w)):
        raise InvalidArgumentError("weights must be finite and nonnegative")
    a = taylor_basis(star.offsets)
    c = a.shape[1]
    if np.count_nonzero(w > 0) < c:
        raise RankDeficiencyError(
            f"star of node {star.center} has {np.count_nonzero(w > 0)} positively weighted "
            f"neighbours but {c} unknowns; increase M")
    b = a * w[:, None]
    h = b.T @ b
    h = np.triu(h) + np.triu(h, 1).T
    return MomentSystem(star, a, w, h)


def cholesky(system: MomentSystem) -> CholeskyPair:
    """Lower-triangular S with S S^T = H, plus its inverse R.

    Raises SingularStarError if a pivot falls to ``1e-13 * trace(H) / C``.
    """
    h = system.H
    c = h.shape[0]
    eps = PD_RTOL * np.trace(h) / c
    s = np.zeros_like(h)
    for j in range(c):
        pivot = h[j, j] - s[j, :j] @ s[j, :j]
        if not pivot > eps:
            raise SingularStarError(
                f"moment matrix of the star at node {system.star.center} is not positive "
                f"definite (pivot {pivot:.3e} in column {j}); increase M or change weights",
                node=system.star.center)
        s[j, j] = math.sqrt(pivot)
        for i in range(j + 1, c):
            s[i, j] = (h[i, j] - s[i, :j] @ s[j, :j]) / s[j, j]
    return CholeskyPair(s, invert_lower_triangular(s))


def invert_lower_triangular(S, method: str = "recursion") -> np.ndarray:
    """Inverse of a lower-triangular matrix.

    ``recursion`` fills R row by row with
    ``R[l, j] = -sum_{k=j}^{l-1} S[l, k] R[k, j] / S[l, l]`` and
    ``R[l, l] = 1 / S[l, l]``; ``forward`` solves ``S R = I`` column-wise
    with LAPACK.
    """
    S = np.asarray(S, dtype=float)
    diag = np.diag(S)
    if np.any(diag == 0):
        raise InvalidArgumentError("triangular matrix has a zero diagonal entry")
    c = S.shape[0]
    if method == "forward":
        return scipy.linalg.solve_triangular(S, np.eye(c), lower=True)
    if method != "recursion":
        raise InvalidArgumentError(f"unknown inversion method {method!r}")
    r = np.zeros_like(S)
    for l in range(c):
        r[l, l] = 1.0 / S[l, l]
        for j in range(l):
            r[l, j] = -(S[l, j:l] @ r[j:l, j]) / S[l, l]
    return r


def derivative_coefficients(system: MomentSystem, pair: CholeskyPair | None = None,
                            method: str = "direct") -> DerivativeStencils:
    """Per-derivative coefficients of the centre and neighbour values.

    ``direct`` solves ``H X = alpha^T`` with a dense LU solve. ``backsub``
    uses the Cholesky factors: ``g = R f`` followed by back substitution in
    ``S^T d = g``, one row at a time from the last derivative upward.
    """
    alpha = system.alpha
    if method == "direct":
        nbr = np.linalg.solve(system.H, alpha.T)
        return DerivativeStencils(system.star, -nbr.sum(axis=1), nbr)
    if method != "backsub":
        raise InvalidArgumentError(f"unknown coefficient method {method!r}")
    if pair is None:
        pair = cholesky(system)
    S, R = pair.S, pair.R
    c = system.size
    beta = alpha.sum(axis=0)
    nbr = np.zeros((c, alpha.shape[0]))
    ctr = np.zeros(c)
    for l in range(c - 1, -1, -1):
        tail = S[l + 1:, l]
        nbr[l] = (alpha @ R[l] - tail @ nbr[l + 1:]) / S[l, l]
        ctr[l] = (-(beta @ R[l]) - tail @ ctr[l + 1:]) / S[l, l]
    return DerivativeStencils(system.star, ctr, nbr)


def laplacian_stencil(stencils: DerivativeStencils) -> LaplacianStencil:
    rows = list(LAPLACIAN_ROWS[stencils.star.dim])
    theta = stencils.neighbors[rows].sum(axis=0)
    return LaplacianStencil(stencils.star, theta, float(theta.sum()))


def apply_stencil(stencil: LaplacianStencil, u_center, u_neighbors) -> float:
    """``-theta_c u_c + sum_i theta_i u_i``."""
    u = np.asarray(u_neighbors, dtype=float).reshape(-1)
    if u.shape[0] != stencil.theta.shape[0]:
        raise InvalidArgumentError(
            f"{u.shape[0]} neighbour values for a stencil of {stencil.theta.shape[0]}")
    return float(-stencil.theta_c * u_center + stencil.theta @ u)


def star_stencils(star: Star, spec: WeightSpec, method: str = "direct") -> DerivativeStencils:
    system = assemble_moment_system(star, star_weights(spec, star))
    pair = cholesky(system)  # positive-definiteness gate for every path
    return derivative_coefficients(system, pair, method)


def build_laplacian_stencils(stars, spec: WeightSpec | None = None, workers: int = 1,
                             method: str = "direct") -> list[LaplacianStencil]:
    spec = spec or WeightSpec()

    def one(star):
        return laplacian_stencil(star_stencils(star, spec, method))

    if workers > 1:
        from concurrent.futures import ThreadPoolExecutor
        with ThreadPoolExecutor(workers) as pool:
            return list(pool.map(one, stars))
    return [one(s) for s in stars]


def laplacian_matrix(stencils, n_nodes: int) -> sp.csr_matrix:
    """Sparse N x N operator; boundary rows are empty."""
    rows, cols, vals = [], [], []
    for st in stencils:
        c = st.center
        rows.append(np.full(len(st.theta) + 1, c))
        cols.append(np.r_[c, st.star.neighbors])
        vals.append(np.r_[-st.theta_c, st.theta])
    if not rows:
        return sp.csr_matrix((n_nodes, n_nodes))
    m = sp.coo_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                      shape=(n_nodes, n_nodes))
    return m.tocsr()


def dump_stencil_debug(path, stars, spec: WeightSpec) -> None:
    """Write per-star H, S and theta rows for inspection."""
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh)
        out.writerow(["center", "kind", "row", "values"])
        for star in stars:
            system = assemble_moment_system(star, star_weights(spec, star))
            pair = cholesky(system)
            lap = laplacian_stencil(derivative_coefficients(system, pair))
            for name, mat in (("H", system.H), ("S", pair.S)):
                for i, row in enumerate(mat):
                    out.writerow([star.center, name, i, " ".join(f"{v:.17g}" for v in row)])
            out.writerow([star.center, "theta", "", " ".join(f"{v:.17g}" for v in lap.theta)])
            out.writerow([star.center, "theta_c", "", f"{lap.theta_c:.17g}"])
