"""Nearest-neighbour stars around interior nodes."""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .errors import InvalidArgumentError
from .geometry import PointCloud

DEFAULT_STAR_SIZE = {1: 4, 2: 8, 3: 26}


@dataclass(frozen=True, eq=False)
class Star:
    """A central node and its ``M`` nearest neighbours.

    ``offsets[i]`` is ``x_i - x_c`` (columns p, q, r up to the dimension);
    ``distances`` is sorted nondecreasing.
    """

    center: int
    neighbors: np.ndarray
    offsets: np.ndarray
    distances: np.ndarray

    @property
    def size(self) -> int:
        return len(self.neighbors)

    @property
    def dim(self) -> int:
        return self.offsets.shape[1]

    @property
    def radius(self) -> float:
        return float(self.distances[-1])

    @classmethod
    def from_offsets(cls, offsets, center: int = 0, neighbors=None) -> "Star":
        """Build a star directly from neighbour offsets (sorted by distance)."""
        offsets = np.array(offsets, dtype=float)
        if offsets.ndim == 1:
            offsets = offsets[:, None]
        dist = np.linalg.norm(offsets, axis=1)
        order = np.argsort(dist, kind="stable")
        if neighbors is None:
            neighbors = np.arange(1, len(offsets) + 1)
        return cls(center, np.asarray(neighbors)[order], offsets[order], dist[order])


@dataclass(frozen=True, eq=False)
class StarSet:
    stars: tuple[Star, ...]
    n_nodes: int

    @property
    def delta(self) -> float:
        """Largest star radius over all stars."""
        return max(s.radius for s in self.stars)

    @property
    def centers(self) -> np.ndarray:
        return np.array([s.center for s in self.stars], dtype=int)

    def __len__(self):
        return len(self.stars)

    def __iter__(self):
        return iter(self.stars)

    def __getitem__(self, i):
        return self.stars[i]


def _select(coords: np.ndarray, c: int, m: int) -> Star:
    diff = coords - coords[c]
    dist = np.sqrt(np.einsum("ij,ij->i", diff, diff))
    dist[c] = np.inf
    if m < len(dist) - 1:
        # everything at or below the m-th smallest distance, so ties are kept
        kth = np.partition(dist, m - 1)[m - 1]
        cand = np.flatnonzero(dist <= kth)
    else:
        cand = np.flatnonzero(np.isfinite(dist))
    order = np.lexsort((cand, dist[cand]))[:m]
    idx = cand[order]
    return Star(int(c), idx, diff[idx], dist[idx])


def build_star(cloud: PointCloud, c: int, m: int) -> Star:
    """Star of the ``m`` nodes closest to interior node ``c``.

    Distance ties are broken by lower node index. Boundary nodes may be
    neighbours.
    """
    if m < 1 or m >= cloud.n:
        raise InvalidArgumentError(f"star size M={m} needs 1 <= M < N={cloud.n}")
    if not 0 <= c < cloud.n:
        raise InvalidArgumentError(f"node index {c} out of range")
    if cloud.boundary[c]:
        raise InvalidArgumentError(f"node {c} is a boundary node and gets no star")
    return _select(cloud.coords, c, m)


def build_all_stars(cloud: PointCloud, m: int | None = None, workers: int = 1) -> StarSet:
    """One star per interior node, in node-index order."""
    if m is None:
        m = DEFAULT_STAR_SIZE[cloud.dim]

    def one(c):
        try:
            return build_star(cloud, int(c), m)
        except InvalidArgumentError as exc:
            raise InvalidArgumentError(f"star for node {c}: {exc}") from exc

    interior = cloud.interior_indices
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            stars = tuple(pool.map(one, interior))
    else:
        stars = tuple(one(c) for c in interior)
    return StarSet(stars, cloud.n)
