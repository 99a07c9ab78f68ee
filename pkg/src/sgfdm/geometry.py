"""Point clouds on axis-aligned box domains.

Clouds are immutable: coordinates and role flags are stored in read-only
numpy arrays and every constructor validates the cloud invariants.
"""

from __future__ import annotations

import csv
import os
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from .errors import (
    CloudParseError,
    DegenerateCloudError,
    InvalidArgumentError,
    UnsupportedDimensionError,
)

FACE_TOL = 1e-12
INTERIOR = "interior"
BOUNDARY = "boundary"


@dataclass(frozen=True)
class Domain:
    lower: tuple[float, ...]
    upper: tuple[float, ...]

    def __post_init__(self):
        lo = tuple(float(v) for v in self.lower)
        hi = tuple(float(v) for v in self.upper)
        if len(lo) != len(hi):
            raise InvalidArgumentError("lower and upper bounds differ in length")
        if len(lo) not in (1, 2, 3):
            raise UnsupportedDimensionError(f"dimension must be 1, 2 or 3, got {len(lo)}")
        if any(a >= b for a, b in zip(lo, hi)):
            raise InvalidArgumentError(f"empty box: lower={lo} upper={hi}")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    @classmethod
    def unit(cls, dim: int) -> "Domain":
        return cls((0.0,) * dim, (1.0,) * dim)

    @property
    def dim(self) -> int:
        return len(self.lower)

    @property
    def diagonal(self) -> float:
        return float(np.linalg.norm(np.subtract(self.upper, self.lower)))

    def on_face(self, x: np.ndarray, tol: float = FACE_TOL) -> np.ndarray:
        """Boolean mask of rows of ``x`` lying on any face of the box."""
        x = np.atleast_2d(x)
        lo = np.asarray(self.lower)
        hi = np.asarray(self.upper)
        return np.any((np.abs(x - lo) <= tol) | (np.abs(x - hi) <= tol), axis=1)


@dataclass(frozen=True, eq=False)
class PointCloud:
    """Ordered nodes with an interior/boundary role flag.

    ``coords`` has shape (N, D); ``boundary`` is a length-N bool mask.
    """

    coords: np.ndarray
    boundary: np.ndarray
    domain: Domain = field(default=None)

    def __post_init__(self):
        coords = np.array(self.coords, dtype=float)
        if coords.ndim == 1:
            coords = coords[:, None]
        boundary = np.array(self.boundary, dtype=bool).reshape(-1)
        if coords.ndim != 2 or coords.shape[0] != boundary.shape[0]:
            raise InvalidArgumentError("coords and boundary flags disagree in length")
        if coords.shape[1] not in (1, 2, 3):
            raise UnsupportedDimensionError(f"dimension must be 1, 2 or 3, got {coords.shape[1]}")
        domain = self.domain
        if domain is None:
            domain = Domain(tuple(coords.min(axis=0)), tuple(coords.max(axis=0)))
        coords.setflags(write=False)
        boundary.setflags(write=False)
        object.__setattr__(self, "coords", coords)
        object.__setattr__(self, "boundary", boundary)
        object.__setattr__(self, "domain", domain)
        self.validate()

    def validate(self) -> None:
        d = self.domain
        if d.dim != self.dim:
            raise InvalidArgumentError("domain dimension does not match coordinates")
        lo = np.asarray(d.lower) - FACE_TOL
        hi = np.asarray(d.upper) + FACE_TOL
        outside = np.any((self.coords < lo) | (self.coords > hi), axis=1)
        if outside.any():
            raise InvalidArgumentError(f"node {int(np.argmax(outside))} lies outside the domain")
        off_face = self.boundary & ~d.on_face(self.coords)
        if off_face.any():
            raise InvalidArgumentError(
                f"boundary node {int(np.argmax(off_face))} is not on a face of the domain")
        if self.n > 1:
            dist, _ = cKDTree(self.coords).query(self.coords, k=2)
            if not np.all(dist[:, 1] > 0.0):
                raise InvalidArgumentError(
                    f"node {int(np.argmin(dist[:, 1]))} coincides with another node")

    @property
    def n(self) -> int:
        return self.coords.shape[0]

    @property
    def dim(self) -> int:
        return self.coords.shape[1]

    @property
    def interior_indices(self) -> np.ndarray:
        return np.flatnonzero(~self.boundary)

    @property
    def boundary_indices(self) -> np.ndarray:
        return np.flatnonzero(self.boundary)

    def __eq__(self, other):
        if not isinstance(other, PointCloud):
            return NotImplemented
        return (np.array_equal(self.coords, other.coords)
                and np.array_equal(self.boundary, other.boundary))

    def __len__(self):
        return self.n


def _axis_points(domain: Domain, counts) -> list[np.ndarray]:
    return [np.linspace(lo, hi, n) for lo, hi, n in zip(domain.lower, domain.upper, counts)]


def _tensor_grid(domain: Domain, counts) -> np.ndarray:
    axes = _axis_points(domain, counts)
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([m.reshape(-1) for m in mesh], axis=1)


def generate_regular_grid(domain: Domain, points_per_axis: int) -> PointCloud:
    """Equispaced tensor grid including the box faces."""
    if int(points_per_axis) != points_per_axis or points_per_axis < 3:
        raise InvalidArgumentError("points_per_axis must be an integer >= 3")
    x = _tensor_grid(domain, [int(points_per_axis)] * domain.dim)
    return PointCloud(x, domain.on_face(x), domain)



def generate_perturbed_grid(domain: Domain, points_per_axis: int, jitter: float = 0.25,
                            seed: int = 0) -> PointCloud:
    """Regular grid whose interior nodes are shifted by up to ``jitter`` spacings per axis.

    Boundary nodes stay on the faces. ``jitter < 0.5`` keeps nodes distinct
    and inside the box.
    """
    if not 0 <= jitter < 0.5:
        raise InvalidArgumentError("jitter must lie in [0, 0.5)")
    grid = generate_regular_grid(domain, points_per_axis)
    h = (np.asarray(domain.upper) - np.asarray(domain.lower)) / (points_per_axis - 1)
    rng = np.random.default_rng(seed)
    x = np.array(grid.coords)
    inner = ~grid.boundary
    x[inner] += jitter * h * rng.uniform(-1.0, 1.0, (int(inner.sum()), domain.dim))
    return PointCloud(x, grid.boundary, domain)

def _boundary_nodes(domain: Domain, boundary_points) -> np.ndarray:
    if np.isscalar(boundary_points):
        boundary_points = [int(boundary_points)] * domain.dim
    counts = [int(c) for c in boundary_points]
    if len(counts) != domain.dim or any(c < 2 for c in counts):
        raise InvalidArgumentError("boundary_points needs one count >= 2 per axis")
    x = _tensor_grid(domain, counts)
    return x[domain.on_face(x)]


def generate_random_cloud(domain: Domain, n_interior: int, boundary_points=2,
                          seed: int = 0) -> PointCloud:
    """Uniform random interior nodes plus equispaced boundary nodes.

    ``boundary_points`` gives the number of equispaced positions per axis;
    the boundary nodes are the face nodes of that tensor grid (in 1D the two
    endpoints for any count). Interior nodes are drawn uniformly from the
    open box and rejected if closer than ``0.1 * diagonal / N**(1/D)`` to an
    accepted node.
    """
    if int(n_interior) != n_interior or n_interior < 1:
        raise InvalidArgumentError("n_interior must be a positive integer")
    n_interior = int(n_interior)
    rng = np.random.default_rng(seed)
    bnodes = _boundary_nodes(domain, boundary_points)
    n_total = n_interior + len(bnodes)
    min_sep = 0.1 * domain.diagonal / n_total ** (1.0 / domain.dim)
    lo = np.asarray(domain.lower)
    width = np.asarray(domain.upper) - lo

    accepted = list(bnodes)
    interior = []
    attempts = 0
    max_attempts = 10 * n_total
    while len(interior) < n_interior:
        if attempts >= max_attempts:
            raise DegenerateCloudError(
                f"placed {len(interior)} of {n_interior} interior nodes after "
                f"{attempts} attempts (min separation {min_sep:.3g})")
        attempts += 1
        x = lo + width * rng.random(domain.dim)
        if np.any(domain.on_face(x)):
            continue
        if accepted and np.min(np.linalg.norm(np.asarray(accepted) - x, axis=1)) < min_sep:
            continue
        accepted.append(x)
        interior.append(x)

    coords = np.vstack([np.asarray(interior), bnodes])
    flags = np.r_[np.zeros(n_interior, bool), np.ones(len(bnodes), bool)]
    return PointCloud(coords, flags, domain)


def refine_midpoints(cloud: PointCloud) -> PointCloud:
    """Add the midpoint of every consecutive pair of a 1D cloud.

    The result is sorted by coordinate; new nodes are interior.
    """
    if cloud.dim != 1:
        raise UnsupportedDimensionError("midpoint refinement is only defined in 1D")
    order = np.argsort(cloud.coords[:, 0], kind="stable")
    x = cloud.coords[order, 0]
    b = cloud.boundary[order]
    mid = 0.5 * (x[:-1] + x[1:])
    n = len(x)
    new_x = np.empty(2 * n - 1)
    new_b = np.zeros(2 * n - 1, bool)
    new_x[0::2] = x
    new_x[1::2] = mid
    new_b[0::2] = b
    return PointCloud(new_x[:, None], new_b, cloud.domain)


def load_cloud(path, format: str = "csv", dim: int | None = None,
               domain: Domain | None = None) -> PointCloud:
    """Read a cloud written as ``coord columns..., role`` rows.

    A leading header line is accepted when none of its fields is numeric.
    """
    if format != "csv":
        raise InvalidArgumentError(f"unsupported cloud format {format!r}")
    coords, flags = [], []
    with open(path, newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            row = [f.strip() for f in row]
            if not row or all(f == "" for f in row):
                continue
            if lineno == 1 and not any(_is_float(f) for f in row):
                continue
            if dim is None:
                dim = len(row) - 1
                if dim not in (1, 2, 3):
                    raise CloudParseError(f"expected 2-4 columns, got {len(row)}", lineno)
            if len(row) != dim + 1:
                raise CloudParseError(f"expected {dim + 1} columns, got {len(row)}", lineno)
            try:
                xs = [float(f) for f in row[:dim]]
            except ValueError:
                raise CloudParseError(f"non-numeric coordinate in {row[:dim]}", lineno) from None
            role = row[dim].lower()
            if role not in (INTERIOR, BOUNDARY):
                raise CloudParseError(f"role must be 'interior' or 'boundary', got {row[dim]!r}",
                                      lineno)
            coords.append(xs)
            flags.append(role == BOUNDARY)
    if not coords:
        raise CloudParseError("file contains no nodes")
    return PointCloud(np.asarray(coords), np.asarray(flags), domain)


def save_cloud(cloud: PointCloud, path, format: str = "csv", header: bool = True) -> None:
    if format != "csv":
        raise InvalidArgumentError(f"unsupported cloud format {format!r}")
    parent = os.path.dirname(os.fspath(path))
    if parent:
        os.makedirs(parent, exist_ok=True)
    names = ["x", "y", "z"][: cloud.dim] + ["role"]
    with open(path, "w", newline="") as fh:
        if header:
            fh.write(",".join(names) + "\n")
        for x, b in zip(cloud.coords, cloud.boundary):
            fh.write(",".join(f"{v:.17g}" for v in x) + "," + (BOUNDARY if b else INTERIOR) + "\n")


def _is_float(s: str) -> bool:
    try:
        float(s)
    except ValueError:
        return False
    return True

