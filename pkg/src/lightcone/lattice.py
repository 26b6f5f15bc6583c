"""Finite hypercubic lattices and power-law couplings split at a cutoff."""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import InvalidInput

METRICS = ("euclidean", "graph")

# distances on integer lattices are sums/roots of integers; this absorbs the
# rounding in sqrt when comparing against a cutoff given as a float
_CUTOFF_SLACK = 1e-12


def _frozen(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class LatticeSpec:
    """Open-boundary hypercubic lattice with row-major site ordering."""

    extents: tuple[int, ...]
    metric: str = "euclidean"

    @property
    def dimension(self) -> int:
        return len(self.extents)

    @property
    def n_sites(self) -> int:
        return int(np.prod(self.extents))

    @cached_property
    def coords(self) -> np.ndarray:
        pts = list(itertools.product(*(range(n) for n in self.extents)))
        return _frozen(np.array(pts, dtype=np.int64).reshape(len(pts), self.dimension))

    @property
    def sites(self) -> list[tuple[int, ...]]:
        return [tuple(int(c) for c in row) for row in self.coords]

    def index(self, coord) -> int:
        coord = tuple(coord)
        if len(coord) != self.dimension or any(
            not 0 <= c < n for c, n in zip(coord, self.extents)
        ):
            raise InvalidInput(f"coordinate {coord} outside lattice {self.extents}")
        return int(np.ravel_multi_index(coord, self.extents))

    @cached_property
    def distances(self) -> np.ndarray:
        diff = self.coords[:, None, :] - self.coords[None, :, :]
        if self.metric == "graph":
            d = np.abs(diff).sum(axis=-1).astype(float)
        else:
            d = np.sqrt((diff.astype(float) ** 2).sum(axis=-1))
        return _frozen(d)

    @property
    def diameter(self) -> float:
        return float(self.distances.max())

    def check_site(self, y: int) -> int:
        if not isinstance(y, (int, np.integer)) or not 0 <= y < self.n_sites:
            raise InvalidInput(f"site index {y!r} out of range for {self.n_sites} sites")
        return int(y)

    def ball(self, center: int, radius: float) -> frozenset[int]:
        """Sites within ``radius`` of ``center`` (inclusive)."""
        row = self.distances[self.check_site(center)]
        return frozenset(int(z) for z in np.flatnonzero(row <= radius + _CUTOFF_SLACK))


def build_lattice(extents, metric: str = "euclidean") -> LatticeSpec:
    extents = tuple(int(n) for n in extents)
    if not extents:
        raise InvalidInput("extents must be non-empty")
    if len(extents) > 3:
        raise InvalidInput(f"dimension {len(extents)} not supported (1 to 3)")
    if any(n < 2 for n in extents):
        raise InvalidInput(f"every extent must be >= 2, got {extents}")
    if metric not in METRICS:
        raise InvalidInput(f"unknown metric {metric!r}; expected one of {METRICS}")
    return LatticeSpec(extents, metric)


def distance(lattice: LatticeSpec, y: int, z: int) -> float:
    return float(lattice.distances[lattice.check_site(y), lattice.check_site(z)])


@dataclass(frozen=True)
class CouplingSplit:
    """Power-law couplings ``j0/d**alpha`` partitioned at ``chi``.

    ``lambda_sr`` and ``lambda_chi`` are the largest row sums of the short and
    long parts, so edge sites never exceed them.
    """

    lattice: LatticeSpec
    alpha: float
    j0: float
    chi: float
    full: np.ndarray
    short: np.ndarray
    long: np.ndarray

    @property
    def lambda_sr(self) -> float:
        return float(self.short.sum(axis=1).max())

    @property
    def lambda_chi(self) -> float:
        return float(self.long.sum(axis=1).max())

    def part(self, name: str) -> np.ndarray:
        if name not in ("full", "short", "long"):
            raise InvalidInput(f"unknown coupling part {name!r}")
        return getattr(self, name)


def power_law_couplings(lattice: LatticeSpec, alpha: float, j0: float) -> np.ndarray:
    d = lattice.distances
    full = np.zeros_like(d)
    off = d > 0
    full[off] = j0 / d[off] ** alpha
    return full


def coupling_split(lattice: LatticeSpec, alpha: float, j0: float, chi: float) -> CouplingSplit:
    if not alpha > 0:
        raise InvalidInput(f"alpha must be > 0, got {alpha}")
    if not j0 > 0:
        raise InvalidInput(f"j0 must be > 0, got {j0}")
    if not chi >= 1:
        raise InvalidInput(f"chi must be >= 1, got {chi}")
    full = power_law_couplings(lattice, alpha, j0)
    near = lattice.distances <= chi + _CUTOFF_SLACK
    short = np.where(near, full, 0.0)
    long = np.where(near, 0.0, full)
    return CouplingSplit(
        lattice, float(alpha), float(j0), float(chi), _frozen(full), _frozen(short), _frozen(long)
    )
