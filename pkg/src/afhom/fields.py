"""Sampled periodic fields on uniform cube grids.

Grid points of ``Q_rho(x)`` are ``x - rho/2 + j * rho/n`` (left-point rule,
which is the trapezoid rule for periodic integrands).  Field data are stored
component-first, shape ``(m, n, ..., n)``.
"""
from __future__ import annotations

import csv
import struct
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, Unsupported

MAGIC = b"AFH1"


def is_power_of_two(n: int) -> bool:
    return n >= 2 and (n & (n - 1)) == 0


@dataclass(frozen=True)
class Grid:
    n: int
    N: int
    center: tuple = None
    side: float = 1.0

    def __post_init__(self):
        if not is_power_of_two(int(self.n)):
            raise ConfigError(f"grid size n={self.n} is not a power of two (>= 2); "
                              "pad explicitly if needed")
        if self.side <= 0:
            raise ConfigError("cube side must be positive")
        c = (0.0,) * self.N if self.center is None else tuple(float(v) for v in self.center)
        if len(c) != self.N:
            raise ConfigError(f"center has {len(c)} coordinates, grid is {self.N}-dimensional")
        object.__setattr__(self, "center", c)
        object.__setattr__(self, "n", int(self.n))

    @property
    def h(self) -> float:
        return self.side / self.n

    @property
    def shape(self) -> tuple:
        return (self.n,) * self.N

    @property
    def volume(self) -> float:
        return self.side ** self.N

    @property
    def cell_volume(self) -> float:
        return self.h ** self.N

    @property
    def corner(self) -> np.ndarray:
        return np.asarray(self.center) - self.side / 2

    def axis_coords(self, i: int) -> np.ndarray:
        return self.corner[i] + np.arange(self.n) * self.h

    def points(self) -> np.ndarray:
        """Coordinates, shape ``(N, n, ..., n)``."""
        axes = [self.axis_coords(i) for i in range(self.N)]
        return np.stack(np.meshgrid(*axes, indexing="ij"))

    def boundary_distance(self) -> np.ndarray:
        """Per-axis distance of grid indices to the cube faces, as a fraction of the side."""
        j = np.arange(self.n)
        return np.minimum(j, self.n - j) / self.n


@dataclass
class PeriodicField:
    grid: Grid
    data: np.ndarray
    _hat: np.ndarray = field(default=None, init=False, repr=False, compare=False)

    def __post_init__(self):
        data = np.asarray(self.data, dtype=float)
        if data.ndim == self.grid.N:
            data = data[None]
        if data.shape[1:] != self.grid.shape:
            raise ConfigError(f"field data shape {data.shape} does not match grid {self.grid.shape}")
        if not np.all(np.isfinite(data)):
            raise ConfigError("field contains non-finite entries")
        self.data = data

    @property
    def components(self) -> int:
        return self.data.shape[0]

    def spectrum(self) -> np.ndarray:
        """Normalized coefficients ``mean(u e^{-2 pi i w.x/rho})`` (full ``fftn``, cached)."""
        if self._hat is None:
            axes = tuple(range(1, self.grid.N + 1))
            self._hat = np.fft.fftn(self.data, axes=axes) / self.grid.n ** self.grid.N
        return self._hat

    def copy(self) -> "PeriodicField":
        return PeriodicField(self.grid, self.data.copy())

    def mean(self) -> np.ndarray:
        return self.data.reshape(self.components, -1).mean(axis=1)

    def from_spectrum(self, hat) -> "PeriodicField":
        axes = tuple(range(1, self.grid.N + 1))
        data = np.fft.ifftn(hat * self.grid.n ** self.grid.N, axes=axes).real
        return PeriodicField(self.grid, data)


def pointwise_norm(data: np.ndarray) -> np.ndarray:
    return np.sqrt(np.sum(data * data, axis=0))


def lp_norm(u: PeriodicField, p: float = 2.0) -> float:
    if p < 1:
        raise ConfigError("p must be >= 1")
    a = pointwise_norm(u.data)
    return float((u.grid.cell_volume * np.sum(a ** p)) ** (1.0 / p))


def neg_sobolev_norm(g: PeriodicField, p: float = 2.0):
    """Periodic spectral H^{-1} norm of ``g`` on its cube.

    Returns ``(norm, removed_mean)`` where ``removed_mean`` is the Euclidean
    size of the mean that was subtracted first.
    """
    if p != 2:
        raise Unsupported("negative Sobolev norm is only available for p = 2; "
                          "use the potential field route for other exponents")
    grid = g.grid
    hat = g.spectrum()
    removed = float(np.linalg.norm(hat[(slice(None),) + (0,) * grid.N].real))
    freqs = np.meshgrid(*[np.fft.fftfreq(grid.n, 1.0 / grid.n)] * grid.N, indexing="ij")
    k2 = sum((2 * np.pi * w / grid.side) ** 2 for w in freqs)
    inv = np.divide(1.0, k2, out=np.zeros_like(k2), where=k2 > 0)
    total = np.sum(np.abs(hat) ** 2 * inv)
    return float(np.sqrt(grid.volume * total)), removed


@dataclass(frozen=True)
class CutoffProfile:
    """Cut-off ``theta`` on the cube, as a product of one-dimensional profiles.

    ``theta = 0`` within ``inner_margin * side`` of the faces and ``theta = 1``
    beyond ``(inner_margin + ramp) * side``; in between a smoothstep of the
    given odd polynomial order.  ``ramp = 0`` gives the sharp indicator.
    """

    inner_margin: float = 0.125
    smoothness: int = 3
    ramp: float = 0.0

    def __post_init__(self):
        if not 0 < self.inner_margin < 0.5:
            raise ConfigError("inner_margin must lie in (0, 1/2)")
        if self.smoothness not in (1, 3, 5):
            raise ConfigError("smoothness must be 1, 3 or 5")
        if self.ramp < 0:
            raise ConfigError("ramp must be >= 0")

    def profile_1d(self, s: np.ndarray) -> np.ndarray:
        m = self.inner_margin
        out = (s > m).astype(float)
        if self.ramp > 0:
            t = np.clip((s - m) / self.ramp, 0.0, 1.0)
            if self.smoothness == 1:
                ramp = t
            elif self.smoothness == 3:
                ramp = t * t * (3 - 2 * t)
            else:
                ramp = t ** 3 * (t * (6 * t - 15) + 10)
            out = np.where(s > m, ramp, 0.0)
        return out

    def theta(self, grid: Grid) -> np.ndarray:
        p = self.profile_1d(grid.boundary_distance())
        th = np.ones(grid.shape)
        for i in range(grid.N):
            shape = [1] * grid.N
            shape[i] = grid.n
            th = th * p.reshape(shape)
        return th


def glue(u: PeriodicField, v: PeriodicField, theta) -> PeriodicField:
    """``theta u + (1 - theta) v``; ``theta`` is a :class:`CutoffProfile` or an array."""
    if u.grid != v.grid or u.data.shape != v.data.shape:
        raise ConfigError("glue: fields must share grid and component count")
    th = theta.theta(u.grid) if isinstance(theta, CutoffProfile) else np.asarray(theta, float)
    if th.shape != u.grid.shape:
        raise ConfigError("glue: cut-off shape does not match grid")
    data = np.where(th == 1.0, u.data, np.where(th == 0.0, v.data, th * u.data + (1 - th) * v.data))
    return PeriodicField(u.grid, data)


def support_mask(grid: Grid, margin: float) -> np.ndarray:
    """Boolean mask of grid points farther than ``margin * side`` from every face."""
    return CutoffProfile(margin).theta(grid) > 0


def mask_compact(u: PeriodicField, margin: float, profile: CutoffProfile = None) -> PeriodicField:
    prof = profile or CutoffProfile(margin)
    return PeriodicField(u.grid, u.data * prof.theta(u.grid))


def periodic_extend(u: PeriodicField, copies: int) -> PeriodicField:
    """Tile ``u`` ``copies`` times per axis onto the cube with the same lower corner."""
    k = int(copies)
    if k < 1:
        raise ConfigError("copies must be >= 1")
    if k == 1:
        return u.copy()
    g = u.grid
    side = g.side * k
    center = g.corner + side / 2
    big = Grid(g.n * k, g.N, tuple(center), side)
    return PeriodicField(big, np.tile(u.data, (1,) + (k,) * g.N))


# ---------------------------------------------------------------------------
# serialization
# ---------------------------------------------------------------------------

def write_afh1(path, u: PeriodicField) -> None:
    g = u.grid
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<qqq", g.N, u.components, g.n))
        fh.write(struct.pack(f"<{g.N}d", *g.center))
        fh.write(struct.pack("<d", g.side))
        fh.write(np.ascontiguousarray(u.data, dtype="<f8").tobytes())


def read_afh1(path) -> PeriodicField:
    with open(path, "rb") as fh:
        buf = fh.read()
    if buf[:4] != MAGIC:
        raise ConfigError(f"{path}: not an AFH1 file")
    N, m, n = struct.unpack_from("<qqq", buf, 4)
    off = 4 + 24
    center = struct.unpack_from(f"<{N}d", buf, off)
    off += 8 * N
    (side,) = struct.unpack_from("<d", buf, off)
    off += 8
    data = np.frombuffer(buf, dtype="<f8", offset=off)
    expected = m * n ** N
    if data.size != expected:
        raise ConfigError(f"{path}: expected {expected} values, found {data.size}")
    grid = Grid(n, N, center, side)
    return PeriodicField(grid, data.reshape((m,) + grid.shape).astype(float))


def write_csv_slice(path, u: PeriodicField, index: int = 0) -> None:
    """Write a 2D slice (for N > 2 at ``index`` along every trailing axis) as CSV."""
    g = u.grid
    if g.N < 2:
        raise ConfigError("CSV slices need N >= 2")
    sl = (slice(None), slice(None), slice(None)) + (index,) * (g.N - 2)
    data = u.data[sl]
    x0, x1 = g.axis_coords(0), g.axis_coords(1)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["x0", "x1"] + [f"u{c}" for c in range(u.components)])
        for i in range(g.n):
            for j in range(g.n):
                w.writerow([repr(float(x0[i])), repr(float(x1[j]))]
                           + [repr(float(v)) for v in data[:, i, j]])
