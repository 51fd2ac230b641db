"""Integrands ``f(x, xi)`` with exact xi-gradients, growth constants and random media.

All evaluators are vectorized: ``x`` has shape ``(N, ...)`` and ``xi`` has
shape ``(d, ...)`` with matching trailing axes; the value has shape ``(...)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import ConfigError, ExtrapolationError


def _norm(xi):
    return np.sqrt(np.sum(xi * xi, axis=0))


def _power_grad(xi, r, p):
    # gradient of |xi|^p, zero at the origin
    if p == 2:
        return 2.0 * xi
    with np.errstate(divide="ignore", invalid="ignore"):
        scale = np.where(r > 0, p * r ** (p - 2), 0.0)
    return scale * xi


def lipschitz_from_plip(c0: float, c1: float, p: float) -> float:
    """A constant ``c2`` with ``|f1 - f2| <= c2 (1 + |xi1|^{p-1} + |xi2|^{p-1}) |xi1 - xi2|``.

    Uses ``(f1 ∧ f2)^{(p-1)/p} <= c0^{(p-1)/p} (1 + |xi|^{p-1})`` and
    ``|xi1 - xi2|^{p-1} <= max(1, 2^{p-2}) (|xi1|^{p-1} + |xi2|^{p-1})``.
    """
    a = c0 ** ((p - 1) / p)
    m = max(1.0, 2.0 ** (p - 2))
    return c1 * max(1.0 + a, a + m)


class Integrand:
    """Base class.  Subclasses set ``kind``, ``p`` and the constants ``c0, c1``."""

    kind = "abstract"
    x_independent = False

    def eval(self, x, xi):
        raise NotImplementedError

    def grad_xi(self, x, xi):
        raise NotImplementedError

    def bind(self, x) -> "BoundIntegrand":
        """Freeze the spatial sample points (used by the cell solvers)."""
        return BoundIntegrand(self, np.asarray(x, dtype=float))

    @property
    def c2(self) -> float:
        return lipschitz_from_plip(self.c0, self.c1, self.p)

    def probe_pairs(self, d: int):
        """Extra ``(xi1, xi2)`` pairs worth checking in :func:`verify_plip`."""
        return []

    def sample_box(self) -> float:
        """Half-width of the x-box sampled by the validators."""
        return 4.0

    def to_json(self) -> dict:
        raise NotImplementedError


@dataclass
class BoundIntegrand:
    f: Integrand
    x: np.ndarray

    def value(self, xi):
        return self.f.eval(self.x, xi)

    def grad(self, xi):
        return self.f.grad_xi(self.x, xi)


class _CoefficientPower(Integrand):
    """``a(x) |xi|^p`` for a coefficient field ``a``."""

    def coefficient(self, x):
        raise NotImplementedError

    def eval(self, x, xi):
        return self.coefficient(x) * _norm(xi) ** self.p

    def grad_xi(self, x, xi):
        return self.coefficient(x) * _power_grad(xi, _norm(xi), self.p)

    def bind(self, x):
        return _BoundCoefficient(self.coefficient(np.asarray(x, float)), self.p)

    def _default_constants(self, a_min, a_max):
        m = max(1.0, 2.0 ** (self.p - 2))
        c0 = max(a_max, 1.0 / a_min, 1.0)
        c1 = self.p * m * max(a_max, a_max ** (1.0 / self.p), 1.0)
        return c0, c1


class _BoundCoefficient:
    def __init__(self, a, p):
        self.a, self.p = a, p

    def value(self, xi):
        if self.p == 2:
            return self.a * np.sum(xi * xi, axis=0)
        return self.a * _norm(xi) ** self.p

    def grad(self, xi):
        if self.p == 2:
            return 2.0 * self.a * xi
        return self.a * _power_grad(xi, _norm(xi), self.p)


@dataclass(eq=False)
class PPower(_CoefficientPower):
    p: float = 2.0
    c0: float = None
    c1: float = None
    kind = "ppower"
    x_independent = True

    def __post_init__(self):
        if not self.p > 1:
            raise ConfigError("ppower: p must be > 1")
        d0, d1 = self._default_constants(1.0, 1.0)
        self.c0 = d0 if self.c0 is None else self.c0
        self.c1 = d1 if self.c1 is None else self.c1

    def coefficient(self, x):
        return np.ones(np.shape(x)[1:])

    def to_json(self):
        return {"kind": self.kind, "p": self.p, "c0": self.c0, "c1": self.c1}


@dataclass(eq=False)
class Quadratic(_CoefficientPower):
    a: float = 1.0
    c0: float = None
    c1: float = None
    p = 2.0
    kind = "quadratic"
    x_independent = True

    def __post_init__(self):
        if self.a <= 0:
            raise ConfigError("quadratic: a must be positive")
        d0, d1 = self._default_constants(self.a, self.a)
        self.c0 = d0 if self.c0 is None else self.c0
        self.c1 = d1 if self.c1 is None else self.c1

    def coefficient(self, x):
        return np.full(np.shape(x)[1:], float(self.a))

    def to_json(self):
        return {"kind": self.kind, "a": self.a, "c0": self.c0, "c1": self.c1}


def _phase(x, period):
    # position inside the period, in [0, 1); half-open cells
    t = np.asarray(x) / period
    return t - np.floor(t)


@dataclass(eq=False)
class Laminate(_CoefficientPower):
    """``a(x)|xi|^p`` with ``a = a_lo`` on ``[0, period/2)`` and ``a_hi`` on ``[period/2, period)`` along ``axis``."""

    a_lo: float = 1.0
    a_hi: float = 4.0
    axis: int = 0
    period: float = 1.0
    p: float = 2.0
    c0: float = None
    c1: float = None
    kind = "laminate"

    def __post_init__(self):
        if min(self.a_lo, self.a_hi) <= 0 or self.period <= 0:
            raise ConfigError("laminate: coefficients and period must be positive")
        d0, d1 = self._default_constants(min(self.a_lo, self.a_hi), max(self.a_lo, self.a_hi))
        self.c0 = d0 if self.c0 is None else self.c0
        self.c1 = d1 if self.c1 is None else self.c1

    def coefficient(self, x):
        s = _phase(x[self.axis], self.period)
        return np.where(s < 0.5, float(self.a_lo), float(self.a_hi))

    def to_json(self):
        return {"kind": self.kind, "a_lo": self.a_lo, "a_hi": self.a_hi, "axis": self.axis,
                "period": self.period, "p": self.p, "c0": self.c0, "c1": self.c1}


@dataclass(eq=False)
class Checkerboard(_CoefficientPower):
    """Squares of side ``period/2``; ``a_lo`` where the square indices sum to an even number."""

    a_lo: float = 1.0
    a_hi: float = 4.0
    period: float = 1.0
    p: float = 2.0
    c0: float = None
    c1: float = None
    kind = "checkerboard"

    def __post_init__(self):
        if min(self.a_lo, self.a_hi) <= 0 or self.period <= 0:
            raise ConfigError("checkerboard: coefficients and period must be positive")
        d0, d1 = self._default_constants(min(self.a_lo, self.a_hi), max(self.a_lo, self.a_hi))
        self.c0 = d0 if self.c0 is None else self.c0
        self.c1 = d1 if self.c1 is None else self.c1

    def coefficient(self, x):
        idx = np.floor(2.0 * np.asarray(x) / self.period).astype(np.int64)
        parity = np.sum(idx, axis=0) % 2
        return np.where(parity == 0, float(self.a_lo), float(self.a_hi))

    def to_json(self):
        return {"kind": self.kind, "a_lo": self.a_lo, "a_hi": self.a_hi, "period": self.period,
                "p": self.p, "c0": self.c0, "c1": self.c1}


@dataclass(eq=False)
class DoubleWell(Integrand):
    """``min(|xi - zeta|^p, |xi + zeta|^p) + delta |xi|^p``."""

    zeta: tuple = (1.0, 0.0)
    delta: float = 0.01
    p: float = 2.0
    c0: float = None
    c1: float = None
    kind = "double_well"
    x_independent = True

    def __post_init__(self):
        if self.delta <= 0:
            raise ConfigError("double_well: delta must be positive (coercivity)")
        self.zeta = tuple(float(v) for v in self.zeta)
        z = math.sqrt(sum(v * v for v in self.zeta))
        m = max(1.0, 2.0 ** (self.p - 1))
        # lower bound from delta |xi|^p; upper from min(..) <= 2^{p-1}(|xi|^p + |zeta|^p)
        c0 = max(1.0 / self.delta, m + self.delta, m * z ** self.p, 1.0)
        # gradient bound along segments, |xi| <= (f/delta)^{1/p} at the smaller endpoint
        c1 = self.p * max(1.0, 2.0 ** (self.p - 2)) ** 2 * (1 + self.delta) * max(
            1.0, z ** (self.p - 1), self.delta ** (-(self.p - 1) / self.p))
        self.c0 = c0 if self.c0 is None else self.c0
        self.c1 = c1 if self.c1 is None else self.c1

    def _z(self, xi):
        z = np.asarray(self.zeta).reshape((-1,) + (1,) * (xi.ndim - 1))
        if z.shape[0] != xi.shape[0]:
            raise ConfigError(f"double_well: zeta has {z.shape[0]} components, xi has {xi.shape[0]}")
        return z

    def eval(self, x, xi):
        z = self._z(xi)
        rm, rp = _norm(xi - z), _norm(xi + z)
        return np.minimum(rm, rp) ** self.p + self.delta * _norm(xi) ** self.p

    def grad_xi(self, x, xi):
        z = self._z(xi)
        rm, rp = _norm(xi - z), _norm(xi + z)
        use_minus = rm <= rp
        g = np.where(use_minus, _power_grad(xi - z, rm, self.p), _power_grad(xi + z, rp, self.p))
        return g + self.delta * _power_grad(xi, _norm(xi), self.p)

    def to_json(self):
        return {"kind": self.kind, "zeta": list(self.zeta), "delta": self.delta, "p": self.p,
                "c0": self.c0, "c1": self.c1}


@dataclass(eq=False)
class PeriodicPlusCompact(Integrand):
    """``f_per + 1_{Q_R(0)} f_comp``."""

    f_per: Integrand = None
    f_comp: Integrand = None
    R: float = 2.0
    kind = "periodic_plus_compact"

    def __post_init__(self):
        if self.f_per is None or self.f_comp is None or self.R <= 0:
            raise ConfigError("periodic_plus_compact needs f_per, f_comp and R > 0")
        self.p = self.f_per.p
        self.c0 = self.f_per.c0 + self.f_comp.c0
        self.c1 = self.f_per.c1 + self.f_comp.c1

    def indicator(self, x):
        return np.all(np.abs(np.asarray(x)) < self.R / 2, axis=0)

    def eval(self, x, xi):
        return self.f_per.eval(x, xi) + np.where(self.indicator(x), self.f_comp.eval(x, xi), 0.0)

    def grad_xi(self, x, xi):
        return self.f_per.grad_xi(x, xi) + np.where(self.indicator(x), self.f_comp.grad_xi(x, xi), 0.0)

    def bind(self, x):
        x = np.asarray(x, float)
        return _BoundSum(self.f_per.bind(x), self.f_comp.bind(x), self.indicator(x))

    def sample_box(self):
        return max(self.R, self.f_per.sample_box())

    def to_json(self):
        return {"kind": self.kind, "f_per": self.f_per.to_json(), "f_comp": self.f_comp.to_json(),
                "R": self.R}


class _BoundSum:
    def __init__(self, a, b, mask):
        self.a, self.b, self.mask = a, b, mask

    def value(self, xi):
        return self.a.value(xi) + np.where(self.mask, self.b.value(xi), 0.0)

    def grad(self, xi):
        return self.a.grad(xi) + np.where(self.mask, self.b.grad(xi), 0.0)


@dataclass(eq=False)
class Rescaled(Integrand):
    """``(x, xi) -> base(x / eps, xi)``."""

    base: Integrand = None
    eps: float = 1.0
    kind = "rescaled"

    def __post_init__(self):
        if not self.eps > 0:
            raise ConfigError("rescale: eps must be positive")
        self.p, self.c0, self.c1 = self.base.p, self.base.c0, self.base.c1
        self.x_independent = self.base.x_independent

    def eval(self, x, xi):
        return self.base.eval(np.asarray(x) / self.eps, xi)

    def grad_xi(self, x, xi):
        return self.base.grad_xi(np.asarray(x) / self.eps, xi)

    def bind(self, x):
        return self.base.bind(np.asarray(x, float) / self.eps)

    def to_json(self):
        return {"kind": self.kind, "base": self.base.to_json(), "eps": self.eps}


def rescale(f: Integrand, eps: float) -> Integrand:
    """Return ``(x, xi) -> f(x/eps, xi)``; constants are unchanged."""
    if not eps > 0:
        raise ConfigError("rescale: eps must be positive")
    if eps == 1.0:
        return f
    if isinstance(f, Rescaled):
        return Rescaled(f.base, f.eps * eps)
    return Rescaled(f, eps)


def make_periodic_plus_compact(f_per: Integrand, f_comp: Integrand, R: float) -> Integrand:
    return PeriodicPlusCompact(f_per, f_comp, R)


@dataclass(eq=False)
class CustomTable(Integrand):
    """Radial table ``f(xi) = g(|xi|)`` with ``g`` piecewise linear through ``(radii, values)``.

    A repeated radius encodes a jump; the right value applies at the node.
    """

    radii: tuple = (0.0, 1.0)
    values: tuple = (0.0, 1.0)
    p: float = 2.0
    c0: float = 1.0
    c1: float = 1.0
    kind = "custom-table"
    x_independent = True

    def __post_init__(self):
        r = np.asarray(self.radii, float)
        v = np.asarray(self.values, float)
        if r.ndim != 1 or r.shape != v.shape or r.size < 2:
            raise ConfigError("custom-table: radii and values must be equal-length 1D lists (>= 2)")
        if r[0] != 0 or np.any(np.diff(r) < 0) or np.any(v < 0):
            raise ConfigError("custom-table: radii must start at 0 and be non-decreasing; values >= 0")
        self._r, self._v = r, v

    def _locate(self, s):
        if np.any(s > self._r[-1]):
            raise ExtrapolationError(f"custom-table: |xi| = {float(np.max(s))} beyond table range "
                                     f"{self._r[-1]}")
        j = np.clip(np.searchsorted(self._r, s, side="right") - 1, 0, self._r.size - 2)
        r0, r1 = self._r[j], self._r[j + 1]
        v0, v1 = self._v[j], self._v[j + 1]
        width = np.where(r1 > r0, r1 - r0, 1.0)
        slope = np.where(r1 > r0, (v1 - v0) / width, 0.0)
        return v0 + slope * (s - r0), slope

    def eval(self, x, xi):
        return self._locate(_norm(xi))[0]

    def grad_xi(self, x, xi):
        s = _norm(xi)
        slope = self._locate(s)[1]
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(s > 0, slope / s, 0.0) * xi

    def probe_pairs(self, d):
        e = np.zeros(d)
        e[0] = 1.0
        out = []
        for r in np.unique(self._r[1:-1]):
            out.append((e * (r - 1e-9), e * (r + 1e-9)))
        return out

    def to_json(self):
        return {"kind": self.kind, "radii": list(map(float, self.radii)),
                "values": list(map(float, self.values)), "p": self.p, "c0": self.c0, "c1": self.c1}


# ---------------------------------------------------------------------------
# random, shift-covariant media
# ---------------------------------------------------------------------------

_M64 = (1 << 64) - 1


def _splitmix64(x: np.ndarray) -> np.ndarray:
    x = (x + np.uint64(0x9E3779B97F4A7C15)) & np.uint64(_M64)
    x = ((x ^ (x >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)) & np.uint64(_M64)
    x = ((x ^ (x >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)) & np.uint64(_M64)
    return x ^ (x >> np.uint64(31))


def cell_uniforms(seed: int, cells: np.ndarray) -> np.ndarray:
    """Counter-based uniforms in [0, 1): a pure function of ``(seed, z)`` for each cell ``z``.

    ``cells`` has shape ``(N, ...)`` of integers.
    """
    cells = np.asarray(cells, dtype=np.int64)
    with np.errstate(over="ignore"):
        h = _splitmix64(np.full(cells.shape[1:], np.uint64(seed & _M64)))
        for i in range(cells.shape[0]):
            h = _splitmix64(h ^ (cells[i].astype(np.uint64) + np.uint64(i + 1) * np.uint64(0x632BE59BD9B4E019)))
    return (h >> np.uint64(11)).astype(np.float64) / float(1 << 53)


@dataclass(frozen=True)
class RandomSeedState:
    """A realization ``omega``: the seed plus the accumulated lattice shift."""

    seed: int
    offset: tuple = ()

    def shifted(self, z) -> "RandomSeedState":
        z = tuple(int(v) for v in z)
        off = self.offset or (0,) * len(z)
        if len(off) != len(z):
            raise ConfigError("shift dimension mismatch")
        return RandomSeedState(self.seed, tuple(a + b for a, b in zip(off, z)))


@dataclass(eq=False)
class RandomCheckerboard(_CoefficientPower):
    """i.i.d. coefficient per unit cell ``z = floor(x)`` drawn from ``values`` / ``probs``.

    With ``mixture=True`` a single draw (per seed) is used for every cell,
    a stationary but non-ergodic medium.  Unfrozen when ``state`` is None.
    """

    values: tuple = (1.0, 4.0)
    probs: tuple = (0.5, 0.5)
    mixture: bool = False
    state: RandomSeedState = None
    p: float = 2.0
    c0: float = None
    c1: float = None
    kind = "random_checkerboard"

    def __post_init__(self):
        v = np.asarray(self.values, float)
        pr = np.asarray(self.probs, float)
        if v.shape != pr.shape or v.size < 1 or np.any(v <= 0) or np.any(pr < 0):
            raise ConfigError("random_checkerboard: values/probs must match, values > 0, probs >= 0")
        if abs(pr.sum() - 1.0) > 1e-12:
            raise ConfigError("random_checkerboard: probs must sum to 1")
        self.values, self.probs = tuple(map(float, v)), tuple(map(float, pr))
        self._cdf = np.cumsum(pr)
        self._cdf[-1] = 1.0
        d0, d1 = self._default_constants(float(v.min()), float(v.max()))
        self.c0 = d0 if self.c0 is None else self.c0
        self.c1 = d1 if self.c1 is None else self.c1

    @property
    def mean_value(self) -> float:
        return float(np.dot(self.values, self.probs))

    def draw(self, u):
        idx = np.searchsorted(self._cdf, u, side="right")
        return np.asarray(self.values)[np.minimum(idx, len(self.values) - 1)]

    def cell_values(self, cells):
        """Coefficients of the integer cells ``cells`` (shape ``(N, ...)``)."""
        if self.state is None:
            raise ConfigError("random_checkerboard is not frozen; call sample_random first")
        cells = np.asarray(cells, dtype=np.int64)
        off = self.state.offset or (0,) * cells.shape[0]
        if self.mixture:
            u = cell_uniforms(self.state.seed, np.zeros((1,), np.int64).reshape(1, 1))
            return np.full(cells.shape[1:], float(self.draw(u)[0]))
        shifted = cells + np.asarray(off, dtype=np.int64).reshape((-1,) + (1,) * (cells.ndim - 1))
        return self.draw(cell_uniforms(self.state.seed, shifted))

    def coefficient(self, x):
        return self.cell_values(np.floor(np.asarray(x)).astype(np.int64))

    def to_json(self):
        out = {"kind": self.kind, "dist": {"values": list(self.values), "probs": list(self.probs)},
               "mixture": self.mixture, "p": self.p, "c0": self.c0, "c1": self.c1}
        if self.state is not None:
            out["seed"] = self.state.seed
            if self.state.offset:
                out["offset"] = list(self.state.offset)
        return out


def sample_random(f: RandomCheckerboard, seed: int) -> RandomCheckerboard:
    """Freeze a realization ``omega`` of a random family."""
    if not isinstance(f, RandomCheckerboard):
        raise ConfigError(f"{f.kind} is not a random family")
    return replace(f, state=RandomSeedState(int(seed)), c0=f.c0, c1=f.c1)


def shift(f: RandomCheckerboard, z) -> RandomCheckerboard:
    """``tau_z omega``: the frozen medium with ``f(tau_z w, x) = f(w, x + z)``."""
    if f.state is None:
        raise ConfigError("shift needs a frozen realization")
    return replace(f, state=f.state.shifted(z), c0=f.c0, c1=f.c1)


# ---------------------------------------------------------------------------
# validators
# ---------------------------------------------------------------------------

@dataclass
class Report:
    name: str
    passed: bool
    worst_margin: float
    witnesses: list = field(default_factory=list)
    details: dict = field(default_factory=dict)

    def to_json(self):
        return {"name": self.name, "passed": bool(self.passed), "worst_margin": float(self.worst_margin),
                "witnesses": [[np.asarray(a).tolist() for a in w] for w in self.witnesses[:5]],
                "details": self.details}


def _sample_points(f, samples, N, d, rng, max_norm=1e3):
    L = f.sample_box()
    x = rng.uniform(-L, L, size=(N, samples))
    dirs = rng.standard_normal((d, samples))
    dirs /= np.maximum(_norm(dirs), 1e-300)
    mags = 10.0 ** rng.uniform(-3, math.log10(max_norm), size=samples)
    mags[: max(1, samples // 20)] = 0.0
    return x, dirs * mags


def _table_range(f):
    return f._r[-1] if isinstance(f, CustomTable) else np.inf


def verify_growth(f: Integrand, samples: int = 2000, N: int = 2, d: int = 2, seed: int = 0) -> Report:
    """Check ``|xi|^p / c0 - c0 <= f(x, xi) <= c0 (1 + |xi|^p)`` on random samples."""
    if samples < 1:
        raise ConfigError("samples must be >= 1")
    rng = np.random.default_rng(seed)
    x, xi = _sample_points(f, samples, N, d, rng, max_norm=min(1e3, (1 - 1e-12) * _table_range(f)))
    val = f.eval(x, xi)
    s = _norm(xi) ** f.p
    lower = s / f.c0 - f.c0
    upper = f.c0 * (1 + s)
    scale = 1 + s
    margin = np.minimum(val - lower, upper - val) / scale
    bad = np.nonzero(margin < -1e-12)[0]
    wit = [(x[:, j], xi[:, j], val[j]) for j in bad[:5]]
    return Report("growth", bad.size == 0, float(margin.min()), wit,
                  {"c0": f.c0, "p": f.p, "samples": samples, "violations": int(bad.size)})


def verify_plip(f: Integrand, samples: int = 2000, N: int = 2, d: int = 2, seed: int = 0,
                c2: float = None) -> Report:
    """Check ``|f(x,xi1) - f(x,xi2)| <= c2 (1 + |xi1|^{p-1} + |xi2|^{p-1}) |xi1 - xi2|``."""
    if samples < 1:
        raise ConfigError("samples must be >= 1")
    c2 = f.c2 if c2 is None else c2
    rng = np.random.default_rng(seed)
    x, xi1 = _sample_points(f, samples, N, d, rng, max_norm=min(1e3, (1 - 1e-12) * _table_range(f)))
    # half the pairs close together, half far apart
    step = rng.standard_normal((d, samples)) * np.where(rng.random(samples) < 0.5, 1e-3, 1.0) * (1 + _norm(xi1))
    xi2 = xi1 + step
    rng_t = _table_range(f)
    if np.isfinite(rng_t):
        xi2 *= np.minimum(1.0, (1 - 1e-12) * rng_t / np.maximum(_norm(xi2), 1e-300))
    extra = f.probe_pairs(d)
    if extra:
        xe = np.zeros((N, len(extra)))
        x = np.concatenate([x, xe], axis=1)
        xi1 = np.concatenate([xi1, np.stack([a for a, _ in extra], axis=1)], axis=1)
        xi2 = np.concatenate([xi2, np.stack([b for _, b in extra], axis=1)], axis=1)
    lhs = np.abs(f.eval(x, xi1) - f.eval(x, xi2))
    dist = _norm(xi1 - xi2)
    rhs = c2 * (1 + _norm(xi1) ** (f.p - 1) + _norm(xi2) ** (f.p - 1)) * dist
    margin = (rhs - lhs) / (1 + rhs)
    bad = np.nonzero(lhs > rhs * (1 + 1e-12) + 1e-12)[0]
    wit = [(xi1[:, j], xi2[:, j], lhs[j], rhs[j]) for j in bad[:5]]
    return Report("p-lipschitz", bad.size == 0, float(margin.min()), wit,
                  {"c2": c2, "p": f.p, "pairs": int(lhs.size), "violations": int(bad.size)})


# ---------------------------------------------------------------------------
# JSON
# ---------------------------------------------------------------------------

_KEYS = {
    "ppower": {"p", "c0", "c1"},
    "quadratic": {"a", "c0", "c1"},
    "laminate": {"a_lo", "a_hi", "axis", "period", "p", "c0", "c1"},
    "checkerboard": {"a_lo", "a_hi", "period", "p", "c0", "c1"},
    "double_well": {"zeta", "delta", "p", "c0", "c1"},
    "periodic_plus_compact": {"f_per", "f_comp", "R"},
    "random_checkerboard": {"dist", "seed", "mixture", "offset", "p", "c0", "c1"},
    "custom-table": {"radii", "values", "p", "c0", "c1"},
    "rescaled": {"base", "eps"},
}


def integrand_from_json(obj: dict) -> Integrand:
    if not isinstance(obj, dict) or "kind" not in obj:
        raise ConfigError("integrand must be a JSON object with a 'kind'")
    kind = obj["kind"]
    if kind not in _KEYS:
        raise ConfigError(f"integrand.kind: unknown family {kind!r}")
    unknown = set(obj) - _KEYS[kind] - {"kind"}
    if unknown:
        raise ConfigError(f"integrand ({kind}): unknown keys {sorted(unknown)}")
    kw = {k: v for k, v in obj.items() if k != "kind"}
    try:
        if kind == "ppower":
            return PPower(**kw)
        if kind == "quadratic":
            return Quadratic(**kw)
        if kind == "laminate":
            return Laminate(**kw)
        if kind == "checkerboard":
            return Checkerboard(**kw)
        if kind == "double_well":
            return DoubleWell(**kw)
        if kind == "custom-table":
            return CustomTable(**kw)
        if kind == "periodic_plus_compact":
            return PeriodicPlusCompact(integrand_from_json(kw["f_per"]), integrand_from_json(kw["f_comp"]),
                                       float(kw.get("R", 2.0)))
        if kind == "rescaled":
            return Rescaled(integrand_from_json(kw["base"]), float(kw["eps"]))
        dist = kw.pop("dist", {"values": [1.0, 4.0], "probs": [0.5, 0.5]})
        seed = kw.pop("seed", None)
        offset = kw.pop("offset", None)
        f = RandomCheckerboard(values=tuple(dist["values"]), probs=tuple(dist["probs"]), **kw)
        if seed is not None:
            f = sample_random(f, int(seed))
            if offset:
                f = shift(f, offset)
        return f
    except TypeError as exc:
        raise ConfigError(f"integrand ({kind}): {exc}") from None
    except KeyError as exc:
        raise ConfigError(f"integrand ({kind}): missing key {exc.args[0]!r}") from None
