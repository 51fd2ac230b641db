"""Constant-coefficient first-order operators and their Fourier projectors.

An operator is ``A u = sum_i A^i d_i u`` with ``A^i`` real ``l x d`` matrices.
On a periodic grid it acts diagonally in Fourier space through the symbol
``A(w) = sum_i A^i w_i``; the orthogonal projector onto ``ker A(w)`` then
projects sampled fields onto the discrete A-free, mean-zero subspace.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, ConstantRankViolation

RANK_RTOL = 1e-9
LATTICE_RADIUS = 8


@dataclass(frozen=True)
class OperatorSpec:
    """The matrices ``A^1 .. A^N`` (each ``l x d``) and the growth exponent ``p``."""

    matrices: np.ndarray
    p: float = 2.0
    name: str = "custom"

    def __post_init__(self):
        mats = np.asarray(self.matrices, dtype=float)
        if mats.ndim != 3 or min(mats.shape) < 1:
            raise ConfigError("matrices must be a non-empty list of N matrices of shape (l, d)")
        if not np.all(np.isfinite(mats)):
            raise ConfigError("matrices contain non-finite entries")
        if not self.p > 1:
            raise ConfigError(f"p must be > 1, got {self.p}")
        mats.setflags(write=False)
        object.__setattr__(self, "matrices", mats)

    @property
    def N(self) -> int:
        return self.matrices.shape[0]

    @property
    def l(self) -> int:
        return self.matrices.shape[1]

    @property
    def d(self) -> int:
        return self.matrices.shape[2]

    def to_json(self) -> dict:
        return {"N": self.N, "d": self.d, "l": self.l, "p": self.p,
                "matrices": self.matrices.tolist()}


def divergence(N: int = 2, p: float = 2.0) -> OperatorSpec:
    mats = np.zeros((N, 1, N))
    for i in range(N):
        mats[i, 0, i] = 1.0
    return OperatorSpec(mats, p, name="div")


def curl2d(p: float = 2.0) -> OperatorSpec:
    # d1 u2 - d2 u1
    return OperatorSpec([[[0.0, 1.0]], [[-1.0, 0.0]]], p, name="curl2d")


def curl3d(p: float = 2.0) -> OperatorSpec:
    # (curl u)_r = eps_{r i j} d_i u_j
    mats = np.zeros((3, 3, 3))
    eps = np.zeros((3, 3, 3))
    eps[0, 1, 2] = eps[1, 2, 0] = eps[2, 0, 1] = 1.0
    eps[0, 2, 1] = eps[2, 1, 0] = eps[1, 0, 2] = -1.0
    for i in range(3):
        mats[i] = eps[:, i, :]
    return OperatorSpec(mats, p, name="curl3d")


def row_divergence(rows: int = 2, N: int = 3, p: float = 2.0) -> OperatorSpec:
    """Row-wise divergence of ``rows x N`` matrix fields (flattened row-major)."""
    mats = np.zeros((N, rows, rows * N))
    for i in range(N):
        for r in range(rows):
            mats[i, r, r * N + i] = 1.0
    return OperatorSpec(mats, p, name="rowdiv")


BUILTIN = {"div": divergence, "curl2d": curl2d, "curl3d": curl3d, "rowdiv": row_divergence}


def operator_from_json(obj) -> OperatorSpec:
    """Build an operator from a built-in name or a ``{"N","d","l","p","matrices"}`` object.

    Built-in names may also be given as ``{"name": "div", "N": 3, "p": 2}``.
    """
    if isinstance(obj, str):
        obj = {"name": obj}
    if not isinstance(obj, dict):
        raise ConfigError("operator must be a name or a JSON object")
    if "name" in obj and "matrices" not in obj:
        unknown = set(obj) - {"name", "N", "p"}
        if unknown:
            raise ConfigError(f"operator: unknown keys {sorted(unknown)}")
        name = obj["name"]
        p = float(obj.get("p", 2.0))
        if name == "div":
            return divergence(int(obj.get("N", 2)), p)
        if name == "curl2d":
            return curl2d(p)
        if name == "curl3d":
            return curl3d(p)
        if name == "rowdiv":
            return row_divergence(p=p)
        raise ConfigError(f"operator.name: unknown built-in operator {name!r}")
    unknown = set(obj) - {"N", "d", "l", "p", "matrices", "name"}
    if unknown:
        raise ConfigError(f"operator: unknown keys {sorted(unknown)}")
    try:
        N, d, l = int(obj["N"]), int(obj["d"]), int(obj["l"])
        flat = np.asarray(obj["matrices"], dtype=float)
    except KeyError as exc:
        raise ConfigError(f"operator: missing key {exc.args[0]!r}") from None
    if flat.size != N * l * d:
        raise ConfigError(f"operator.matrices: expected {N} matrices of shape ({l}, {d}), "
                          f"got {flat.size} entries")
    return OperatorSpec(flat.reshape(N, l, d), float(obj.get("p", 2.0)),
                        name=obj.get("name", "custom"))


def symbol(op: OperatorSpec, w) -> np.ndarray:
    """``A(w) = sum_i A^i w_i``; ``w`` may carry extra leading batch axes."""
    w = np.asarray(w, dtype=float)
    if w.shape[-1] != op.N:
        raise ConfigError(f"frequency has {w.shape[-1]} components, operator has N={op.N}")
    return np.einsum("...i,ild->...ld", w, op.matrices)


def numerical_rank(mat: np.ndarray) -> np.ndarray:
    """Rank by singular values with threshold ``1e-9 * s_max * max(l, d)``."""
    s = np.linalg.svd(mat, compute_uv=False)
    smax = s[..., :1]
    thresh = RANK_RTOL * smax * max(mat.shape[-2:])
    return np.sum((s > thresh) & (smax > 0), axis=-1)


def check_constant_rank(op: OperatorSpec, probe_budget: int = 1000, radius: int = LATTICE_RADIUS,
                        seed: int = 0) -> int:
    """Certify the constant-rank property on a sample of frequencies.

    Probes every nonzero lattice point with ``|w|_inf <= radius`` plus
    ``probe_budget`` random unit directions.  This is a certificate on the
    sample, not a proof.  Raises :class:`ConstantRankViolation` with two
    witnesses of different rank.
    """
    if probe_budget < 1:
        raise ConfigError("probe_budget must be >= 1")
    axes = [np.arange(-radius, radius + 1)] * op.N
    lattice = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, op.N)
    lattice = lattice[np.any(lattice != 0, axis=1)].astype(float)
    rng = np.random.default_rng(seed)
    dirs = rng.standard_normal((probe_budget, op.N))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    probes = np.concatenate([lattice, dirs])
    ranks = numerical_rank(symbol(op, probes))
    r0 = int(ranks[0])
    bad = np.nonzero(ranks != r0)[0]
    if bad.size:
        j = int(bad[0])
        raise ConstantRankViolation((probes[0], r0), (probes[j], int(ranks[j])))
    return r0


def _kernel_projector(mat: np.ndarray, scale: int) -> np.ndarray:
    d = mat.shape[-1]
    pinv = np.linalg.pinv(mat, rcond=RANK_RTOL * scale)
    P = np.eye(d) - pinv @ mat
    return 0.5 * (P + np.swapaxes(P, -1, -2))


def projector(op: OperatorSpec, w) -> np.ndarray:
    """Orthogonal projector ``I - A(w)^+ A(w)`` onto ``ker A(w)`` for ``w != 0``."""
    w = np.asarray(w, dtype=float)
    if not np.any(w != 0):
        raise ValueError("projector is undefined at w = 0; the mean mode is handled separately")
    return _kernel_projector(symbol(op, w), max(op.l, op.d))


# ---------------------------------------------------------------------------
# grid-level spectral machinery
# ---------------------------------------------------------------------------

def signed_frequencies(n: int, N: int) -> np.ndarray:
    """Integer frequencies of the ``rfftn`` layout, shape ``(N, n, ..., n//2 + 1)``.

    Signed representatives lie in ``(-n/2, n/2]``.
    """
    full = np.fft.fftfreq(n, 1.0 / n)
    full[n // 2] = n // 2  # Nyquist as +n/2
    half = np.arange(n // 2 + 1, dtype=float)
    axes = [full] * (N - 1) + [half]
    return np.stack(np.meshgrid(*axes, indexing="ij"))


def _partner(w: np.ndarray, n: int) -> np.ndarray:
    # signed representative of -w; Nyquist components map to themselves
    p = -w
    p[w == n // 2] = n // 2
    return p


@dataclass
class SpectralOperator:
    """Per-grid cache of projectors and derivative multipliers (read-only after build).

    At frequencies with a Nyquist component the projector is taken onto
    ``ker A(w) ∩ ker A(w')`` where ``w'`` is the representative of ``-w``, so
    the projected field stays real.  Derivative multipliers vanish in any
    Nyquist direction, as usual for real spectral differentiation.
    """

    op: OperatorSpec
    n: int
    side: float = 1.0
    _P: np.ndarray = field(init=False, repr=False)
    _k: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        N, n = self.op.N, self.n
        w = signed_frequencies(n, N)
        wl = np.moveaxis(w, 0, -1)           # (..., N)
        wp = _partner(wl, n)
        stacked = np.concatenate([symbol(self.op, wl), symbol(self.op, wp)], axis=-2)
        P = _kernel_projector(stacked, max(self.op.l, self.op.d))
        P[(0,) * N] = 0.0                     # mean mode removed
        self._P = P
        k = 2 * np.pi * w / self.side
        k[w == n // 2] = 0.0
        self._k = k                           # real; derivative multiplier is i*k
        self.shape = (n,) * N
        self.axes = tuple(range(-N, 0))

    def fft(self, u):
        return np.fft.rfftn(u, axes=self.axes)

    def ifft(self, uh):
        return np.fft.irfftn(uh, s=self.shape, axes=self.axes)

    # transforms over the trailing spatial axes, whatever the leading ones are

    def project(self, u: np.ndarray) -> np.ndarray:
        """Orthogonal projection onto mean-zero A-free fields; ``u`` has shape ``(d, n, ..., n)``."""
        uh = self.fft(u)
        out = np.einsum("...ij,j...->i...", self._P, uh)
        return self.ifft(out)

    def apply(self, u: np.ndarray) -> np.ndarray:
        """Spectral ``A u``, shape ``(l, n, ..., n)``."""
        return self.ifft(self._apply_hat(self.fft(u)))

    def _apply_hat(self, uh):
        # sum_i A^i (i k_i) u_hat
        return 1j * np.einsum("i...,ild,d...->l...", self._k, self.op.matrices, uh)

    def potential(self, u: np.ndarray) -> np.ndarray:
        """Minimal-norm ``V`` (shape ``(l, N, n, ..., n)``) with ``div V = -A u``.

        Equivalently ``∫ V·∇ψ = -Σ_i ∫ A^i u · ∂_i ψ`` for every periodic grid
        test function ``ψ``: ``V`` is minus the gradient part of the columns
        ``A^i u``, i.e. ``V_hat = -k (k · A(k) u_hat) / |k|^2`` with real ``k``.
        """
        return self.ifft(self._potential_hat(self.fft(u)))

    def _potential_hat(self, uh):
        k = self._k
        k2 = np.sum(k * k, axis=0)
        inv = np.divide(1.0, k2, out=np.zeros_like(k2), where=k2 > 0)
        kak = np.einsum("i...,ild,d...->l...", k, self.op.matrices, uh) * inv
        return -np.einsum("i...,l...->li...", k, kak)

    def potential_adjoint(self, V: np.ndarray) -> np.ndarray:
        k = self._k
        k2 = np.sum(k * k, axis=0)
        inv = np.divide(1.0, k2, out=np.zeros_like(k2), where=k2 > 0)
        Vh = self.fft(V)
        kv = np.einsum("i...,li...->l...", k, Vh) * inv
        return -self.ifft(np.einsum("i...,ild,l...->d...", k, self.op.matrices, kv))


_CACHE: dict = {}


def spectral(op: OperatorSpec, n: int, side: float = 1.0) -> SpectralOperator:
    key = (op.matrices.tobytes(), op.matrices.shape, n, float(side))
    so = _CACHE.get(key)
    if so is None:
        if len(_CACHE) > 64:
            _CACHE.clear()
        so = _CACHE[key] = SpectralOperator(op, n, side)
    return so


def project_field(op: OperatorSpec, u):
    """Project a :class:`~afhom.fields.PeriodicField` onto mean-zero A-free fields."""
    from .fields import PeriodicField
    _check_components(op, u, op.d)
    so = spectral(op, u.grid.n, u.grid.side)
    return PeriodicField(u.grid, so.project(u.data))


def apply_A(op: OperatorSpec, u):
    """Return ``(A u, residual)`` with residual ``||A u||_2 / ||u||_2`` (0 for ``u = 0``)."""
    from .fields import PeriodicField, lp_norm
    _check_components(op, u, op.d)
    so = spectral(op, u.grid.n, u.grid.side)
    Au = PeriodicField(u.grid, so.apply(u.data))
    nu = lp_norm(u, 2)
    res = lp_norm(Au, 2) / nu if nu > 0 else 0.0
    return Au, res


def _check_components(op, u, m):
    if u.grid.N != op.N:
        raise ConfigError(f"field lives in dimension {u.grid.N}, operator has N={op.N}")
    if u.components != m:
        raise ConfigError(f"field has {u.components} components, expected {m}")
