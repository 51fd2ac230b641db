"""Discrete cell problems on a cube ``Q``.

* :func:`solve_periodic` - ``M(f, xi, Q)``: periodic, mean-zero, A-free ``u``.
* :func:`solve_compact`  - ``M_c(f, xi, Q)``: ``u`` additionally vanishes near ``∂Q``.
* :func:`solve_relaxed`  - ``M^eta_c(f, xi, Q)``: compactly supported, mean-zero ``u``
  whose constraint violation has a potential ``V`` with ``mean |V|^p < eta``.

Every solver works with the normalized energy ``mean_x f(x, xi + u(x))`` (so
the value on ``Q`` is that times ``|Q|``) and returns the energy of a feasible
competitor, i.e. a certified upper bound of the discrete minimum.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, SolverDiverged
from .fields import Grid, PeriodicField, support_mask
from .operator import OperatorSpec, spectral

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class SolveOptions:
    max_iters: int = 3000
    grad_tol: float = 1e-8
    restarts: int = 5
    armijo: float = 1e-4
    backtrack: float = 0.5
    seed: int = 0
    init_amplitude: float = 0.5
    skip_restarts_if_convex: bool = True
    feas_tol: float = 1e-6
    bisection_steps: int = 30

    def __post_init__(self):
        if self.grad_tol <= 0 or self.feas_tol <= 0 or self.max_iters < 1 or self.restarts < 0:
            raise ConfigError("solver tolerances must be positive and counts non-negative")
        if not 0 < self.backtrack < 1 or not 0 < self.armijo < 1:
            raise ConfigError("backtracking parameters must lie in (0, 1)")


@dataclass
class CellSolution:
    kind: str
    value: float
    normalized: float
    minimizer: PeriodicField
    constraint_residual: float
    iterations: int
    restarts_used: int
    eta_usage: float = None
    status: str = "ok"
    diagnostics: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        out = {"kind": self.kind, "value": self.value, "normalized": self.normalized,
               "residuals": {"constraint": self.constraint_residual},
               "iterations": self.iterations, "restarts_used": self.restarts_used,
               "status": self.status}
        if self.eta_usage is not None:
            out["residuals"]["eta_usage"] = self.eta_usage
        for k in ("mean", "support", "growth_ok", "eta_binding"):
            if k in self.diagnostics:
                out["residuals" if k in ("mean", "support") else k] = (
                    {**out["residuals"], k: self.diagnostics[k]} if k in ("mean", "support")
                    else self.diagnostics[k])
        return out


def _dot(a, b):
    return float(np.sum(a * b)) / a[0].size


class _Energy:
    """``J(u) = mean_x f(x, xi + u(x))`` and its L^2(mean) gradient."""

    def __init__(self, f, xi, grid: Grid):
        self.f = f
        self.grid = grid
        self.bound = f.bind(grid.points())
        self.xi = np.asarray(xi, float).reshape((-1,) + (1,) * grid.N)

    def value(self, u):
        return float(np.mean(self.bound.value(self.xi + u)))

    def value_grad(self, u):
        v = self.xi + u
        return float(np.mean(self.bound.value(v))), self.bound.grad(v)


def _descend(value, value_grad, proj, u, opts: SolveOptions):
    """Projected gradient with Armijo backtracking and Barzilai-Borwein trial steps.

    ``proj`` is the orthogonal projector onto the (linear) feasible subspace
    and ``u`` must already be feasible; accepted steps never increase the value.
    """
    f, g = value_grad(u)
    if not math.isfinite(f):
        raise SolverDiverged("non-finite objective at the starting point", u)
    pg = proj(g)
    g2 = _dot(pg, pg)
    tol = opts.grad_tol * max(1.0, math.sqrt(g2))
    t = 1.0
    it = 0
    stall = 0
    history = [f]
    while it < opts.max_iters and math.sqrt(g2) > tol:
        while True:
            un = u - t * pg
            fn = value(un)
            if math.isfinite(fn) and fn <= f - opts.armijo * t * g2:
                break
            t *= opts.backtrack
            if t < 1e-18:
                return u, f, it, history
        fn, gn = value_grad(un)
        if not math.isfinite(fn):
            raise SolverDiverged("objective became non-finite", u)
        pgn = proj(gn)
        s = un - u
        y = pgn - pg
        sy = _dot(s, y)
        stall = stall + 1 if f - fn <= 1e-15 * max(1.0, abs(f)) else 0
        u, f, pg = un, fn, pgn
        g2 = _dot(pg, pg)
        history.append(f)
        t = _dot(s, s) / sy if sy > 0 else 4.0 * t
        it += 1
        if stall >= 25:
            break
    return u, f, it, history


def _is_convex(f) -> bool:
    from . import integrand as itg
    if isinstance(f, (itg.PPower, itg.Quadratic, itg.Laminate, itg.Checkerboard,
                      itg.RandomCheckerboard)):
        return True
    if isinstance(f, itg.Rescaled):
        return _is_convex(f.base)
    if isinstance(f, itg.PeriodicPlusCompact):
        return _is_convex(f.f_per) and _is_convex(f.f_comp)
    return False


def _starts(f, xi, shape, proj, opts: SolveOptions):
    starts = [np.zeros(shape)]
    n_rand = 0 if (opts.skip_restarts_if_convex and _is_convex(f)) else opts.restarts
    rng = np.random.default_rng(opts.seed)
    base = opts.init_amplitude * (1.0 + float(np.linalg.norm(xi)))
    for k in range(n_rand):
        r = proj(rng.standard_normal(shape))
        rms = math.sqrt(max(_dot(r, r), 1e-300))
        starts.append(r * (base * 0.5 ** k / rms))
    return starts


def _pick(results):
    # lowest value; ties within 1e-12 go to the lowest index
    best = 0
    for i, r in enumerate(results):
        if r[1] < results[best][1] - 1e-12:
            best = i
    return best


def _growth_ok(f, xi, value):
    s = float(np.linalg.norm(xi)) ** f.p
    return bool(value <= f.c0 * (1 + s) * (1 + 1e-12) + 1e-12)


def _check_inputs(op: OperatorSpec, f, xi, grid: Grid):
    xi = np.asarray(xi, float).ravel()
    if xi.size != op.d:
        raise ConfigError(f"xi has {xi.size} components, operator has d={op.d}")
    if grid.N != op.N:
        raise ConfigError(f"grid dimension {grid.N} does not match operator N={op.N}")
    return xi


# ---------------------------------------------------------------------------
# M(f, xi, Q)
# ---------------------------------------------------------------------------

def solve_periodic(op: OperatorSpec, f, xi, grid: Grid, opts: SolveOptions = None) -> CellSolution:
    opts = opts or SolveOptions()
    xi = _check_inputs(op, f, xi, grid)
    so = spectral(op, grid.n, grid.side)
    energy = _Energy(f, xi, grid)
    shape = (op.d,) + grid.shape
    results = []
    for u0 in _starts(f, xi, shape, so.project, opts):
        u, val, it, hist = _descend(energy.value, energy.value_grad, so.project, so.project(u0), opts)
        results.append((u, val, it, hist))
    b = _pick(results)
    u, val, it, hist = results[b]
    Au = so.apply(u)
    nu = math.sqrt(_dot(u, u))
    residual = math.sqrt(_dot(Au, Au)) / nu if nu > 0 else 0.0
    mean = float(np.max(np.abs(u.reshape(op.d, -1).mean(axis=1))))
    return CellSolution("periodic", val * grid.volume, val, PeriodicField(grid, u), residual,
                        sum(r[2] for r in results), len(results),
                        diagnostics={"mean": mean, "growth_ok": _growth_ok(f, xi, val),
                                     "best_restart": b, "history": hist})


# ---------------------------------------------------------------------------
# compactly supported competitors
# ---------------------------------------------------------------------------

class _Support:
    """Orthogonal projector onto mean-zero fields vanishing outside the mask."""

    def __init__(self, grid: Grid, margin: float):
        if not 0 < margin < 0.5:
            raise ConfigError("margin must lie in (0, 1/2)")
        self.mask = support_mask(grid, margin)
        self.count = int(self.mask.sum())

    def __call__(self, g):
        if self.count == 0:
            return np.zeros_like(g)
        m = self.mask
        mean = (g * m).reshape(g.shape[0], -1).sum(axis=1) / self.count
        return np.where(m, g - mean.reshape((-1,) + (1,) * (g.ndim - 1)), 0.0)


class _Budget:
    """``q(u) = mean |V(u)|^p`` for the potential used in the relaxed constraint.

    ``p = 2``: minimal-norm periodic potential (exact linear solve in Fourier
    space).  Other ``p``: the explicit columns ``V_{:,i} = -A^i u`` (feasible,
    not minimal).
    """

    def __init__(self, op: OperatorSpec, grid: Grid):
        self.op = op
        self.p = op.p
        self.so = spectral(op, grid.n, grid.side)

    def potential(self, u):
        if self.p == 2:
            return self.so.potential(u)
        return -np.einsum("ild,d...->li...", self.op.matrices, u)

    def value(self, u):
        V = self.potential(u)
        if self.p == 2:
            return float(np.mean(np.sum(V * V, axis=(0, 1))))
        return float(np.mean(np.sum(V * V, axis=(0, 1)) ** (self.p / 2)))

    def value_grad(self, u):
        V = self.potential(u)
        if self.p == 2:
            return float(np.mean(np.sum(V * V, axis=(0, 1)))), 2.0 * self.so.potential_adjoint(V)
        r2 = np.sum(V * V, axis=(0, 1))
        q = float(np.mean(r2 ** (self.p / 2)))
        w = self.p * np.where(r2 > 0, r2, 1.0) ** (self.p / 2 - 1) * (r2 > 0)
        return q, np.einsum("ild,li...->d...", self.op.matrices, w * V)

    def identity_residual(self, u):
        """Relative mismatch of ``div V = -A u`` (zero up to rounding by construction)."""
        V = self.potential(u)
        so = self.so
        divV = so.ifft(1j * np.einsum("i...,li...->l...", so._k, so.fft(V)))
        Au = so.apply(u)
        nA = math.sqrt(_dot(Au, Au))
        return math.sqrt(_dot(divV + Au, divV + Au)) / nA if nA > 0 else 0.0


def _penalized(energy, budget, lam):
    def value(u):
        return energy.value(u) + (lam * budget.value(u) if lam else 0.0)

    def value_grad(u):
        f, g = energy.value_grad(u)
        if lam:
            q, qg = budget.value_grad(u)
            return f + lam * q, g + lam * qg
        return f, g
    return value, value_grad


_BASIS_CACHE: dict = {}


def compact_basis(op: OperatorSpec, grid: Grid, margin: float, tol: float = 1e-6):
    """Orthonormal basis of the discrete compactly supported A-free fields.

    Columns are right singular vectors of the map ``u |-> (A u, mean(u))``
    restricted to fields supported in the mask, kept when the singular value is
    at most ``tol / 2``; every field in the span therefore has relative
    A-residual below ``tol``.  Returns ``(basis, mask)`` with ``basis`` of shape
    ``(d * #mask, k)``.  Cached per (operator, n, margin, tol).
    """
    key = (op.matrices.tobytes(), op.matrices.shape, grid.n, float(margin), float(tol))
    if key in _BASIS_CACHE:
        return _BASIS_CACHE[key]
    so = spectral(op, grid.n, grid.side)
    mask = support_mask(grid, margin)
    idx = np.flatnonzero(mask.ravel())
    m = idx.size
    # weight on the mean rows makes the mean constraint effectively exact
    wmean = 1e8
    cols = np.zeros((op.l * grid.n ** grid.N + op.d, op.d * m))
    e = np.zeros((op.d,) + grid.shape)
    flat = e.reshape(op.d, -1)
    for c in range(op.d):
        for j, p in enumerate(idx):
            flat[c, p] = 1.0
            Au = so.apply(e)
            flat[c, p] = 0.0
            col = c * m + j
            # match the mean-normalized residual: sum over l components, divide by grid size
            cols[:-op.d, col] = Au.ravel()
            cols[-op.d + c, col] = wmean
    if m == 0:
        basis = np.zeros((0, 0))
    else:
        _, s, vt = np.linalg.svd(cols, full_matrices=True)
        s_full = np.zeros(vt.shape[0])
        s_full[:s.size] = s
        keep = s_full <= 0.5 * tol
        basis = vt[keep].T.copy()
    if len(_BASIS_CACHE) > 16:
        _BASIS_CACHE.clear()
    _BASIS_CACHE[key] = (basis, mask)
    return basis, mask


class _Subspace:
    """Orthogonal projector onto the span of an embedded orthonormal basis."""

    def __init__(self, basis, mask, d):
        self.basis = basis
        self.mask = mask
        self.d = d

    def __call__(self, g):
        out = np.zeros_like(g)
        if self.basis.shape[1] == 0:
            return out
        gm = g[:, self.mask].ravel()
        out[:, self.mask] = (self.basis @ (self.basis.T @ gm)).reshape(self.d, -1)
        return out


def _relative_residual(so, u):
    Au = so.apply(u)
    nu = math.sqrt(_dot(u, u))
    return math.sqrt(_dot(Au, Au)) / nu if nu > 0 else 0.0


def solve_compact(op: OperatorSpec, f, xi, grid: Grid, margin: float = 0.125,
                  opts: SolveOptions = None) -> CellSolution:
    """``M_c``: descent inside the discrete compactly supported A-free subspace.

    The subspace comes from :func:`compact_basis`; the returned competitor is
    re-checked (A-residual, mean, support) and replaced by ``u = 0`` with
    status ``"infeasible"`` should the check fail.
    """
    opts = opts or SolveOptions()
    xi = _check_inputs(op, f, xi, grid)
    if not 0 < margin <= 0.25:
        raise ConfigError("solve_compact: margin must lie in (0, 1/4]")
    so = spectral(op, grid.n, grid.side)
    energy = _Energy(f, xi, grid)
    basis, mask = compact_basis(op, grid, margin, opts.feas_tol)
    proj = _Subspace(basis, mask, op.d)
    shape = (op.d,) + grid.shape
    results = []
    starts = _starts(f, xi, shape, proj, opts) if basis.shape[1] else [np.zeros(shape)]
    for u0 in starts:
        u, val, it, hist = _descend(energy.value, energy.value_grad, proj, proj(u0), opts)
        results.append((u, val, it, hist))
    b = _pick(results)
    u, val, _, hist = results[b]
    res = _relative_residual(so, u)
    mean = float(np.max(np.abs(u.reshape(op.d, -1).mean(axis=1))))
    outside = float(np.max(np.abs(u[:, ~mask]))) if (~mask).any() else 0.0
    status = "ok"
    failed = {"residual": res, "mean": mean, "support": outside}
    if res > opts.feas_tol or mean > 1e-12 or outside > 0:
        status = "infeasible"
        u = np.zeros(shape)
        val = energy.value(u)
        res, mean = 0.0, 0.0
    return CellSolution("compact", val * grid.volume, val, PeriodicField(grid, u), res,
                        sum(r[2] for r in results), len(starts), status=status,
                        diagnostics={"mean": mean, "support": 0.0, "margin": margin,
                                     "subspace_dim": int(basis.shape[1]),
                                     "growth_ok": _growth_ok(f, xi, val), "history": hist,
                                     "failed_check": failed if status != "ok" else None})


def solve_relaxed(op: OperatorSpec, f, xi, grid: Grid, eta: float, margin: float = 0.125,
                  opts: SolveOptions = None, warm: np.ndarray = None) -> CellSolution:
    """``M^eta_c``: compact, mean-zero ``u`` with ``mean |V(u)|^p < eta``.

    Solves ``min J(u) + lam q(u)`` on the support subspace and bisects ``lam``
    (log scale) for the smallest multiplier whose minimizer meets the budget;
    infeasible iterates are also scaled back onto the budget.  ``warm`` adds a
    caller-supplied competitor (e.g. a compact solution).
    """
    opts = opts or SolveOptions()
    xi = _check_inputs(op, f, xi, grid)
    if not eta > 0:
        raise ConfigError("eta must be positive")
    if not 0 < margin < 0.5:
        raise ConfigError("margin must lie in (0, 1/2)")
    energy = _Energy(f, xi, grid)
    budget = _Budget(op, grid)
    sup = _Support(grid, margin)
    shape = (op.d,) + grid.shape
    limit = eta * (1 - 1e-12)
    so = spectral(op, grid.n, grid.side)
    zero = np.zeros(shape)
    candidates = [(zero, energy.value(zero), 0.0)]
    total_it = 0

    def consider(u):
        q = budget.value(u)
        if q < limit:
            candidates.append((u, energy.value(u), q))
        elif q > 0:
            s = math.sqrt(limit / q) if op.p == 2 else (limit / q) ** (1.0 / op.p)
            us = s * (1 - 1e-12) * u
            qs = budget.value(us)
            if qs < eta:
                candidates.append((us, energy.value(us), qs))
        return q

    if warm is not None:
        consider(sup(np.asarray(warm, float)))
    starts = _starts(f, xi, shape, lambda g: sup(so.project(g)), opts) if sup.count else []
    for u0 in starts:
        u, _, it, _ = _descend(*_penalized(energy, budget, 0.0), sup, sup(u0), opts)
        total_it += it
        if consider(u) < limit:
            continue
        lo, hi, u_hi = 0.0, None, None
        lam = 1.0
        while lam <= 1e12:
            u, _, it, _ = _descend(*_penalized(energy, budget, lam), sup, u, opts)
            total_it += it
            if consider(u) < limit:
                hi, u_hi = lam, u
                break
            lo, lam = lam, lam * 10.0
        if hi is None:
            continue
        lo = max(lo, hi / 10.0)
        for _ in range(opts.bisection_steps):
            if hi / lo < 1 + 1e-6:
                break
            mid = math.sqrt(lo * hi)
            u, _, it, _ = _descend(*_penalized(energy, budget, mid), sup, u_hi, opts)
            total_it += it
            if consider(u) < limit:
                hi, u_hi = mid, u
            else:
                lo = mid
    b = _pick([(c[0], c[1]) for c in candidates])
    u, val, q = candidates[b]
    binding = b == 0 and len(candidates) > 0 and not np.any(u)
    mean = float(np.max(np.abs(u.reshape(op.d, -1).mean(axis=1))))
    return CellSolution("relaxed", val * grid.volume, val, PeriodicField(grid, u),
                        budget.identity_residual(u), total_it, len(starts), eta_usage=q / eta,
                        status="eta_binding" if binding and len(starts) and _has_descent(energy, sup)
                        else "ok",
                        diagnostics={"mean": mean, "support": 0.0, "eta": eta, "margin": margin,
                                     "eta_binding": bool(binding), "growth_ok": _growth_ok(f, xi, val),
                                     "budget": q})


def _has_descent(energy, sup):
    # u = 0 is a non-stationary point of J on the support subspace
    shape = energy.xi.shape[:1] + energy.grid.shape
    g = sup(energy.value_grad(np.zeros(shape))[1])
    return _dot(g, g) > 1e-20


def potential_field(op: OperatorSpec, u: PeriodicField) -> PeriodicField:
    """The potential ``V`` used by the relaxed constraint, as an ``l*N``-component field."""
    V = _Budget(op, u.grid).potential(u.data)
    return PeriodicField(u.grid, V.reshape((op.l * op.N,) + u.grid.shape))


# ---------------------------------------------------------------------------
# diagnostics
# ---------------------------------------------------------------------------

def lipschitz_constant(c0: float, c1: float, p: float) -> float:
    """A constant ``c5`` for ``|m(xi1) - m(xi2)| <= c5 (1 + |xi1| + |xi2|)^{p-1} |xi1 - xi2|``.

    ``m`` is any normalized cell minimum of an integrand with p-Lipschitz
    constant ``c1`` and growth ``m(xi) <= c0 (1 + |xi|^p)``.  Writing the
    asymmetric bound with ``m(xi2)^{(p-1)/p} <= c0^{(p-1)/p} (1 + |xi2|)^{p-1}``
    gives ``c5 = c1 (2 + c0^{(p-1)/p})``.
    """
    return c1 * (2.0 + c0 ** ((p - 1) / p))


def lipschitz_check(op, f, xi1, xi2, grid: Grid, eta: float, margin: float = 0.125,
                    opts: SolveOptions = None, solutions=None) -> dict:
    xi1 = np.asarray(xi1, float).ravel()
    xi2 = np.asarray(xi2, float).ravel()
    if solutions is None:
        s1 = solve_relaxed(op, f, xi1, grid, eta, margin, opts)
        s2 = solve_relaxed(op, f, xi2, grid, eta, margin, opts)
    else:
        s1, s2 = solutions
    dist = float(np.linalg.norm(xi1 - xi2))
    c5 = lipschitz_constant(f.c0, f.c1, f.p)
    scale = (1 + np.linalg.norm(xi1) + np.linalg.norm(xi2)) ** (f.p - 1) * dist
    lhs = abs(s1.normalized - s2.normalized)
    tol = 2 * max(opts.feas_tol if opts else 1e-6, 1e-8)
    return {"lhs": lhs, "bound": c5 * scale + tol, "c5": c5,
            "empirical_c5": lhs / scale if scale > 0 else 0.0,
            "passed": bool(lhs <= c5 * scale + tol)}
