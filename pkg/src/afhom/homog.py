"""Large-cube limits, small-cube reconstruction and quasiconvexity diagnostics."""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import RegularGridInterpolator

from .cellsolver import SolveOptions, lipschitz_constant, solve_compact, solve_periodic, solve_relaxed
from .errors import AfhomError, ConfigError
from .fields import Grid, PeriodicField
from .integrand import rescale
from .operator import OperatorSpec, spectral


def next_pow2(m: float) -> int:
    return max(2, 1 << max(1, math.ceil(math.log2(max(m, 2)))))


def default_centers(N: int) -> list:
    third = [0.0] * N
    third[0] = 1.0 / 3.0
    return [tuple([0.0] * N), tuple(third), tuple([0.7] * N)]


def _map_jobs(fn, jobs, workers: int):
    if workers and workers > 1 and len(jobs) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(fn, jobs))
    return [fn(j) for j in jobs]


def extrapolate(radii, values):
    """Limit estimate of ``values`` as ``r -> inf``.

    Uses the quadratic in ``1/r`` through the last three points when they are
    monotone, falling back to the line through the last two and then to the
    last value whenever the extrapolate would reverse the observed trend.
    Returns ``(limit, rule)``.
    """
    v = [float(x) for x in values]
    if len(v) < 3:
        return v[-1], "last"
    h = 1.0 / np.asarray(radii[-3:], float)
    t = np.asarray(v[-3:])
    d = np.diff(t)
    if np.all(d == 0):
        return v[-1], "constant"
    down = bool(np.all(d <= 0))
    if not (down or np.all(d >= 0)):
        return v[-1], "last"

    def consistent(q):
        return math.isfinite(q) and (q <= t[-1] if down else q >= t[-1])

    q = float(np.polyval(np.polyfit(h, t, 2), 0.0))
    if consistent(q):
        return q, "richardson3"
    lin = float(t[-1] - (t[-2] - t[-1]) * h[-1] / (h[-2] - h[-1]))
    if consistent(lin):
        return lin, "richardson2"
    return v[-1], "last"


@dataclass
class HomogEstimate:
    xi: tuple
    k: float
    centers: list
    radii: list
    values: list
    limit: float
    spread: float
    relative_spread: float
    center_limits: list
    rules: list
    center_independent: bool
    failures: list = field(default_factory=list)
    eta_usage: list = field(default_factory=list)

    def to_json(self) -> dict:
        return {"xi": list(self.xi), "k": self.k, "centers": [list(c) for c in self.centers],
                "radii": list(self.radii), "values": self.values, "limit": self.limit,
                "spread": self.spread, "relative_spread": self.relative_spread,
                "center_limits": self.center_limits, "extrapolation": self.rules,
                "center_independent": self.center_independent, "failures": self.failures}

    def rows(self):
        """CSV rows ``(xi..., k, center..., r, normalized_value)``."""
        for c, vals in zip(self.centers, self.values):
            for r, v in zip(self.radii, vals):
                yield list(self.xi) + [self.k] + list(c) + [r, v]


def cube_grid(N: int, r: float, center, density: float, n_cap: int = 128) -> Grid:
    n = min(next_pow2(density * r), n_cap)
    return Grid(n, N, tuple(r * np.asarray(center, float)), float(r))


def fhom_at(op: OperatorSpec, f, xi, k: float = 16, radii=(1, 2, 4, 8), centers=None,
            density: float = 8, opts: SolveOptions = None, n_cap: int = 128, margin_cells: int = 1,
            tol_center: float = 1e-2, workers: int = 1) -> HomogEstimate:
    """Normalized relaxed minima ``M^{1/k}_c(f, xi, Q_r(r x)) / r^N`` along ``radii``.

    Each cube gets ``next_pow2(density * r)`` points per axis; competitors vanish
    on the outer ``margin_cells`` grid layers.  ``limit`` is the mean over
    centers of the extrapolated per-center limits; ``spread`` is the largest
    deviation from the center mean at the largest radius.
    """
    radii = [float(r) for r in radii]
    if any(b <= a for a, b in zip(radii, radii[1:])) or radii[0] <= 0:
        raise ConfigError("radii must be positive and increasing")
    if k <= 0:
        raise ConfigError("k must be positive")
    if margin_cells < 1:
        raise ConfigError("margin_cells must be >= 1")
    N = op.N
    centers = [tuple(float(v) for v in c) for c in (centers or default_centers(N))]
    xi = np.asarray(xi, float).ravel()
    jobs = [(ci, ri) for ci in range(len(centers)) for ri in range(len(radii))]

    def run(job):
        ci, ri = job
        g = cube_grid(N, radii[ri], centers[ci], density, n_cap)
        margin = (margin_cells - 0.5) / g.n
        try:
            s = solve_relaxed(op, f, xi, g, 1.0 / k, margin, opts)
            return s.normalized, s.eta_usage, None
        except AfhomError as exc:
            return None, None, f"center {centers[ci]} r={radii[ri]}: {exc}"

    out = _map_jobs(run, jobs, workers)
    values = [[None] * len(radii) for _ in centers]
    usage = [[None] * len(radii) for _ in centers]
    failures = []
    for (ci, ri), (v, q, err) in zip(jobs, out):
        values[ci][ri] = v
        usage[ci][ri] = q
        if err:
            failures.append(err)
    limits, rules = [], []
    for vals in values:
        ok = [(r, v) for r, v in zip(radii, vals) if v is not None]
        if not ok:
            limits.append(None)
            rules.append("failed")
            continue
        lim, rule = extrapolate([r for r, _ in ok], [v for _, v in ok])
        limits.append(lim)
        rules.append(rule)
    good = [x for x in limits if x is not None]
    limit = float(np.mean(good)) if good else float("nan")
    last = [vals[-1] for vals in values if vals[-1] is not None]
    mean_last = float(np.mean(last)) if last else float("nan")
    spread = float(max(abs(v - mean_last) for v in last)) if last else float("nan")
    rel = spread / abs(mean_last) if last and mean_last != 0 else spread
    return HomogEstimate(tuple(xi.tolist()), float(k), centers, radii, values, limit, spread, rel,
                         limits, rules, bool(rel <= tol_center), failures, usage)


def fhom_sup(op, f, xi, k_list=(1, 4, 16), **kw) -> dict:
    """``sup_k f^k_hom(xi)`` realized as the estimate at the largest ``k``.

    Also reports whether the estimates were non-decreasing in ``k`` (within
    ``1e-6`` relative), which the supremum-is-a-limit property predicts.
    """
    ests = [fhom_at(op, f, xi, k=k, **kw) for k in sorted(k_list)]
    lims = [e.limit for e in ests]
    mono = all(b >= a - 1e-6 * max(1.0, abs(a)) for a, b in zip(lims, lims[1:]))
    return {"value": lims[-1], "limits": lims, "k": sorted(k_list), "monotone_in_k": mono,
            "estimates": ests}


# ---------------------------------------------------------------------------
# exact rescaling and small cubes
# ---------------------------------------------------------------------------

def scaling_identity_check(op, f, xi, k: float, rho: float, x, eps_list, n: int = 32,
                           margin: float = 0.125, opts: SolveOptions = None, tol: float = 1e-8) -> dict:
    """Compare ``M^{1/k}_c(f_eps, xi, Q_rho(x))/rho^N`` with ``M^{1/k}_c(f, xi, Q_{rho/eps}(x/eps))/(rho/eps)^N``.

    Both cubes use ``n`` points per axis, so grid points correspond under
    ``y = x / eps``; ``1/eps`` must be a positive integer.
    """
    x = np.asarray(x, float).ravel()
    if x.size != op.N:
        raise ConfigError("center dimension does not match the operator")
    rows = []
    for eps in eps_list:
        eps = float(eps)
        inv = 1.0 / eps if eps > 0 else float("inf")
        if not (eps > 0 and abs(inv - round(inv)) < 1e-12):
            raise ConfigError(f"eps={eps}: 1/eps must be a positive integer so that the rescaled "
                              "cube holds whole periods and the grids map onto each other")
        small = solve_relaxed(op, rescale(f, eps), xi, Grid(n, op.N, tuple(x), rho), 1.0 / k, margin, opts)
        big = solve_relaxed(op, f, xi, Grid(n, op.N, tuple(x / eps), rho / eps), 1.0 / k, margin, opts)
        lhs = small.value / rho ** op.N
        rhs = eps ** op.N * big.value / rho ** op.N
        rel = abs(lhs - rhs) / max(abs(rhs), 1e-300)
        rows.append({"eps": eps, "lhs": lhs, "rhs": rhs, "relative_difference": rel, "passed": rel <= tol})
    return {"rows": rows, "passed": all(r["passed"] for r in rows), "tol": tol}


def small_cube_reconstruction(op, f, x, xi, rhos=(0.25, 0.125, 0.0625), n: int = 16,
                              margin: float = 0.125, opts: SolveOptions = None, tol: float = 5e-3) -> dict:
    """``M(f, xi, Q_rho(x))/rho^N`` and ``M_c/rho^N`` along decreasing ``rho`` against ``f(x, xi)``."""
    x = np.asarray(x, float).ravel()
    xi = np.asarray(xi, float).ravel()
    target = float(f.eval(x, xi))
    rows = []
    for rho in sorted(rhos, reverse=True):
        g = Grid(n, op.N, tuple(x), rho)
        vals = f.bind(g.points()).value(xi.reshape((-1,) + (1,) * op.N) + np.zeros((op.d,) + g.shape))
        near = bool(np.ptp(vals) > 1e-12 * max(1.0, abs(target)))
        m = solve_periodic(op, f, xi, g, opts).normalized
        mc = solve_compact(op, f, xi, g, margin, opts).normalized
        rows.append({"rho": rho, "periodic": m, "compact": mc, "near_discontinuity": near,
                     "rel_err_periodic": abs(m - target) / max(abs(target), 1e-300),
                     "rel_err_compact": abs(mc - target) / max(abs(target), 1e-300)})
    last = rows[-1]
    passed = last["rel_err_periodic"] <= tol and last["rel_err_compact"] <= tol
    return {"target": target, "rows": rows, "tol": tol, "passed": bool(passed),
            "warning": "cube meets a coefficient discontinuity" if last["near_discontinuity"] else None}


def gamma_inequality_check(op, f, xi, grid: Grid = None, k_list=(1, 2, 4, 8), fhom_value: float = None,
                           density: float = 8, opts: SolveOptions = None, tol: float = 2e-2,
                           fhom_k: float = 1e5, fhom_radii=(2, 4, 8)) -> dict:
    """``M(f_k, xi, Q)/|Q|`` for ``f_k(x, xi) = f(k x, xi)`` against ``f_hom(xi)``.

    ``f_hom`` defaults to :func:`fhom_at` with a small budget ``1/fhom_k`` on a
    single centered cube sequence.  The limit-superior and limit-inferior are
    taken over the second half of ``k_list``.
    """
    if any(int(k) != k or k < 1 for k in k_list):
        raise ConfigError("k_list must contain positive integers")
    grid = grid or Grid(2, op.N)
    xi = np.asarray(xi, float).ravel()
    if fhom_value is None:
        est = fhom_at(op, f, xi, k=fhom_k, radii=fhom_radii, centers=[(0.0,) * op.N],
                      density=density, opts=opts)
        fhom_value, fhom_source = est.limit, {"k": fhom_k, "radii": list(fhom_radii),
                                             "values": est.values[0], "rule": est.rules[0]}
    else:
        fhom_source = "given"
    values = []
    for k in k_list:
        n = min(next_pow2(density * k * grid.side), 128)
        g = Grid(max(n, grid.n), op.N, grid.center, grid.side)
        values.append(solve_periodic(op, rescale(f, 1.0 / k), xi, g, opts).normalized)
    tail = values[len(values) // 2:]
    limsup, liminf = max(tail), min(tail)
    passed = limsup <= fhom_value + tol and liminf >= fhom_value - tol and abs(values[-1] - fhom_value) <= tol
    return {"k": list(k_list), "values": values, "fhom": fhom_value, "fhom_source": fhom_source,
            "limsup": limsup, "liminf": liminf, "tol": tol, "passed": bool(passed)}


# ---------------------------------------------------------------------------
# quasiconvexity
# ---------------------------------------------------------------------------

def _require_constant(g):
    if not g.x_independent:
        raise ConfigError("quasiconvexity tests need an x-independent integrand")


def aqc_test(op: OperatorSpec, g, xi, trials: int = 10000, n: int = 16, seed: int = 0,
             tol: float = 1e-12) -> dict:
    """Jensen test ``g(xi) <= mean g(xi + w)`` over random periodic mean-zero A-free ``w``.

    Test fields alternate between projected white noise and projected single
    Fourier modes, with log-uniform amplitudes.  The most negative margin is
    kept as the witness candidate.
    """
    _require_constant(g)
    xi = np.asarray(xi, float).ravel()
    grid = Grid(n, op.N)
    so = spectral(op, n, 1.0)
    rng = np.random.default_rng(seed)
    shape = (op.d,) + grid.shape
    base = float(g.eval(np.zeros(op.N), xi))
    xs = xi.reshape((-1,) + (1,) * op.N)
    x0 = np.zeros(op.N)
    pts = grid.points()
    scale = 1.0 + float(np.linalg.norm(xi))
    violations, worst, witness = 0, float("inf"), None
    for t in range(trials):
        if t % 2 == 0:
            w = rng.standard_normal(shape)
        else:
            m = rng.integers(-3, 4, size=op.N)
            phase = rng.uniform(0, 2 * np.pi)
            wave = np.cos(2 * np.pi * np.tensordot(m, pts, axes=1) + phase)
            w = rng.standard_normal(op.d).reshape((-1,) + (1,) * op.N) * wave
        w = so.project(w)
        rms = math.sqrt(float(np.mean(np.sum(w * w, axis=0))))
        if rms == 0:
            continue
        w *= scale * 10 ** rng.uniform(-2, 1) / rms
        avg = float(np.mean(g.eval(x0, xs + w)))
        margin = avg - base
        if margin < -tol * max(1.0, abs(base)):
            violations += 1
        if margin < worst:
            worst, witness = margin, w
    return {"trials": trials, "violations": violations, "worst_margin": worst, "f_xi": base,
            "witness": PeriodicField(grid, witness) if witness is not None and violations else None,
            "passed": violations == 0}


def aqc_envelope_solution(op, g, xi, n: int = 32, opts: SolveOptions = None):
    _require_constant(g)
    return solve_periodic(op, g, xi, Grid(n, op.N), opts)


def aqc_envelope(op, g, xi, n: int = 32, opts: SolveOptions = None) -> float:
    """Discrete A-quasiconvexification at ``xi``: the periodic cell minimum on the unit cube."""
    return aqc_envelope_solution(op, g, xi, n, opts).normalized


def convex_envelope(g, xi, half_width: float, resolution: int = 81) -> float:
    """Convex envelope of ``g`` at ``xi`` by a double discrete Legendre transform.

    ``g`` is sampled on a box ``[-half_width, half_width]^d`` (``d <= 2``);
    the slope lattice spans the finite-difference slope range of the samples.
    """
    _require_constant(g)
    xi = np.asarray(xi, float).ravel()
    d = xi.size
    if d > 2:
        raise ConfigError("convex_envelope supports d <= 2")
    axis = np.linspace(-half_width, half_width, resolution)
    pts = np.stack(np.meshgrid(*[axis] * d, indexing="ij")).reshape(d, -1)
    vals = np.asarray(g.eval(np.zeros(1), pts), float).ravel()
    step = axis[1] - axis[0]
    smax = 0.0
    grid_vals = vals.reshape((resolution,) * d)
    for ax in range(d):
        smax = max(smax, float(np.max(np.abs(np.diff(grid_vals, axis=ax)))) / step)
    slopes_1d = np.linspace(-smax, smax, 2 * resolution + 1)
    slopes = np.stack(np.meshgrid(*[slopes_1d] * d, indexing="ij")).reshape(d, -1)
    conj = np.empty(slopes.shape[1])
    for i in range(0, slopes.shape[1], 512):
        s = slopes[:, i:i + 512]
        conj[i:i + 512] = np.max(s.T @ pts - vals[None, :], axis=1)
    return float(np.max(slopes.T @ xi - conj))


# ---------------------------------------------------------------------------
# tabulation
# ---------------------------------------------------------------------------

@dataclass
class FhomTable:
    axes: list
    values: np.ndarray
    holes: np.ndarray
    interpolation: str = "multilinear"
    diagnostics: dict = field(default_factory=dict)

    def __call__(self, xi):
        if self.holes.any():
            raise AfhomError("table has holes; interpolation is undefined")
        interp = RegularGridInterpolator(self.axes, self.values, method="linear")
        return float(interp(np.asarray(xi, float).reshape(1, -1))[0])

    def nodes(self):
        return np.stack(np.meshgrid(*self.axes, indexing="ij"), axis=-1).reshape(-1, len(self.axes))

    def to_json(self) -> dict:
        vals = np.where(self.holes, np.nan, self.values)
        return {"axes": [a.tolist() for a in self.axes],
                "values": [None if not math.isfinite(v) else float(v) for v in vals.ravel()],
                "interpolation": self.interpolation, "diagnostics": self.diagnostics}


def lipschitz_neighbors(table: FhomTable, c1: float, c0: float, p: float, tol: float = 1e-6) -> dict:
    c5 = lipschitz_constant(c0, c1, p)
    worst, pair = 0.0, None
    shape = table.values.shape
    for idx in np.ndindex(shape):
        for ax in range(len(shape)):
            jdx = list(idx)
            jdx[ax] += 1
            if jdx[ax] >= shape[ax]:
                continue
            jdx = tuple(jdx)
            if table.holes[idx] or table.holes[jdx]:
                continue
            a = np.array([table.axes[i][idx[i]] for i in range(len(shape))])
            b = np.array([table.axes[i][jdx[i]] for i in range(len(shape))])
            bound = c5 * (1 + np.linalg.norm(a) + np.linalg.norm(b)) ** (p - 1) * np.linalg.norm(a - b)
            ratio = abs(table.values[idx] - table.values[jdx]) / (bound + tol)
            if ratio > worst:
                worst, pair = float(ratio), (a.tolist(), b.tolist())
    return {"c5": c5, "worst_ratio": worst, "worst_pair": pair, "passed": worst <= 1.0}


def tabulate_fhom(op, f, xi_box, resolution: int = 3, k: float = 16, radii=(1, 2, 4), centers=None,
                  density: float = 8, opts: SolveOptions = None, workers: int = 1) -> FhomTable:
    """``f_hom`` on a regular lattice in ``xi_box = [(lo, hi), ...]``."""
    if resolution < 2:
        raise ConfigError("resolution must be >= 2")
    if len(xi_box) != op.d:
        raise ConfigError(f"xi_box needs {op.d} intervals")
    axes = [np.linspace(lo, hi, resolution) for lo, hi in xi_box]
    nodes = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, op.d)
    centers = centers or [(0.0,) * op.N]

    def run(xi):
        try:
            return fhom_at(op, f, xi, k=k, radii=radii, centers=centers, density=density, opts=opts).limit
        except AfhomError:
            return float("nan")

    vals = np.array(_map_jobs(run, list(nodes), workers)).reshape((resolution,) * op.d)
    holes = ~np.isfinite(vals)
    table = FhomTable(axes, np.where(holes, 0.0, vals), holes)
    table.diagnostics = {"lipschitz": lipschitz_neighbors(table, f.c1, f.c0, f.p),
                         "holes": int(holes.sum()), "k": k, "radii": list(radii)}
    return table
