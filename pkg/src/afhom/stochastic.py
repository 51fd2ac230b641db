"""Random media: the covariant subadditive process and its ergodic limit.

Rectangles are half-open lattice cubes ``[a, a + s)^N`` with integer corner
``a`` and integer side ``s``; the process value is the relaxed compact cell
minimum on the cube.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .cellsolver import SolveOptions, _Budget, _Energy, solve_relaxed
from .errors import AfhomError, ConfigError
from .fields import Grid
from .homog import _map_jobs, extrapolate, next_pow2
from .integrand import RandomCheckerboard, sample_random, shift
from .operator import OperatorSpec


def lattice_cube(corner, side, N: int):
    a = np.asarray(corner, float).ravel()
    if a.size == 1 and N > 1:
        a = np.full(N, a[0])
    if a.size != N:
        raise ConfigError(f"corner has {a.size} coordinates, expected {N}")
    if np.any(a != np.round(a)) or side != round(side) or side < 1:
        raise ConfigError("rectangles must be lattice-aligned: integer corner and positive integer side")
    return tuple(int(v) for v in a), int(side)


def _realize(f, seed):
    return sample_random(f, seed) if isinstance(f, RandomCheckerboard) and f.state is None else f


def _grid(corner, side, N, density):
    n = next_pow2(density * side)
    center = tuple(float(c) + side / 2.0 for c in corner)
    return Grid(n, N, center, float(side))


@dataclass
class ProcessSample:
    seed: int
    xi: tuple
    eta: float
    corner: tuple
    side: int
    value: float
    normalized: float
    eta_usage: float
    bound: float
    minimizer: object = field(default=None, repr=False)
    potential: object = field(default=None, repr=False)

    @property
    def volume(self) -> float:
        return float(self.side) ** len(self.corner)

    def to_json(self) -> dict:
        return {"seed": self.seed, "xi": list(self.xi), "eta": self.eta, "corner": list(self.corner),
                "side": self.side, "value": self.value, "normalized": self.normalized,
                "eta_usage": self.eta_usage, "bound": self.bound}


def sample_process(op: OperatorSpec, f_random, seed: int, xi, eta: float, corner, side,
                   density: float = 8, margin_cells: int = 1, opts: SolveOptions = None,
                   warm=None) -> ProcessSample:
    """``Phi(omega, R) = M^eta_c(f(omega), xi, interior of R)`` for ``R = [corner, corner + side)^N``."""
    corner, side = lattice_cube(corner, side, op.N)
    f = _realize(f_random, seed)
    g = _grid(corner, side, op.N, density)
    margin = (margin_cells - 0.5) / g.n
    try:
        s = solve_relaxed(op, f, xi, g, eta, margin, opts, warm=warm)
    except AfhomError as exc:
        raise type(exc)(f"seed={seed} R=[{corner}, +{side}): {exc}") from exc
    xi = np.asarray(xi, float).ravel()
    bound = f.c0 * (1 + float(np.linalg.norm(xi)) ** f.p) * g.volume
    V = _Budget(op, g).potential(s.minimizer.data)
    return ProcessSample(int(seed), tuple(xi.tolist()), float(eta), corner, side, s.value, s.normalized,
                         s.eta_usage, bound, s.minimizer, V)


def covariance_test(op, f_random, seed: int, xi, eta: float, corner, side, z_list, density: float = 8,
                    opts: SolveOptions = None, tol: float = 1e-10) -> dict:
    """``Phi(omega, R + z) = Phi(tau_z omega, R)`` for each integer shift ``z``."""
    f = _realize(f_random, seed)
    rows = []
    for z in z_list:
        z = np.asarray(z).ravel()
        if np.any(z != np.round(z)) or z.size != op.N:
            raise ConfigError("shifts must be integer vectors of dimension N")
        z = tuple(int(v) for v in z)
        moved = tuple(a + b for a, b in zip(lattice_cube(corner, side, op.N)[0], z))
        lhs = sample_process(op, f, seed, xi, eta, moved, side, density, opts=opts).value
        fz = shift(f, z) if isinstance(f, RandomCheckerboard) else f
        rhs = sample_process(op, fz, seed, xi, eta, corner, side, density, opts=opts).value
        rel = abs(lhs - rhs) / max(abs(rhs), 1e-300)
        rows.append({"z": list(z), "lhs": lhs, "rhs": rhs, "relative_difference": rel, "passed": rel <= tol})
    return {"seed": seed, "rows": rows, "passed": all(r["passed"] for r in rows), "tol": tol}


def random_partition(side: int, N: int, rng, min_side: int = 1):
    """Random recursive split of ``[0, side)^N`` into ``2^N`` halves (side must be a power of two).

    Returns a list of ``(corner, side)`` sub-cubes.
    """
    if side & (side - 1):
        raise ConfigError("random partitions need a power-of-two side")
    out = []

    def split(corner, s):
        if s <= min_side or rng.random() < 0.4:
            out.append((corner, s))
            return
        h = s // 2
        for offs in np.ndindex(*(2,) * N):
            split(tuple(c + h * o for c, o in zip(corner, offs)), h)

    split((0,) * N, side)
    return out


def subadditivity_test(op, f_random, seed: int, xi, eta: float, corner, side, partition,
                       density: float = 8, opts: SolveOptions = None, solver_tol: float = 1e-6) -> dict:
    """``Phi(R) <= sum_i Phi(R_i)`` for a partition of ``R`` into lattice sub-cubes.

    ``partition`` lists ``(corner, side)`` pairs with corners relative to ``R``.

    The sub-minimizers and their potentials are glued (each is supported inside
    its own sub-cube) and evaluated on ``R``: the glued objective must equal the
    sum of the parts and the glued potential must respect the budget on ``R``.
    The glued field is also offered to the solve on ``R`` as a competitor.  With
    the periodic potential surrogate the glued ``V`` is not a potential of the
    glued field across interfaces, so the minimal-potential budget of the glued
    field on ``R`` is reported as ``glued_min_budget_usage``.
    """
    corner, side = lattice_cube(corner, side, op.N)
    f = _realize(f_random, seed)
    big = _grid(corner, side, op.N, density)
    pieces = [(tuple(int(c) for c in pc), int(ps)) for pc, ps in partition]
    if sum(ps ** op.N for _, ps in pieces) != side ** op.N:
        raise ConfigError("partition volumes do not add up to the rectangle")
    u = np.zeros((op.d,) + big.shape)
    V = np.zeros((op.l, op.N) + big.shape)
    cover = np.zeros(big.shape, int)
    parts = []
    h = big.h
    for pc, ps in pieces:
        pc_abs = tuple(a + b for a, b in zip(corner, pc))
        s = sample_process(op, f, seed, xi, eta, pc_abs, ps, density, opts=opts)
        g = _grid(pc_abs, ps, op.N, density)
        if g.h != h:
            raise ConfigError("sub-cube grids do not share the spacing of the rectangle grid")
        off = [round((pc_abs[i] - corner[i]) / h) for i in range(op.N)]
        sl = tuple(slice(o, o + g.n) for o in off)
        u[(slice(None),) + sl] = s.minimizer.data
        V[(slice(None), slice(None)) + sl] = s.potential
        cover[sl] += 1
        parts.append(s)
    if not np.all(cover == 1):
        raise ConfigError("sub-cubes overlap or leave gaps")
    energy = _Energy(f, xi, big)
    glued_value = energy.value(u) * big.volume
    total = math.fsum(s.value for s in parts)
    glued_budget = float(np.mean(np.sum(V * V, axis=(0, 1)))) if op.p == 2 else \
        float(np.mean(np.sum(V * V, axis=(0, 1)) ** (op.p / 2)))
    min_budget = _Budget(op, big).value(u)
    whole = sample_process(op, f, seed, xi, eta, corner, side, density, opts=opts, warm=u)
    additive = abs(glued_value - total) <= 1e-10 * max(1.0, abs(total))
    sub = whole.value <= total + solver_tol * big.volume
    return {"seed": seed, "corner": list(corner), "side": side,
            "partition": [[list(pc), ps] for pc, ps in pieces],
            "whole": whole.value, "parts": [s.value for s in parts], "sum_parts": total,
            "glued_value": glued_value, "glued_additive": bool(additive),
            "glued_budget_usage": glued_budget / eta, "glued_min_budget_usage": min_budget / eta,
            "subadditive": bool(sub), "passed": bool(additive and sub and glued_budget < eta)}


@dataclass
class ErgodicEstimate:
    xi: tuple
    k: float
    seeds: list
    radii: list
    centers: list
    samples: list
    per_omega_limits: list
    mean: list
    std: list
    std_decreasing: bool
    ergodic_flag: bool
    dropped: list = field(default_factory=list)
    std_ratio: float = None
    agreement: float = None

    def to_json(self) -> dict:
        return {"xi": list(self.xi), "k": self.k, "seeds": list(self.seeds), "radii": list(self.radii),
                "centers": [list(c) for c in self.centers], "samples": self.samples,
                "per_omega_limits": self.per_omega_limits, "mean": self.mean, "std": self.std,
                "std_decreasing": self.std_decreasing, "std_ratio": self.std_ratio,
                "agreement": self.agreement, "ergodic_flag": self.ergodic_flag, "dropped": self.dropped}

    def rows(self):
        """CSV rows ``(seed, xi..., r, center..., normalized)``."""
        for seed, traj in zip(self.seeds, self.samples):
            if traj is None:
                continue
            for ci, c in enumerate(self.centers):
                for r, v in zip(self.radii, traj[ci]):
                    yield [seed] + list(self.xi) + [r] + list(c) + [v]


def ergodic_limit(op, f_random, xi, k: float = 16, radii=(2, 4, 8), centers=None, seeds=range(8),
                  density: float = 8, opts: SolveOptions = None, workers: int = 1,
                  std_ratio_tol: float = 0.05, agreement_tol: float = 0.1) -> ErgodicEstimate:
    """Monte Carlo over seeds of ``Phi(omega, Q_r(r x)) / r^N`` along growing cubes.

    Per-seed values are averaged over ``centers`` (default: the origin only).
    """
    seeds = [int(s) for s in seeds]
    if len(seeds) < 2:
        raise ConfigError("ergodic_limit needs at least two seeds")
    radii = [float(r) for r in radii]
    centers = [tuple(float(v) for v in c) for c in (centers or [(0.0,) * op.N])]
    xi = np.asarray(xi, float).ravel()
    jobs = [(s, ci, ri) for s in seeds for ci in range(len(centers)) for ri in range(len(radii))]

    def run(job):
        s, ci, ri = job
        r = radii[ri]
        g = Grid(min(next_pow2(density * r), 128), op.N, tuple(r * np.asarray(centers[ci])), r)
        try:
            return solve_relaxed(op, _realize(f_random, s), xi, g, 1.0 / k, 0.5 / g.n, opts).normalized
        except AfhomError as exc:
            return exc

    out = dict(zip(jobs, _map_jobs(run, jobs, workers)))
    samples, limits, dropped = [], [], []
    for s in seeds:
        traj = [[out[(s, ci, ri)] for ri in range(len(radii))] for ci in range(len(centers))]
        if any(isinstance(v, Exception) for row in traj for v in row):
            dropped.append({"seed": s, "error": str(next(v for row in traj for v in row
                                                          if isinstance(v, Exception)))})
            samples.append(None)
            continue
        samples.append(traj)
        avg = np.mean(np.asarray(traj, float), axis=0)
        limits.append(extrapolate(radii, avg)[0])
    kept = np.asarray([np.mean(np.asarray(t, float), axis=0) for t in samples if t is not None])
    if kept.shape[0] < 2:
        raise AfhomError("fewer than two seeds survived")
    mean = kept.mean(axis=0)
    std = kept.std(axis=0, ddof=1)
    decreasing = bool(np.all(np.diff(std) <= 1e-12))
    ratio = float(std[-1] / abs(mean[-1])) if mean[-1] != 0 else float("inf")
    lim = np.asarray(limits)
    agreement = float(np.max(np.abs(lim - lim.mean())) / abs(lim.mean()))
    flag = ratio <= std_ratio_tol and agreement <= agreement_tol
    return ErgodicEstimate(tuple(xi.tolist()), float(k), seeds, radii, centers,
                           samples, [float(v) for v in limits], mean.tolist(), std.tolist(),
                           decreasing, bool(flag), dropped, ratio, agreement)


def distinct_limits(values, tol: float = 2e-2) -> list:
    """Cluster per-seed limits: representatives of groups closer than ``tol`` (relative)."""
    reps = []
    for v in sorted(values):
        if not reps or abs(v - reps[-1][-1]) > tol * max(1.0, abs(reps[-1][-1])):
            reps.append([v])
        else:
            reps[-1].append(v)
    return [float(np.mean(g)) for g in reps]
