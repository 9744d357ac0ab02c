"""Precomputed tables driving the event loop.

JumpTable: inverse CDF of the jump radius for the compound-Poisson
approximation that keeps all jumps larger than eps.  Survival values are
accumulated per log-spaced knot with Gauss-Legendre pieces plus the exact
quadrature tail, and sampling interpolates linearly in (log v, log r),
which is exact for stable profiles.

KappaTable: killing density along the radial coordinate of a symmetric
domain (ball, annulus, interval), with knots clustered geometrically
toward the boundary where kappa varies fastest.  Boxes have no radial
symmetry and are not supported here.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .geometry import Annulus, Ball, Interval
from .kernels import LevyModel, killing_density, phi, tail_mass

__all__ = ["JumpTable", "build_jump_table", "KappaTable", "build_kappa_table"]

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(16)


@dataclass(frozen=True, eq=False)
class JumpTable:
    eps: float
    total_rate: float  # Lambda = tail_mass(eps)
    log_r: np.ndarray  # increasing, log_r[0] = log(eps)
    log_v: np.ndarray  # decreasing survival logs, log_v[0] = 0

    def survival(self, r) -> np.ndarray:
        """P(radius > r), linear in log-log between knots."""
        r = np.asarray(r, dtype=float)
        return np.exp(np.interp(np.log(r), self.log_r, self.log_v))

    def sample_radius(self, u) -> np.ndarray:
        """Inverse-CDF sample, vectorized over uniforms u in [0, 1)."""
        u = np.asarray(u, dtype=float)
        logv = np.log1p(-u)
        idx = np.searchsorted(-self.log_v, -logv, side="right") - 1
        idx = np.clip(idx, 0, len(self.log_v) - 2)
        lv0 = self.log_v[idx]
        lv1 = self.log_v[idx + 1]
        t = np.clip((logv - lv0) / (lv1 - lv0), 0.0, 1.0)
        return np.exp(self.log_r[idx] + t * (self.log_r[idx + 1] - self.log_r[idx]))

    def scalar_radius(self, u: float) -> float:
        """Scalar twin of sample_radius with identical arithmetic order."""
        return invert_survival_scalar(self.log_r, self.log_v, u)


def invert_survival_scalar(log_r, log_v, u: float) -> float:
    """Scalar inverse-CDF lookup; the compiled core mirrors this arithmetic."""
    logv = math.log1p(-u)
    lo, hi = 0, len(log_v) - 1
    while hi - lo > 1:  # invariant: log_v[lo] >= logv > log_v[hi] (or clamp)
        mid = (lo + hi) // 2
        if log_v[mid] >= logv:
            lo = mid
        else:
            hi = mid
    lv0 = float(log_v[lo])
    lv1 = float(log_v[lo + 1])
    t = (logv - lv0) / (lv1 - lv0)
    t = min(max(t, 0.0), 1.0)
    lr0 = float(log_r[lo])
    lr1 = float(log_r[lo + 1])
    return math.exp(lr0 + t * (lr1 - lr0))


def kappa_radial_scalar(s_arr, log_kappa, s: float) -> float:
    """Scalar twin of KappaTable.eval_radial (clamped piecewise-linear log)."""
    m = len(s_arr)
    if s <= s_arr[0]:
        return math.exp(float(log_kappa[0]))
    if s >= s_arr[m - 1]:
        return math.exp(float(log_kappa[m - 1]))
    lo, hi = 0, m - 1
    while hi - lo > 1:  # invariant: s_arr[lo] <= s < s_arr[hi]
        mid = (lo + hi) // 2
        if s_arr[mid] <= s:
            lo = mid
        else:
            hi = mid
    t = (s - float(s_arr[lo])) / (float(s_arr[lo + 1]) - float(s_arr[lo]))
    return math.exp(float(log_kappa[lo]) + t * (float(log_kappa[lo + 1]) - float(log_kappa[lo])))


@lru_cache(maxsize=32)
def build_jump_table(
    model: LevyModel, eps: float, n_knots: int = 4096, tail: float = 1e-14
) -> JumpTable:
    """Tabulate the jump-radius law of the eps-truncated model."""
    if eps <= 0.0:
        raise ValueError("eps must be positive")
    if n_knots < 16:
        raise ValueError("n_knots too small")
    lam0 = tail_mass(model, eps)
    r_max = 2.0 * eps
    while tail_mass(model, r_max) > tail * lam0:
        r_max *= 2.0
    log_r = np.linspace(math.log(eps), math.log(r_max), n_knots)
    # per-piece integral of omega*c*phi(s^-2)/s ds = omega*c*phi(e^-2t) dt
    a = log_r[:-1]
    b = log_r[1:]
    mid = 0.5 * (a + b)
    half = 0.5 * (b - a)
    t = mid[:, None] + half[:, None] * _GL_NODES[None, :]
    vals = phi(model.profile, np.exp(-2.0 * t))
    pieces = half * (vals @ _GL_WEIGHTS)
    from .geometry import sphere_area

    pieces = sphere_area(model.n) * model.c_cal * pieces
    tail_val = tail_mass(model, r_max)
    surv = np.concatenate(
        [np.cumsum(pieces[::-1])[::-1] + tail_val, [tail_val]]
    )
    total = surv[0]
    log_v = np.log(surv / total)
    log_v[0] = 0.0
    return JumpTable(eps=eps, total_rate=total, log_r=log_r, log_v=log_v)


@dataclass(frozen=True, eq=False)
class KappaTable:
    kind: str  # ball | annulus | interval
    center: tuple
    s: np.ndarray  # increasing radial knots
    log_kappa: np.ndarray
    jump_floor: float

    def eval_radial(self, s) -> np.ndarray:
        """kappa at radial coordinate s, clamped at the table ends."""
        s = np.asarray(s, dtype=float)
        return np.exp(np.interp(s, self.s, self.log_kappa))

    def eval_points(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        c = np.asarray(self.center, dtype=float)
        if self.kind == "interval":
            s = np.abs(X[:, 0] - c[0])
        else:
            s = np.linalg.norm(X - c, axis=1)
        return self.eval_radial(s)


def _boundary_clustered(inner: float, outer: float, m: int, delta: float) -> np.ndarray:
    """Knots on [inner, outer - delta]: a uniform grid for the smooth bulk
    plus geometric accumulation at outer, where kappa blows up."""
    lin = np.linspace(inner, outer - delta, m // 2)
    geo = outer - np.geomspace(delta, outer - inner, m // 2)
    return np.unique(np.concatenate([lin, geo]))


@lru_cache(maxsize=16)
def build_kappa_table(
    model: LevyModel, domain, jump_floor: float = 0.0, n_knots: int = 1024
) -> KappaTable:
    """Tabulate kappa_D along the radial coordinate of a symmetric domain."""
    delta = 1e-9 * domain.diam
    if isinstance(domain, Ball):
        kind = "ball"
        center = domain.center
        s = _boundary_clustered(0.0, domain.radius, n_knots, delta)
        s[0] = 0.0
        pts = [np.asarray(center) + si * np.eye(domain.n)[0] for si in s]
    elif isinstance(domain, Annulus):
        kind = "annulus"
        center = domain.center
        lin = np.linspace(domain.rin + delta, domain.rout - delta, n_knots // 2)
        half = 0.5 * (domain.rout - domain.rin)
        geo_in = domain.rin + np.geomspace(delta, half, n_knots // 4)
        geo_out = domain.rout - np.geomspace(delta, half, n_knots // 4)
        s = np.unique(np.concatenate([lin, geo_in, geo_out]))
        pts = [np.asarray(center) + si * np.eye(domain.n)[0] for si in s]
    elif isinstance(domain, Interval):
        kind = "interval"
        mid = 0.5 * (domain.a + domain.b)
        center = (mid,)
        s = _boundary_clustered(0.0, 0.5 * (domain.b - domain.a), n_knots, delta)
        s[0] = 0.0
        pts = [np.asarray([mid + si]) for si in s]
    else:
        raise NotImplementedError(
            f"killing-density table needs a radially symmetric domain, "
            f"got {type(domain).__name__}"
        )
    kappa = np.asarray(
        [killing_density(model, domain, p, jump_floor=jump_floor) for p in pts]
    )
    if np.any(kappa <= 0.0):
        raise RuntimeError("killing density must be positive on a bounded domain")
    return KappaTable(
        kind=kind,
        center=tuple(float(c) for c in center),
        s=s,
        log_kappa=np.log(kappa),
        jump_floor=float(jump_floor),
    )
