"""Monte Carlo estimators for potential-theoretic quantities.

Green functions (killed and censored), conditional gauges, exit-time
moments, and exit-law cell masses, all built on the path engine.  The
censored Green function is estimated through the exponential-reweighting
construction by default: it needs no boundary-lifetime proxy and its
weight is coupled pathwise to the killed run, so ratios of the two come
out with far less variance than independent batches would give.
"""
from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field

import numpy as np

from .engine import SimConfig, run_censored, run_fk, run_killed
from .geometry import Ball
from .reports import config_hash
from .status import PathStatus

__all__ = [
    "Estimate",
    "ExitHistogram",
    "green_function",
    "gauge",
    "mean_exit_time",
    "exit_points",
    "exit_radii",
    "cell_exit_mass",
    "exit_distribution",
    "oracle_exit_masses",
]


@dataclass
class Estimate:
    """A scalar Monte Carlo estimate with its standard error."""

    value: float
    stderr: float
    n_paths: int
    extra: dict = field(default_factory=dict)

    @property
    def rel_stderr(self) -> float:
        return self.stderr / abs(self.value) if self.value != 0.0 else math.inf

    def within(self, target: float, k: float = 3.0) -> bool:
        """True if target lies within k standard errors of the estimate."""
        return abs(self.value - target) <= k * self.stderr

    def __str__(self) -> str:
        return f"{self.value:.6g} +- {self.stderr:.2g} (N={self.n_paths})"

    def to_dict(self) -> dict:
        """JSON record {value, stderr, n_paths, config_hash}.

        The hash identifies the engine configuration the estimate was
        produced under; an estimate assembled without an engine run
        serializes with an empty hash.
        """
        return {
            "value": float(self.value),
            "stderr": float(self.stderr),
            "n_paths": int(self.n_paths),
            "config_hash": str(self.extra.get("config_hash", "")),
        }


def _mean_se(samples: np.ndarray) -> tuple[float, float]:
    m = float(samples.mean())
    se = float(samples.std(ddof=1) / math.sqrt(samples.size))
    return m, se


def _target_ball(domain, x, y, rho):
    """Validate and return (rho, volume) for the Green target ball."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    r_xy = float(np.linalg.norm(x - y))
    if r_xy == 0.0:
        raise ValueError("x and y must be distinct")
    if rho is None:
        rho = r_xy / 8.0
    if rho > r_xy / 4.0:
        raise ValueError("target radius must satisfy rho <= |x - y| / 4")
    dist_y = float(domain.dist_many(y[None, :])[0])
    if rho > dist_y:
        raise ValueError("target ball B(y, rho) must sit inside the domain")
    vol = Ball(tuple(y), rho).volume
    return rho, vol


def green_function(
    model,
    domain,
    x,
    y,
    n_paths: int = 20000,
    config: SimConfig | None = None,
    rho: float | None = None,
    mode: str = "killed",
    stop=None,
) -> Estimate:
    """Estimate a Green function at (x, y) by mean occupation of B(y, rho).

    mode="killed" gives the Green function of the process killed on
    exiting `stop` (default: the domain itself); the domain argument is
    then only the geometry the target ball must sit in.  The censored
    Green function G^Y_B for a region B = stop inside the censoring
    domain comes out two equivalent ways: mode="inw" runs the
    suppression construction (jumps out of the domain are dropped,
    paths stop on exiting B), mode="fk" reweights the killed paths by
    the exponential of the accumulated censoring intensity.  For
    B = domain the fk weights are heavy tailed (the exponent's mean at
    exit is exactly 1, being the compensator of the exit event) and the
    inw occupation never terminates without a time cap, so full-domain
    censored Green values are best taken on subregions or with care.
    """
    config = config or SimConfig()
    rho, vol = _target_ball(stop or domain, x, y, rho)
    targets = [(np.asarray(y, dtype=np.float64), rho)]
    if mode == "killed":
        res = run_killed(model, stop or domain, x, n_paths, config,
                         targets=targets)
    elif mode == "fk":
        res = run_fk(model, domain, x, n_paths, config, targets=targets,
                     stop=stop)
    elif mode == "inw":
        res = run_censored(model, domain, x, n_paths, config,
                           targets=targets, stop=stop)
    else:
        raise ValueError(f"unknown mode {mode!r}")
    occ = res.occupations[:, 0] / vol
    m, se = _mean_se(occ)
    extra = {
        "mode": mode,
        "rho": rho,
        "statuses": res.status_counts(),
        "eps": res.meta["eps"],
        "config_hash": config_hash(res.meta["config"]),
    }
    if mode == "fk":
        extra["mean_exponent"] = float(res.fk_a.mean())
    return Estimate(m, se, n_paths, extra)


def gauge(
    model,
    domain,
    ball,
    x,
    y,
    n_paths: int = 20000,
    config: SimConfig | None = None,
    rho: float | None = None,
    paired: bool = True,
) -> Estimate:
    """Estimate the conditional gauge u(x, y) = G^Y_B(x, y) / G_B(x, y).

    domain is the censoring region D, ball is the stopping region
    B inside it; both Green functions are for paths stopped on leaving
    B, the numerator carrying the exponential weight built from the
    censoring intensity of D.  With paired=True both runs share the
    seed, so the trajectories are identical and the ratio differs only
    through the weight; the estimate is then >= 1 by construction and
    the delta-method error is far smaller than independent batches
    give.  extra carries the mean accumulated exponent at the stopping
    time: when B is a small ball well separated from the boundary of D
    that mean is well under 1/2 and the classical bound u <= 2 is in
    force.  With ball=domain the weight is heavy tailed (see
    green_function) and the returned stderr will say so.
    """
    config = config or SimConfig()
    if ball is None:
        ball = domain
    rho, vol = _target_ball(ball, x, y, rho)
    targets = [(np.asarray(y, dtype=np.float64), rho)]
    res_fk = run_fk(model, domain, x, n_paths, config, targets=targets,
                    stop=ball)
    if paired:
        res_k = run_killed(model, ball, x, n_paths, config, targets=targets)
    else:
        config_b = dataclasses.replace(config, seed=config.seed + 1)
        res_k = run_killed(model, ball, x, n_paths, config_b, targets=targets)
    w = res_fk.occupations[:, 0]
    b = res_k.occupations[:, 0]
    mb = b.mean()
    if mb == 0.0:
        raise ValueError("no occupation of the target ball; enlarge n_paths")
    u = float(w.mean() / mb)
    # delta method for the ratio of means; with paired runs the residual
    # w - u*b is tiny pathwise, which is the whole point of the coupling
    resid = w - u * b
    se = float(np.sqrt(np.mean(resid**2) / n_paths) / mb)
    extra = {
        "rho": rho,
        "paired": paired,
        "mean_exponent": float(res_fk.fk_a.mean()),
        "green_killed": float(mb / vol),
        "green_censored": float(w.mean() / vol),
        "config_hash": config_hash(res_fk.meta["config"]),
    }
    return Estimate(u, se, n_paths, extra)


def mean_exit_time(
    model,
    domain,
    x,
    n_paths: int = 20000,
    config: SimConfig | None = None,
) -> Estimate:
    """Mean exit time of the killed process started at x."""
    config = config or SimConfig()
    res = run_killed(model, domain, x, n_paths, config)
    if not np.all(res.exited):
        raise RuntimeError(
            f"not all paths exited: {res.status_counts()}"
        )
    m, se = _mean_se(res.tau)
    extra = {"eps": res.meta["eps"],
             "config_hash": config_hash(res.meta["config"])}
    return Estimate(m, se, n_paths, extra)


def exit_points(
    model,
    domain,
    x,
    n_paths: int = 20000,
    config: SimConfig | None = None,
):
    """Exit positions of the killed process; returns (points, result).

    points are the rows of x_post whose path status is an exit; other
    statuses (time or event caps) are excluded and available from the
    result's status_counts.
    """
    config = config or SimConfig()
    res = run_killed(model, domain, x, n_paths, config)
    return res.x_post[res.exited], res


def exit_radii(
    model,
    domain,
    x,
    n_paths: int = 20000,
    config: SimConfig | None = None,
    center=None,
):
    """Radial exit-law samples |X_tau - center| for ball-like domains."""
    pts, res = exit_points(model, domain, x, n_paths, config)
    if center is None:
        center = getattr(domain, "center", None)
        if center is None:
            raise ValueError("domain has no center; pass one explicitly")
    c = np.asarray(center, dtype=np.float64)
    return np.linalg.norm(pts - c, axis=1), res


def cell_exit_mass(
    model,
    domain,
    x,
    cell_center,
    cell_rho: float,
    n_paths: int = 50000,
    config: SimConfig | None = None,
) -> Estimate:
    """Exit-law density averaged over an exterior cell B(z, rho).

    Estimates P_x(X_tau in B(z, rho)) / vol(B(z, rho)), the quantity the
    Poisson kernel integrates to over the cell.  The cell must lie
    outside the domain, otherwise the mass mixes exit and occupation.
    """
    config = config or SimConfig()
    z = np.asarray(cell_center, dtype=np.float64)
    if bool(domain.contains_many(z[None, :])[0]):
        raise ValueError("cell center must lie outside the domain")
    pts, res = exit_points(model, domain, x, n_paths, config)
    n_exit = pts.shape[0]
    if n_exit < n_paths:
        # capped paths carry no exit position; count them as misses
        pass
    hits = np.linalg.norm(pts - z, axis=1) < cell_rho
    p = hits.sum() / n_paths
    se_p = math.sqrt(max(p * (1.0 - p), 1.0 / n_paths) / n_paths)
    vol = Ball(tuple(z), cell_rho).volume
    extra = {
        "hits": int(hits.sum()),
        "n_exit": int(n_exit),
        "cell_rho": cell_rho,
        "eps": res.meta["eps"],
        "config_hash": config_hash(res.meta["config"]),
    }
    return Estimate(p / vol, se_p / vol, n_paths, extra)


@dataclass
class ExitHistogram:
    """Binned exit law of a killed run from a ball.

    Bins are radial shells (as multiples of the ball radius) crossed
    with equal angular sectors; the last radial row collects everything
    beyond the outermost edge, so the masses always sum to one over the
    exited paths.  Capped paths carry no exit point and are reported in
    `capped_fraction` instead of being smeared into bins.
    """

    radial_edges: np.ndarray
    n_angular: int
    counts: np.ndarray
    masses: np.ndarray
    n_paths: int
    n_exited: int
    capped_fraction: float
    extra: dict = field(default_factory=dict)

    def tv(self, other_masses) -> float:
        """Total-variation distance to another mass array of equal shape."""
        other = np.asarray(other_masses, dtype=float)
        if other.shape != self.masses.shape:
            raise ValueError("mass arrays must share the bin layout")
        return 0.5 * float(np.abs(self.masses - other).sum())

    def radial_masses(self) -> np.ndarray:
        return self.masses.sum(axis=1)

    def angular_masses(self) -> np.ndarray:
        return self.masses.sum(axis=0)


def _angular_index(rel: np.ndarray, n_angular: int) -> np.ndarray:
    n = rel.shape[1]
    if n == 1:
        if n_angular != 2:
            raise ValueError("n=1 supports exactly 2 angular bins (sides)")
        return (rel[:, 0] > 0.0).astype(np.intp)
    if n == 2:
        theta = np.mod(np.arctan2(rel[:, 1], rel[:, 0]), 2.0 * math.pi)
        idx = np.floor(theta / (2.0 * math.pi) * n_angular).astype(np.intp)
        return np.minimum(idx, n_angular - 1)
    raise ValueError("angular binning supports n <= 2")


def exit_distribution(
    model,
    ball: Ball,
    x,
    n_paths: int = 100000,
    config: SimConfig | None = None,
    radial_edges=None,
    n_angular: int | None = None,
) -> ExitHistogram:
    """Histogram of the exit position of the killed process from a ball.

    radial_edges are multiples of the ball radius starting at 1; the
    default is eight geometric shells out to three radii.  For n=1 the
    two "sectors" are the two sides of the interval.
    """
    if radial_edges is None:
        radial_edges = np.geomspace(1.0, 3.0, 9)
    radial_edges = np.asarray(radial_edges, dtype=float)
    if radial_edges[0] != 1.0 or np.any(np.diff(radial_edges) <= 0.0):
        raise ValueError("radial edges must increase from 1.0")
    if n_angular is None:
        n_angular = 2 if model.n == 1 else 8
    config = config or SimConfig()
    pts, res = exit_points(model, ball, x, n_paths, config)
    center = np.asarray(ball.center, dtype=float)
    rel = pts - center
    s = np.linalg.norm(rel, axis=1) / ball.radius
    # searchsorted sends s in [edge_k, edge_{k+1}) to shell k and
    # anything beyond the last edge to the overflow row
    ridx = np.searchsorted(radial_edges, s, side="right") - 1
    ridx = np.clip(ridx, 0, radial_edges.size - 1)
    aidx = _angular_index(rel, n_angular)
    counts = np.zeros((radial_edges.size, n_angular), dtype=np.int64)
    np.add.at(counts, (ridx, aidx), 1)
    n_exited = pts.shape[0]
    masses = counts / float(n_exited)
    return ExitHistogram(
        radial_edges=radial_edges,
        n_angular=n_angular,
        counts=counts,
        masses=masses,
        n_paths=n_paths,
        n_exited=n_exited,
        capped_fraction=1.0 - n_exited / n_paths,
        extra={"eps": res.meta["eps"]},
    )


def oracle_exit_masses(
    model, ball: Ball, x, radial_edges, n_angular: int
) -> np.ndarray:
    """Closed-form bin masses matching exit_distribution's layout.

    Available for calibrated stable profiles started at the ball center,
    where the exit law is isotropic and the radial law has an explicit
    Beta-function CDF; the overflow row gets the full remaining tail.
    """
    from . import oracles

    alpha = oracles.is_calibrated_stable(model)
    if alpha is None:
        raise ValueError("oracle exit masses need a calibrated stable profile")
    x = np.asarray(x, dtype=float)
    center = np.asarray(ball.center, dtype=float)
    if not np.allclose(x, center):
        raise ValueError("binned oracle is available at the ball center only")
    radial_edges = np.asarray(radial_edges, dtype=float)
    inner = oracles.ball_exit_bin_masses(alpha, radial_edges)
    tail = 1.0 - float(oracles.ball_exit_radius_cdf(alpha, radial_edges[-1]))
    radial = np.concatenate([inner, [tail]])
    return np.repeat(radial[:, None], n_angular, axis=1) / n_angular
