"""Inequality sweeps, gauge checks, and boundary-regime experiments.

Each checker turns one quantitative potential-theory claim into a
reproducible numerical experiment and returns a machine-readable report:
the sampled ratios' summary, the empirical (fitted) constant, the worst
witnesses, and a refinement trace showing the supremum does not explode
as the sampling margin shrinks toward the boundary and the diagonal.

None of the target constants have numeric values in the underlying
theory, so pass/fail is boundedness-under-refinement (sup growth below
2x per margin halving) except where explicit numbers exist: the 3G-kappa
integral bound 1/2 and the gauge interval [1, 2].
"""
from __future__ import annotations

import dataclasses
import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from . import oracles, potential
from .engine import SimConfig, run_censored, run_killed
from .geometry import Ball, Domain, Interval, Lens
from .kernels import (
    LevyModel,
    big_phi,
    estimate_scaling_exponents,
)
from .status import PathStatus
from .tables import build_kappa_table

__all__ = [
    "InequalityReport",
    "RegimePrediction",
    "BoundaryReport",
    "check_3g",
    "check_generalized_3g",
    "check_harnack_X",
    "check_harnack_Y",
    "check_bhp",
    "check_carleson",
    "check_g_factorization",
    "lemma41_integral",
    "check_lemma41",
    "find_r1",
    "check_khasminskii_gauge",
    "check_equivalence",
    "classify_boundary_regime",
    "run_boundary_experiment",
    "wilson_interval",
]

GROWTH_CEILING = 2.0  # refinement explosion detector: sup may not double


# ---------------------------------------------------------------------------
# reports


@dataclass
class InequalityReport:
    """Outcome of one inequality sweep."""

    name: str
    n_samples: int
    sup: float
    p99: float
    p90: float
    median: float
    fitted_constant: float
    worst_witnesses: list = field(default_factory=list)
    refinement_trace: list = field(default_factory=list)
    passed: bool = False
    details: dict = field(default_factory=dict)
    # raw sampled ratios, kept for CSV export; not part of the JSON view
    samples: np.ndarray | None = field(default=None, repr=False)

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d.pop("samples")
        return d

    def summary_line(self) -> str:
        word = "pass" if self.passed else "FAIL"
        return (
            f"{self.name}: {word}  sup={self.sup:.4g} p99={self.p99:.4g} "
            f"median={self.median:.4g} (n={self.n_samples})"
        )


def _ratio_stats(ratios: np.ndarray) -> dict:
    q = np.quantile(ratios, [0.5, 0.9, 0.99])
    return {
        "sup": float(ratios.max()),
        "p99": float(q[2]),
        "p90": float(q[1]),
        "median": float(q[0]),
    }


def _trace_ok(trace: list) -> bool:
    sups = [t["sup"] for t in trace]
    if not all(math.isfinite(s) for s in sups):
        return False
    return all(
        b < GROWTH_CEILING * a for a, b in zip(sups, sups[1:])
    )


def _report(name, ratios, witnesses, trace, passed, details) -> InequalityReport:
    stats = _ratio_stats(ratios)
    return InequalityReport(
        name=name,
        n_samples=int(ratios.size),
        fitted_constant=stats["sup"],
        worst_witnesses=witnesses,
        refinement_trace=trace,
        passed=passed,
        details=details,
        samples=np.asarray(ratios, dtype=float),
        **stats,
    )


# ---------------------------------------------------------------------------
# Green evaluation for sweeps


def _phi_scale(model: LevyModel, r: np.ndarray) -> np.ndarray:
    """Phi(r) / r^n, the off-diagonal Green scale."""
    r = np.asarray(r, dtype=float)
    return big_phi(model.profile, r) / r**model.n


def _green_pair_fn(model: LevyModel, domain, green_source: str):
    """Vectorized (X_rows, Y_rows) -> G values, plus a tag for the report.

    "oracle" uses the closed-form stable ball Green function (the model
    must have a stable profile and the domain must be a ball); "mc" is
    not vectorized at sweep scale and is deliberately unsupported here --
    sweeps need millions of Green values, so non-stable models are out
    of scope for the ratio sweeps (the estimators in potential.py still
    handle them pointwise).
    """
    if green_source == "auto":
        green_source = "oracle"
    if green_source != "oracle":
        raise ValueError("ratio sweeps support green_source='oracle' only")
    if model.profile.family.name != "STABLE" or not isinstance(domain, Ball):
        raise ValueError(
            "oracle Green values need a stable-profile model on a ball"
        )
    alpha = model.profile.alpha
    scale = oracles.green_time_scale(model)

    def gpair(X, Y):
        return scale * np.asarray(
            oracles.ball_green(
                model.n, alpha, X, Y, radius=domain.radius, center=domain.center
            )
        )

    return gpair, "oracle"


def _separated_tuples(domain, rng, size, k, margin):
    """k interior sample sets with pairwise separations >= margin*scale.

    margin is relative to the domain's fatness radius; the boundary
    clearance uses the same length.
    """
    scale = domain.fat_R / 2.0
    dist = margin * scale
    pts = [domain.sample_interior(rng, size, margin=dist) for _ in range(k)]
    ok = np.ones(size, dtype=bool)
    for i in range(k):
        for j in range(i + 1, k):
            ok &= np.linalg.norm(pts[i] - pts[j], axis=1) >= dist
    return [p[ok] for p in pts]


# ---------------------------------------------------------------------------
# 3G


def threeg_ratios(model: LevyModel, gpair, x, y, z) -> np.ndarray:
    """Pointwise 3G ratio G(x,y)G(y,z)/G(x,z) over its comparison kernel.

    The denominator is Phi(|x-y|)/|x-y|^n * Phi(|y-z|)/|y-z|^n *
    |x-z|^n/Phi(|x-z|), folded into _phi_scale.
    """
    rxy = np.linalg.norm(x - y, axis=1)
    ryz = np.linalg.norm(y - z, axis=1)
    rxz = np.linalg.norm(x - z, axis=1)
    lhs = gpair(x, y) * gpair(y, z) / gpair(x, z)
    rhs = _phi_scale(model, rxy) * _phi_scale(model, ryz) / _phi_scale(model, rxz)
    return lhs / rhs


def generalized_threeg_ratios(model: LevyModel, gpair, x, y, z, w, beta: float):
    """Pointwise four-point 3G ratio and the distance-gap base term.

    Returns (ratios, base) where ratios = raw / (base**beta * H) with
    raw = G(x,y)G(z,w)/G(x,w), H the three-distance comparison kernel,
    and base = max(m/|x-y|, 1) * max(m/|z-w|, 1), m = min(|x-w|, |y-z|).
    When y == z the base collapses to 1 exactly and the ratio reduces,
    operation for operation, to threeg_ratios on the triple (x, y, w).
    """
    rxy = np.linalg.norm(x - y, axis=1)
    rzw = np.linalg.norm(z - w, axis=1)
    rxw = np.linalg.norm(x - w, axis=1)
    ryz = np.linalg.norm(y - z, axis=1)
    raw = gpair(x, y) * gpair(z, w) / gpair(x, w)
    H = _phi_scale(model, rxy) * _phi_scale(model, rzw) / _phi_scale(model, rxw)
    m = np.minimum(rxw, ryz)
    base = np.maximum(m / rxy, 1.0) * np.maximum(m / rzw, 1.0)
    return raw / (base**beta * H), base


def check_3g(
    model: LevyModel,
    domain: Ball,
    n_triples: int = 20000,
    margins=(0.1, 0.05, 0.025, 0.0125),
    seed: int = 0,
    green_source: str = "auto",
) -> InequalityReport:
    """Sweep the 3G ratio over interior triples.

    For triples (x, y, z) the ratio of G(x,y)G(y,z)/G(x,z) to
    Phi(|x-y|)/|x-y|^n * Phi(|y-z|)/|y-z|^n * |x-z|^n/Phi(|x-z|) is
    computed; the claim under test is that its supremum is a finite
    constant, so the pass rule is a non-exploding refinement trace as
    the boundary/diagonal margin halves.
    """
    gpair, gtag = _green_pair_fn(model, domain, green_source)
    rng = np.random.default_rng(seed)
    all_ratios = []
    all_pts = []
    trace = []
    for margin in margins:
        x, y, z = _separated_tuples(domain, rng, n_triples, 3, margin)
        ratios = threeg_ratios(model, gpair, x, y, z)
        trace.append({
            "margin": margin,
            "n": int(ratios.size),
            "sup": float(ratios.max()),
        })
        all_ratios.append(ratios)
        all_pts.append((x, y, z))
    ratios = np.concatenate(all_ratios)
    witnesses = _top_witnesses(all_ratios, all_pts, ("x", "y", "z"))
    passed = _trace_ok(trace)
    return _report(
        "threeg", ratios, witnesses, trace, passed,
        {"green_source": gtag, "margins": list(margins), "seed": seed},
    )


def _top_witnesses(ratio_blocks, pt_blocks, names, k=3):
    flat = np.concatenate(ratio_blocks)
    order = np.argsort(flat)[::-1][:k]
    sizes = np.cumsum([r.size for r in ratio_blocks])
    out = []
    for idx in order:
        b = int(np.searchsorted(sizes, idx, side="right"))
        local = idx - (sizes[b - 1] if b > 0 else 0)
        w = {"ratio": float(flat[idx])}
        for name, block in zip(names, pt_blocks[b]):
            w[name] = [float(v) for v in block[local]]
        out.append(w)
    return out


def check_generalized_3g(
    model: LevyModel,
    domain: Ball,
    n_quads: int = 20000,
    margins=(0.1, 0.05, 0.025, 0.0125),
    seed: int = 0,
    green_source: str = "auto",
) -> InequalityReport:
    """Sweep the four-point 3G ratio and fit the smallest workable exponent.

    For quadruples (x, y, z, w) the raw quantity G(x,y)G(z,w)/G(x,w) is
    compared against ((|x-w| ^ |y-z|)/|x-y| v 1)^beta
    ((|x-w| ^ |y-z|)/|z-w| v 1)^beta H(x,y,z,w) with
    H = Phi(|x-y|)/|x-y|^n * Phi(|z-w|)/|z-w|^n * |x-w|^n/Phi(|x-w|).
    The exponent is guaranteed to work at beta = 2*delta2; the fitted
    beta_hat is the smallest exponent that keeps every sampled quad
    under the ceiling attained there, reported alongside the trace.
    """
    gpair, gtag = _green_pair_fn(model, domain, green_source)
    exps = estimate_scaling_exponents(model.profile)
    beta_max = 2.0 * exps.delta2
    rng = np.random.default_rng(seed)
    all_ratios = []
    all_bases = []
    all_pts = []
    trace = []
    beta_hat = 0.0
    for margin in margins:
        x, y, z, w = _separated_tuples(domain, rng, n_quads, 4, margin)
        ratios, base = generalized_threeg_ratios(model, gpair, x, y, z, w, beta_max)
        trace.append({
            "margin": margin,
            "n": int(ratios.size),
            "sup": float(ratios.max()),
        })
        all_ratios.append(ratios)
        all_bases.append(base)
        all_pts.append((x, y, z, w))
    pooled = np.concatenate(all_ratios)
    ceiling = float(pooled.max())
    # smallest beta that keeps raw <= ceiling * base^beta * H on every
    # sampled quad; quads with base == 1 put no constraint on beta
    need = 0.0
    for ratios_b, base in zip(all_ratios, all_bases):
        raw_over = ratios_b * base**beta_max  # = raw / (ceiling-free H)
        mask = base > 1.0 + 1e-12
        if mask.any():
            b_i = np.log(raw_over[mask] / ceiling) / np.log(base[mask])
            need = max(need, float(b_i.max()))
    beta_hat = max(0.0, need)
    witnesses = _top_witnesses(all_ratios, all_pts, ("x", "y", "z", "w"))
    passed = _trace_ok(trace) and beta_hat <= beta_max + 0.05
    return _report(
        "gen-threeg", pooled, witnesses, trace, passed,
        {
            "green_source": gtag,
            "margins": list(margins),
            "seed": seed,
            "beta_hat": beta_hat,
            "beta_max": beta_max,
            "delta2": exps.delta2,
        },
    )


# ---------------------------------------------------------------------------
# g-function factorization


def check_g_factorization(
    model: LevyModel,
    domain: Ball,
    n_pairs: int = 1000,
    margin: float = 0.05,
    seed: int = 0,
    green_source: str = "auto",
) -> InequalityReport:
    """Factorized Green estimate: G(x,y) against g(x)g(y)Phi/|x-y|^n g(A)^2.

    g is the Green function toward a fat interior pole, capped at its
    interior ceiling; A is the corridor witness point of the pair.  The
    claim is two-sided comparability, so the reported ratio is
    max(q, 1/q) for q = G / factorization and the pass rule is a finite
    sup over the sweep.
    """
    gpair, gtag = _green_pair_fn(model, domain, green_source)
    z0 = domain.incenter
    delta0 = domain.dist_to_boundary(z0)
    # interior ceiling of G(., z0): fitted c1_hat over a probe sample, so
    # the cap constant c5 = 2^n c1_hat is empirical, as it must be
    rng = np.random.default_rng(seed)
    probe = domain.sample_interior(rng, 4096, margin=margin * domain.fat_R / 2)
    far = np.linalg.norm(probe - z0, axis=1) > delta0 / 2.0
    pr = probe[far]
    c1_hat = float(np.max(
        gpair(pr, np.broadcast_to(z0, pr.shape))
        / _phi_scale(model, np.linalg.norm(pr - z0, axis=1))
    ))
    cap = 2.0**model.n * c1_hat * big_phi(model.profile, delta0) / delta0**model.n

    def g(pts):
        vals = gpair(pts, np.broadcast_to(z0, pts.shape))
        return np.minimum(vals, cap)

    x = domain.sample_interior(rng, n_pairs, margin=margin * domain.fat_R / 2)
    y = domain.sample_interior(rng, n_pairs, margin=margin * domain.fat_R / 2)
    ok = np.linalg.norm(x - y, axis=1) > 1e-3
    x, y = x[ok], y[ok]
    A = np.array([domain.corridor(xi, yi) for xi, yi in zip(x, y)])
    rxy = np.linalg.norm(x - y, axis=1)
    fact = g(x) * g(y) / g(A) ** 2 * _phi_scale(model, rxy)
    q = gpair(x, y) / fact
    ratios = np.maximum(q, 1.0 / q)
    trace = [{"margin": margin, "n": int(ratios.size), "sup": float(ratios.max())}]
    witnesses = _top_witnesses([ratios], [(x, y)], ("x", "y"))
    passed = bool(np.isfinite(ratios).all())
    return _report(
        "g-factorization", ratios, witnesses, trace, passed,
        {"green_source": gtag, "c1_hat": c1_hat, "cap": float(cap), "seed": seed},
    )


# ---------------------------------------------------------------------------
# Carleson


def check_carleson(
    model: LevyModel,
    domain: Ball,
    boundary_point=None,
    r0_list=(0.2, 0.1, 0.05),
    n_x: int = 2000,
    y_far=None,
    seed: int = 0,
    green_source: str = "auto",
) -> InequalityReport:
    """Carleson estimate: G(x,y) <= c * G(A_r0(z), y) near a boundary point.

    x ranges over the domain's intersection with B(z, r0); the reference
    point is the fat point at scale r0; y must stay outside B(z, 3*r0).
    """
    gpair, gtag = _green_pair_fn(model, domain, green_source)
    rng = np.random.default_rng(seed)
    z = (
        np.asarray(boundary_point, dtype=float)
        if boundary_point is not None
        else domain.sample_boundary(rng, 1)[0]
    )
    if y_far is None:
        y_far = domain.incenter
    y_far = np.asarray(y_far, dtype=float)
    all_ratios = []
    all_pts = []
    trace = []
    for r0 in r0_list:
        if not 0.0 < r0 < domain.fat_kappa * domain.fat_R / 4.0:
            raise ValueError(f"r0={r0} outside (0, kappa*R/4)")
        if np.linalg.norm(y_far - z) <= 3.0 * r0:
            raise ValueError("y must lie outside B(z, 3 r0)")
        A = domain.fat_point(z, r0)
        # rejection-sample x in domain cap B(z, r0)
        xs = []
        while sum(len(a) for a in xs) < n_x:
            cand = z + (rng.random((4 * n_x, domain.n)) * 2.0 - 1.0) * r0
            cand = cand[np.linalg.norm(cand - z, axis=1) < r0]
            cand = cand[domain.contains_many(cand)]
            xs.append(cand)
        x = np.concatenate(xs)[:n_x]
        yrep = np.broadcast_to(y_far, x.shape)
        ratios = gpair(x, yrep) / float(
            gpair(A[None, :], y_far[None, :])[0]
        )
        trace.append({"r0": r0, "n": int(ratios.size), "sup": float(ratios.max())})
        all_ratios.append(ratios)
        all_pts.append((x,))
    ratios = np.concatenate(all_ratios)
    witnesses = _top_witnesses(all_ratios, all_pts, ("x",))
    sups = [t["sup"] for t in trace]
    passed = all(math.isfinite(s) for s in sups) and all(
        b < GROWTH_CEILING * a for a, b in zip(sups, sups[1:])
    )
    return _report(
        "carleson", ratios, witnesses, trace, passed,
        {
            "green_source": gtag,
            "z": [float(v) for v in z],
            "y": [float(v) for v in y_far],
            "r0_list": list(r0_list),
            "seed": seed,
        },
    )


# ---------------------------------------------------------------------------
# Harnack sweeps


def _harnack_data_family(dirs, mid, R0: float):
    """Nonnegative exterior data functions, constant-first.

    Exponential bumps anchored outside the enclosing ball plus half-space
    indicators through its center; every function is bounded and
    nonnegative, so the induced harmonic extensions qualify for the
    Harnack sweep.  Anchors and sharpness are expressed in units of the
    enclosing ball radius: the family probes the same profile shapes at
    every scale, which makes the per-scale fitted constants comparable
    (a fixed-unit family would look flatter on small balls and fake a
    scale trend).
    """
    funcs = [("const", lambda pts: np.ones(pts.shape[0]))]
    for k, u in enumerate(dirs):
        anchor = mid + 3.0 * R0 * u

        def bump(pts, a=anchor, s=(1.0 + 0.5 * (k % 3)) / R0):
            return np.exp(-s * np.linalg.norm(pts - a, axis=1))

        funcs.append((f"bump{k}", bump))
    for k, u in enumerate(dirs[: len(dirs) // 2]):

        def half(pts, u=u, c=mid):
            return ((pts - c) @ u > 0.0).astype(float)

        funcs.append((f"half{k}", half))
    return funcs


def _harnack_sweep(
    name,
    model,
    domain,
    r_list,
    L,
    n_pairs,
    n_paths,
    seed,
    exits_fn,
):
    """Shared Harnack machinery for X and Y.

    For each scale r and pair (x1, x2) with |x1-x2| < L*r, harmonic
    functions are built as exit-data averages over a common enclosing
    ball B0 (harmonic there, hence on the union the theorem asks for);
    the two exit batches from x1 and x2 are shared across the whole
    data family, and the per-scale constant is the sup of
    max(h(x1)/h(x2), h(x2)/h(x1)).
    """
    rng = np.random.default_rng(seed)
    dirs = rng.standard_normal((8, model.n))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    n_funcs = 1 + len(dirs) + len(dirs) // 2
    trace = []
    all_ratios = []
    all_pts = []
    skipped = 0
    const_max_dev = 0.0
    for r in r_list:
        sup_r = 1.0
        ratios_r = []
        pts_r = []
        clearance = (0.5 * L + 1.0) * r
        for _ in range(n_pairs):
            mid = domain.sample_interior(rng, 1, margin=clearance * 1.05)[0]
            u = rng.standard_normal(model.n)
            u /= np.linalg.norm(u)
            d = r * L * rng.random() * 0.98
            x1 = mid + 0.5 * d * u
            x2 = mid - 0.5 * d * u
            B0 = Ball(tuple(mid), 0.5 * d + r)
            funcs = _harnack_data_family(dirs, mid, B0.radius)
            batch1 = exits_fn(model, domain, B0, x1, n_paths, seed)
            batch2 = exits_fn(model, domain, B0, x2, n_paths, seed + 1)
            for fname, f in funcs:
                h1 = float(np.mean(f(batch1)))
                h2 = float(np.mean(f(batch2)))
                if fname == "const":
                    ratio = h1 / h2  # exactly 1: every path exits
                    const_max_dev = max(const_max_dev, abs(ratio - 1.0))
                elif min(h1, h2) * n_paths < 5.0:
                    skipped += 1
                    continue
                else:
                    ratio = max(h1 / h2, h2 / h1)
                ratios_r.append(ratio)
                pts_r.append(np.concatenate([x1, x2]))
        ratios_r = np.asarray(ratios_r)
        sup_r = float(ratios_r.max())
        trace.append({"r": r, "n": int(ratios_r.size), "sup": sup_r})
        all_ratios.append(ratios_r)
        all_pts.append((np.asarray(pts_r),))
    sups = [t["sup"] for t in trace]
    passed = (
        all(math.isfinite(s) for s in sups)
        and max(sups) < GROWTH_CEILING * min(sups)
    )
    ratios = np.concatenate(all_ratios)
    witnesses = _top_witnesses(all_ratios, all_pts, ("x1x2",))
    return _report(
        name, ratios, witnesses, trace, passed,
        {
            "r_list": list(r_list),
            "L": L,
            "n_pairs_per_scale": n_pairs,
            "n_paths": n_paths,
            "n_data_functions": n_funcs,
            "skipped": skipped,
            "const_max_dev": const_max_dev,
            "seed": seed,
        },
    )


def _exits_X(model, domain, B0, x, n_paths, seed):
    cfg = SimConfig(eps_cut=0.01 * B0.radius, seed=seed)
    res = run_killed(model, B0, x, n_paths, cfg)
    if not np.all(res.exited):
        raise RuntimeError(f"killed run did not exit: {res.status_counts()}")
    return res.x_post


def _exits_Y(model, domain, B0, x, n_paths, seed):
    cfg = SimConfig(eps_cut=0.01 * B0.radius, seed=seed)
    res = run_censored(model, domain, x, n_paths, cfg, stop=B0)
    if not np.all(res.exited):
        raise RuntimeError(f"censored run did not exit: {res.status_counts()}")
    return res.x_post


def check_harnack_X(
    model: LevyModel,
    domain: Domain,
    r_list=(0.1, 0.2, 0.4),
    L: float = 1.5,
    n_pairs: int = 4,
    n_paths: int = 20000,
    seed: int = 0,
) -> InequalityReport:
    """Harnack sweep for the free process: killed exits of enclosing balls.

    The domain only constrains where pairs are placed; harmonicity is
    with respect to the unrestricted process.
    """
    return _harnack_sweep(
        "harnack-x", model, domain, r_list, L, n_pairs, n_paths, seed, _exits_X
    )


def check_harnack_Y(
    model: LevyModel,
    domain: Domain,
    r_list=(0.05, 0.1, 0.2),
    L: float = 1.5,
    n_pairs: int = 4,
    n_paths: int = 20000,
    seed: int = 0,
) -> InequalityReport:
    """Harnack sweep for the censored process.

    Harmonic values are exit-data averages of the suppressed process
    stopped on leaving the enclosing ball; exterior data is implicitly
    zero outside the censoring domain because suppressed paths cannot
    land there.
    """
    return _harnack_sweep(
        "harnack-y", model, domain, r_list, L, n_pairs, n_paths, seed, _exits_Y
    )


def _bhp_data_family(Q, nu, r, n):
    """Nonnegative data on the window's interior opening, constant-first.

    Anchors sit at distance 2r from the boundary point along inward-ish
    directions and sharpness scales like 1/r, so the family probes the
    same shapes at every scale (a fixed-unit family would fake a scale
    trend, as in the Harnack sweep).
    """
    funcs = [("const", lambda pts: np.ones(pts.shape[0]))]
    if n == 1:
        dirs = [(2.0, 1.0), (3.0, 1.5)]
        anchors = [Q + d * r * nu for d, _ in dirs]
        sharps = [s / r for _, s in dirs]
    else:
        t = np.zeros(n)
        t[1] = 1.0
        if abs(nu[1]) > 0.9:
            t = np.zeros(n)
            t[0] = 1.0
        t = t - (t @ nu) * nu
        t /= np.linalg.norm(t)
        units = [nu, (nu + t) / math.sqrt(2.0), (nu - t) / math.sqrt(2.0)]
        anchors = [Q + 2.0 * r * u for u in units]
        sharps = [(1.0 + 0.5 * k) / r for k in range(3)]
    for k, (a, s) in enumerate(zip(anchors, sharps)):

        def bump(pts, a=a, s=s):
            return np.exp(-s * np.linalg.norm(pts - a, axis=1))

        funcs.append((f"bump{k}", bump))
    return funcs


def check_bhp(
    model: LevyModel,
    domain: Domain,
    boundary_point=None,
    r_list=(0.4, 0.2, 0.1),
    n_points: int = 8,
    n_paths: int = 4000,
    process: str = "killed",
    seed: int = 0,
) -> InequalityReport:
    """Boundary Harnack ratio sweep near a boundary point.

    For each scale r the window W = B cap B(Q, r) is a lens inside the
    domain B.  Nonnegative data supported on B minus B(Q, r), and zero
    outside B, induces functions harmonic in W that vanish outside
    B cap B(Q, r) near Q; for pairs (u, v) from the data family the sweep
    records max(R, 1/R) with R = (u(x) v(A_r)) / (v(x) u(A_r)) over
    evaluation points x in B cap B(Q, r/2), where A_r = Q + (r/2) nu is
    the interior reference point at scale r.  Boundary-Harnack
    comparability says R stays bounded by a constant independent of r,
    so the pass rule is the usual bounded-spread trace across halvings.
    process="killed" sweeps harmonicity for the killed process (paths
    exiting W outside B contribute zero); process="censored" uses the
    suppressed construction, whose exits never leave B.
    """
    if not isinstance(domain, (Ball, Interval)):
        raise ValueError("bhp sweep needs a ball or interval domain")
    if process not in ("killed", "censored"):
        raise ValueError(f"unknown process {process!r}")
    c = domain.incenter
    R = float(domain.radius)
    if boundary_point is None:
        Q = np.array(c, dtype=float)
        Q[0] += R
    else:
        Q = np.atleast_1d(np.asarray(boundary_point, dtype=float))
    nu = domain.inward_dir(Q)
    if max(r_list) > 0.45 * R:
        raise ValueError("bhp scales must satisfy r <= 0.45 * radius")
    rng = np.random.default_rng(seed)
    trace = []
    all_ratios = []
    all_pts = []
    skipped = 0
    for j, r in enumerate(r_list):
        W = Lens(tuple(c), R, tuple(Q), r)
        A = Q + 0.5 * r * nu
        half = Lens(tuple(c), R, tuple(Q), 0.5 * r)
        xs = half.sample_interior(rng, n_points, margin=0.03 * r)
        funcs = _bhp_data_family(Q, nu, r, model.n)

        def hvals(x0, sd):
            cfg = SimConfig(eps_cut=0.01 * r, seed=sd)
            if process == "killed":
                res = run_killed(model, W, x0, n_paths, cfg)
            else:
                res = run_censored(model, domain, x0, n_paths, cfg, stop=W)
            if not np.all(res.exited):
                raise RuntimeError(
                    f"bhp window run did not exit: {res.status_counts()}"
                )
            pts = res.x_post
            inside = domain.contains_many(pts)
            return {name: float(np.mean(f(pts) * inside)) for name, f in funcs}
        hA = hvals(A, seed + 1000 * j)
        ratios_r = []
        pts_r = []
        for i, x in enumerate(xs):
            hx = hvals(x, seed + 1000 * j + i + 1)
            for (fa, _), (fb, _) in itertools.combinations(funcs, 2):
                if (
                    min(hx[fa], hx[fb], hA[fa], hA[fb]) * n_paths < 5.0
                ):
                    skipped += 1
                    continue
                ratio = (hx[fa] * hA[fb]) / (hx[fb] * hA[fa])
                ratios_r.append(max(ratio, 1.0 / ratio))
                pts_r.append(x)
        if not ratios_r:
            raise RuntimeError(
                "every bhp ratio was skipped; enlarge n_paths"
            )
        ratios_r = np.asarray(ratios_r)
        trace.append({"r": r, "n": int(ratios_r.size),
                      "sup": float(ratios_r.max())})
        all_ratios.append(ratios_r)
        all_pts.append((np.asarray(pts_r),))
    sups = [t["sup"] for t in trace]
    passed = (
        all(math.isfinite(s) for s in sups)
        and max(sups) < GROWTH_CEILING * min(sups)
    )
    ratios = np.concatenate(all_ratios)
    witnesses = _top_witnesses(all_ratios, all_pts, ("x",))
    return _report(
        "bhp", ratios, witnesses, trace, passed,
        {
            "boundary_point": [float(v) for v in Q],
            "r_list": list(r_list),
            "n_points": n_points,
            "n_paths": n_paths,
            "n_data_functions": len(funcs),
            "process": process,
            "skipped": skipped,
            "seed": seed,
        },
    )


# ---------------------------------------------------------------------------
# the 3G-kappa integral and the gauge bound


def lemma41_integral(
    model: LevyModel,
    domain: Domain,
    ball: Ball,
    v,
    w,
    n_quad: int = 200000,
    seed: int = 0,
    green_source: str = "auto",
):
    """Monte Carlo value of int_B G_B(v,y) G_B(y,w) / G_B(v,w) kappa_D(y) dy.

    B is the small stopping ball inside the (kappa-evaluation) domain D.
    Returns (value, stderr).  The integrand's singularities at v and w
    are square-integrable for alpha > n/2, which covers the stable
    indices this check targets.
    """
    gpair, _ = _green_pair_fn(model, ball, green_source)
    v = np.asarray(v, dtype=float)
    w = np.asarray(w, dtype=float)
    if not (ball.contains(v) and ball.contains(w)):
        raise ValueError("v and w must lie in the small ball")
    if np.array_equal(v, w):
        raise ValueError("v and w must be distinct")
    # kappa_D detached from any jump floor: the floor only matters below
    # the distance from B to the boundary of D, so a tiny one is exact
    kt = build_kappa_table(model, domain, jump_floor=1e-8)
    rng = np.random.default_rng(seed)
    y = ball.sample_interior(rng, n_quad)
    gvw = float(gpair(v[None, :], w[None, :])[0])
    center = np.asarray(getattr(domain, "center", np.zeros(model.n)), dtype=float)
    kap = kt.eval_radial(np.linalg.norm(y - center, axis=1))
    vals = (
        gpair(np.broadcast_to(v, y.shape), y)
        * gpair(y, np.broadcast_to(w, y.shape))
        / gvw
        * kap
    ) * ball.volume
    value = float(vals.mean())
    stderr = float(vals.std() / math.sqrt(n_quad))
    return value, stderr


DEFAULT_R1 = 0.05


def check_lemma41(
    model: LevyModel,
    domain: Domain,
    r: float = 0.5,
    x_center=None,
    r1: float = DEFAULT_R1,
    n_pairs: int = 10,
    n_quad: int = 200000,
    seed: int = 0,
) -> InequalityReport:
    """The 3G-kappa integral stays below 1/2 on balls of radius r1*r.

    Samples (v, w) pairs in B(x_center, r1*r) and evaluates the integral
    with oracle Green values and the analytic censoring density; the
    explicit ceiling 1/2 (+ quadrature tolerance) is the pass rule.
    """
    if x_center is None:
        x_center = domain.incenter
    x_center = np.asarray(x_center, dtype=float)
    if domain.dist_to_boundary(x_center) <= r:
        raise ValueError("B(x_center, r) must sit inside the domain")
    ball = Ball(tuple(x_center), r1 * r)
    rng = np.random.default_rng(seed)
    vals = []
    pts = []
    ses = []
    for k in range(n_pairs):
        v, w = ball.sample_interior(rng, 2)
        if np.linalg.norm(v - w) < 1e-4 * ball.radius:
            continue
        val, se = lemma41_integral(
            model, domain, ball, v, w, n_quad=n_quad, seed=seed + 1000 + k
        )
        vals.append(val)
        ses.append(se)
        pts.append(np.concatenate([v, w]))
    ratios = np.asarray(vals)
    trace = [{"r1": r1, "n": int(ratios.size), "sup": float(ratios.max())}]
    passed = bool(ratios.max() <= 0.5 + 1e-3)
    witnesses = _top_witnesses([ratios], [(np.asarray(pts),)], ("vw",))
    return _report(
        "lemma41", ratios, witnesses, trace, passed,
        {
            "r": r,
            "r1": r1,
            "ball_radius": ball.radius,
            "max_stderr": float(max(ses)),
            "seed": seed,
        },
    )


def find_r1(
    model: LevyModel,
    domain: Domain,
    r: float = 0.5,
    target: float = 0.5,
    n_pairs: int = 4,
    n_quad: int = 50000,
    seed: int = 0,
    iters: int = 12,
) -> float:
    """Largest r1 in (0, 1/3] keeping the 3G-kappa integral under target.

    Bisection on the sampled sup of lemma41_integral; the Harnack
    machinery only needs existence, so the default configuration uses a
    conservative fixed r1 and this finder is informational.
    """
    def sup_at(r1: float) -> float:
        rep = check_lemma41(
            model, domain, r=r, r1=r1, n_pairs=n_pairs, n_quad=n_quad, seed=seed
        )
        return rep.sup

    lo, hi = 1e-3, 1.0 / 3.0
    if sup_at(hi) <= target:
        return hi
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        if sup_at(mid) <= target:
            lo = mid
        else:
            hi = mid
    return lo


def check_khasminskii_gauge(
    model: LevyModel,
    domain: Domain,
    r: float = 0.5,
    x_center=None,
    r1: float = DEFAULT_R1,
    n_pairs: int = 10,
    n_paths: int = 20000,
    seed: int = 0,
    eps_cut: float | None = None,
) -> InequalityReport:
    """Gauge bound u(v, w) in [1, 2] on admissible small balls.

    For pairs (v, w) in B(x_center, r1*r) inside the censoring domain,
    the conditional gauge is estimated as the paired ratio of censored
    to killed Green values; pass requires every estimate inside
    [1 - 3 sigma, 2 + 3 sigma] and the estimate never significantly
    below 1.
    """
    if x_center is None:
        x_center = domain.incenter
    x_center = np.asarray(x_center, dtype=float)
    if domain.dist_to_boundary(x_center) <= r:
        raise ValueError("B(x_center, r) must sit inside the domain")
    ball = Ball(tuple(x_center), r1 * r)
    rng = np.random.default_rng(seed)
    values = []
    pts = []
    ok = True
    exponents = []
    for k in range(n_pairs):
        # keep the pair comfortably interior so the occupation target
        # ball (radius |v-w|/8 <= 0.19 R) stays inside the stopping ball
        v, w = ball.sample_interior(rng, 2, margin=0.25 * ball.radius)
        if np.linalg.norm(v - w) < 0.05 * ball.radius:
            w = v + np.array([0.2 * ball.radius] + [0.0] * (model.n - 1))
        cfg = SimConfig(
            eps_cut=eps_cut if eps_cut is not None else 0.005 * ball.radius,
            seed=seed + 31 * k,
        )
        est = potential.gauge(
            model, domain, ball, v, w, n_paths=n_paths, config=cfg
        )
        values.append(est.value)
        exponents.append(est.extra["mean_exponent"])
        pts.append(np.concatenate([v, w]))
        lo = est.value - 3.0 * est.stderr
        hi = est.value + 3.0 * est.stderr
        if hi < 1.0 or lo > 2.0:
            ok = False
    ratios = np.asarray(values)
    trace = [{"r1": r1, "n": int(ratios.size), "sup": float(ratios.max())}]
    witnesses = _top_witnesses([ratios], [(np.asarray(pts),)], ("vw",))
    return _report(
        "gauge", ratios, witnesses, trace, ok,
        {
            "r": r,
            "r1": r1,
            "ball_radius": ball.radius,
            "mean_exponents": [float(e) for e in exponents],
            "n_paths": n_paths,
            "seed": seed,
        },
    )


# ---------------------------------------------------------------------------
# construction equivalence


def _equivalence_battery(n: int):
    funcs = [
        ("mass", lambda p: np.ones(p.shape[0])),
        ("radius2", lambda p: np.einsum("ij,ij->i", p, p)),
        ("first_coord", lambda p: p[:, 0]),
        ("core_indicator", lambda p: (np.einsum("ij,ij->i", p, p) < 0.25).astype(float)),
        ("soft_bump", lambda p: np.exp(-2.0 * np.linalg.norm(p, axis=1))),
    ]
    return funcs


def check_equivalence(
    model: LevyModel,
    domain: Domain,
    x,
    t: float,
    n_paths: int = 100000,
    seed: int = 0,
    eps_cut: float | None = None,
) -> InequalityReport:
    """Suppression vs reweighting at a fixed time, over a test battery.

    E_x[f(Y_t)] is computed two ways: directly from suppressed paths at
    time t, and as E_x[e^{A_t} f(X_t); t < tau_D] from killed weighted
    paths.  The two constructions are distributionally identical for
    the truncated-jump model, so every battery function must agree
    within 3 combined standard errors.
    """
    cfg = SimConfig(eps_cut=eps_cut, t_fixed=t, seed=seed)
    inw = run_censored(model, domain, x, n_paths, cfg)
    from .engine import run_fk

    fk = run_fk(model, domain, x, n_paths, cfg)
    alive = fk.status == int(PathStatus.REACHED_T)
    w = np.where(alive, fk.fk_weights, 0.0)
    assert np.all(inw.status == int(PathStatus.REACHED_T))
    ratios = []
    rows = []
    details = {}
    ok = True
    for name, f in _equivalence_battery(model.n):
        a = f(inw.x_post)
        b = w * f(np.where(alive[:, None], fk.x_post, 0.0))
        ma, sa = float(a.mean()), float(a.std(ddof=1) / math.sqrt(n_paths))
        mb, sb = float(b.mean()), float(b.std(ddof=1) / math.sqrt(n_paths))
        se = math.hypot(sa, sb)
        zscore = abs(ma - mb) / se if se > 0 else 0.0
        details[name] = {
            "inw": ma, "fk": mb, "stderr": se, "z": zscore,
        }
        ratios.append(zscore)
        rows.append(np.array([ma, mb]))
        if zscore > 3.0:
            ok = False
    ratios = np.asarray(ratios)
    trace = [{"t": t, "n": int(ratios.size), "sup": float(ratios.max())}]
    witnesses = _top_witnesses([ratios], [(np.asarray(rows),)], ("inw_fk",))
    return _report(
        "equivalence", ratios, witnesses, trace, ok,
        {
            "t": t,
            "n_paths": n_paths,
            "battery": details,
            "alive_fraction": float(alive.mean()),
            "seed": seed,
        },
    )


# ---------------------------------------------------------------------------
# boundary trichotomy


VERDICTS = (
    "Conservative",
    "HitsBoundaryPositiveProb",
    "HitsBoundaryAS",
    "TransientHitsAS_1d",
    "Inconclusive",
)


@dataclass(frozen=True)
class RegimePrediction:
    """Verdict of the boundary-behaviour trichotomy classifier."""

    verdict: str
    applied_clause: str
    inputs: dict
    notes: tuple = ()

    def to_dict(self) -> dict:
        return {
            "verdict": self.verdict,
            "applied_clause": self.applied_clause,
            "inputs": dict(self.inputs),
            "notes": list(self.notes),
        }


def classify_boundary_regime(
    model: LevyModel,
    boundary_dim: float | None = None,
    finite_volume: bool | None = None,
    domain: Domain | None = None,
) -> RegimePrediction:
    """Predict whether the censored process approaches the boundary.

    The decision uses the fitted scaling exponents of the profile and
    the boundary dimension d: small upper exponent keeps the process
    conservative when d < n - 2*delta2; large lower exponent forces
    boundary approach when d > n - 2*delta1 (almost surely if the
    domain has finite volume); on the line n=1 the transient criterion
    delta3 >= 1/2 < delta1 gives almost-sure approach.  Anything else
    is reported inconclusive rather than guessed.
    """
    n = model.n
    if boundary_dim is None:
        if domain is None:
            raise ValueError("need boundary_dim or a domain to infer it from")
        boundary_dim = 0.0 if n == 1 else float(n - 1)
    if finite_volume is None:
        finite_volume = True  # every supported shape is bounded
    exps = estimate_scaling_exponents(model.profile)
    d1, d2, d3 = exps.delta1, exps.delta2, exps.delta3
    if not (0.0 < d1 <= d2 < 1.0):
        raise ValueError(f"scaling estimate invalid: delta1={d1}, delta2={d2}")
    inputs = {
        "n": n,
        "delta1": d1,
        "delta2": d2,
        "delta3": d3,
        "boundary_dim": boundary_dim,
        "finite_volume": finite_volume,
    }
    notes = []
    if n == 1 and abs(d2 - 0.5) < 1e-9:
        notes.append("log-gauge borderline: delta2 == n/2 == 1/2")
    if n == 1 and d3 >= 0.5 and d1 > 0.5:
        return RegimePrediction(
            "TransientHitsAS_1d", "one-dimensional transient clause",
            inputs, tuple(notes),
        )
    if d2 <= n / 2.0 and boundary_dim < n - 2.0 * d2:
        return RegimePrediction(
            "Conservative", "small-exponent clause: d < n - 2*delta2",
            inputs, tuple(notes),
        )
    if boundary_dim > n - 2.0 * d1:
        verdict = "HitsBoundaryAS" if finite_volume else "HitsBoundaryPositiveProb"
        return RegimePrediction(
            verdict, "large-exponent clause: d > n - 2*delta1",
            inputs, tuple(notes),
        )
    return RegimePrediction("Inconclusive", "no clause applies", inputs, tuple(notes))


def wilson_interval(k: int, n: int, z: float = 1.96) -> tuple[float, float]:
    """Wilson score interval for a binomial proportion."""
    if n <= 0:
        raise ValueError("need at least one trial")
    p = k / n
    denom = 1.0 + z * z / n
    center = (p + z * z / (2 * n)) / denom
    half = z * math.sqrt(p * (1 - p) / n + z * z / (4 * n * n)) / denom
    return max(0.0, center - half), min(1.0, center + half)


@dataclass
class BoundaryReport:
    """Boundary-approach fractions against the classifier's verdict."""

    horizons: list
    fractions: list
    intervals: list
    n_paths: int
    prediction: dict
    consistent: bool | None
    details: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


def run_boundary_experiment(
    model: LevyModel,
    domain: Domain,
    horizons=(10.0, 100.0, 1000.0),
    n_paths: int = 10000,
    x0=None,
    seed: int = 0,
    eps_cut: float | None = None,
    eta_mult: float | None = None,
    dwell_events: int | None = None,
    boundary_dim: float | None = None,
) -> BoundaryReport:
    """Measure boundary-approach fractions of the suppressed process.

    One batch runs to the largest horizon with the sustained-proximity
    detector armed: a path counts as approaching the boundary once it
    logs `dwell_events` consecutive suppressed jumps without climbing
    back above the eta-layer.  Fractions at the smaller horizons are
    read off the recorded firing times, so all horizons share paths.
    The report carries Wilson intervals and a consistency flag against
    the regime classifier.

    The default (eps_cut, eta_mult, dwell_events) triple is a calibrated
    instrument and the three values only make sense together.  For n >= 2
    the layer is thin (eta = 15 eps) and the streak threshold 42 puts the
    measured hitting-regime fraction near 0.76 at horizon 1e3 while the
    conservative regime stays below 0.005.  In one dimension an accepted
    jump always moves at least eps_cut away from the wall, so streaks are
    structurally shorter; the calibration compensates with a finer cut
    and a much wider layer (eta = 100 eps, threshold 35).  That certifies
    the 1d hitting regime (fraction ~0.99 at horizon 1e3) but leaves a
    measured ~6% false-fire rate for 1d conservative models, which then
    surface as consistent=False rather than as a fake pass.  Overriding
    eps_cut alone keeps the calibrated multipliers.
    """
    horizons = sorted(float(h) for h in horizons)
    pred = classify_boundary_regime(
        model, boundary_dim=boundary_dim, domain=domain
    )
    if x0 is None:
        x0 = domain.incenter
    scale = domain.diam / 2.0
    if model.n == 1:
        eps = eps_cut if eps_cut is not None else 2e-3 * scale
        if eta_mult is None:
            eta_mult = 100.0
        if dwell_events is None:
            dwell_events = 35
    else:
        eps = eps_cut if eps_cut is not None else 1e-2 * scale
        if eta_mult is None:
            eta_mult = 15.0
        if dwell_events is None:
            dwell_events = 42
    cfg = SimConfig(
        eps_cut=eps,
        eta_stop=eta_mult * eps,
        dwell_events=dwell_events,
        horizon=horizons[-1],
        seed=seed,
    )
    res = run_censored(model, domain, x0, n_paths, cfg)
    fired = res.status == int(PathStatus.BOUNDARY)
    t_fire = np.where(fired, res.tau, np.inf)
    fractions = []
    intervals = []
    for h in horizons:
        k = int(np.sum(t_fire <= h))
        fractions.append(k / n_paths)
        intervals.append(list(wilson_interval(k, n_paths)))
    consistent = _boundary_consistency(pred.verdict, fractions)
    return BoundaryReport(
        horizons=list(horizons),
        fractions=fractions,
        intervals=intervals,
        n_paths=n_paths,
        prediction=pred.to_dict(),
        consistent=consistent,
        details={
            "eps": eps,
            "eta": eta_mult * eps,
            "dwell_events": dwell_events,
            "seed": seed,
            "status_counts": {str(k): v for k, v in res.status_counts().items()},
            "mean_events_per_path": float(res.nevents.mean()),
        },
    )


def _boundary_consistency(verdict: str, fractions) -> bool | None:
    last = fractions[-1]
    monotone = all(a <= b + 1e-12 for a, b in zip(fractions, fractions[1:]))
    if verdict == "Conservative":
        return last <= 0.01
    if verdict in ("HitsBoundaryAS", "TransientHitsAS_1d"):
        return monotone and last >= 0.5
    if verdict == "HitsBoundaryPositiveProb":
        return last > 0.0
    return None
