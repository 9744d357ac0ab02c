"""Closed-form references for the isotropic alpha-stable process on balls.

These are the exact quantities Monte Carlo estimates are checked against:
Green function, Poisson kernel, exit-radius law from the center, and mean
exit time, all for the standard isotropic alpha-stable process killed on
leaving a ball.  A model from kernels.py matches the standard process
exactly when its profile is stable and c_cal equals the normalization
A(n, alpha); otherwise a stable-profile model differs only by the time
change c_cal / A(n, alpha), which rescales Green functions and exit times
but leaves exit laws untouched.
"""
from __future__ import annotations

import math

import numpy as np
from scipy import integrate, special

from .kernels import BernsteinProfile, Family, LevyModel

__all__ = [
    "stable_levy_normalization",
    "calibrated_stable_model",
    "is_calibrated_stable",
    "green_time_scale",
    "ball_green",
    "ball_poisson_kernel",
    "ball_exit_radius_cdf",
    "ball_exit_bin_masses",
    "ball_mean_exit_time",
]


def _check(n: int, alpha: float):
    if n < 1 or int(n) != n:
        raise ValueError("n must be a positive integer")
    if not 0.0 < alpha < 2.0:
        raise ValueError("alpha must lie in (0, 2)")


def stable_levy_normalization(n: int, alpha: float) -> float:
    """A(n, alpha): the constant making A * |y|^(-n-alpha) the Levy density
    whose symbol is exactly |xi|^alpha."""
    _check(n, alpha)
    return (
        alpha
        * 2.0 ** (alpha - 1.0)
        * math.pi ** (-0.5 * n)
        * math.gamma(0.5 * (n + alpha))
        / math.gamma(1.0 - 0.5 * alpha)
    )


def calibrated_stable_model(n: int, alpha: float) -> LevyModel:
    """The model whose kernel equals the standard alpha-stable density."""
    prof = BernsteinProfile(Family.STABLE, alpha)
    return LevyModel(n=n, profile=prof, c_cal=stable_levy_normalization(n, alpha))


def is_calibrated_stable(model: LevyModel, rtol: float = 1e-9):
    """Return alpha if the model is the standard stable process, else None."""
    if model.profile.family is not Family.STABLE:
        return None
    a = model.profile.alpha
    ref = stable_levy_normalization(model.n, a)
    if abs(model.c_cal - ref) <= rtol * ref:
        return a
    return None


def green_time_scale(model: LevyModel) -> float:
    """Factor converting standard-stable Green values to this model's.

    A stable-profile model with density c_cal * |y|^(-n-alpha) is the
    standard process run at speed c_cal / A(n, alpha), so its Green
    function and mean exit times are the standard ones times
    A(n, alpha) / c_cal.  Exit distributions are unaffected.
    """
    if model.profile.family is not Family.STABLE:
        raise ValueError("time scale against the stable oracle needs a stable profile")
    return stable_levy_normalization(model.n, model.profile.alpha) / model.c_cal


# ---------------------------------------------------------------------------
# Green function on a ball


def _green_constant(n: int, alpha: float) -> float:
    return math.gamma(0.5 * n) / (
        2.0**alpha * math.pi ** (0.5 * n) * math.gamma(0.5 * alpha) ** 2
    )


def _as_rows(x, n: int):
    x = np.asarray(x, dtype=float)
    scalar = x.ndim == 1
    x = np.atleast_2d(x)
    if x.shape[1] != n:
        raise ValueError(f"points must have {n} coordinates")
    return x, scalar


def _green_integral_quad(n: int, alpha: float, z: float) -> float:
    """int_0^z t^(alpha/2 - 1) (1 + t)^(-n/2) dt via the substitution t = w^(2/alpha)."""
    if z <= 0.0:
        return 0.0
    wmax = z ** (0.5 * alpha)
    inv = 2.0 / alpha

    def f1(w):
        return (1.0 + w**inv) ** (-0.5 * n)

    v, _ = integrate.quad(f1, 0.0, min(1.0, wmax), epsabs=0.0, epsrel=1e-12, limit=200)
    if wmax > 1.0:
        def f2(t):
            return math.exp(t) * (1.0 + math.exp(inv * t)) ** (-0.5 * n)

        v2, _ = integrate.quad(
            f2, 0.0, math.log(wmax), epsabs=0.0, epsrel=1e-12, limit=400
        )
        v += v2
    return inv * v


def ball_green(
    n: int,
    alpha: float,
    x,
    y,
    radius: float = 1.0,
    center=None,
    method: str = "auto",
):
    """Green function of the standard alpha-stable process killed on a ball.

    Vectorized over matching leading axes of x and y.  Points on or outside
    the closed ball give 0; coincident interior points give inf.
    """
    _check(n, alpha)
    if method not in ("auto", "quad", "betainc"):
        raise ValueError(f"unknown method {method!r}")
    if method == "auto":
        method = "betainc" if n > alpha else "quad"
    if method == "betainc" and n <= alpha:
        raise ValueError("betainc route needs n > alpha")
    x, sx = _as_rows(x, n)
    y, sy = _as_rows(y, n)
    c = np.zeros(n) if center is None else np.asarray(center, dtype=float)
    xs = (x - c) / radius
    ys = (y - c) / radius
    d2 = np.sum((xs - ys) ** 2, axis=1)
    px = 1.0 - np.sum(xs * xs, axis=1)
    py = 1.0 - np.sum(ys * ys, axis=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        r0 = px * py / d2
        dpow = d2 ** (0.5 * (alpha - n))
    inside = (px > 0.0) & (py > 0.0)
    if method == "betainc":
        a, b = 0.5 * alpha, 0.5 * (n - alpha)
        with np.errstate(divide="ignore", invalid="ignore"):
            I = special.beta(a, b) * special.betainc(a, b, r0 / (1.0 + r0))
        I = np.where(np.isfinite(r0), I, special.beta(a, b))
    else:
        I = np.asarray([
            _green_integral_quad(n, alpha, z) if np.isfinite(z) else np.inf
            for z in np.atleast_1d(r0)
        ])
    with np.errstate(invalid="ignore"):
        G = np.where(inside, _green_constant(n, alpha) * dpow * I, 0.0)
    coincident = inside & (d2 == 0.0)
    if np.any(coincident):
        if n > alpha:
            G = np.where(coincident, np.inf, G)
        elif n == alpha:
            G = np.where(coincident, np.inf, G)  # log singularity
        else:
            # n < alpha: d^(alpha-n) * integral has the finite limit below
            lim = (
                _green_constant(n, alpha)
                * (2.0 / (alpha - n))
                * (px * py) ** (0.5 * (alpha - n))
            )
            G = np.where(coincident, lim, G)
    G = G * radius ** (alpha - n)
    return float(G[0]) if (sx and sy) else G


# ---------------------------------------------------------------------------
# Poisson kernel and exit law


def _poisson_constant(n: int, alpha: float) -> float:
    return (
        math.gamma(0.5 * n)
        * math.pi ** (-0.5 * n - 1.0)
        * math.sin(0.5 * math.pi * alpha)
    )


def ball_poisson_kernel(n: int, alpha: float, x, z, radius: float = 1.0, center=None):
    """Exit density K(x, z) of the ball: P_x(X_tau in dz) = K(x, z) dz.

    x inside the ball, z outside; z on or inside the closed ball gives 0.
    """
    _check(n, alpha)
    x, sx = _as_rows(x, n)
    z, sz = _as_rows(z, n)
    c = np.zeros(n) if center is None else np.asarray(center, dtype=float)
    xs = (x - c) / radius
    zs = (z - c) / radius
    px = 1.0 - np.sum(xs * xs, axis=1)
    pz = np.sum(zs * zs, axis=1) - 1.0
    d = np.linalg.norm(xs - zs, axis=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        K = (
            _poisson_constant(n, alpha)
            * (px / pz) ** (0.5 * alpha)
            * d ** (-float(n))
        )
    K = np.where((px > 0.0) & (pz > 0.0), K, 0.0)
    K = K * radius ** (-float(n))
    return float(K[0]) if (sx and sz) else K


def ball_exit_radius_cdf(alpha: float, s):
    """CDF of |X_tau - c| / rho for exit from B(c, rho) started at the center.

    Dimension-free: equals betainc(1 - alpha/2, alpha/2, (s^2 - 1)/s^2).
    """
    if not 0.0 < alpha < 2.0:
        raise ValueError("alpha must lie in (0, 2)")
    s = np.asarray(s, dtype=float)
    v = np.clip((s * s - 1.0) / (s * s), 0.0, 1.0)
    out = special.betainc(1.0 - 0.5 * alpha, 0.5 * alpha, v)
    return np.where(s >= 1.0, out, 0.0)


def ball_exit_bin_masses(alpha: float, edges) -> np.ndarray:
    """Masses of the exit-radius ratio in [edges[i], edges[i+1]) bins."""
    edges = np.asarray(edges, dtype=float)
    if np.any(edges < 1.0) or np.any(np.diff(edges) <= 0.0):
        raise ValueError("edges must be increasing and >= 1")
    return np.diff(ball_exit_radius_cdf(alpha, edges))


def ball_mean_exit_time(n: int, alpha: float, x, radius: float = 1.0, center=None):
    """E_x[tau] for the standard alpha-stable process on B(center, radius)."""
    _check(n, alpha)
    x, sx = _as_rows(x, n)
    c = np.zeros(n) if center is None else np.asarray(center, dtype=float)
    k = math.gamma(0.5 * n) / (
        2.0**alpha * math.gamma(1.0 + 0.5 * alpha) * math.gamma(0.5 * (n + alpha))
    )
    gap = radius**2 - np.sum((x - c) ** 2, axis=1)
    out = np.where(gap > 0.0, k * np.maximum(gap, 0.0) ** (0.5 * alpha), 0.0)
    return float(out[0]) if sx else out
