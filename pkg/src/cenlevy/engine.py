"""Simulation driver: backend selection, run configuration, batch results.

The censored process is built by jump suppression: proposed jumps landing
outside the censor shape are discarded and the path stays put, which by the
memorylessness of the exponential clock realizes resurrection-at-the-kill.
The same event loop, with suppression off and the Feynman-Kac accumulator on,
yields the reweighting construction; both are exact for the truncated
compound-Poisson model, so their estimates must agree within Monte Carlo
error.

Backends:
  compiled  - Cython core, all modes, GIL-free (shardable across threads)
  fallback  - vectorized NumPy lockstep, pure-jump only
  reference - scalar Python, all modes (used directly by tests, and by the
              engine for Gaussian mode when the compiled core is missing)
"""
from __future__ import annotations

import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from . import fallback, reference
from .geometry import Annulus, Ball, Box, Domain, Interval, Lens
from .kernels import LevyModel, small_jump_variance
from .status import PathStatus
from .tables import build_jump_table, build_kappa_table

try:
    from . import _core

    HAVE_COMPILED = True
except ImportError:  # pragma: no cover - depends on the build
    _core = None
    HAVE_COMPILED = False

if os.environ.get("CENLEVY_FORCE_FALLBACK", "") == "1":
    BACKEND = "fallback"
else:
    BACKEND = "compiled" if HAVE_COMPILED else "fallback"


# ------------------------------------------------------------------ shapes


@dataclass(frozen=True)
class ShapeSpec:
    """Core-level shape encoding shared by all backends."""

    kind: int  # -1 none, 0 ball, 1 box, 2 annulus, 3 lens
    pA: np.ndarray
    pB: np.ndarray
    s0: float
    s1: float


def encode_shape(domain, n: int) -> ShapeSpec:
    zeros = np.zeros(n)
    if domain is None:
        return ShapeSpec(-1, zeros, zeros, 0.0, 0.0)
    if isinstance(domain, Ball):
        return ShapeSpec(0, np.asarray(domain.center, dtype=float), zeros, domain.radius, 0.0)
    if isinstance(domain, Box):
        return ShapeSpec(
            1,
            np.asarray(domain.lo, dtype=float),
            np.asarray(domain.hi, dtype=float),
            0.0,
            0.0,
        )
    if isinstance(domain, Interval):
        return ShapeSpec(1, np.array([domain.a]), np.array([domain.b]), 0.0, 0.0)
    if isinstance(domain, Annulus):
        return ShapeSpec(
            2, np.asarray(domain.center, dtype=float), zeros, domain.rin, domain.rout
        )
    if isinstance(domain, Lens):
        return ShapeSpec(
            3,
            np.asarray(domain.center1, dtype=float),
            np.asarray(domain.center2, dtype=float),
            domain.radius1,
            domain.radius2,
        )
    raise TypeError(f"cannot encode domain {type(domain).__name__}")


# ------------------------------------------------------------------ config


@dataclass(frozen=True)
class SimConfig:
    """Run parameters.  None fields are resolved against the model/domain:
    eps_cut and eta_stop default to 1e-3 of the domain diameter, dwell_time
    to 1% of the horizon (when finite)."""

    eps_cut: float | None = None  # jump truncation radius
    eta_stop: float | None = None  # boundary-layer thickness
    horizon: float = math.inf  # hard time cap (status HORIZON)
    t_fixed: float = math.inf  # observation time (status REACHED_T)
    max_events: int = 10_000_000
    dwell_time: float | None = None  # continuous in-layer dwell trigger
    dwell_events: int = 0  # consecutive suppressed-in-layer trigger
    gaussian_mode: bool = False  # add the small-jump diffusion proxy
    fk_cap: float = 700.0  # exp() overflow guard for the FK exponent
    seed: int = 0
    path_index_start: int = 0  # first path index of the batch
    n_workers: int = 1
    record_events: bool = False  # reference backend only

    def resolve(self, model: LevyModel, domain) -> dict:
        diam = domain.diam
        eps = self.eps_cut if self.eps_cut is not None else 1e-3 * diam
        eta = self.eta_stop if self.eta_stop is not None else eps
        if self.dwell_time is not None:
            dwell = self.dwell_time
        elif math.isfinite(self.horizon) and self.dwell_events == 0:
            dwell = 0.01 * self.horizon
        else:
            dwell = math.inf
        sigma = 0.0
        dt_sub = 0.0
        if self.gaussian_mode:
            sigma = math.sqrt(small_jump_variance(model, eps))
            dt_sub = (eta / sigma) ** 2 if sigma > 0.0 else math.inf
        return {"eps": eps, "eta": eta, "dwell_time": dwell, "sigma": sigma, "dt_sub": dt_sub}


# ------------------------------------------------------------------ results


@dataclass
class BatchResult:
    status: np.ndarray
    tau: np.ndarray
    nevents: np.ndarray
    nsuppressed: np.ndarray
    x_pre: np.ndarray
    x_post: np.ndarray
    fk_a: np.ndarray
    occupations: np.ndarray
    consec_max: np.ndarray
    meta: dict = field(default_factory=dict)

    @property
    def n_paths(self) -> int:
        return len(self.status)

    def fraction(self, *statuses: PathStatus) -> float:
        codes = [int(s) for s in statuses]
        return float(np.isin(self.status, codes).mean())

    def status_counts(self) -> dict:
        vals, cnt = np.unique(self.status, return_counts=True)
        return {PathStatus(int(v)).name: int(c) for v, c in zip(vals, cnt)}

    @property
    def exited(self) -> np.ndarray:
        return np.isin(
            self.status, [int(PathStatus.EXIT_JUMP), int(PathStatus.EXIT_GAUSS)]
        )

    @property
    def fk_weights(self) -> np.ndarray:
        return np.exp(self.fk_a)


# ------------------------------------------------------------------ driver


def _prepare_x0(x0, n: int, n_paths: int) -> np.ndarray:
    arr = np.asarray(x0, dtype=float)
    if arr.ndim == 1:
        if arr.shape[0] != n:
            raise ValueError(f"x0 has dimension {arr.shape[0]}, model has {n}")
        return np.ascontiguousarray(np.broadcast_to(arr, (n_paths, n)).copy())
    if arr.shape != (n_paths, n):
        raise ValueError(f"x0 shape {arr.shape} != ({n_paths}, {n})")
    return np.ascontiguousarray(arr)


def _prepare_targets(targets, n: int) -> np.ndarray:
    if targets is None:
        return np.zeros((0, n + 1))
    rows = []
    for center, radius in targets:
        c = np.atleast_1d(np.asarray(center, dtype=float))
        if c.shape[0] != n:
            raise ValueError("target center dimension mismatch")
        if radius <= 0.0:
            raise ValueError("target radius must be positive")
        rows.append(np.concatenate([c, [float(radius)]]))
    return np.ascontiguousarray(np.vstack(rows)) if rows else np.zeros((0, n + 1))


def _alloc_outputs(n_paths: int, n: int, mtar: int) -> tuple:
    """Output arrays in the order the backends fill them."""
    return (
        np.zeros(n_paths, dtype=np.int32),  # status
        np.zeros(n_paths),  # tau
        np.zeros(n_paths, dtype=np.int64),  # nevents
        np.zeros(n_paths, dtype=np.int64),  # nsuppressed
        np.zeros((n_paths, n)),  # x_pre
        np.zeros((n_paths, n)),  # x_post
        np.zeros(n_paths),  # fk_a
        np.zeros((n_paths, mtar)),  # occupations
        np.zeros(n_paths, dtype=np.int64),  # consec_max
    )


def _build_run(
    model: LevyModel,
    censor,
    stop,
    x0,
    n_paths: int,
    config: SimConfig,
    targets,
    fk_domain,
) -> tuple:
    """Validate and assemble (x0_arr, pidx, args_tail, resolved) for a run.

    args_tail is everything run_batch takes between the path indices and the
    output arrays, identical across the three backends.
    """
    n = model.n
    for dom in (censor, stop, fk_domain):
        if dom is not None and dom.n != n:
            raise ValueError("domain dimension does not match the model")
    if censor is None and stop is None:
        raise ValueError("need a censor or stop shape (or both)")
    if n > 16:
        raise ValueError("dimensions above 16 are not supported")
    ref_domain = censor if censor is not None else stop
    res = config.resolve(model, ref_domain)
    if not (
        math.isfinite(config.horizon)
        or math.isfinite(config.t_fixed)
        or stop is not None
        or config.dwell_events > 0
        or math.isfinite(res["dwell_time"])
    ):
        # max_events still bounds the run, but that is usually a mistake
        raise ValueError("no stop shape and no finite time cap")

    table = build_jump_table(model, res["eps"])
    cen = encode_shape(censor, n)
    stp = encode_shape(stop, n)
    fk_on = fk_domain is not None
    if fk_on:
        ktab = build_kappa_table(model, fk_domain, jump_floor=res["eps"])
        kap_s = np.ascontiguousarray(ktab.s)
        kap_logk = np.ascontiguousarray(ktab.log_kappa)
        kap_center = np.ascontiguousarray(np.asarray(ktab.center, dtype=float))
        if kap_center.shape[0] != n:
            # interval tables carry a 1d center already; others match n
            raise ValueError("kappa table center dimension mismatch")
    else:
        kap_s = np.array([0.0, 1.0])
        kap_logk = np.array([0.0, 0.0])
        kap_center = np.zeros(n)

    x0_arr = _prepare_x0(x0, n, n_paths)
    tar = _prepare_targets(targets, n)
    pidx = np.arange(
        config.path_index_start, config.path_index_start + n_paths, dtype=np.uint64
    )
    res["total_rate"] = table.total_rate

    args_tail = (
        int(config.seed),
        table.total_rate,
        np.ascontiguousarray(table.log_r),
        np.ascontiguousarray(table.log_v),
        cen.kind,
        np.ascontiguousarray(cen.pA),
        np.ascontiguousarray(cen.pB),
        cen.s0,
        cen.s1,
        stp.kind,
        np.ascontiguousarray(stp.pA),
        np.ascontiguousarray(stp.pB),
        stp.s0,
        stp.s1,
        float(config.horizon),
        float(config.t_fixed),
        int(config.max_events),
        res["eta"],
        res["dwell_time"],
        int(config.dwell_events),
        int(fk_on),
        kap_s,
        kap_logk,
        kap_center,
        float(config.fk_cap),
        tar,
        res["sigma"],
        res["dt_sub"],
    )
    return x0_arr, pidx, args_tail, res


def simulate_batch(
    model: LevyModel,
    censor: Domain | None,
    stop: Domain | None,
    x0,
    n_paths: int,
    config: SimConfig | None = None,
    targets=None,
    fk_domain: Domain | None = None,
) -> BatchResult:
    """Run a batch of paths of the truncated model.

    censor: jumps landing outside are suppressed (None: no suppression).
    stop: an accepted jump landing outside terminates the path (None: run to
    a time/event cap).  fk_domain: accrue the truncated killing density of
    this domain along the path; occupation accruals are then weighted by
    exp(A_t) and the terminal exponent is reported per path.
    """
    config = config or SimConfig()
    x0_arr, pidx, args_tail, res = _build_run(
        model, censor, stop, x0, n_paths, config, targets, fk_domain
    )
    n = model.n
    fk_on = fk_domain is not None
    outs = _alloc_outputs(n_paths, n, args_tail[25].shape[0])

    t0 = time.perf_counter()
    backend = BACKEND
    if backend == "compiled":
        workers = max(1, int(config.n_workers))
        if workers == 1 or n_paths < 2 * workers:
            _core.run_batch(x0_arr, pidx, *args_tail, *outs)
        else:
            bounds = np.linspace(0, n_paths, workers + 1, dtype=int)
            def _run(i0, i1):
                _core.run_batch(
                    x0_arr[i0:i1],
                    pidx[i0:i1],
                    *args_tail,
                    *(o[i0:i1] for o in outs),
                )
            with ThreadPoolExecutor(max_workers=workers) as pool:
                futs = [
                    pool.submit(_run, bounds[i], bounds[i + 1])
                    for i in range(workers)
                    if bounds[i] < bounds[i + 1]
                ]
                for f in futs:
                    f.result()
    elif config.gaussian_mode:
        backend = "reference"  # the NumPy backend has no Gaussian mode
        reference.run_batch(x0_arr, pidx, *args_tail, *outs)
    else:
        fallback.run_batch(x0_arr, pidx, *args_tail, *outs)
    wall = time.perf_counter() - t0

    meta = {
        "backend": backend,
        "n_paths": n_paths,
        "total_events": int(outs[2].sum()),
        "wall_time_s": wall,
        "eps": res["eps"],
        "eta": res["eta"],
        "dwell_time": res["dwell_time"],
        "sigma": res["sigma"],
        "total_rate": res["total_rate"],
        "fk": fk_on,
        "config": asdict(config),
        "model": model.describe() if hasattr(model, "describe") else str(model),
        "censor": censor.describe() if censor is not None else None,
        "stop": stop.describe() if stop is not None else None,
    }
    return BatchResult(*outs, meta=meta)


# ------------------------------------------------------------------ wrappers


def run_killed(model, domain, x0, n_paths, config=None, targets=None) -> BatchResult:
    """Killed process: any jump out of `domain` terminates the path."""
    return simulate_batch(model, None, domain, x0, n_paths, config, targets)


def run_censored(
    model, domain, x0, n_paths, config=None, targets=None, stop=None
) -> BatchResult:
    """Censored process via suppression; optionally stopped on exiting a
    subdomain `stop` (accepted jumps only)."""
    return simulate_batch(model, domain, stop, x0, n_paths, config, targets)


def run_fk(
    model, domain, x0, n_paths, config=None, targets=None, stop=None
) -> BatchResult:
    """Reweighting construction: free jumps stopped on leaving `stop`
    (default: `domain`), accruing the truncated killing density of `domain`.
    Occupations come back exp(A)-weighted; exit statistics of the censored
    process are recovered by weighting exits that land inside `domain` with
    exp(A) and dropping the rest."""
    return simulate_batch(
        model, None, stop or domain, x0, n_paths, config, targets, fk_domain=domain
    )
