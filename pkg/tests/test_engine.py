"""Backend agreement, determinism, and distributional checks for the engine."""
import math
import os
import subprocess
import sys

import numpy as np
import pytest

from cenlevy import engine, fallback, oracles, reference
from cenlevy.geometry import Annulus, Ball, Box, Interval
from cenlevy.kernels import BernsteinProfile, Family, LevyModel
from cenlevy.philox import ScalarPhilox
from cenlevy.status import PathStatus

needs_core = pytest.mark.skipif(
    not engine.HAVE_COMPILED, reason="compiled core not built"
)

MODEL2 = oracles.calibrated_stable_model(2, 1.2)
BALL2 = Ball((0.0, 0.0), 1.0)


def _run_backend(backend_mod, model, censor, stop, x0, n_paths, config,
                 targets=None, fk_domain=None):
    x0_arr, pidx, args_tail, _ = engine._build_run(
        model, censor, stop, x0, n_paths, config, targets, fk_domain
    )
    outs = engine._alloc_outputs(n_paths, model.n, args_tail[25].shape[0])
    backend_mod.run_batch(x0_arr, pidx, *args_tail, *outs)
    return outs


def _compare(outs_a, outs_b, rtol, label):
    names = ["status", "tau", "nevents", "nsuppressed", "x_pre", "x_post",
             "fk_a", "occupations", "consec_max"]
    for name, a, b in zip(names, outs_a, outs_b):
        if a.dtype.kind == "f":
            assert np.allclose(a, b, rtol=rtol, atol=1e-300, equal_nan=True), (
                f"{label}: {name} differs beyond rtol={rtol}"
            )
        else:
            assert np.array_equal(a, b), f"{label}: {name} differs"


# ----------------------------------------------------------------- scenarios
# one of each simulation mode, small enough that the scalar reference is fast

SCENARIOS = {
    "killed-ball": dict(
        model=MODEL2, censor=None, stop=BALL2, x0=np.array([0.2, -0.1]),
        n_paths=48, config=engine.SimConfig(eps_cut=0.02, seed=5),
        targets=[((0.3, 0.0), 0.2)],
    ),
    "censored-horizon": dict(
        model=MODEL2, censor=BALL2, stop=None, x0=np.array([0.0, 0.0]),
        n_paths=48,
        config=engine.SimConfig(eps_cut=0.02, seed=6, horizon=2.0,
                                eta_stop=0.05, dwell_events=40),
        targets=[((0.0, 0.0), 0.5)],
    ),
    "censored-stop-sub": dict(
        model=MODEL2, censor=BALL2, stop=Ball((0.0, 0.0), 0.5),
        x0=np.array([0.1, 0.0]), n_paths=48,
        config=engine.SimConfig(eps_cut=0.02, seed=7),
    ),
    "fk-weighted": dict(
        model=MODEL2, censor=None, stop=BALL2, x0=np.array([0.2, -0.1]),
        n_paths=48, config=engine.SimConfig(eps_cut=0.02, seed=8),
        targets=[((0.3, 0.0), 0.2)], fk_domain=BALL2,
    ),
    "killed-annulus": dict(
        model=MODEL2, censor=None, stop=Annulus((0.0, 0.0), 0.3, 1.0),
        x0=np.array([0.6, 0.0]), n_paths=48,
        config=engine.SimConfig(eps_cut=0.02, seed=9),
    ),
    "censored-interval": dict(
        model=oracles.calibrated_stable_model(1, 0.8), censor=Interval(-1.0, 1.0),
        stop=None, x0=np.array([0.0]), n_paths=48,
        config=engine.SimConfig(eps_cut=0.02, seed=10, horizon=1.0),
    ),
    "killed-box-3d": dict(
        model=oracles.calibrated_stable_model(3, 1.5),
        censor=None, stop=Box((-1.0, -1.0, -1.0), (1.0, 1.0, 1.0)),
        x0=np.array([0.0, 0.0, 0.0]), n_paths=32,
        config=engine.SimConfig(eps_cut=0.05, seed=11),
    ),
    "fixed-time": dict(
        model=MODEL2, censor=BALL2, stop=None, x0=np.array([0.0, 0.0]),
        n_paths=32, config=engine.SimConfig(eps_cut=0.02, seed=12, t_fixed=0.5),
    ),
}

GAUSS_SCENARIOS = {
    "gauss-killed": dict(
        model=MODEL2, censor=None, stop=BALL2, x0=np.array([0.0, 0.0]),
        n_paths=24,
        config=engine.SimConfig(eps_cut=0.05, seed=13, gaussian_mode=True),
        targets=[((0.0, 0.0), 0.4)],
    ),
    "gauss-censored-fk": dict(
        model=MODEL2, censor=BALL2, stop=None, x0=np.array([0.0, 0.0]),
        n_paths=16,
        config=engine.SimConfig(eps_cut=0.05, seed=14, horizon=0.5,
                                gaussian_mode=True),
        fk_domain=BALL2,
    ),
}


@needs_core
def test_philox_core_matches_python():
    from cenlevy import _core

    for seed, pid in [(0, 0), (12345, 7), (2**63 + 11, 2**40 + 3)]:
        got = _core.philox_uniforms(seed, pid, 37)
        sp = ScalarPhilox(seed, pid)
        want = np.array([sp.next_uniform() for _ in range(37)])
        assert np.array_equal(got, want)


@needs_core
@pytest.mark.parametrize("name", list(SCENARIOS))
def test_reference_matches_core(name):
    sc = SCENARIOS[name]
    ref = _run_backend(reference, **sc)
    from cenlevy import _core

    core = _run_backend(_core, **sc)
    _compare(ref, core, 1e-12, name)


@needs_core
@pytest.mark.parametrize("name", list(GAUSS_SCENARIOS))
def test_reference_matches_core_gaussian(name):
    sc = GAUSS_SCENARIOS[name]
    ref = _run_backend(reference, **sc)
    from cenlevy import _core

    core = _run_backend(_core, **sc)
    _compare(ref, core, 1e-12, name)


@pytest.mark.parametrize("name", list(SCENARIOS))
def test_fallback_matches_reference(name):
    # numpy and libm may round differently, so agreement is to ~1e-9, not ulp
    sc = SCENARIOS[name]
    ref = _run_backend(reference, **sc)
    fb = _run_backend(fallback, **sc)
    _compare(ref, fb, 1e-9, name)


def test_fallback_rejects_gaussian():
    with pytest.raises(NotImplementedError):
        _run_backend(fallback, **GAUSS_SCENARIOS["gauss-killed"])


def test_determinism_and_seed_sensitivity():
    cfg = engine.SimConfig(eps_cut=0.02, seed=21)
    a = engine.run_killed(MODEL2, BALL2, np.zeros(2), 64, cfg)
    b = engine.run_killed(MODEL2, BALL2, np.zeros(2), 64, cfg)
    assert np.array_equal(a.tau, b.tau)
    assert np.array_equal(a.x_post, b.x_post)
    c = engine.run_killed(
        MODEL2, BALL2, np.zeros(2), 64, engine.SimConfig(eps_cut=0.02, seed=22)
    )
    assert not np.array_equal(a.tau, c.tau)


def test_path_index_blocks_are_consistent():
    """Splitting a batch by path_index_start reproduces the big batch."""
    cfg_all = engine.SimConfig(eps_cut=0.02, seed=33)
    big = engine.run_killed(MODEL2, BALL2, np.zeros(2), 96, cfg_all)
    lo = engine.run_killed(MODEL2, BALL2, np.zeros(2), 48, cfg_all)
    hi = engine.run_killed(
        MODEL2, BALL2, np.zeros(2), 48,
        engine.SimConfig(eps_cut=0.02, seed=33, path_index_start=48),
    )
    assert np.array_equal(big.tau, np.concatenate([lo.tau, hi.tau]))
    assert np.array_equal(big.x_post, np.vstack([lo.x_post, hi.x_post]))


@needs_core
def test_worker_sharding_is_invisible():
    base = engine.run_killed(
        MODEL2, BALL2, np.zeros(2), 90, engine.SimConfig(eps_cut=0.02, seed=44)
    )
    sharded = engine.run_killed(
        MODEL2, BALL2, np.zeros(2), 90,
        engine.SimConfig(eps_cut=0.02, seed=44, n_workers=4),
    )
    assert np.array_equal(base.tau, sharded.tau)
    assert np.array_equal(base.status, sharded.status)
    assert np.array_equal(base.occupations, sharded.occupations)


def test_backend_env_override():
    code = (
        "import cenlevy; print(cenlevy.backend_info()['backend'])"
    )
    env = dict(os.environ, CENLEVY_FORCE_FALLBACK="1")
    out = subprocess.run(
        [sys.executable, "-c", code], capture_output=True, text=True, env=env
    )
    assert out.stdout.strip() == "fallback"


def test_suppression_couples_to_killing():
    """Same seed and path index: the censored path replays the killed path
    exactly until the killed path's exit jump, which censoring suppresses."""
    model, D = MODEL2, BALL2
    cfg = engine.SimConfig(eps_cut=0.05, seed=55, horizon=math.inf)
    x0_arr, pidx, args_k, _ = engine._build_run(
        model, None, D, np.array([0.3, 0.2]), 1, cfg, None, None
    )
    cfg_c = engine.SimConfig(eps_cut=0.05, seed=55, horizon=1000.0)
    _, _, args_c, _ = engine._build_run(
        model, D, None, np.array([0.3, 0.2]), 1, cfg_c, None, None
    )
    for pid in range(12):
        killed = reference.run_path(
            2, [0.3, 0.2], pid, *args_k, record_events=True
        )
        cens = reference.run_path(
            2, [0.3, 0.2], pid, *args_c, record_events=True
        )
        assert killed["status"] == int(PathStatus.EXIT_JUMP)
        sup = [e for e in cens["events"] if e[1] == "suppressed"]
        assert sup, f"path {pid}: censored run never suppressed"
        t_sup, _, x_sup, y_sup, _ = sup[0]
        assert t_sup == killed["tau"]
        assert np.allclose(x_sup, killed["x_pre"], rtol=0, atol=0)
        assert np.allclose(y_sup, killed["x_post"], rtol=0, atol=0)
        # events before the suppression agree one for one
        pre = [e for e in cens["events"] if e[0] < t_sup]
        assert len(pre) == killed["nevents"] - 1


def test_event_cap_status():
    # horizon only satisfies the time-cap validation; 5 events fire first
    cfg = engine.SimConfig(eps_cut=0.02, seed=66, max_events=5, horizon=1e9)
    res = engine.run_censored(MODEL2, BALL2, np.zeros(2), 16, cfg)
    assert np.all(res.status == int(PathStatus.EVENT_CAP))
    assert np.all(res.nevents == 5)


def test_fixed_time_beats_horizon():
    cfg = engine.SimConfig(eps_cut=0.02, seed=67, t_fixed=0.3, horizon=5.0)
    res = engine.run_censored(MODEL2, BALL2, np.zeros(2), 16, cfg)
    assert np.all(res.status == int(PathStatus.REACHED_T))
    assert np.allclose(res.tau, 0.3)
    cfg2 = engine.SimConfig(eps_cut=0.02, seed=67, horizon=0.3)
    res2 = engine.run_censored(MODEL2, BALL2, np.zeros(2), 16, cfg2)
    assert np.all(res2.status == int(PathStatus.HORIZON))
    # positions at the shared cap agree path for path
    assert np.allclose(res.x_post, res2.x_post, rtol=1e-12)


def test_fk_overflow_status():
    cfg = engine.SimConfig(eps_cut=0.02, seed=68, fk_cap=1e-9)
    res = engine.run_fk(MODEL2, BALL2, np.zeros(2), 8, cfg)
    assert np.all(res.status == int(PathStatus.FK_OVERFLOW))
    assert np.all(res.fk_a > 1e-9)


def test_dwell_time_detector_fires():
    # a huge layer (eta = diam) makes every position "near the boundary", so
    # the continuous dwell clock fires at exactly dwell_time
    cfg = engine.SimConfig(
        eps_cut=0.02, seed=69, horizon=10.0, eta_stop=2.0, dwell_time=0.25
    )
    res = engine.run_censored(MODEL2, BALL2, np.zeros(2), 16, cfg)
    assert np.all(res.status == int(PathStatus.BOUNDARY))
    assert np.allclose(res.tau, 0.25, rtol=1e-12)


def test_dwell_events_detector_fires():
    cfg = engine.SimConfig(
        eps_cut=0.02, seed=70, horizon=math.inf, eta_stop=2.0, dwell_events=7
    )
    res = engine.run_censored(MODEL2, BALL2, np.zeros(2), 16, cfg)
    assert np.all(res.status == int(PathStatus.BOUNDARY))
    assert np.all(res.consec_max == 7)
    assert np.all(res.nsuppressed >= 7)


def test_occupation_of_covering_target_equals_tau():
    """A target ball covering the domain accrues exactly the lifetime."""
    for backend_mod in (reference, fallback):
        outs = _run_backend(
            backend_mod, MODEL2, None, BALL2, np.array([0.1, 0.0]), 32,
            engine.SimConfig(eps_cut=0.02, seed=71),
            targets=[((0.0, 0.0), 50.0)],
        )
        tau, occ = outs[1], outs[7][:, 0]
        assert np.allclose(occ, tau, rtol=1e-12)


def test_engine_validations():
    with pytest.raises(ValueError, match="dimension"):
        engine.run_killed(MODEL2, Interval(-1, 1), np.zeros(2), 4)
    with pytest.raises(ValueError, match="censor or stop"):
        engine.simulate_batch(MODEL2, None, None, np.zeros(2), 4)
    with pytest.raises(ValueError, match="time cap"):
        engine.run_censored(MODEL2, BALL2, np.zeros(2), 4)
    with pytest.raises(ValueError, match="x0"):
        engine.run_killed(MODEL2, BALL2, np.zeros((3, 2)), 4)
    with pytest.raises(ValueError, match="target"):
        engine.run_killed(
            MODEL2, BALL2, np.zeros(2), 4,
            engine.SimConfig(eps_cut=0.05, seed=1), targets=[((0.0, 0.0), -1.0)],
        )


# ----------------------------------------------------------- distributional


def test_event_rate_matches_total_mass():
    cfg = engine.SimConfig(eps_cut=0.01, seed=80)
    res = engine.run_killed(MODEL2, BALL2, np.zeros(2), 4000, cfg)
    lam = res.meta["total_rate"]
    total_events = res.nevents.sum()
    total_time = res.tau.sum()
    # events are Poisson with intensity lam along every path
    rate = total_events / total_time
    sigma = math.sqrt(total_events) / total_time
    assert abs(rate - lam) < 4.0 * sigma


def test_exit_direction_isotropy():
    cfg = engine.SimConfig(eps_cut=0.01, seed=81)
    res = engine.run_killed(MODEL2, BALL2, np.zeros(2), 20000, cfg)
    ang = np.arctan2(res.x_post[:, 1], res.x_post[:, 0])
    counts, _ = np.histogram(ang, bins=8, range=(-math.pi, math.pi))
    expected = len(ang) / 8.0
    chi2 = ((counts - expected) ** 2 / expected).sum()
    assert chi2 < 26.0  # 99.95% quantile of chi2(7)


def test_exit_radius_law_far_from_boundary():
    """Conditioned on landing beyond 1.1, the exit radius follows the exact
    stable law; the truncation bias lives only in the near-boundary layer."""
    alpha = 1.2
    cfg = engine.SimConfig(eps_cut=0.01, seed=82)
    res = engine.run_killed(MODEL2, BALL2, np.zeros(2), 60000, cfg)
    r = np.sort(np.linalg.norm(res.x_post, axis=1))
    far = r[r >= 1.1]
    c0 = oracles.ball_exit_radius_cdf(alpha, 1.1)
    cdf = (oracles.ball_exit_radius_cdf(alpha, far) - c0) / (1.0 - c0)
    m = len(far)
    ks = max(
        np.abs(np.arange(1, m + 1) / m - cdf).max(),
        np.abs(np.arange(m) / m - cdf).max(),
    )
    assert ks < 0.015, f"conditional exit-radius KS {ks:.4f}"


def test_exit_radius_truncation_bias_shrinks():
    """The raw exit-radius law approaches the stable one as eps decreases,
    at roughly the eps^(alpha/2) rate of the overshoot layer."""
    alpha = 1.2

    def raw_ks(eps):
        res = engine.run_killed(
            MODEL2, BALL2, np.zeros(2), 30000,
            engine.SimConfig(eps_cut=eps, seed=83),
        )
        r = np.sort(np.linalg.norm(res.x_post, axis=1))
        cdf = oracles.ball_exit_radius_cdf(alpha, r)
        m = len(r)
        return max(
            np.abs(np.arange(1, m + 1) / m - cdf).max(),
            np.abs(np.arange(m) / m - cdf).max(),
        )

    ks_coarse = raw_ks(0.02)
    ks_fine = raw_ks(0.005)
    assert ks_fine < ks_coarse
    # two eps-halvings: expect about 2^alpha = 2.3x, accept a loose band
    assert 1.3 < ks_coarse / ks_fine < 4.0


def test_mean_exit_time_vs_oracle():
    et = float(oracles.ball_mean_exit_time(2, 1.2, np.zeros(2)))
    et *= oracles.green_time_scale(MODEL2)
    cfg = engine.SimConfig(eps_cut=0.005, seed=84)
    res = engine.run_killed(MODEL2, BALL2, np.zeros(2), 30000, cfg)
    rel = res.tau.mean() / et - 1.0
    # +1% truncation bias at this eps, plus ~0.5% MC noise
    assert abs(rel) < 0.03, f"mean exit time off by {rel * 100:.2f}%"


def test_gaussian_mode_compensates_truncation():
    """The diffusion proxy recovers most of the exit-time bias left by
    coarse truncation."""
    et = float(oracles.ball_mean_exit_time(2, 1.2, np.zeros(2)))
    et *= oracles.green_time_scale(MODEL2)
    rels = {}
    for gauss in (False, True):
        cfg = engine.SimConfig(eps_cut=0.04, seed=85, gaussian_mode=gauss)
        res = engine.run_killed(MODEL2, BALL2, np.zeros(2), 50000, cfg)
        rels[gauss] = res.tau.mean() / et - 1.0
        if gauss:
            assert res.fraction(PathStatus.EXIT_GAUSS) > 0.01
    assert 0.05 < rels[False] < 0.095, f"pure-jump bias {rels[False]:.3f}"
    assert abs(rels[True]) < 0.025, f"compensated bias {rels[True]:.3f}"
    assert rels[True] < rels[False] - 0.03


def test_gaussian_mode_routes_to_reference_without_core(monkeypatch):
    monkeypatch.setattr(engine, "BACKEND", "fallback")
    cfg = engine.SimConfig(eps_cut=0.1, seed=86, gaussian_mode=True)
    res = engine.run_killed(MODEL2, BALL2, np.zeros(2), 4, cfg)
    assert res.meta["backend"] == "reference"


def test_fk_and_suppression_agree_on_occupation():
    """Both constructions of the censored process, stopped on exiting an
    interior ball, give the same expected occupation of a target set.

    The stopped functional keeps both estimators tame: unstopped, the
    suppressed process never dies (its occupation grows with the horizon)
    and the reweighted estimator's variance explodes with the exponent.
    """
    B = Ball((0.0, 0.0), 0.6)
    target = [((0.25, 0.0), 0.2)]
    n_paths = 6000
    cfg = engine.SimConfig(eps_cut=0.02, seed=87)
    inw = engine.run_censored(
        MODEL2, BALL2, np.zeros(2), n_paths, cfg, targets=target, stop=B
    )
    fk = engine.run_fk(
        MODEL2, BALL2, np.zeros(2), n_paths, cfg, targets=target, stop=B
    )
    a, b = inw.occupations[:, 0], fk.occupations[:, 0]
    se = math.hypot(a.std() / math.sqrt(n_paths), b.std() / math.sqrt(n_paths))
    assert abs(a.mean() - b.mean()) < 4.0 * se, (
        f"INW {a.mean():.4f} vs FK {b.mean():.4f} (se {se:.4f})"
    )
    # the exit mass identity: every suppressed path leaves B through the
    # domain, so the reweighted in-domain exit mass must be 1
    w = fk.fk_weights * BALL2.contains_many(fk.x_post)
    se_w = w.std() / math.sqrt(n_paths)
    assert abs(w.mean() - 1.0) < 4.0 * se_w, f"FK exit mass {w.mean():.4f}"
    assert np.all(BALL2.contains_many(inw.x_post))
