"""Vectorized NumPy backend, used when the compiled core is unavailable.

Runs all active paths in lockstep, one event per sweep, compacting the state
arrays as paths terminate.  Each path owns a counter-based RNG stream keyed by
its path index, and uniforms are consumed in the same per-path order as the
scalar backends, so results are deterministic and statistically exchangeable
with the compiled core (bitwise equality is not promised: numpy's log1p/exp
may differ from libm by an ulp).

Pure-jump mode only; Gaussian substeps are left to the compiled core or the
scalar reference.
"""
import numpy as np

from .philox import PhiloxStreams
from .status import PathStatus

TWO_PI = 6.283185307179586


def _inside_vec(kind, pA, pB, s0, s1, X):
    if kind == 0:
        q = ((X - pA) ** 2).sum(axis=1)
        return q < s0 * s0
    if kind == 1:
        return np.all((X > pA) & (X < pB), axis=1)
    if kind == 2:
        q = ((X - pA) ** 2).sum(axis=1)
        return (s0 * s0 < q) & (q < s1 * s1)
    if kind == 3:
        qa = ((X - pA) ** 2).sum(axis=1)
        qb = ((X - pB) ** 2).sum(axis=1)
        return (qa < s0 * s0) & (qb < s1 * s1)
    raise ValueError(f"unknown shape kind {kind}")


def _bdist_vec(kind, pA, pB, s0, s1, X):
    if kind == 0:
        return s0 - np.sqrt(((X - pA) ** 2).sum(axis=1))
    if kind == 1:
        return np.minimum((X - pA).min(axis=1), (pB - X).min(axis=1))
    if kind == 2:
        r = np.sqrt(((X - pA) ** 2).sum(axis=1))
        return np.minimum(r - s0, s1 - r)
    if kind == 3:
        da = s0 - np.sqrt(((X - pA) ** 2).sum(axis=1))
        db = s1 - np.sqrt(((X - pB) ** 2).sum(axis=1))
        return np.minimum(da, db)
    raise ValueError(f"unknown shape kind {kind}")


def _sample_radius(log_r, log_v, u):
    logv = np.log1p(-u)
    idx = np.searchsorted(-log_v, -logv, side="right") - 1
    idx = np.clip(idx, 0, len(log_v) - 2)
    lv0 = log_v[idx]
    lv1 = log_v[idx + 1]
    t = np.clip((logv - lv0) / (lv1 - lv0), 0.0, 1.0)
    return np.exp(log_r[idx] + t * (log_r[idx + 1] - log_r[idx]))


def _draw_directions(streams, n, npaths):
    if n == 1:
        u = streams.next()
        return np.where(u < 0.5, -1.0, 1.0)[:, None]
    if n == 2:
        th = TWO_PI * streams.next()
        return np.stack([np.cos(th), np.sin(th)], axis=1)
    npairs = (n + 1) // 2
    cols = []
    for _ in range(npairs):
        u1 = streams.next()
        u2 = streams.next()
        rad = np.sqrt(-2.0 * np.log1p(-u1))
        a = TWO_PI * u2
        cols.append(rad * np.cos(a))
        cols.append(rad * np.sin(a))
    z = np.stack(cols[:n], axis=1)
    norm = np.sqrt((z**2).sum(axis=1))
    bad = norm <= 0.0
    if bad.any():
        z[bad] = 0.0
        z[bad, 0] = 1.0
        norm[bad] = 1.0
    return z / norm[:, None]


def run_batch(
    x0,
    path_indices,
    seed,
    lam,
    log_r,
    log_v,
    censor_kind,
    cen_pA,
    cen_pB,
    cen_s0,
    cen_s1,
    stop_kind,
    stp_pA,
    stp_pB,
    stp_s0,
    stp_s1,
    horizon,
    t_fixed,
    max_events,
    eta,
    dwell_time,
    dwell_events,
    fk_on,
    kap_s,
    kap_logk,
    kap_center,
    fk_cap,
    targets,
    sigma,
    dt_sub,
    status,
    tau,
    nevents,
    nsuppressed,
    x_pre,
    x_post,
    fk_a,
    occupations,
    consec_max,
) -> None:
    """Same calling convention as the compiled core's run_batch."""
    if sigma > 0.0:
        raise NotImplementedError("gaussian mode is not vectorized")
    npaths, n = x0.shape
    mtar = 0 if targets is None else targets.shape[0]
    layer_on = censor_kind != -1 and eta > 0.0
    tcap = min(horizon, t_fixed)
    cap_code = int(PathStatus.REACHED_T if t_fixed <= horizon else PathStatus.HORIZON)

    x = np.array(x0, dtype=float)
    t = np.zeros(npaths)
    fk = np.zeros(npaths)
    nev = np.zeros(npaths, dtype=np.int64)
    nsp = np.zeros(npaths, dtype=np.int64)
    consec = np.zeros(npaths, dtype=np.int64)
    cmax = np.zeros(npaths, dtype=np.int64)
    ltime = np.zeros(npaths)
    slot = np.arange(npaths)
    if layer_on:
        cur_d = _bdist_vec(censor_kind, cen_pA, cen_pB, cen_s0, cen_s1, x)
    else:
        cur_d = np.full(npaths, np.inf)
    streams = PhiloxStreams(seed, np.asarray(path_indices, dtype=np.uint64))

    def finish(mask, code, tau_vals, xpre_rows, xpost_rows):
        idx = slot[mask]
        status[idx] = code
        tau[idx] = tau_vals if np.isscalar(tau_vals) else tau_vals[mask]
        nevents[idx] = nev[mask]
        nsuppressed[idx] = nsp[mask]
        x_pre[idx] = xpre_rows[mask]
        x_post[idx] = xpost_rows[mask]
        fk_a[idx] = fk[mask]
        consec_max[idx] = cmax[mask]

    def compact(keep):
        nonlocal x, t, fk, nev, nsp, consec, cmax, ltime, slot, cur_d
        x = x[keep]
        t = t[keep]
        fk = fk[keep]
        nev = nev[keep]
        nsp = nsp[keep]
        consec = consec[keep]
        cmax = cmax[keep]
        ltime = ltime[keep]
        slot = slot[keep]
        cur_d = cur_d[keep]
        streams.compact(keep)

    while len(slot) > 0:
        u = streams.next()
        dt = -np.log1p(-u) / lam
        capped = t + dt >= tcap
        h = np.where(capped, tcap - t, dt)

        # interval accrual at the pre-jump position, matching the scalar order:
        # occupation, then layer time (dwell fire), then the FK exponent.
        if mtar > 0:
            w = np.exp(fk) if fk_on else np.ones(len(slot))
            for k in range(mtar):
                d2 = ((x - targets[k, :n]) ** 2).sum(axis=1)
                inside = d2 < targets[k, n] * targets[k, n]
                if inside.any():
                    # slot rows are unique, plain fancy += is safe
                    occupations[slot[inside], k] += h[inside] * w[inside]

        fired = np.zeros(len(slot), dtype=bool)
        if layer_on and np.isfinite(dwell_time):
            in_layer = cur_d < eta
            ltime = np.where(in_layer, ltime + h, ltime)
            fired = in_layer & (ltime >= dwell_time)
            if fired.any():
                tau_f = t + h - (ltime - dwell_time)
                finish(fired, int(PathStatus.BOUNDARY), tau_f, x, x)

        over = np.zeros(len(slot), dtype=bool)
        if fk_on:
            s = np.sqrt(((x - kap_center) ** 2).sum(axis=1))
            kap = np.exp(np.interp(s, kap_s, kap_logk))
            alive = ~fired
            fk = np.where(alive, fk + kap * h, fk)
            over = alive & (fk > fk_cap)
            if over.any():
                finish(over, int(PathStatus.FK_OVERFLOW), t + h, x, x)

        hit_cap = capped & ~fired & ~over
        if hit_cap.any():
            finish(hit_cap, cap_code, tcap, x, x)
        keep = ~(fired | over | capped)
        if not keep.all():
            compact(keep)
            if len(slot) == 0:
                break
            dt = dt[keep]
        t = t + dt  # capped rows are gone; survivors advance by their full dt

        u = streams.next()
        r = _sample_radius(log_r, log_v, u)
        dirs = _draw_directions(streams, n, len(slot))
        y = x + r[:, None] * dirs
        nev = nev + 1

        if censor_kind != -1:
            supp = ~_inside_vec(censor_kind, cen_pA, cen_pB, cen_s0, cen_s1, y)
        else:
            supp = np.zeros(len(slot), dtype=bool)
        if stop_kind != -1:
            exited = ~supp & ~_inside_vec(stop_kind, stp_pA, stp_pB, stp_s0, stp_s1, y)
        else:
            exited = np.zeros(len(slot), dtype=bool)

        nsp = nsp + supp
        evt_fire = np.zeros(len(slot), dtype=bool)
        if layer_on:
            bump = supp & (cur_d < eta)
            consec = np.where(bump, consec + 1, consec)
            cmax = np.maximum(cmax, consec)
            if dwell_events > 0:
                evt_fire = bump & (consec >= dwell_events)
                if evt_fire.any():
                    finish(evt_fire, int(PathStatus.BOUNDARY), t, x, x)
        if exited.any():
            finish(exited, int(PathStatus.EXIT_JUMP), t, x, y)

        moved = ~supp & ~exited
        x = np.where(moved[:, None], y, x)
        if layer_on:
            cur_d = np.where(
                moved,
                _bdist_vec(censor_kind, cen_pA, cen_pB, cen_s0, cen_s1, x),
                cur_d,
            )
            deep = moved & (cur_d >= eta)
            consec = np.where(deep, 0, consec)
            ltime = np.where(deep, 0.0, ltime)

        capped_ev = ~exited & ~evt_fire & (nev >= max_events)
        if capped_ev.any():
            finish(capped_ev, int(PathStatus.EVENT_CAP), t, x, x)
        keep = ~(exited | evt_fire | capped_ev)
        if not keep.all():
            compact(keep)
