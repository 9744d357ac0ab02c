"""Scalar reference backend.

Pure-Python twin of the compiled event loop.  Slow, but explicit: every draw,
accrual and branch is spelled out in the order all backends must follow, and
paths can log their events for inspection.  Positions, times and weights agree
with the compiled core to floating-point reproduction (both call libm in the
same order); tests pin that correspondence.

Draw order per event: one uniform for the waiting time, one for the jump
radius, then the direction block (one word for n = 1 or 2, ceil(n/2)
Box-Muller pairs for n >= 3).  Gaussian substeps each consume ceil(n/2)
Box-Muller pairs, plus repeats when a censored substep resamples.
"""
import math

from .philox import ScalarPhilox
from .status import PathStatus
from .tables import invert_survival_scalar, kappa_radial_scalar

TWO_PI = 6.283185307179586

# shape kinds shared with the compiled core
SHAPE_NONE = -1
SHAPE_BALL = 0  # pA = center, s0 = radius
SHAPE_BOX = 1  # pA = lower corner, pB = upper corner
SHAPE_ANNULUS = 2  # pA = center, s0 = r_in, s1 = r_out
SHAPE_LENS = 3  # pA, s0 and pB, s1 = two balls, intersected


def shape_inside(kind, pA, pB, s0, s1, x, n) -> bool:
    """Strict membership.  Squared-norm comparisons, no sqrt: the compiled
    core decides acceptance with this exact arithmetic."""
    if kind == SHAPE_BALL:
        q = 0.0
        for i in range(n):
            d = x[i] - pA[i]
            q += d * d
        return q < s0 * s0
    if kind == SHAPE_BOX:
        for i in range(n):
            if not (pA[i] < x[i] < pB[i]):
                return False
        return True
    if kind == SHAPE_ANNULUS:
        q = 0.0
        for i in range(n):
            d = x[i] - pA[i]
            q += d * d
        return s0 * s0 < q < s1 * s1
    if kind == SHAPE_LENS:
        q = 0.0
        for i in range(n):
            d = x[i] - pA[i]
            q += d * d
        if q >= s0 * s0:
            return False
        q = 0.0
        for i in range(n):
            d = x[i] - pB[i]
            q += d * d
        return q < s1 * s1
    raise ValueError(f"unknown shape kind {kind}")


def shape_bdist(kind, pA, pB, s0, s1, x, n) -> float:
    """Signed distance to the boundary, positive inside."""
    if kind == SHAPE_BALL:
        q = 0.0
        for i in range(n):
            d = x[i] - pA[i]
            q += d * d
        return s0 - math.sqrt(q)
    if kind == SHAPE_BOX:
        m = math.inf
        for i in range(n):
            lo = x[i] - pA[i]
            hi = pB[i] - x[i]
            m = min(m, lo, hi)
        return m
    if kind == SHAPE_ANNULUS:
        q = 0.0
        for i in range(n):
            d = x[i] - pA[i]
            q += d * d
        r = math.sqrt(q)
        return min(r - s0, s1 - r)
    if kind == SHAPE_LENS:
        q = 0.0
        for i in range(n):
            d = x[i] - pA[i]
            q += d * d
        m = s0 - math.sqrt(q)
        q = 0.0
        for i in range(n):
            d = x[i] - pB[i]
            q += d * d
        return min(m, s1 - math.sqrt(q))
    raise ValueError(f"unknown shape kind {kind}")


def _draw_direction(rng: ScalarPhilox, n: int, out: list) -> None:
    if n == 1:
        u = rng.next_uniform()
        out[0] = -1.0 if u < 0.5 else 1.0
        return
    if n == 2:
        u = rng.next_uniform()
        th = TWO_PI * u
        out[0] = math.cos(th)
        out[1] = math.sin(th)
        return
    npairs = (n + 1) // 2
    idx = 0
    for _ in range(npairs):
        u1 = rng.next_uniform()
        u2 = rng.next_uniform()
        rad = math.sqrt(-2.0 * math.log1p(-u1))
        a = TWO_PI * u2
        z1 = rad * math.cos(a)
        z2 = rad * math.sin(a)
        if idx < n:
            out[idx] = z1
            idx += 1
        if idx < n:
            out[idx] = z2
            idx += 1
    q = 0.0
    for i in range(n):
        q += out[i] * out[i]
    if q <= 0.0:
        out[0] = 1.0
        for i in range(1, n):
            out[i] = 0.0
        return
    norm = math.sqrt(q)
    for i in range(n):
        out[i] /= norm


def _draw_normals(rng: ScalarPhilox, n: int, out: list) -> None:
    npairs = (n + 1) // 2
    idx = 0
    for _ in range(npairs):
        u1 = rng.next_uniform()
        u2 = rng.next_uniform()
        rad = math.sqrt(-2.0 * math.log1p(-u1))
        a = TWO_PI * u2
        z1 = rad * math.cos(a)
        z2 = rad * math.sin(a)
        if idx < n:
            out[idx] = z1
            idx += 1
        if idx < n:
            out[idx] = z2
            idx += 1


def run_path(
    n,
    x0,
    path_index,
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
    record_events=False,
):
    """Simulate one path; returns a dict of terminal state.

    Event loop: draw the waiting time; if it crosses min(horizon, t_fixed),
    accrue the partial interval and stop.  Otherwise accrue the full interval
    (occupation at the pre-jump position, Feynman-Kac exponent, boundary-layer
    dwell), then draw the jump.  A jump out of the censor shape is suppressed
    (position unchanged); otherwise a jump out of the stop shape terminates
    the path; otherwise the path moves.  The layer detector counts suppressed
    events while within eta of the censor boundary and resets when an accepted
    move lands deeper than eta.
    """
    rng = ScalarPhilox(seed, path_index)
    x = [float(v) for v in x0]
    y = [0.0] * n
    dirv = [0.0] * n
    t = 0.0
    fk_a = 0.0
    nevents = 0
    nsupp = 0
    consec = 0
    consec_max = 0
    ltime = 0.0
    m_targets = 0 if targets is None else len(targets)
    occ = [0.0] * m_targets
    events = [] if record_events else None

    layer_on = censor_kind != SHAPE_NONE and eta > 0.0
    cur_d = (
        shape_bdist(censor_kind, cen_pA, cen_pB, cen_s0, cen_s1, x, n)
        if layer_on
        else math.inf
    )
    tcap = min(horizon, t_fixed)
    cap_status = PathStatus.REACHED_T if t_fixed <= horizon else PathStatus.HORIZON

    status = PathStatus.RUNNING
    tau = math.nan
    x_pre = list(x)
    x_post = list(x)

    def _occupy(h: float) -> None:
        if m_targets == 0:
            return
        w = math.exp(fk_a) if fk_on else 1.0
        for k in range(m_targets):
            q = 0.0
            for i in range(n):
                d = x[i] - targets[k][i]
                q += d * d
            rad = targets[k][n]
            if q < rad * rad:
                occ[k] += h * w

    def _kap_at(px, py) -> float:
        """kappa at the midpoint of px and py (px == py for a standstill)."""
        q = 0.0
        for i in range(n):
            d = 0.5 * (px[i] + py[i]) - kap_center[i]
            q += d * d
        return kappa_radial_scalar(kap_s, kap_logk, math.sqrt(q))

    def _accrue(h, t_base):
        """Occupation, layer time and FK exponent over an interval of length h
        starting at time t_base, with Gaussian substeps when sigma > 0.
        Returns (status, tau[, x_pre, x_post]) if the interval killed the path."""
        nonlocal fk_a, ltime, cur_d, consec
        nsub = 1 if sigma <= 0.0 else max(1, int(math.ceil(h / dt_sub)))
        hsub = h / nsub
        step = sigma * math.sqrt(hsub)
        for j in range(nsub):
            _occupy(hsub)
            if layer_on and cur_d < eta:
                ltime += hsub
                if ltime >= dwell_time:
                    tau_fire = t_base + j * hsub + (dwell_time - (ltime - hsub))
                    return (PathStatus.BOUNDARY, tau_fire)
            if sigma <= 0.0:
                if fk_on:
                    fk_a += _kap_at(x, x) * hsub
                    if fk_a > fk_cap:
                        return (PathStatus.FK_OVERFLOW, t_base + h)
                return None
            # diffuse one substep
            _draw_normals(rng, n, dirv)
            for i in range(n):
                y[i] = x[i] + step * dirv[i]
            if censor_kind != SHAPE_NONE:
                tries = 0
                while not shape_inside(censor_kind, cen_pA, cen_pB, cen_s0, cen_s1, y, n):
                    tries += 1
                    if tries >= 64:
                        for i in range(n):
                            y[i] = x[i]
                        break
                    _draw_normals(rng, n, dirv)
                    for i in range(n):
                        y[i] = x[i] + step * dirv[i]
            elif stop_kind != SHAPE_NONE:
                if not shape_inside(stop_kind, stp_pA, stp_pB, stp_s0, stp_s1, y, n):
                    return (PathStatus.EXIT_GAUSS, t_base + (j + 1) * hsub, list(x), list(y))
            if fk_on:
                fk_a += _kap_at(x, y) * hsub
                if fk_a > fk_cap:
                    return (PathStatus.FK_OVERFLOW, t_base + (j + 1) * hsub)
            for i in range(n):
                x[i] = y[i]
            if layer_on:
                cur_d = shape_bdist(censor_kind, cen_pA, cen_pB, cen_s0, cen_s1, x, n)
                if cur_d >= eta:
                    consec = 0
                    ltime = 0.0
        return None

    while True:
        u = rng.next_uniform()
        dt = -math.log1p(-u) / lam
        if t + dt >= tcap:
            res = _accrue(tcap - t, t)
            if res is not None:
                status = res[0]
                tau = res[1]
                if len(res) > 2:
                    x_pre, x_post = res[2], res[3]
                else:
                    x_pre = list(x)
                    x_post = list(x)
                break
            t = tcap
            status = cap_status
            tau = tcap
            x_pre = list(x)
            x_post = list(x)
            if record_events:
                events.append((t, "cap", tuple(x), tuple(x), 0.0))
            break
        res = _accrue(dt, t)
        if res is not None:
            status = res[0]
            tau = res[1]
            if len(res) > 2:
                x_pre, x_post = res[2], res[3]
            else:
                x_pre = list(x)
                x_post = list(x)
            break
        t += dt
        u = rng.next_uniform()
        r = invert_survival_scalar(log_r, log_v, u)
        _draw_direction(rng, n, dirv)
        for i in range(n):
            y[i] = x[i] + r * dirv[i]
        nevents += 1
        if censor_kind != SHAPE_NONE and not shape_inside(
            censor_kind, cen_pA, cen_pB, cen_s0, cen_s1, y, n
        ):
            nsupp += 1
            if record_events:
                events.append((t, "suppressed", tuple(x), tuple(y), r))
            if layer_on and cur_d < eta:
                consec += 1
                if consec > consec_max:
                    consec_max = consec
                if dwell_events > 0 and consec >= dwell_events:
                    status = PathStatus.BOUNDARY
                    tau = t
                    x_pre = list(x)
                    x_post = list(x)
                    break
        elif stop_kind != SHAPE_NONE and not shape_inside(
            stop_kind, stp_pA, stp_pB, stp_s0, stp_s1, y, n
        ):
            status = PathStatus.EXIT_JUMP
            tau = t
            x_pre = list(x)
            x_post = list(y)
            if record_events:
                events.append((t, "exit", tuple(x), tuple(y), r))
            break
        else:
            if record_events:
                events.append((t, "jump", tuple(x), tuple(y), r))
            for i in range(n):
                x[i] = y[i]
            if layer_on:
                cur_d = shape_bdist(censor_kind, cen_pA, cen_pB, cen_s0, cen_s1, x, n)
                if cur_d >= eta:
                    consec = 0
                    ltime = 0.0
        if nevents >= max_events:
            status = PathStatus.EVENT_CAP
            tau = t
            x_pre = list(x)
            x_post = list(x)
            break

    return {
        "status": int(status),
        "tau": tau,
        "nevents": nevents,
        "nsuppressed": nsupp,
        "x_pre": x_pre,
        "x_post": x_post,
        "fk_a": fk_a,
        "occupations": occ,
        "consec_max": consec_max,
        "events": events,
    }


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
    """Loop run_path over a batch, filling the preallocated output arrays.

    Same calling convention as the compiled core so the engine can swap them.
    """
    npaths, n = x0.shape
    for p in range(npaths):
        out = run_path(
            n,
            x0[p],
            int(path_indices[p]),
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
        )
        status[p] = out["status"]
        tau[p] = out["tau"]
        nevents[p] = out["nevents"]
        nsuppressed[p] = out["nsuppressed"]
        x_pre[p] = out["x_pre"]
        x_post[p] = out["x_post"]
        fk_a[p] = out["fk_a"]
        if occupations is not None and occupations.shape[1] > 0:
            occupations[p] = out["occupations"]
        consec_max[p] = out["consec_max"]
