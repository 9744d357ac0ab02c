# cython: language_level=3
"""Compiled event-loop core.

Mirrors reference.py step for step: same counter-based RNG, same draw order,
same branch structure, same libm calls in the same arithmetic order, so a
path simulated here reproduces the scalar reference to the last few ulp.
The batch loop runs without the GIL; the engine shards batches across
threads for parallelism.
"""
from libc.math cimport ceil, cos, exp, fmin, log1p, sin, sqrt, INFINITY
from libc.stdint cimport int32_t, int64_t, uint32_t, uint64_t

import numpy as np

# terminal statuses, numerically equal to status.PathStatus
cdef enum:
    ST_EXIT_JUMP = 1
    ST_HORIZON = 2
    ST_BOUNDARY = 3
    ST_EVENT_CAP = 4
    ST_REACHED_T = 5
    ST_FK_OVERFLOW = 6
    ST_EXIT_GAUSS = 7
    MAXDIM = 16

cdef double TWO_PI = 6.283185307179586
cdef double U32_SCALE = 2.3283064365386963e-10  # 2 ** -32

MAX_DIM = MAXDIM  # python-visible


# ---------------------------------------------------------------- RNG

cdef inline uint64_t _splitmix64(uint64_t x) nogil:
    cdef uint64_t z = x + <uint64_t>0x9E3779B97F4A7C15
    z = (z ^ (z >> 30)) * <uint64_t>0xBF58476D1CE4E5B9
    z = (z ^ (z >> 27)) * <uint64_t>0x94D049BB133111EB
    return z ^ (z >> 31)


cdef struct Rng:
    uint32_t k0
    uint32_t k1
    uint64_t block
    uint32_t buf[4]
    int pos


cdef inline void rng_init(Rng* r, uint64_t seed, uint64_t path_index) nogil:
    cdef uint64_t key = _splitmix64(_splitmix64(seed) + path_index)
    r.k0 = <uint32_t>(key & <uint64_t>0xFFFFFFFF)
    r.k1 = <uint32_t>(key >> 32)
    r.block = 0
    r.pos = 4


cdef inline void rng_fill(Rng* r) nogil:
    cdef uint32_t c0 = <uint32_t>(r.block & <uint64_t>0xFFFFFFFF)
    cdef uint32_t c1 = <uint32_t>(r.block >> 32)
    cdef uint32_t c2 = 0
    cdef uint32_t c3 = 0
    cdef uint32_t k0 = r.k0
    cdef uint32_t k1 = r.k1
    cdef uint64_t p0, p1
    cdef uint32_t n0, n1, n2, n3
    cdef int i
    for i in range(10):
        p0 = <uint64_t>c0 * <uint64_t>0xD2511F53
        p1 = <uint64_t>c2 * <uint64_t>0xCD9E8D57
        n0 = (<uint32_t>(p1 >> 32)) ^ c1 ^ k0
        n1 = <uint32_t>(p1 & <uint64_t>0xFFFFFFFF)
        n2 = (<uint32_t>(p0 >> 32)) ^ c3 ^ k1
        n3 = <uint32_t>(p0 & <uint64_t>0xFFFFFFFF)
        c0 = n0
        c1 = n1
        c2 = n2
        c3 = n3
        k0 = k0 + <uint32_t>0x9E3779B9
        k1 = k1 + <uint32_t>0xBB67AE85
    r.buf[0] = c0
    r.buf[1] = c1
    r.buf[2] = c2
    r.buf[3] = c3
    r.block += 1
    r.pos = 0


cdef inline double rng_u(Rng* r) nogil:
    if r.pos >= 4:
        rng_fill(r)
    cdef double v = r.buf[r.pos] * U32_SCALE
    r.pos += 1
    return v


# ---------------------------------------------------------------- shapes

cdef struct Shape:
    int kind  # -1 none, 0 ball, 1 box, 2 annulus, 3 lens
    const double* pA
    const double* pB
    double s0
    double s1


cdef inline bint sh_inside(const Shape* s, const double* x, int n) nogil:
    cdef double q = 0.0
    cdef double d
    cdef int i
    if s.kind == 0:
        for i in range(n):
            d = x[i] - s.pA[i]
            q += d * d
        return q < s.s0 * s.s0
    if s.kind == 1:
        for i in range(n):
            if not (s.pA[i] < x[i] < s.pB[i]):
                return False
        return True
    if s.kind == 2:
        for i in range(n):
            d = x[i] - s.pA[i]
            q += d * d
        return s.s0 * s.s0 < q and q < s.s1 * s.s1
    # lens
    for i in range(n):
        d = x[i] - s.pA[i]
        q += d * d
    if q >= s.s0 * s.s0:
        return False
    q = 0.0
    for i in range(n):
        d = x[i] - s.pB[i]
        q += d * d
    return q < s.s1 * s.s1


cdef inline double sh_bdist(const Shape* s, const double* x, int n) nogil:
    cdef double q = 0.0
    cdef double d, m, r
    cdef int i
    if s.kind == 0:
        for i in range(n):
            d = x[i] - s.pA[i]
            q += d * d
        return s.s0 - sqrt(q)
    if s.kind == 1:
        m = INFINITY
        for i in range(n):
            d = x[i] - s.pA[i]
            if d < m:
                m = d
            d = s.pB[i] - x[i]
            if d < m:
                m = d
        return m
    if s.kind == 2:
        for i in range(n):
            d = x[i] - s.pA[i]
            q += d * d
        r = sqrt(q)
        d = r - s.s0
        m = s.s1 - r
        return d if d < m else m
    # lens
    for i in range(n):
        d = x[i] - s.pA[i]
        q += d * d
    m = s.s0 - sqrt(q)
    q = 0.0
    for i in range(n):
        d = x[i] - s.pB[i]
        q += d * d
    d = s.s1 - sqrt(q)
    return m if m < d else d


# ---------------------------------------------------------------- tables

cdef inline double radius_lookup(const double* log_r, const double* log_v,
                                 int m, double u) nogil:
    cdef double logv = log1p(-u)
    cdef int lo = 0
    cdef int hi = m - 1
    cdef int mid
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if log_v[mid] >= logv:
            lo = mid
        else:
            hi = mid
    cdef double lv0 = log_v[lo]
    cdef double lv1 = log_v[lo + 1]
    cdef double t = (logv - lv0) / (lv1 - lv0)
    if t < 0.0:
        t = 0.0
    if t > 1.0:
        t = 1.0
    return exp(log_r[lo] + t * (log_r[lo + 1] - log_r[lo]))


cdef inline double kappa_radial(const double* s_arr, const double* logk,
                                int m, double s) nogil:
    if s <= s_arr[0]:
        return exp(logk[0])
    if s >= s_arr[m - 1]:
        return exp(logk[m - 1])
    cdef int lo = 0
    cdef int hi = m - 1
    cdef int mid
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if s_arr[mid] <= s:
            lo = mid
        else:
            hi = mid
    cdef double t = (s - s_arr[lo]) / (s_arr[lo + 1] - s_arr[lo])
    return exp(logk[lo] + t * (logk[lo + 1] - logk[lo]))


# ---------------------------------------------------------------- draws

cdef inline void draw_direction(Rng* rng, int n, double* out) nogil:
    cdef double u, u2, th, rad, a, z1, z2, q, norm
    cdef int i, idx, npairs
    if n == 1:
        u = rng_u(rng)
        out[0] = -1.0 if u < 0.5 else 1.0
        return
    if n == 2:
        u = rng_u(rng)
        th = TWO_PI * u
        out[0] = cos(th)
        out[1] = sin(th)
        return
    npairs = (n + 1) // 2
    idx = 0
    for i in range(npairs):
        u = rng_u(rng)
        u2 = rng_u(rng)
        rad = sqrt(-2.0 * log1p(-u))
        a = TWO_PI * u2
        z1 = rad * cos(a)
        z2 = rad * sin(a)
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
    norm = sqrt(q)
    for i in range(n):
        out[i] /= norm


cdef inline void draw_normals(Rng* rng, int n, double* out) nogil:
    cdef double u, u2, rad, a, z1, z2
    cdef int i, idx, npairs
    npairs = (n + 1) // 2
    idx = 0
    for i in range(npairs):
        u = rng_u(rng)
        u2 = rng_u(rng)
        rad = sqrt(-2.0 * log1p(-u))
        a = TWO_PI * u2
        z1 = rad * cos(a)
        z2 = rad * sin(a)
        if idx < n:
            out[idx] = z1
            idx += 1
        if idx < n:
            out[idx] = z2
            idx += 1


# ---------------------------------------------------------------- path loop

cdef struct Ctx:
    int n
    double lam
    const double* log_r
    const double* log_v
    int mtab
    Shape cen
    Shape stp
    double horizon
    double t_fixed
    int64_t max_events
    double eta
    double dwell_time
    int64_t dwell_events
    int fk_on
    const double* kap_s
    const double* kap_logk
    int mkap
    const double* kap_center
    double fk_cap
    const double* targets  # rows of [center..., radius], stride n + 1
    int mtar
    double sigma
    double dt_sub
    int layer_on


cdef struct St:
    Rng rng
    double x[MAXDIM]
    double y[MAXDIM]
    double dirv[MAXDIM]
    double fk_a
    double ltime
    double cur_d
    int64_t consec
    int64_t consec_max
    double tau_fire
    int gauss_exit


cdef int accrue(const Ctx* c, St* s, double* occ, double h, double t_base) nogil:
    """Occupation, layer time and FK exponent over an interval of length h,
    with Gaussian substeps when sigma > 0.  Returns 0, or a terminal status
    with s.tau_fire set (and s.gauss_exit when the exit point is in s.y)."""
    cdef int nsub = 1
    cdef int n = c.n
    cdef double hsub, step, w, q, d, rad, kap
    cdef int i, j, k, tries
    if c.sigma > 0.0:
        nsub = <int>ceil(h / c.dt_sub)
        if nsub < 1:
            nsub = 1
    hsub = h / nsub
    step = c.sigma * sqrt(hsub)
    for j in range(nsub):
        if c.mtar > 0:
            w = exp(s.fk_a) if c.fk_on else 1.0
            for k in range(c.mtar):
                q = 0.0
                for i in range(n):
                    d = s.x[i] - c.targets[k * (n + 1) + i]
                    q += d * d
                rad = c.targets[k * (n + 1) + n]
                if q < rad * rad:
                    occ[k] += hsub * w
        if c.layer_on and s.cur_d < c.eta:
            s.ltime += hsub
            if s.ltime >= c.dwell_time:
                s.tau_fire = t_base + j * hsub + (c.dwell_time - (s.ltime - hsub))
                return ST_BOUNDARY
        if c.sigma <= 0.0:
            if c.fk_on:
                q = 0.0
                for i in range(n):
                    d = 0.5 * (s.x[i] + s.x[i]) - c.kap_center[i]
                    q += d * d
                kap = kappa_radial(c.kap_s, c.kap_logk, c.mkap, sqrt(q))
                s.fk_a += kap * hsub
                if s.fk_a > c.fk_cap:
                    s.tau_fire = t_base + h
                    return ST_FK_OVERFLOW
            return 0
        # diffuse one substep
        draw_normals(&s.rng, n, s.dirv)
        for i in range(n):
            s.y[i] = s.x[i] + step * s.dirv[i]
        if c.cen.kind != -1:
            tries = 0
            while not sh_inside(&c.cen, s.y, n):
                tries += 1
                if tries >= 64:
                    for i in range(n):
                        s.y[i] = s.x[i]
                    break
                draw_normals(&s.rng, n, s.dirv)
                for i in range(n):
                    s.y[i] = s.x[i] + step * s.dirv[i]
        elif c.stp.kind != -1:
            if not sh_inside(&c.stp, s.y, n):
                s.tau_fire = t_base + (j + 1) * hsub
                s.gauss_exit = 1
                return ST_EXIT_GAUSS
        if c.fk_on:
            q = 0.0
            for i in range(n):
                d = 0.5 * (s.x[i] + s.y[i]) - c.kap_center[i]
                q += d * d
            kap = kappa_radial(c.kap_s, c.kap_logk, c.mkap, sqrt(q))
            s.fk_a += kap * hsub
            if s.fk_a > c.fk_cap:
                s.tau_fire = t_base + (j + 1) * hsub
                return ST_FK_OVERFLOW
        for i in range(n):
            s.x[i] = s.y[i]
        if c.layer_on:
            s.cur_d = sh_bdist(&c.cen, s.x, n)
            if s.cur_d >= c.eta:
                s.consec = 0
                s.ltime = 0.0
    return 0


cdef void run_one(const Ctx* c, uint64_t seed, uint64_t pidx, const double* x0,
                  int32_t* status, double* tau, int64_t* nevents,
                  int64_t* nsupp, double* x_pre, double* x_post,
                  double* fk_a_out, double* occ, int64_t* consec_max) nogil:
    cdef St s
    cdef int n = c.n
    cdef int i, code
    cdef double t = 0.0
    cdef double u, dt, r
    cdef int64_t nev = 0
    cdef int64_t nsp = 0
    cdef double tcap = fmin(c.horizon, c.t_fixed)
    cdef int cap_status = ST_REACHED_T if c.t_fixed <= c.horizon else ST_HORIZON

    rng_init(&s.rng, seed, pidx)
    for i in range(n):
        s.x[i] = x0[i]
    s.fk_a = 0.0
    s.ltime = 0.0
    s.consec = 0
    s.consec_max = 0
    s.tau_fire = 0.0
    s.gauss_exit = 0
    s.cur_d = sh_bdist(&c.cen, s.x, n) if c.layer_on else INFINITY

    while True:
        u = rng_u(&s.rng)
        dt = -log1p(-u) / c.lam
        if t + dt >= tcap:
            code = accrue(c, &s, occ, tcap - t, t)
            if code != 0:
                status[0] = code
                tau[0] = s.tau_fire
            else:
                status[0] = cap_status
                tau[0] = tcap
            if s.gauss_exit:
                for i in range(n):
                    x_pre[i] = s.x[i]
                    x_post[i] = s.y[i]
            else:
                for i in range(n):
                    x_pre[i] = s.x[i]
                    x_post[i] = s.x[i]
            break
        code = accrue(c, &s, occ, dt, t)
        if code != 0:
            status[0] = code
            tau[0] = s.tau_fire
            if s.gauss_exit:
                for i in range(n):
                    x_pre[i] = s.x[i]
                    x_post[i] = s.y[i]
            else:
                for i in range(n):
                    x_pre[i] = s.x[i]
                    x_post[i] = s.x[i]
            break
        t += dt
        u = rng_u(&s.rng)
        r = radius_lookup(c.log_r, c.log_v, c.mtab, u)
        draw_direction(&s.rng, n, s.dirv)
        for i in range(n):
            s.y[i] = s.x[i] + r * s.dirv[i]
        nev += 1
        if c.cen.kind != -1 and not sh_inside(&c.cen, s.y, n):
            nsp += 1
            if c.layer_on and s.cur_d < c.eta:
                s.consec += 1
                if s.consec > s.consec_max:
                    s.consec_max = s.consec
                if c.dwell_events > 0 and s.consec >= c.dwell_events:
                    status[0] = ST_BOUNDARY
                    tau[0] = t
                    for i in range(n):
                        x_pre[i] = s.x[i]
                        x_post[i] = s.x[i]
                    break
        elif c.stp.kind != -1 and not sh_inside(&c.stp, s.y, n):
            status[0] = ST_EXIT_JUMP
            tau[0] = t
            for i in range(n):
                x_pre[i] = s.x[i]
                x_post[i] = s.y[i]
            break
        else:
            for i in range(n):
                s.x[i] = s.y[i]
            if c.layer_on:
                s.cur_d = sh_bdist(&c.cen, s.x, n)
                if s.cur_d >= c.eta:
                    s.consec = 0
                    s.ltime = 0.0
        if nev >= c.max_events:
            status[0] = ST_EVENT_CAP
            tau[0] = t
            for i in range(n):
                x_pre[i] = s.x[i]
                x_post[i] = s.x[i]
            break

    nevents[0] = nev
    nsupp[0] = nsp
    fk_a_out[0] = s.fk_a
    consec_max[0] = s.consec_max


def run_batch(
    double[:, ::1] x0,
    uint64_t[::1] path_indices,
    object seed,
    double lam,
    double[::1] log_r,
    double[::1] log_v,
    int censor_kind,
    double[::1] cen_pA,
    double[::1] cen_pB,
    double cen_s0,
    double cen_s1,
    int stop_kind,
    double[::1] stp_pA,
    double[::1] stp_pB,
    double stp_s0,
    double stp_s1,
    double horizon,
    double t_fixed,
    int64_t max_events,
    double eta,
    double dwell_time,
    int64_t dwell_events,
    int fk_on,
    double[::1] kap_s,
    double[::1] kap_logk,
    double[::1] kap_center,
    double fk_cap,
    double[:, ::1] targets,
    double sigma,
    double dt_sub,
    int32_t[::1] status,
    double[::1] tau,
    int64_t[::1] nevents,
    int64_t[::1] nsuppressed,
    double[:, ::1] x_pre,
    double[:, ::1] x_post,
    double[::1] fk_a,
    double[:, ::1] occupations,
    int64_t[::1] consec_max,
):
    """Simulate a batch of paths, filling the preallocated output arrays.

    Argument-for-argument twin of reference.run_batch.  Releases the GIL for
    the whole batch, so callers may shard across threads.
    """
    cdef Py_ssize_t npaths = x0.shape[0]
    cdef int n = <int>x0.shape[1]
    if n < 1 or n > MAXDIM:
        raise ValueError(f"dimension must be in 1..{MAXDIM}")
    if path_indices.shape[0] != npaths:
        raise ValueError("path_indices length mismatch")
    cdef Ctx c
    c.n = n
    c.lam = lam
    c.log_r = &log_r[0]
    c.log_v = &log_v[0]
    c.mtab = <int>log_r.shape[0]
    c.cen.kind = censor_kind
    c.cen.pA = &cen_pA[0]
    c.cen.pB = &cen_pB[0]
    c.cen.s0 = cen_s0
    c.cen.s1 = cen_s1
    c.stp.kind = stop_kind
    c.stp.pA = &stp_pA[0]
    c.stp.pB = &stp_pB[0]
    c.stp.s0 = stp_s0
    c.stp.s1 = stp_s1
    c.horizon = horizon
    c.t_fixed = t_fixed
    c.max_events = max_events
    c.eta = eta
    c.dwell_time = dwell_time
    c.dwell_events = dwell_events
    c.fk_on = fk_on
    c.kap_s = &kap_s[0]
    c.kap_logk = &kap_logk[0]
    c.mkap = <int>kap_s.shape[0]
    c.kap_center = &kap_center[0]
    c.fk_cap = fk_cap
    c.mtar = <int>targets.shape[0]
    if c.mtar > 0:
        c.targets = &targets[0, 0]
    else:
        c.targets = NULL
    c.sigma = sigma
    c.dt_sub = dt_sub
    c.layer_on = 1 if (censor_kind != -1 and eta > 0.0) else 0
    cdef uint64_t seed_u = <uint64_t>(<object>seed & 0xFFFFFFFFFFFFFFFF)

    cdef Py_ssize_t p
    cdef double* occ_row
    cdef double occ_dummy
    with nogil:
        for p in range(npaths):
            if c.mtar > 0:
                occ_row = &occupations[p, 0]
            else:
                occ_row = &occ_dummy
            run_one(&c, seed_u, path_indices[p], &x0[p, 0],
                    &status[p], &tau[p], &nevents[p], &nsuppressed[p],
                    &x_pre[p, 0], &x_post[p, 0], &fk_a[p],
                    occ_row, &consec_max[p])


def philox_uniforms(object seed, object path_index, int count):
    """First `count` uniforms of a stream; used to cross-check the RNG."""
    out = np.empty(count, dtype=np.float64)
    cdef double[::1] mv = out
    cdef Rng rng
    cdef uint64_t s = <uint64_t>(<object>seed & 0xFFFFFFFFFFFFFFFF)
    cdef uint64_t p = <uint64_t>(<object>path_index & 0xFFFFFFFFFFFFFFFF)
    rng_init(&rng, s, p)
    cdef int i
    for i in range(count):
        mv[i] = rng_u(&rng)
    return out
