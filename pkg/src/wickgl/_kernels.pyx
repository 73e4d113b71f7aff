# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled Monte Carlo trajectory runner (hot kernel).

Same contract as wickgl._purepy.run_block: a block of independent stationary
OU trajectories with exact transitions, Wick coefficients at two target
modes, and AWP/CWP accumulators.  The per-step Wick coefficients come from
direct mode convolutions (Hermite recursion in coefficient space), which is
exactly the band-limited object the pure backend computes by dealiased FFT;
the backends agree to rounding.

The Philox4x32-10 generator is inlined so the noise stream is bit-identical
to wickgl.rng for the same (seed, trajectory, step, slot) counters.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport cos, log, sin, sqrt

cnp.import_array()

BACKEND_NAME = "compiled"

ctypedef unsigned int u32
ctypedef unsigned long long u64

cdef double TWO_NEG_53 = 2.0 ** -53
cdef double TWO_PI = 6.283185307179586476925286766559


cdef inline void philox4x32(u32 k0, u32 k1, u32 c0, u32 c1, u32 c2, u32 c3,
                            u32* o0, u32* o1, u32* o2, u32* o3) noexcept nogil:
    cdef u32 x0 = c0, x1 = c1, x2 = c2, x3 = c3
    cdef u32 hi0, lo0, hi1, lo1
    cdef u64 p0, p1
    cdef int r
    for r in range(10):
        p0 = (<u64> 0xD2511F53u) * x0
        p1 = (<u64> 0xCD9E8D57u) * x2
        hi0 = <u32> (p0 >> 32)
        lo0 = <u32> (p0 & 0xFFFFFFFFu)
        hi1 = <u32> (p1 >> 32)
        lo1 = <u32> (p1 & 0xFFFFFFFFu)
        x0 = hi1 ^ x1 ^ k0
        x1 = lo1
        x2 = hi0 ^ x3 ^ k1
        x3 = lo0
        k0 = k0 + 0x9E3779B9u
        k1 = k1 + 0xBB67AE85u
    o0[0] = x0
    o1[0] = x1
    o2[0] = x2
    o3[0] = x3


cdef inline void gaussian_pair(u32 k0, u32 k1, u32 traj, u32 step, u32 slot,
                               u32 stream, double* z0, double* z1) noexcept nogil:
    cdef u32 o0, o1, o2, o3
    cdef u64 ua, ub
    cdef double u1, u2, r, theta
    philox4x32(k0, k1, traj, step, slot, stream, &o0, &o1, &o2, &o3)
    ua = (<u64> o0) | ((<u64> o1) << 32)
    ub = (<u64> o2) | ((<u64> o3) << 32)
    u1 = <double> ((ua >> 11) + 1) * TWO_NEG_53
    u2 = <double> (ub >> 11) * TWO_NEG_53
    r = sqrt(-2.0 * log(u1))
    theta = TWO_PI * u2
    z0[0] = r * cos(theta)
    z1[0] = r * sin(theta)


cdef inline double complex _read_target(double complex[:] a, double complex[:] w,
                                        long idx, int degree) noexcept nogil:
    if idx == -2:
        return 1.0 + 0j
    if idx == -1:
        return 0
    if degree == 1:
        return a[idx]
    return w[idx]


cdef void _wick_chain(double complex[:] a, double complex[:] w, long[:] seg_off,
                      long[:] tab_start, long[:] tab_len, long[:] emb_start,
                      long[:] emb_len, long[:] t_out, long[:] t_a, long[:] t_w,
                      long[:] e_idx, long n_modes, int deg_max,
                      double sigma2) noexcept nogil:
    """w_j = conv(a, w_{j-1}) - (j-1) sigma^2 w_{j-2} for j = 2..deg_max."""
    cdef long i, p, base_out, base_prev, base_low
    cdef int j
    cdef double fac
    if deg_max < 2:
        return
    for i in range(n_modes):
        w[seg_off[1] + i] = a[i]
    for j in range(2, deg_max + 1):
        base_out = seg_off[j]
        base_prev = seg_off[j - 1]
        for i in range(seg_off[j + 1] - seg_off[j]):
            w[base_out + i] = 0
        for p in range(tab_start[j], tab_start[j] + tab_len[j]):
            w[base_out + t_out[p]] = w[base_out + t_out[p]] + a[t_a[p]] * w[base_prev + t_w[p]]
        fac = (j - 1) * sigma2
        if j == 2:
            w[base_out + e_idx[emb_start[j]]] = w[base_out + e_idx[emb_start[j]]] - fac
        else:
            base_low = seg_off[j - 2]
            for p in range(emb_len[j]):
                w[base_out + e_idx[emb_start[j] + p]] = (
                    w[base_out + e_idx[emb_start[j] + p]]
                    - fac * w[base_low + p]
                )


def _target_index(plan, lattices, seg_off, k, degree):
    if degree == 0:
        return -2 if all(int(x) == 0 for x in k) else -1  # -2: constant one
    lat_t = lattices[degree]
    if max(abs(int(x)) for x in k) > lat_t.K:
        return -1
    return int(seg_off[degree]) + lat_t.mode_index(tuple(k))


def _prepare(plan):
    """Plan marshalling: index tables, noise scales, target bookkeeping."""
    from .lattice import build_lattice
    from . import rng as _rng

    lat = plan.lattice
    d, K = lat.d, lat.K
    deg_max = max(plan.degree1, plan.degree2, 1)
    n_modes = lat.n_modes

    half = lat.half_indices().astype(np.int64)
    conj = lat.conj_index(half).astype(np.int64)

    lam, phi = lat.lam, plan.phi
    sqrt_lam = np.sqrt(lam)
    s_half_stat = np.ascontiguousarray((phi / sqrt_lam)[half] / np.sqrt(2.0))
    s_zero_stat = float((phi / sqrt_lam)[lat.center])
    decay = np.ascontiguousarray(np.exp(-lam * plan.dt))
    step_var = phi ** 2 * -np.expm1(-2.0 * lam * plan.dt) / lam
    s_half_step = np.ascontiguousarray(np.sqrt(step_var)[half] / np.sqrt(2.0))
    s_zero_step = float(np.sqrt(step_var)[lat.center])

    lattices = {1: lat}
    for deg in range(2, deg_max + 1):
        lattices[deg] = build_lattice(d, deg * K)
    seg_off = np.zeros(deg_max + 2, dtype=np.int64)
    for deg in range(1, deg_max + 1):
        seg_off[deg + 1] = seg_off[deg] + lattices[deg].n_modes

    trip_out_list, trip_a_list, trip_w_list, emb_list = [], [], [], []
    tab_start = np.zeros(deg_max + 1, dtype=np.int64)
    tab_len = np.zeros(deg_max + 1, dtype=np.int64)
    emb_start = np.zeros(deg_max + 1, dtype=np.int64)
    emb_len = np.zeros(deg_max + 1, dtype=np.int64)
    pos = epos = 0
    for deg in range(2, deg_max + 1):
        lat_prev, lat_out = lattices[deg - 1], lattices[deg]
        ks = lat.modes[:, None, :] + lat_prev.modes[None, :, :]
        side = 2 * deg * K + 1
        weights = side ** np.arange(d - 1, -1, -1, dtype=np.int64)
        out_idx = ((ks + deg * K) @ weights).ravel()
        shape2 = ks.shape[:2]
        trip_out_list.append(out_idx)
        trip_a_list.append(
            np.broadcast_to(np.arange(n_modes, dtype=np.int64)[:, None], shape2).ravel().copy()
        )
        trip_w_list.append(
            np.broadcast_to(
                np.arange(lat_prev.n_modes, dtype=np.int64)[None, :], shape2
            ).ravel().copy()
        )
        tab_start[deg] = pos
        tab_len[deg] = out_idx.shape[0]
        pos += out_idx.shape[0]
        if deg == 2:
            emb = np.array([lat_out.mode_index((0,) * d)], dtype=np.int64)
        else:
            emb = ((lattices[deg - 2].modes + deg * K) @ weights).astype(np.int64)
        emb_list.append(emb)
        emb_start[deg] = epos
        emb_len[deg] = emb.shape[0]
        epos += emb.shape[0]

    cat = lambda lst: (np.ascontiguousarray(np.concatenate(lst))
                       if lst else np.zeros(0, dtype=np.int64))
    key0, key1 = _rng.split_seed(plan.seed)

    lam_k1 = 1.0 + float(sum(int(x) ** 2 for x in plan.k1))
    lam_k2 = 1.0 + float(sum(int(x) ** 2 for x in plan.k2))
    dt = plan.dt
    i1a = -np.expm1(-lam_k1 * dt) / lam_k1
    i1b = -np.expm1(-lam_k2 * dt) / lam_k2
    g1a = (1.0 - i1a / dt) / lam_k1
    g1b = (1.0 - i1b / dt) / lam_k2

    return dict(
        n_modes=n_modes,
        center=lat.center,
        half=half,
        conj=conj,
        s_half_stat=s_half_stat,
        s_zero_stat=s_zero_stat,
        s_half_step=s_half_step,
        s_zero_step=s_zero_step,
        decay=decay,
        deg_max=deg_max,
        seg_off=seg_off,
        total=int(seg_off[deg_max + 1]),
        tab_start=tab_start,
        tab_len=tab_len,
        emb_start=emb_start,
        emb_len=emb_len,
        trip_out=cat(trip_out_list),
        trip_a=cat(trip_a_list),
        trip_w=cat(trip_w_list),
        emb_idx=cat(emb_list),
        key0=int(key0),
        key1=int(key1),
        stream=int(_rng.STREAM_OU),
        t1_idx=_target_index(plan, lattices, seg_off, plan.k1, plan.degree1),
        t2_idx=_target_index(plan, lattices, seg_off, plan.k2, plan.degree2),
        cwp=(np.exp(-lam_k1 * dt), np.exp(-lam_k2 * dt),
             i1a - g1a, i1b - g1b, g1a, g1b),
    )


def run_block(plan, lo, hi):
    """Readout coefficients (val1 at k1, val2 at k2) for trajectories lo..hi-1."""
    prep = _prepare(plan)
    cdef long M = hi - lo
    cdef long lo_c = lo

    cdef long n_modes = prep["n_modes"]
    cdef long center = prep["center"]
    cdef long[:] half = prep["half"]
    cdef long[:] conj_idx = prep["conj"]
    cdef long n_half = half.shape[0]
    cdef double[:] s_half_stat = prep["s_half_stat"]
    cdef double[:] s_half_step = prep["s_half_step"]
    cdef double s0_stat = prep["s_zero_stat"]
    cdef double s0_step = prep["s_zero_step"]
    cdef double[:] decay = prep["decay"]
    cdef int deg_max = prep["deg_max"]
    cdef long[:] seg_off = prep["seg_off"]
    cdef long[:] tab_start = prep["tab_start"]
    cdef long[:] tab_len = prep["tab_len"]
    cdef long[:] emb_start = prep["emb_start"]
    cdef long[:] emb_len = prep["emb_len"]
    cdef long[:] t_out = prep["trip_out"]
    cdef long[:] t_a = prep["trip_a"]
    cdef long[:] t_w = prep["trip_w"]
    cdef long[:] e_idx = prep["emb_idx"]
    cdef u32 k0 = <u32> prep["key0"]
    cdef u32 k1 = <u32> prep["key1"]
    cdef u32 stream = <u32> prep["stream"]
    cdef long t1_idx = prep["t1_idx"]
    cdef long t2_idx = prep["t2_idx"]
    cdef int t1_deg = plan.degree1
    cdef int t2_deg = plan.degree2
    cdef double dt = plan.dt
    cdef long n_steps = plan.n_steps
    cdef long r1 = plan.readout_steps[0]
    cdef long r2 = plan.readout_steps[1]
    cdef long awp_start = plan.awp_start_step
    cdef int kind = {"WP": 0, "AWP": 1, "CWP": 2}[plan.kind]
    cdef double sigma2 = plan.sigma2
    cdef double dec1 = prep["cwp"][0]
    cdef double dec2 = prep["cwp"][1]
    cdef double g0a = prep["cwp"][2]
    cdef double g0b = prep["cwp"][3]
    cdef double g1a = prep["cwp"][4]
    cdef double g1b = prep["cwp"][5]

    out1 = np.zeros(M, dtype=np.complex128)
    out2 = np.zeros(M, dtype=np.complex128)
    cdef double complex[:] val1 = out1
    cdef double complex[:] val2 = out2
    a_buf = np.zeros(n_modes, dtype=np.complex128)
    w_buf = np.zeros(max(prep["total"], 1), dtype=np.complex128)
    cdef double complex[:] a = a_buf
    cdef double complex[:] w = w_buf

    cdef long m, s, h
    cdef u32 traj
    cdef double z0, z1
    cdef double complex acc1, acc2, w1, w2, w1n, w2n

    with nogil:
        for m in range(M):
            traj = <u32> (lo_c + m)
            for h in range(n_half):
                gaussian_pair(k0, k1, traj, 0, <u32> h, stream, &z0, &z1)
                a[half[h]] = (z0 + 1j * z1) * s_half_stat[h]
                a[conj_idx[h]] = (z0 - 1j * z1) * s_half_stat[h]
            gaussian_pair(k0, k1, traj, 0, <u32> n_half, stream, &z0, &z1)
            a[center] = z0 * s0_stat

            _wick_chain(a, w, seg_off, tab_start, tab_len, emb_start, emb_len,
                        t_out, t_a, t_w, e_idx, n_modes, deg_max, sigma2)
            w1 = _read_target(a, w, t1_idx, t1_deg)
            w2 = _read_target(a, w, t2_idx, t2_deg)
            acc1 = 0
            acc2 = 0
            if kind == 0:
                if r1 == 0:
                    val1[m] = w1
                if r2 == 0:
                    val2[m] = w2
            else:
                if r1 == 0:
                    val1[m] = acc1
                if r2 == 0:
                    val2[m] = acc2

            for s in range(1, n_steps + 1):
                for h in range(n_half):
                    gaussian_pair(k0, k1, traj, <u32> s, <u32> h, stream, &z0, &z1)
                    a[half[h]] = a[half[h]] * decay[half[h]] + (z0 + 1j * z1) * s_half_step[h]
                    a[conj_idx[h]] = (a[conj_idx[h]] * decay[conj_idx[h]]
                                      + (z0 - 1j * z1) * s_half_step[h])
                gaussian_pair(k0, k1, traj, <u32> s, <u32> n_half, stream, &z0, &z1)
                a[center] = a[center] * decay[center] + z0 * s0_step

                if kind == 0:
                    if s == r1 or s == r2:
                        _wick_chain(a, w, seg_off, tab_start, tab_len, emb_start,
                                    emb_len, t_out, t_a, t_w, e_idx, n_modes,
                                    deg_max, sigma2)
                        if s == r1:
                            val1[m] = _read_target(a, w, t1_idx, t1_deg)
                        if s == r2:
                            val2[m] = _read_target(a, w, t2_idx, t2_deg)
                else:
                    _wick_chain(a, w, seg_off, tab_start, tab_len, emb_start,
                                emb_len, t_out, t_a, t_w, e_idx, n_modes,
                                deg_max, sigma2)
                    w1n = _read_target(a, w, t1_idx, t1_deg)
                    w2n = _read_target(a, w, t2_idx, t2_deg)
                    if kind == 1:
                        if s > awp_start:
                            acc1 = acc1 + 0.5 * dt * (w1 + w1n)
                            acc2 = acc2 + 0.5 * dt * (w2 + w2n)
                    else:
                        acc1 = acc1 * dec1 + g0a * w1 + g1a * w1n
                        acc2 = acc2 * dec2 + g0b * w2 + g1b * w2n
                    w1 = w1n
                    w2 = w2n
                    if s == r1:
                        val1[m] = acc1
                    if s == r2:
                        val2[m] = acc2
    return out1, out2
