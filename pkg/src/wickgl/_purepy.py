"""Pure numpy Monte Carlo trajectory runner (fallback backend).

Runs a block of independent stationary OU trajectories, batched over the
trajectory axis, and reads out Wick / averaged-Wick / convolutional-Wick
coefficients at the plan's two target modes.  Semantically identical to the
compiled kernel in _kernels.pyx; the Wick coefficients are produced here by
dealiased grid FFTs instead of direct mode convolutions, so the two backends
agree to rounding rather than bitwise.
"""

from __future__ import annotations

import numpy as np
from scipy.fft import next_fast_len

from . import rng
from .ou import MCPlan

BACKEND_NAME = "pure"


def _phase_vector(k, N, d):
    """exp(-i <k, x_j>) / N^d over the flattened N^d grid."""
    vec = np.ones(1, dtype=np.complex128)
    for a in range(d):
        ph = np.exp(-2j * np.pi * k[a] * np.arange(N) / N)
        vec = np.multiply.outer(vec, ph).ravel()
    return vec / N**d


def _hermite_grid(u, var, n):
    """sigma^n H_n(u / sigma) on an array (u^n when var == 0)."""
    if var == 0.0:
        return u**n
    h_prev = np.ones_like(u)
    if n == 0:
        return h_prev
    h = u.copy()
    for k in range(1, n):
        h, h_prev = u * h - (k * var) * h_prev, h
    return h


def run_block(plan: MCPlan, lo: int, hi: int):
    """Readout coefficients (val1 at k1, val2 at k2) for trajectories lo..hi-1."""
    M = hi - lo
    lat = plan.lattice
    half = lat.half_indices()
    conj_half = lat.conj_index(half)
    center = lat.center
    n_slots = half.size + 1
    traj = np.arange(lo, hi, dtype=np.uint32)[:, None]
    slots = np.arange(n_slots, dtype=np.uint32)[None, :]

    sqrt_lam = np.sqrt(plan.lam)
    s_half_stat = (plan.phi / sqrt_lam)[half] / np.sqrt(2.0)
    s_zero_stat = (plan.phi / sqrt_lam)[center]
    decay = np.exp(-plan.lam * plan.dt)
    step_var = plan.phi**2 * -np.expm1(-2.0 * plan.lam * plan.dt) / plan.lam
    s_half_step = np.sqrt(step_var)[half] / np.sqrt(2.0)
    s_zero_step = np.sqrt(step_var)[center]

    deg1, deg2 = plan.degree1, plan.degree2
    deg_max = max(deg1, deg2)
    need_grid = deg_max >= 2
    if need_grid:
        N = next_fast_len(2 * deg_max * lat.K + 1, real=False)
        shape = (N,) * lat.d
        flat_modes = np.ravel_multi_index(tuple((lat.modes % N).T), shape)
        phase1 = _phase_vector(plan.k1, N, lat.d)
        phase2 = _phase_vector(plan.k2, N, lat.d)
        spec = np.zeros((M, N**lat.d), dtype=np.complex128)

    idx_k1 = lat.mode_index(plan.k1) if max(map(abs, plan.k1), default=0) <= lat.K else None
    idx_k2 = lat.mode_index(plan.k2) if max(map(abs, plan.k2), default=0) <= lat.K else None

    def assemble(z0, z1, s_half, s_zero):
        out = np.zeros((M, lat.n_modes), dtype=np.complex128)
        out[:, half] = (z0[:, :-1] + 1j * z1[:, :-1]) * s_half
        out[:, conj_half] = np.conj(out[:, half])
        out[:, center] = z0[:, -1] * s_zero
        return out

    def one_target(a, degree, idx_k, k, phase_k, p_cache):
        if degree == 0:
            if all(x == 0 for x in k):
                return np.ones(M, dtype=np.complex128)
            return np.zeros(M, dtype=np.complex128)
        if degree == 1:
            if idx_k is None:
                return np.zeros(M, dtype=np.complex128)
            return a[:, idx_k].copy()
        if degree not in p_cache:
            if "grid" not in p_cache:
                spec[:] = 0.0
                spec[:, flat_modes] = a
                u = np.fft.ifftn(spec.reshape((M,) + shape), axes=tuple(range(1, lat.d + 1)))
                p_cache["grid"] = u.real * N**lat.d
            p_cache[degree] = _hermite_grid(p_cache["grid"], plan.sigma2, degree).reshape(M, -1)
        return p_cache[degree] @ phase_k

    def targets(a):
        """Wick coefficients: degree1 at k1 and degree2 at k2, per trajectory."""
        p_cache: dict = {}
        return (
            one_target(a, deg1, idx_k1, plan.k1, phase1 if need_grid else None, p_cache),
            one_target(a, deg2, idx_k2, plan.k2, phase2 if need_grid else None, p_cache),
        )

    z0, z1 = rng.gaussian_pair(plan.seed, rng.STREAM_OU, traj, np.uint32(0), slots)
    a = assemble(z0, z1, s_half_stat, s_zero_stat)

    val1 = np.zeros(M, dtype=np.complex128)
    val2 = np.zeros(M, dtype=np.complex128)
    r1, r2 = plan.readout_steps
    kind = plan.kind

    if kind == "WP":
        w1 = w2 = None
        if r1 == 0 or r2 == 0:
            w1, w2 = targets(a)
        if r1 == 0:
            val1 = w1
        if r2 == 0:
            val2 = w2
    else:
        w1, w2 = targets(a)
        acc1 = np.zeros(M, dtype=np.complex128)
        acc2 = np.zeros(M, dtype=np.complex128)
        if kind == "CWP":
            lam_k1 = 1.0 + sum(x * x for x in plan.k1)
            lam_k2 = 1.0 + sum(x * x for x in plan.k2)
            dec1, dec2 = np.exp(-lam_k1 * plan.dt), np.exp(-lam_k2 * plan.dt)
            i1a = -np.expm1(-lam_k1 * plan.dt) / lam_k1
            i1b = -np.expm1(-lam_k2 * plan.dt) / lam_k2
            g1a = (1.0 - i1a / plan.dt) / lam_k1
            g1b = (1.0 - i1b / plan.dt) / lam_k2
            g0a, g0b = i1a - g1a, i1b - g1b
        if r1 == 0:
            val1 = acc1.copy()
        if r2 == 0:
            val2 = acc2.copy()

    for s in range(1, plan.n_steps + 1):
        z0, z1 = rng.gaussian_pair(plan.seed, rng.STREAM_OU, traj, np.uint32(s), slots)
        xi = assemble(z0, z1, s_half_step, s_zero_step)
        a = a * decay + xi
        if kind == "WP":
            if s == r1 or s == r2:
                w1, w2 = targets(a)
                if s == r1:
                    val1 = w1
                if s == r2:
                    val2 = w2
        else:
            w1_new, w2_new = targets(a)
            if kind == "AWP":
                if s > plan.awp_start_step:
                    acc1 = acc1 + (0.5 * plan.dt) * (w1 + w1_new)
                    acc2 = acc2 + (0.5 * plan.dt) * (w2 + w2_new)
            else:
                acc1 = acc1 * dec1 + g0a * w1 + g1a * w1_new
                acc2 = acc2 * dec2 + g0b * w2 + g1b * w2_new
            w1, w2 = w1_new, w2_new
            if s == r1:
                val1 = acc1.copy()
            if s == r2:
                val2 = acc2.copy()
    return val1, val2
