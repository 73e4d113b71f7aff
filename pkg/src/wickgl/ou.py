"""Exact sampling and stepping of the stationary cutoff OU field.

The mode system is a_v' = -lambda_v a_v + sqrt(2) phi_v dbeta_v with
stationary second moment E|a_v|^2 = phi_v^2 / lambda_v.  Transitions are
sampled exactly (a <- exp(-lambda dt) a + xi, with xi drawn at the exact
conditional variance), so time-discretization error lives only in the
quadratures of the averaged (AWP) and convolutional (CWP) Wick power
accumulators: composite trapezoid for AWP, exponential trapezoid for CWP,
both with O(dt^2) bias.

All randomness is counter-based: a trajectory is a pure function of
(master seed, trajectory index, step count).
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from . import rng
from .lattice import CutoffProfile, ModeLattice, SpectralField, build_lattice
from .wick import field_variance, wick_power_field

CWP_BURN_IN = 20.0  # time units; exp(-20) initialization bias ~ 2e-9


def _noise_layout(lattice: ModeLattice):
    """Draw-slot layout: slots 0..n_half-1 are the lexicographically positive
    modes (lattice order), slot n_half is the zero mode."""
    half = lattice.half_indices()
    return half, lattice.conj_index(half), lattice.center


def _hermitian_from_draws(lattice: ModeLattice, scale_half, scale_zero, z0, z1):
    """Assemble a Hermitian coefficient vector from per-slot Gaussian pairs."""
    half, conj_half, center = _noise_layout(lattice)
    out = np.zeros(lattice.n_modes, dtype=np.complex128)
    out[half] = (z0[: half.size] + 1j * z1[: half.size]) * scale_half
    out[conj_half] = np.conj(out[half])
    out[center] = z0[half.size] * scale_zero
    return out


def stationary_scales(lattice: ModeLattice, phi: CutoffProfile):
    half, _, center = _noise_layout(lattice)
    s = phi.values / np.sqrt(lattice.lam)
    return s[half] / np.sqrt(2.0), s[center]


def step_scales(lattice: ModeLattice, phi: CutoffProfile, dt: float):
    half, _, center = _noise_layout(lattice)
    var = phi.values**2 * -np.expm1(-2.0 * lattice.lam * dt) / lattice.lam
    s = np.sqrt(var)
    return np.exp(-lattice.lam * dt), s[half] / np.sqrt(2.0), s[center]


@dataclass
class OUState:
    """One trajectory's state: time, field, accumulators and RNG lineage."""

    t: float
    V: SpectralField
    phi: CutoffProfile
    seed: int
    traj_index: int = 0
    step: int = 0
    awp: dict = field(default_factory=dict)  # degree -> SpectralField (band n*K)
    cwp: dict = field(default_factory=dict)
    prev_wick: dict = field(default_factory=dict)
    awp_started_at: float | None = None
    cwp_started_at: float | None = None

    @property
    def lattice(self) -> ModeLattice:
        return self.V.lattice


def stationary_sample(
    lattice: ModeLattice, phi: CutoffProfile, seed: int, traj_index: int = 0
) -> OUState:
    """Draw V from its stationary law: E|a_v|^2 = phi_v^2/lambda_v, a_{-v} = conj(a_v)."""
    if phi.lattice.n_modes != lattice.n_modes:
        raise ValueError("profile lattice mismatch")
    half, _, _ = _noise_layout(lattice)
    slots = np.arange(half.size + 1, dtype=np.uint32)
    z0, z1 = rng.gaussian_pair(seed, rng.STREAM_OU, np.uint32(traj_index), np.uint32(0), slots)
    s_half, s_zero = stationary_scales(lattice, phi)
    coeffs = _hermitian_from_draws(lattice, s_half, s_zero, z0, z1)
    return OUState(t=0.0, V=SpectralField(lattice, coeffs), phi=phi, seed=seed,
                   traj_index=traj_index, step=0)


def _cwp_weights(lam: np.ndarray, dt: float):
    """Exponential-trapezoid weights: exact integral of the linear interpolant
    of the source against exp(-lambda (dt - u))."""
    i1 = -np.expm1(-lam * dt) / lam
    g1 = (1.0 - i1 / dt) / lam
    return i1 - g1, g1


def enable_accumulators(state: OUState, awp_degrees=(), cwp_degrees=()) -> OUState:
    """Start AWP/CWP accumulation at the current time (accumulators at band n*K)."""
    degrees = sorted(set(awp_degrees) | set(cwp_degrees))
    prev = dict(state.prev_wick)
    awp = dict(state.awp)
    cwp = dict(state.cwp)
    lat = state.lattice
    for n in degrees:
        prev[n] = wick_power_field(state.V, state.phi, n)
        out_lat = prev[n].lattice
        zero = SpectralField(out_lat, np.zeros(out_lat.n_modes, dtype=np.complex128))
        if n in awp_degrees:
            awp[n] = zero.copy()
        if n in cwp_degrees:
            cwp[n] = zero.copy()
    return replace(
        state,
        awp=awp,
        cwp=cwp,
        prev_wick=prev,
        awp_started_at=state.t if awp_degrees else state.awp_started_at,
        cwp_started_at=state.t if cwp_degrees else state.cwp_started_at,
    )


def ou_step(state: OUState, dt: float, rng_draws=None) -> OUState:
    """One exact OU transition; accumulators advance by their quadrature rules.

    The noise is keyed by (seed, trajectory, step); `rng_draws` may override it
    with a precomputed (z0, z1) slot array, e.g. to correlate two solvers on
    one noise path.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    lat = state.lattice
    half, _, _ = _noise_layout(lat)
    step = state.step + 1
    if rng_draws is None:
        slots = np.arange(half.size + 1, dtype=np.uint32)
        z0, z1 = rng.gaussian_pair(
            state.seed, rng.STREAM_OU, np.uint32(state.traj_index), np.uint32(step), slots
        )
    else:
        z0, z1 = rng_draws
    decay, s_half, s_zero = step_scales(lat, state.phi, dt)
    xi = _hermitian_from_draws(lat, s_half, s_zero, z0, z1)
    V_new = SpectralField(lat, decay * state.V.coeffs + xi)

    new_prev = {}
    new_awp = dict(state.awp)
    new_cwp = dict(state.cwp)
    for n, w_old in state.prev_wick.items():
        w_new = wick_power_field(V_new, state.phi, n)
        new_prev[n] = w_new
        if n in new_awp:
            acc = new_awp[n]
            new_awp[n] = SpectralField(
                acc.lattice, acc.coeffs + 0.5 * dt * (w_old.coeffs + w_new.coeffs)
            )
        if n in new_cwp:
            acc = new_cwp[n]
            lam_out = acc.lattice.lam
            g0, g1 = _cwp_weights(lam_out, dt)
            new_cwp[n] = SpectralField(
                acc.lattice,
                np.exp(-lam_out * dt) * acc.coeffs + g0 * w_old.coeffs + g1 * w_new.coeffs,
            )
    return replace(
        state,
        t=state.t + dt,
        V=V_new,
        step=step,
        awp=new_awp,
        cwp=new_cwp,
        prev_wick=new_prev,
    )


def awp_accumulate(trajectory, n: int, dt: float) -> SpectralField:
    """Composite-trapezoid time integral of the degree-n Wick power along a
    trajectory of OUStates sampled at uniform dt.  O(dt^2) quadrature bias."""
    states = list(trajectory)
    if len(states) < 2:
        raise ValueError("need at least two trajectory samples")
    fields = [wick_power_field(s.V, s.phi, n) for s in states]
    out = fields[0].coeffs * 0.5
    for f in fields[1:-1]:
        out = out + f.coeffs
    out = out + fields[-1].coeffs * 0.5
    return SpectralField(fields[0].lattice, out * dt)


def cwp_update(acc: SpectralField, w_old: SpectralField, w_new: SpectralField,
               dt: float) -> SpectralField:
    """One exponential-trapezoid update of the CWP accumulator:
    b <- exp(-lambda dt) b + g0 w_old + g1 w_new."""
    lam = acc.lattice.lam
    g0, g1 = _cwp_weights(lam, dt)
    return SpectralField(
        acc.lattice, np.exp(-lam * dt) * acc.coeffs + g0 * w_old.coeffs + g1 * w_new.coeffs
    )


def cwp_readout(state: OUState, n: int):
    """CWP accumulator field plus a burn-in flag (False = estimate still biased)."""
    if n not in state.cwp:
        raise KeyError(f"no CWP accumulator of degree {n}")
    burned_in = (
        state.cwp_started_at is not None
        and state.t - state.cwp_started_at >= CWP_BURN_IN - 1e-12
    )
    return state.cwp[n], burned_in


# ---------------------------------------------------------------------------
# Monte Carlo trajectory plans (consumed by the compiled / pure backends)
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MCPlan:
    """Precomputed description of one target's trajectory runs.

    A run draws the stationary field, advances `n_steps` exact OU steps of
    size dt, and reads out the degree-`degree1` object at mode k1 (step
    readout_steps[0]) and the degree-`degree2` object at k2 (readout_steps[1]):

      kind WP  - the Wick power coefficient itself (no quadrature bias;
                 for lag tau the single step has dt = tau),
      kind AWP - the trapezoid accumulator started at step awp_start_step,
      kind CWP - the exponential-trapezoid accumulator started at step 0
                 (readouts should sit past the burn-in).
    """

    kind: str
    d: int
    K: int
    degree1: int
    degree2: int
    lam: np.ndarray
    phi: np.ndarray
    sigma2: float
    seed: int
    dt: float
    n_steps: int
    readout_steps: tuple
    k1: tuple
    k2: tuple
    awp_start_step: int = 0

    @property
    def lattice(self) -> ModeLattice:
        return build_lattice(self.d, self.K)


def make_mc_plan(kind, lattice, phi, degree, seed, dt, n_steps, readout_steps,
                 k1, k2, awp_start_step=0) -> MCPlan:
    kind = kind.upper()
    if kind not in ("WP", "AWP", "CWP"):
        raise ValueError("kind must be WP, AWP or CWP")
    r1, r2 = (int(r) for r in readout_steps)
    if not 0 <= r1 <= r2 <= n_steps:
        raise ValueError("readout steps must satisfy 0 <= r1 <= r2 <= n_steps")
    deg = (int(degree), int(degree)) if np.isscalar(degree) else tuple(int(x) for x in degree)
    return MCPlan(
        kind=kind,
        d=lattice.d,
        K=lattice.K,
        degree1=deg[0],
        degree2=deg[1],
        lam=lattice.lam,
        phi=phi.values,
        sigma2=field_variance(phi),
        seed=int(seed),
        dt=float(dt),
        n_steps=int(n_steps),
        readout_steps=(r1, r2),
        k1=tuple(int(x) for x in k1),
        k2=tuple(int(x) for x in k2),
        awp_start_step=int(awp_start_step),
    )
