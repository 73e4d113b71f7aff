"""Mild-equation solvers: weighted-space Picard iteration, exponential Euler,
and the shifted Ginzburg-Landau drivers.

The linear part is always A = Laplace - 1, diagonal in the mode basis with
semigroup multiplier exp(-lambda_v t).  The mild equation

    x(t) = e^{A(t-t0)} v + sum_i int_{t0}^t e^{A(t-s)} F_i(s, x(s)) ds

is solved either as a fixed point in the weighted node norm
sup (t-t0)^(r1-r0) ||x(t)||_{C^{r1}} (Picard, with an automatic
interval-halving contraction certificate) or by the first-order exponential
Euler stepper y <- e^{A dt} y + dt phi1(A dt) F(t, y).  Blow-up is declared
when a proxy norm exceeds a threshold; later snapshots carry the infinity
sentinel.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import rng
from .lattice import (
    ModeLattice,
    SpectralField,
    build_lattice,
    dealiased_product,
    default_grid,
    holder_norm,
    pointwise_power,
    truncate,
)
from .ou import (
    OUState,
    _hermitian_from_draws,
    _noise_layout,
    ou_step,
    stationary_sample,
    step_scales,
)
from .wick import field_variance, wick_power_field

DEFAULT_BLOWUP_THRESHOLD = 1e6
DEFAULT_EPS_PRIME = 0.05
MAX_TAU_HALVINGS = 20


class ContractionError(RuntimeError):
    """Picard iteration produced no local contraction certificate."""


@dataclass(frozen=True)
class NonlinearTerm:
    """One F_i with its exponent tuple (alpha, beta, gamma, delta).

    evaluator(t, y) must return a SpectralField on any cutoff of the same
    torus; the solvers project it back onto their working lattice.
    """

    evaluator: object
    alpha: float
    beta: float
    gamma: float
    delta: float


@dataclass(frozen=True)
class NonlinearitySpec:
    """Nonlinearity terms plus the solution-space exponents (r0, r1)."""

    terms: tuple
    r0: float
    r1: float

    def __post_init__(self):
        if not self.terms:
            raise ValueError("need at least one nonlinear term (use a zero map)")
        alphas = [t.alpha for t in self.terms]
        betas = [t.beta for t in self.terms]
        gammas = [t.gamma for t in self.terms]
        if any(b < self.r0 for b in betas) or any(g < self.r0 for g in gammas):
            raise ValueError("beta_i, gamma_i must be >= r0")
        if not max(betas + gammas) < 1 + min(alphas):
            raise ValueError("need max(beta, gamma) < 1 + min(alpha)")
        if not max(betas + gammas) <= self.r1 < 1 + min(alphas):
            raise ValueError("need r1 in [max(beta, gamma), 1 + min(alpha))")
        worst = max(
            t.gamma - min(t.alpha, self.r0) + t.delta * (t.beta - self.r0)
            for t in self.terms
        )
        if not worst < 1:
            raise ValueError(
                f"standing hypothesis max[gamma - min(alpha, r0) + delta (beta - r0)] "
                f"= {worst} >= 1"
            )

    @property
    def proxy_exponent(self) -> float:
        return max(max(t.beta for t in self.terms), max(t.gamma for t in self.terms))

    def __call__(self, t: float, y: SpectralField) -> SpectralField:
        out = None
        for term in self.terms:
            val = truncate(term.evaluator(t, y), y.lattice)
            out = val if out is None else out + val
        return out


def zero_term(alpha=0.0, beta=0.0, gamma=0.0, delta=0.0) -> NonlinearTerm:
    def evaluator(t, y):
        return SpectralField(y.lattice, np.zeros(y.lattice.n_modes, dtype=np.complex128))

    return NonlinearTerm(evaluator, alpha, beta, gamma, delta)


@dataclass
class MildSolution:
    """Time grid, snapshots (None after blow-up: the infinity sentinel), and
    the weighted norm trace sup (t-t0)^(r1-r0) ||x||_{C^{r1}}."""

    times: np.ndarray
    snapshots: list
    r0: float
    r1: float
    blowup_time: float | None = None
    weighted_trace: float = 0.0
    residual: float | None = None
    iteration_distances: list = field(default_factory=list)
    tau_used: float | None = None

    @property
    def blew_up(self) -> bool:
        return self.blowup_time is not None

    def final(self) -> SpectralField:
        live = [s for s in self.snapshots if s is not None]
        if not live:
            raise ValueError("no finite snapshots")
        return live[-1]


def weighted_distance(times, xs, ys, t0: float, r0: float, r1: float, N=None) -> float:
    """sup over nodes of (t-t0)^(r1-r0) ||x-y||_{C^{r1}} + ||x-y||_{C^{r0}}."""
    worst = 0.0
    for t, x, y in zip(times, xs, ys):
        if x is None or y is None:
            return math.inf
        diff = x - y
        term = holder_norm(diff, r0, N)
        if t > t0:
            term += (t - t0) ** (r1 - r0) * holder_norm(diff, r1, N)
        worst = max(worst, term)
    return worst


def _weighted_trace(times, fields, t0, r0, r1, N=None) -> float:
    worst = 0.0
    for t, f in zip(times, fields):
        if f is None or t <= t0:
            continue
        worst = max(worst, (t - t0) ** (r1 - r0) * holder_norm(f, r1, N))
    return worst


def semigroup_multiplier(lattice: ModeLattice, t: float) -> np.ndarray:
    """e^{A t} per mode: exp(-lambda_v t)."""
    return np.exp(-lattice.lam * t)


def _phi1_multiplier(lattice: ModeLattice, dt: float) -> np.ndarray:
    """phi1(A dt) per mode: (1 - exp(-lambda dt)) / (lambda dt)."""
    z = lattice.lam * dt
    return -np.expm1(-z) / z


def _exp_trap_weights(lattice: ModeLattice, dt: float):
    lam = lattice.lam
    i1 = -np.expm1(-lam * dt) / lam
    g1 = (1.0 - i1 / dt) / lam
    return i1 - g1, g1


def picard_solve(
    F: NonlinearitySpec,
    v: SpectralField,
    t0: float,
    tau: float,
    iterations: int = 12,
    n_nodes: int = 64,
    tol: float = 1e-12,
    N: int | None = None,
) -> MildSolution:
    """Fixed point of the mild map on a uniform node grid over [t0, t0 + tau].

    The time integral uses per-mode exponential-trapezoid weights (exact for
    a source that is linear between nodes).  If 8 iterations do not shrink
    the iterate distance by at least 2x, tau is halved and the iteration
    restarts; running out of halvings raises ContractionError.
    """
    if tau <= 0:
        raise ValueError("tau must be positive")
    lat = v.lattice
    r0, r1 = F.r0, F.r1
    for _ in range(MAX_TAU_HALVINGS):
        dt = tau / n_nodes
        times = t0 + dt * np.arange(n_nodes + 1)
        decay = semigroup_multiplier(lat, dt)
        g0, g1 = _exp_trap_weights(lat, dt)
        flow = [semigroup_multiplier(lat, t - t0) * v.coeffs for t in times]
        xs = [SpectralField(lat, c) for c in flow]

        def apply_map(cur):
            fs = [F(t, x).coeffs for t, x in zip(times, cur)]
            out = [SpectralField(lat, flow[0].copy())]
            integral = np.zeros(lat.n_modes, dtype=np.complex128)
            for m in range(1, len(times)):
                integral = decay * integral + g0 * fs[m - 1] + g1 * fs[m]
                out.append(SpectralField(lat, flow[m] + integral))
            return out

        distances = []
        converged = False
        for it in range(iterations):
            new = apply_map(xs)
            dist = weighted_distance(times, new, xs, t0, r0, r1, N)
            distances.append(dist)
            xs = new
            if dist < tol:
                converged = True
                break
            if it == 7 and distances[-1] > 0.5 * distances[0]:
                break  # no contraction certificate on this interval: halve tau
        else:
            converged = distances[-1] <= 0.5 * distances[0]
        if converged or (len(distances) >= 8 and distances[-1] <= 0.5 * distances[0]):
            resid = weighted_distance(times, apply_map(xs), xs, t0, r0, r1, N)
            return MildSolution(
                times=times,
                snapshots=xs,
                r0=r0,
                r1=r1,
                weighted_trace=_weighted_trace(times, xs, t0, r0, r1, N),
                residual=resid,
                iteration_distances=distances,
                tau_used=tau,
            )
        tau *= 0.5
    raise ContractionError("no local contraction certificate")


def exp_euler_solve(
    F: NonlinearitySpec,
    v: SpectralField,
    t0: float,
    T: float,
    dt: float,
    blowup_threshold: float = DEFAULT_BLOWUP_THRESHOLD,
    N: int | None = None,
    forcing=None,
) -> MildSolution:
    """Exponential Euler: y <- e^{A dt} y + dt phi1(A dt) F(t, y) (+ forcing).

    Declares blow-up when ||y||_{C^{max(beta, gamma)}} exceeds the threshold
    or turns non-finite; snapshots from then on are the infinity sentinel
    (None).  `forcing(step_index)` may inject per-step coefficient increments
    (used for stochastic convolutions sharing a noise path).
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    if blowup_threshold <= 0:
        raise ValueError("blow-up threshold must be positive")
    lat = v.lattice
    steps = round((T - t0) / dt)
    if abs(t0 + steps * dt - T) > 1e-9 * max(1.0, abs(T)):
        raise ValueError("T - t0 must be a multiple of dt")
    decay = semigroup_multiplier(lat, dt)
    phi1 = _phi1_multiplier(lat, dt)
    proxy_r = F.proxy_exponent
    times = t0 + dt * np.arange(steps + 1)
    y = v.copy()
    snapshots: list = [y.copy()]
    blowup = None
    for m in range(steps):
        if blowup is None:
            fval = F(times[m], y).coeffs
            coeffs = decay * y.coeffs + dt * (phi1 * fval)
            if forcing is not None:
                coeffs = coeffs + forcing(m + 1)
            y = SpectralField(lat, coeffs)
            finite = bool(np.all(np.isfinite(y.coeffs)))
            if not finite or holder_norm(y, proxy_r, N) > blowup_threshold:
                blowup = float(times[m + 1])
                snapshots.append(None)
            else:
                snapshots.append(y.copy())
        else:
            if forcing is not None:
                forcing(m + 1)  # keep shared noise streams aligned
            snapshots.append(None)
    return MildSolution(
        times=times,
        snapshots=snapshots,
        r0=F.r0,
        r1=F.r1,
        blowup_time=blowup,
        weighted_trace=_weighted_trace(times, snapshots, t0, F.r0, F.r1, N),
        tau_used=None if blowup is None else blowup - t0,
    )


def fnorm_estimate(
    F: NonlinearitySpec,
    lattice: ModeLattice,
    sample_count: int,
    radius: float,
    t_values=(0.0,),
    seed: int = 0,
    N: int | None = None,
) -> float:
    """Randomized lower bound on the nonlinearity norm: ||F(t,0)|| plus the
    sampled sup of ||F(t,x)-F(t,y)|| / ((1 + ||x||^d + ||y||^d) ||x-y||) over
    pairs in the radius ball of C^{max(beta, gamma)}."""
    if sample_count < 2:
        raise ValueError("need at least two samples")
    from .lattice import random_field

    out = 0.0
    proxy_r = F.proxy_exponent
    for i, term in enumerate(F.terms):
        best = 0.0
        for t in t_values:
            zero = SpectralField(lattice, np.zeros(lattice.n_modes, dtype=np.complex128))
            base = holder_norm(truncate(term.evaluator(t, zero), lattice), term.alpha, N)
            sup_ratio = 0.0
            for s in range(sample_count):
                x = random_field(lattice, seed, index=2 * s + i * 65536, decay=2.0)
                y = random_field(lattice, seed, index=2 * s + 1 + i * 65536, decay=2.0)
                nx = holder_norm(x, proxy_r, N)
                ny = holder_norm(y, proxy_r, N)
                if nx == 0 or ny == 0:
                    continue
                # scale into the radius ball (deterministic spread of radii)
                x = x * (radius * (s + 1) / (sample_count * nx))
                y = y * (radius * (s + 0.5) / (sample_count * ny))
                dxy = holder_norm(x - y, term.gamma, N)
                if dxy == 0:
                    continue
                fx = truncate(term.evaluator(t, x), lattice)
                fy = truncate(term.evaluator(t, y), lattice)
                num = holder_norm(fx - fy, term.alpha, N)
                den = (
                    1.0
                    + holder_norm(x, term.beta, N) ** term.delta
                    + holder_norm(y, term.beta, N) ** term.delta
                ) * dxy
                sup_ratio = max(sup_ratio, num / den)
            best = max(best, base + sup_ratio)
        out += best
    return out


# ---------------------------------------------------------------------------
# Ginzburg-Landau drivers (shifted unknown y = X - V)
# ---------------------------------------------------------------------------

def as_kappa(value):
    """Coefficient spec: a constant or a (t, value) table (piecewise linear)."""
    if callable(value):
        return value
    if np.isscalar(value):
        const = float(value)
        return lambda t: const
    tab = np.asarray(value, dtype=np.float64)
    if tab.ndim != 2 or tab.shape[1] != 2:
        raise ValueError("kappa table must be (t, value) rows")
    ts, vs = tab[:, 0], tab[:, 1]
    return lambda t: float(np.interp(t, ts, vs))


def gl2d_rhs(t, y: SpectralField, V: SpectralField | None, wick_powers: dict, kappas):
    """Shifted polynomial nonlinearity:

        kappa_0 + (kappa_1 + 1)(y + V)
        + sum_{w>=2} kappa_w [ y^w + sum_{k=0}^{w-1} C(w,k) y^k :V^{w-k}: ]

    projected onto y's lattice.  Products are dealiased before truncation, so
    the returned band-K coefficients are exact.  `wick_powers[j]` supplies
    :V^j: for 2 <= j <= n; degree 1 is V itself.
    """
    lat = y.lattice
    kappas = [as_kappa(k) for k in kappas]
    n_power = len(kappas) - 1
    for j in range(2, n_power + 1):
        if j not in wick_powers:
            raise ValueError(f"missing Wick power :V^{j}:")
        if wick_powers[j] is not None and wick_powers[j].lattice.d != lat.d:
            raise ValueError("lattice mismatch in Wick powers")
    if V is not None and V.lattice.d != lat.d:
        raise ValueError("lattice mismatch between y and V")

    out = np.zeros(lat.n_modes, dtype=np.complex128)
    out[lat.center] += kappas[0](t)
    k1p1 = kappas[1](t) + 1.0 if n_power >= 1 else 1.0
    out += k1p1 * y.coeffs
    if V is not None:
        out += k1p1 * truncate(V, lat).coeffs
    y_pows = {0: None, 1: y}
    for w in range(2, n_power + 1):
        kw = kappas[w](t)
        if kw == 0.0:
            continue
        if w not in y_pows:
            y_pows[w] = pointwise_power(y, w)
        term = truncate(y_pows[w], lat).coeffs.copy()
        for k in range(w):
            wick = wick_powers.get(w - k) if w - k >= 2 else V
            if wick is None:
                continue
            binom = math.comb(w, k)
            if k == 0:
                contrib = truncate(wick, lat).coeffs
            else:
                if k not in y_pows:
                    y_pows[k] = pointwise_power(y, k)
                contrib = truncate(dealiased_product(y_pows[k], wick), lat).coeffs
            term = term + binom * contrib
        out += kw * term
    return SpectralField(lat, out)


def gl3d_rhs(t, y: SpectralField, V: SpectralField | None, wick2, k0, k1, k2):
    """Quadratic shifted nonlinearity kappa_2 (y^2 + 2 V y + :V^2:) +
    (kappa_1 + 1)(y + V) + kappa_0; identical to gl2d_rhs at w = 2."""
    return gl2d_rhs(t, y, V, {2: wick2} if wick2 is not None else {2: None}, [k0, k1, k2])


@dataclass
class GLSolution:
    """Reassembled X = y + V snapshots plus the shifted solution's traces."""

    times: np.ndarray
    X: list
    y: list
    blowup_time: float | None
    weighted_traces: dict  # r -> sup (s-t0)^((r-eta)/2) ||y(s)||_{C^r}
    eta: float
    manifest: dict

    @property
    def blew_up(self) -> bool:
        return self.blowup_time is not None


def _gl_spec_exponents(d: int, n_power: int, eta: float, eps_prime: float):
    """(r0, r1, proxy exponents) mirroring the 2D/3D theorem proof choices."""
    r0 = eta / 2.0
    if d == 2:
        if not -2.0 / max(n_power, 1) < eta < 0.0:
            raise ValueError("d=2 needs eta in (-2/n, 0)")
        # eps < 1/n + r0 keeps n(eps - r0) < 1; eps < eps_prime keeps r1 < 1 - eps
        eps = min(min(0.5, 1.0 / n_power + r0) / 2.0, 0.5 * eps_prime)
        alpha, beta, gamma, delta = -eps, eps, eps, float(n_power - 1)
        r1 = 1.0 - eps_prime
    else:
        if not -1.0 < eta < -0.5:
            raise ValueError("d=3 needs eta in (-1, -1/2)")
        # eps below (1+eta)/4 (standing hypothesis), -1/2 - eta (beta >= r0)
        # and eps_prime (r1 < 1/2 - eps)
        eps = min((0.25 + r0 / 2.0) / 2.0, (-0.5 - eta) / 2.0, 0.5 * eps_prime)
        alpha, beta, gamma, delta = -0.5 - eps, -0.25 - eps / 2.0, 0.25 + eps, 1.0
        r1 = 0.5 - eps_prime
    return r0, r1, alpha, beta, gamma, delta


def solve_gl(
    d: int,
    kappas,
    xi: SpectralField,
    lattice: ModeLattice,
    phi,
    seed: int,
    dt: float,
    T: float,
    eta: float = -0.5,
    eps_prime: float = DEFAULT_EPS_PRIME,
    blowup_threshold: float = DEFAULT_BLOWUP_THRESHOLD,
    trace_rs=(0.0, 0.5, 1.0),
    N: int | None = None,
    t0: float = 0.0,
) -> GLSolution:
    """Shifted mild-solution driver: exact OU trajectory for V, exponential
    Euler for y = X - V with the gl2d/gl3d shifted nonlinearity, X = y + V.

    For d = 2 any polynomial degree n = len(kappas) - 1 >= 2 is accepted with
    eta in (-2/n, 0); d = 3 requires n = 2 and eta in (-1, -1/2).  The
    hypotheses are recorded, and violations raise.
    """
    if d not in (2, 3):
        raise ValueError("d must be 2 or 3")
    n_power = len(kappas) - 1
    if n_power < 2:
        raise ValueError("need kappas up to degree >= 2")
    if d == 3 and n_power != 2:
        raise ValueError("d=3 supports quadratic nonlinearities only")
    if lattice.d != d:
        raise ValueError("lattice dimension mismatch")
    r0, r1, alpha, beta, gamma, delta = _gl_spec_exponents(d, n_power, eta, eps_prime)
    kappa_fns = [as_kappa(k) for k in kappas]
    proxy_r = max(beta, gamma)

    steps = round((T - t0) / dt)
    if abs(t0 + steps * dt - T) > 1e-9 * max(1.0, abs(T)):
        raise ValueError("T - t0 must be a multiple of dt")
    times = t0 + dt * np.arange(steps + 1)

    state = stationary_sample(lattice, phi, seed)
    degrees = list(range(2, n_power + 1))

    def wick_fields(st: OUState) -> dict:
        return {j: wick_power_field(st.V, st.phi, j) for j in degrees}

    decay = semigroup_multiplier(lattice, dt)
    phi1 = _phi1_multiplier(lattice, dt)
    y = SpectralField(lattice, truncate(xi, lattice).coeffs - state.V.coeffs)
    X0 = SpectralField(lattice, y.coeffs + state.V.coeffs)
    Xs: list = [X0]
    ys: list = [y.copy()]
    blowup = None
    for m in range(steps):
        if blowup is None:
            rhs = gl2d_rhs(times[m], y, state.V, wick_fields(state), kappa_fns)
            y = SpectralField(lattice, decay * y.coeffs + dt * (phi1 * rhs.coeffs))
        state = ou_step(state, dt)
        if blowup is None:
            finite = bool(np.all(np.isfinite(y.coeffs)))
            if not finite or holder_norm(y, proxy_r, N) > blowup_threshold:
                blowup = float(times[m + 1])
        if blowup is None:
            Xs.append(SpectralField(lattice, y.coeffs + state.V.coeffs))
            ys.append(y.copy())
        else:
            Xs.append(None)
            ys.append(None)
    traces = {
        r: max(
            (
                (t - t0) ** ((r - eta) / 2.0) * holder_norm(f, r, N)
                for t, f in zip(times, ys)
                if f is not None and t > t0
            ),
            default=0.0,
        )
        for r in trace_rs
    }
    manifest = {
        "d": d,
        "n": n_power,
        "eta": eta,
        "r0": r0,
        "r1": r1,
        "exponents": {"alpha": alpha, "beta": beta, "gamma": gamma, "delta": delta},
        "dt": dt,
        "T": T,
        "t0": t0,
        "seed": seed,
        "K": lattice.K,
        "blowup_threshold": blowup_threshold,
        "hypotheses": {
            "d2_eta_range": "(-2/n, 0)",
            "d3_eta_range": "(-1, -1/2)",
        },
    }
    return GLSolution(
        times=times,
        X=Xs,
        y=ys,
        blowup_time=blowup,
        weighted_traces=traces,
        eta=eta,
        manifest=manifest,
    )


def direct_solve_gl(
    kappas,
    xi: SpectralField,
    lattice: ModeLattice,
    phi,
    seed: int,
    dt: float,
    T: float,
    blowup_threshold: float = DEFAULT_BLOWUP_THRESHOLD,
    N: int | None = None,
    t0: float = 0.0,
):
    """Directly step the renormalized quadratic SPDE on the same noise path:

        X <- e^{A dt} X + dt e^{A dt} [ (kappa_1 + 1) X + kappa_2 (X^2 - sigma^2) + kappa_0 ]
             + exact OU noise increment,

    a Lawson-Euler discretization of dX = [Laplace X + kappa_2 (X^2 -
    sigma_phi^2) + kappa_1 X + kappa_0] dt + dW sharing the V-trajectory's
    counter-based noise draws.  Algebraically the continuous equation equals
    the shifted formulation at finite cutoff, so the two solvers differ at
    first order in dt (different drift weights).
    """
    if len(kappas) != 3:
        raise ValueError("direct driver is quadratic: kappas = (k0, k1, k2)")
    k0, k1, k2 = (as_kappa(k) for k in kappas)
    sigma2 = field_variance(phi)
    steps = round((T - t0) / dt)
    times = t0 + dt * np.arange(steps + 1)
    decay = semigroup_multiplier(lattice, dt)
    _, s_half, s_zero = step_scales(lattice, phi, dt)
    half, _, _ = _noise_layout(lattice)
    slots = np.arange(half.size + 1, dtype=np.uint32)

    X = truncate(xi, lattice).copy()
    Xs = [X.copy()]
    blowup = None
    for m in range(steps):
        # the identical noise increment the V trajectory consumes at this step
        z0, z1 = rng.gaussian_pair(
            seed, rng.STREAM_OU, np.uint32(0), np.uint32(m + 1), slots
        )
        xi_step = _hermitian_from_draws(lattice, s_half, s_zero, z0, z1)
        if blowup is None:
            t = times[m]
            sq = truncate(pointwise_power(X, 2), lattice).coeffs
            sq[lattice.center] -= sigma2
            drift = (k1(t) + 1.0) * X.coeffs + k2(t) * sq
            drift[lattice.center] += k0(t)
            X = SpectralField(lattice, decay * (X.coeffs + dt * drift) + xi_step)
            finite = bool(np.all(np.isfinite(X.coeffs)))
            if not finite or holder_norm(X, 0.0, N) > blowup_threshold:
                blowup = float(times[m + 1])
        Xs.append(None if blowup is not None else X.copy())
    return times, Xs, blowup


def continuity_probe(
    F: NonlinearitySpec,
    v: SpectralField,
    perturbations,
    t0: float,
    T: float,
    dt: float,
    blowup_threshold: float = DEFAULT_BLOWUP_THRESHOLD,
    N: int | None = None,
) -> dict:
    """Weighted distances between the base run and perturbed runs.

    `perturbations` is a list of (F_N, v_N) problems, typically with
    decreasing perturbation size.  Runs that blow up before T are flagged and
    excluded.  Distance: sup over shared nodes of
    (t-t0)^(r1-r0) ||x1-xN||_{C^{r1}} + ||x1-xN||_{C^{r0}}.
    """
    base = exp_euler_solve(F, v, t0, T, dt, blowup_threshold, N)
    if base.blew_up:
        raise RuntimeError("base run blew up; shrink T or the data")
    distances = []
    excluded = []
    for i, (F_N, v_N) in enumerate(perturbations):
        run = exp_euler_solve(F_N, v_N, t0, T, dt, blowup_threshold, N)
        if run.blew_up:
            excluded.append({"index": i, "blowup_time": run.blowup_time})
            distances.append(math.inf)
            continue
        distances.append(
            weighted_distance(base.times, base.snapshots, run.snapshots, t0, F.r0, F.r1, N)
        )
    return {"distances": distances, "excluded": excluded}
