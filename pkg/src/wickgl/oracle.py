"""Closed-form Fourier correlation oracles and lattice-sum checkers.

Everything here is deterministic arithmetic: n-fold constrained lattice sums
(computed by zero-padded FFT convolution, exact for band-limited data),
their shell-resolved refinements grouped by the integer value sum_i lambda_i,
closed-form double time integrals, two-sided convolution bound checks, the
existence/regularity regime table, and divergence scanners.

Normalization: every correlation value equals the coefficient-space
covariance E[conj(c_{k1}) c'_{k2}] in the convention c_v = (2pi)^-d <g_v, .>,
so Monte Carlo estimates from the trajectory modules compare directly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.fft import next_fast_len

from .lattice import CutoffProfile, ModeLattice, build_lattice

# Above this many complex elements the shell-resolved FFT array is refused;
# the Gauss-Legendre route (divergence scans) or a smaller K must be used.
SHELL_ELEMENT_LIMIT = 2**25


class ShellMemoryError(MemoryError):
    """Shell-resolved convolution would exceed the in-memory element budget."""


def lambda_of(v) -> float:
    """lambda_v = 1 + |v|^2 for any integer vector."""
    v = np.asarray(v, dtype=np.float64)
    return float(1.0 + np.sum(v * v))


def _as_mode(v, d: int) -> tuple:
    v = np.atleast_1d(np.asarray(v, dtype=np.int64))
    if v.shape != (d,):
        raise ValueError(f"mode {v} is not a length-{d} integer vector")
    return tuple(int(x) for x in v)


def _embed_base(base: np.ndarray, lat: ModeLattice, shape) -> np.ndarray:
    arr = np.zeros(shape, dtype=np.float64)
    arr[tuple((lat.modes % np.array(shape)).T)] = base
    return arr


def _nfold_conv_targets(lat: ModeLattice, bases: list[np.ndarray], targets: list[tuple]):
    """Values of (b_1 * ... * b_n)[v] for each target v, |v|_inf <= n*K.

    Zero-padded FFT convolution; exact (to rounding) because the supports are
    band-limited and the grid holds the full band n*K.
    """
    n = len(bases)
    N = next_fast_len(2 * n * lat.K + 1, real=False)
    shape = (N,) * lat.d
    if all(b is bases[0] for b in bases):
        spec = np.fft.fftn(_embed_base(bases[0], lat, shape)) ** n
    else:
        spec = np.fft.fftn(_embed_base(bases[0], lat, shape))
        for b in bases[1:]:
            spec = spec * np.fft.fftn(_embed_base(b, lat, shape))
    full = np.fft.ifftn(spec)
    out = np.empty(len(targets), dtype=np.float64)
    for i, t in enumerate(targets):
        idx = tuple(int(x) % N for x in t)
        out[i] = full[idx].real
    return out


def _shell_table_targets(lat: ModeLattice, bases: list[np.ndarray], targets: list[tuple]):
    """Shell-resolved convolution: A[t, s] = sum over l_1+..+l_n = target with
    sum_i lambda_{l_i} = s of prod_i bases_i[l_i].

    Implemented as an (d+1)-dimensional FFT convolution with the integer
    lambda value riding along as an extra axis.
    """
    n = len(bases)
    s_single = 1 + lat.d * lat.K**2
    s_len = n * s_single + 1
    N = next_fast_len(2 * n * lat.K + 1, real=False)
    S = next_fast_len(s_len, real=False)
    if (N**lat.d) * S > SHELL_ELEMENT_LIMIT:
        raise ShellMemoryError(
            f"shell table needs {(N ** lat.d) * S:,} elements "
            f"(limit {SHELL_ELEMENT_LIMIT:,}); reduce K or use the scan route"
        )
    shape = (N,) * lat.d + (S,)
    lam_int = np.rint(lat.lam).astype(np.int64)
    mode_idx = tuple((lat.modes % N).T)

    def embed(base):
        arr = np.zeros(shape, dtype=np.float64)
        arr[mode_idx + (lam_int,)] = base
        return arr

    if all(b is bases[0] for b in bases):
        spec = np.fft.fftn(embed(bases[0])) ** n
    else:
        spec = np.fft.fftn(embed(bases[0]))
        for b in bases[1:]:
            spec = spec * np.fft.fftn(embed(b))
    full = np.fft.ifftn(spec).real
    shells = np.arange(s_len, dtype=np.float64)
    table = np.empty((len(targets), s_len), dtype=np.float64)
    for i, t in enumerate(targets):
        idx = tuple(int(x) % N for x in t)
        table[i] = full[idx][:s_len]
    return shells, table


def nfold_lambda_sum(d: int, v, n: int, weights, K: int, shell_kernel=None) -> float:
    """sum over l_1 + ... + l_n = v, |l_i|_inf <= K of prod_i lambda_{l_i}^{-w_i},
    each term optionally multiplied by shell_kernel(lambda_v, sum_i lambda_{l_i}).

    `weights` is a scalar or a per-factor list.  The kernel must accept numpy
    arrays in its second argument.
    """
    if n < 1:
        raise ValueError("need n >= 1 factors")
    if K < 1:
        raise ValueError("need K >= 1")
    v = _as_mode(v, d)
    if any(abs(x) > n * K for x in v):
        return 0.0
    lat = build_lattice(d, K)
    w = np.broadcast_to(np.asarray(weights, dtype=np.float64), (n,))
    first = lat.lam ** (-w[0])
    bases = [first if w[i] == w[0] else lat.lam ** (-w[i]) for i in range(n)]
    if shell_kernel is None:
        return float(_nfold_conv_targets(lat, bases, [v])[0])
    shells, table = _shell_table_targets(lat, bases, [v])
    kern = np.asarray(shell_kernel(lambda_of(v), shells), dtype=np.float64)
    return float(np.dot(table[0], kern))


# ---------------------------------------------------------------------------
# closed-form double time integrals
# ---------------------------------------------------------------------------

def time_integral_aver(c, t0: float, t1: float, t2: float):
    """int_{t0}^{t1} int_{t0}^{t2} exp(-c |s1 - s2|) ds2 ds1 (c > 0, t0 <= t1, t2).

    Vectorized over c."""
    c = np.asarray(c, dtype=np.float64)
    if np.any(c <= 0.0):
        raise ValueError("rate c must be positive")
    if t0 > min(t1, t2):
        raise ValueError("need t0 <= min(t1, t2)")
    val = (
        2.0 * (min(t1, t2) - t0) / c
        + (np.exp(-c * (t1 - t0)) + np.exp(-c * (t2 - t0)) - 1.0 - np.exp(-c * abs(t2 - t1)))
        / c**2
    )
    return val if val.ndim else float(val)


def _expm1_over(x):
    """expm1(x)/x with the x -> 0 limit; vectorized."""
    x = np.asarray(x, dtype=np.float64)
    out = np.ones_like(x)
    nz = x != 0.0
    out[nz] = np.expm1(x[nz]) / x[nz]
    return out


def time_integral_conv(a, b, t1: float, t2: float):
    """int_{-inf}^{t1} int_{-inf}^{t2} exp(-a(t1-s1+t2-s2) - b|s1-s2|) ds2 ds1.

    Requires a, b > 0 and t1 <= t2.  Evaluated in a form that is continuous
    across a = b (the removable singularity is handled via expm1).  At
    t1 = t2 the value is 1 / (a (a + b)).  Vectorized over a and b.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if np.any(a <= 0.0) or np.any(b <= 0.0):
        raise ValueError("rates a, b must be positive")
    if t1 > t2:
        raise ValueError("need t1 <= t2")
    gap = t2 - t1
    ea = np.exp(-a * gap)
    # (e^{-b gap} - e^{-a gap})/(a - b) = gap e^{-a gap} expm1((a-b) gap)/((a-b) gap)
    diff = gap * ea * _expm1_over((a - b) * gap)
    val = ea / (a * (a + b)) + diff / (a + b)
    return val if val.ndim else float(val)


# ---------------------------------------------------------------------------
# correlation oracles
# ---------------------------------------------------------------------------

def _pair_base(phi1: CutoffProfile, phi2: CutoffProfile) -> np.ndarray:
    if phi1.lattice.d != phi2.lattice.d or phi1.lattice.K != phi2.lattice.K:
        raise ValueError("profiles live on different lattices")
    return phi1.values * phi2.values / phi1.lattice.lam


def correlation_wick(d, K, phi1, phi2, n1, n2, k1, k2, tau: float) -> float:
    """Coefficient-space correlation of Wick powers at time lag tau:

    n1! delta_{n1,n2} delta_{k1,k2} sum over l_1+..+l_n = k1 of
    prod_i phi1 phi2 exp(-lambda |tau|) / lambda, and the degenerate
    delta_{n1,n2} delta_{k1,k2} delta_{k1,0} when n1*n2 = 0.
    """
    k1 = _as_mode(k1, d)
    k2 = _as_mode(k2, d)
    if n1 != n2 or k1 != k2:
        return 0.0
    if n1 == 0:
        return 1.0 if all(x == 0 for x in k1) else 0.0
    lat = phi1.lattice
    base = _pair_base(phi1, phi2) * np.exp(-lat.lam * abs(tau))
    if any(abs(x) > n1 * K for x in k1):
        return 0.0
    val = _nfold_conv_targets(lat, [base] * n1, [k1])[0]
    return math.factorial(n1) * float(val)


def correlation_awp(d, K, phi1, phi2, n1, n2, k1, k2, t0, t1, t2) -> float:
    """Coefficient-space correlation of averaged Wick powers over [t0, t1] x [t0, t2].

    n1! delta delta sum (prod phi1 phi2 / prod lambda) multiplied per shell by
    the closed-form double time integral with rate sum_i lambda_{l_i}.  For
    n1 = n2 = 0 the integrand is the constant 1, so the value is
    (t1-t0)(t2-t0) delta_{k1,k2} delta_{k1,0}.
    """
    if t0 > min(t1, t2):
        raise ValueError("need t0 <= min(t1, t2)")
    k1 = _as_mode(k1, d)
    k2 = _as_mode(k2, d)
    if n1 != n2 or k1 != k2:
        return 0.0
    if n1 == 0:
        if all(x == 0 for x in k1):
            return (t1 - t0) * (t2 - t0)
        return 0.0
    if any(abs(x) > n1 * K for x in k1):
        return 0.0
    lat = phi1.lattice
    base = _pair_base(phi1, phi2)
    shells, table = _shell_table_targets(lat, [base] * n1, [k1])
    active = shells >= n1  # lambda >= 1 per factor; below is FFT rounding noise
    kern = np.zeros_like(shells)
    kern[active] = time_integral_aver(shells[active], t0, t1, t2)
    return math.factorial(n1) * float(np.dot(table[0], kern))


def correlation_cwp(d, K, phi1, phi2, n1, n2, k1, k2, t1, t2) -> float:
    """Coefficient-space correlation of convolutional Wick powers at (t1, t2).

    n1! delta delta sum (prod phi1 phi2 / prod lambda) multiplied per shell by
    the semigroup-damped double time integral with rates
    (lambda_{k1}, sum_i lambda_{l_i}); delta delta delta_{k1,0} when n1*n2=0.
    """
    if t1 > t2:
        t1, t2 = t2, t1
    k1 = _as_mode(k1, d)
    k2 = _as_mode(k2, d)
    if n1 != n2 or k1 != k2:
        return 0.0
    if n1 == 0:
        return 1.0 if all(x == 0 for x in k1) else 0.0
    if any(abs(x) > n1 * K for x in k1):
        return 0.0
    lat = phi1.lattice
    base = _pair_base(phi1, phi2)
    shells, table = _shell_table_targets(lat, [base] * n1, [k1])
    active = shells >= n1  # lambda >= 1 per factor; below is FFT rounding noise
    kern = np.zeros_like(shells)
    kern[active] = time_integral_conv(lambda_of(k1), shells[active], t1, t2)
    return math.factorial(n1) * float(np.dot(table[0], kern))


def cutoff_difference_variance(kind: str, d, K, phi, psi, n, k, t0=None, t=None) -> float:
    """E |<difference of Wick objects for cutoffs phi, psi> at mode k|^2.

    kind WP: n! sum (prod phi - prod psi)^2 / prod lambda over l_1+..+l_n = k.
    kind AWP: the same weighted per shell by the [t0, t]^2 time integral.
    kind CWP: weighted by 1 / (lambda_k (lambda_k + sum lambda)), the
    equal-time value (independent of t).
    """
    kind = kind.upper()
    if kind not in ("WP", "AWP", "CWP"):
        raise ValueError("kind must be WP, AWP or CWP")
    if n < 1:
        raise ValueError("need degree n >= 1")
    k = _as_mode(k, d)
    lat = phi.lattice
    if psi.lattice.d != lat.d or psi.lattice.K != lat.K:
        raise ValueError("profiles live on different lattices")
    if any(abs(x) > n * K for x in k):
        return 0.0
    b_pp = phi.values**2 / lat.lam
    b_pq = phi.values * psi.values / lat.lam
    b_qq = psi.values**2 / lat.lam
    if kind == "WP":
        vals = [
            _nfold_conv_targets(lat, [b] * n, [k])[0] for b in (b_pp, b_pq, b_qq)
        ]
    else:
        if kind == "AWP":
            if t0 is None or t is None:
                raise ValueError("AWP difference needs t0 and t")
            if t0 > t:
                raise ValueError("need t0 <= t")

            def kernel(lam_k, s):
                return time_integral_aver(s, t0, t, t)

        else:

            def kernel(lam_k, s):
                return 1.0 / (lam_k * (lam_k + s))

        lam_k = lambda_of(k)
        vals = []
        for b in (b_pp, b_pq, b_qq):
            shells, table = _shell_table_targets(lat, [b] * n, [k])
            active = shells >= n
            kern = np.zeros_like(shells)
            kern[active] = kernel(lam_k, shells[active])
            vals.append(float(np.dot(table[0], kern)))
    out = math.factorial(n) * (vals[0] - 2.0 * vals[1] + vals[2])
    # the summand is a perfect square; tiny negative values are rounding noise
    return max(float(out), 0.0)


# ---------------------------------------------------------------------------
# two-sided discrete convolution bounds
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TwosidedReport:
    """Exact evaluations of the three two-sided convolution bounds at cutoff K."""

    d: int
    alpha: float
    beta: float
    v: tuple
    K: int
    holds: tuple  # six booleans: (lo1, hi1, lo2, hi2, lo3, hi3)
    middles: tuple  # the three middle sums
    bounds: tuple  # ((lo1, hi1), (lo2, hi2), (lo3, hi3))

    @property
    def all_hold(self) -> bool:
        return all(self.holds)


def twosided_bound_check(d: int, alpha: float, beta: float, v, K: int) -> TwosidedReport:
    """Evaluate the three two-sided bounds for sum_k 1/(lambda_k^a lambda_{v-k}^b)
    split by |k| <= |v|/2, |v|/2 < |k| <= 2|v|, |k| > 2|v| (Euclidean balls,
    all sums truncated to |k|_inf <= K) and report the six comparisons.

    For v = 0 the lower-bound base region of the middle comparison is empty
    (the proof's strict-inequality region), so the degenerate comparisons hold
    as 0 <= 0 <= 0.
    """
    if alpha < 0 or beta < 0:
        raise ValueError("alpha, beta must be nonnegative")
    v = _as_mode(v, d)
    lat = build_lattice(d, K)
    kk = lat.modes.astype(np.float64)
    norm_k = np.sqrt(np.sum(kk * kk, axis=1))
    norm_v = math.sqrt(sum(x * x for x in v))
    lam_k = lat.lam
    vk = np.asarray(v, dtype=np.float64) - kk
    lam_vk = 1.0 + np.sum(vk * vk, axis=1)
    lam_v = lambda_of(v)
    term = lam_k ** (-alpha) * lam_vk ** (-beta)

    reg_small = norm_k <= 0.5 * norm_v
    reg_mid = (norm_k > 0.5 * norm_v) & (norm_k <= 2.0 * norm_v)
    reg_large = norm_k > 2.0 * norm_v

    s1_mid = float(np.sum(term[reg_small]))
    s1_base = float(np.sum(lam_k[reg_small] ** (-alpha)))
    lo1 = 4.0**-beta * lam_v**-beta * s1_base
    hi1 = 4.0**beta * lam_v**-beta * s1_base

    s2_mid = float(np.sum(term[reg_mid]))
    if norm_v == 0.0:
        base_lo2 = 0.0
    else:
        base_lo2 = float(np.sum(lam_k[norm_k <= norm_v / 3.0] ** (-beta)))
    base_hi2 = float(np.sum(lam_k[norm_k <= 3.0 * norm_v] ** (-beta)))
    lo2 = 4.0**-alpha * lam_v**-alpha * base_lo2
    hi2 = 4.0**alpha * lam_v**-alpha * base_hi2

    s3_mid = float(np.sum(term[reg_large]))
    s3_base = float(np.sum(lam_k[reg_large] ** (-(alpha + beta))))
    lo3 = 4.0**-beta * s3_base
    hi3 = 4.0**beta * s3_base

    eps = 1e-12  # absorb float rounding in the comparisons; the facts are exact
    holds = (
        lo1 <= s1_mid * (1 + eps) + eps,
        s1_mid <= hi1 * (1 + eps) + eps,
        lo2 <= s2_mid * (1 + eps) + eps,
        s2_mid <= hi2 * (1 + eps) + eps,
        lo3 <= s3_mid * (1 + eps) + eps,
        s3_mid <= hi3 * (1 + eps) + eps,
    )
    return TwosidedReport(
        d=d,
        alpha=alpha,
        beta=beta,
        v=v,
        K=K,
        holds=holds,
        middles=(s1_mid, s2_mid, s3_mid),
        bounds=((lo1, hi1), (lo2, hi2), (lo3, hi3)),
    )


def tail_growth_map(d: int, alpha: float, beta: float, v, K: int) -> float:
    """lambda_v^beta * sum over |k|_2 > 2 |v|_2, |k|_inf <= K of lambda_k^-alpha.

    Finite-truncation probe of the growth-rate lemmas: bounded in v over the
    scan box iff beta <= alpha - d/2.
    """
    v = _as_mode(v, d)
    lat = build_lattice(d, K)
    kk = lat.modes.astype(np.float64)
    norm_k2 = np.sum(kk * kk, axis=1)
    norm_v2 = float(sum(x * x for x in v))
    sel = norm_k2 > 4.0 * norm_v2
    return lambda_of(v) ** beta * float(np.sum(lat.lam[sel] ** (-alpha)))


# ---------------------------------------------------------------------------
# regime classification
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RegimeReport:
    """Existence flags and supremal spatial-regularity exponents per (n, d)."""

    n: int
    d: int
    wp_exists: bool
    awp_exists: bool
    cwp_exists: bool
    wp_sup_exponent: float | None
    awp_sup_exponent: float | None
    cwp_sup_exponent: float | None


def regime_classify(n: int, d: int) -> RegimeReport:
    """Existence and regularity regimes of WP/AWP/CWP of degree n in dimension d.

    AWP and CWP exist iff (n+1)/(n-1) > d/2 (the boundary counts as
    non-existent); WP exists iff d = 2, or d = 3 with n = 2.  Exponents are the
    supremal Hoelder indices: WP 2-d, AWP 1 + 1/n - d/2 + (n-1) min(1 + 1/n -
    d/2, 0), CWP 2 + n(2-d)/2.
    """
    if n < 2:
        raise ValueError("Wick degree n must be >= 2")
    if d < 2:
        raise ValueError("dimension d must be >= 2")
    wp = (d == 2) or (d == 3 and n == 2)
    # integer comparison of (n+1)/(n-1) > d/2
    awp = 2 * (n + 1) > d * (n - 1)
    base = Fraction(1) + Fraction(1, n) - Fraction(d, 2)
    return RegimeReport(
        n=n,
        d=d,
        wp_exists=wp,
        awp_exists=awp,
        cwp_exists=awp,
        wp_sup_exponent=float(2 - d) if wp else None,
        awp_sup_exponent=float(base + (n - 1) * min(base, Fraction(0))) if awp else None,
        cwp_sup_exponent=float(2 + Fraction(n * (2 - d), 2)) if awp else None,
    )


# ---------------------------------------------------------------------------
# divergence scans
# ---------------------------------------------------------------------------

def _wick_partial_sum(d: int, v: tuple, n: int, K: int) -> float:
    """sum over l_1+..+l_n = v, |l_i|_inf <= K of 1/prod lambda."""
    lat = build_lattice(d, K)
    base = 1.0 / lat.lam
    return float(_nfold_conv_targets(lat, [base] * n, [v])[0])


def sum_tool_partial(d: int, v, n: int, K: int) -> float:
    """sum over l_1+..+l_n = v, |l_i|_inf <= K of 1/(prod lambda (lambda_v + sum lambda)).

    The rational shell kernel is integrated exactly: 1/(lambda_v + s) =
    int_0^1 u^(lambda_v + s - 1) du turns the sum into the integral of a
    polynomial in u whose values come from one FFT convolution per quadrature
    node, and Gauss-Legendre at half the polynomial degree is exact.
    """
    v = _as_mode(v, d)
    lat = build_lattice(d, K)
    lam_v = lambda_of(v)
    s_max = n * (1 + d * K**2)
    degree = int(s_max + lam_v - 1)
    q = degree // 2 + 1
    nodes, weights = leggauss(q)
    u = 0.5 * (nodes + 1.0)
    w = 0.5 * weights
    N = next_fast_len(2 * n * K + 1, real=False)
    shape = (N,) * d
    mode_idx = tuple((lat.modes % N).T)
    idx_v = tuple(int(x) % N for x in v)
    total = 0.0
    for ui, wi in zip(u, w):
        base = np.zeros(shape, dtype=np.float64)
        base[mode_idx] = ui**lat.lam / lat.lam
        conv = np.fft.ifftn(np.fft.fftn(base) ** n)
        total += wi * ui ** (lam_v - 1.0) * conv[idx_v].real
    return float(total)


def divergence_scan(kind: str, n: int, d: int, v, K_list) -> dict:
    """Partial sums of the divergence kernels along an increasing cutoff list.

    kind WP uses sum 1/prod lambda; kinds AWP and CWP use the
    1/(prod lambda (lambda_v + sum lambda)) kernel.  Returns the partial sums,
    their increments, and a trend verdict: 'decaying' when increments shrink
    monotonically to below half the first one, 'non_decaying' when the last
    increment stays above half the first, else 'inconclusive'.
    """
    kind = kind.upper()
    if kind not in ("WP", "AWP", "CWP"):
        raise ValueError("kind must be WP, AWP or CWP")
    K_list = [int(k) for k in K_list]
    if any(b <= a for a, b in zip(K_list, K_list[1:])) or len(K_list) < 2:
        raise ValueError("K list must be strictly increasing with >= 2 entries")
    v = _as_mode(v, d)
    sums = []
    for K in K_list:
        if kind == "WP":
            sums.append(_wick_partial_sum(d, v, n, K))
        else:
            sums.append(sum_tool_partial(d, v, n, K))
    increments = [b - a for a, b in zip(sums, sums[1:])]
    first, last = increments[0], increments[-1]
    decreasing = all(b <= a * (1 + 1e-12) for a, b in zip(increments, increments[1:]))
    if decreasing and last < 0.5 * first:
        verdict = "decaying"
    elif last >= 0.5 * first:
        verdict = "non_decaying"
    else:
        verdict = "inconclusive"
    return {
        "kind": kind,
        "n": n,
        "d": d,
        "v": list(v),
        "K_list": K_list,
        "partial_sums": sums,
        "increments": increments,
        "verdict": verdict,
    }
