"""Hermite polynomials, Wick powers and expectations of their products.

The n-th Wick power of a centered Gaussian Z with variance s^2 > 0 is
s^n H_n(Z/s) with probabilists' Hermite H_n (and Z^n when s = 0).  Field Wick
powers apply this pointwise on a dealiased grid.  Expectations of products of
Wick powers reduce to a combinatorial sum over pair-contraction multiplicity
tables (generalized Wick theorem).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import combinations

import numpy as np

from .lattice import (
    CutoffProfile,
    SpectralField,
    analyze,
    build_lattice,
    pointwise_power,
    synthesize,
)
from scipy.fft import next_fast_len

HERMITE_DEGREE_GUARD = 60


def hermite_eval(n: int, x):
    """Probabilists' Hermite H_n(x) by the stable three-term recurrence.

    H_{k+1}(x) = x H_k(x) - k H_{k-1}(x), H_0 = 1, H_1 = x.  Accepts scalars
    or arrays; degrees above 60 are rejected (coefficients overflow float64
    range for large |x| long before that, but 60 keeps the recurrence sane).
    """
    if n < 0:
        raise ValueError("Hermite degree must be >= 0")
    if n > HERMITE_DEGREE_GUARD:
        raise ValueError(f"Hermite degree {n} above guard {HERMITE_DEGREE_GUARD}")
    x = np.asarray(x, dtype=np.float64)
    h_prev = np.ones_like(x)
    if n == 0:
        return h_prev if h_prev.ndim else float(h_prev)
    h = x.copy()
    for k in range(1, n):
        h, h_prev = x * h - k * h_prev, h
    return h if h.ndim else float(h)


def wick_power_scalar(z, var: float, n: int):
    """n-th Wick power of a value z of a centered Gaussian with variance var."""
    if var < 0:
        raise ValueError("variance must be nonnegative")
    z = np.asarray(z, dtype=np.float64)
    if var == 0.0:
        out = z**n
    else:
        s = math.sqrt(var)
        out = s**n * hermite_eval(n, z / s)
    return out if np.ndim(out) else float(out)


def field_variance(phi: CutoffProfile) -> float:
    """Stationary pointwise variance sum_v phi_v^2 / lambda_v."""
    return float(np.sum(phi.values**2 / phi.lattice.lam))


def wick_power_field(V: SpectralField, phi: CutoffProfile, n: int) -> SpectralField:
    """Pointwise Wick power of a cutoff field, renormalized by field_variance(phi).

    Synthesizes on the dealiasing grid (N >= 2nK+1), applies the scalar Wick
    power, and reads the exact band-nK coefficients back.
    """
    if n < 0:
        raise ValueError("Wick degree must be >= 0")
    lat = V.lattice
    if n == 0:
        out = np.zeros(lat.n_modes, dtype=np.complex128)
        out[lat.center] = 1.0
        return SpectralField(lat, out)
    if n == 1:
        return V.copy()
    var = field_variance(phi)
    out_lat = build_lattice(lat.d, n * lat.K)
    N = next_fast_len(2 * n * lat.K + 1, real=False)
    u = synthesize(V, N)
    return analyze(wick_power_scalar(u, var, n), out_lat)


@dataclass(frozen=True)
class PairingIndex:
    """Contraction multiplicities alpha over the pair set {(i, j) : i < j}."""

    m: int
    alpha: tuple

    def pairs(self):
        return tuple(combinations(range(self.m), 2))

    def degree_vector(self) -> tuple:
        """Theta(alpha): per-factor totals of incident multiplicities."""
        deg = [0] * self.m
        for (i, j), a in zip(self.pairs(), self.alpha):
            deg[i] += a
            deg[j] += a
        return tuple(deg)


def enumerate_theta_preimage(m: int, n) -> list[PairingIndex]:
    """All multiplicity tables alpha with Theta(alpha) == n, by pruned DFS.

    Each alpha_(i,j) is bounded by min of the remaining degrees at i and j,
    and positions whose pair list is exhausted must have zero remainder.
    An odd total degree yields the empty list.
    """
    if m < 1:
        raise ValueError("need at least one factor")
    if m > 6:
        raise ValueError("enumeration capped at m <= 6 factors")
    n = tuple(int(x) for x in n)
    if len(n) != m or any(x < 0 for x in n):
        raise ValueError("degree vector must have m nonnegative entries")
    if sum(n) > 16:
        raise ValueError("enumeration capped at total degree <= 16")
    if sum(n) % 2 != 0:
        return []
    pairs = list(combinations(range(m), 2))
    # last_pair_of[i]: index in `pairs` after which position i receives nothing
    last_pair_of = [-1] * m
    for p, (i, j) in enumerate(pairs):
        last_pair_of[i] = p
        last_pair_of[j] = p
    out: list[PairingIndex] = []
    alpha = [0] * len(pairs)
    remaining = list(n)

    def walk(p: int):
        if p == len(pairs):
            if all(r == 0 for r in remaining):
                out.append(PairingIndex(m, tuple(alpha)))
            return
        i, j = pairs[p]
        cap = min(remaining[i], remaining[j])
        for a in range(cap + 1):
            alpha[p] = a
            remaining[i] -= a
            remaining[j] -= a
            dead = (last_pair_of[i] == p and remaining[i] != 0) or (
                last_pair_of[j] == p and remaining[j] != 0
            )
            if not dead:
                walk(p + 1)
            remaining[i] += a
            remaining[j] += a
        alpha[p] = 0

    if pairs:
        walk(0)
    elif all(x == 0 for x in n):
        out.append(PairingIndex(m, ()))
    return out


def _check_covariance(cov: np.ndarray, m: int, tol: float = 1e-10) -> np.ndarray:
    cov = np.asarray(cov, dtype=np.float64)
    if cov.shape != (m, m):
        raise ValueError(f"covariance must be {m}x{m}")
    if not np.allclose(cov, cov.T, atol=tol, rtol=0.0):
        raise ValueError("covariance must be symmetric")
    # deterministic PSD check: smallest eigenvalue of the symmetrized matrix
    min_eig = float(np.linalg.eigvalsh(0.5 * (cov + cov.T))[0])
    if min_eig < -tol:
        raise ValueError(f"covariance not positive semidefinite (min eig {min_eig:.3e})")
    return cov


def wick_expectation_product(n, cov) -> float:
    """E[ prod_i :Z_i^{n_i}: ] for a centered Gaussian vector with given covariance.

    Equals sum over alpha with Theta(alpha) = n of (n!/alpha!) prod
    cov[i, j]^alpha_(i,j); only off-diagonal covariances enter.  A single
    factor (m = 1) gives 0 for every positive degree.
    """
    n = tuple(int(x) for x in n)
    m = len(n)
    cov = _check_covariance(cov, m)
    total = 0.0
    for pairing in enumerate_theta_preimage(m, n):
        coeff = 1.0
        for ni in n:
            coeff *= math.factorial(ni)
        term = coeff
        for (i, j), a in zip(pairing.pairs(), pairing.alpha):
            term /= math.factorial(a)
            term *= cov[i, j] ** a
        total += term
    return total
