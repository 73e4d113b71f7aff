"""Mode lattices, spectral fields and transforms on the periodic torus.

A real field u on [0, 2*pi]^d is represented by complex coefficients c_v on
the cutoff box {v in Z^d : |v|_inf <= K} with the convention

    u(x) = sum_v c_v exp(i <v, x>),    c_{-v} = conj(c_v).

The per-mode weight is lambda_v = 1 + |v|_2^2, the eigenvalue of -(Laplace - 1)
on exp(i <v, x>).  Fractional powers, Hoelder-norm proxies and alias-free
pointwise powers are all diagonal or FFT-based in this basis.
"""

from __future__ import annotations

import csv
import io
import struct
from dataclasses import dataclass

import numpy as np
from scipy.fft import next_fast_len

from . import rng

MODE_ORDER_TAG = b"lex1"
_BINARY_MAGIC = b"WGF1"

MAX_DIMENSION = 6


class UndersampledGridError(ValueError):
    """Grid too small to represent all lattice modes."""


class ZeroFactorError(ValueError):
    """A norm ratio was requested with a vanishing factor."""


@dataclass(frozen=True)
class ModeLattice:
    """Cutoff mode set {v : |v|_inf <= K} in lexicographic order.

    modes[i] enumerates v, lam[i] = 1 + |v|^2.  The lexicographic order of the
    full box reverses under v -> -v, so the conjugate partner of index i is
    n_modes - 1 - i.
    """

    d: int
    K: int
    modes: np.ndarray
    lam: np.ndarray

    @property
    def n_modes(self) -> int:
        return self.modes.shape[0]

    @property
    def center(self) -> int:
        """Index of the zero mode."""
        return (self.n_modes - 1) // 2

    def conj_index(self, idx):
        """Index of -v for the mode at idx (vectorized)."""
        return self.n_modes - 1 - np.asarray(idx)

    def mode_index(self, v) -> int:
        """Lexicographic index of a mode v inside the box."""
        v = np.atleast_1d(np.asarray(v, dtype=np.int64))
        if v.shape[-1] != self.d or np.any(np.abs(v) > self.K):
            raise ValueError(f"mode {v} outside lattice box (d={self.d}, K={self.K})")
        side = 2 * self.K + 1
        weights = side ** np.arange(self.d - 1, -1, -1, dtype=np.int64)
        return int(np.dot(v + self.K, weights))

    def half_indices(self) -> np.ndarray:
        """Indices of lexicographically positive modes (one per +-v pair)."""
        return np.arange(self.center + 1, self.n_modes)


def build_lattice(d: int, K: int) -> ModeLattice:
    """Enumerate Z^d cap [-K, K]^d lexicographically and attach lambda weights."""
    if d < 1:
        raise ValueError("dimension d must be >= 1")
    if K < 1:
        raise ValueError("cutoff K must be >= 1")
    if d > MAX_DIMENSION:
        raise ValueError(f"dimensions d > {MAX_DIMENSION} are not supported")
    axes = [np.arange(-K, K + 1, dtype=np.int64)] * d
    grids = np.meshgrid(*axes, indexing="ij")
    modes = np.stack([g.ravel() for g in grids], axis=-1)
    lam = 1.0 + np.sum(modes.astype(np.float64) ** 2, axis=1)
    modes.setflags(write=False)
    lam.setflags(write=False)
    return ModeLattice(d=d, K=K, modes=modes, lam=lam)


@dataclass
class SpectralField:
    """Complex coefficients on a ModeLattice with Hermitian symmetry."""

    lattice: ModeLattice
    coeffs: np.ndarray

    def __post_init__(self):
        self.coeffs = np.asarray(self.coeffs, dtype=np.complex128)
        if self.coeffs.shape != (self.lattice.n_modes,):
            raise ValueError("coefficient array does not match lattice")

    def copy(self) -> "SpectralField":
        return SpectralField(self.lattice, self.coeffs.copy())

    def __add__(self, other: "SpectralField") -> "SpectralField":
        _check_same_lattice(self, other)
        return SpectralField(self.lattice, self.coeffs + other.coeffs)

    def __sub__(self, other: "SpectralField") -> "SpectralField":
        _check_same_lattice(self, other)
        return SpectralField(self.lattice, self.coeffs - other.coeffs)

    def __mul__(self, scalar) -> "SpectralField":
        return SpectralField(self.lattice, self.coeffs * scalar)

    __rmul__ = __mul__


@dataclass(frozen=True)
class CutoffProfile:
    """Spectral multiplier phi: lattice -> [0, 1], symmetric (phi_v = phi_{-v})."""

    lattice: ModeLattice
    values: np.ndarray

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=np.float64)
        if vals.shape != (self.lattice.n_modes,):
            raise ValueError("profile array does not match lattice")
        if np.any(vals < 0.0) or np.any(vals > 1.0):
            raise ValueError("profile values must lie in [0, 1]")
        if not np.array_equal(vals, vals[::-1]):
            raise ValueError("profile must be symmetric under v -> -v")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)


def box_profile(lattice: ModeLattice, radius: int | None = None) -> CutoffProfile:
    """Sharp box indicator 1_{|v|_inf <= radius} (radius defaults to K)."""
    radius = lattice.K if radius is None else radius
    inside = np.all(np.abs(lattice.modes) <= radius, axis=1)
    return CutoffProfile(lattice, inside.astype(np.float64))


def ball_profile(lattice: ModeLattice, radius: float | None = None) -> CutoffProfile:
    """Sharp Euclidean-ball indicator 1_{|v|_2 <= radius}."""
    radius = float(lattice.K if radius is None else radius)
    r2 = np.sum(lattice.modes.astype(np.float64) ** 2, axis=1)
    return CutoffProfile(lattice, (r2 <= radius * radius + 1e-12).astype(np.float64))


def smooth_profile(lattice: ModeLattice, scale: float | None = None) -> CutoffProfile:
    """Gaussian taper exp(-|v|^2 / scale^2) clipped to the box (scale defaults to K)."""
    scale = float(lattice.K if scale is None else scale)
    r2 = np.sum(lattice.modes.astype(np.float64) ** 2, axis=1)
    return CutoffProfile(lattice, np.exp(-r2 / (scale * scale)))


def zero_profile(lattice: ModeLattice) -> CutoffProfile:
    return CutoffProfile(lattice, np.zeros(lattice.n_modes))


PROFILE_BUILDERS = {
    "box": box_profile,
    "ball": ball_profile,
    "smooth": smooth_profile,
    "zero": zero_profile,
}


def make_profile(lattice: ModeLattice, kind: str, radius: float | None = None) -> CutoffProfile:
    try:
        builder = PROFILE_BUILDERS[kind]
    except KeyError:
        raise ValueError(f"unknown profile kind {kind!r}") from None
    if kind == "zero":
        return builder(lattice)
    return builder(lattice, radius)


def _check_same_lattice(a, b):
    la, lb = a.lattice, b.lattice
    if la.d != lb.d or la.K != lb.K:
        raise ValueError(f"lattice mismatch: (d={la.d}, K={la.K}) vs (d={lb.d}, K={lb.K})")


def _check_grid(lattice: ModeLattice, N: int):
    if N < 2 * lattice.K + 1:
        raise UndersampledGridError(
            f"grid N={N} is undersampled for K={lattice.K}; need N >= {2 * lattice.K + 1}"
        )


def _embed(field: SpectralField, N: int) -> np.ndarray:
    lat = field.lattice
    box = np.zeros((N,) * lat.d, dtype=np.complex128)
    idx = tuple((lat.modes % N).T)
    box[idx] = field.coeffs
    return box


def synthesize(field: SpectralField, N: int) -> np.ndarray:
    """Evaluate u(x_j) = sum_v c_v exp(i <v, x_j>) on the uniform N^d grid.

    The grid is x_j = (2*pi/N) * j, j in {0..N-1}^d.  Hermitian symmetry of the
    coefficients makes the result real; the imaginary part (rounding noise) is
    dropped.
    """
    _check_grid(field.lattice, N)
    box = _embed(field, N)
    u = np.fft.ifftn(box) * (N ** field.lattice.d)
    return np.ascontiguousarray(u.real)


def analyze(grid: np.ndarray, lattice: ModeLattice) -> SpectralField:
    """Inverse of synthesize: extract band-limited coefficients from grid values."""
    grid = np.asarray(grid)
    if grid.ndim != lattice.d:
        raise ValueError(f"grid rank {grid.ndim} does not match lattice dimension {lattice.d}")
    N = grid.shape[0]
    if any(s != N for s in grid.shape):
        raise ValueError("grid must be the same size along every axis")
    _check_grid(lattice, N)
    spec = np.fft.fftn(grid) / (N**lattice.d)
    idx = tuple((lattice.modes % N).T)
    return SpectralField(lattice, np.ascontiguousarray(spec[idx]))


def apply_fractional_power(field: SpectralField, r: float) -> SpectralField:
    """Multiply c_v by lambda_v^(r/2): the r/2-fractional power of -(Laplace - 1)."""
    return SpectralField(field.lattice, field.coeffs * field.lattice.lam ** (0.5 * r))


def default_grid(lattice: ModeLattice) -> int:
    return next_fast_len(2 * lattice.K + 1, real=False)


def holder_norm(field: SpectralField, r: float, N: int | None = None) -> float:
    """Grid sup-norm of the r/2-fractional power of the field.

    This is a grid proxy for the C^r norm: an under-estimate of the continuum
    sup that is stable under grid refinement (the band limit is finite).
    """
    N = default_grid(field.lattice) if N is None else N
    u = synthesize(apply_fractional_power(field, r), N)
    return float(np.max(np.abs(u)))


def pointwise_power(field: SpectralField, n: int) -> SpectralField:
    """Alias-free u^n: exact coefficients on the enlarged cutoff n*K.

    The product of n band-K fields is band-n*K, so synthesizing on a grid with
    N >= 2*n*K + 1 makes the returned coefficients exact.
    """
    if n < 1:
        raise ValueError("power n must be >= 1")
    if n == 1:
        return field.copy()
    lat = field.lattice
    out_lat = build_lattice(lat.d, n * lat.K)
    N = next_fast_len(2 * n * lat.K + 1, real=False)
    u = synthesize(field, N)
    return analyze(u**n, out_lat)


def dealiased_product(a: SpectralField, b: SpectralField) -> SpectralField:
    """Alias-free product of two fields; exact coefficients on cutoff K_a + K_b."""
    if a.lattice.d != b.lattice.d:
        raise ValueError("dimension mismatch")
    K_out = a.lattice.K + b.lattice.K
    out_lat = build_lattice(a.lattice.d, K_out)
    N = next_fast_len(2 * K_out + 1, real=False)
    return analyze(synthesize(a, N) * synthesize(b, N), out_lat)


def truncate(field: SpectralField, lattice: ModeLattice) -> SpectralField:
    """Project onto a smaller (or equal) cutoff box on the same torus."""
    if lattice.d != field.lattice.d:
        raise ValueError("dimension mismatch")
    if lattice.K >= field.lattice.K:
        out = np.zeros(lattice.n_modes, dtype=np.complex128)
        inside = np.all(np.abs(lattice.modes) <= field.lattice.K, axis=1)
        out[inside] = field.coeffs
        return SpectralField(lattice, out)
    keep = np.all(np.abs(field.lattice.modes) <= lattice.K, axis=1)
    return SpectralField(lattice, field.coeffs[keep].copy())


def product_norm_ratio(
    u: SpectralField,
    w: SpectralField,
    alpha: float,
    beta: float,
    gamma: float,
    N: int | None = None,
) -> float:
    """||u*w||_{C^gamma} / (||u||_{C^alpha} ||w||_{C^beta}) on the grid proxy.

    Diagnostic for the multiplicative inequality on Hoelder scales; requires
    alpha + beta > 0 and gamma < min(alpha, beta).
    """
    if not alpha + beta > 0:
        raise ValueError("need alpha + beta > 0")
    if not gamma < min(alpha, beta):
        raise ValueError("need gamma < min(alpha, beta)")
    prod = dealiased_product(u, w)
    N = default_grid(u.lattice) if N is None else N
    nu = holder_norm(u, alpha, max(N, default_grid(u.lattice)))
    nw = holder_norm(w, beta, max(N, default_grid(w.lattice)))
    if nu == 0.0 or nw == 0.0:
        raise ZeroFactorError("zero factor")
    return holder_norm(prod, gamma, max(N, default_grid(prod.lattice))) / (nu * nw)


def random_field(
    lattice: ModeLattice,
    seed: int,
    index: int = 0,
    decay: float = 0.0,
    unit_norm_r: float | None = None,
) -> SpectralField:
    """Deterministic Hermitian Gaussian field, E|c_v|^2 proportional to lambda_v^-decay.

    With unit_norm_r set, the field is rescaled to holder_norm(..., r) == 1.
    """
    n = lattice.n_modes
    z0, z1 = rng.gaussian_pair(
        seed, rng.STREAM_FIELD, np.uint32(index), np.uint32(0), np.arange(n, dtype=np.uint32)
    )
    scale = lattice.lam ** (-0.5 * decay)
    coeffs = np.empty(n, dtype=np.complex128)
    half = lattice.half_indices()
    c = lattice.center
    coeffs[half] = (z0[half] + 1j * z1[half]) * (scale[half] / np.sqrt(2.0))
    coeffs[lattice.conj_index(half)] = np.conj(coeffs[half])
    coeffs[c] = z0[c] * scale[c]
    field = SpectralField(lattice, coeffs)
    if unit_norm_r is not None:
        nrm = holder_norm(field, unit_norm_r)
        if nrm == 0.0:
            raise ZeroFactorError("degenerate random field")
        field = field * (1.0 / nrm)
    return field


# ---------------------------------------------------------------------------
# serialization
# ---------------------------------------------------------------------------

def field_to_bytes(field: SpectralField) -> bytes:
    """Binary layout: magic, uint32 d, uint32 K, 4-byte order tag, then
    interleaved (re, im) little-endian float64 in lattice order."""
    lat = field.lattice
    head = _BINARY_MAGIC + struct.pack("<II", lat.d, lat.K) + MODE_ORDER_TAG
    inter = np.empty(2 * lat.n_modes, dtype="<f8")
    inter[0::2] = field.coeffs.real
    inter[1::2] = field.coeffs.imag
    return head + inter.tobytes()


def field_from_bytes(data: bytes) -> SpectralField:
    if data[:4] != _BINARY_MAGIC:
        raise ValueError("not a wickgl field blob")
    d, K = struct.unpack("<II", data[4:12])
    tag = data[12:16]
    if tag != MODE_ORDER_TAG:
        raise ValueError(f"unsupported mode order tag {tag!r}")
    lat = build_lattice(d, K)
    inter = np.frombuffer(data[16:], dtype="<f8")
    if inter.size != 2 * lat.n_modes:
        raise ValueError("field blob has wrong length")
    return SpectralField(lat, inter[0::2] + 1j * inter[1::2])


def save_field(field: SpectralField, path) -> None:
    with open(path, "wb") as fh:
        fh.write(field_to_bytes(field))


def load_field(path) -> SpectralField:
    with open(path, "rb") as fh:
        return field_from_bytes(fh.read())


def field_to_csv(field: SpectralField) -> str:
    """CSV text form with columns v1..vd,re,im."""
    lat = field.lattice
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow([f"v{i + 1}" for i in range(lat.d)] + ["re", "im"])
    for v, c in zip(lat.modes, field.coeffs):
        writer.writerow([*map(int, v), f"{c.real:.17g}", f"{c.imag:.17g}"])
    return buf.getvalue()


def field_from_csv(text: str) -> SpectralField:
    rows = list(csv.reader(io.StringIO(text)))
    header, body = rows[0], rows[1:]
    d = len(header) - 2
    modes = np.array([[int(x) for x in row[:d]] for row in body], dtype=np.int64)
    K = int(np.max(np.abs(modes)))
    lat = build_lattice(d, K)
    if len(body) != lat.n_modes:
        raise ValueError("CSV does not enumerate a full cutoff box")
    coeffs = np.zeros(lat.n_modes, dtype=np.complex128)
    for row in body:
        idx = lat.mode_index([int(x) for x in row[:d]])
        coeffs[idx] = float(row[d]) + 1j * float(row[d + 1])
    return SpectralField(lat, coeffs)
