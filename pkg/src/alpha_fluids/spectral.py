"""Spectral fields on the flat 2D torus.

Real scalar/vector fields are stored as full complex Fourier coefficient
arrays with Hermitian symmetry, coeffs[-k] = conj(coeffs[k]).  The forward
transform divides by nx*ny so that coefficients coincide with analytic
Fourier coefficients: a single mode cos(x) has coefficient 1/2 at k=(1,0)
and k=(-1,0).

Conventions
-----------
* Coefficient arrays are indexed [jx, jy] (x along axis 0), numpy fft
  ordering: j = 0, 1, ..., n/2-1, -n/2, ..., -1.
* Wavenumbers are k = (2*pi/L) * j.
* The Nyquist mode j = -n/2 is zeroed after every derivative (its odd
  derivative is not representable).
* Discrete Parseval with this normalization: mean(f^2) = sum_k |fhat(k)|^2,
  i.e. (1/S) * integral(f^2) = sum |fhat|^2 with S = Lx*Ly.

Fields are immutable values; all operations return new fields.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

TWO_PI = 2.0 * math.pi


class TorusGrid2D:
    """Collocation grid on [0,Lx) x [0,Ly) with precomputed wavenumber tables."""

    def __init__(self, nx: int, ny: int, Lx: float = TWO_PI, Ly: float = TWO_PI):
        if nx < 4 or ny < 4:
            raise ValueError(f"grid must be at least 4x4, got {nx}x{ny}")
        if nx % 2 or ny % 2:
            raise ValueError(f"grid sizes must be even, got {nx}x{ny}")
        if Lx <= 0 or Ly <= 0:
            raise ValueError("domain periods must be positive")
        self.nx = int(nx)
        self.ny = int(ny)
        self.Lx = float(Lx)
        self.Ly = float(Ly)
        # integer mode numbers in fft ordering
        self.jx = np.fft.fftfreq(nx, d=1.0 / nx).astype(np.int64)
        self.jy = np.fft.fftfreq(ny, d=1.0 / ny).astype(np.int64)
        # radian wavenumbers, broadcastable to (nx, ny)
        self.kx = (TWO_PI / self.Lx) * self.jx[:, None].astype(float)
        self.ky = (TWO_PI / self.Ly) * self.jy[None, :].astype(float)
        self.k_sq = self.kx**2 + self.ky**2
        for a in (self.jx, self.jy, self.kx, self.ky, self.k_sq):
            a.flags.writeable = False

    @property
    def area(self) -> float:
        return self.Lx * self.Ly

    @property
    def shape(self) -> tuple[int, int]:
        return (self.nx, self.ny)

    def nodes(self) -> tuple[np.ndarray, np.ndarray]:
        """Physical mesh (X, Y), each (nx, ny), indexing='ij'."""
        x = np.arange(self.nx) * (self.Lx / self.nx)
        y = np.arange(self.ny) * (self.Ly / self.ny)
        return np.meshgrid(x, y, indexing="ij")

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, TorusGrid2D)
            and self.shape == other.shape
            and self.Lx == other.Lx
            and self.Ly == other.Ly
        )

    def __hash__(self) -> int:
        return hash((self.nx, self.ny, self.Lx, self.Ly))

    def __repr__(self) -> str:
        return f"TorusGrid2D({self.nx}x{self.ny}, L=({self.Lx:g},{self.Ly:g}))"


def make_grid(nx: int, ny: int, Lx: float = TWO_PI, Ly: float = TWO_PI) -> TorusGrid2D:
    """Build a torus grid; rejects odd or tiny sizes and nonpositive periods."""
    return TorusGrid2D(nx, ny, Lx, Ly)


@dataclass(frozen=True)
class AlphaParam:
    """Filtering length scale alpha >= 0; alpha = 0 degenerates to L^2/Euler."""

    alpha: float

    def __post_init__(self):
        if not (self.alpha >= 0.0) or not math.isfinite(self.alpha):
            raise ValueError(f"alpha must be finite and >= 0, got {self.alpha}")

    @property
    def alpha_sq(self) -> float:
        return self.alpha * self.alpha


@dataclass(frozen=True)
class SpectralField:
    """Fourier coefficients of a real field; rank 'scalar' or 'vector'.

    coeffs shape is (nx, ny) for scalars and (2, nx, ny) for vectors.
    """

    grid: TorusGrid2D
    coeffs: np.ndarray = field(repr=False)

    def __post_init__(self):
        c = np.asarray(self.coeffs, dtype=np.complex128)
        if c.shape not in ((self.grid.nx, self.grid.ny), (2, self.grid.nx, self.grid.ny)):
            raise ValueError(f"coefficient shape {c.shape} does not match grid {self.grid.shape}")
        if not c.flags.owndata or c.flags.writeable:
            c = c.copy()
        c.flags.writeable = False
        object.__setattr__(self, "coeffs", c)

    @property
    def rank(self) -> str:
        return "vector" if self.coeffs.ndim == 3 else "scalar"

    @property
    def is_vector(self) -> bool:
        return self.coeffs.ndim == 3

    def component(self, i: int) -> "SpectralField":
        if not self.is_vector:
            raise ValueError("component() requires a vector field")
        return SpectralField(self.grid, self.coeffs[i])

    # -- value-type arithmetic ------------------------------------------------
    def _check_compat(self, other: "SpectralField"):
        if self.grid != other.grid:
            raise ValueError("fields live on different grids")
        if self.coeffs.shape != other.coeffs.shape:
            raise ValueError("rank mismatch")

    def __add__(self, other: "SpectralField") -> "SpectralField":
        self._check_compat(other)
        return SpectralField(self.grid, self.coeffs + other.coeffs)

    def __sub__(self, other: "SpectralField") -> "SpectralField":
        self._check_compat(other)
        return SpectralField(self.grid, self.coeffs - other.coeffs)

    def __mul__(self, c: float) -> "SpectralField":
        return SpectralField(self.grid, self.coeffs * float(c))

    __rmul__ = __mul__

    def __neg__(self) -> "SpectralField":
        return SpectralField(self.grid, -self.coeffs)


def zero_field(grid: TorusGrid2D, rank: str = "scalar") -> SpectralField:
    shape = (grid.nx, grid.ny) if rank == "scalar" else (2, grid.nx, grid.ny)
    return SpectralField(grid, np.zeros(shape, dtype=np.complex128))


# -- transforms ----------------------------------------------------------------


def to_spectral(grid: TorusGrid2D, samples: np.ndarray) -> SpectralField:
    """Forward transform of real samples, (nx,ny) or (2,nx,ny); divides by nx*ny."""
    s = np.asarray(samples, dtype=float)
    if s.shape not in ((grid.nx, grid.ny), (2, grid.nx, grid.ny)):
        raise ValueError(f"sample shape {s.shape} does not match grid {grid.shape}")
    coeffs = np.fft.fft2(s, axes=(-2, -1)) / (grid.nx * grid.ny)
    return SpectralField(grid, coeffs)


def to_physical(f: SpectralField) -> np.ndarray:
    """Inverse transform to real samples."""
    n = f.grid.nx * f.grid.ny
    return np.fft.ifft2(f.coeffs * n, axes=(-2, -1)).real


def transform(obj, direction: str = "forward", grid: TorusGrid2D | None = None):
    """Directional dispatcher: forward needs (samples, grid=...), inverse a field."""
    if direction == "forward":
        if grid is None:
            raise ValueError("forward transform needs the target grid")
        return to_spectral(grid, obj)
    if direction == "inverse":
        return to_physical(obj)
    raise ValueError(f"unknown direction {direction!r}")


# -- differentiation -----------------------------------------------------------

_SCALAR_TO_SCALAR = ("x", "y", "laplacian")
_SCALAR_TO_VECTOR = ("gradient", "perp_gradient")
_VECTOR_TO_SCALAR = ("divergence", "curl")


def _zero_nyquist(grid: TorusGrid2D, c: np.ndarray) -> np.ndarray:
    c[..., grid.nx // 2, :] = 0.0
    c[..., :, grid.ny // 2] = 0.0
    return c


def derivative(f: SpectralField, op: str) -> SpectralField:
    """Exact spectral differentiation; Nyquist coefficients are zeroed.

    op: 'x' | 'y' | 'laplacian' (rank-preserving),
        'gradient' | 'perp_gradient' (scalar -> vector),
        'divergence' | 'curl' (vector -> scalar).
    curl u = dx(u2) - dy(u1); perp_gradient(psi) = (-dy(psi), dx(psi)).
    """
    g = f.grid
    c = f.coeffs
    if op in _SCALAR_TO_SCALAR:
        if op == "x":
            out = 1j * g.kx * c
        elif op == "y":
            out = 1j * g.ky * c
        else:
            out = -g.k_sq * c
        return SpectralField(g, _zero_nyquist(g, out))
    if op in _SCALAR_TO_VECTOR:
        if f.is_vector:
            raise ValueError(f"{op} expects a scalar field")
        dx = 1j * g.kx * c
        dy = 1j * g.ky * c
        out = np.stack([-dy, dx]) if op == "perp_gradient" else np.stack([dx, dy])
        return SpectralField(g, _zero_nyquist(g, out))
    if op in _VECTOR_TO_SCALAR:
        if not f.is_vector:
            raise ValueError(f"{op} expects a vector field")
        if op == "divergence":
            out = 1j * g.kx * c[0] + 1j * g.ky * c[1]
        else:
            out = 1j * g.kx * c[1] - 1j * g.ky * c[0]
        return SpectralField(g, _zero_nyquist(g, out))
    raise ValueError(f"unknown derivative op {op!r}")


def grad_components(u: SpectralField) -> np.ndarray:
    """Physical-space velocity gradient samples G[i,j] = d_j u^i, shape (2,2,nx,ny)."""
    if not u.is_vector:
        raise ValueError("grad_components expects a vector field")
    g = u.grid
    out = np.empty((2, 2, g.nx, g.ny))
    for i in range(2):
        ci = u.coeffs[i]
        out[i, 0] = to_physical(SpectralField(g, _zero_nyquist(g, 1j * g.kx * ci)))
        out[i, 1] = to_physical(SpectralField(g, _zero_nyquist(g, 1j * g.ky * ci)))
    return out


# -- dealiasing ----------------------------------------------------------------


def dealias_modes(f: SpectralField, jx_max: int, jy_max: int) -> SpectralField:
    """Zero all coefficients with |jx| > jx_max or |jy| > jy_max."""
    g = f.grid
    keep = (np.abs(g.jx)[:, None] <= jx_max) & (np.abs(g.jy)[None, :] <= jy_max)
    return SpectralField(g, np.where(keep, f.coeffs, 0.0))


def dealias_two_thirds(f: SpectralField) -> SpectralField:
    """2/3-rule truncation for quadratic pseudospectral products."""
    return dealias_modes(f, f.grid.nx // 3, f.grid.ny // 3)


def dealias_half(f: SpectralField) -> SpectralField:
    """1/2-rule truncation for cubic products.

    Keeps |j| <= (n-1)//4: with that cutoff a triple product of retained modes
    (support 3K <= n - 1 - K) aliases only into the zeroed band, so the
    retained coefficients are exact.
    """
    return dealias_modes(f, (f.grid.nx - 1) // 4, (f.grid.ny - 1) // 4)


# -- inner products and norms ---------------------------------------------------


def divergence_defect(u: SpectralField) -> float:
    """Relative size of k . uhat(k) against |k||uhat(k)|; 0 for solenoidal fields."""
    g = u.grid
    if not u.is_vector:
        raise ValueError("divergence_defect expects a vector field")
    dot = np.abs(g.kx * u.coeffs[0] + g.ky * u.coeffs[1])
    scale = np.sqrt(g.k_sq) * np.sqrt(np.abs(u.coeffs[0]) ** 2 + np.abs(u.coeffs[1]) ** 2)
    smax = scale.max()
    if smax == 0.0:
        return 0.0
    return float(dot.max() / smax)


def _pad2x_samples(f: SpectralField) -> np.ndarray:
    """Samples of f on the doubled grid (exact band-limited interpolation)."""
    g = f.grid
    nx2, ny2 = 2 * g.nx, 2 * g.ny
    shape = f.coeffs.shape[:-2] + (nx2, ny2)
    big = np.zeros(shape, dtype=np.complex128)
    ix = np.fft.fftfreq(g.nx, d=1.0 / g.nx).astype(int)
    iy = np.fft.fftfreq(g.ny, d=1.0 / g.ny).astype(int)
    big[..., ix[:, None], iy[None, :]] = f.coeffs
    return np.fft.ifft2(big * (nx2 * ny2), axes=(-2, -1)).real


def inner_product_alpha(
    u: SpectralField, v: SpectralField, alpha: AlphaParam, method: str = "auto"
) -> float:
    """Metric pairing <u,v> = int(u.v) + (alpha^2/2) int(Def-tensor contraction).

    For divergence-free fields this is computed mode-wise as
    S * sum_k (1 + alpha^2 |k|^2) uhat(k).conj(vhat(k)); for general fields the
    deformation-tensor quadrature (exact via padded sampling) is used.  The two
    routes agree on solenoidal fields.
    """
    if u.grid != v.grid:
        raise ValueError("fields live on different grids")
    if not (u.is_vector and v.is_vector):
        raise ValueError("inner_product_alpha expects vector fields")
    if method == "auto":
        solenoidal = divergence_defect(u) < 1e-10 and divergence_defect(v) < 1e-10
        method = "fourier" if solenoidal else "deformation"
    g = u.grid
    if method == "fourier":
        w = 1.0 + alpha.alpha_sq * g.k_sq
        acc = np.sum(w * (u.coeffs * np.conj(v.coeffs)).real)
        return float(g.area * acc)
    if method != "deformation":
        raise ValueError(f"unknown method {method!r}")
    # Def-tensor quadrature on the doubled grid: exact for band-limited inputs
    du = [_pad2x_samples(derivative(u.component(i), ax)) for i in range(2) for ax in ("x", "y")]
    dv = [_pad2x_samples(derivative(v.component(i), ax)) for i in range(2) for ax in ("x", "y")]
    us = _pad2x_samples(u)
    vs = _pad2x_samples(v)
    # A = grad + grad^T entries: A11 = 2 d1u1, A12 = d2u1 + d1u2, A22 = 2 d2u2
    a11, a12, a22 = 2.0 * du[0], du[1] + du[2], 2.0 * du[3]
    b11, b12, b22 = 2.0 * dv[0], dv[1] + dv[2], 2.0 * dv[3]
    integrand = (
        us[0] * vs[0]
        + us[1] * vs[1]
        + 0.5 * alpha.alpha_sq * (a11 * b11 + 2.0 * a12 * b12 + a22 * b22)
    )
    return float(g.area * integrand.mean())


def norm_alpha(u: SpectralField, alpha: AlphaParam) -> float:
    return math.sqrt(max(inner_product_alpha(u, u, alpha), 0.0))


def norm_hs(f: SpectralField, s: float) -> float:
    """Sobolev H^s norm, (S * sum (1+|k|^2)^s |fhat|^2)^(1/2), summed over components."""
    w = (1.0 + f.grid.k_sq) ** s
    acc = np.sum(w * np.abs(f.coeffs) ** 2)
    return math.sqrt(f.grid.area * float(acc))


def hermitian_asymmetry(f: SpectralField) -> float:
    """max |coeffs(k) - conj(coeffs(-k))|; 0 for coefficients of a real field."""
    c = f.coeffs
    flipped = np.roll(c[..., ::-1, ::-1], shift=(1, 1), axis=(-2, -1))
    return float(np.abs(c - np.conj(flipped)).max())


def hermitianize(f: SpectralField) -> SpectralField:
    """Project onto Hermitian-symmetric (real-field) coefficients."""
    c = f.coeffs
    flipped = np.roll(c[..., ::-1, ::-1], shift=(1, 1), axis=(-2, -1))
    return SpectralField(f.grid, 0.5 * (c + np.conj(flipped)))


# -- constructors for tests and initial data ------------------------------------


def cosine_field(grid: TorusGrid2D, k: tuple[int, int], amplitude: float = 1.0, phase: float = 0.0) -> SpectralField:
    """Scalar field amplitude * cos(k . x + phase), sampled exactly."""
    X, Y = grid.nodes()
    kx = TWO_PI * k[0] / grid.Lx
    ky = TWO_PI * k[1] / grid.Ly
    return to_spectral(grid, amplitude * np.cos(kx * X + ky * Y + phase))


def field_from_modes(grid: TorusGrid2D, modes: dict, rank: str = "scalar") -> SpectralField:
    """Build a field from {(jx,jy): coefficient}; input must be Hermitian-consistent."""
    f = zero_field(grid, rank)
    c = f.coeffs.copy()
    c.flags.writeable = True
    for (jx, jy), val in modes.items():
        c[..., jx % grid.nx, jy % grid.ny] = val
    out = SpectralField(grid, c)
    if hermitian_asymmetry(out) > 1e-12 * (1.0 + np.abs(c).max()):
        raise ValueError("mode table is not Hermitian-symmetric (field would be complex)")
    return out


def mode(f: SpectralField, jx: int, jy: int):
    """Coefficient at integer wavevector (jx, jy); (2,) array for vector fields."""
    return f.coeffs[..., jx % f.grid.nx, jy % f.grid.ny]
