"""Shallow-water geodesic flow on the interval and the circle.

Eulerian nonlocal form on [0,1] (homogeneous Dirichlet) or [0,L) (periodic):

    u_t = -u u_x - (1 - dxx)^{-1} dx (u^2 + u_x^2 / 2),

equivalent to u_t - u_txx + 3 u u_x - 2 u_x u_xx - u u_xxx = 0.  Lagrangian
spray form on the Dirichlet interval:

    eta'' = -[(1 - dxx)^{-1} dx (u^2 + u_x^2/2)] o eta,   u = eta' o eta^{-1},

with the velocity reconstructed through shape-preserving (monotone cubic)
interpolation of the graph (eta_i, etadot_i).  Uniform grids and second-order
centered differences throughout; composition with interpolation is what rules
out a purely spectral representation.

The H^1 covariant derivative, its bilinear operator, and the sectional
curvature at the identity close out the 1D geometry.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.interpolate import PchipInterpolator

from .helmholtz import DirichletGrid1D, helmholtz_solve_dirichlet_1d
from .spectral import AlphaParam

TWO_PI = 2.0 * math.pi


class MonotonicityError(RuntimeError):
    """Particle crossing: eta stopped being strictly increasing."""

    def __init__(self, t: float):
        self.t = t
        super().__init__(
            f"eta lost strict monotonicity at t={t:g}: the configuration left the "
            "diffeomorphism group (possible breakdown)"
        )


@dataclass(frozen=True)
class CHState:
    """Velocity samples; Dirichlet stores the n interior nodes of [0,1],
    periodic the n nodes of [0,L)."""

    u: np.ndarray
    bc: str
    t: float = 0.0
    L: float = TWO_PI

    def __post_init__(self):
        if self.bc not in ("dirichlet", "periodic"):
            raise ValueError(f"unknown boundary condition {self.bc!r}")
        u = np.asarray(self.u, dtype=float)
        if u.ndim != 1 or u.size < 3:
            raise ValueError("u must be a 1D array with at least 3 samples")
        if not np.isfinite(u).all():
            raise ValueError("u must be finite")
        u = u.copy()
        u.flags.writeable = False
        object.__setattr__(self, "u", u)
        if self.bc == "dirichlet":
            object.__setattr__(self, "L", 1.0)

    @property
    def n(self) -> int:
        return self.u.size

    def nodes(self) -> np.ndarray:
        if self.bc == "dirichlet":
            return DirichletGrid1D(self.n).x
        return np.arange(self.n) * (self.L / self.n)

    def with_u(self, u: np.ndarray, t: float) -> "CHState":
        return CHState(u, self.bc, t, self.L)


def _dirichlet_full(u: np.ndarray) -> np.ndarray:
    """Interior samples extended by the pinned boundary zeros."""
    return np.concatenate([[0.0], u, [0.0]])


def _deriv_full(full: np.ndarray, h: float) -> np.ndarray:
    """Second-order derivative on the closed interval: centered inside,
    one-sided at the ends."""
    d = np.empty_like(full)
    d[1:-1] = (full[2:] - full[:-2]) / (2.0 * h)
    d[0] = (-3.0 * full[0] + 4.0 * full[1] - full[2]) / (2.0 * h)
    d[-1] = (3.0 * full[-1] - 4.0 * full[-2] + full[-3]) / (2.0 * h)
    return d


def _deriv_periodic(u: np.ndarray, h: float) -> np.ndarray:
    return (np.roll(u, -1) - np.roll(u, 1)) / (2.0 * h)


def _nonlocal_derivative_periodic(w: np.ndarray, L: float) -> np.ndarray:
    """(1 - dxx)^{-1} dx w on the circle, spectrally (exact inverse)."""
    n = w.size
    k = 2.0 * np.pi * np.fft.rfftfreq(n, d=L / n)
    what = np.fft.rfft(w)
    return np.fft.irfft(1j * k / (1.0 + k * k) * what, n=n)


def ch_rhs_eulerian(state: CHState) -> np.ndarray:
    """du/dt in the nonlocal form; boundary conditions are built in."""
    if state.bc == "periodic":
        h = state.L / state.n
        ux = _deriv_periodic(state.u, h)
        w = state.u**2 + 0.5 * ux * ux
        return -state.u * ux - _nonlocal_derivative_periodic(w, state.L)
    grid = DirichletGrid1D(state.n)
    h = grid.h
    full = _dirichlet_full(state.u)
    ux_full = _deriv_full(full, h)
    w_full = full**2 + 0.5 * ux_full**2
    dw_interior = (w_full[2:] - w_full[:-2]) / (2.0 * h)
    b = helmholtz_solve_dirichlet_1d(dw_interior, AlphaParam(1.0), grid)
    return -state.u * ux_full[1:-1] - b


def step_ch_rk4(state: CHState, dt: float) -> CHState:
    if dt <= 0.0:
        raise ValueError(f"dt must be positive, got {dt}")
    u, t = state.u, state.t
    k1 = ch_rhs_eulerian(state)
    k2 = ch_rhs_eulerian(state.with_u(u + 0.5 * dt * k1, t + 0.5 * dt))
    k3 = ch_rhs_eulerian(state.with_u(u + 0.5 * dt * k2, t + 0.5 * dt))
    k4 = ch_rhs_eulerian(state.with_u(u + dt * k3, t + dt))
    return state.with_u(u + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4), t + dt)


def run_ch(state: CHState, dt: float, T: float, on_step=None) -> CHState:
    for _ in range(max(1, round(T / dt))):
        state = step_ch_rk4(state, dt)
        if on_step is not None:
            on_step(state)
    return state


def ch_energy(state: CHState) -> float:
    """Trapezoidal integral(u^2 + u_x^2): the squared metric norm, conserved
    by the inviscid flow (boundary nodes contribute nothing under Dirichlet)."""
    if state.bc == "periodic":
        h = state.L / state.n
        ux = _deriv_periodic(state.u, h)
        return float(h * np.sum(state.u**2 + ux**2))
    grid = DirichletGrid1D(state.n)
    full = _dirichlet_full(state.u)
    ux = _deriv_full(full, grid.h)
    return float(np.trapezoid(full**2 + ux**2, dx=grid.h))


# -- Lagrangian spray form ----------------------------------------------------------------


@dataclass(frozen=True)
class CHLagrangianState:
    """Particle positions eta (strictly increasing, endpoints pinned to 0 and 1)
    and velocities etadot, stored on the full node set including the endpoints."""

    eta: np.ndarray
    etadot: np.ndarray
    t: float = 0.0

    def __post_init__(self):
        eta = np.asarray(self.eta, dtype=float)
        etadot = np.asarray(self.etadot, dtype=float)
        if eta.shape != etadot.shape or eta.ndim != 1 or eta.size < 5:
            raise ValueError("eta and etadot must be matching 1D arrays (>= 5 nodes)")
        if eta[0] != 0.0 or eta[-1] != 1.0:
            raise ValueError("eta must pin the endpoints: eta(0)=0, eta(1)=1")
        if not (np.diff(eta) > 0.0).all():
            raise MonotonicityError(float(self.t))
        eta = eta.copy()
        etadot = etadot.copy()
        eta.flags.writeable = False
        etadot.flags.writeable = False
        object.__setattr__(self, "eta", eta)
        object.__setattr__(self, "etadot", etadot)

    @property
    def n_interior(self) -> int:
        return self.eta.size - 2


def lagrangian_from_velocity(state: CHState) -> CHLagrangianState:
    """Identity configuration moving with the given Dirichlet velocity profile."""
    if state.bc != "dirichlet":
        raise ValueError("the spray form is implemented on the Dirichlet interval")
    nodes = np.concatenate([[0.0], state.nodes(), [1.0]])
    vel = _dirichlet_full(state.u)
    return CHLagrangianState(nodes, vel, state.t)


def eulerian_from_lagrangian(ls: CHLagrangianState, n: int) -> CHState:
    """u = etadot o eta^{-1} sampled on the uniform interior grid by monotone
    cubic interpolation of the graph (eta_i, etadot_i)."""
    grid = DirichletGrid1D(n)
    u = PchipInterpolator(ls.eta, ls.etadot)(grid.x)
    return CHState(u, "dirichlet", ls.t)


def _spray_acceleration(eta: np.ndarray, etadot: np.ndarray, n_work: int) -> np.ndarray:
    """-(1 - dxx)^{-1} dx (u^2 + u_x^2/2) evaluated at the particles.

    The Eulerian field is rebuilt on a uniform work grid from the particle
    graph, the bracket is solved there, and the result is carried back to the
    particles by the same interpolation.
    """
    grid = DirichletGrid1D(n_work)
    h = grid.h
    u_interp = PchipInterpolator(eta, etadot)
    full = np.concatenate([[0.0], u_interp(grid.x), [0.0]])
    ux_full = _deriv_full(full, h)
    w_full = full**2 + 0.5 * ux_full**2
    dw = (w_full[2:] - w_full[:-2]) / (2.0 * h)
    b = helmholtz_solve_dirichlet_1d(dw, AlphaParam(1.0), grid)
    b_at = PchipInterpolator(grid.x, b, extrapolate=True)
    return -b_at(eta)


def ch_spray_step(ls: CHLagrangianState, dt: float) -> CHLagrangianState:
    """RK4 on (eta, etadot); aborts with MonotonicityError on particle crossing."""
    if dt <= 0.0:
        raise ValueError(f"dt must be positive, got {dt}")
    n_work = ls.n_interior

    def accel(eta, etadot):
        if not (np.diff(eta) > 0.0).all():
            raise MonotonicityError(ls.t)
        a = _spray_acceleration(eta, etadot, n_work)
        a[0] = a[-1] = 0.0
        return a

    e, v = ls.eta, ls.etadot
    a1 = accel(e, v)
    e2, v2 = e + 0.5 * dt * v, v + 0.5 * dt * a1
    a2 = accel(e2, v2)
    e3, v3 = e + 0.5 * dt * v2, v + 0.5 * dt * a2
    a3 = accel(e3, v3)
    e4, v4 = e + dt * v3, v + dt * a3
    a4 = accel(e4, v4)
    eta_new = e + (dt / 6.0) * (v + 2.0 * v2 + 2.0 * v3 + v4)
    etadot_new = v + (dt / 6.0) * (a1 + 2.0 * a2 + 2.0 * a3 + a4)
    eta_new[0], eta_new[-1] = 0.0, 1.0
    etadot_new[0] = etadot_new[-1] = 0.0
    return CHLagrangianState(eta_new, etadot_new, ls.t + dt)


def run_spray(ls: CHLagrangianState, dt: float, T: float, on_step=None) -> CHLagrangianState:
    for _ in range(max(1, round(T / dt))):
        ls = ch_spray_step(ls, dt)
        if on_step is not None:
            on_step(ls)
    return ls


# -- 1D geometry at the identity ------------------------------------------------------------


def frakU_1d(u: np.ndarray, v: np.ndarray, bc: str, L: float = TWO_PI) -> np.ndarray:
    """(1 - dxx)^{-1} dx (u v + u_x v_x / 2): the H^1 metric's bilinear operator."""
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    if u.shape != v.shape:
        raise ValueError("u and v live on different grids")
    if bc == "periodic":
        h = L / u.size
        w = u * v + 0.5 * _deriv_periodic(u, h) * _deriv_periodic(v, h)
        return _nonlocal_derivative_periodic(w, L)
    grid = DirichletGrid1D(u.size)
    fu, fv = _dirichlet_full(u), _dirichlet_full(v)
    w = fu * fv + 0.5 * _deriv_full(fu, grid.h) * _deriv_full(fv, grid.h)
    dw = (w[2:] - w[:-2]) / (2.0 * grid.h)
    return helmholtz_solve_dirichlet_1d(dw, AlphaParam(1.0), grid)


def cd_1d(x: np.ndarray, y: np.ndarray, bc: str, L: float = TWO_PI) -> np.ndarray:
    """Covariant derivative at the identity: (d_x y) . x + frakU(x, y)."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if bc == "periodic":
        yx = _deriv_periodic(y, L / y.size)
    else:
        yx = _deriv_full(_dirichlet_full(y), DirichletGrid1D(y.size).h)[1:-1]
    return x * yx + frakU_1d(x, y, bc, L)


def _bracket_1d(x, y, bc, L):
    if bc == "periodic":
        h = L / len(x)
        return x * _deriv_periodic(y, h) - y * _deriv_periodic(x, h)
    h = DirichletGrid1D(len(x)).h
    dy = _deriv_full(_dirichlet_full(y), h)[1:-1]
    dx = _deriv_full(_dirichlet_full(x), h)[1:-1]
    return x * dy - y * dx


def inner_h1(u: np.ndarray, v: np.ndarray, bc: str, L: float = TWO_PI) -> float:
    """integral(u v + u_x v_x): the right-invariant metric at the identity."""
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    if bc == "periodic":
        h = L / u.size
        return float(h * np.sum(u * v + _deriv_periodic(u, h) * _deriv_periodic(v, h)))
    grid = DirichletGrid1D(u.size)
    fu, fv = _dirichlet_full(u), _dirichlet_full(v)
    return float(
        np.trapezoid(fu * fv + _deriv_full(fu, grid.h) * _deriv_full(fv, grid.h), dx=grid.h)
    )


def ch_curvature_op(x, y, z, bc: str, L: float = TWO_PI) -> np.ndarray:
    """R~(x,y)z = cd_x cd_y z - cd_y cd_x z - cd_{[x,y]} z (same orientation as 2D)."""
    cd = lambda a, b: cd_1d(a, b, bc, L)
    return cd(x, cd(y, z)) - cd(y, cd(x, z)) - cd(_bracket_1d(x, y, bc, L), z)


def ch_sectional_curvature(x, y, bc: str, L: float = TWO_PI) -> float:
    """<R~(x,y)y, x>_{H^1} over the Gram determinant; scale-invariant."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    xx = inner_h1(x, x, bc, L)
    yy = inner_h1(y, y, bc, L)
    xy = inner_h1(x, y, bc, L)
    gram = xx * yy - xy * xy
    if gram <= 1e-12 * xx * yy:
        raise ValueError("directions are numerically collinear")
    return inner_h1(ch_curvature_op(x, y, y, bc, L), x, bc, L) / gram
