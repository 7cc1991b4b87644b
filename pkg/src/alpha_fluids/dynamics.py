"""Time integration of averaged incompressible flow on the 2D torus.

The prognostic variable is the potential vorticity q = (1 - alpha^2 Lap) omega,
which is transported pointwise by the flow: dq/dt + u . grad q = 0 (inviscid),
plus an optional dissipative term,

    viscous : + nu * Lap omega       (the physical dissipation)
    strong  : + nu * Lap q           (the semigroup-friendly strengthened form)

Velocity is recovered by omega = (1 - alpha^2 Lap)^{-1} q, Lap psi = omega,
u = perp_grad psi, with the mean (k = 0) velocity carried separately since q
holds no mean-flow information.

The third-grade extension, whose cubic stress term has no compact vorticity
form, is integrated in primitive (momentum) variables with Leray projection.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .helmholtz import helmholtz_apply, helmholtz_inverse, leray_project
from .spectral import (
    AlphaParam,
    SpectralField,
    TorusGrid2D,
    dealias_half,
    dealias_two_thirds,
    derivative,
    grad_components,
    hermitianize,
    to_physical,
    to_spectral,
)

BLOWUP_LIMIT = 1e12


class BlowUpError(RuntimeError):
    """Integration aborted: state left the finite range. Carries last good time."""

    def __init__(self, t_last_good: float, message: str = ""):
        self.t_last_good = t_last_good
        super().__init__(message or f"blow-up detected; last good time t={t_last_good:g}")


@dataclass(frozen=True)
class DissipationMode:
    """inviscid | viscous(nu) | strong(nu)."""

    variant: str
    nu: float = 0.0

    def __post_init__(self):
        if self.variant not in ("inviscid", "viscous", "strong"):
            raise ValueError(f"unknown dissipation variant {self.variant!r}")
        if self.variant == "inviscid":
            if self.nu != 0.0:
                raise ValueError("inviscid mode carries no viscosity")
        elif not (self.nu > 0.0):
            raise ValueError(f"{self.variant} mode requires nu > 0")

    @classmethod
    def inviscid(cls) -> "DissipationMode":
        return cls("inviscid")

    @classmethod
    def viscous(cls, nu: float) -> "DissipationMode":
        return cls("viscous", nu)

    @classmethod
    def strong(cls, nu: float) -> "DissipationMode":
        return cls("strong", nu)


class VorticityState:
    """Potential vorticity q plus alpha, time, and the mean velocity.

    Immutable value; derived omega / psi / u are computed lazily and cached on
    the instance.  q must have (numerically) zero mean: a nonzero mean vorticity
    is not the curl of any periodic velocity field.
    """

    def __init__(
        self,
        q: SpectralField,
        alpha: AlphaParam,
        t: float = 0.0,
        mean_velocity=(0.0, 0.0),
    ):
        if q.is_vector:
            raise ValueError("q must be a scalar field")
        q = hermitianize(q)
        scale = np.abs(q.coeffs).max()
        if scale > 0.0 and abs(q.coeffs[0, 0]) > 1e-10 * scale:
            raise ValueError("q has a nonzero mean: not realizable as (1-a^2 Lap) curl u")
        self.q = q
        self.alpha = alpha
        self.t = float(t)
        self.mean_velocity = np.array(mean_velocity, dtype=float)
        self._cache: dict[str, SpectralField] = {}

    @property
    def grid(self) -> TorusGrid2D:
        return self.q.grid

    def with_q(self, q: SpectralField, t: float) -> "VorticityState":
        return VorticityState(q, self.alpha, t, self.mean_velocity)

    def omega(self) -> SpectralField:
        if "omega" not in self._cache:
            self._cache["omega"] = helmholtz_inverse(self.q, self.alpha)
        return self._cache["omega"]

    def psi(self) -> SpectralField:
        if "psi" not in self._cache:
            g = self.grid
            ksq = np.where(g.k_sq > 0.0, g.k_sq, 1.0)
            c = -self.omega().coeffs / ksq
            c[0, 0] = 0.0
            self._cache["psi"] = SpectralField(g, c)
        return self._cache["psi"]

    def velocity(self) -> SpectralField:
        if "u" not in self._cache:
            u = derivative(self.psi(), "perp_gradient")
            c = u.coeffs.copy()
            c[:, 0, 0] = self.mean_velocity
            self._cache["u"] = SpectralField(self.grid, c)
        return self._cache["u"]


def velocity_from_q(q: SpectralField, alpha: AlphaParam, mean_velocity=(0.0, 0.0)) -> SpectralField:
    """Invert q -> u: omega = (1-a^2 Lap)^{-1} q, Lap psi = omega, u = perp_grad psi."""
    g = q.grid
    omega = helmholtz_inverse(q, alpha)
    ksq = np.where(g.k_sq > 0.0, g.k_sq, 1.0)
    psi_c = -omega.coeffs / ksq
    psi_c[0, 0] = 0.0
    u = derivative(SpectralField(g, psi_c), "perp_gradient")
    c = u.coeffs.copy()
    c[:, 0, 0] = np.asarray(mean_velocity, dtype=float)
    return SpectralField(g, c)


def _advection(u: SpectralField, q: SpectralField) -> SpectralField:
    """Dealiased pseudospectral u . grad q."""
    g = q.grid
    gq = derivative(q, "gradient")
    up = to_physical(u)
    gqp = to_physical(gq)
    return dealias_two_thirds(to_spectral(g, up[0] * gqp[0] + up[1] * gqp[1]))


def rhs_vorticity(state: VorticityState, mode: DissipationMode) -> SpectralField:
    """dq/dt = -dealias(u . grad q) + {0 | nu Lap omega | nu Lap q}."""
    out = -1.0 * _advection(state.velocity(), state.q)
    if mode.variant == "viscous":
        out = out + mode.nu * derivative(state.omega(), "laplacian")
    elif mode.variant == "strong":
        out = out + mode.nu * derivative(state.q, "laplacian")
    return out


def _cfl_number(state: VorticityState, dt: float) -> float:
    u = to_physical(state.velocity())
    umax = float(np.abs(u).max())
    g = state.grid
    kmax = max(2.0 * math.pi / g.Lx * (g.nx // 3), 2.0 * math.pi / g.Ly * (g.ny // 3))
    return dt * umax * kmax


def step_rk4(state: VorticityState, dt: float, mode: DissipationMode, check_cfl: bool = True) -> VorticityState:
    """One classical RK4 step on qhat; re-hermitianizes and dealiases the result."""
    if dt <= 0.0:
        raise ValueError(f"dt must be positive, got {dt}")
    if check_cfl:
        c = _cfl_number(state, dt)
        if c >= 1.0:
            raise ValueError(f"CFL number {c:.2f} >= 1; reduce dt")
        if c > 0.5:
            warnings.warn(f"CFL number {c:.2f} > 0.5; accuracy degraded", stacklevel=2)
    q, t = state.q, state.t
    k1 = rhs_vorticity(state, mode)
    k2 = rhs_vorticity(state.with_q(q + 0.5 * dt * k1, t + 0.5 * dt), mode)
    k3 = rhs_vorticity(state.with_q(q + 0.5 * dt * k2, t + 0.5 * dt), mode)
    k4 = rhs_vorticity(state.with_q(q + dt * k3, t + dt), mode)
    q_new = q + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    q_new = hermitianize(dealias_two_thirds(q_new))
    scale = np.abs(q_new.coeffs).max()
    if not np.isfinite(scale) or scale > BLOWUP_LIMIT:
        raise BlowUpError(t)
    return state.with_q(q_new, t + dt)


def run(
    state: VorticityState,
    dt: float,
    T: float,
    mode: DissipationMode,
    on_step=None,
) -> VorticityState:
    """Integrate to t = state.t + T (rounded to whole steps); on_step(state) per step."""
    n_steps = max(1, round(T / dt))
    for _ in range(n_steps):
        state = step_rk4(state, dt, mode)
        if on_step is not None:
            on_step(state)
    return state


# -- conserved quantities ------------------------------------------------------------


def _exact_moment(q: SpectralField, n: int) -> float:
    """integral(q^n) with quadrature on a grid fine enough to be alias-free."""
    g = q.grid
    mags = np.abs(q.coeffs)
    scale = mags.max()
    if scale == 0.0:
        return 0.0
    sx = int(np.abs(g.jx)[mags.max(axis=1) > 1e-300].max(initial=0))
    sy = int(np.abs(g.jy)[mags.max(axis=0) > 1e-300].max(initial=0))
    need_x = max(g.nx, 2 * ((n * sx + 2 + 1) // 2))
    need_y = max(g.ny, 2 * ((n * sy + 2 + 1) // 2))
    big = np.zeros((need_x, need_y), dtype=np.complex128)
    big[np.ix_(np.fft.fftfreq(g.nx, 1.0 / g.nx).astype(int), np.fft.fftfreq(g.ny, 1.0 / g.ny).astype(int))] = q.coeffs
    samples = np.fft.ifft2(big * (need_x * need_y)).real
    return float(g.area * (samples**n).mean())


def casimirs(q: SpectralField, nmax: int) -> list[float]:
    """[integral(q), integral(q^2), ..., integral(q^nmax)], alias-free quadrature."""
    if nmax < 1:
        raise ValueError("nmax must be >= 1")
    return [_exact_moment(q, n) for n in range(1, nmax + 1)]


def energy_alpha(state: VorticityState) -> float:
    """E = (1/2) <u, u>_alpha = (1/2) S sum_k (1 + alpha^2 |k|^2) |uhat|^2."""
    u = state.velocity()
    w = 1.0 + state.alpha.alpha_sq * state.grid.k_sq
    return float(0.5 * state.grid.area * np.sum(w * np.abs(u.coeffs) ** 2))


# -- third-grade fluid in momentum form ------------------------------------------------


@dataclass(frozen=True)
class ThirdGradeParams:
    """Material moduli: alpha1 = alpha^2 > 0, alpha2 >= 0, cubic modulus beta >= 0, nu >= 0."""

    alpha1: float
    alpha2: float = 0.0
    beta: float = 0.0
    nu: float = 0.0

    def __post_init__(self):
        if not (self.alpha1 > 0.0):
            raise ValueError("alpha1 must be positive")
        if self.alpha2 < 0.0 or self.beta < 0.0 or self.nu < 0.0:
            raise ValueError("alpha2, beta, nu must be nonnegative")

    @property
    def alpha(self) -> AlphaParam:
        return AlphaParam(math.sqrt(self.alpha1))


def third_grade_rhs(u: SpectralField, p: ThirdGradeParams) -> SpectralField:
    """du/dt for the third-grade system in primitive variables.

    Assembles, pseudospectrally with 2/3 dealiasing (1/2 rule for the cubic
    beta term),

        F = nu Lap u - (u.grad) m + alpha1 (Du)^t Lap u
            + (alpha1 + alpha2) (A Lap u + 2 div[Du Du^t])
            + beta div[Tr(A A^t) A],          m = (1 - alpha1 Lap) u,

    with A = Du + Du^t, then returns Leray[(1 - alpha1 Lap)^{-1} F].  At
    alpha2 = beta = 0 the alpha1-group is a pure gradient and the right side
    reduces to the averaged (second-grade) system.
    """
    if not u.is_vector:
        raise ValueError("third_grade_rhs expects a velocity field")
    g = u.grid
    alpha = p.alpha
    D = grad_components(u)                       # D[i,j] = d_j u^i, physical
    lap_u = to_physical(derivative(u, "laplacian"))
    m = helmholtz_apply(u, alpha)
    grad_m = [to_physical(derivative(m.component(i), "gradient")) for i in range(2)]
    up = to_physical(u)

    F = np.empty((2, g.nx, g.ny))
    for i in range(2):
        # -(u . grad) m
        F[i] = -(up[0] * grad_m[i][0] + up[1] * grad_m[i][1])
        # + alpha1 (Du)^t Lap u : sum_j d_i u^j Lap u^j
        F[i] += p.alpha1 * (D[0][i] * lap_u[0] + D[1][i] * lap_u[1])
    # (alpha1 + alpha2) [ A Lap u + 2 div(Du Du^t) ]
    c = p.alpha1 + p.alpha2
    if c != 0.0:
        A = np.array([[2.0 * D[0][0], D[0][1] + D[1][0]], [D[0][1] + D[1][0], 2.0 * D[1][1]]])
        for i in range(2):
            F[i] += c * (A[i][0] * lap_u[0] + A[i][1] * lap_u[1])
        # div(Du Du^t): T_{ij} = sum_m d_m u^i d_m u^j
        T = np.empty((2, 2, g.nx, g.ny))
        for i in range(2):
            for j in range(2):
                T[i, j] = D[i][0] * D[j][0] + D[i][1] * D[j][1]
        divT = _matrix_divergence(g, T)
        F += 2.0 * c * divT
    out = dealias_two_thirds(to_spectral(g, F))
    if p.nu > 0.0:
        out = out + p.nu * derivative(u, "laplacian")
    if p.beta != 0.0:
        out = out + p.beta * _cubic_stress_divergence(u, g)
    return leray_project(helmholtz_inverse(out, alpha))


def _matrix_divergence(g: TorusGrid2D, T: np.ndarray) -> np.ndarray:
    """(div T)^i = d_j T_{ij} of physical-space matrix samples, back in physical space."""
    out = np.empty((2, g.nx, g.ny))
    for i in range(2):
        row = to_spectral(g, T[i])
        div = derivative(row, "divergence")
        out[i] = to_physical(div)
    return out


def _cubic_stress_divergence(u: SpectralField, g: TorusGrid2D) -> SpectralField:
    """div[Tr(A A^t) A] with the 1/2-rule truncation appropriate to a cubic term."""
    ut = dealias_half(u)
    D = grad_components(ut)
    A = np.array([[2.0 * D[0][0], D[0][1] + D[1][0]], [D[0][1] + D[1][0], 2.0 * D[1][1]]])
    trAA = A[0][0] ** 2 + 2.0 * A[0][1] ** 2 + A[1][1] ** 2
    T = trAA * A
    divT = _matrix_divergence(g, T)
    return dealias_half(to_spectral(g, divT))


def step_third_grade_rk4(u: SpectralField, dt: float, p: ThirdGradeParams) -> SpectralField:
    """RK4 step in momentum variables; keeps the state dealiased and solenoidal."""
    if dt <= 0.0:
        raise ValueError(f"dt must be positive, got {dt}")
    k1 = third_grade_rhs(u, p)
    k2 = third_grade_rhs(u + 0.5 * dt * k1, p)
    k3 = third_grade_rhs(u + 0.5 * dt * k2, p)
    k4 = third_grade_rhs(u + dt * k3, p)
    u_new = u + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    u_new = leray_project(dealias_two_thirds(hermitianize(u_new)))
    if not np.isfinite(np.abs(u_new.coeffs).max()):
        raise BlowUpError(float("nan"), "third-grade integration lost finiteness")
    return u_new
