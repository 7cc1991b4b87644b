"""Experiment drivers: orchestration, sweeps, and artifact emission.

Every experiment is launched from a validated RunConfig and writes, into its
output directory, one or more CSV time series / summary tables plus a flat
key=value manifest (config echo, config hash, code version, wall time, final
diagnostics, completion status).  Numeric CSV cells carry 17 significant
digits so a generic reader recovers the values exactly.  Data artifacts are
byte-identical across reruns of the same (config, seed) in single-threaded
mode; the manifest additionally records wall time, which is exempt.

Exit status contract: 0 success, 1 usage/config error, 2 numerical abort
(blow-up or particle-crossing guard), with partial outputs flagged INCOMPLETE
in the manifest.
"""

from __future__ import annotations

import hashlib
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from . import __version__
from .blobs import BlobEnsemble, blob_diagnostics, blob_ring, run_blobs
from .camassa_holm import CHState, MonotonicityError, ch_energy, run_ch
from .checkpoint import write_checkpoint
from .config import ConfigError, RunConfig
from .dynamics import (
    BlowUpError,
    DissipationMode,
    VorticityState,
    casimirs,
    energy_alpha,
    run,
    step_rk4,
)
from .flowmap import co_advect, make_lattice, transport_check, volume_check
from .geometry import (
    arnold_closed_form,
    find_alpha0,
    grid_for_modes,
    jacobi_evolve,
    sectional_curvature,
    stream_mode,
)
from .helmholtz import helmholtz_apply
from .rng import SplitMix64, random_modes
from .spectral import (
    AlphaParam,
    SpectralField,
    TorusGrid2D,
    cosine_field,
    dealias_two_thirds,
    derivative,
    field_from_modes,
    make_grid,
    norm_alpha,
    norm_hs,
)


class RunAborted(RuntimeError):
    """Numerical guard fired; the manifest has already been flagged INCOMPLETE."""

    def __init__(self, message: str, t_last: float):
        self.t_last = t_last
        super().__init__(message)


# -- artifact helpers -------------------------------------------------------------


def _fmt(x) -> str:
    if isinstance(x, float):
        return format(x, ".17g")
    return str(x)


def write_csv(path, header: list[str], rows) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def config_hash(cfg: RunConfig) -> str:
    return hashlib.sha256(cfg.serialize().encode("utf-8")).hexdigest()


def write_manifest(outdir, cfg: RunConfig, status: str, wall_s: float, diagnostics: dict) -> None:
    lines = [
        f"status = {status}",
        f"experiment = {cfg.experiment}",
        f"code_version = {__version__}",
        f"config_sha256 = {config_hash(cfg)}",
        f"wall_time_s = {_fmt(wall_s)}",
    ]
    for key in sorted(diagnostics):
        lines.append(f"{key} = {_fmt(diagnostics[key])}")
    for section in sorted(cfg.sections):
        for key in sorted(cfg.sections[section]):
            v = cfg.sections[section][key]
            body = " ".join(map(_fmt, v)) if isinstance(v, tuple) else _fmt(v)
            lines.append(f"config.{section}.{key} = {body}")
    with open(os.path.join(outdir, "manifest.txt"), "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


# -- initial conditions -------------------------------------------------------------


def _grid_from(cfg: RunConfig) -> TorusGrid2D:
    return make_grid(
        cfg.get("grid", "nx", 64),
        cfg.get("grid", "ny", 64),
        cfg.get("grid", "lx", 2.0 * math.pi),
        cfg.get("grid", "ly", 2.0 * math.pi),
    )


def initial_velocity(cfg: RunConfig, grid: TorusGrid2D, seed: int) -> SpectralField:
    """Named presets for the 2D experiments; all are divergence-free."""
    kind = cfg.get("ic", "kind", "two_mode")
    if kind == "single_mode":
        k = cfg.get("ic", "k", (1, 0))
        return stream_mode(grid, tuple(k), cfg.get("ic", "amp", 1.0))
    if kind == "two_mode":
        k1 = tuple(cfg.get("ic", "k1", (1, 0)))
        k2 = tuple(cfg.get("ic", "k2", (2, 1)))
        amps = cfg.get("ic", "amps", (0.25, 0.2))
        phases = cfg.get("ic", "phases", (0.0, 0.7))
        psi = cosine_field(grid, k1, amps[0], phases[0]) + cosine_field(grid, k2, amps[1], phases[1])
        return derivative(psi, "perp_gradient")
    if kind == "random_seeded":
        rng = SplitMix64(seed)
        kmax = cfg.get("ic", "kmax", 4)
        slope = cfg.get("ic", "spectrum_slope", -2.0)
        amp = cfg.get("ic", "amp", 0.2)
        psi = field_from_modes(grid, random_modes(rng, kmax, slope))
        return amp * derivative(psi, "perp_gradient")
    raise ConfigError(f"initial-condition kind {kind!r} is not a 2D velocity preset")


def initial_state(cfg: RunConfig, grid: TorusGrid2D, alpha: AlphaParam, seed: int) -> VorticityState:
    u0 = initial_velocity(cfg, grid, seed)
    q0 = dealias_two_thirds(helmholtz_apply(derivative(u0, "curl"), alpha))
    return VorticityState(q0, alpha)


def _dissipation(cfg: RunConfig) -> DissipationMode:
    variant = cfg.get("physics", "dissipation", "inviscid")
    nu = cfg.get("physics", "nu", 0.0)
    if variant == "inviscid":
        return DissipationMode.inviscid()
    return DissipationMode(variant, nu)


# -- experiment drivers ----------------------------------------------------------------


def _exp_simulate2d(cfg: RunConfig, outdir: str, seed: int) -> dict:
    grid = _grid_from(cfg)
    alpha = AlphaParam(cfg.get("physics", "alpha", 0.2))
    mode = _dissipation(cfg)
    dt = cfg.get("time", "dt", 1e-3)
    T = cfg.get("time", "t_final", 1.0)
    every = cfg.get("output", "series_every", 10)
    ckpt_every = cfg.get("output", "checkpoint_every", 0)

    state = initial_state(cfg, grid, alpha, seed)
    rows = []

    def record(s: VorticityState):
        rows.append((s.t, energy_alpha(s), *casimirs(s.q, 4)))

    record(state)
    n_steps = max(1, round(T / dt))
    try:
        for step in range(1, n_steps + 1):
            state = step_rk4(state, dt, mode, check_cfl=(step == 1))
            if every and step % every == 0:
                record(state)
            if ckpt_every and step % ckpt_every == 0:
                write_checkpoint(state, os.path.join(outdir, f"state_{step:06d}.ckpt"), "simulate2d", mode.nu)
    except BlowUpError as e:
        write_csv(os.path.join(outdir, "series.csv"), _SERIES2D_HEADER, rows)
        raise RunAborted(str(e), e.t_last_good) from None
    if rows[-1][0] != state.t:
        record(state)
    write_csv(os.path.join(outdir, "series.csv"), _SERIES2D_HEADER, rows)
    write_checkpoint(state, os.path.join(outdir, "final.ckpt"), "simulate2d", mode.nu)
    first, last = rows[0], rows[-1]
    diag = {"t_final": state.t, "energy_final": last[1]}
    diag["energy_drift_rel"] = abs(last[1] - first[1]) / abs(first[1])
    scale2 = first[2 + 1]  # integral(q^2)
    for n in range(1, 5):
        scale = max(abs(first[1 + n]), scale2 ** (n / 2.0))
        diag[f"casimir_{n}_drift_rel"] = abs(last[1 + n] - first[1 + n]) / scale
    return diag


_SERIES2D_HEADER = [
    "t_time",
    "E_alpha_energy",
    "casimir_1_int_q",
    "casimir_2_int_q2",
    "casimir_3_int_q3",
    "casimir_4_int_q4",
]


def _exp_blob(cfg: RunConfig, outdir: str, seed: int) -> dict:
    alpha = cfg.get("physics", "alpha", 0.3)
    n = cfg.get("ic", "n_blobs", 4)
    radius = cfg.get("ic", "radius", 1.0)
    gamma = cfg.get("ic", "gamma", 1.0)
    dt = cfg.get("time", "dt", 1e-3)
    T = cfg.get("time", "t_final", 10.0)
    every = cfg.get("output", "series_every", 100)

    ens = blob_ring(n, radius, gamma, alpha)
    rows = []
    counter = {"i": 0}

    def record(e: BlobEnsemble, t: float):
        d = blob_diagnostics(e)
        rows.append((t, d["hamiltonian"], *d["linear_impulse"], d["angular_impulse"], d["total_circulation"]))

    record(ens, 0.0)
    n_steps = max(1, round(T / dt))

    def on_step(e):
        counter["i"] += 1
        if every and counter["i"] % every == 0:
            record(e, counter["i"] * dt)

    ens = run_blobs(ens, dt, T, on_step=on_step)
    if every == 0 or counter["i"] % every:
        record(ens, n_steps * dt)
    write_csv(
        os.path.join(outdir, "series.csv"),
        ["t_time", "hamiltonian", "impulse_x", "impulse_y", "angular_impulse", "total_circulation"],
        rows,
    )
    first, last = np.asarray(rows[0]), np.asarray(rows[-1])
    # physical scales: conserved components can start at roundoff-zero
    gam_abs = float(np.abs(ens.circulations).sum())
    ext = 1.0 + float(np.abs(ens.positions).max())
    scales = np.array(
        [
            1.0,
            max(abs(first[1]), gam_abs**2 / (4.0 * math.pi)),
            gam_abs * ext,
            gam_abs * ext,
            max(abs(first[4]), gam_abs * ext**2),
            max(abs(first[5]), gam_abs),
        ]
    )
    drifts = np.abs(last - first) / scales
    return {
        "hamiltonian_drift_rel": float(drifts[1]),
        "impulse_drift_rel": float(drifts[2:4].max()),
        "angular_impulse_drift_rel": float(drifts[4]),
        "circulation_drift_rel": float(drifts[5]),
    }


def _exp_ch(cfg: RunConfig, outdir: str, seed: int) -> dict:
    n = cfg.get("experiment", "n", 512)
    bc = cfg.get("experiment", "bc", "dirichlet")
    dt = cfg.get("time", "dt", 1e-4)
    T = cfg.get("time", "t_final", 1.0)
    amp = cfg.get("ic", "amp", 0.1)
    m = cfg.get("ic", "k", (1,))[0]
    every = cfg.get("output", "series_every", 100)
    diag: dict = {}
    for this_bc in ("dirichlet", "periodic") if bc == "both" else (bc,):
        if this_bc == "dirichlet":
            x = np.arange(1, n + 1) / (n + 1)
            state = CHState(amp * np.sin(m * math.pi * x), "dirichlet")
        else:
            x = np.arange(n) * (2.0 * math.pi / n)
            state = CHState(amp * np.sin(m * x), "periodic")
        rows = [(0.0, ch_energy(state), float(np.abs(state.u).max()))]
        counter = {"i": 0}

        def on_step(s):
            counter["i"] += 1
            if every and counter["i"] % every == 0:
                rows.append((s.t, ch_energy(s), float(np.abs(s.u).max())))

        try:
            state = run_ch(state, dt, T, on_step=on_step)
        except MonotonicityError as e:
            write_csv(os.path.join(outdir, f"series_{this_bc}.csv"), _CH_HEADER, rows)
            raise RunAborted(str(e), e.t) from None
        if rows[-1][0] != state.t:
            rows.append((state.t, ch_energy(state), float(np.abs(state.u).max())))
        write_csv(os.path.join(outdir, f"series_{this_bc}.csv"), _CH_HEADER, rows)
        diag[f"energy_drift_rel_{this_bc}"] = abs(rows[-1][1] - rows[0][1]) / rows[0][1]
    return diag


_CH_HEADER = ["t_time", "energy_h1", "sup_norm"]


def _exp_curvature(cfg: RunConfig, outdir: str, seed: int) -> dict:
    n_pairs = cfg.get("experiment", "pairs", 50)
    kmax = cfg.get("experiment", "kmax", 4)
    alpha0 = AlphaParam(0.0)
    grid = grid_for_modes((kmax, kmax), (kmax, kmax))
    S = grid.area
    rng = SplitMix64(seed)
    rows = []
    worst = 0.0
    kmax_pos = -math.inf

    def draw_pair():
        while True:
            k = (int(rng.uniform() * (2 * kmax + 1)) - kmax, int(rng.uniform() * (2 * kmax + 1)) - kmax)
            l = (int(rng.uniform() * (2 * kmax + 1)) - kmax, int(rng.uniform() * (2 * kmax + 1)) - kmax)
            if k == (0, 0) or l == (0, 0) or k == l or k == (-l[0], -l[1]):
                continue
            return k, l

    for _ in range(n_pairs):
        k, l = draw_pair()
        x = stream_mode(grid, k)
        y = stream_mode(grid, l)
        K_num = sectional_curvature(x, y, alpha0)
        K_closed = arnold_closed_form(k, l, S)
        rows.append((k[0], k[1], l[0], l[1], K_num, K_closed))
        denom = max(abs(K_closed), 1e-15)
        worst = max(worst, abs(K_num - K_closed) / denom)
        kmax_pos = max(kmax_pos, K_num)
    write_csv(
        os.path.join(outdir, "pairs.csv"),
        ["k_x", "k_y", "l_x", "l_y", "K_numeric", "K_closed_form"],
        rows,
    )
    anchor_grid = grid_for_modes((1, 0), (0, 1))
    anchor = sectional_curvature(
        stream_mode(anchor_grid, (1, 0)), stream_mode(anchor_grid, (0, 1)), alpha0
    )
    return {
        "anchor_K": anchor,
        "anchor_target": -1.0 / (8.0 * math.pi**2),
        "max_rel_dev_from_closed_form": worst,
        "max_K_observed": kmax_pos,
    }


def _exp_visc_limit(cfg: RunConfig, outdir: str, seed: int, threads: int = 1) -> dict:
    grid_n = cfg.get("grid", "nx", 128)
    alpha = cfg.get("physics", "alpha", 0.2)
    nus = cfg.get("experiment", "nus", (1e-1, 1e-2, 1e-3, 1e-4))
    variants = cfg.get("experiment", "variants", "both")
    dt = cfg.get("time", "dt", 2e-3)
    T = cfg.get("time", "t_final", 0.5)
    ic = _ic_tuple(cfg)
    variant_list = ("viscous", "strong") if variants == "both" else (variants,)

    tasks = [("inviscid", 0.0)] + [(v, nu) for v in variant_list for nu in nus]
    args = [(grid_n, alpha, v, nu, dt, T, ic) for (v, nu) in tasks]
    if threads > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(_viscosity_run, args))
    else:
        results = [_viscosity_run(a) for a in args]
    by_key = {(v, nu): coeffs for (v, nu), coeffs in zip(tasks, results)}
    u0_ref = by_key[("inviscid", 0.0)]

    grid = make_grid(grid_n, grid_n)
    rows = []
    diag: dict = {}
    for v in variant_list:
        errors = []
        for nu in nus:
            diff = SpectralField(grid, by_key[(v, nu)] - u0_ref)
            err = norm_hs(diff, 1.0)
            errors.append(err)
            rows.append((v, nu, err))
        slope = float(np.polyfit(np.log(np.asarray(nus)), np.log(np.asarray(errors)), 1)[0])
        diag[f"slope_{v}"] = slope
        diag[f"monotone_{v}"] = bool(np.all(np.diff(errors) < 0.0)) if nus[0] > nus[-1] else bool(
            np.all(np.diff(errors) > 0.0)
        )
    write_csv(os.path.join(outdir, "summary.csv"), ["variant", "nu_viscosity", "h1_error_vs_inviscid"], rows)
    return diag


def _ic_tuple(cfg: RunConfig):
    return (
        tuple(cfg.get("ic", "k1", (1, 0))),
        tuple(cfg.get("ic", "k2", (2, 1))),
        tuple(cfg.get("ic", "amps", (0.25, 0.2))),
        tuple(cfg.get("ic", "phases", (0.0, 0.7))),
    )


def _viscosity_run(args) -> np.ndarray:
    """Worker: integrate one (variant, nu) leg and return final velocity coefficients."""
    grid_n, alpha_val, variant, nu, dt, T, (k1, k2, amps, phases) = args
    grid = make_grid(grid_n, grid_n)
    alpha = AlphaParam(alpha_val)
    psi = cosine_field(grid, k1, amps[0], phases[0]) + cosine_field(grid, k2, amps[1], phases[1])
    u0 = derivative(psi, "perp_gradient")
    q0 = dealias_two_thirds(helmholtz_apply(derivative(u0, "curl"), alpha))
    state = VorticityState(q0, alpha)
    mode = DissipationMode.inviscid() if variant == "inviscid" else DissipationMode(variant, nu)
    state = run(state, dt, T, mode)
    return state.velocity().coeffs


def _exp_alpha_sweep(cfg: RunConfig, outdir: str, seed: int) -> dict:
    k = tuple(cfg.get("ic", "k", (1, 0)))
    eps = tuple(cfg.get("experiment", "eps", (0, 1)))
    alphas = cfg.get("experiment", "alphas", tuple(np.linspace(0.0, 1.0, 21)))
    l = (k[0] + eps[0], k[1] + eps[1])
    grid = grid_for_modes(k, l)
    x = stream_mode(grid, k)
    y = stream_mode(grid, l)
    rows = [(a, sectional_curvature(x, y, AlphaParam(a))) for a in alphas]
    write_csv(os.path.join(outdir, "sweep.csv"), ["alpha", "sectional_curvature"], rows)
    a0 = find_alpha0(k, eps, grid=grid)
    diag = {"k": f"{k[0]} {k[1]}", "l": f"{l[0]} {l[1]}"}
    diag["alpha0"] = a0 if a0 is not None else "no flip in (0,1]"
    return diag


def _exp_jacobi(cfg: RunConfig, outdir: str, seed: int) -> dict:
    grid = _grid_from(cfg)
    alpha = AlphaParam(cfg.get("physics", "alpha", 0.2))
    dt = cfg.get("time", "dt", 1e-3)
    T = cfg.get("time", "t_final", 0.5)
    epsilons = cfg.get("experiment", "epsilons", (1e-4, 5e-5))

    u0 = initial_velocity(cfg, grid, seed)
    pert = stream_mode(grid, (1, 1), 1.0)
    zero = SpectralField(grid, np.zeros_like(u0.coeffs))
    traj = jacobi_evolve(u0, zero, pert, T, dt, alpha)
    write_csv(
        os.path.join(outdir, "norms.csv"),
        ["t_time", "jacobi_norm_alpha", "delta_u_norm_alpha"],
        zip(traj.times, traj.y_norms, traj.du_norms),
    )

    base = _nonlinear_endpoint(u0, alpha, dt, T)
    rows = []
    errors = []
    for eps in epsilons:
        pert_end = _nonlinear_endpoint(u0 + eps * pert, alpha, dt, T)
        fd = SpectralField(grid, (pert_end.coeffs - base.coeffs) / eps)
        err = norm_alpha(fd - traj.delta_u_final, alpha)
        errors.append(err)
        rows.append((eps, err))
    write_csv(os.path.join(outdir, "fd_check.csv"), ["epsilon", "fd_vs_linearized_error"], rows)
    diag = {"fd_error_ratio": errors[0] / errors[1] if len(errors) > 1 else float("nan")}

    # steady tangential field: norm constancy along a steady single-mode geodesic
    us = stream_mode(grid, (0, 1), 1.0)
    steady = jacobi_evolve(us, us, zero, min(T, 0.25), dt, alpha)
    diag["steady_tangent_drift_rel"] = float(
        np.abs(steady.y_norms - steady.y_norms[0]).max() / steady.y_norms[0]
    )
    return diag


def _nonlinear_endpoint(u0: SpectralField, alpha: AlphaParam, dt: float, T: float) -> SpectralField:
    q0 = dealias_two_thirds(helmholtz_apply(derivative(u0, "curl"), alpha))
    mean = np.array([u0.coeffs[0, 0, 0].real, u0.coeffs[1, 0, 0].real])
    state = run(VorticityState(q0, alpha, 0.0, mean), dt, T, DissipationMode.inviscid())
    return state.velocity()


def _exp_flowmap(cfg: RunConfig, outdir: str, seed: int) -> dict:
    grid = _grid_from(cfg)
    alpha = AlphaParam(cfg.get("physics", "alpha", 0.2))
    dt = cfg.get("time", "dt", 1e-3)
    T = cfg.get("time", "t_final", 1.0)
    m = cfg.get("experiment", "m", 32)
    t_diag = cfg.get("experiment", "t_diag", 0.25)
    refine = cfg.get("experiment", "refine", 2)
    ladders = cfg.get("experiment", "ladders", "both")

    state0 = initial_state(cfg, grid, alpha, seed)
    state, fmap = co_advect(state0, DissipationMode.inviscid(), dt, T, make_lattice(grid, m))
    diag = {
        "transport_error_final": transport_check(state0.q, state.q, fmap),
        "volume_error_final": volume_check(fmap),
    }

    if ladders in ("both", "transport"):
        t_rows = []
        for i in range(refine + 1):
            dti = dt / 2**i
            s, f = co_advect(state0, DissipationMode.inviscid(), dti, t_diag, make_lattice(grid, m))
            t_rows.append((dti, transport_check(state0.q, s.q, f)))
        write_csv(os.path.join(outdir, "transport.csv"), ["dt_step", "transport_error"], t_rows)
        diag["transport_improvement"] = t_rows[0][1] / max(t_rows[-1][1], 1e-300)

    if ladders in ("both", "volume"):
        v_rows = []
        for i in range(refine + 1):
            mi = m * 2**i
            s, f = co_advect(state0, DissipationMode.inviscid(), dt, t_diag, make_lattice(grid, mi))
            v_rows.append((mi, volume_check(f)))
        write_csv(os.path.join(outdir, "volume.csv"), ["lattice_m", "volume_error"], v_rows)
        diag["volume_improvement"] = v_rows[0][1] / max(v_rows[-1][1], 1e-300)

    return diag


_DRIVERS = {
    "simulate2d": _exp_simulate2d,
    "blob": _exp_blob,
    "ch": _exp_ch,
    "curvature": _exp_curvature,
    "alpha-sweep": _exp_alpha_sweep,
    "jacobi": _exp_jacobi,
    "flowmap": _exp_flowmap,
}


def run_experiment(cfg: RunConfig, outdir: str, seed: int = 0, threads: int = 1) -> int:
    """Run one experiment; artifacts land in outdir.  Returns the exit status."""
    os.makedirs(outdir, exist_ok=True)
    t0 = time.monotonic()
    try:
        if cfg.experiment == "visc-limit":
            diag = _exp_visc_limit(cfg, outdir, seed, threads)
        else:
            driver = _DRIVERS.get(cfg.experiment)
            if driver is None:
                raise ConfigError(f"unknown experiment {cfg.experiment!r}")
            diag = driver(cfg, outdir, seed)
    except RunAborted as e:
        write_manifest(outdir, cfg, "INCOMPLETE", time.monotonic() - t0, {"abort_reason": str(e), "t_last_good": e.t_last})
        return 2
    except (BlowUpError, MonotonicityError) as e:
        t_last = getattr(e, "t_last_good", getattr(e, "t", float("nan")))
        write_manifest(outdir, cfg, "INCOMPLETE", time.monotonic() - t0, {"abort_reason": str(e), "t_last_good": t_last})
        return 2
    write_manifest(outdir, cfg, "COMPLETE", time.monotonic() - t0, diag)
    return 0
