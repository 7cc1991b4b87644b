"""Binary checkpoints for 2D vorticity states.

Layout (all multi-byte values little-endian):

    bytes 0..3    magic "ALFL"
    bytes 4..7    version, u32 (currently 1)
    bytes 8..19   experiment tag, ASCII, NUL-padded to 12 bytes
    bytes 20..27  nx, ny: u32 each
    bytes 28..75  alpha, nu, t, mean_ux, mean_uy, lx, ly: f64 each
    bytes 76..    payload: nx*ny complex coefficients of q as f64 pairs
                  (real, imag interleaved), row-major over (k_x, k_y)

Write-then-read reproduces coefficients bit-exactly.
"""

from __future__ import annotations

import struct

import numpy as np

from .dynamics import VorticityState
from .spectral import AlphaParam, SpectralField, make_grid

MAGIC = b"ALFL"
VERSION = 1
_HEADER = struct.Struct("<4sI12sII7d")


class CheckpointError(ValueError):
    pass


def write_checkpoint(state: VorticityState, path, tag: str = "", nu: float = 0.0) -> None:
    g = state.grid
    tag_bytes = tag.encode("ascii")[:12].ljust(12, b"\0")
    header = _HEADER.pack(
        MAGIC,
        VERSION,
        tag_bytes,
        g.nx,
        g.ny,
        state.alpha.alpha,
        nu,
        state.t,
        state.mean_velocity[0],
        state.mean_velocity[1],
        g.Lx,
        g.Ly,
    )
    payload = np.ascontiguousarray(state.q.coeffs, dtype="<c16").tobytes()
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(payload)


def read_checkpoint(path) -> tuple[VorticityState, dict]:
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < _HEADER.size:
        raise CheckpointError("truncated header")
    magic, version, tag, nx, ny, alpha, nu, t, mux, muy, lx, ly = _HEADER.unpack_from(raw, 0)
    if magic != MAGIC:
        raise CheckpointError(f"bad magic {magic!r}; not a checkpoint file")
    if version != VERSION:
        raise CheckpointError(f"unsupported checkpoint version {version}")
    expected = _HEADER.size + nx * ny * 16
    if len(raw) != expected:
        raise CheckpointError(f"payload length {len(raw) - _HEADER.size} does not match {nx}x{ny} grid")
    coeffs = np.frombuffer(raw[_HEADER.size:], dtype="<c16").reshape(nx, ny).astype(np.complex128)
    grid = make_grid(nx, ny, lx, ly)
    state = VorticityState(SpectralField(grid, coeffs), AlphaParam(alpha), t, (mux, muy))
    meta = {"tag": tag.rstrip(b"\0").decode("ascii"), "nu": nu}
    return state, meta
