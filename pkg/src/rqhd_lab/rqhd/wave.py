"""Spectral Duhamel propagator for ``u'' - c^2 Lap u = F`` on the torus."""

from __future__ import annotations

import numpy as np

from ..spectral import SpectralGrid


def linear_wave_solve(grid: SpectralGrid, u0: np.ndarray, u1: np.ndarray, F: np.ndarray,
                      dt: float, speed: float = 1.0) -> tuple[np.ndarray, np.ndarray]:
    """Propagate ``(u, u')`` over the time nodes of ``F`` (shape ``(nt, *grid.shape)``).

    Each Fourier mode is advanced by the exact homogeneous propagator; the
    Duhamel integral of the forcing uses the trapezoid rule, so the scheme
    is second order in ``dt`` and exact when ``F = 0``. The zero mode reduces
    to ``u'' = F_0`` with the same quadrature.
    """
    F = np.asarray(F, dtype=float)
    nt = F.shape[0]
    if F.shape[1:] != grid.shape:
        raise ValueError(f"forcing has spatial shape {F.shape[1:]}, grid is {grid.shape}")
    omega = speed * np.sqrt(grid.k2)
    cos = np.cos(omega * dt)
    sin = np.sin(omega * dt)
    sinc = dt * np.sinc(omega * dt / np.pi)  # sin(w dt)/w, -> dt at w = 0
    Fh = grid.fft(F)
    u = np.empty((nt,) + grid.shape, dtype=complex)
    v = np.empty_like(u)
    u[0] = grid.fft(u0)
    v[0] = grid.fft(u1)
    half = 0.5 * dt
    for i in range(nt - 1):
        u[i + 1] = cos * u[i] + sinc * v[i] + half * sinc * Fh[i]
        v[i + 1] = -omega * sin * u[i] + cos * v[i] + half * (cos * Fh[i] + Fh[i + 1])
    return grid.ifft(u), grid.ifft(v)
