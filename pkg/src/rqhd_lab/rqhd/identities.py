"""Numerical checks of the algebraic identities behind the hydrodynamic system."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..kg import Params, Trajectory
from ..madelung import hydro_to_kg, kg_to_hydro, make_hydro_state
from ..spectral import SpectralGrid
from .reform import reformulate, unreformulate
from .residuals import quantum_stress_divergence, relativistic_term


@dataclass(frozen=True)
class DensitySample:
    """Minimal state for the relativistic-term stencils: a density at one time."""

    grid: SpectralGrid
    n: np.ndarray
    time: float = 0.0


def random_density(grid: SpectralGrid, rng: np.random.Generator, modes: int = 3,
                   amplitude: float = 0.3, mean: float = 1.0) -> np.ndarray:
    """Smooth positive field: random low modes scaled to a given peak deviation."""
    F = np.zeros(grid.shape, dtype=complex)
    low = np.ones(grid.shape, dtype=bool)
    for m in grid.mode_index:
        low &= np.abs(m) <= modes
    F[low] = rng.normal(size=low.sum()) + 1j * rng.normal(size=low.sum())
    F.flat[0] = 0.0
    f = grid.ifft(F)
    return mean + amplitude * f / np.max(np.abs(f))


def _vec_rel(a: np.ndarray, b: np.ndarray) -> float:
    scale = float(np.max(np.abs(a)))
    return float(np.max(np.abs(a - b))) / scale if scale > 0 else float(np.max(np.abs(a - b)))


def quantum_stress_mismatch(grid: SpectralGrid, n: np.ndarray, params: Params) -> float:
    """Max relative difference between the potential and tensor forms."""
    return _vec_rel(quantum_stress_divergence(grid, n, params, "potential"),
                    quantum_stress_divergence(grid, n, params, "tensor"))


def oscillating_density(grid: SpectralGrid, dt: float, t_mid: float = 1.0,
                        amplitude: float = 0.1) -> Trajectory[DensitySample]:
    """Three samples of ``n = 1 + a sin(x1) cos(t)`` centred on ``t_mid``."""
    x = grid.coords[0]
    times = [t_mid - dt, t_mid, t_mid + dt]
    return Trajectory(dt, [DensitySample(grid, 1.0 + amplitude * np.sin(x) * np.cos(t), t) for t in times])


def relativistic_difference(grid: SpectralGrid, params: Params, dt: float) -> tuple[np.ndarray, np.ndarray]:
    """Potential form and (potential - flux) on the analytic oscillating density."""
    traj = oscillating_density(grid, dt)
    a = relativistic_term(traj, 1, params, "potential")
    return a, a - relativistic_term(traj, 1, params, "flux")


def relativistic_mismatch(grid: SpectralGrid, params: Params, dt: float) -> tuple[float, float]:
    """L2 norm and relative max of the difference between the two relativistic forms."""
    a, d = relativistic_difference(grid, params, dt)
    return float(np.sqrt(sum(grid.l2_norm(c) ** 2 for c in d))), _vec_rel(a, a - d)


def relativistic_extrapolated(grid: SpectralGrid, params: Params, dt: float) -> tuple[float, float]:
    """Halving ratio of the O(dt^2) mismatch and its Richardson-extrapolated relative size."""
    a, d1 = relativistic_difference(grid, params, dt)
    _, d2 = relativistic_difference(grid, params, dt / 2)
    n1 = np.sqrt(sum(grid.l2_norm(c) ** 2 for c in d1))
    n2 = np.sqrt(sum(grid.l2_norm(c) ** 2 for c in d2))
    ratio = float(n1 / n2) if n2 > 0 else float("nan")
    scale = float(np.max(np.abs(a)))
    extrap = float(np.max(np.abs((4.0 * d2 - d1) / 3.0)))
    return ratio, extrap / scale if scale > 0 else extrap


def reformulation_roundtrip(grid: SpectralGrid, params: Params, rng: np.random.Generator) -> float:
    n = random_density(grid, rng, amplitude=0.2, mean=params.b0)
    S = random_density(grid, rng, amplitude=0.5, mean=0.0)
    h = make_hydro_state(grid, n, random_density(grid, rng, amplitude=0.1, mean=0.0), S, None,
                         random_density(grid, rng, amplitude=0.1, mean=0.0), params)
    back = unreformulate(reformulate(h, params), params)
    return max(_vec_rel(h.n, back.n), _vec_rel(h.n_t, back.n_t), _vec_rel(h.grad_S, back.grad_S),
               _vec_rel(h.S_t, back.S_t), _vec_rel(h.V, back.V))


def madelung_roundtrip(grid: SpectralGrid, params: Params, rng: np.random.Generator,
                       winding=None) -> float:
    n = random_density(grid, rng, amplitude=0.2, mean=params.b0)
    S = random_density(grid, rng, amplitude=0.5, mean=0.0)
    h = make_hydro_state(grid, n, random_density(grid, rng, amplitude=0.1, mean=0.0), S, winding,
                         random_density(grid, rng, amplitude=0.1, mean=0.0), params)
    back = kg_to_hydro(hydro_to_kg(h, params), params)
    if back.winding != h.winding:
        return float("inf")
    return max(_vec_rel(h.n, back.n), _vec_rel(h.n_t, back.n_t), _vec_rel(h.grad_S, back.grad_S),
               _vec_rel(h.S_t, back.S_t))


def identity_report(grid: SpectralGrid, params: Params, seed: int = 0, samples: int = 10,
                    dt: float = 0.05) -> dict[str, float]:
    """Worst relative errors of every identity check on seeded random fields.

    The relativistic forms agree only to O(dt^2); the report gives the
    mismatch ratio under one halving of ``dt`` and the Richardson-extrapolated
    relative mismatch.
    """
    rng = np.random.default_rng(seed)
    qs = max(quantum_stress_mismatch(grid, random_density(grid, rng, mean=params.nbar), params)
             for _ in range(samples))
    ratio, rel = relativistic_extrapolated(grid, params, dt)
    return {
        "quantum_stress_rel": qs,
        "relativistic_rel": rel,
        "relativistic_halving_ratio": ratio,
        "reformulation_roundtrip_rel": max(reformulation_roundtrip(grid, params, rng) for _ in range(samples)),
        "madelung_roundtrip_rel": max(madelung_roundtrip(grid, params, rng) for _ in range(samples)),
    }
