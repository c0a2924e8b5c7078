"""Hyperbolic-elliptic reformulation ``(psi, Psi, Phi) = (S, sqrt(n) - sqrt(nbar), V)``.

Writing ``R = Psi + sqrt(nbar)``, the hydrodynamic system with general
``eps, ups > 0`` and constant doping ``b0`` becomes

    psi_tt - Lap psi / ups^2 = f = [(R^2)_t (1 - ups^2 psi_t) + grad(R^2).grad psi] / (ups^2 R^2)
    Psi_tt - Lap Psi / ups^2 = g = R (ups^2 psi_t^2 - 2 psi_t - |grad psi|^2 - 2 Phi) / (eps^2 ups^2)
    Lap Phi                  = h = R^2 - b0

which reduces to the unit-parameter iteration when ``eps = ups = 1``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import DegenerateParameterError, PreconditionError, VacuumError
from ..kg import Params
from ..madelung import HydroState, check_vacuum, make_hydro_state
from ..spectral import SpectralGrid


@dataclass(frozen=True)
class ReformState:
    grid: SpectralGrid
    psi: np.ndarray
    Psi: np.ndarray
    Phi: np.ndarray
    psi_t: np.ndarray
    Psi_t: np.ndarray
    time: float = 0.0
    winding: tuple[int, ...] | None = None


@dataclass
class ReformHistory:
    """Stacked ``(nt, *shape)`` arrays of a reformulated trajectory."""

    grid: SpectralGrid
    dt: float
    t0: float
    psi: np.ndarray
    psi_t: np.ndarray
    Psi: np.ndarray
    Psi_t: np.ndarray
    Phi: np.ndarray
    winding: tuple[int, ...]

    @property
    def nt(self) -> int:
        return self.psi.shape[0]

    @property
    def times(self) -> np.ndarray:
        return self.t0 + self.dt * np.arange(self.nt)

    def states(self) -> list[ReformState]:
        return [ReformState(self.grid, self.psi[i], self.Psi[i], self.Phi[i], self.psi_t[i],
                            self.Psi_t[i], float(t), self.winding)
                for i, t in enumerate(self.times)]

    @classmethod
    def from_states(cls, states, dt: float) -> "ReformHistory":
        s0 = states[0]
        return cls(s0.grid, dt, s0.time,
                   np.stack([s.psi for s in states]), np.stack([s.psi_t for s in states]),
                   np.stack([s.Psi for s in states]), np.stack([s.Psi_t for s in states]),
                   np.stack([s.Phi for s in states]), s0.winding or (0,) * s0.grid.dim)


@dataclass(frozen=True)
class SourceTriple:
    f: np.ndarray
    g: np.ndarray
    h: np.ndarray
    dt: float


@dataclass(frozen=True)
class CauchyData:
    """Initial data ``(psi0, psi1, Psi0, Psi1)`` of the reformulated problem."""

    grid: SpectralGrid
    psi0: np.ndarray
    psi1: np.ndarray
    Psi0: np.ndarray
    Psi1: np.ndarray
    winding: tuple[int, ...] = None

    def __post_init__(self):
        if self.winding is None:
            object.__setattr__(self, "winding", (0,) * self.grid.dim)
        for name in ("psi0", "psi1", "Psi0", "Psi1"):
            a = np.asarray(getattr(self, name), dtype=float) * np.ones(self.grid.shape)
            object.__setattr__(self, name, a)


def cauchy_from_hydro(grid: SpectralGrid, n0, n1, S0, S1, params: Params,
                      winding=None) -> CauchyData:
    """Map hydrodynamic Cauchy data; ``S0`` is the periodic part of the phase.

    ``Psi1 = n1 / (2 sqrt(n0))`` is the time derivative of ``sqrt(n)``.
    """
    n0 = np.asarray(n0, dtype=float) * np.ones(grid.shape)
    check_vacuum(n0, params, "initial density")
    root = np.sqrt(n0)
    return CauchyData(grid, S0, S1, root - np.sqrt(params.nbar), np.asarray(n1) / (2.0 * root),
                      tuple(winding) if winding is not None else None)


def _phase_offset(grid: SpectralGrid, winding, params: Params) -> np.ndarray:
    k0 = params.epsilon * grid.lattice_vector(winding or (0,) * grid.dim)
    return k0.reshape((grid.dim,) + (1,) * grid.dim)


def reformulate(h: HydroState, params: Params) -> ReformState:
    check_vacuum(h.n, params)
    root = np.sqrt(h.n)
    return ReformState(h.grid, h.S_periodic.copy(), root - np.sqrt(params.nbar), h.V.copy(),
                       h.S_t.copy(), h.n_t / (2.0 * root), h.time, tuple(h.winding))


def unreformulate(r: ReformState, params: Params) -> HydroState:
    """Inverse of :func:`reformulate`; the spatial mean of ``psi`` (a gauge constant) is dropped."""
    R = r.Psi + np.sqrt(params.nbar)
    if np.min(R) <= 0:
        raise VacuumError("Psi + sqrt(nbar) is not positive")
    n = R**2
    return make_hydro_state(r.grid, n, 2.0 * R * r.Psi_t, r.psi, r.winding, r.psi_t, params,
                            r.time, V=r.Phi - np.mean(r.Phi))


def _require_picard_params(params: Params) -> None:
    if params.epsilon <= 0 or params.upsilon <= 0:
        raise DegenerateParameterError(
            "the wave-form reformulation needs eps > 0 and ups > 0; use limits.solve_limit_system"
        )
    if not params.constant_background:
        raise PreconditionError("the Picard path supports constant doping b0 only")


def source_terms(grid: SpectralGrid, psi, psi_t, Psi, Psi_t, Phi, params: Params,
                 winding=None, dealias: bool = True):
    """Right-hand sides ``(f, g, h)`` for arrays of shape ``(..., *grid.shape)``."""
    _require_picard_params(params)
    eps2, ups2 = params.epsilon**2, params.upsilon**2
    R = Psi + np.sqrt(params.nbar)
    if np.min(R) <= 0 or np.min(R**2) < params.n_floor:
        raise VacuumError(f"sqrt(n) = Psi + sqrt(nbar) reaches {np.min(R):.3e} during the iteration")
    offset = _phase_offset(grid, winding, params)
    lead = psi.ndim - grid.dim
    axis = lead  # component axis of the gradient output
    grad_psi = np.moveaxis(_grad(grid, psi), 0, axis) + offset
    R2 = R**2
    grad_R2 = np.moveaxis(_grad(grid, R2), 0, axis)
    R2_t = 2.0 * R * Psi_t
    f = (R2_t * (1.0 - ups2 * psi_t) + np.sum(grad_R2 * grad_psi, axis=axis)) / (ups2 * R2)
    g = R * (ups2 * psi_t**2 - 2.0 * psi_t - np.sum(grad_psi**2, axis=axis) - 2.0 * Phi) / (eps2 * ups2)
    h = R2 - params.b0
    if dealias:
        f, g, h = grid.dealias(f), grid.dealias(g), grid.dealias(h)
    return f, g, h


def _grad(grid: SpectralGrid, f: np.ndarray) -> np.ndarray:
    # gradient of a stack: component axis first, then the stack axes
    F = grid.fft(f)
    return np.stack([grid.ifft(1j * k * F) for k in grid._deriv_wavenumbers])


def assemble_sources(U: ReformHistory, params: Params, dealias: bool = True) -> SourceTriple:
    f, g, h = source_terms(U.grid, U.psi, U.psi_t, U.Psi, U.Psi_t, U.Phi, params, U.winding, dealias)
    return SourceTriple(f, g, h, U.dt)
