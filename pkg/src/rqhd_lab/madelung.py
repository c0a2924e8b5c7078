"""Madelung map between the modulated field and hydrodynamic variables.

``phi = sqrt(n) exp(i S / eps)``. On the torus S may carry a linear part
``k0 . x`` (a phase winding); only ``grad S`` and ``exp(i S/eps)`` need to be
single valued, so the phase is stored as a mean-zero periodic part plus the
lattice winding.

Sign convention: ``grad S = eps Im(conj(phi) grad phi) / |phi|^2`` and
``S_t = eps Im(conj(phi) phi_t) / |phi|^2``. This is the convention for
which ``hydro_to_kg`` and ``kg_to_hydro`` are mutually inverse.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import DegenerateParameterError, IrrotationalityError, PreconditionError, VacuumError
from .kg import KGState, Params, Trajectory, potential
from .spectral import ROUNDOFF_FLOOR, SpectralGrid

CURL_TOL = 1e-8


@dataclass(frozen=True)
class HydroState:
    grid: SpectralGrid
    n: np.ndarray
    n_t: np.ndarray
    S_periodic: np.ndarray
    winding: tuple[int, ...]
    k0: tuple[float, ...]
    grad_S: np.ndarray
    S_t: np.ndarray
    V: np.ndarray
    time: float = 0.0

    @property
    def S(self) -> np.ndarray:
        """Full (multivalued) phase sampled on the grid."""
        return self.S_periodic + self.grid.dot_x(self.k0)

    @property
    def momentum(self) -> np.ndarray:
        """Current density ``n grad S``."""
        return self.n * self.grad_S


def check_vacuum(n: np.ndarray, params: Params, where: str = "density") -> None:
    nmin = float(np.min(n))
    if not np.isfinite(nmin) or nmin < params.n_floor:
        raise VacuumError(f"{where} reaches {nmin:.3e} < n_floor {params.n_floor:.1e}; phase undefined")


def winding_of(grid: SpectralGrid, grad_S: np.ndarray, eps: float) -> tuple[tuple[int, ...], np.ndarray]:
    """Nearest lattice winding of the mean phase gradient and its wavevector ``k0``."""
    mean = np.array([np.mean(g) for g in grad_S])
    if eps == 0:
        if np.any(np.abs(mean) > ROUNDOFF_FLOOR):
            raise DegenerateParameterError("a winding phase needs eps > 0")
        return (0,) * grid.dim, np.zeros(grid.dim)
    m = np.round(mean * np.asarray(grid.extent) / (2 * np.pi * eps)).astype(int)
    return tuple(int(v) for v in m), eps * grid.lattice_vector(m)


def phase_from_gradient(grid: SpectralGrid, grad_S: np.ndarray, k0: Sequence[float]) -> np.ndarray:
    """Mean-zero periodic potential of ``grad_S - k0`` (inverse gradient)."""
    shifted = grad_S - np.asarray(k0, dtype=float).reshape((grid.dim,) + (1,) * grid.dim)
    return grid.inverse_laplacian(grid.divergence(shifted))


def check_irrotational(grid: SpectralGrid, grad_S: np.ndarray) -> float:
    c = grid.curl(grad_S)
    if c.size == 0:
        return 0.0
    scale = max(float(np.max(np.abs(grad_S))), 1.0)
    err = float(np.max(np.abs(c))) / scale
    if err > CURL_TOL:
        raise IrrotationalityError(f"curl(grad S) = {err:.2e} relative exceeds {CURL_TOL:.0e}")
    return err


def make_hydro_state(grid: SpectralGrid, n, n_t, S_periodic, winding, S_t, params: Params,
                     time: float = 0.0, V=None) -> HydroState:
    """Assemble a state from density and phase data, deriving grad S and V."""
    n = np.asarray(n, dtype=float)
    check_vacuum(n, params)
    winding = tuple(int(w) for w in np.atleast_1d(winding)) if winding is not None else (0,) * grid.dim
    if len(winding) != grid.dim:
        raise PreconditionError("winding must have one entry per axis")
    k0 = params.epsilon * grid.lattice_vector(winding)
    S_periodic = np.asarray(S_periodic, dtype=float) * np.ones(grid.shape)
    S_periodic = S_periodic - np.mean(S_periodic)
    grad_S = grid.gradient(S_periodic) + k0.reshape((grid.dim,) + (1,) * grid.dim)
    if V is None:
        V = potential(grid, n, params).V
    return HydroState(grid, n, np.asarray(n_t, dtype=float) * np.ones(grid.shape), S_periodic,
                      winding, tuple(float(k) for k in k0), grad_S,
                      np.asarray(S_t, dtype=float) * np.ones(grid.shape), V, time)


def kg_to_hydro(state: KGState, params: Params) -> HydroState:
    grid, eps = state.grid, params.epsilon
    if eps <= 0:
        raise DegenerateParameterError("the Madelung map needs eps > 0")
    phi, phi_t = state.phi, state.phi_t
    n = np.abs(phi) ** 2
    check_vacuum(n, params)
    grad_S = eps * np.imag(np.conj(phi) * grid.gradient(phi)) / n
    check_irrotational(grid, grad_S)
    S_t = eps * np.imag(np.conj(phi) * phi_t) / n
    n_t = 2.0 * np.real(np.conj(phi) * phi_t)
    winding, k0 = winding_of(grid, grad_S, eps)
    S_periodic = phase_from_gradient(grid, grad_S, k0)
    V = potential(grid, n, params).V
    return HydroState(grid, n, n_t, S_periodic, winding, tuple(float(k) for k in k0),
                      grad_S, S_t, V, state.time)


def hydro_to_kg(state: HydroState, params: Params) -> KGState:
    eps = params.epsilon
    if eps <= 0:
        raise DegenerateParameterError("the Madelung map needs eps > 0")
    check_vacuum(state.n, params)
    grid = state.grid
    phase = np.exp(1j * (state.S_periodic / eps + grid.dot_x(grid.lattice_vector(state.winding))))
    root = np.sqrt(state.n)
    phi = root * phase
    phi_t = (state.n_t / (2.0 * root) + 1j * root * state.S_t / eps) * phase
    return KGState(grid, phi, phi_t, state.time)


def initial_data_kg_from_hydro(n0, n1, S0, S1, params: Params):
    """``(phi0, phi1)`` from hydrodynamic Cauchy data; ``S0`` is sampled pointwise."""
    eps = params.epsilon
    if eps <= 0:
        raise DegenerateParameterError("the Madelung map needs eps > 0")
    n0 = np.asarray(n0, dtype=float)
    check_vacuum(n0, params, "initial density")
    phase = np.exp(1j * np.asarray(S0, dtype=float) / eps)
    root = np.sqrt(n0)
    phi0 = root * phase
    phi1 = (np.asarray(n1) / (2.0 * root) + 1j * root * np.asarray(S1) / eps) * phase
    return phi0, phi1


def initial_data_hydro_from_kg(grid: SpectralGrid, phi0, phi1, params: Params):
    """``(n0, n1, grad_S0, S1, winding)`` from Klein-Gordon Cauchy data."""
    h = kg_to_hydro(KGState(grid, phi0, phi1), params)
    return h.n, h.n_t, h.grad_S, h.S_t, h.winding


def hydro_distances(a: Trajectory[HydroState], b: Trajectory[HydroState]) -> list[float]:
    """Per-sample ``(||dn||^2 + ||d(n grad S)||^2)^(1/2)`` over matching samples."""
    if len(a) != len(b):
        raise PreconditionError(f"trajectories have {len(a)} and {len(b)} samples")
    grid = a[0].grid
    out = []
    for x, y in zip(a, b):
        dm = x.momentum - y.momentum
        out.append(math.sqrt(grid.l2_norm(x.n - y.n) ** 2 + sum(grid.l2_norm(c) ** 2 for c in dm)))
    return out


def hydro_distance(a: Trajectory[HydroState], b: Trajectory[HydroState]) -> float:
    """Sup-in-time L2 distance of ``(n, n grad S)``."""
    return max(hydro_distances(a, b))
