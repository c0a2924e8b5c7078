"""Nondimensional Klein-Gordon-Poisson evolution.

The modulated field obeys

    i eps phi_t + (eps^2/2) Lap phi - V phi = (eps^2 ups^2 / 2) phi_tt,
    Lap V = |phi|^2 - b,

integrated here as a first-order system in ``(phi, phi_t)`` with classical
RK4 and the potential re-solved at every stage.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from typing import Generic, Sequence, TypeVar

import numpy as np

from .errors import (
    CompatibilityError,
    DegenerateParameterError,
    MemoryBudgetError,
    PreconditionError,
    StabilityError,
    ValidationError,
)
from .spectral import SpectralGrid

log = logging.getLogger(__name__)

MEMORY_BUDGET_BYTES = 2 * 1024**3

S = TypeVar("S")


@dataclass(frozen=True)
class Params:
    """Physical parameters shared by every solver.

    ``background`` is either the constant doping level b0 or a real field
    on the grid. ``drift_tol`` bounds the mean charge imbalance tolerated
    during evolution (relative to b0): on a torus the mean density is not
    conserved when ``upsilon > 0``, only ``n - ups^2 n S_t`` is.
    """

    epsilon: float = 1.0
    upsilon: float = 1.0
    background: float | np.ndarray = 1.0
    nbar: float = 1.0
    n_floor: float | None = None
    compat_tol: float = 1e-10
    drift_tol: float = 1e-2
    delta: float | None = None

    def __post_init__(self):
        if not self.epsilon >= 0 or not math.isfinite(self.epsilon):
            raise ValidationError(f"epsilon must be >= 0, got {self.epsilon}")
        if not self.upsilon >= 0 or not math.isfinite(self.upsilon):
            raise ValidationError(f"upsilon must be >= 0, got {self.upsilon}")
        if not self.nbar > 0:
            raise ValidationError(f"nbar must be > 0, got {self.nbar}")
        if np.ndim(self.background) == 0:
            if not float(self.background) > 0:
                raise ValidationError(f"b0 must be > 0, got {self.background}")
        elif not np.all(np.asarray(self.background) > 0):
            raise ValidationError("background field must be positive")
        if self.n_floor is None:
            object.__setattr__(self, "n_floor", 1e-8 * self.nbar)
        if self.delta is None:
            object.__setattr__(self, "delta", 0.1 * self.nbar)

    @property
    def b0(self) -> float:
        return float(np.mean(self.background))

    @property
    def constant_background(self) -> bool:
        return np.ndim(self.background) == 0

    def with_(self, **changes) -> "Params":
        return replace(self, **changes)


@dataclass(frozen=True)
class KGState:
    grid: SpectralGrid
    phi: np.ndarray
    phi_t: np.ndarray
    time: float = 0.0

    def __post_init__(self):
        phi = np.asarray(self.phi, dtype=complex)
        phi_t = np.asarray(self.phi_t, dtype=complex)
        object.__setattr__(self, "phi", phi)
        object.__setattr__(self, "phi_t", phi_t)
        if phi.shape != self.grid.shape or phi_t.shape != self.grid.shape:
            raise PreconditionError("phi and phi_t must match the grid shape")


@dataclass
class Trajectory(Generic[S]):
    """States sampled uniformly at ``t0 + i*dt``; extra per-step series in ``diagnostics``."""

    dt: float
    states: list[S]
    diagnostics: dict[str, np.ndarray] = field(default_factory=dict)

    def __post_init__(self):
        if not self.states:
            raise PreconditionError("trajectory must be nonempty")
        if len(self.states) > 1 and not self.dt > 0:
            raise PreconditionError("dt must be positive")

    def __len__(self):
        return len(self.states)

    def __getitem__(self, i):
        return self.states[i]

    def __iter__(self):
        return iter(self.states)

    @property
    def times(self) -> np.ndarray:
        return np.array([s.time for s in self.states])

    @property
    def final(self) -> S:
        return self.states[-1]


def step_count(T: float, dt: float) -> tuple[int, float]:
    """Number of uniform steps covering ``[0, T]`` with step at most ``dt``."""
    if T < 0:
        raise PreconditionError(f"horizon must be >= 0, got {T}")
    if not dt > 0:
        raise PreconditionError(f"dt must be positive, got {dt}")
    if T == 0:
        return 0, dt
    n = max(1, int(math.ceil(T / dt - 1e-9)))
    return n, T / n


def check_memory(nbytes: float, what: str = "trajectory") -> None:
    if nbytes > MEMORY_BUDGET_BYTES:
        raise MemoryBudgetError(
            f"{what} needs {nbytes / 1024**3:.2f} GiB, budget is {MEMORY_BUDGET_BYTES / 1024**3:.0f} GiB"
        )


def background_field(grid: SpectralGrid, params: Params) -> np.ndarray | float:
    if params.constant_background:
        return float(params.background)
    b = np.asarray(params.background, dtype=float)
    if b.shape != grid.shape:
        raise PreconditionError("background field does not match the grid")
    return b


def potential(grid: SpectralGrid, density: np.ndarray, params: Params, tol: float | None = None):
    """Self-consistent potential for a density; returns ``PoissonResult``."""
    tol = params.drift_tol if tol is None else tol
    return grid.solve_poisson(density - background_field(grid, params), compat_tol=tol, scale=params.b0)


def check_initial_charge(grid: SpectralGrid, density: np.ndarray, params: Params) -> None:
    """Initial data must be charge neutral to ``compat_tol``."""
    grid.solve_poisson(density - background_field(grid, params), compat_tol=params.compat_tol)


def kg_acceleration(state: KGState, params: Params, drift_tol: float | None = None) -> np.ndarray:
    eps, ups = params.epsilon, params.upsilon
    if ups == 0 or eps == 0:
        raise DegenerateParameterError(
            "phi_tt is undefined for eps*ups = 0; use the Schroedinger/limit path"
        )
    grid = state.grid
    V = potential(grid, np.abs(state.phi) ** 2, params, drift_tol).V
    rhs = 1j * eps * state.phi_t + 0.5 * eps**2 * grid.laplacian(state.phi) - V * state.phi
    return (2.0 / (eps**2 * ups**2)) * rhs


def dispersion_omega(kmag: float, params: Params, branch: str = "plus") -> float:
    """Plane-wave frequency, roots of ``(eps ups^2/2) w^2 + w - eps k^2/2 = 0``."""
    eps, ups = params.epsilon, params.upsilon
    if branch not in ("plus", "minus"):
        raise ValueError(f"branch must be 'plus' or 'minus', got {branch!r}")
    if eps <= 0:
        raise DegenerateParameterError("dispersion requires epsilon > 0")
    k2 = float(kmag) ** 2
    if ups == 0:
        if branch == "minus":
            raise DegenerateParameterError("fast branch does not exist for upsilon = 0")
        return 0.5 * eps * k2
    a = eps**2 * ups**2 * k2
    root = math.sqrt(1.0 + a)
    if branch == "plus":
        # cancellation-free form of (-1 + sqrt(1+a)) / (eps ups^2)
        return a / (1.0 + root) / (eps * ups**2)
    return (-1.0 - root) / (eps * ups**2)


def plane_wave(grid: SpectralGrid, kvec: Sequence[float] | Sequence[int], amplitude: float,
               params: Params, branch: str = "plus", time: float = 0.0,
               lattice: bool = True) -> KGState:
    """Exact solution ``A exp(i(k.x - w t))``; requires ``b0 = A^2`` so that V = 0.

    With ``lattice=True`` (default) ``kvec`` holds integer mode indices.
    """
    if not params.constant_background or abs(params.b0 - amplitude**2) > 1e-12:
        raise PreconditionError(f"plane wave needs b0 = A^2 = {amplitude**2}, got b0 = {params.b0}")
    if lattice:
        idx = np.asarray(kvec, dtype=float).reshape(grid.dim)
        if np.any(idx != np.round(idx)):
            raise PreconditionError("kvec is not on the reciprocal lattice")
        k = grid.lattice_vector(idx)
    else:
        k = np.asarray(kvec, dtype=float).reshape(grid.dim)
    omega = dispersion_omega(float(np.linalg.norm(k)), params, branch)
    phi = amplitude * np.exp(1j * (grid.dot_x(k) - omega * time)) * np.ones(grid.shape)
    return KGState(grid, phi, -1j * omega * phi, time)


def stability_bound(grid: SpectralGrid, params: Params) -> float:
    omega_max = abs(dispersion_omega(grid.k_nyquist, params, "minus"))
    return 0.5 / omega_max


def auto_dt(grid: SpectralGrid, params: Params, safety: float = 0.5) -> float:
    return safety * stability_bound(grid, params)


def _rk4(state: KGState, params: Params, dt: float) -> KGState:
    # stage densities are not physical states; the drift check applies to step endpoints only
    def rhs(phi, phi_t):
        return phi_t, kg_acceleration(KGState(state.grid, phi, phi_t), params, math.inf)

    p0, v0 = state.phi, state.phi_t
    k1p, k1v = rhs(p0, v0)
    k2p, k2v = rhs(p0 + 0.5 * dt * k1p, v0 + 0.5 * dt * k1v)
    k3p, k3v = rhs(p0 + 0.5 * dt * k2p, v0 + 0.5 * dt * k2v)
    k4p, k4v = rhs(p0 + dt * k3p, v0 + dt * k3v)
    phi = p0 + dt / 6.0 * (k1p + 2 * k2p + 2 * k3p + k4p)
    phi_t = v0 + dt / 6.0 * (k1v + 2 * k2v + 2 * k3v + k4v)
    return KGState(state.grid, phi, phi_t, state.time + dt)


def kg_step(state: KGState, params: Params, dt: float) -> KGState:
    """One RK4 step; negative ``dt`` integrates backwards."""
    if params.upsilon == 0 or params.epsilon == 0:
        raise DegenerateParameterError("KG stepping needs eps > 0 and ups > 0")
    bound = stability_bound(state.grid, params)
    if abs(dt) > bound * (1 + 1e-12):
        raise StabilityError(f"|dt| = {abs(dt):.3e} exceeds stability bound {bound:.3e}")
    new = _rk4(state, params, dt)
    potential(new.grid, np.abs(new.phi) ** 2, params)
    return new


def kg_charge(state: KGState, params: Params) -> float:
    """``integral of |phi|^2 - eps ups^2 Im(conj(phi) phi_t)``, i.e. n - ups^2 n S_t."""
    dens = np.abs(state.phi) ** 2 - params.epsilon * params.upsilon**2 * np.imag(
        np.conj(state.phi) * state.phi_t
    )
    return state.grid.integrate(dens)


def kg_solve(init: KGState, params: Params, T: float, dt: float) -> Trajectory[KGState]:
    """Evolve to time ``T``; ``dt`` is shrunk slightly if needed to land on ``T``."""
    grid = init.grid
    if not params.constant_background:
        b = background_field(grid, params)
        if abs(np.mean(b) - np.mean(np.abs(init.phi) ** 2)) > params.compat_tol * max(1.0, params.b0):
            raise CompatibilityError("mean(background) must equal mean(|phi0|^2)")
    check_initial_charge(grid, np.abs(init.phi) ** 2, params)
    nsteps, dt = step_count(T, dt)
    check_memory(2 * 16 * grid.size * (nsteps + 1))
    if nsteps:
        bound = stability_bound(grid, params)
        if dt > bound * (1 + 1e-12):
            raise StabilityError(f"dt = {dt:.3e} exceeds stability bound {bound:.3e}")
    states = [init]
    charge = [kg_charge(init, params)]
    defect = [potential(grid, np.abs(init.phi) ** 2, params).defect]
    state = init
    for i in range(nsteps):
        state = _rk4(state, params, dt)
        state = replace(state, time=init.time + (i + 1) * dt)
        states.append(state)
        charge.append(kg_charge(state, params))
        defect.append(potential(grid, np.abs(state.phi) ** 2, params).defect)
    log.debug("kg_solve: %d steps of %.3e, charge drift %.2e", nsteps, dt, charge[-1] - charge[0])
    return Trajectory(dt, states, {"charge": np.array(charge), "mean_defect": np.array(defect)})
