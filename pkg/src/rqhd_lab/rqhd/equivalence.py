"""Cross-check of the Picard solution against the Madelung image of the KG solution."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..kg import KGState, Params, Trajectory, kg_solve
from ..madelung import HydroState, hydro_distances, initial_data_kg_from_hydro, kg_to_hydro
from ..spectral import SpectralGrid
from .monitor import WellposednessEstimates
from .picard import IterationReport, picard_solve, to_hydro
from .reform import cauchy_from_hydro


@dataclass
class EquivalenceResult:
    distance: float
    distances: list[float]
    kg: Trajectory[HydroState]
    picard: Trajectory[HydroState]
    report: IterationReport
    estimates: WellposednessEstimates


def compare_kg_picard(grid: SpectralGrid, n0, n1, S0, S1, params: Params, T: float, dt: float,
                      winding=None, tol: float = 1e-9, max_iter: int = 50, window: float | None = None,
                      N: float = 1.0, C: float = 1.0, kg_init: KGState | None = None) -> EquivalenceResult:
    """Solve the same Cauchy problem both ways on one time grid.

    ``S0`` is the periodic part of the phase; ``kg_init`` overrides the
    KG data built from the hydrodynamic fields (for families with an exact
    KG representation).
    """
    winding = tuple(winding) if winding is not None else (0,) * grid.dim
    if kg_init is None:
        S_full = np.asarray(S0, dtype=float) + grid.dot_x(params.epsilon * grid.lattice_vector(winding))
        phi0, phi1 = initial_data_kg_from_hydro(n0, n1, S_full, S1, params)
        kg_init = KGState(grid, phi0, phi1)
    kt = kg_solve(kg_init, params, T, dt)
    kh = Trajectory(kt.dt, [kg_to_hydro(s, params) for s in kt], dict(kt.diagnostics))
    data = cauchy_from_hydro(grid, n0, n1, S0, S1, params, winding)
    traj, report, estimates = picard_solve(data, params, T, dt, tol=tol, max_iter=max_iter,
                                           window=window, N=N, C=C)
    ph = to_hydro(traj, params)
    d = hydro_distances(kh, ph)
    return EquivalenceResult(max(d), d, kh, ph, report, estimates)
