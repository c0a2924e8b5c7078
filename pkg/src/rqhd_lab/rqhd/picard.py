"""Picard iteration for the reformulated system.

Each iterate solves two linear wave equations with sources frozen at the
previous iterate and a Poisson equation per time slice. Long horizons are
covered by consecutive windows, each restarted from the end state of the
previous one; a single window reproduces the textbook scheme.
"""

from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from ..errors import AdmissibilityError, NoConvergenceError, VacuumError
from ..kg import Params, Trajectory, check_memory, step_count
from ..madelung import HydroState, check_vacuum
from .monitor import monitor_estimates
from .reform import (
    CauchyData,
    ReformHistory,
    ReformState,
    _require_picard_params,
    assemble_sources,
    unreformulate,
)
from .wave import linear_wave_solve

log = logging.getLogger(__name__)


@dataclass
class IterationReport:
    iterations: int = 0
    successive_diffs: list[float] = field(default_factory=list)
    converged: bool = False
    contraction_ratio_estimate: float = float("nan")
    window_iterations: list[int] = field(default_factory=list)

    def to_json(self) -> dict:
        return asdict(self)


def initial_history(data: CauchyData, params: Params, nt: int, dt: float, t0: float = 0.0) -> ReformHistory:
    """First iterate: the initial data frozen in time."""
    grid = data.grid
    R0 = data.Psi0 + math.sqrt(params.nbar)
    Phi0 = grid.solve_poisson(R0**2 - params.b0, compat_tol=params.drift_tol, scale=params.b0).V
    rep = lambda a: np.repeat(a[None], nt, axis=0)  # noqa: E731
    return ReformHistory(grid, dt, t0, rep(data.psi0), rep(data.psi1), rep(data.Psi0),
                         rep(data.Psi1), rep(Phi0), tuple(data.winding))


def _poisson_stack(grid, h: np.ndarray, params: Params) -> np.ndarray:
    means = np.mean(h, axis=tuple(range(1, h.ndim)))
    worst = float(np.max(np.abs(means)))
    if worst > params.drift_tol * params.b0 and worst > 1e-13:
        grid.solve_poisson(h[int(np.argmax(np.abs(means)))], params.drift_tol, params.b0)
    return grid.inverse_laplacian(h)


def picard_iterate(Up: ReformHistory, data: CauchyData, params: Params,
                   dealias: bool = True) -> ReformHistory:
    """One sweep: ``U_{p+1}`` from sources evaluated on ``U_p``."""
    src = assemble_sources(Up, params, dealias)
    grid, speed = Up.grid, 1.0 / params.upsilon
    psi, psi_t = linear_wave_solve(grid, data.psi0, data.psi1, src.f, Up.dt, speed)
    Psi, Psi_t = linear_wave_solve(grid, data.Psi0, data.Psi1, src.g, Up.dt, speed)
    Phi = _poisson_stack(grid, src.h, params)
    return ReformHistory(grid, Up.dt, Up.t0, psi, psi_t, Psi, Psi_t, Phi, Up.winding)


def h1_sup_diff(a: ReformHistory, b: ReformHistory) -> float:
    """``sup_t (||d psi||_H1^2 + ||d Psi||_H1^2)^(1/2)`` over the shared time nodes."""
    grid = a.grid
    w = 1.0 + grid.k2
    axes = tuple(range(1, 1 + grid.dim))
    e = np.sum(w * (np.abs(grid.fft(a.psi - b.psi)) ** 2 + np.abs(grid.fft(a.Psi - b.Psi)) ** 2), axis=axes)
    return float(np.sqrt(grid.volume * np.max(e)) / grid.size)


def _ratio_estimate(diffs: list[float]) -> float:
    r = [b / a for a, b in zip(diffs, diffs[1:]) if a > 0 and b > 0]
    if not r:
        return 0.0 if diffs and diffs[-1] == 0 else float("nan")
    return float(np.exp(np.mean(np.log(r))))


def _solve_window(data: CauchyData, params: Params, nt: int, dt: float, t0: float, tol: float,
                  max_iter: int, dealias: bool, report: IterationReport) -> ReformHistory:
    U = initial_history(data, params, nt, dt, t0)
    diffs = []
    for it in range(1, max_iter + 1):
        try:
            U_next = picard_iterate(U, data, params, dealias)
        except VacuumError as exc:
            # the data were checked, so an iterate leaving the admissible set means divergence
            if it == 1:
                raise
            report.window_iterations.append(it - 1)
            raise NoConvergenceError(f"Picard iterate reached vacuum at t0 = {t0:.4g}: {exc}", report) from exc
        d = h1_sup_diff(U_next, U)
        diffs.append(d)
        report.iterations += 1
        report.successive_diffs.append(d)
        U = U_next
        if not math.isfinite(d) or (len(diffs) > 3 and d > 1e6 * max(diffs[0], tol)):
            report.window_iterations.append(it)
            raise NoConvergenceError(f"Picard iteration diverged at t0 = {t0:.4g} (diff {d:.3e})", report)
        if d <= tol:
            report.window_iterations.append(it)
            break
    else:
        report.window_iterations.append(max_iter)
        report.contraction_ratio_estimate = _ratio_estimate(diffs)
        raise NoConvergenceError(
            f"no convergence in {max_iter} iterations (last diff {diffs[-1]:.3e} > tol {tol:.1e})", report
        )
    # potential consistent with the converged density
    R = U.Psi + math.sqrt(params.nbar)
    U.Phi = _poisson_stack(U.grid, R**2 - params.b0, params)
    return U


def auto_window(params: Params, safety: float = 0.25) -> float:
    """Window length ``safety / w_fast`` with ``w_fast = 2/(eps ups^2)``, the rest-mass frequency.

    The per-sweep contraction factor scales like ``w_fast * window``.
    """
    _require_picard_params(params)
    return safety * params.epsilon * params.upsilon**2 / 2.0


def check_admissible(data: CauchyData, params: Params) -> None:
    n0 = (data.Psi0 + math.sqrt(params.nbar)) ** 2
    check_vacuum(n0, params, "initial density")
    dev = float(np.max(np.abs(n0 - params.nbar)))
    if dev >= params.delta:
        raise AdmissibilityError(f"|n0 - nbar| reaches {dev:.3e} >= delta = {params.delta:.3e}")


def picard_solve(data: CauchyData, params: Params, T: float, dt: float, tol: float = 1e-9,
                 max_iter: int = 50, window: float | None = None, N: float = 1.0, C: float = 1.0,
                 dealias: bool = True, admissibility: bool = True):
    """Solve on ``[0, T]``; returns ``(Trajectory[ReformState], IterationReport, WellposednessEstimates)``.

    ``window`` limits the length of each Picard sweep (default: the whole horizon).
    """
    _require_picard_params(params)
    grid = data.grid
    if admissibility:
        check_admissible(data, params)
    R0 = data.Psi0 + math.sqrt(params.nbar)
    grid.solve_poisson(R0**2 - params.b0, compat_tol=params.compat_tol)
    nsteps, dt = step_count(T, dt)
    check_memory(8 * grid.size * (nsteps + 1) * 5 * 6, "Picard history")
    per_window = nsteps if window is None or nsteps == 0 else max(1, int(round(window / dt)))
    report = IterationReport()
    pieces = []
    current, start = data, 0
    while True:
        m = min(per_window, nsteps - start)
        U = _solve_window(current, params, m + 1, dt, start * dt, tol, max_iter, dealias, report)
        pieces.append(U if not pieces else _drop_first(U))
        start += m
        if start >= nsteps:
            break
        current = CauchyData(grid, U.psi[-1], U.psi_t[-1], U.Psi[-1], U.Psi_t[-1], current.winding)
    report.converged = True
    report.contraction_ratio_estimate = max(
        (_ratio_estimate(report.successive_diffs[a - n:a])
         for a, n in zip(np.cumsum(report.window_iterations), report.window_iterations)),
        key=lambda r: -1.0 if math.isnan(r) else r,
    )
    history = _concat(pieces)
    traj = Trajectory(dt, history.states())
    estimates = monitor_estimates(traj, data, params, N=N, C=C, history=history)
    traj.diagnostics["charge"] = np.array(estimates.norm_history["Q"])
    log.debug("picard_solve: %d windows, %d sweeps", len(report.window_iterations), report.iterations)
    return traj, report, estimates


def _drop_first(U: ReformHistory) -> ReformHistory:
    return ReformHistory(U.grid, U.dt, U.t0 + U.dt, U.psi[1:], U.psi_t[1:], U.Psi[1:], U.Psi_t[1:],
                         U.Phi[1:], U.winding)


def _concat(pieces: list[ReformHistory]) -> ReformHistory:
    p0 = pieces[0]
    cat = lambda name: np.concatenate([getattr(p, name) for p in pieces])  # noqa: E731
    return ReformHistory(p0.grid, p0.dt, p0.t0, cat("psi"), cat("psi_t"), cat("Psi"), cat("Psi_t"),
                         cat("Phi"), p0.winding)


def to_hydro(traj: Trajectory[ReformState], params: Params) -> Trajectory[HydroState]:
    states = [unreformulate(s, params) for s in traj]
    return Trajectory(traj.dt, states, dict(traj.diagnostics))
