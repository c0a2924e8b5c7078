"""Monitored well-posedness quantities along a reformulated trajectory.

The analytic estimates involve generic constants ``N`` and ``C`` that are
never pinned down; they are configuration inputs here and the monitor
reports values and ratios rather than asserting inequalities.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np

from ..kg import Params, Trajectory
from ..madelung import check_vacuum
from .reform import CauchyData, ReformHistory, assemble_sources

NORM_COLUMNS = ("t", "psi_H4", "psit_H3", "psitt_H2", "Psi_H4", "Psit_H3", "Psitt_H2", "Phi_H4", "min_n", "Q")
M_EXPONENT = 6


@dataclass
class WellposednessEstimates:
    a0: float
    I0: float
    M0: float
    M1: float
    Tstar: float
    delta: float
    admissible: bool
    N: float = 1.0
    C: float = 1.0
    lemma5_ratio: float = float("nan")
    lemma5_fitted_C: float = float("nan")
    norm_history: dict[str, list[float]] = field(default_factory=dict)

    def to_json(self) -> dict:
        out = {k: v for k, v in self.__dict__.items() if k != "norm_history"}
        return {k: (None if isinstance(v, float) and not math.isfinite(v) else v) for k, v in out.items()}

    def norm_history_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(NORM_COLUMNS)
        for row in zip(*(self.norm_history[c] for c in NORM_COLUMNS)):
            w.writerow([repr(float(v)) for v in row])
        return buf.getvalue()


def amplitude_ratio(data: CauchyData, params: Params, m: int = M_EXPONENT) -> float:
    """``a0 = (1 + max R0)^m / (min R0)^m`` with ``R0 = Psi0 + sqrt(nbar)``."""
    R0 = data.Psi0 + math.sqrt(params.nbar)
    return float((1.0 + np.max(R0)) ** m / np.min(R0) ** m)


def initial_size(data: CauchyData, params: Params) -> float:
    """``I0``: charge defect in L2 plus the H3/H4 sizes of the four data fields."""
    g = data.grid
    R0 = data.Psi0 + math.sqrt(params.nbar)
    return (g.l2_norm(R0**2 - params.b0) + g.sobolev_norm(data.psi1, 3) + g.sobolev_norm(data.Psi1, 3)
            + g.sobolev_norm(data.psi0, 4) + g.sobolev_norm(data.Psi0, 4))


def existence_time(I0: float, a0: float, M0: float, M1: float, T: float, N: float, C: float) -> float:
    if I0 == 0:
        return min(1.0, T) if T > 0 else 1.0
    t1 = I0 / (N * C * a0 * M1 * (M0 + M1))
    t2 = I0 / (C * N * (M0 + M1 + 2 * I0**2 * M1) ** 3)
    return min(1.0, T if T > 0 else 1.0, t1, t2)


def energy_estimate_ratio(grid, u: np.ndarray, u_t: np.ndarray, F: np.ndarray, dt: float,
                          C: float = 1.0) -> tuple[float, float]:
    """Linear-wave energy bound, checked along a stacked solution.

    Left side ``sup_{s<=t} (||u'|| + ||u||_H1)``; right side
    ``C (||u1|| + ||u0||_H1 + int_0^t ||F|| ds)``. Returns the max ratio for
    the supplied ``C`` and the smallest ``C`` that makes the bound hold.
    """
    lhs = np.array([grid.l2_norm(a) + grid.sobolev_norm(b, 1) for a, b in zip(u_t, u)])
    lhs = np.maximum.accumulate(lhs)
    fn = np.array([grid.l2_norm(f) for f in F])
    integral = np.concatenate([[0.0], np.cumsum(0.5 * dt * (fn[1:] + fn[:-1]))])
    rhs = grid.l2_norm(u_t[0]) + grid.sobolev_norm(u[0], 1) + integral
    with np.errstate(divide="ignore", invalid="ignore"):
        r = np.where(rhs > 0, lhs / np.where(rhs > 0, rhs, 1.0), 0.0)
    fitted = float(np.max(r))
    return fitted / C, fitted


def monitor_estimates(traj: Trajectory, data: CauchyData, params: Params, N: float = 1.0,
                      C: float = 1.0, history: ReformHistory | None = None) -> WellposednessEstimates:
    grid = data.grid
    R0 = data.Psi0 + math.sqrt(params.nbar)
    check_vacuum(R0**2, params, "initial density")
    if history is None:
        history = ReformHistory.from_states(traj.states, traj.dt)
    T = float(history.times[-1] - history.times[0])
    a0 = amplitude_ratio(data, params)
    I0 = initial_size(data, params)
    M0 = M1 = 4.0 * N * I0
    Tstar = existence_time(I0, a0, M0, M1, T, N, C)
    admissible = bool(np.max(np.abs(R0**2 - params.nbar)) < params.delta)

    nt, dt = history.nt, history.dt
    if nt >= 3:
        psi_tt = np.gradient(history.psi_t, dt, axis=0, edge_order=2)
        Psi_tt = np.gradient(history.Psi_t, dt, axis=0, edge_order=2)
    elif nt == 2:
        psi_tt = np.gradient(history.psi_t, dt, axis=0)
        Psi_tt = np.gradient(history.Psi_t, dt, axis=0)
    else:
        psi_tt = np.zeros_like(history.psi_t)
        Psi_tt = np.zeros_like(history.Psi_t)
    R = history.Psi + math.sqrt(params.nbar)
    n = R**2
    ups2 = params.upsilon**2
    hist = {c: [] for c in NORM_COLUMNS}
    for i, t in enumerate(history.times):
        hist["t"].append(float(t))
        hist["psi_H4"].append(grid.sobolev_norm(history.psi[i], 4))
        hist["psit_H3"].append(grid.sobolev_norm(history.psi_t[i], 3))
        hist["psitt_H2"].append(grid.sobolev_norm(psi_tt[i], 2))
        hist["Psi_H4"].append(grid.sobolev_norm(history.Psi[i], 4))
        hist["Psit_H3"].append(grid.sobolev_norm(history.Psi_t[i], 3))
        hist["Psitt_H2"].append(grid.sobolev_norm(Psi_tt[i], 2))
        hist["Phi_H4"].append(grid.sobolev_norm(history.Phi[i], 4))
        hist["min_n"].append(float(np.min(n[i])))
        hist["Q"].append(grid.integrate(n[i] - ups2 * n[i] * history.psi_t[i]))

    src = assemble_sources(history, params)
    ratio, fitted = energy_estimate_ratio(grid, history.Psi, history.Psi_t, src.g, dt, C)
    return WellposednessEstimates(a0, I0, M0, M1, Tstar, params.delta, admissible, N, C,
                                  ratio, fitted, hist)
