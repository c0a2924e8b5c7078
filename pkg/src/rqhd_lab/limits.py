"""Singular limits of the hydrodynamic system and empirical convergence studies.

Once ``eps = 0`` or ``ups = 0`` the term ``eps^2 ups^2 R_tt / R`` drops out
and the phase equation becomes algebraic in ``S_t``:

    ups^2 S_t^2 - 2 S_t - X = 0,   X = |grad S|^2 + 2V - eps^2 Lap R / R,

so ``S_t = -X / (1 + sqrt(1 + ups^2 X))``. The conserved charge density
``rho = n (1 - ups^2 S_t) = n sqrt(1 + ups^2 X)`` then obeys
``rho_t = -div(n grad S)``. This first-order system in ``(rho, S)`` covers
all three limits: quantum Euler-Poisson (ups = 0), relativistic
Euler-Poisson (eps = 0) and Euler-Poisson (both zero).
"""

from __future__ import annotations

import csv
import io
import logging
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import (
    DegenerateParameterError,
    FitError,
    NoConvergenceError,
    PreconditionError,
    RQHDError,
    StabilityError,
    StudyError,
    VacuumError,
)
from .kg import KGState, Params, Trajectory, auto_dt, kg_solve, potential, step_count
from .madelung import HydroState, check_vacuum, hydro_distance, initial_data_kg_from_hydro, kg_to_hydro
from .spectral import SpectralGrid

log = logging.getLogger(__name__)

KINDS = ("semiclassical", "nonrelativistic", "combined")
INNER_TOL = 1e-14
INNER_MAX_ITER = 200
PREP_STEP = 1e-3
SINGULAR_TOL = 0.05
RK4_IMAG_LIMIT = 2.8  # RK4 stability interval on the imaginary axis is 2 sqrt(2)


@dataclass(frozen=True)
class LimitSwitches:
    """Which corrections survive: ``quantum`` (eps terms) and ``relativistic`` (ups terms)."""

    quantum: bool = True
    relativistic: bool = True

    @classmethod
    def for_kind(cls, kind: str) -> "LimitSwitches":
        return cls().then(kind)

    def then(self, kind: str) -> "LimitSwitches":
        if kind == "semiclassical":
            return LimitSwitches(False, self.relativistic)
        if kind == "nonrelativistic":
            return LimitSwitches(self.quantum, False)
        if kind == "combined":
            return LimitSwitches(False, False)
        raise PreconditionError(f"unknown limit kind {kind!r}; expected one of {KINDS}")


def limit_params(kind: str, params: Params) -> Params:
    """Parameters of the limit system: the vanishing parameter set to 0."""
    sw = LimitSwitches.for_kind(kind)
    return params.with_(epsilon=params.epsilon if sw.quantum else 0.0,
                        upsilon=params.upsilon if sw.relativistic else 0.0)


@dataclass(frozen=True)
class LimitRHS:
    n: np.ndarray
    V: np.ndarray
    S_t: np.ndarray
    rho_t: np.ndarray
    grad_S: np.ndarray
    terms: dict


def _grad_S(grid: SpectralGrid, S: np.ndarray, k0) -> np.ndarray:
    return grid.gradient(S) + np.asarray(k0, dtype=float).reshape((grid.dim,) + (1,) * grid.dim)


def limit_rhs(grid: SpectralGrid, rho: np.ndarray, S: np.ndarray, k0, params: Params,
              switches: LimitSwitches = LimitSwitches(), dealias: bool = True) -> LimitRHS:
    """Time derivatives ``(S_t, rho_t)`` of the limit system and its named terms.

    Quantum terms are evaluated only for ``eps > 0`` with ``switches.quantum``;
    the square-root closure only for ``ups > 0`` with ``switches.relativistic``.
    Valid only when one of those two is off (the full system is second order).
    """
    eps2 = params.epsilon**2 if switches.quantum else 0.0
    ups2 = params.upsilon**2 if switches.relativistic else 0.0
    if eps2 and ups2:
        raise PreconditionError("the limit closure needs eps = 0 or ups = 0")
    check_vacuum(rho, params, "charge density")
    grad_S = _grad_S(grid, S, k0)
    terms = {"kinetic": np.sum(grad_S**2, axis=0)}
    if eps2:
        R = np.sqrt(rho)
        terms["quantum"] = -eps2 * grid.laplacian(R) / R

    def closure(n):
        V = potential(grid, n, params).V
        X = terms["kinetic"] + 2.0 * V
        if "quantum" in terms:
            X = X + terms["quantum"]
        return V, X

    if not ups2:
        n = rho
        V, X = closure(n)
        S_t = -0.5 * X
    else:
        n = _solve_closure(grid, rho, closure, ups2)
        V, X = closure(n)
        D = 1.0 + ups2 * X
        S_t = -X / (1.0 + np.sqrt(D))
        terms["relativistic"] = D
    terms["potential"] = 2.0 * V
    check_vacuum(n, params)
    rho_t = -grid.divergence(n * grad_S)
    if dealias:
        S_t, rho_t = grid.dealias(S_t), grid.dealias(rho_t)
    return LimitRHS(n, V, S_t, rho_t, grad_S, terms)


def _solve_closure(grid: SpectralGrid, rho: np.ndarray, closure, ups2: float) -> np.ndarray:
    """Solve ``n sqrt(1 + ups^2 X(n)) = rho`` for ``n``.

    Newton steps with the Jacobian frozen at the mean state, which is
    diagonal in Fourier space: ``sqrt(D) - n ups^2 / (sqrt(D) |k|^2)``.
    That symbol vanishes when ``ups^2 n / |k|^2 = D`` for a lattice mode,
    where the first-order closure itself is singular.
    """
    n = rho
    for _ in range(INNER_MAX_ITER):
        V, X = closure(n)
        D = 1.0 + ups2 * X
        if np.min(D) <= 0:
            raise VacuumError("1 + ups^2 X is not positive; no real phase velocity")
        root = np.sqrt(D)
        F = n * root - rho
        if float(np.max(np.abs(F))) <= INNER_TOL * float(np.max(rho)):
            return n
        rD, nm = float(np.mean(root)), float(np.mean(n))
        symbol = rD - nm * ups2 * grid._inv_k2 / rD
        if np.min(np.abs(symbol)) < SINGULAR_TOL * rD:
            raise DegenerateParameterError(
                f"limit closure is singular: ups^2 n / |k|^2 = {ups2 * nm:.3g} / |k|^2 hits D = {rD**2:.3g}"
            )
        n = n - grid.ifft(grid.fft(F) / symbol)
    raise NoConvergenceError("density closure did not converge")


def _rk4(grid, rho, S, k0, params, switches, dt, dealias):
    def f(r, s):
        out = limit_rhs(grid, r, s, k0, params, switches, dealias)
        return out.rho_t, out.S_t

    a1, b1 = f(rho, S)
    a2, b2 = f(rho + 0.5 * dt * a1, S + 0.5 * dt * b1)
    a3, b3 = f(rho + 0.5 * dt * a2, S + 0.5 * dt * b2)
    a4, b4 = f(rho + dt * a3, S + dt * b3)
    return (rho + dt / 6.0 * (a1 + 2 * a2 + 2 * a3 + a4),
            S + dt / 6.0 * (b1 + 2 * b2 + 2 * b3 + b4))


def charge_density(grid: SpectralGrid, n0, S0, k0, params: Params,
                   switches: LimitSwitches = LimitSwitches()) -> np.ndarray:
    """``rho`` with ``n(rho) = n0``; inverts the closure at fixed ``n``."""
    n0 = np.asarray(n0, dtype=float) * np.ones(grid.shape)
    ups2 = params.upsilon**2 if switches.relativistic else 0.0
    if not ups2:
        return n0
    grad_S = _grad_S(grid, S0, k0)
    X = np.sum(grad_S**2, axis=0) + 2.0 * potential(grid, n0, params).V
    return n0 * np.sqrt(1.0 + ups2 * X)


def _mean_velocity(grid: SpectralGrid, winding, params: Params):
    winding = tuple(int(w) for w in winding) if winding is not None else (0,) * grid.dim
    if any(winding) and params.epsilon == 0:
        raise PreconditionError("a phase winding is quantised by eps and needs eps > 0")
    return winding, params.epsilon * grid.lattice_vector(winding)


def solve_limit_system(kind: str, grid: SpectralGrid, n0, S0, params: Params, T: float, dt: float,
                       winding=None, switches: LimitSwitches | None = None,
                       dealias: bool = True) -> Trajectory[HydroState]:
    """Integrate a limit system by RK4 from density ``n0`` and periodic phase ``S0``.

    ``kind`` picks the switches unless they are given explicitly. The mean
    velocity ``k0 = eps * 2 pi winding / extent`` uses ``params.epsilon``
    before the switches apply, so it matches the full system it is compared
    with. The returned states carry ``n_t`` from centred differences of ``n``.
    """
    switches = LimitSwitches.for_kind(kind) if switches is None else switches
    winding, k0 = _mean_velocity(grid, winding, params)
    lp = params.with_(epsilon=params.epsilon if switches.quantum else 0.0,
                      upsilon=params.upsilon if switches.relativistic else 0.0)
    n0 = np.asarray(n0, dtype=float) * np.ones(grid.shape)
    check_vacuum(n0, params, "initial density")
    grid.solve_poisson(n0 - lp.b0, compat_tol=lp.compat_tol)
    S = np.asarray(S0, dtype=float) * np.ones(grid.shape)
    S = S - np.mean(S)
    rho = charge_density(grid, n0, S, k0, lp, switches)
    nsteps, dt = step_count(T, dt)
    if nsteps and switches.quantum and lp.epsilon > 0:
        # dispersive frequency of the quantum term at the grid cutoff
        omega = 0.5 * lp.epsilon * grid.k_nyquist**2
        if dt * omega > RK4_IMAG_LIMIT:
            raise StabilityError(f"dt = {dt:.3e} exceeds the dispersive bound {RK4_IMAG_LIMIT / omega:.3e}")
    raw = []
    for i in range(nsteps + 1):
        out = limit_rhs(grid, rho, S, k0, lp, switches, dealias)
        raw.append((out, S - np.mean(S)))
        if i < nsteps:
            rho, S = _rk4(grid, rho, S, k0, lp, switches, dt, dealias)
    ns = np.stack([r[0].n for r in raw])
    if nsteps >= 2:
        n_t = np.gradient(ns, dt, axis=0, edge_order=2)
    elif nsteps == 1:
        n_t = np.gradient(ns, dt, axis=0)
    else:
        n_t = np.stack([raw[0][0].rho_t])
    states = []
    for i, (out, S_per) in enumerate(raw):
        states.append(HydroState(grid, out.n, n_t[i], S_per, winding, tuple(float(k) for k in k0),
                                 out.grad_S, out.S_t, out.V, i * dt))
    return Trajectory(dt, states, {"charge": np.array([grid.integrate(r[0].n * (1 - lp.upsilon**2 * r[0].S_t))
                                                       for r in raw])})


def prepared_data(kind: str, grid: SpectralGrid, n0, S0, params: Params, winding=None,
                  h: float = PREP_STEP):
    """``(n1, S1)`` consistent with the limit system, so the full solution starts on its slow manifold."""
    winding, k0 = _mean_velocity(grid, winding, params)
    sw = LimitSwitches.for_kind(kind)
    lp = limit_params(kind, params)
    n0 = np.asarray(n0, dtype=float) * np.ones(grid.shape)
    S0 = np.asarray(S0, dtype=float) * np.ones(grid.shape)
    rho = charge_density(grid, n0, S0, k0, lp, sw)
    out = limit_rhs(grid, rho, S0, k0, lp, sw, dealias=False)
    if not (lp.upsilon and sw.relativistic):
        return out.rho_t, out.S_t
    fwd = _rk4(grid, rho, S0, k0, lp, sw, h, False)
    bwd = _rk4(grid, rho, S0, k0, lp, sw, -h, False)
    n_fwd = limit_rhs(grid, fwd[0], fwd[1], k0, lp, sw, False).n
    n_bwd = limit_rhs(grid, bwd[0], bwd[1], k0, lp, sw, False).n
    return (n_fwd - n_bwd) / (2 * h), out.S_t


def solve_full(grid: SpectralGrid, n0, n1, S0, S1, params: Params, T: float, dt: float,
               winding=None, solver: str = "kg", tol: float = 1e-10, window: float | None = None,
               max_iter: int = 50) -> Trajectory[HydroState]:
    """Hydrodynamic trajectory of the full system via KG or the Picard iteration."""
    winding = tuple(winding) if winding is not None else (0,) * grid.dim
    if solver == "kg":
        S_full = np.asarray(S0, dtype=float) + grid.dot_x(params.epsilon * grid.lattice_vector(winding))
        phi0, phi1 = initial_data_kg_from_hydro(n0, n1, S_full, S1, params)
        kt = kg_solve(KGState(grid, phi0, phi1), params, T, dt)
        return Trajectory(kt.dt, [kg_to_hydro(s, params) for s in kt], dict(kt.diagnostics))
    if solver == "picard":
        from .rqhd.picard import auto_window, picard_solve, to_hydro
        from .rqhd.reform import cauchy_from_hydro

        data = cauchy_from_hydro(grid, n0, n1, S0, S1, params, winding)
        w = auto_window(params) if window is None else window
        traj, _, _ = picard_solve(data, params, T, dt, tol=tol, max_iter=max_iter, window=w,
                                  admissibility=False)
        return to_hydro(traj, params)
    raise PreconditionError(f"solver must be 'kg' or 'picard', got {solver!r}")


@dataclass
class ConvergenceTable:
    limit_kind: str
    params: list[float]
    discrepancies: list[float]
    fitted_order: float = float("nan")
    fit_residual: float = float("nan")
    failures: dict[int, str] = field(default_factory=dict)

    def __post_init__(self):
        if len(self.params) != len(self.discrepancies):
            raise PreconditionError("params and discrepancies differ in length")

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["param", "discrepancy"])
        for p, d in zip(self.params, self.discrepancies):
            w.writerow([repr(float(p)), "nan" if math.isnan(d) else repr(float(d))])
        return buf.getvalue()

    def summary(self) -> dict:
        clean = lambda v: None if math.isnan(v) else v  # noqa: E731
        return {"kind": self.limit_kind, "fitted_order": clean(self.fitted_order),
                "fit_residual": clean(self.fit_residual)}

    @property
    def strictly_decreasing(self) -> bool:
        d = self.discrepancies
        return all(b < a for a, b in zip(d, d[1:]))


def fit_order(table_or_params, discrepancies=None) -> tuple[float, float]:
    """Least-squares slope of ``log d`` against ``log p`` and the RMS residual of the fit."""
    if isinstance(table_or_params, ConvergenceTable):
        p, d = table_or_params.params, table_or_params.discrepancies
    else:
        p, d = table_or_params, discrepancies
    p, d = np.asarray(p, dtype=float), np.asarray(d, dtype=float)
    if p.size < 3:
        raise FitError(f"need at least 3 points, got {p.size}")
    if np.any(~(d > 0)) or np.any(~(p > 0)):
        raise FitError("discrepancies and parameters must be positive to fit an order")
    x, y = np.log(p), np.log(d)
    A = np.vstack([x, np.ones_like(x)]).T
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    resid = y - A @ coef
    return float(coef[0]), float(np.sqrt(np.mean(resid**2)))


def thread_count() -> int:
    raw = os.environ.get("RQHD_THREADS")
    if raw:
        try:
            return max(1, int(raw))
        except ValueError:
            log.warning("ignoring non-integer RQHD_THREADS=%r", raw)
    return min(4, os.cpu_count() or 1)


def study_params(kind: str, base: Params, value: float) -> Params:
    if kind == "semiclassical":
        return base.with_(epsilon=value)
    if kind == "nonrelativistic":
        return base.with_(upsilon=value)
    if kind == "combined":
        return base.with_(epsilon=value, upsilon=value)
    raise PreconditionError(f"unknown limit kind {kind!r}; expected one of {KINDS}")


def convergence_study(kind: str, grid: SpectralGrid, n0, S0, base: Params, values: Sequence[float],
                      T: float, dt: float | None = None, winding=None, solver: str = "kg",
                      tol: float = 1e-10, threads: int | None = None,
                      progress: Callable[[int, float], None] | None = None) -> ConvergenceTable:
    """Distance between the full and the limit solution for each parameter value.

    Both runs start from identical ``(n0, S0)``, with ``(n1, S1)`` prepared
    from the limit system. ``dt`` is shared by all runs; by default it is the
    KG auto step of the stiffest member.
    """
    values = [float(v) for v in values]
    if len(values) < 3:
        raise PreconditionError("a study needs at least 3 parameter values")
    if any(b >= a for a, b in zip(values, values[1:])) or values[-1] <= 0:
        raise PreconditionError("parameter values must be positive and strictly decreasing")
    winding = tuple(winding) if winding is not None else (0,) * grid.dim
    if dt is None:
        dt = min(auto_dt(grid, study_params(kind, base, v)) for v in values)

    def run(i: int) -> float:
        p = study_params(kind, base, values[i])
        n1, S1 = prepared_data(kind, grid, n0, S0, p, winding)
        full = solve_full(grid, n0, n1, S0, S1, p, T, dt, winding, solver, tol)
        lim = solve_limit_system(kind, grid, n0, S0, p, T, dt, winding)
        d = hydro_distance(full, lim)
        if progress:
            progress(i, d)
        return d

    workers = threads or thread_count()
    results: list[float | Exception] = [float("nan")] * len(values)
    with ThreadPoolExecutor(max_workers=min(workers, len(values))) as pool:
        futures = [pool.submit(run, i) for i in range(len(values))]
        for i, fut in enumerate(futures):
            try:
                results[i] = fut.result()
            except RQHDError as exc:
                results[i] = exc
    failures = {i: f"{type(r).__name__}: {r}" for i, r in enumerate(results) if isinstance(r, Exception)}
    disc = [float("nan") if isinstance(r, Exception) else float(r) for r in results]
    table = ConvergenceTable(kind, values, disc, failures=failures)
    if failures:
        raise StudyError(f"{len(failures)} of {len(values)} runs failed: " + "; ".join(failures.values()),
                         table)
    if all(d > 0 for d in disc):
        table.fitted_order, table.fit_residual = fit_order(table)
    return table
