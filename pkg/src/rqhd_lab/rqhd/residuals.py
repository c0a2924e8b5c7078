"""Pointwise residuals of the relativistic quantum hydrodynamic system.

Continuity:  n_t + div(n grad S) - ups^2 (n S_t)_t
Momentum:    (n grad S)_t + div(n grad S (x) grad S) - (eps^2/2) n grad(Lap sqrt n / sqrt n)
             + n grad V - ups^2 (S_t grad S n)_t + (eps^2 ups^2/4) (n grad (log n)_t)_t

Time derivatives use second-order centred stencils on a uniformly sampled
trajectory. Each residual is a sum of named terms; a term whose prefactor
is zero, or which is switched off, is never evaluated. Dropping the
relativistic terms gives the quantum Euler-Poisson residual and dropping
the quantum terms the relativistic Euler-Poisson one.
"""

from __future__ import annotations

import numpy as np

from ..kg import Params, Trajectory
from ..madelung import HydroState, check_vacuum

TERM_ORDER_CONTINUITY = ("time", "flux", "relativistic")
TERM_ORDER_MOMENTUM = ("time", "convection", "quantum", "potential", "relativistic_flux", "relativistic_quantum")
QUANTUM_TERMS = frozenset({"quantum", "relativistic_quantum"})
RELATIVISTIC_TERMS = frozenset({"relativistic", "relativistic_flux", "relativistic_quantum"})


def quantum_stress_divergence(grid, n: np.ndarray, params: Params, form: str = "potential") -> np.ndarray:
    """``(eps^2/2) n grad(Lap sqrt n / sqrt n)`` or, equivalently, ``(eps^2/4) div(n Hess log n)``."""
    check_vacuum(n, params)
    c = params.epsilon**2
    if c == 0:
        return np.zeros((grid.dim,) + grid.shape)
    if form == "potential":
        R = np.sqrt(n)
        return 0.5 * c * n * grid.gradient(grid.laplacian(R) / R)
    if form == "tensor":
        logn = np.log(n)
        d = grid.dim
        out = []
        for i in range(d):
            acc = 0.0
            for j in range(d):
                alpha = [0] * d
                alpha[i] += 1
                alpha[j] += 1
                hess_ij = grid.partial(logn, alpha)
                acc = acc + grid.partial(n * hess_ij, [int(a == j) for a in range(d)])
            out.append(acc)
        return 0.25 * c * np.stack(out)
    raise ValueError(f"form must be 'potential' or 'tensor', got {form!r}")


def _interior(traj: Trajectory, index: int) -> None:
    if not 1 <= index <= len(traj) - 2:
        raise IndexError(f"centred stencil needs 1 <= index <= {len(traj) - 2}, got {index}")


def relativistic_term(traj: Trajectory, index: int, params: Params, form: str = "potential") -> np.ndarray:
    """``(eps^2 ups^2/2) n grad(sqrt(n)_tt / sqrt n)`` (potential) or
    ``(eps^2 ups^2/4) (n grad (log n)_t)_t`` (flux), both by centred 3-point stencils."""
    _interior(traj, index)
    prev, cur, nxt = traj[index - 1], traj[index], traj[index + 1]
    grid, dt = cur.grid, traj.dt
    c = params.epsilon**2 * params.upsilon**2
    if c == 0:
        return np.zeros((grid.dim,) + grid.shape)
    for s in (prev, cur, nxt):
        check_vacuum(s.n, params)
    if form == "potential":
        R = np.sqrt(cur.n)
        R_tt = (np.sqrt(nxt.n) - 2.0 * R + np.sqrt(prev.n)) / dt**2
        return 0.5 * c * cur.n * grid.gradient(R_tt / R)
    if form == "flux":
        def half(a, b):
            return 0.5 * (a.n + b.n) * grid.gradient((np.log(b.n) - np.log(a.n)) / dt)
        return 0.25 * c * (half(cur, nxt) - half(prev, cur)) / dt
    raise ValueError(f"form must be 'potential' or 'flux', got {form!r}")


def _active(name: str, quantum: bool, relativistic: bool) -> bool:
    return not ((name in QUANTUM_TERMS and not quantum) or (name in RELATIVISTIC_TERMS and not relativistic))


def continuity_terms(traj: Trajectory[HydroState], index: int, params: Params,
                     quantum: bool = True, relativistic: bool = True) -> dict[str, np.ndarray]:
    _interior(traj, index)
    prev, cur, nxt = traj[index - 1], traj[index], traj[index + 1]
    check_vacuum(cur.n, params)
    grid, dt = cur.grid, traj.dt
    ups2 = params.upsilon**2
    terms = {}
    terms["time"] = (nxt.n - prev.n) / (2 * dt)
    terms["flux"] = grid.divergence(cur.n * cur.grad_S)
    if ups2 and _active("relativistic", quantum, relativistic):
        terms["relativistic"] = -ups2 * (nxt.n * nxt.S_t - prev.n * prev.S_t) / (2 * dt)
    return terms


def momentum_terms(traj: Trajectory[HydroState], index: int, params: Params,
                   quantum: bool = True, relativistic: bool = True,
                   quantum_form: str = "potential", relativistic_form: str = "potential") -> dict[str, np.ndarray]:
    _interior(traj, index)
    prev, cur, nxt = traj[index - 1], traj[index], traj[index + 1]
    check_vacuum(cur.n, params)
    grid, dt = cur.grid, traj.dt
    eps2, ups2 = params.epsilon**2, params.upsilon**2
    terms = {}
    terms["time"] = (nxt.momentum - prev.momentum) / (2 * dt)
    m, u = cur.momentum, cur.grad_S
    terms["convection"] = np.stack([
        sum(grid.partial(m[i] * u[j], [int(a == j) for a in range(grid.dim)]) for j in range(grid.dim))
        for i in range(grid.dim)
    ])
    if eps2 and _active("quantum", quantum, relativistic):
        terms["quantum"] = -quantum_stress_divergence(grid, cur.n, params, quantum_form)
    terms["potential"] = cur.n * grid.gradient(cur.V)
    if ups2 and _active("relativistic_flux", quantum, relativistic):
        terms["relativistic_flux"] = -ups2 * (nxt.S_t * nxt.momentum - prev.S_t * prev.momentum) / (2 * dt)
    if eps2 and ups2 and _active("relativistic_quantum", quantum, relativistic):
        terms["relativistic_quantum"] = relativistic_term(traj, index, params, relativistic_form)
    return terms


def _total(terms: dict[str, np.ndarray], order) -> np.ndarray:
    out = None
    for name in order:
        if name in terms:
            out = terms[name] if out is None else out + terms[name]
    return out


def residual_continuity(traj: Trajectory[HydroState], index: int, params: Params, **switches) -> np.ndarray:
    return _total(continuity_terms(traj, index, params, **switches), TERM_ORDER_CONTINUITY)


def residual_momentum(traj: Trajectory[HydroState], index: int, params: Params, **switches) -> np.ndarray:
    return _total(momentum_terms(traj, index, params, **switches), TERM_ORDER_MOMENTUM)


def residual_norms(traj: Trajectory[HydroState], params: Params, **switches) -> tuple[float, float]:
    """Max over interior times of the L2 norms of both residuals."""
    grid = traj[0].grid
    rc = rm = 0.0
    for i in range(1, len(traj) - 1):
        rc = max(rc, grid.l2_norm(residual_continuity(traj, i, params, **switches)))
        r = residual_momentum(traj, i, params, **switches)
        rm = max(rm, float(np.sqrt(sum(grid.l2_norm(c) ** 2 for c in r))))
    return rc, rm


def conserved_charge(state: HydroState, params: Params) -> float:
    """``Q = integral of (n - ups^2 n S_t)``, constant in time for smooth solutions."""
    return state.grid.integrate(state.n - params.upsilon**2 * state.n * state.S_t)
