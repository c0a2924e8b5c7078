"""Experiment configuration: YAML in, validated dataclasses out.

Sections: ``mode`` (kg | rqhd | equivalence | limits | identities),
``grid``, ``params``, ``initial``, ``run``, ``limits`` and ``output``.
Every key is optional except ``mode``; missing keys take the defaults
below. Unknown keys are rejected so that typos do not pass silently.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np
import yaml

from .errors import ParseError, PreconditionError, ValidationError
from .kg import KGState, Params, plane_wave
from .limits import KINDS
from .madelung import initial_data_hydro_from_kg, phase_from_gradient
from .spectral import TWO_PI, SpectralGrid

MODES = ("kg", "rqhd", "equivalence", "limits", "identities")
FAMILIES = ("constant", "plane-wave", "gaussian-bump", "sine-perturbation", "snapshot")


@dataclass
class GridSpec:
    dim: int = 1
    points: int | list[int] | None = None
    extent: float | list[float] = TWO_PI

    def build(self) -> SpectralGrid:
        pts = self.points if self.points is not None else (128 if self.dim == 1 else 64)
        pts = [pts] * self.dim if np.ndim(pts) == 0 else list(pts)
        ext = [self.extent] * self.dim if np.ndim(self.extent) == 0 else list(self.extent)
        return SpectralGrid(tuple(pts), tuple(ext))


@dataclass
class ParamSpec:
    epsilon: float = 1.0
    upsilon: float = 1.0
    b0: float = 1.0
    nbar: float = 1.0
    n_floor: float | None = None
    delta: float | None = None

    def build(self, run: "RunSpec") -> Params:
        return Params(self.epsilon, self.upsilon, self.b0, self.nbar, self.n_floor,
                      run.compat_tol, run.drift_tol, self.delta)


@dataclass
class InitialSpec:
    """Initial-data family.

    constant           n0 = density (default b0), S0 = 0
    plane-wave         phi = A exp(i k.x), k in lattice indices, b0 must equal A^2
    gaussian-bump      n0 = b0 + amplitude (G - mean G), G a periodic Gaussian of given width
    sine-perturbation  n0 = b0 (1 + amplitude sin(k.x)), S0 = phase_amplitude cos(k.x)
    snapshot           n0 from a real snapshot, or phi0 from a complex one (path_t for phi1)
    """

    family: str = "sine-perturbation"
    amplitude: float = 0.01
    k: list[int] | None = None  # default: first lattice vector e_1
    width: float = 0.5
    density: float | None = None
    phase_amplitude: float = 0.0
    branch: str = "plus"
    path: str | None = None
    path_t: str | None = None

    def wavevector(self, dim: int) -> np.ndarray:
        if self.k is None:
            return np.eye(dim, dtype=int)[0]
        return np.atleast_1d(np.asarray(self.k))


@dataclass
class RunSpec:
    T: float = 0.1
    dt: float | str = "auto"
    tol: float = 1e-9
    max_iter: int = 50
    compat_tol: float = 1e-10
    drift_tol: float = 1e-2
    window: float | str | None = None
    N: float = 1.0
    C: float = 1.0
    seed: int = 0


@dataclass
class LimitsSpec:
    kind: str = "nonrelativistic"
    values: list[float] = field(default_factory=lambda: [0.4, 0.2, 0.1, 0.05])
    solver: str = "kg"


@dataclass
class OutputSpec:
    dir: str = "out"
    checkpoint: bool = True


@dataclass
class ExperimentConfig:
    mode: str
    grid: GridSpec = field(default_factory=GridSpec)
    params: ParamSpec = field(default_factory=ParamSpec)
    initial: InitialSpec = field(default_factory=InitialSpec)
    run: RunSpec = field(default_factory=RunSpec)
    limits: LimitsSpec = field(default_factory=LimitsSpec)
    output: OutputSpec = field(default_factory=OutputSpec)
    source: str | None = None  # path of the file, for resolving snapshot paths

    def to_dict(self) -> dict:
        d = asdict(self)
        d.pop("source")
        return d

    def physical_params(self) -> Params:
        return self.params.build(self.run)


SECTIONS = {"grid": GridSpec, "params": ParamSpec, "initial": InitialSpec, "run": RunSpec,
            "limits": LimitsSpec, "output": OutputSpec}


def _key_lines(text: str) -> dict[tuple[str, ...], int]:
    """1-based line of every mapping key, by dotted path."""
    lines: dict[tuple[str, ...], int] = {}

    def walk(node, path):
        if isinstance(node, yaml.MappingNode):
            for k, v in node.value:
                p = path + (str(k.value),)
                lines[p] = k.start_mark.line + 1
                walk(v, p)

    try:
        walk(yaml.compose(text), ())
    except yaml.YAMLError:
        pass
    return lines


class _Checker:
    def __init__(self, text: str):
        self.lines = _key_lines(text)

    def fail(self, path: tuple[str, ...], message: str):
        line = self.lines.get(path) or self.lines.get(path[:1])
        where = ".".join(path)
        loc = f" (line {line})" if line else ""
        raise ValidationError(f"{where}{loc}: {message}")


OPTIONAL_NUMBERS = {"n_floor", "delta", "density"}


def _number(chk: _Checker, path, value, integer=False):
    if isinstance(value, str):
        # YAML 1.1 reads exponent literals without a dot (1e-9) as strings
        try:
            value = float(value)
        except ValueError:
            chk.fail(path, f"expected a number, got {value!r}")
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        chk.fail(path, f"expected a number, got {value!r}")
    if integer and int(value) != value:
        chk.fail(path, f"expected an integer, got {value!r}")
    if not math.isfinite(value):
        chk.fail(path, "must be finite")
    return int(value) if integer else float(value)


def _coerce(chk: _Checker, path, value, default):
    """Coerce YAML scalars toward the type of the dataclass default."""
    if path[-1] in ("values", "extent", "k", "points") and isinstance(value, list):
        integer = path[-1] in ("k", "points")
        return [_number(chk, path, v, integer=integer) for v in value]
    if path[-1] == "points":
        return _number(chk, path, value, integer=True)
    if isinstance(default, bool):
        if not isinstance(value, bool):
            chk.fail(path, f"expected true/false, got {value!r}")
        return value
    if isinstance(default, int) and path[-1] in ("dim", "max_iter", "seed"):
        return _number(chk, path, value, integer=True)
    if isinstance(default, float) or path[-1] in OPTIONAL_NUMBERS:
        return _number(chk, path, value)
    if path[-1] in ("dt", "window") and value != "auto":
        return _number(chk, path, value)
    return value


def parse_config(text: str, source: str | None = None) -> ExperimentConfig:
    """Parse and validate; raises ParseError or ValidationError naming the field and line."""
    try:
        raw = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        loc = f" at line {mark.line + 1}, column {mark.column + 1}" if mark else ""
        raise ParseError(f"invalid YAML{loc}: {getattr(exc, 'problem', exc)}") from exc
    chk = _Checker(text)
    if not isinstance(raw, dict):
        raise ValidationError("configuration must be a mapping with at least a 'mode' key")
    unknown = set(raw) - set(SECTIONS) - {"mode"}
    if unknown:
        chk.fail((sorted(unknown)[0],), "unknown section")
    if "mode" not in raw:
        raise ValidationError("mode: missing; expected one of " + ", ".join(MODES))
    cfg = ExperimentConfig(mode=raw["mode"], source=source)
    for name, cls in SECTIONS.items():
        section = raw.get(name) or {}
        if not isinstance(section, dict):
            chk.fail((name,), "expected a mapping")
        obj = getattr(cfg, name)
        known = {f.name: f for f in fields(cls)}
        for key, value in section.items():
            if key not in known:
                chk.fail((name, str(key)), "unknown key")
            default = getattr(obj, key)
            setattr(obj, key, value if value is None else _coerce(chk, (name, key), value, default))
    validate(cfg, chk)
    return cfg


def validate(cfg: ExperimentConfig, chk: _Checker | None = None) -> None:
    chk = chk or _Checker("")
    if cfg.mode not in MODES:
        chk.fail(("mode",), f"must be one of {', '.join(MODES)}, got {cfg.mode!r}")
    g = cfg.grid
    if g.dim not in (1, 2, 3):
        chk.fail(("grid", "dim"), f"must be 1, 2 or 3, got {g.dim}")
    for key, value in (("points", g.points), ("extent", g.extent)):
        if value is not None and np.ndim(value) == 1 and len(value) != g.dim:
            chk.fail(("grid", key), f"needs {g.dim} entries, got {len(value)}")
    try:
        g.build()
    except (ValueError, TypeError) as exc:
        chk.fail(("grid",), str(exc))
    p = cfg.params
    checks = [
        ("epsilon", p.epsilon >= 0, "epsilon must be >= 0"),
        ("upsilon", p.upsilon >= 0, "upsilon must be >= 0"),
        ("b0", p.b0 > 0, "b0 must be > 0"),
        ("nbar", p.nbar > 0, "nbar must be > 0"),
        ("n_floor", p.n_floor is None or p.n_floor > 0, "n_floor must be > 0"),
        ("delta", p.delta is None or p.delta > 0, "delta must be > 0"),
    ]
    for key, ok, msg in checks:
        if not ok:
            chk.fail(("params", key), msg)
    r = cfg.run
    if not r.T >= 0:
        chk.fail(("run", "T"), "T must be >= 0")
    if isinstance(r.dt, str):
        if r.dt != "auto":
            chk.fail(("run", "dt"), f"must be a positive number or 'auto', got {r.dt!r}")
    elif not _number(chk, ("run", "dt"), r.dt) > 0:
        chk.fail(("run", "dt"), "dt must be > 0")
    if isinstance(r.window, str) and r.window != "auto":
        chk.fail(("run", "window"), "must be a positive number, 'auto' or null")
    if isinstance(r.window, (int, float)) and not r.window > 0:
        chk.fail(("run", "window"), "window must be > 0")
    for key in ("tol", "compat_tol", "drift_tol", "N", "C"):
        if not getattr(r, key) > 0:
            chk.fail(("run", key), f"{key} must be > 0")
    if r.max_iter < 1:
        chk.fail(("run", "max_iter"), "max_iter must be >= 1")
    if cfg.mode in ("kg", "equivalence") and (p.epsilon == 0 or p.upsilon == 0):
        chk.fail(("params", "upsilon" if p.upsilon == 0 else "epsilon"),
                 f"mode {cfg.mode} needs epsilon > 0 and upsilon > 0")
    if cfg.mode == "identities" and p.epsilon == 0:
        chk.fail(("params", "epsilon"), "mode identities needs epsilon > 0 for the Madelung map")
    if cfg.mode == "rqhd" and (p.epsilon == 0 or p.upsilon == 0):
        chk.fail(("params", "upsilon" if p.upsilon == 0 else "epsilon"),
                 "mode rqhd needs epsilon > 0 and upsilon > 0; use mode limits for the limit systems")
    ini = cfg.initial
    if ini.family not in FAMILIES:
        chk.fail(("initial", "family"), f"must be one of {', '.join(FAMILIES)}, got {ini.family!r}")
    if ini.family == "snapshot" and not ini.path:
        chk.fail(("initial", "path"), "snapshot family needs a path")
    if ini.family == "gaussian-bump" and not ini.width > 0:
        chk.fail(("initial", "width"), "width must be > 0")
    if ini.family in ("plane-wave", "sine-perturbation"):
        k = ini.wavevector(g.dim)
        if len(k) != g.dim or np.any(k != np.round(k)):
            chk.fail(("initial", "k"), f"needs {g.dim} integer lattice indices, got {ini.k!r}")
    if ini.branch not in ("plus", "minus"):
        chk.fail(("initial", "branch"), "must be 'plus' or 'minus'")
    lim = cfg.limits
    if cfg.mode == "limits":
        if lim.kind not in KINDS:
            chk.fail(("limits", "kind"), f"must be one of {', '.join(KINDS)}, got {lim.kind!r}")
        vals = list(lim.values)
        if len(vals) < 3 or any(not v > 0 for v in vals) or any(b >= a for a, b in zip(vals, vals[1:])):
            chk.fail(("limits", "values"), "need >= 3 positive, strictly decreasing values")
        if lim.solver not in ("kg", "picard"):
            chk.fail(("limits", "solver"), "must be 'kg' or 'picard'")
    try:
        cfg.physical_params()
    except ValidationError as exc:
        chk.fail(("params",), str(exc))


def serialize_config(cfg: ExperimentConfig) -> str:
    return yaml.safe_dump(cfg.to_dict(), sort_keys=False, default_flow_style=None)


def load_config(path: str | Path) -> ExperimentConfig:
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    return parse_config(text, source=str(path))


@dataclass
class InitialData:
    """Hydrodynamic Cauchy data; ``kg`` holds an exact KG state when the family provides one."""

    grid: SpectralGrid
    n0: np.ndarray
    n1: np.ndarray
    S0: np.ndarray
    S1: np.ndarray
    winding: tuple[int, ...]
    kg: KGState | None = None


def _resolve(cfg: ExperimentConfig, path: str) -> Path:
    p = Path(path)
    if not p.is_absolute() and cfg.source and not p.exists():
        p = Path(cfg.source).parent / p
    return p


def build_initial(cfg: ExperimentConfig, grid: SpectralGrid, params: Params) -> InitialData:
    ini = cfg.initial
    zero = np.zeros(grid.shape)
    b0 = params.b0
    if ini.family == "constant":
        n0 = np.full(grid.shape, b0 if ini.density is None else float(ini.density))
        return InitialData(grid, n0, zero, zero, zero, (0,) * grid.dim)
    if ini.family == "sine-perturbation":
        k = grid.lattice_vector(ini.wavevector(grid.dim))
        arg = grid.dot_x(k)
        return InitialData(grid, b0 * (1.0 + ini.amplitude * np.sin(arg)), zero,
                           ini.phase_amplitude * np.cos(arg), zero, (0,) * grid.dim)
    if ini.family == "gaussian-bump":
        r2 = 0.0
        for x, L in zip(grid.coords, grid.extent):
            d = np.mod(x, L) - L / 2  # offset from the box centre
            r2 = r2 + d**2
        G = np.exp(-r2 / (2 * ini.width**2))
        return InitialData(grid, b0 + ini.amplitude * (G - np.mean(G)), zero, zero, zero,
                           (0,) * grid.dim)
    if ini.family == "plane-wave":
        state = plane_wave(grid, ini.wavevector(grid.dim), ini.amplitude, params, ini.branch)
        return _from_kg(grid, state, params)
    if ini.family == "snapshot":
        from .storage import read_snapshot

        sgrid, values = read_snapshot(_resolve(cfg, ini.path))
        if sgrid != grid:
            raise PreconditionError(f"snapshot grid {sgrid.points} does not match configured grid {grid.points}")
        if np.iscomplexobj(values):
            phi_t = zero.astype(complex)
            if ini.path_t:
                _, phi_t = read_snapshot(_resolve(cfg, ini.path_t))
            state = KGState(grid, values, phi_t)
            return _from_kg(grid, state, params)
        n1 = zero
        if ini.path_t:
            _, n1 = read_snapshot(_resolve(cfg, ini.path_t))
        return InitialData(grid, values, np.real(n1), zero, zero, (0,) * grid.dim)
    raise PreconditionError(f"unknown family {ini.family!r}")


def _from_kg(grid: SpectralGrid, state: KGState, params: Params) -> InitialData:
    n0, n1, grad_S, S1, winding = initial_data_hydro_from_kg(grid, state.phi, state.phi_t, params)
    k0 = params.epsilon * grid.lattice_vector(winding)
    S0 = phase_from_gradient(grid, grad_S, k0)
    return InitialData(grid, n0, n1, S0, S1, tuple(winding), state)
