"""Fourier pseudospectral operators on a periodic box.

Fields are plain numpy arrays sampled on a :class:`SpectralGrid`. Scalar
fields have shape ``grid.shape``; vector fields carry a leading component
axis, shape ``(dim, *grid.shape)``.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import cached_property
from typing import NamedTuple, Sequence

import numpy as np

from .errors import CompatibilityError, DomainError

TWO_PI = 2.0 * np.pi
# absolute mean defect always accepted; quantities here are O(1) nondimensional
ROUNDOFF_FLOOR = 1e-13


class PoissonResult(NamedTuple):
    V: np.ndarray
    defect: float  # mean of the rhs that was projected out


@dataclass(frozen=True)
class SpectralGrid:
    """Uniform periodic grid on ``[0, extent_1) x ... x [0, extent_dim)``."""

    points: tuple[int, ...]
    extent: tuple[float, ...]

    def __post_init__(self):
        points = tuple(int(p) for p in np.atleast_1d(self.points))
        extent = tuple(float(e) for e in np.atleast_1d(self.extent))
        if len(extent) == 1 and len(points) > 1:
            extent = extent * len(points)
        object.__setattr__(self, "points", points)
        object.__setattr__(self, "extent", extent)
        if len(points) not in (1, 2, 3):
            raise DomainError(f"dim must be 1, 2 or 3, got {len(points)}")
        if len(extent) != len(points):
            raise DomainError("extent and points must have the same length")
        for p in points:
            if p < 8 or p % 2:
                raise DomainError(f"points per axis must be even and >= 8, got {p}")
        for e in extent:
            if not e > 0:
                raise DomainError(f"extent must be positive, got {e}")

    @classmethod
    def uniform(cls, dim: int, points: int, extent: float = TWO_PI) -> "SpectralGrid":
        return cls((points,) * dim, (extent,) * dim)

    @property
    def dim(self) -> int:
        return len(self.points)

    @property
    def shape(self) -> tuple[int, ...]:
        return self.points

    @property
    def size(self) -> int:
        return int(np.prod(self.points))

    @property
    def volume(self) -> float:
        return float(np.prod(self.extent))

    @property
    def spacing(self) -> tuple[float, ...]:
        return tuple(e / p for e, p in zip(self.extent, self.points))

    @cached_property
    def coords(self) -> tuple[np.ndarray, ...]:
        """Broadcastable coordinate arrays, one per axis (``indexing='ij'``)."""
        axes = [np.arange(p) * (e / p) for p, e in zip(self.points, self.extent)]
        return tuple(np.meshgrid(*axes, indexing="ij"))

    @cached_property
    def mode_index(self) -> tuple[np.ndarray, ...]:
        """Integer lattice index m per axis (k = 2*pi*m/extent)."""
        idx = [np.fft.fftfreq(p, 1.0 / p) for p in self.points]
        return tuple(np.meshgrid(*idx, indexing="ij"))

    @cached_property
    def wavenumbers(self) -> tuple[np.ndarray, ...]:
        return tuple(TWO_PI / e * m for m, e in zip(self.mode_index, self.extent))

    @cached_property
    def _deriv_wavenumbers(self) -> tuple[np.ndarray, ...]:
        # Nyquist mode has no odd derivative on an even grid
        out = []
        for k, m, p in zip(self.wavenumbers, self.mode_index, self.points):
            out.append(np.where(np.abs(m) == p // 2, 0.0, k))
        return tuple(out)

    @cached_property
    def k2(self) -> np.ndarray:
        return sum(k**2 for k in self.wavenumbers)

    @cached_property
    def _inv_k2(self) -> np.ndarray:
        k2 = self.k2.copy()
        k2.flat[0] = 1.0
        inv = 1.0 / k2
        inv.flat[0] = 0.0
        return inv

    @cached_property
    def dealias_mask(self) -> np.ndarray:
        mask = np.ones(self.shape, dtype=bool)
        for m, p in zip(self.mode_index, self.points):
            mask &= np.abs(m) < p / 3.0
        return mask

    @cached_property
    def k_nyquist(self) -> float:
        """Magnitude of the largest resolved wavevector (corner of the box)."""
        return float(np.sqrt(sum((np.pi * p / e) ** 2 for p, e in zip(self.points, self.extent))))

    # -- transforms ----------------------------------------------------------

    def fft(self, f: np.ndarray) -> np.ndarray:
        axes = tuple(range(-self.dim, 0))
        return np.fft.fftn(f, axes=axes)

    def ifft(self, F: np.ndarray, real: bool = True) -> np.ndarray:
        axes = tuple(range(-self.dim, 0))
        out = np.fft.ifftn(F, axes=axes)
        return out.real if real else out

    def lattice_vector(self, winding: Sequence[int]) -> np.ndarray:
        """Wavevector 2*pi*m/extent for an integer index per axis."""
        w = np.asarray(winding, dtype=float).reshape(self.dim)
        return TWO_PI * w / np.asarray(self.extent)

    def dot_x(self, kvec: Sequence[float]) -> np.ndarray:
        return sum(k * x for k, x in zip(kvec, self.coords))

    # -- calculus ------------------------------------------------------------

    def gradient(self, f: np.ndarray) -> np.ndarray:
        """Spectral gradient; returns shape ``(dim, *shape)``."""
        real = np.isrealobj(f)
        F = self.fft(f)
        return np.stack([self.ifft(1j * k * F, real) for k in self._deriv_wavenumbers])

    def partial(self, f: np.ndarray, orders: Sequence[int]) -> np.ndarray:
        """Mixed partial derivative D^alpha f for a multi-index ``orders``."""
        real = np.isrealobj(f)
        F = self.fft(f)
        mult = np.ones(self.shape, dtype=complex)
        for k, kd, a in zip(self.wavenumbers, self._deriv_wavenumbers, orders):
            if a:
                mult = mult * (1j * (kd if a % 2 else k)) ** a
        return self.ifft(mult * F, real)

    def divergence(self, v: np.ndarray) -> np.ndarray:
        real = np.isrealobj(v)
        acc = 0.0
        for comp, k in zip(v, self._deriv_wavenumbers):
            acc = acc + 1j * k * self.fft(comp)
        return self.ifft(acc, real)

    def curl(self, v: np.ndarray) -> np.ndarray:
        """Curl components (empty for 1D, one for 2D, three for 3D)."""
        if self.dim == 1:
            return np.zeros((0,) + self.shape)
        d = [[self.partial(v[i], [int(j == a) for a in range(self.dim)]) for j in range(self.dim)]
             for i in range(self.dim)]
        if self.dim == 2:
            return np.stack([d[1][0] - d[0][1]])
        return np.stack([d[2][1] - d[1][2], d[0][2] - d[2][0], d[1][0] - d[0][1]])

    def laplacian(self, f: np.ndarray) -> np.ndarray:
        return self.ifft(-self.k2 * self.fft(f), np.isrealobj(f))

    def solve_poisson(self, rhs: np.ndarray, compat_tol: float = 1e-10,
                      scale: float | None = None) -> PoissonResult:
        """Solve ``Laplacian V = rhs - mean(rhs)`` with ``mean(V) = 0``.

        The mean of ``rhs`` must not exceed ``compat_tol * scale`` in
        magnitude; ``scale`` defaults to ``max|rhs|``. Time-dependent
        solvers pass the background density as ``scale`` so that the
        slow drift of the mean density is judged against the charge level
        rather than against a small perturbation.
        """
        rhs = np.asarray(rhs, dtype=float)
        defect = float(np.mean(rhs))
        ref = float(np.max(np.abs(rhs))) if scale is None else float(scale)
        if abs(defect) > compat_tol * ref and abs(defect) > ROUNDOFF_FLOOR:
            raise CompatibilityError(
                f"Poisson rhs has mean {defect:.3e}, exceeds {compat_tol:.1e} x {ref:.3e}"
            )
        V = self.ifft(-self._inv_k2 * self.fft(rhs))
        return PoissonResult(V, defect)

    def inverse_laplacian(self, f: np.ndarray) -> np.ndarray:
        """Zero-mean inverse Laplacian with no compatibility check."""
        return self.ifft(-self._inv_k2 * self.fft(f), np.isrealobj(f))

    def dealias(self, f: np.ndarray) -> np.ndarray:
        """2/3-rule truncation: zero modes with any ``|m_i| >= points_i/3``."""
        return self.ifft(self.dealias_mask * self.fft(f), np.isrealobj(f))

    # -- norms ---------------------------------------------------------------

    def integrate(self, f: np.ndarray) -> float:
        """Spectrally exact quadrature (mean times volume)."""
        return float(np.mean(f, axis=tuple(range(-self.dim, 0))) * self.volume)

    def l2_norm(self, f: np.ndarray) -> float:
        return float(np.sqrt(self.volume * np.mean(np.abs(f) ** 2)))

    @cached_property
    def _sobolev_weights(self) -> dict[int, np.ndarray]:
        weights = {}
        sq = [k**2 for k in self.wavenumbers]
        total = np.zeros(self.shape)
        for order in range(5):
            # sum over multi-indices with |alpha| == order
            for alpha in itertools.product(range(order + 1), repeat=self.dim):
                if sum(alpha) != order:
                    continue
                term = np.ones(self.shape)
                for s, a in zip(sq, alpha):
                    term = term * s**a
                total = total + term
            weights[order] = total.copy()
        return weights

    def sobolev_norm(self, f: np.ndarray, k: int) -> float:
        """H^k norm ``(sum_{|alpha|<=k} ||D^alpha f||^2)^(1/2)``, 0 <= k <= 4."""
        if int(k) != k or not 0 <= k <= 4:
            raise DomainError(f"Sobolev order must be an integer in 0..4, got {k}")
        F = self.fft(f)
        s = np.sum(self._sobolev_weights[int(k)] * np.abs(F) ** 2)
        return float(np.sqrt(self.volume * s) / self.size)
