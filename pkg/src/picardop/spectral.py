"""
Real periodic fields on the d-torus (period 2*pi per axis).

Coefficient convention
----------------------
Spectra use the discrete-mean convention

    c(xi) = m^{-d} * sum_k f(x_k) exp(-i xi . x_k),     f(x) = sum_xi c(xi) exp(i xi . x),

so a constant field c has c(0) = c. For a band-limited f the continuum
coefficient against the normalized basis e_xi(x) = (2 pi)^{-d/2} exp(i xi . x)
is (2 pi)^{d/2} * c(xi). Every multiplier in the package (heat, Fejer) is
diagonal, hence independent of this constant. Sobolev norms are reported in
the discrete-mean convention, ``(sum (1+|xi|^2)^s |c(xi)|^2)^{1/2}``, which is
the continuum H^s norm divided by (2 pi)^{d/2}.

Arrays carry the spatial axes last: a ``TorusField`` has shape ``(m,)*d`` and
a ``TrajectoryField`` has shape ``(n_t,) + (m,)*d``. The low-level helpers
accept arbitrary leading batch axes.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Sequence

import numpy as np

from .errors import ConfigurationError, NumericInputError


@dataclass(frozen=True)
class GridSpec:
    """Uniform periodic grid on the d-torus plus uniform time nodes on [0, T]."""

    dim: int
    points_per_axis: int
    time_nodes: int = 2

    def __post_init__(self):
        if self.dim < 1:
            raise ConfigurationError(f"dim must be >= 1, got {self.dim}")
        if self.points_per_axis < 2 or self.points_per_axis % 2:
            raise ConfigurationError(
                f"points_per_axis must be even and >= 2, got {self.points_per_axis}"
            )
        if self.time_nodes < 2:
            raise ConfigurationError(f"time_nodes must be >= 2, got {self.time_nodes}")

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.points_per_axis,) * self.dim

    @property
    def size(self) -> int:
        return self.points_per_axis**self.dim

    @property
    def max_rank(self) -> int:
        """Largest Fejer rank N the grid resolves without aliasing."""
        return (self.points_per_axis - 2) // 2

    def check_rank(self, rank: int) -> None:
        if rank < 0:
            raise ConfigurationError(f"Fourier rank must be >= 0, got {rank}")
        if self.points_per_axis < 2 * rank + 2:
            raise ConfigurationError(
                f"grid with {self.points_per_axis} points per axis cannot resolve "
                f"rank N={rank} (need >= {2 * rank + 2})"
            )

    def coordinates(self) -> np.ndarray:
        """1-D array of grid coordinates 2*pi*k/m, k = 0..m-1."""
        m = self.points_per_axis
        return 2.0 * np.pi * np.arange(m) / m

    def mesh(self) -> tuple[np.ndarray, ...]:
        x = self.coordinates()
        return np.meshgrid(*([x] * self.dim), indexing="ij")

    def frequencies(self) -> tuple[np.ndarray, ...]:
        """Integer frequency arrays (FFT ordering) broadcast to the grid shape."""
        k = np.fft.fftfreq(self.points_per_axis, d=1.0 / self.points_per_axis)
        k = np.rint(k).astype(np.int64)
        return np.meshgrid(*([k] * self.dim), indexing="ij")

    @cached_property
    def wavenumber_sq(self) -> np.ndarray:
        """|xi|^2 on the FFT index set."""
        return sum(k.astype(float) ** 2 for k in self.frequencies())

    def with_time_nodes(self, n_t: int) -> "GridSpec":
        return GridSpec(self.dim, self.points_per_axis, n_t)


def _spatial_axes(spec: GridSpec) -> tuple[int, ...]:
    return tuple(range(-spec.dim, 0))


def forward(values: np.ndarray, spec: GridSpec) -> np.ndarray:
    """Grid values -> discrete-mean Fourier coefficients over the last d axes."""
    return np.fft.fftn(values, axes=_spatial_axes(spec)) / spec.size


def inverse(coeffs: np.ndarray, spec: GridSpec) -> np.ndarray:
    """Coefficients -> real grid values (imaginary round-off discarded)."""
    return np.fft.ifftn(coeffs * spec.size, axes=_spatial_axes(spec)).real


def fejer_weights(spec: GridSpec, rank: int) -> np.ndarray:
    """Tensor-product Fejer mask evaluated on the grid's frequency set."""
    spec.check_rank(rank)
    w = np.ones(spec.shape)
    for k in spec.frequencies():
        w = w * np.clip(1.0 - np.abs(k) / (rank + 1.0), 0.0, None)
    return w


@dataclass(frozen=True, eq=False)
class TorusField:
    """A real scalar field on the grid with a lazily computed spectrum."""

    spec: GridSpec
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.shape != self.spec.shape:
            raise ConfigurationError(
                f"values shape {values.shape} does not match grid {self.spec.shape}"
            )
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @classmethod
    def from_function(cls, spec: GridSpec, func) -> "TorusField":
        return cls(spec, func(*spec.mesh()))

    @classmethod
    def constant(cls, spec: GridSpec, c: float) -> "TorusField":
        return cls(spec, np.full(spec.shape, float(c)))

    @classmethod
    def zeros(cls, spec: GridSpec) -> "TorusField":
        return cls.constant(spec, 0.0)

    @classmethod
    def from_spectrum(cls, spec: GridSpec, coeffs: np.ndarray) -> "TorusField":
        return cls(spec, inverse(coeffs, spec))

    @cached_property
    def spectrum(self) -> np.ndarray:
        return to_spectrum(self)

    def __add__(self, other: "TorusField") -> "TorusField":
        return TorusField(self.spec, self.values + other.values)

    def __sub__(self, other: "TorusField") -> "TorusField":
        return TorusField(self.spec, self.values - other.values)

    def __mul__(self, a: float) -> "TorusField":
        return TorusField(self.spec, self.values * a)

    __rmul__ = __mul__


@dataclass(frozen=True, eq=False)
class TrajectoryField:
    """Time-indexed fields at nodes t_j = j*T/(n_t-1), stored as one array."""

    spec: GridSpec
    values: np.ndarray
    horizon: float

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        expected = (self.spec.time_nodes,) + self.spec.shape
        if values.shape != expected:
            raise ConfigurationError(
                f"trajectory shape {values.shape} does not match {expected}"
            )
        if not self.horizon > 0:
            raise ConfigurationError(f"horizon must be positive, got {self.horizon}")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @classmethod
    def zeros(cls, spec: GridSpec, horizon: float) -> "TrajectoryField":
        return cls(spec, np.zeros((spec.time_nodes,) + spec.shape), horizon)

    @classmethod
    def from_slices(cls, slices: Sequence[TorusField], horizon: float) -> "TrajectoryField":
        spec = slices[0].spec
        for s in slices:
            if s.spec.shape != spec.shape or s.spec.dim != spec.dim:
                raise ConfigurationError("all slices must share one grid")
        spec = spec.with_time_nodes(len(slices))
        return cls(spec, np.stack([s.values for s in slices]), horizon)

    @property
    def times(self) -> np.ndarray:
        return np.linspace(0.0, self.horizon, self.spec.time_nodes)

    @property
    def step(self) -> float:
        return self.horizon / (self.spec.time_nodes - 1)

    @property
    def slices(self) -> list[TorusField]:
        return [TorusField(self.spec, v) for v in self.values]

    def slice(self, j: int) -> TorusField:
        return TorusField(self.spec, self.values[j])

    def __sub__(self, other: "TrajectoryField") -> "TrajectoryField":
        _check_same_grid(self, other)
        return TrajectoryField(self.spec, self.values - other.values, self.horizon)

    def __add__(self, other: "TrajectoryField") -> "TrajectoryField":
        _check_same_grid(self, other)
        return TrajectoryField(self.spec, self.values + other.values, self.horizon)


def _check_same_grid(a: TrajectoryField, b: TrajectoryField) -> None:
    if a.spec != b.spec or not np.isclose(a.horizon, b.horizon, rtol=0, atol=1e-14):
        raise ConfigurationError("trajectories live on different grids")


def to_spectrum(f: TorusField) -> np.ndarray:
    """Discrete-mean Fourier coefficients of ``f`` in FFT index order."""
    if not np.all(np.isfinite(f.values)):
        raise NumericInputError("field contains non-finite values")
    return forward(f.values, f.spec)


def fejer_mask(rank: int, xi) -> float:
    """Fejer weight prod_r (1 - |xi_r|/(N+1))_+ for a single frequency."""
    if rank < 0:
        raise ConfigurationError(f"Fourier rank must be >= 0, got {rank}")
    xi = np.atleast_1d(np.asarray(xi))
    return float(np.prod(np.clip(1.0 - np.abs(xi) / (rank + 1.0), 0.0, None)))


def apply_fejer(f: TorusField, rank: int) -> TorusField:
    """Fejer projection P_N: spectrum multiplied by the rank-N mask."""
    w = fejer_weights(f.spec, rank)
    return TorusField.from_spectrum(f.spec, f.spectrum * w)


def sobolev_norm(f: TorusField, s: float) -> float:
    if s < 0:
        raise ConfigurationError(f"smoothness order must be >= 0, got {s}")
    return float(sobolev_norm_array(f.values, f.spec, s))


def sobolev_norm_array(values: np.ndarray, spec: GridSpec, s: float) -> np.ndarray:
    """Batched H^s norm over the last d axes."""
    c = forward(values, spec)
    weight = (1.0 + spec.wavenumber_sq) ** s
    axes = _spatial_axes(spec)
    return np.sqrt(np.sum(weight * np.abs(c) ** 2, axis=axes))


def sup_norm(f: TorusField | TrajectoryField) -> float:
    """Grid maximum of |f|; over all time slices for a trajectory."""
    return float(np.max(np.abs(f.values)))


def l2_mean_norm(f: TorusField) -> float:
    """Root-mean-square of the grid values (equals the H^0 norm)."""
    return float(np.sqrt(np.mean(f.values**2)))
