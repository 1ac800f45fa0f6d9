"""
Initial-data law, sensor observation and reconstruction.

Initial data are band-limited Gaussian fields with spectral variance
``sigma^2 (1 + |xi|^2)^(-s_gp)`` on ``|xi_r| <= K``, conditioned on the
Sobolev ball ``||u0||_{H^s0} <= R0`` by rejection. Each sample draws from its
own stream keyed by ``(seed, index)``, so any subset can be regenerated.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import (
    ConfigurationError,
    LawMisconfigurationError,
    UnsupportedConfigurationError,
)
from .spectral import (
    GridSpec,
    TorusField,
    forward,
    inverse,
    sobolev_norm_array,
)

_MAX_DRAWS = 10_000
_MIN_ACCEPT = 1e-3


def sobolev_embedding_constant(dim: int, s0: float, band: int) -> float:
    """Smallest C with sup|f| <= C ||f||_{H^s0} for fields of band <= K.

    Cauchy-Schwarz on sum |c(xi)| is attained by the reproducing kernel at x=0,
    so the constant is exact for the band-limited class.
    """
    k = np.arange(-band, band + 1, dtype=float)
    grids = np.meshgrid(*([k] * dim), indexing="ij")
    w = (1.0 + sum(g**2 for g in grids)) ** (-s0)
    return float(np.sqrt(w.sum()))


@dataclass(frozen=True)
class InitialLaw:
    s_gp: float
    amplitude: float
    band: int
    s0: float
    r0: float
    seed: int = 0
    sup_bound: Optional[float] = None
    """Optional R: every draw must also satisfy sup|u0| <= R."""

    def __post_init__(self):
        if self.band < 0:
            raise ConfigurationError("band must be >= 0")
        if self.amplitude < 0:
            raise ConfigurationError("amplitude must be >= 0")
        if not self.r0 > 0:
            raise ConfigurationError("ball radius r0 must be positive")

    def embedding_constant(self, dim: int) -> float:
        return sobolev_embedding_constant(dim, self.s0, self.band)

    def check_embedding(self, dim: int) -> bool:
        """True when R0 * C_sob <= R, i.e. the Sobolev ball sits inside U_{0,R}."""
        if self.sup_bound is None:
            return True
        return self.r0 * self.embedding_constant(dim) <= self.sup_bound

    def spectral_std(self, spec: GridSpec) -> np.ndarray:
        spec.check_rank(self.band)
        inside = np.ones(spec.shape, dtype=bool)
        for k in spec.frequencies():
            inside &= np.abs(k) <= self.band
        std = self.amplitude * (1.0 + spec.wavenumber_sq) ** (-self.s_gp / 2.0)
        return np.where(inside, std, 0.0)


@dataclass
class SamplingStats:
    draws: int = 0
    accepted: int = 0

    @property
    def acceptance_rate(self) -> float:
        return self.accepted / self.draws if self.draws else 1.0


def _stream(seed: int, index: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([int(seed), int(index)]))


def _draw(rng: np.random.Generator, spec: GridSpec, std: np.ndarray) -> np.ndarray:
    # FFT of real white noise is conjugate symmetric with E|c|^2 = 1/m^d.
    noise = rng.standard_normal(spec.shape)
    c = forward(noise, spec) * math.sqrt(spec.size) * std
    return inverse(c, spec)


def sample_initial_values(
    law: InitialLaw,
    spec: GridSpec,
    count: int,
    start: int = 0,
    stats: SamplingStats | None = None,
) -> np.ndarray:
    """``count`` accepted draws as an array ``(count,)+grid``; indices start at ``start``."""
    if law.sup_bound is not None and not law.check_embedding(spec.dim):
        raise LawMisconfigurationError(
            f"R0 * C_sob = {law.r0 * law.embedding_constant(spec.dim):.6g} exceeds "
            f"R = {law.sup_bound:.6g}"
        )
    std = law.spectral_std(spec)
    stats = SamplingStats() if stats is None else stats
    out = np.empty((count,) + spec.shape)
    for i in range(count):
        rng = _stream(law.seed, start + i)
        while True:
            stats.draws += 1
            u = _draw(rng, spec, std)
            ok = sobolev_norm_array(u, spec, law.s0) <= law.r0
            if ok and law.sup_bound is not None:
                ok = np.max(np.abs(u)) <= law.sup_bound
            if ok:
                stats.accepted += 1
                out[i] = u
                break
            if stats.draws >= _MAX_DRAWS and stats.acceptance_rate < _MIN_ACCEPT:
                raise LawMisconfigurationError(
                    f"ball conditioning accepted {stats.accepted}/{stats.draws} draws; "
                    "reduce amplitude or enlarge r0"
                )
    return out


def sample_initial(law: InitialLaw, spec: GridSpec, count: int, start: int = 0) -> list[TorusField]:
    values = sample_initial_values(law, spec, count, start)
    return [TorusField(spec, v) for v in values]


@dataclass(frozen=True, eq=False)
class SensorSet:
    """Sensor locations as integer grid indices, shape ``(m_total, d)``."""

    spec: GridSpec
    indices: np.ndarray
    per_axis: Optional[int] = None

    @classmethod
    def equispaced(cls, spec: GridSpec, per_axis: int) -> "SensorSet":
        m_ax = spec.points_per_axis
        if per_axis < 1 or m_ax % per_axis:
            raise ConfigurationError(
                f"{per_axis} equispaced sensors per axis do not lie on a {m_ax}-point grid"
            )
        idx1 = np.arange(per_axis) * (m_ax // per_axis)
        mesh = np.meshgrid(*([idx1] * spec.dim), indexing="ij")
        idx = np.stack([g.ravel() for g in mesh], axis=1)
        return cls(spec, idx, per_axis)

    @classmethod
    def from_points(cls, spec: GridSpec, points) -> "SensorSet":
        """Sensors at physical coordinates; each must coincide with a grid point."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        if pts.shape[1] != spec.dim:
            pts = pts.reshape(-1, spec.dim)
        scaled = pts * spec.points_per_axis / (2.0 * np.pi)
        idx = np.rint(scaled)
        if np.any(np.abs(scaled - idx) > 1e-9):
            raise ConfigurationError("sensor location is not a grid point")
        idx = idx.astype(np.int64) % spec.points_per_axis
        return cls(spec, idx, _detect_equispaced(spec, idx))

    @property
    def m(self) -> int:
        return int(self.indices.shape[0])

    @property
    def locations(self) -> np.ndarray:
        return self.indices * (2.0 * np.pi / self.spec.points_per_axis)


def _detect_equispaced(spec: GridSpec, idx: np.ndarray) -> Optional[int]:
    n = round(idx.shape[0] ** (1.0 / spec.dim))
    if n < 1 or n**spec.dim != idx.shape[0] or spec.points_per_axis % n:
        return None
    ref = SensorSet.equispaced(spec, n).indices
    same = np.array_equal(np.unique(ref, axis=0), np.unique(idx, axis=0))
    return n if same else None


@dataclass(frozen=True)
class Observation:
    readings: np.ndarray

    @property
    def m(self) -> int:
        return int(self.readings.size)


def observe_values(sensors: SensorSet, values: np.ndarray) -> np.ndarray:
    """Batched point evaluation: ``(...,)+grid -> (..., m)``."""
    d = sensors.spec.dim
    idx = tuple(sensors.indices[:, r] for r in range(d))
    return values[(Ellipsis,) + idx]


def observe(sensors: SensorSet, u0: TorusField) -> Observation:
    if u0.spec.shape != sensors.spec.shape:
        raise ConfigurationError("sensor grid differs from field grid")
    return Observation(observe_values(sensors, u0.values))


def _embedding_matrix(m: int, m_ax: int) -> np.ndarray:
    """Maps m-point DFT coefficients onto the m_ax-point spectrum.

    The Nyquist coefficient of an even m is split evenly between +m/2 and -m/2,
    which keeps the interpolant real and equal to the readings at the sensors.
    """
    E = np.zeros((m_ax, m))
    for j in range(m):
        k = j if j <= m // 2 else j - m
        if m % 2 == 0 and abs(k) == m // 2 and m < m_ax:
            E[m // 2, j] = 0.5
            E[m_ax - m // 2, j] = 0.5
        else:
            E[k % m_ax, j] = 1.0
    return E


def reconstruct_values(
    sensors: SensorSet, readings: np.ndarray, s0: float | None = None, r0: float | None = None
) -> np.ndarray:
    """Batched trigonometric interpolation ``(..., m) -> (...,)+grid``.

    With ``s0`` and ``r0`` the result is radially projected onto the H^s0 ball.
    """
    spec = sensors.spec
    n = sensors.per_axis
    if n is None:
        raise UnsupportedConfigurationError("reconstruction needs equispaced sensors")
    if n < 2:
        raise UnsupportedConfigurationError("reconstruction needs >= 2 sensors per axis")
    d = spec.dim
    lead = readings.shape[:-1]
    r = readings.reshape(lead + (n,) * d)
    c = np.fft.fftn(r, axes=tuple(range(-d, 0))) / n**d
    E = _embedding_matrix(n, spec.points_per_axis)
    for axis in range(-d, 0):
        c = np.moveaxis(np.tensordot(c, E, axes=([axis], [1])), -1, axis)
    u = inverse(c, spec)
    if s0 is not None and r0 is not None:
        norm = sobolev_norm_array(u, spec, s0)
        factor = np.where(norm > r0, r0 / np.where(norm > 0, norm, 1.0), 1.0)
        u = u * factor.reshape(factor.shape + (1,) * d)
    return u


def reconstruct(
    sensors: SensorSet, obs: Observation, s0: float | None = None, r0: float | None = None
) -> TorusField:
    if obs.m != sensors.m:
        raise ConfigurationError(f"{obs.m} readings for {sensors.m} sensors")
    return TorusField(sensors.spec, reconstruct_values(sensors, obs.readings, s0, r0))


def reconstruction_error(
    law: InitialLaw, sensors: SensorSet, n_mc: int, project: bool = True
) -> float:
    """Monte-Carlo mean of sup|E(P_m u0) - u0|^2 over ``n_mc`` draws."""
    if n_mc < 1:
        raise ConfigurationError("n_mc must be >= 1")
    u0 = sample_initial_values(law, sensors.spec, n_mc)
    s0, r0 = (law.s0, law.r0) if project else (None, None)
    rec = reconstruct_values(sensors, observe_values(sensors, u0), s0, r0)
    err = np.max(np.abs(rec - u0).reshape(n_mc, -1), axis=1)
    return float(np.mean(err**2))
