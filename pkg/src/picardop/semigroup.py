"""
Heat semigroup e^{t Lap} on the torus, its Fejer-truncated version
S_N(t) = P_N e^{t Lap}, and the Duhamel operator

    K[g](t) = int_0^t S(t - tau) g(tau) dtau.

The time integral is evaluated mode by mode, exactly, for the piecewise-linear
interpolant of g in time (an exponential-integrator rule). Each node weight
is the integral of a nonnegative hat function against a positive kernel, so
the discrete operator keeps ``sup|K[g]| <= T sup|g|``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import ConfigurationError, DomainError
from .spectral import (
    GridSpec,
    TorusField,
    TrajectoryField,
    fejer_weights,
    forward,
    inverse,
)

# Below this |lambda*h| the closed forms lose digits to cancellation; use series.
_SERIES_CUTOFF = 0.1
_SCAN_BLOCK = 64
_SERIES_TERMS = 14


@dataclass(frozen=True)
class SemigroupKind:
    """``rank=None`` is the exact semigroup; an integer N selects S_N."""

    rank: Optional[int] = None

    @classmethod
    def exact(cls) -> "SemigroupKind":
        return cls(None)

    @classmethod
    def truncated(cls, rank: int) -> "SemigroupKind":
        if rank < 0:
            raise ConfigurationError(f"Fourier rank must be >= 0, got {rank}")
        return cls(int(rank))

    @property
    def is_exact(self) -> bool:
        return self.rank is None

    def mask(self, spec: GridSpec) -> np.ndarray:
        if self.rank is None:
            return np.ones(spec.shape)
        return fejer_weights(spec, self.rank)

    def __str__(self) -> str:
        return "exact" if self.rank is None else f"truncated(N={self.rank})"


def heat_multiplier(xi, t: float) -> float:
    """exp(-t |xi|^2)."""
    if t < 0:
        raise DomainError(f"time must be >= 0, got {t}")
    xi = np.atleast_1d(np.asarray(xi, dtype=float))
    return float(np.exp(-t * np.sum(xi**2)))


def apply_semigroup(kind: SemigroupKind, f: TorusField, t: float) -> TorusField:
    if t < 0:
        raise DomainError(f"time must be >= 0, got {t}")
    mult = np.exp(-t * f.spec.wavenumber_sq) * kind.mask(f.spec)
    return TorusField.from_spectrum(f.spec, f.spectrum * mult)


def _phi1(z: np.ndarray) -> np.ndarray:
    """(1 - e^{-z}) / z, continuous at z = 0."""
    z = np.asarray(z, dtype=float)
    out = np.empty_like(z)
    small = np.abs(z) < _SERIES_CUTOFF
    zb = z[~small]
    out[~small] = -np.expm1(-zb) / zb
    zs = z[small]
    acc = np.zeros_like(zs)
    term = np.ones_like(zs)
    fact = 1.0
    for k in range(_SERIES_TERMS):
        fact *= k + 1
        acc += term / fact
        term = term * (-zs)
    out[small] = acc
    return out


def _phi2(z: np.ndarray) -> np.ndarray:
    """(1 - e^{-z}(1 + z)) / z^2, continuous at z = 0 (value 1/2)."""
    z = np.asarray(z, dtype=float)
    out = np.empty_like(z)
    small = np.abs(z) < _SERIES_CUTOFF
    zb = z[~small]
    out[~small] = (-np.expm1(-zb) - zb * np.exp(-zb)) / zb**2
    zs = z[small]
    acc = np.zeros_like(zs)
    term = np.ones_like(zs)
    fact = 1.0
    for k in range(_SERIES_TERMS):
        fact *= k + 1  # (k+1)!
        acc += term * (k + 1) / (fact * (k + 2))
        term = term * (-zs)
    out[small] = acc
    return out


def duhamel_weights(spec: GridSpec, step: float) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Per-mode (decay, w_left, w_right) for one time step of length ``step``.

    For g linear on [t_k, t_k + h]:
      I(t_k + h) = decay * I(t_k) + w_left * g_k + w_right * g_{k+1}.
    """
    lam = spec.wavenumber_sq
    z = lam * step
    decay = np.exp(-z)
    w_left = step * _phi2(z)
    w_right = step * _phi1(z) - w_left
    return decay, w_left, w_right


def duhamel_coeffs(
    g_hat: np.ndarray, spec: GridSpec, horizon: float, mask: np.ndarray
) -> np.ndarray:
    """Spectral Duhamel integral along the time axis (axis -d-1).

    ``g_hat`` has shape ``(..., n_t) + grid``; the output has the same shape.
    """
    n_t = g_hat.shape[-spec.dim - 1]
    if n_t != spec.time_nodes:
        raise ConfigurationError(
            f"trajectory has {n_t} time nodes, grid expects {spec.time_nodes}"
        )
    h = horizon / (n_t - 1)
    _, wl, wr = duhamel_weights(spec, h)
    g = np.moveaxis(g_hat, -spec.dim - 1, 0)
    # increments b_k entering I_{k+1} = e^{-lambda h} I_k + b_k
    b = wl * g[:-1] + wr * g[1:]
    out = np.empty_like(g)
    out[0] = 0.0
    out[1:] = _linear_scan(b, spec.wavenumber_sq * h)
    out = out * mask
    return np.moveaxis(out, 0, -spec.dim - 1)


def _linear_scan(b: np.ndarray, z: np.ndarray, block: int = _SCAN_BLOCK) -> np.ndarray:
    """Solve I_{k+1} = e^{-z} I_k + b_k with I_0 = 0 along axis 0.

    Within a block the recursion is summed in closed form with the powers
    e^{-z (i - j)}, which never overflow because z >= 0; blocks are chained
    sequentially, so the Python-level loop runs n / block times.
    """
    n = b.shape[0]
    size = min(block, n)
    lag = np.arange(size)[:, None] - np.arange(size)[None, :]
    zz = z[..., None, None]
    # powers[..., i, j] = e^{-z (i - j)} for i >= j, else 0
    powers = np.where(lag >= 0, np.exp(-np.maximum(lag, 0) * zz), 0.0)
    decay_to = np.exp(-np.arange(1, size + 1) * z[..., None])
    bt = np.moveaxis(b, 0, -1)
    out = np.empty_like(bt)
    carry = np.zeros_like(bt[..., 0])
    for lo in range(0, n, size):
        hi = min(n, lo + size)
        k = hi - lo
        chunk = bt[..., lo:hi, None]
        out[..., lo:hi] = (powers[..., :k, :k] @ chunk)[..., 0] + decay_to[..., :k] * carry[..., None]
        carry = out[..., hi - 1]
    return np.moveaxis(out, -1, 0)


def semigroup_orbit_coeffs(
    u0_hat: np.ndarray, spec: GridSpec, horizon: float, mask: np.ndarray
) -> np.ndarray:
    """Coefficients of t -> S(t) u0 at every time node; shape ``(..., n_t) + grid``."""
    times = np.linspace(0.0, horizon, spec.time_nodes)
    mult = np.exp(-times.reshape((-1,) + (1,) * spec.dim) * spec.wavenumber_sq) * mask
    return np.expand_dims(u0_hat, axis=-spec.dim - 1) * mult


def duhamel(kind: SemigroupKind, g: TrajectoryField) -> TrajectoryField:
    """Evaluate int_0^t S(t - tau) g(tau) dtau at every time node."""
    spec = g.spec
    mask = kind.mask(spec)
    g_hat = forward(g.values, spec)
    out = inverse(duhamel_coeffs(g_hat, spec, g.horizon, mask), spec)
    return TrajectoryField(spec, out, g.horizon)
