"""
Scalar nonlinearities F on [-M, M] with F(0) = 0 and a certified Lipschitz
constant, and their piecewise-affine interpolants rho_F.

A continuous piecewise-affine function with K knots is exactly a
one-hidden-layer ReLU network with O(K) units, so the knot table below is
used directly as the scalar network of the Picard-type FNO.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Union

import numpy as np

from .errors import AdmissibilityError, CertificationError, DomainError
from .spectral import TrajectoryField

CATALOG_NAMES = (
    "zero",
    "linear",
    "sin",
    "tanh",
    "exp_minus_one",
    "allen_cahn",
    "power",
    "defocusing",
)

_CERT_SAMPLES = 10_000
_SLACK = 1e-8


@dataclass(frozen=True, eq=False)
class Nonlinearity:
    """Admissible scalar map: F(0) = 0 and Lipschitz constant ``lipschitz``."""

    func: Callable[[np.ndarray], np.ndarray]
    lipschitz: float
    bound: float
    tag: str = "custom"
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if float(self.func(np.zeros(1))[0]) != 0.0:
            raise AdmissibilityError(f"{self.tag}: F(0) must be exactly 0")

    @property
    def zero_at_zero(self) -> bool:
        return float(self.func(np.zeros(1))[0]) == 0.0

    def __call__(self, u):
        return self.func(np.asarray(u, dtype=float))

    def sampled_lipschitz(self, n: int = _CERT_SAMPLES) -> float:
        """Largest secant slope on a uniform grid of ``n`` points in [-M, M]."""
        a = np.linspace(-self.bound, self.bound, n)
        return float(np.max(np.abs(np.diff(self(a)) / np.diff(a))))

    def describe(self) -> str:
        if not self.params:
            return self.tag
        args = " ".join(f"{k}={v:g}" for k, v in sorted(self.params.items()))
        return f"{self.tag} {args}"


@dataclass(frozen=True, eq=False)
class PiecewiseLinear:
    """Continuous piecewise-affine map given by a knot/value table."""

    knots: np.ndarray
    values: np.ndarray
    tag: str = "rho"

    def __post_init__(self):
        knots = np.asarray(self.knots, dtype=float)
        values = np.asarray(self.values, dtype=float)
        if knots.ndim != 1 or knots.shape != values.shape or knots.size < 2:
            raise CertificationError("knots and values must be 1-D of equal length >= 2")
        if np.any(np.diff(knots) <= 0):
            raise CertificationError("knots must be strictly increasing")
        zero = np.flatnonzero(knots == 0.0)
        if zero.size != 1 or values[zero[0]] != 0.0:
            raise CertificationError("0 must be a knot with value exactly 0")
        knots.setflags(write=False)
        values.setflags(write=False)
        object.__setattr__(self, "knots", knots)
        object.__setattr__(self, "values", values)

    @property
    def bound(self) -> float:
        return float(min(-self.knots[0], self.knots[-1]))

    @property
    def size(self) -> int:
        """Network-size surrogate H: the number of knots."""
        return int(self.knots.size)

    @property
    def slopes(self) -> np.ndarray:
        return np.diff(self.values) / np.diff(self.knots)

    @property
    def lipschitz(self) -> float:
        return float(np.max(np.abs(self.slopes)))

    def __call__(self, u):
        return np.interp(np.asarray(u, dtype=float), self.knots, self.values)


Scalar = Union[Nonlinearity, PiecewiseLinear]


def _power_lip(lam: float, p: float, M: float) -> float:
    return abs(lam) * p * M ** (p - 1.0)


def catalog(name: str, M: float, L: float | None = None, **params) -> Nonlinearity:
    """Build a named nonlinearity on [-M, M] with an analytic Lipschitz bound.

    Every entry accepts ``scale`` (multiplies F). Extra parameters:
    ``linear``: a; ``power``: lam, p; ``defocusing``: alpha, beta, p.
    If ``L`` is given the certified constant must not exceed it.
    """
    if M <= 0:
        raise DomainError(f"M must be positive, got {M}")
    given = {k: float(v) for k, v in params.items()}
    params = dict(given)
    scale = params.pop("scale", 1.0)
    s = abs(scale)
    if name == "zero":
        func, lip = (lambda u: np.zeros_like(u)), 0.0
    elif name == "linear":
        a = params.pop("a", 1.0) * scale
        func, lip = (lambda u: a * u), abs(a)
    elif name == "sin":
        func, lip = (lambda u: scale * np.sin(u)), s
    elif name == "tanh":
        func, lip = (lambda u: scale * np.tanh(u)), s
    elif name == "exp_minus_one":
        func, lip = (lambda u: scale * np.expm1(u)), s * math.exp(M)
    elif name == "allen_cahn":
        func = lambda u: scale * (u - u**3)  # noqa: E731
        lip = s * max(1.0, 3.0 * M**2 - 1.0)
    elif name == "power":
        lam = params.pop("lam", 1.0) * scale
        p = params.pop("p", 3.0)
        if p < 1:
            raise AdmissibilityError("power nonlinearity needs p >= 1 to be Lipschitz")
        func = lambda u: lam * np.abs(u) ** (p - 1.0) * u  # noqa: E731
        lip = _power_lip(lam, p, M)
    elif name == "defocusing":
        alpha = params.pop("alpha", 1.0) * s
        beta = params.pop("beta", 0.0) * s
        p = params.pop("p", 3.0)
        if alpha < 0 or beta < 0:
            raise AdmissibilityError("defocusing needs alpha, beta >= 0")
        if p < 1:
            raise AdmissibilityError("defocusing needs p >= 1 to be Lipschitz")
        func = lambda u: -alpha * u - beta * np.abs(u) ** (p - 1.0) * u  # noqa: E731
        lip = alpha + _power_lip(beta, p, M)
    else:
        raise AdmissibilityError(
            f"unknown nonlinearity {name!r}; valid: {', '.join(CATALOG_NAMES)}"
        )
    if params:
        raise AdmissibilityError(f"unexpected parameters for {name}: {sorted(params)}")
    if L is not None and lip > L * (1 + 1e-12):
        raise AdmissibilityError(
            f"{name}: certified Lipschitz constant {lip:.6g} exceeds L = {L:.6g}"
        )
    return Nonlinearity(func, lip, float(M), tag=name, params=given)


def build_rho(F: Nonlinearity, M: float, L: float, eta: float) -> PiecewiseLinear:
    """Piecewise-affine interpolant of F on a uniform partition containing 0.

    The mesh is h = min(eta / L, M / 2), so ``|F - rho| <= L h <= eta`` and every
    secant slope is bounded by Lip(F) <= L.
    """
    if not eta > 0:
        raise DomainError(f"accuracy eta must be positive, got {eta}")
    if F.lipschitz > L * (1 + 1e-12):
        raise AdmissibilityError(f"{F.tag}: Lip {F.lipschitz:.6g} exceeds L = {L:.6g}")
    if L == 0:
        probe = F(np.linspace(-M, M, _CERT_SAMPLES))
        if np.any(probe != 0.0):
            raise CertificationError(f"{F.tag}: L = 0 certified but F is not identically 0")
        knots = np.array([-M, 0.0, M])
        return PiecewiseLinear(knots, np.zeros(3), tag=f"rho[{F.tag}]")
    h = min(eta / L, M / 2.0)
    per_side = math.ceil(M / h - 1e-12)
    right = np.linspace(0.0, M, per_side + 1)
    knots = np.concatenate([-right[:0:-1], right])
    values = F(knots)
    values[per_side] = 0.0
    return PiecewiseLinear(knots, values, tag=f"rho[{F.tag}]")


def certify_rho(F: Nonlinearity, rho: PiecewiseLinear, refine: int = 10) -> float:
    """sup |F - rho| on a grid ``refine`` times finer than the knot table."""
    k = rho.knots
    t = np.linspace(0.0, 1.0, refine + 1)[:-1]
    pts = np.concatenate([(k[:-1, None] + np.diff(k)[:, None] * t).ravel(), k[-1:]])
    return float(np.max(np.abs(F(pts) - rho(pts))))


def apply_pointwise(F: Scalar, u: TrajectoryField, M: float | None = None) -> TrajectoryField:
    """Apply F at every grid point and time node of ``u``."""
    bound = F.bound if M is None else M
    peaks = np.max(np.abs(u.values.reshape(u.values.shape[0], -1)), axis=1)
    bad = np.flatnonzero(peaks > bound + _SLACK)
    if bad.size:
        j = int(bad[0])
        raise DomainError(
            f"slice {j} (t={u.times[j]:.6g}) has sup {peaks[j]:.6g} > M = {bound:.6g}"
        )
    return TrajectoryField(u.spec, F(u.values), u.horizon)


def catalog_at_lipschitz(M: float, L: float) -> list[Nonlinearity]:
    """One member per catalog name, scaled so its certified constant equals L
    (``zero`` excepted). Cubic terms use p = 3."""
    cubic = 3.0 * M**2
    specs = [
        ("zero", {}),
        ("linear", {"a": L}),
        ("sin", {"scale": L}),
        ("tanh", {"scale": L}),
        ("exp_minus_one", {"scale": L / math.exp(M)}),
        ("allen_cahn", {"scale": L / max(1.0, cubic - 1.0)}),
        ("power", {"lam": L / cubic, "p": 3.0}),
        ("defocusing", {"alpha": L / 2.0, "beta": L / (2.0 * cubic), "p": 3.0}),
    ]
    return [catalog(name, M, L, **kw) for name, kw in specs]
