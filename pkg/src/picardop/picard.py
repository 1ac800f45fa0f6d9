"""
Picard map, its ell-step iterates, the Picard-type FNO, a fixed-point
reference solver, and the truncation / implementation error meters.

A ``PicardModel`` pairs a scalar nonlinearity with a semigroup kind:

* exact semigroup + catalog ``Nonlinearity``  -> abstract Picard predictor b_{F,ell}
* ``SemigroupKind.truncated(N)`` + ``PiecewiseLinear`` -> Picard-type FNO

Both share one code path; the iterate at depth 0 is the zero trajectory.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Iterable, Sequence

import numpy as np

from .errors import ConfigurationError, DomainError, SolverStallError
from .nonlinearity import Scalar
from .semigroup import SemigroupKind, duhamel_coeffs, semigroup_orbit_coeffs
from .spectral import GridSpec, TorusField, TrajectoryField, forward, inverse

# Sup-norm slack for U_M / U_{0,R} membership; larger overshoots are bugs.
MEMBERSHIP_SLACK = 1e-8
_REL = 1e-12


@dataclass(frozen=True)
class Inequality:
    label: str
    lhs: float
    rhs: float
    strict: bool = False

    @property
    def holds(self) -> bool:
        if self.strict:
            return self.lhs < self.rhs
        return self.lhs <= self.rhs + _REL * max(1.0, abs(self.rhs))

    def __str__(self) -> str:
        op = "<" if self.strict else "<="
        mark = "ok" if self.holds else "VIOLATED"
        return f"{self.label}: {self.lhs:.12g} {op} {self.rhs:.12g}  [{mark}]"


@dataclass(frozen=True)
class PicardParams:
    """Constants of the contraction setting plus depth and Fourier rank."""

    R: float
    M: float
    L: float
    T: float
    delta: float
    c_s: float = 1.0
    ell: int = 1
    rank: int = 16

    def inequalities(self) -> list[Inequality]:
        return [
            Inequality("R + T*L*M <= M", self.R + self.T * self.L * self.M, self.M),
            Inequality("T*L <= delta", self.T * self.L, self.delta),
            Inequality("delta < 1", self.delta, 1.0, strict=True),
            Inequality("0 < delta", 0.0, self.delta, strict=True),
            Inequality("C_S <= 1 (torus)", self.c_s, 1.0),
        ]

    def __post_init__(self):
        for name in ("R", "M", "T"):
            if not getattr(self, name) > 0:
                raise ConfigurationError(f"{name} must be positive")
        if self.L < 0:
            raise ConfigurationError("L must be >= 0")
        if self.ell < 0:
            raise ConfigurationError("Picard depth must be >= 0")
        failed = [str(q) for q in self.inequalities() if not q.holds]
        if failed:
            raise ConfigurationError("invalid Picard parameters: " + "; ".join(failed))

    @property
    def truncation_bound(self) -> float:
        """M delta^ell / (1 - delta)."""
        return truncation_bound(self.M, self.delta, self.ell)

    def with_(self, **changes) -> "PicardParams":
        return replace(self, **changes)


def truncation_bound(M: float, delta: float, ell: int) -> float:
    return M * delta**ell / (1.0 - delta)


@dataclass(frozen=True, eq=False)
class PicardModel:
    params: PicardParams
    nonlinearity: Scalar
    semigroup: SemigroupKind = field(default_factory=SemigroupKind.exact)

    def __post_init__(self):
        if self.nonlinearity.lipschitz > self.params.L * (1 + 1e-12):
            raise ConfigurationError(
                f"nonlinearity Lipschitz {self.nonlinearity.lipschitz:.6g} exceeds "
                f"L = {self.params.L:.6g}"
            )

    @property
    def is_fno(self) -> bool:
        return not self.semigroup.is_exact

    def with_depth(self, ell: int) -> "PicardModel":
        return replace(self, params=self.params.with_(ell=ell))

    def predict(self, u0: TorusField) -> TrajectoryField:
        return iterate(self, u0, self.params.ell)

    def predict_values(self, u0_values: np.ndarray, spec: GridSpec) -> np.ndarray:
        """Batched depth-ell iterate: ``(B,)+grid -> (B, n_t)+grid``."""
        return iterate_values(self, u0_values, spec, self.params.ell)


def _check_initial(model: PicardModel, u0_values: np.ndarray) -> None:
    sup = float(np.max(np.abs(u0_values))) if u0_values.size else 0.0
    if sup > model.params.R + MEMBERSHIP_SLACK:
        raise DomainError(f"initial datum sup {sup:.6g} exceeds R = {model.params.R:.6g}")


def _check_solution(model: PicardModel, values: np.ndarray, what: str) -> None:
    sup = float(np.max(np.abs(values))) if values.size else 0.0
    if sup > model.params.M + MEMBERSHIP_SLACK:
        raise DomainError(
            f"{what} has sup {sup:.6g} > M = {model.params.M:.6g}; "
            "parameters or quadrature break the self-map property"
        )


class _Stepper:
    """Precomputes S(t)u0 for a batch so repeated Picard steps only redo Duhamel."""

    def __init__(self, model: PicardModel, u0_values: np.ndarray, spec: GridSpec):
        self.model = model
        self.spec = spec
        self.mask = model.semigroup.mask(spec)
        self.horizon = model.params.T
        u0_hat = forward(u0_values, spec)
        self.orbit_hat = semigroup_orbit_coeffs(u0_hat, spec, self.horizon, self.mask)
        self.orbit = inverse(self.orbit_hat, spec)

    def step(self, v: np.ndarray | None) -> np.ndarray:
        if v is None:  # v = 0 and F(0) = 0
            return self.orbit.copy()
        g_hat = forward(self.model.nonlinearity(v), self.spec)
        k_hat = duhamel_coeffs(g_hat, self.spec, self.horizon, self.mask)
        return inverse(self.orbit_hat + k_hat, self.spec)


def _batch_shape(u0_values: np.ndarray, spec: GridSpec, n: int) -> tuple[int, ...]:
    return u0_values.shape[: u0_values.ndim - spec.dim] + (n,) + spec.shape


def iterate_values(
    model: PicardModel, u0_values: np.ndarray, spec: GridSpec, ell: int
) -> np.ndarray:
    if ell < 0:
        raise ConfigurationError(f"Picard depth must be >= 0, got {ell}")
    u0_values = np.asarray(u0_values, dtype=float)
    _check_initial(model, u0_values)
    if ell == 0:
        return np.zeros(_batch_shape(u0_values, spec, spec.time_nodes))
    stepper = _Stepper(model, u0_values, spec)
    u = None
    for j in range(ell):
        u = stepper.step(u)
        _check_solution(model, u, f"iterate {j + 1}")
    return u


def picard_step(model: PicardModel, u0: TorusField, v: TrajectoryField) -> TrajectoryField:
    """One application of the Picard map: S(t)u0 + K[F(v)](t)."""
    if v.spec.shape != u0.spec.shape:
        raise ConfigurationError("u0 and v live on different grids")
    if not math.isclose(v.horizon, model.params.T, rel_tol=1e-12):
        raise ConfigurationError(
            f"trajectory horizon {v.horizon} differs from block horizon {model.params.T}"
        )
    _check_initial(model, u0.values)
    _check_solution(model, v.values, "input trajectory")
    stepper = _Stepper(model, u0.values, v.spec)
    return TrajectoryField(v.spec, stepper.step(v.values), v.horizon)


def iterate(model: PicardModel, u0: TorusField, ell: int | None = None) -> TrajectoryField:
    """Depth-ell iterate T^[ell][0]; ``ell=None`` uses the model's depth."""
    ell = model.params.ell if ell is None else ell
    values = iterate_values(model, u0.values, u0.spec, ell)
    return TrajectoryField(u0.spec, values, model.params.T)


@dataclass(frozen=True)
class FixedPointInfo:
    """Solver diagnostics; ``a_posteriori`` = delta/(1-delta) * last increment
    bounds the distance to the fixed point."""

    steps: int
    last_increment: float
    a_posteriori: float


def stall_budget(tol: float, delta: float) -> int:
    return 10 * max(1, math.ceil(math.log(tol) / math.log(delta)))


def solve_fixed_point_values(
    model: PicardModel, u0_values: np.ndarray, spec: GridSpec, tol: float
) -> tuple[np.ndarray, FixedPointInfo]:
    if not tol > 0:
        raise DomainError(f"tolerance must be positive, got {tol}")
    u0_values = np.asarray(u0_values, dtype=float)
    _check_initial(model, u0_values)
    delta = model.params.delta
    budget = stall_budget(tol, delta)
    stepper = _Stepper(model, u0_values, spec)
    prev = np.zeros(_batch_shape(u0_values, spec, spec.time_nodes))
    for k in range(1, budget + 1):
        cur = stepper.step(prev if k > 1 else None)
        _check_solution(model, cur, f"fixed-point iterate {k}")
        inc = float(np.max(np.abs(cur - prev))) if cur.size else 0.0
        prev = cur
        if inc <= tol * (1.0 - delta):
            return cur, FixedPointInfo(k, inc, delta / (1.0 - delta) * inc)
    raise SolverStallError(
        f"fixed-point iteration did not reach tol={tol:g} in {budget} steps "
        f"(last increment {inc:.3g}); contraction precondition likely violated"
    )


def solve_fixed_point(
    model: PicardModel, u0: TorusField, tol: float = 1e-10, return_info: bool = False
):
    """Reference solution G(u0): iterate until the increment is <= tol*(1-delta)."""
    values, info = solve_fixed_point_values(model, u0.values, u0.spec, tol)
    traj = TrajectoryField(u0.spec, values, model.params.T)
    return (traj, info) if return_info else traj


def truncation_error(
    model: PicardModel, u0: TorusField, ell: int, reference: TrajectoryField
) -> float:
    """sup |u^(ell) - reference| over the space-time grid."""
    diff = iterate(model, u0, ell).values - reference.values
    return float(np.max(np.abs(diff)))


@dataclass(frozen=True)
class ImplementationError:
    total: float
    rho_term: float
    fourier_term: float


def implementation_error(
    exact_model: PicardModel,
    fno_model: PicardModel,
    test_set: Sequence[TorusField] | Iterable[TorusField],
    decompose: bool = False,
):
    """max over the test set of sup |Gamma_FNO(u0) - T_F^[ell][0](u0)|.

    With ``decompose=True`` an intermediate model (exact semigroup, FNO's rho)
    splits the error into the rho-substitution and Fourier-truncation parts.
    """
    ell = exact_model.params.ell
    if fno_model.params.ell != ell:
        raise ConfigurationError(
            f"depth mismatch: exact model ell={ell}, FNO ell={fno_model.params.ell}"
        )
    test_set = list(test_set)
    if not test_set:
        raise ConfigurationError("empty test set")
    spec = test_set[0].spec
    batch = np.stack([u.values for u in test_set])
    exact = iterate_values(exact_model, batch, spec, ell)
    fno = iterate_values(fno_model, batch, spec, ell)
    axes = tuple(range(1, fno.ndim))
    total = float(np.max(np.abs(fno - exact)))
    if not decompose:
        return total
    mid_model = PicardModel(exact_model.params, fno_model.nonlinearity, SemigroupKind.exact())
    mid = iterate_values(mid_model, batch, spec, ell)
    rho_term = float(np.max(np.max(np.abs(mid - exact), axis=axes)))
    fourier_term = float(np.max(np.max(np.abs(fno - mid), axis=axes)))
    return ImplementationError(total, rho_term, fourier_term)


def picard_step_values(
    model: PicardModel, u0_values: np.ndarray, v_values: np.ndarray, spec: GridSpec
) -> np.ndarray:
    """Batched Picard map: ``(B,)+grid`` data and ``(B, n_t)+grid`` inputs."""
    u0_values = np.asarray(u0_values, dtype=float)
    _check_initial(model, u0_values)
    _check_solution(model, v_values, "input trajectory")
    return _Stepper(model, u0_values, spec).step(np.asarray(v_values, dtype=float))
