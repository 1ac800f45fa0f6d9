"""
Losses, empirical risks, ERM over a finite candidate family, Monte-Carlo
Rademacher complexity, and the right-hand sides of the generalization bounds.

Query points z = (x, t) are grid points paired with time nodes, drawn
uniformly; that uniform law plays the role of the query measure mu.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Protocol, Sequence

import numpy as np

from .data import InitialLaw, SensorSet, observe_values, reconstruct_values, sample_initial_values
from .errors import ConfigurationError, DomainError
from .nonlinearity import Nonlinearity, PiecewiseLinear, Scalar, build_rho
from .picard import PicardModel, PicardParams, solve_fixed_point_values
from .semigroup import SemigroupKind
from .spectral import GridSpec, TorusField


def clipped_loss(pred, target, M: float):
    """(clip(pred, [-M, M]) - target)^2; elementwise on arrays."""
    return (np.clip(pred, -M, M) - target) ** 2


@dataclass(frozen=True, eq=False)
class TrajectorySample:
    """One trajectory block: u0 with q query points and reference targets.

    ``queries`` is an integer array ``(q, d+1)``: d spatial grid indices then
    the time-node index.
    """

    u0: TorusField
    queries: np.ndarray
    targets: np.ndarray


@dataclass(frozen=True, eq=False)
class Dataset:
    spec: GridSpec
    horizon: float
    u0: np.ndarray
    queries: np.ndarray
    targets: np.ndarray
    M: float

    @property
    def n(self) -> int:
        return int(self.u0.shape[0])

    @property
    def q(self) -> int:
        return int(self.queries.shape[1]) if self.queries.ndim == 3 else 0

    def __len__(self) -> int:
        return self.n

    def samples(self) -> list[TrajectorySample]:
        return [
            TrajectorySample(TorusField(self.spec, self.u0[i]), self.queries[i], self.targets[i])
            for i in range(self.n)
        ]

    def gather(self, traj: np.ndarray) -> np.ndarray:
        """Read trajectories ``(n, n_t)+grid`` at the dataset's queries -> ``(n, q)``."""
        d = self.spec.dim
        i = np.arange(self.n)[:, None]
        t_idx = self.queries[..., d]
        x_idx = tuple(self.queries[..., r] for r in range(d))
        return traj[(i, t_idx) + x_idx]


def draw_queries(rng: np.random.Generator, spec: GridSpec, n: int, q: int) -> np.ndarray:
    x = rng.integers(0, spec.points_per_axis, size=(n, q, spec.dim))
    t = rng.integers(0, spec.time_nodes, size=(n, q, 1))
    return np.concatenate([x, t], axis=2)


def make_dataset(
    law: InitialLaw,
    truth: PicardModel,
    spec: GridSpec,
    n: int,
    q: int,
    seed: int,
    ref_tol: float = 1e-10,
    start: int = 0,
    noise: float = 0.0,
) -> Dataset:
    """n trajectory blocks with targets from the fixed-point reference solver.

    Initial data come from ``law`` (its own seed) at sample indices
    ``start..start+n-1``; query points come from ``seed``. ``noise`` adds
    Gaussian target noise (clipped back to [-M, M]); the default is noiseless.
    """
    if not truth.semigroup.is_exact:
        raise ConfigurationError("targets must come from the exact semigroup")
    if ref_tol > 1e-8:
        raise ConfigurationError(f"reference tolerance {ref_tol:g} is looser than 1e-8")
    if n == 0:
        empty = np.zeros((0,) + spec.shape)
        return Dataset(spec, truth.params.T, empty, np.zeros((0, q, spec.dim + 1), int),
                       np.zeros((0, q)), truth.params.M)
    u0 = sample_initial_values(law, spec, n, start=start)
    ref, _ = solve_fixed_point_values(truth, u0, spec, ref_tol)
    rng = np.random.default_rng(np.random.SeedSequence([int(seed), 0x51]))
    queries = draw_queries(rng, spec, n, q)
    ds = Dataset(spec, truth.params.T, u0, queries, np.zeros((n, q)), truth.params.M)
    targets = ds.gather(ref)
    if np.any(np.abs(targets) > truth.params.M):
        raise DomainError("reference target exceeds M")
    if noise < 0:
        raise DomainError("noise level must be >= 0")
    if noise > 0:
        targets = np.clip(targets + noise * rng.standard_normal(targets.shape),
                          -truth.params.M, truth.params.M)
    return Dataset(spec, truth.params.T, u0, queries, targets, truth.params.M)


class Predictor(Protocol):
    def predict_values(self, u0_values: np.ndarray, spec: GridSpec) -> np.ndarray: ...


@dataclass(frozen=True, eq=False)
class FiniteObservationModel:
    """Gamma_m(a, z): a model that only sees sensor readings a = P_m u0."""

    sensors: SensorSet
    model: PicardModel
    s0: float | None = None
    r0: float | None = None

    def evaluate(self, readings: np.ndarray) -> np.ndarray:
        """``(B, m) -> (B, n_t)+grid``: reconstruct, then run the local model."""
        u = reconstruct_values(self.sensors, readings, self.s0, self.r0)
        return self.model.predict_values(u, self.sensors.spec)


@dataclass(frozen=True, eq=False)
class LiftedModel:
    """Gamma_m^up(u0)(z) := Gamma_m(P_m u0, z), an operator on full initial data."""

    inner: FiniteObservationModel

    def predict_values(self, u0_values: np.ndarray, spec: GridSpec) -> np.ndarray:
        return self.inner.evaluate(observe_values(self.inner.sensors, u0_values))


@dataclass(frozen=True)
class RiskReport:
    empirical: float
    per_block: list[float]
    n: int
    q: int

    def to_dict(self) -> dict:
        return {"empirical": self.empirical, "n": self.n, "q": self.q}


def _report(losses: np.ndarray) -> RiskReport:
    per_block = losses.mean(axis=1)
    return RiskReport(float(per_block.mean()), [float(x) for x in per_block],
                      losses.shape[0], losses.shape[1])


def predictions(predictor: Predictor, data: Dataset) -> np.ndarray:
    return data.gather(predictor.predict_values(data.u0, data.spec))


def empirical_risk(predictor: Predictor, data: Dataset) -> RiskReport:
    """Mean over blocks of the mean clipped loss over each block's queries."""
    if data.n == 0:
        raise ConfigurationError("empirical risk of an empty dataset")
    return _report(clipped_loss(predictions(predictor, data), data.targets, data.M))


def empirical_risk_finite_obs(model: FiniteObservationModel, data: Dataset) -> RiskReport:
    """Finite-observation empirical risk, evaluating Gamma_m on P_m u0 directly."""
    if data.n == 0:
        raise ConfigurationError("empirical risk of an empty dataset")
    readings = observe_values(model.sensors, data.u0)
    pred = data.gather(model.evaluate(readings))
    return _report(clipped_loss(pred, data.targets, data.M))


@dataclass(frozen=True, eq=False)
class CandidateFamily:
    members: list[Scalar]
    contains_truth: bool = False

    def __post_init__(self):
        if not self.members:
            raise ConfigurationError("candidate family is empty")

    def __len__(self) -> int:
        return len(self.members)

    def check(self, M: float, L: float) -> None:
        for f in self.members:
            if f.lipschitz > L * (1 + 1e-12):
                raise ConfigurationError(f"family member {f.tag} has Lip > L")
            if f(np.zeros(1))[0] != 0.0:
                raise ConfigurationError(f"family member {f.tag} has F(0) != 0")

    def models(self, params: PicardParams, ell: int) -> list[PicardModel]:
        p = params.with_(ell=ell)
        return [PicardModel(p, f, SemigroupKind.exact()) for f in self.members]


def perturbed_family(
    truth: Nonlinearity,
    params: PicardParams,
    size: int,
    seed: int,
    eta: float = 0.05,
    extra: Sequence[Nonlinearity] = (),
) -> CandidateFamily:
    """Truth first, then ``extra`` catalog members, then random knot-table
    perturbations of rho_truth, all inside F_{M,L}."""
    M, L = params.M, params.L
    members: list[Scalar] = [truth, *extra]
    base = build_rho(truth, M, L, eta)
    rng = np.random.default_rng(np.random.SeedSequence([int(seed), 0xFA]))
    while len(members) < size:
        amp = rng.uniform(0.1, 0.6) * L
        bumps = amp * M * rng.uniform(-1, 1, size=4)
        freq = np.arange(1, 5)
        shape = np.sin(np.outer(base.knots / M * np.pi, freq)) @ (bumps / freq) / np.pi
        values = base.values + shape
        values[base.knots == 0.0] = 0.0
        slopes = np.diff(values) / np.diff(base.knots)
        peak = np.max(np.abs(slopes))
        if peak > L:
            values = values * (L / peak)
        members.append(PiecewiseLinear(base.knots, values, tag=f"perturbed{len(members)}"))
    return CandidateFamily(members[:size], contains_truth=True)


@dataclass(frozen=True)
class ErmResult:
    index: int
    member: Scalar
    report: RiskReport
    risks: list[float]


def erm(family: CandidateFamily, params: PicardParams, ell: int, data: Dataset) -> ErmResult:
    """Exhaustive argmin of the empirical risk over the abstract Picard class.

    Ties go to the lowest index.
    """
    reports = [empirical_risk(m, data) for m in family.models(params, ell)]
    risks = [r.empirical for r in reports]
    best = int(np.argmin(risks))
    return ErmResult(best, family.members[best], reports[best], risks)


def embed_fno(member: Scalar, params: PicardParams, ell: int, rank: int, eta: float) -> PicardModel:
    """Realize the abstract predictor b_{F,ell} as the Picard-type FNO Gamma_{N,ell,rho_F}."""
    if isinstance(member, PiecewiseLinear):
        rho = member
    else:
        rho = build_rho(member, params.M, params.L, eta)
    return PicardModel(params.with_(ell=ell, rank=rank), rho, SemigroupKind.truncated(rank))


@dataclass(frozen=True)
class RademacherEstimate:
    value: float
    std_error: float
    n_draws: int


def rademacher_mc(
    family: CandidateFamily, params: PicardParams, ell: int, data: Dataset, n_draws: int, seed: int
) -> RademacherEstimate:
    """E_sigma max_b (n sqrt(q))^{-1} sum_ij sigma_ij b(a_i, z_ij), by Monte Carlo.

    The family-mean prediction is subtracted first. It does not depend on b,
    so the expectation is unchanged, but the shared large component no
    longer inflates the Monte-Carlo variance.
    """
    if n_draws < 1:
        raise ConfigurationError("n_draws must be >= 1")
    preds = np.stack([predictions(m, data) for m in family.models(params, ell)])
    K = preds.shape[0]
    flat = preds.reshape(K, -1)
    flat = flat - flat.mean(axis=0)
    rng = np.random.default_rng(np.random.SeedSequence([int(seed), 0x4AD]))
    norm = data.n * math.sqrt(data.q)
    vals = np.empty(n_draws)
    chunk = 4096
    for lo in range(0, n_draws, chunk):
        hi = min(n_draws, lo + chunk)
        sigma = rng.integers(0, 2, size=(hi - lo, flat.shape[1])) * 2.0 - 1.0
        vals[lo:hi] = np.max(sigma @ flat.T, axis=1) / norm
    se = float(vals.std(ddof=1) / math.sqrt(n_draws)) if n_draws > 1 else float("nan")
    return RademacherEstimate(float(vals.mean()), se, n_draws)


def rademacher_bound(params: PicardParams, ell: int, n: int, C: float = 1.0) -> float:
    """C M sqrt(L T (1 - delta^ell) / ((1 - delta) n))."""
    p = params
    return C * p.M * math.sqrt(p.L * p.T * (1 - p.delta**ell) / ((1 - p.delta) * n))


@dataclass(frozen=True)
class BoundReport:
    imp_term: float
    truncation_term: float
    rademacher_term: float
    concentration_term: float
    total: float
    rho: float
    C: float = 1.0

    def to_dict(self) -> dict:
        return asdict(self)


def bound_rhs(
    params: PicardParams,
    ell: int,
    n: int,
    rho: float,
    eta: float,
    a_N: float,
    rademacher_value: float | None = None,
    C: float = 1.0,
) -> BoundReport:
    """Term-by-term right-hand side of the Picard-type FNO generalization bound.

    ``rademacher_value`` (a measured R-hat) replaces the closed-form
    ``M sqrt(LT(1-delta^ell)/((1-delta)n))`` when given; the term is then C*M*R-hat.
    """
    if not 0 < rho < 1:
        raise DomainError(f"confidence rho must lie in (0, 1), got {rho}")
    if n < 1:
        raise DomainError("n must be >= 1")
    p = params
    geo = (1 - p.delta**ell) / (1 - p.delta)
    imp = 4 * p.M * (geo * p.T * eta + a_N)
    trunc = p.M**2 * p.delta ** (2 * ell) / (1 - p.delta) ** 2
    r_hat = rademacher_bound(p, ell, n) if rademacher_value is None else rademacher_value
    rad = C * p.M * r_hat
    conc = C * p.M**2 * math.sqrt(math.log(1 / rho) / n)
    return BoundReport(imp, trunc, rad, conc, imp + trunc + rad + conc, rho, C)


@dataclass(frozen=True)
class DepthSensorPlan:
    ell: int
    m: int
    ell_clamped: bool
    m_clamped: bool

    def __iter__(self):
        return iter((self.ell, self.m))


def plan_budget(params: PicardParams, n: int, beta: float, alpha: float = 0.0) -> DepthSensorPlan:
    """ell_n = ceil(log n / (4 |log delta|)), m_n = round(n^{1/(2(2 beta + alpha))})."""
    if not 0 < params.delta < 1:
        raise DomainError("delta must lie in (0, 1)")
    if not beta > 0 or alpha < 0:
        raise DomainError("need beta > 0 and alpha >= 0")
    if n < 1:
        raise DomainError("n must be >= 1")
    ell = math.ceil(math.log(n) / (4 * abs(math.log(params.delta))))
    m = round(n ** (1.0 / (2 * (2 * beta + alpha))))
    return DepthSensorPlan(max(ell, 1), max(m, 2), ell < 1, m < 2)


def default_beta(s0: float, dim: int) -> float:
    return (s0 - dim / 2.0) / dim


def population_risk(
    predictor: Predictor, truth: PicardModel, law: InitialLaw, spec: GridSpec,
    n_test: int, start: int, ref_tol: float = 1e-10,
) -> float:
    """Held-out estimate of L[Gamma]: mean over n_test fresh draws and all
    space-time grid points (the full query law)."""
    u0 = sample_initial_values(law, spec, n_test, start=start)
    ref, _ = solve_fixed_point_values(truth, u0, spec, ref_tol)
    pred = predictor.predict_values(u0, spec)
    return float(np.mean(clipped_loss(pred, ref, truth.params.M)))
