"""
Verification scenarios run by the ``picard-op`` command.

Each scenario turns an ``ExperimentConfig`` into CSV tables, a dict of named
pass/fail checks and a dict of scalar metrics. Scenario-specific knobs live
in the config's ``[run]`` section; FORMATS.md lists them with the columns.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from .config import ExperimentConfig
from .data import InitialLaw, SensorSet, reconstruction_error, sample_initial, sample_initial_values
from .errors import ConfigurationError, HorizonExceededError
from .nonlinearity import catalog_at_lipschitz
from .picard import (
    PicardModel,
    implementation_error,
    iterate_values,
    picard_step_values,
    solve_fixed_point_values,
    truncation_bound,
)
from .risk import (
    bound_rhs,
    default_beta,
    embed_fno,
    erm,
    make_dataset,
    perturbed_family,
    plan_budget,
    population_risk,
    rademacher_bound,
    rademacher_mc,
)
from .rollout import CSV_COLUMNS as ROLLOUT_COLUMNS
from .rollout import (
    generic_factor,
    rollout,
    stability_envelope,
    terminal_contraction,
)
from .semigroup import SemigroupKind
from .serialize import SCHEMA_VERSION, csv_text, dumps_json, write_text

Table = tuple[tuple[str, ...], list[tuple]]

# Held-out draws use law indices far away from the training indices.
HELDOUT_START = 1_000_000


@dataclass
class ScenarioResult:
    scenario: str
    tables: dict[str, Table] = field(default_factory=dict)
    checks: dict[str, bool] = field(default_factory=dict)
    metrics: dict[str, object] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(self.checks.values())

    def summary(self, seeds: list[int]) -> dict:
        return {
            "schema": SCHEMA_VERSION,
            "scenario": self.scenario,
            "passed": self.passed,
            "seeds": list(seeds),
            "checks": dict(self.checks),
            "metrics": dict(self.metrics),
            "tables": sorted(self.tables),
        }

    def write(self, out_dir: Path, seeds: list[int]) -> list[Path]:
        root = Path(out_dir) / self.scenario
        written = []
        for name, (cols, rows) in sorted(self.tables.items()):
            path = root / name
            write_text(path, csv_text(cols, rows))
            written.append(path)
        path = root / "summary.json"
        write_text(path, dumps_json(self.summary(seeds)))
        written.append(path)
        return written


def seeded_law(law: InitialLaw, seed: int) -> InitialLaw:
    """The config law with its stream re-keyed by the run seed."""
    mixed = int(np.random.SeedSequence([law.seed, int(seed)]).generate_state(1)[0])
    return dataclasses.replace(law, seed=mixed)


def _require_law(cfg: ExperimentConfig) -> InitialLaw:
    if cfg.law is None:
        raise ConfigurationError(f"scenario {cfg.scenario} needs a [law] section")
    return cfg.law


def truncation_decay(cfg: ExperimentConfig) -> ScenarioResult:
    p, spec = cfg.params, cfg.grid
    depth = cfg.opt("depth_max", 10, int)
    samples = cfg.opt("samples", 1, int)
    ref_tol = cfg.opt("ref_tol", 1e-15)
    ratio_max = cfg.opt("ratio_max", 0.30)
    floor = cfg.opt("noise_floor", 1e-13)
    truth = PicardModel(p, cfg.truth_nonlinearity())
    res = ScenarioResult("truncation-decay")
    bound_ok, ratio_ok, worst_ratio = True, True, 0.0
    cols = ("ell", "measured_error", "bound", "ratio")
    for seed in cfg.seeds:
        u0 = sample_initial_values(seeded_law(_require_law(cfg), seed), spec, samples)
        ref, _ = solve_fixed_point_values(truth, u0, spec, ref_tol)
        rows, prev = [], None
        for ell in range(1, depth + 1):
            err = float(np.max(np.abs(iterate_values(truth, u0, spec, ell) - ref)))
            bound = truncation_bound(p.M, p.delta, ell)
            ratio = err / prev if prev else float("nan")
            bound_ok &= err <= bound
            if prev is not None and prev > floor:
                ratio_ok &= ratio <= ratio_max
                worst_ratio = max(worst_ratio, ratio)
            rows.append((ell, err, bound, ratio))
            prev = err
        res.tables[f"seed_{seed}/truncation.csv"] = (cols, rows)
    res.checks = {"measured_le_bound": bool(bound_ok), "ratio_le_max": bool(ratio_ok)}
    res.metrics = {"worst_ratio": worst_ratio, "ratio_max": ratio_max}
    return res


def _audit_pairs(rng: np.random.Generator, spec, M: float, count: int):
    """Half rough (i.i.d. uniform), half smooth (random low modes) trajectories in U_M."""
    shape = (count, spec.time_nodes) + spec.shape

    def smooth():
        x = spec.mesh()
        t = np.linspace(0.0, 1.0, spec.time_nodes).reshape((1, -1) + (1,) * spec.dim)
        out = np.zeros(shape)
        for _ in range(3):
            k = rng.integers(-3, 4, size=(count, spec.dim))
            phase = rng.uniform(0, 2 * np.pi, size=count)
            amp = rng.uniform(-1, 1, size=count)
            arg = sum(k[:, r].reshape((-1,) + (1,) * (spec.dim + 1)) * x[r] for r in range(spec.dim))
            out += amp.reshape((-1,) + (1,) * (spec.dim + 1)) * np.cos(
                arg + phase.reshape((-1,) + (1,) * (spec.dim + 1)) + t
            )
        peak = np.max(np.abs(out.reshape(count, -1)), axis=1).reshape((-1,) + (1,) * (spec.dim + 1))
        return M * out / np.where(peak > 0, peak, 1.0)

    rough = rng.uniform(-M, M, size=shape)
    mix = rng.random(count) < 0.5
    return np.where(mix.reshape((-1,) + (1,) * (spec.dim + 1)), rough, smooth())


def contraction_audit(cfg: ExperimentConfig) -> ScenarioResult:
    p, spec = cfg.params, cfg.grid
    pairs = cfg.opt("pairs", 200, int)
    members = cfg.family_members() or catalog_at_lipschitz(p.M, p.L)
    kinds = [SemigroupKind.exact(), SemigroupKind.truncated(p.rank)]
    res = ScenarioResult("contraction-audit")
    cols = ("nonlinearity", "semigroup", "pairs", "max_ratio", "bound")
    worst, ok = 0.0, True
    for seed in cfg.seeds:
        rng = np.random.default_rng(np.random.SeedSequence([int(seed), 0xC0]))
        u0 = sample_initial_values(seeded_law(_require_law(cfg), seed), spec, pairs) \
            if cfg.law is not None else np.zeros((pairs,) + spec.shape)
        u = _audit_pairs(rng, spec, p.M, pairs)
        v = _audit_pairs(rng, spec, p.M, pairs)
        axes = tuple(range(1, u.ndim))
        den = np.max(np.abs(u - v), axis=axes)
        rows = []
        for F in members:
            for kind in kinds:
                model = PicardModel(p, F, kind)
                diff = picard_step_values(model, u0, u, spec) - picard_step_values(model, u0, v, spec)
                ratio = float(np.max(np.max(np.abs(diff), axis=axes) / den))
                worst = max(worst, ratio)
                ok &= ratio <= p.delta + 1e-6
                rows.append((F.describe(), str(kind), pairs, ratio, p.delta))
        res.tables[f"seed_{seed}/contraction.csv"] = (cols, rows)
    res.checks = {"ratio_le_delta": bool(ok)}
    res.metrics = {"worst_ratio": worst, "delta": p.delta}
    return res


def implementation_error_scenario(cfg: ExperimentConfig) -> ScenarioResult:
    p, spec = cfg.params, cfg.grid
    ranks = [int(r) for r in cfg.opt("ranks", [4, 8, 16, 32], list)]
    eta = cfg.opt("eta", 0.01)
    test_size = cfg.opt("test_size", 16, int)
    F = cfg.truth_nonlinearity()
    exact = PicardModel(p, F)
    rho_bound = (1 - p.delta**p.ell) / (1 - p.delta) * p.T * eta
    res = ScenarioResult("implementation-error")
    cols = ("rank", "total_error", "rho_term", "fourier_term", "rho_bound")
    monotone = last_ok = rho_ok = True
    for seed in cfg.seeds:
        tests = sample_initial(seeded_law(_require_law(cfg), seed), spec, test_size)
        rows, totals = [], []
        for N in ranks:
            e = implementation_error(exact, embed_fno(F, p, p.ell, N, eta), tests, decompose=True)
            rows.append((N, e.total, e.rho_term, e.fourier_term, rho_bound))
            totals.append(e.total)
            rho_ok &= e.rho_term <= rho_bound
        monotone &= all(b <= a * (1 + 1e-12) for a, b in zip(totals, totals[1:]))
        last_ok &= totals[-1] <= 2 * rho_bound
        res.tables[f"seed_{seed}/implementation.csv"] = (cols, rows)
    res.checks = {
        "envelope_non_increasing": bool(monotone),
        "largest_rank_le_twice_rho_bound": bool(last_ok),
        "rho_term_le_rho_bound": bool(rho_ok),
    }
    res.metrics = {"rho_bound": rho_bound, "eta": eta, "ell": p.ell}
    return res


def reconstruction_rate(cfg: ExperimentConfig) -> ScenarioResult:
    spec = cfg.grid
    law = _require_law(cfg)
    sensors = [int(m) for m in cfg.opt("sensors", [8, 16, 32, 64, 128], list)]
    n_mc = cfg.opt("n_mc", 200, int)
    beta = cfg.opt("beta", default_beta(law.s0, spec.dim))
    tol = cfg.opt("slope_tolerance", 0.5)
    res = ScenarioResult("reconstruction-rate")
    cols = ("m", "eps_rec_sq")
    slopes, ok = [], True
    for seed in cfg.seeds:
        law_s = seeded_law(law, seed)
        rows = []
        for m in sensors:
            rows.append((m, reconstruction_error(law_s, SensorSet.equispaced(spec, m), n_mc)))
        slope = float(np.polyfit(np.log([r[0] for r in rows]), np.log([r[1] for r in rows]), 1)[0])
        slopes.append(slope)
        ok &= abs(slope + 2 * beta) <= tol
        res.tables[f"seed_{seed}/reconstruction.csv"] = (cols, rows)
    res.checks = {"slope_within_tolerance": bool(ok)}
    res.metrics = {"slopes": slopes, "expected_slope": -2 * beta, "beta": beta}
    return res


def erm_generalization(cfg: ExperimentConfig) -> ScenarioResult:
    p, spec = cfg.params, cfg.grid
    law = _require_law(cfg)
    n = cfg.opt("n", 128, int)
    q = cfg.opt("q", 4, int)
    size = cfg.opt("family_size", 16, int)
    eta = cfg.opt("eta", 0.01)
    rho = cfg.opt("rho", 0.1)
    C = cfg.opt("C", 1.0)
    n_test = cfg.opt("n_test", 64, int)
    a_n_test = cfg.opt("a_n_test", 8, int)
    ref_tol = cfg.opt("ref_tol", 1e-10)
    min_freq = cfg.opt("min_frequency", 0.85)
    beta = cfg.opt("beta", default_beta(law.s0, spec.dim))
    ell = cfg.opt("ell", plan_budget(p, n, beta).ell, int)
    truth_F = cfg.truth_nonlinearity()
    truth = PicardModel(p, truth_F)
    extra = cfg.family_members()

    res = ScenarioResult("erm-generalization")
    cols = ("seed", "selected", "empirical_risk", "heldout_risk", "a_N", "imp_term",
            "truncation_term", "rademacher_term", "concentration_term", "bound_total", "holds")
    rows, holds, c_min = [], 0, 0.0
    for seed in cfg.seeds:
        law_s = seeded_law(law, seed)
        family = perturbed_family(truth_F, p, size, seed, extra=extra)
        data = make_dataset(law_s, truth, spec, n, q, seed, ref_tol)
        best = erm(family, p, ell, data)
        fno = embed_fno(best.member, p, ell, p.rank, eta)
        tests = sample_initial(law_s, spec, a_n_test, start=HELDOUT_START)
        mid = PicardModel(p.with_(ell=ell), fno.nonlinearity)
        a_N = implementation_error(mid, fno, tests, decompose=True).fourier_term
        heldout = population_risk(fno, truth, law_s, spec, n_test, HELDOUT_START, ref_tol)
        b = bound_rhs(p, ell, n, rho, eta, a_N, C=C)
        ok = heldout <= b.total
        holds += ok
        unit = (b.rademacher_term + b.concentration_term) / C
        c_min = max(c_min, (heldout - b.imp_term - b.truncation_term) / unit)
        rows.append((seed, best.index, best.report.empirical, heldout, a_N, b.imp_term,
                     b.truncation_term, b.rademacher_term, b.concentration_term, b.total, ok))
    res.tables["erm.csv"] = (cols, rows)

    rad_ns = [int(x) for x in cfg.opt("rademacher_ns", [32, 128, 512], list)]
    n_draws = cfg.opt("n_draws", 2000, int)
    seed0 = cfg.seeds[0]
    family = perturbed_family(truth_F, p, size, seed0, extra=extra)
    rad_rows = []
    for m in rad_ns:
        data = make_dataset(seeded_law(law, seed0), truth, spec, m, q, seed0, ref_tol)
        est = rademacher_mc(family, p, ell, data, n_draws, seed0)
        rad_rows.append((m, est.value, est.std_error, est.value * math.sqrt(m),
                         rademacher_bound(p, ell, m)))
    res.tables["rademacher.csv"] = (("n", "rademacher", "std_error", "scaled", "lemma_bound"), rad_rows)
    scaled = np.array([r[3] for r in rad_rows])
    spread = float(np.max(np.abs(scaled / scaled.mean() - 1.0)))

    freq = holds / len(cfg.seeds)
    res.checks = {"bound_frequency": freq >= min_freq, "rademacher_sqrt_n_stable": spread <= 0.30}
    res.metrics = {"frequency": freq, "min_frequency": min_freq, "ell": ell,
                   "c_min": max(c_min, 0.0), "rademacher_spread": spread}
    return res


def depth_sensor_plan(cfg: ExperimentConfig) -> ScenarioResult:
    p = cfg.params
    ns = [int(x) for x in cfg.opt("ns", [16, 64, 256, 1024, 4096, 16384], list)]
    s0 = cfg.law.s0 if cfg.law is not None else 2.0
    beta = cfg.opt("beta", default_beta(s0, cfg.grid.dim))
    alpha = cfg.opt("alpha", 0.0)
    res = ScenarioResult("depth-sensor-plan")
    cols = ("n", "ell_n", "m_n", "ell_clamped", "m_clamped", "truncation_term", "target")
    rows, ok = [], True
    for n in ns:
        plan = plan_budget(p, n, beta, alpha)
        trunc = p.M**2 * p.delta ** (2 * plan.ell) / (1 - p.delta) ** 2
        target = p.M**2 / (1 - p.delta) ** 2 / math.sqrt(n)
        ok &= trunc <= target * (1 + 1e-12)
        rows.append((n, plan.ell, plan.m, plan.ell_clamped, plan.m_clamped, trunc, target))
    res.tables["plan.csv"] = (cols, rows)
    res.checks = {"truncation_le_n_to_minus_half": bool(ok)}
    res.metrics = {"beta": beta, "alpha": alpha}
    return res


def _dissipation(cfg: ExperimentConfig) -> float | None:
    if "dissipation" in cfg.run:
        return cfg.opt("dissipation", None)
    if cfg.truth is not None and cfg.truth.name == "defocusing":
        spec = cfg.truth.params
        return spec.get("alpha", 1.0) * abs(spec.get("scale", 1.0))
    return None


def rollout_propagation(cfg: ExperimentConfig) -> ScenarioResult:
    p, spec = cfg.params, cfg.grid
    kappa = cfg.opt("kappa", 8, int)
    eta = cfg.opt("eta", 0.01)
    ref_tol = cfg.opt("ref_tol", 1e-10)
    n_pairs = cfg.opt("pairs", 10, int)
    lam = _dissipation(cfg)
    F = cfg.truth_nonlinearity()
    truth = PicardModel(p, F)
    approx = embed_fno(F, p, p.ell, p.rank, eta)
    amp = p.c_s / (1 - p.delta)
    res = ScenarioResult("rollout-propagation")
    gen_ok = dis_ok = rec_ok = q_ok = True
    horizon_errors = clips = 0
    qs = []
    for seed in cfg.seeds:
        law_s = seeded_law(_require_law(cfg), seed)
        u0 = sample_initial(law_s, spec, 1)[0]
        try:
            tr = rollout(u0, truth, approx, kappa, ref_tol)
        except HorizonExceededError:
            horizon_errors += 1
            continue
        clips += sum(tr.clip_events)
        gen = stability_envelope(p, kappa, tr.eps_loc, "generic")
        gen_ok &= all(r <= g for r, g in zip(tr.block_risks, gen))
        if lam is not None:
            dis = stability_envelope(p, kappa, tr.eps_loc, "dissipative", lam)
            dis_ok &= all(r <= g for r, g in zip(tr.block_risks, dis))
        e = tr.block_errors
        rec_ok &= all(e[j + 1] <= tr.eps_loc + amp * e[j] + 1e-6 for j in range(kappa))
        res.tables[f"seed_{seed}/trace.csv"] = (ROLLOUT_COLUMNS, _trace_rows(tr, gen, p, lam))
        if lam is not None:
            us = sample_initial(law_s, spec, 2 * n_pairs, start=HELDOUT_START)
            q = terminal_contraction(truth, list(zip(us[:n_pairs], us[n_pairs:])), ref_tol)
            qs.append(q)
            q_ok &= q <= math.exp(-lam * p.T) + 0.02
    res.checks = {
        "block_risk_le_generic_envelope": bool(gen_ok),
        "error_recursion": bool(rec_ok),
        "no_horizon_exceeded": horizon_errors == 0,
        "no_clip_events": clips == 0,
    }
    if lam is not None:
        res.checks["block_risk_le_dissipative_envelope"] = bool(dis_ok)
        res.checks["measured_q_le_exp_bound"] = bool(q_ok)
    res.metrics = {
        "kappa": kappa,
        "dissipation": lam,
        "measured_q": max(qs) if qs else None,
        "q_bound": math.exp(-lam * p.T) if lam is not None else None,
        "generic_factor_last": generic_factor(p, kappa - 1),
        "horizon_errors": horizon_errors,
        "clip_events": clips,
    }
    return res


def _trace_rows(tr, gen, p, lam):
    if lam is None:
        dis = [float("nan")] * tr.kappa
    else:
        dis = stability_envelope(p, tr.kappa, tr.eps_loc, "dissipative", lam)
    return [(j, tr.block_errors[j], tr.block_risks[j], gen[j], dis[j], tr.clip_events[j])
            for j in range(tr.kappa)]


SCENARIOS: dict[str, Callable[[ExperimentConfig], ScenarioResult]] = {
    "truncation-decay": truncation_decay,
    "contraction-audit": contraction_audit,
    "implementation-error": implementation_error_scenario,
    "reconstruction-rate": reconstruction_rate,
    "erm-generalization": erm_generalization,
    "depth-sensor-plan": depth_sensor_plan,
    "rollout-propagation": rollout_propagation,
}


def run_scenario(cfg: ExperimentConfig) -> ScenarioResult:
    try:
        fn = SCENARIOS[cfg.scenario]
    except KeyError:
        raise ConfigurationError(
            f"unknown scenario {cfg.scenario!r}; valid: {', '.join(SCENARIOS)}"
        ) from None
    return fn(cfg)
