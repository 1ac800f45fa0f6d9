"""
Long-time prediction by rolling a time-T local model over successive blocks.

The exact ladder v_{j+1} = psi(G(v_j)) uses fresh fixed-point solves; the
approximate ladder vhat_{j+1} = P_R(psi(Gamma(vhat_j))) uses the frozen
local model plus pointwise clipping. Nothing is refit along the way.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import ConfigurationError, HorizonExceededError
from .picard import MEMBERSHIP_SLACK, PicardModel, PicardParams, solve_fixed_point_values
from .spectral import TorusField, TrajectoryField

CSV_COLUMNS = ("j", "e_j", "block_risk", "envelope_generic", "envelope_dissipative", "clip_count")


def terminal_trace(u: TrajectoryField) -> TorusField:
    """psi(u) = u(., T): the last time slice."""
    return u.slice(u.spec.time_nodes - 1)


def clip_state(f: TorusField, R: float) -> TorusField:
    return TorusField(f.spec, np.clip(f.values, -R, R))


@dataclass
class RolloutTrace:
    kappa: int
    exact_states: list[TorusField]
    approx_states: list[TorusField]
    block_errors: list[float]
    block_risks: list[float]
    clip_events: list[int]
    local_errors: list[float] = field(default_factory=list)
    """sup-norm local errors ||Gamma(v) - G(v)|| at every visited state."""

    @property
    def eps_loc(self) -> float:
        return max(self.local_errors) if self.local_errors else 0.0

    def to_csv(
        self, params: PicardParams, dissipation: Optional[float] = None
    ) -> str:
        gen = stability_envelope(params, self.kappa, self.eps_loc, "generic")
        if dissipation is None:
            dis = [float("nan")] * self.kappa
        else:
            dis = stability_envelope(params, self.kappa, self.eps_loc, "dissipative", dissipation)
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for j in range(self.kappa):
            w.writerow([j, _fmt(self.block_errors[j]), _fmt(self.block_risks[j]),
                        _fmt(gen[j]), _fmt(dis[j]), self.clip_events[j]])
        return buf.getvalue()


def _fmt(x: float) -> str:
    return format(float(x), ".12g")


def _exact_block(truth: PicardModel, v: TorusField, ref_tol: float) -> np.ndarray:
    values, _ = solve_fixed_point_values(truth, v.values, v.spec, ref_tol)
    return values


def rollout(
    u0: TorusField,
    truth: PicardModel,
    approx: PicardModel,
    kappa: int,
    ref_tol: float = 1e-10,
) -> RolloutTrace:
    """Run both ladders for ``kappa`` blocks and record per-block diagnostics."""
    if kappa < 1:
        raise ConfigurationError("kappa must be >= 1")
    if not truth.semigroup.is_exact:
        raise ConfigurationError("exact ladder needs the exact semigroup")
    R = truth.params.R
    spec = u0.spec
    exact = [u0]
    approx_states = [u0]
    errors = [0.0]
    risks: list[float] = []
    clips: list[int] = []
    local: list[float] = []
    for j in range(kappa):
        v, vh = exact[j], approx_states[j]
        sup = float(np.max(np.abs(v.values)))
        if sup > R + MEMBERSHIP_SLACK:
            raise HorizonExceededError(j, sup, R)
        g_exact = _exact_block(truth, v, ref_tol)
        g_hat = approx.predict_values(vh.values, spec)
        risks.append(float(np.mean((g_hat - g_exact) ** 2)))
        # local errors at both visited states of block j
        local.append(float(np.max(np.abs(approx.predict_values(v.values, spec) - g_exact))))
        local.append(float(np.max(np.abs(g_hat - _exact_block(truth, vh, ref_tol)))))
        nxt = TorusField(spec, g_exact[-1])
        raw = g_hat[-1]
        clips.append(int(np.count_nonzero(np.abs(raw) > R)))
        nxt_hat = TorusField(spec, np.clip(raw, -R, R))
        exact.append(nxt)
        approx_states.append(nxt_hat)
        errors.append(float(np.max(np.abs(nxt_hat.values - nxt.values))))
    sup = float(np.max(np.abs(exact[-1].values)))
    if sup > R + MEMBERSHIP_SLACK:
        raise HorizonExceededError(kappa, sup, R)
    # final states belong to the visited set as well
    for v in (exact[-1], approx_states[-1]):
        g = _exact_block(truth, v, ref_tol)
        local.append(float(np.max(np.abs(approx.predict_values(v.values, spec) - g))))
    return RolloutTrace(kappa, exact, approx_states, errors, risks, clips, local)


def generic_factor(params: PicardParams, j: int, l_psi: float = 1.0) -> float:
    """(sum_{r=0}^{j} (L_psi C_S / (1 - delta))^r)^2."""
    a = l_psi * params.c_s / (1.0 - params.delta)
    return sum(a**r for r in range(j + 1)) ** 2


def dissipative_factor(params: PicardParams, j: int, dissipation: float) -> float:
    """(1 + (1 - q^j)/(1 - q))^2 with q = exp(-lambda T)."""
    q = math.exp(-dissipation * params.T)
    return (1.0 + (1.0 - q**j) / (1.0 - q)) ** 2


def stability_envelope(
    params: PicardParams,
    kappa: int,
    eps_loc: float,
    mode: str = "generic",
    dissipation: Optional[float] = None,
) -> list[float]:
    """Per-block upper bounds on the block risk, j = 0..kappa-1."""
    if mode == "generic":
        return [generic_factor(params, j) * eps_loc**2 for j in range(kappa)]
    if mode == "dissipative":
        if dissipation is None or not dissipation > 0:
            raise ConfigurationError("dissipative mode needs lambda > 0")
        return [dissipative_factor(params, j, dissipation) * eps_loc**2 for j in range(kappa)]
    raise ConfigurationError(f"unknown envelope mode {mode!r}")


def dissipative_limit(params: PicardParams, dissipation: float) -> float:
    """j-uniform dissipative factor (1 + 1/(1 - e^{-lambda T}))^2."""
    return (1.0 + 1.0 / (1.0 - math.exp(-dissipation * params.T))) ** 2


def terminal_contraction(
    truth: PicardModel, pairs: list[tuple[TorusField, TorusField]], ref_tol: float = 1e-10
) -> float:
    """Largest measured ratio ||Phi(u0) - Phi(v0)|| / ||u0 - v0|| over ``pairs``."""
    worst = 0.0
    for a, b in pairs:
        ga = _exact_block(truth, a, ref_tol)[-1]
        gb = _exact_block(truth, b, ref_tol)[-1]
        den = float(np.max(np.abs(a.values - b.values)))
        if den > 0:
            worst = max(worst, float(np.max(np.abs(ga - gb))) / den)
    return worst
