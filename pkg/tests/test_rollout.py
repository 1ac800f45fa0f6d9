import math

import numpy as np
import pytest

from picardop.data import InitialLaw, sample_initial
from picardop.errors import ConfigurationError, HorizonExceededError
from picardop.nonlinearity import catalog
from picardop.picard import PicardModel, PicardParams
from picardop.risk import embed_fno
from picardop.rollout import (
    CSV_COLUMNS,
    clip_state,
    dissipative_factor,
    dissipative_limit,
    generic_factor,
    rollout,
    stability_envelope,
    terminal_contraction,
    terminal_trace,
)
from picardop.spectral import GridSpec, TorusField, TrajectoryField, sup_norm

P = PicardParams(R=0.5, M=1.0, L=1.0, T=0.5, delta=0.5, ell=6, rank=16)
SPEC = GridSpec(1, 64, 33)
LAW = InitialLaw(2, 0.1, 8, 2, 0.3, seed=3, sup_bound=0.5)
DEFOC = catalog("defocusing", 1.0, 1.0, alpha=0.5, beta=0.1, p=3)


class TestTerminalTrace:
    def test_constant(self):
        traj = TrajectoryField(SPEC, np.full((33, 64), 0.2), 0.5)
        np.testing.assert_array_equal(terminal_trace(traj).values, 0.2)

    def test_heat_flow_of_cosine(self):
        u0 = TorusField(SPEC, 0.4 * np.cos(SPEC.coordinates()))
        traj = PicardModel(P, catalog("zero", 1.0)).predict(u0)
        np.testing.assert_allclose(terminal_trace(traj).values, math.exp(-0.5) * u0.values, atol=1e-15)

    def test_zero(self):
        assert sup_norm(terminal_trace(TrajectoryField.zeros(SPEC, 0.5))) == 0


class TestClip:
    def test_inside_unchanged(self):
        f = TorusField(SPEC, 0.3 * np.sin(SPEC.coordinates()))
        np.testing.assert_array_equal(clip_state(f, 0.5).values, f.values)

    def test_constant_above(self):
        np.testing.assert_array_equal(clip_state(TorusField.constant(SPEC, 1.0), 0.5).values, 0.5)

    def test_plateaus(self):
        R = 0.5
        c = np.cos(SPEC.coordinates())
        out = clip_state(TorusField(SPEC, 1.5 * R * c), R).values
        plateau = np.abs(c) > 2 / 3
        np.testing.assert_array_equal(out[plateau], R * np.sign(c[plateau]))
        np.testing.assert_allclose(out[~plateau], 1.5 * R * c[~plateau])

    def test_nonexpansive(self, rng):
        for _ in range(100):
            f, g = (TorusField(SPEC, rng.uniform(-2, 2, 64)) for _ in range(2))
            assert sup_norm(clip_state(f, 0.5) - clip_state(g, 0.5)) <= sup_norm(f - g)


class TestEnvelope:
    def test_first_block(self):
        assert stability_envelope(P, 3, 0.1)[0] == pytest.approx(0.01)

    def test_geometric_sum(self):
        assert generic_factor(P, 2) == 49.0

    def test_dissipative_uniform(self):
        limit = dissipative_limit(P, 1.0)
        assert limit == pytest.approx((1 + 1 / (1 - math.exp(-0.5))) ** 2)
        assert limit == pytest.approx(12.54218033664316, abs=1e-12)
        assert all(dissipative_factor(P, j, 1.0) <= limit for j in range(100))
        assert dissipative_factor(P, 0, 1.0) == 1.0

    def test_modes(self):
        with pytest.raises(ConfigurationError):
            stability_envelope(P, 3, 0.1, "dissipative")
        with pytest.raises(ConfigurationError):
            stability_envelope(P, 3, 0.1, "spectral")


@pytest.fixture(scope="module")
def defocusing_trace():
    u0 = sample_initial(LAW, SPEC, 1)[0]
    return rollout(u0, PicardModel(P, DEFOC), embed_fno(DEFOC, P, 6, 16, 0.01), 8)


class TestRollout:
    def test_initial_states(self, defocusing_trace):
        tr = defocusing_trace
        np.testing.assert_array_equal(tr.exact_states[0].values, tr.approx_states[0].values)
        assert tr.block_errors[0] == 0
        assert len(tr.exact_states) == len(tr.approx_states) == 9

    def test_states_admissible(self, defocusing_trace):
        for s in defocusing_trace.exact_states + defocusing_trace.approx_states:
            assert sup_norm(s) <= P.R + 1e-8

    def test_error_recursion(self, defocusing_trace):
        tr = defocusing_trace
        amp = P.c_s / (1 - P.delta)
        for j in range(tr.kappa):
            assert tr.block_errors[j + 1] <= tr.eps_loc + amp * tr.block_errors[j] + 1e-6

    def test_block_risks_under_envelopes(self, defocusing_trace):
        tr = defocusing_trace
        gen = stability_envelope(P, tr.kappa, tr.eps_loc)
        dis = stability_envelope(P, tr.kappa, tr.eps_loc, "dissipative", 0.5)
        assert all(r <= g for r, g in zip(tr.block_risks, gen))
        assert all(r <= g for r, g in zip(tr.block_risks, dis))
        assert sum(tr.clip_events) == 0

    def test_deterministic(self, defocusing_trace):
        u0 = sample_initial(LAW, SPEC, 1)[0]
        again = rollout(u0, PicardModel(P, DEFOC), embed_fno(DEFOC, P, 6, 16, 0.01), 8)
        assert again.block_errors == defocusing_trace.block_errors
        assert again.block_risks == defocusing_trace.block_risks

    def test_csv(self, defocusing_trace):
        text = defocusing_trace.to_csv(P, 0.5)
        lines = text.splitlines()
        assert lines[0] == ",".join(CSV_COLUMNS)
        assert len(lines) == 9

    def test_truth_as_approx(self):
        u0 = sample_initial(LAW, SPEC, 1)[0]
        truth = PicardModel(P, DEFOC)
        tr = rollout(u0, truth, truth.with_depth(40), 4, ref_tol=1e-12)
        assert max(tr.block_errors) <= 4 * 1e-10

    def test_heat_flow(self):
        u0 = sample_initial(LAW, SPEC, 1)[0]
        zero = PicardModel(P, catalog("zero", 1.0))
        tr = rollout(u0, zero, zero, 5)
        assert max(tr.block_errors) <= 1e-15

    def test_defocusing_long_horizon(self):
        u0 = sample_initial(LAW, SPEC, 1, start=4)[0]
        tr = rollout(u0, PicardModel(P, DEFOC), embed_fno(DEFOC, P, 6, 16, 0.01), 16)
        sups = [sup_norm(s) for s in tr.exact_states]
        assert all(b <= a + 1e-12 for a, b in zip(sups, sups[1:]))

    def test_horizon_exceeded(self):
        grow = PicardModel(P, catalog("linear", 1.0, 1.0, a=1.0))
        with pytest.raises(HorizonExceededError) as err:
            rollout(TorusField.constant(SPEC, 0.45), grow, grow, 3)
        assert err.value.block == 1

    def test_needs_blocks(self):
        truth = PicardModel(P, DEFOC)
        with pytest.raises(ConfigurationError):
            rollout(TorusField.zeros(SPEC), truth, truth, 0)


def test_terminal_contraction_linear_decay():
    truth = PicardModel(P, catalog("defocusing", 1.0, 1.0, alpha=1.0))
    us = sample_initial(LAW, SPEC, 20, start=100)
    q = terminal_contraction(truth, list(zip(us[:10], us[10:])))
    assert q <= math.exp(-0.5) + 0.02
