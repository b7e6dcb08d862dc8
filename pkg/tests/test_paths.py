import math

import pytest

from rare_reach import streams
from rare_reach.cumulant import (
    CumulantProfile,
    NormalLaw,
    TwoPointLaw,
    brownian,
    tilt,
)
from rare_reach.errors import BudgetCapExceeded, DomainError, EventCapExceeded
from rare_reach.oracle import (
    brownian_exit_up,
    brownian_passage_cdf,
    exact_walk_exit,
    exact_walk_passage,
)
from rare_reach.paths import (
    LOWER,
    UPPER,
    SimConfig,
    passage_weight,
    simulate_exit,
    simulate_levy_passage,
    simulate_walk_passage,
)


def _binomial_3sigma(p: float, n: int) -> float:
    return 3.0 * math.sqrt(max(p * (1.0 - p), 1e-12) / n)


class TestWalkPassage:
    def test_single_step_frequency(self, walk45):
        n = 20_000
        hits = sum(
            simulate_walk_passage(walk45, 1.0, 1, streams.stream(7, "one", r)).hit
            for r in range(n)
        )
        assert abs(hits / n - 0.45) <= _binomial_3sigma(0.45, n)

    def test_single_step_outcome_fields(self, walk45):
        for r in range(50):
            out = simulate_walk_passage(walk45, 1.0, 1, streams.stream(8, "f", r))
            if out.hit:
                assert out.time == 1
                assert out.terminal_position == 1.0
                assert out.overshoot == 0.0
            else:
                assert out.time == 1
                assert out.terminal_position == -1.0

    def test_three_steps_exact(self, walk45):
        n = 30_000
        hits = sum(
            simulate_walk_passage(walk45, 3.0, 3, streams.stream(9, "three", r)).hit
            for r in range(n)
        )
        p = 0.45**3
        assert abs(hits / n - p) <= _binomial_3sigma(p, n)

    def test_budget_zero_and_timeout_semantics(self, walk45):
        out = simulate_walk_passage(walk45, 5.0, 0, streams.stream(1, "z", 0))
        assert not out.hit and out.time == 0
        out = simulate_walk_passage(walk45, 50.0, 10, streams.stream(1, "z", 1))
        assert not out.hit and out.time == 10

    def test_barrier_must_be_positive(self, walk45):
        with pytest.raises(DomainError):
            simulate_walk_passage(walk45, 0.0, 5, streams.stream(1, "e", 0))

    def test_normal_walk_overshoot_nonnegative(self):
        law = NormalLaw(-0.1, 1.0)
        seen_hit = False
        for r in range(200):
            out = simulate_walk_passage(law, 2.0, 400, streams.stream(2, "n", r))
            if out.hit:
                seen_hit = True
                assert out.overshoot >= 0.0
                assert out.terminal_position >= 2.0
        assert seen_hit

    def test_tilted_frequency_matches_dp_oracle(self, walk45):
        # lattice identity: P(tau<=t) = e^{-lam* x} P_tilted(tau<=t)
        x, t, reps = 10, 200, 4000
        prof = CumulantProfile.from_model(walk45)
        tilted = tilt(walk45, prof.lambda_star)
        hits = sum(
            simulate_walk_passage(tilted, float(x), t, streams.stream(3, "dp", r)).hit
            for r in range(reps)
        )
        p_tilted_exact = exact_walk_passage(tilted, x, t).prob()
        assert abs(hits / reps - p_tilted_exact) <= _binomial_3sigma(
            p_tilted_exact, reps
        )


class TestPassageWeight:
    def test_no_tilt_weight_is_one(self, walk45):
        out = simulate_walk_passage(walk45, 2.0, 50, streams.stream(4, "w", 0))
        assert passage_weight(walk45, out, 0.0) == 1.0

    def test_lattice_weight_is_deterministic(self, walk45):
        prof = CumulantProfile.from_model(walk45)
        lam = prof.lambda_star
        tilted = tilt(walk45, lam)
        weights = []
        for r in range(300):
            out = simulate_walk_passage(tilted, 6.0, 500, streams.stream(5, "w", r))
            if out.hit:
                weights.append(passage_weight(walk45, out, lam))
        assert len(weights) > 100
        target = math.exp(-lam * 6.0)
        assert max(weights) / min(weights) - 1.0 <= 1e-8
        assert weights[0] == pytest.approx(target, rel=1e-9)

    def test_martingale_upper_bound_pointwise(self, walk45, levy_example, cfg):
        # overshoot >= 0 makes every weight <= e^{-lam* x}, so any reweighted
        # estimate respects the bound deterministically
        for model in (walk45, levy_example):
            prof = CumulantProfile.from_model(model)
            lam = prof.lambda_star
            tilted = tilt(model, lam)
            bound = math.exp(-lam * 4.0)
            for r in range(200):
                rng = streams.stream(6, "mb", r)
                if isinstance(model, TwoPointLaw):
                    out = simulate_walk_passage(tilted, 4.0, 400, rng)
                else:
                    out = simulate_levy_passage(tilted, 4.0, 40.0, cfg, rng)
                if out.hit:
                    assert passage_weight(model, out, lam) <= bound * (1.0 + 1e-9)


class TestLevyPassage:
    def test_budget_zero(self, levy_example, cfg):
        out = simulate_levy_passage(levy_example, 5.0, 0.0, cfg, streams.stream(1, "l", 0))
        assert not out.hit and out.time == 0.0

    def test_event_cap(self, levy_example):
        tiny = SimConfig(dt=0.001, max_events=50)
        with pytest.raises(EventCapExceeded):
            simulate_levy_passage(
                levy_example, 50.0, 1e6, tiny, streams.stream(1, "cap", 0)
            )

    def test_brownian_passage_matches_closed_form(self):
        # bridge correction makes the hit decision exact in law at any dt
        mu, x, budget, reps = 0.2, 10.0, 400.0, 10_000
        model = brownian(mu)
        coarse = SimConfig(dt=0.1)
        hits = 0
        for r in range(reps):
            out = simulate_levy_passage(
                model, x, budget, coarse, streams.stream(11, "bm", r)
            )
            hits += out.hit
            if out.hit:
                assert out.overshoot <= 1e-9  # continuous paths touch the barrier
        exact = brownian_passage_cdf(mu, x, budget)
        assert exact == pytest.approx(math.exp(-4.0), rel=2e-3)  # near-saturated
        assert abs(hits / reps - exact) <= _binomial_3sigma(exact, reps)

    def test_tilted_levy_hits_fast(self, levy_example, cfg):
        tilted = tilt(levy_example, 2.0)
        out = simulate_levy_passage(tilted, 10.0, 100.0, cfg, streams.stream(12, "t", 0))
        assert out.hit
        assert out.time < 50.0

    def test_dt_halving_within_monte_carlo_noise(self, levy_example):
        tilted = tilt(levy_example, 2.0)
        x, budget, reps = 6.0, 2.6, 2200
        freqs = []
        for dt in (0.02, 0.01):
            c = SimConfig(dt=dt)
            hits = sum(
                simulate_levy_passage(
                    tilted, x, budget, c, streams.stream(13, "dt", repr(dt), r)
                ).hit
                for r in range(reps)
            )
            freqs.append(hits / reps)
        p = 0.5 * (freqs[0] + freqs[1])
        accept = 3.0 * math.sqrt(2.0 * p * (1.0 - p) / reps)
        assert abs(freqs[0] - freqs[1]) <= accept


class TestExit:
    def test_walk_exit_matches_gambler(self, walk45, cfg):
        reps = 5000
        upper = 0
        for r in range(reps):
            out = simulate_exit(walk45, 1.0, 3.0, cfg, streams.stream(14, "g", r))
            upper += out.side == UPPER
            assert out.time >= 1
        q_exact, _ = exact_walk_exit(walk45, 1, 3)
        assert abs(upper / reps - q_exact) <= _binomial_3sigma(q_exact, reps)

    def test_brownian_exit_matches_scale_function(self, cfg_fast):
        model = brownian(0.2)
        reps = 3000
        upper = 0
        for r in range(reps):
            out = simulate_exit(model, 5.0, 10.0, cfg_fast, streams.stream(15, "b", r))
            upper += out.side == UPPER
        q_exact = brownian_exit_up(0.2, 5.0, 10.0)
        assert abs(upper / reps - q_exact) <= _binomial_3sigma(q_exact, reps)

    def test_exit_sides_and_positions(self, walk45, cfg):
        for r in range(200):
            out = simulate_exit(walk45, 2.0, 4.0, cfg, streams.stream(16, "s", r))
            if out.side == UPPER:
                assert out.terminal_position >= 4.0
            else:
                assert out.side == LOWER
                assert out.terminal_position <= 0.0

    def test_near_barrier_start_mostly_exits_up(self, cfg_fast):
        model = brownian(0.2)
        reps = 400
        upper = sum(
            simulate_exit(model, 9.8, 10.0, cfg_fast, streams.stream(17, "n", r)).side
            == UPPER
            for r in range(reps)
        )
        assert upper / reps > 0.85

    def test_budget_cap(self, cfg):
        # strong positive drift away from both barriers is impossible; force
        # the cap instead with an absurdly small allowance
        model = brownian(0.01)
        with pytest.raises(BudgetCapExceeded):
            simulate_exit(
                model, 5.0, 10.0, cfg, streams.stream(18, "c", 0), budget_cap=10
            )

    def test_precondition(self, walk45, cfg):
        with pytest.raises(DomainError):
            simulate_exit(walk45, 0.0, 4.0, cfg, streams.stream(1, "p", 0))


class TestReproducibility:
    def test_same_stream_same_trajectory(self, walk45):
        a = simulate_walk_passage(walk45, 8.0, 500, streams.stream(42, "rep", 3))
        b = simulate_walk_passage(walk45, 8.0, 500, streams.stream(42, "rep", 3))
        assert a == b

    def test_budget_extension_preserves_prefix(self, walk45):
        # chunked draws are budget-independent, so a hit before the smaller
        # budget is bitwise identical under the larger one
        for r in range(100):
            small = simulate_walk_passage(walk45, 3.0, 2000, streams.stream(43, "p", r))
            large = simulate_walk_passage(walk45, 3.0, 4000, streams.stream(43, "p", r))
            if small.hit:
                assert small == large

    def test_levy_reproducible(self, levy_example, cfg):
        a = simulate_levy_passage(levy_example, 3.0, 5.0, cfg, streams.stream(44, "l", 1))
        b = simulate_levy_passage(levy_example, 3.0, 5.0, cfg, streams.stream(44, "l", 1))
        assert a == b

    def test_distinct_replications_differ(self, levy_example, cfg):
        outs = {
            simulate_levy_passage(
                levy_example, 3.0, 5.0, cfg, streams.stream(44, "l", r)
            ).terminal_position
            for r in range(8)
        }
        assert len(outs) > 1
