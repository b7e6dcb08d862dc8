import math
from fractions import Fraction

import pytest

from rare_reach.errors import DegenerateBudget, DomainError
from rare_reach.oracle import exact_walk_passage
from rare_reach.parallel import (
    ParallelSpec,
    estimate_ratio,
    min_passage_probability,
    sweep_phase_transition,
)
from rare_reach.paths import SimConfig


class TestMinPassage:
    def test_trivials(self):
        assert min_passage_probability(0.0, 7) == 0.0
        assert min_passage_probability(1.0, 3) == 1.0
        assert min_passage_probability(0.5, 2) == pytest.approx(0.75, abs=1e-15)

    def test_small_probability_expansion(self):
        # exact complement identity, frozen through rational arithmetic
        exact = 1 - (1 - Fraction(1, 10_000)) ** 10
        assert min_passage_probability(1e-4, 10) == pytest.approx(
            float(exact), rel=1e-12
        )
        assert min_passage_probability(1e-4, 10) == pytest.approx(9.9955e-4, rel=1e-4)

    def test_monotone_in_n(self):
        values = [min_passage_probability(0.01, n) for n in range(1, 60)]
        assert all(b > a for a, b in zip(values, values[1:]))

    def test_input_validation(self):
        with pytest.raises(DomainError):
            min_passage_probability(1.2, 3)
        with pytest.raises(DomainError):
            min_passage_probability(0.5, 0)


def _walk_spec(walk45, **kw):
    defaults = dict(
        model=walk45,
        budget_slope=30.0,
        barriers=(4.0,),
        particle_grid=(1, 2, 3),
        reps=3000,
        master_seed=101,
    )
    defaults.update(kw)
    return ParallelSpec(**defaults)


class TestEstimateRatio:
    def test_n1_is_exactly_one(self, walk45):
        cell = estimate_ratio(_walk_spec(walk45), 4.0, 1)
        assert cell.ratio == 1.0
        assert cell.ci_half_width == 0.0
        assert cell.p_single_hat == cell.p_min_hat

    def test_min_assembly_matches_dp_oracle(self, walk45):
        # p_min_hat must sit within 3 sigma of the independence identity
        # evaluated on the exact DP single-particle probability
        spec = _walk_spec(walk45, reps=4000)
        n = 3
        cell = estimate_ratio(spec, 4.0, n)
        budget_split = int(spec.budget_slope * 4.0 / n)
        p_exact = exact_walk_passage(walk45, 4, budget_split).prob()
        expected = min_passage_probability(p_exact, n)
        # delta-method noise on the assembled estimate
        sigma = (
            n
            * (1.0 - p_exact) ** (n - 1)
            * math.sqrt(p_exact * (1.0 - p_exact) / spec.reps)
        )
        assert abs(cell.p_min_hat - expected) <= 3.0 * sigma

    def test_single_particle_estimate_within_3sigma(self, walk45):
        spec = _walk_spec(walk45, reps=4000)
        cell = estimate_ratio(spec, 4.0, 2)
        p_exact = exact_walk_passage(walk45, 4, int(30.0 * 4.0)).prob()
        sigma = math.sqrt(p_exact * (1.0 - p_exact) / spec.reps)
        assert abs(cell.p_single_hat - p_exact) <= 3.0 * sigma

    def test_degenerate_budget_raises(self, walk45):
        with pytest.raises(DegenerateBudget):
            estimate_ratio(_walk_spec(walk45), 4.0, 500)

    def test_untilted_route_agrees(self, walk45):
        spec = _walk_spec(walk45, tilt_at_lambda_star=False, reps=6000)
        cell = estimate_ratio(spec, 4.0, 2)
        p_exact = exact_walk_passage(walk45, 4, 120).prob()
        sigma = math.sqrt(p_exact * (1.0 - p_exact) / spec.reps)
        assert abs(cell.p_single_hat - p_exact) <= 3.0 * sigma


class TestSweep:
    def test_columns_and_annotations(self, walk45):
        spec = _walk_spec(walk45, reps=300, particle_grid=(1, 2))
        table = sweep_phase_transition(spec)
        assert table.columns[:8] == (
            "x",
            "N",
            "ratio",
            "ci",
            "pSingle",
            "pMin",
            "thresholdN",
            "nStar",
        )
        threshold = table.column("thresholdN")[0]
        assert threshold == pytest.approx(3.0, abs=1e-9)  # 0.1 * 30
        assert table.column("nStar")[0] == 2
        assert len(table.rows) == 2

    def test_degenerate_cells_flagged_not_fatal(self, walk45):
        spec = _walk_spec(walk45, reps=200, particle_grid=(1, 500))
        table = sweep_phase_transition(spec)
        notes = table.column("note")
        assert notes[0] == ""
        assert notes[1] == "degenerate-budget"
        assert table.column("ratio")[1] == 0.0

    def test_all_ones_for_single_particle_grid(self, walk45):
        spec = _walk_spec(walk45, reps=300, particle_grid=(1,), barriers=(3.0, 5.0))
        table = sweep_phase_transition(spec)
        assert all(r == 1.0 for r in table.column("ratio"))

    def test_workers_do_not_change_results(self, walk45):
        spec = _walk_spec(walk45, reps=500, particle_grid=(1, 2, 4))
        serial = sweep_phase_transition(spec, workers=1)
        parallel = sweep_phase_transition(spec, workers=2)
        assert serial.rows == parallel.rows

    def test_levy_subthreshold_cell(self, levy_example):
        spec = ParallelSpec(
            model=levy_example,
            budget_slope=15.0,
            barriers=(6.0,),
            particle_grid=(2,),
            reps=500,
            master_seed=7,
            sim=SimConfig(dt=0.02),
        )
        cell = estimate_ratio(spec, 6.0, 2)
        # N=2 is far below the threshold 40: the split budget still dominates
        # the conditioned passage time, so doubling nearly doubles the chance
        assert 1.2 <= cell.ratio <= 2.3

    def test_spec_validation(self, walk45):
        with pytest.raises(DomainError):
            ParallelSpec(
                model=walk45,
                budget_slope=-1.0,
                barriers=(4.0,),
                particle_grid=(1,),
            )
        with pytest.raises(DomainError):
            ParallelSpec(
                model=walk45,
                budget_slope=1.0,
                barriers=(4.0,),
                particle_grid=(0,),
            )


class TestThresholdStructure:
    def test_phase_transition_shape_small_scale(self, walk45):
        # desk-size shadow of the large-x limit: sub-threshold cells grow
        # with N, super-threshold cells fall below the sub-threshold ones
        spec = _walk_spec(
            walk45,
            budget_slope=300.0,
            barriers=(300.0,),
            particle_grid=(5, 15, 60),
            reps=800,
            master_seed=3,
        )
        table = sweep_phase_transition(spec)
        ratios = dict(zip(table.column("N"), table.column("ratio")))
        assert ratios[5] == pytest.approx(5.0, rel=0.3)
        assert ratios[15] == pytest.approx(15.0, rel=0.35)
        assert ratios[60] < 2.0
