"""Strategy I: N particles splitting one time budget B(x) = C x.

The quantity of interest per grid cell is the ratio

    P(tau_min_over_N(x) <= B(x)/N) / P(tau(x) <= B(x)),

estimated with importance sampling under the lam_star tilt: hit indicators
are reweighted by exp(-lam_star Z(tau)) (psi(lam_star) = 0), the numerator
is assembled from the single-particle estimate through the independence
identity 1 - (1 - p)^N, and the two estimates come from independent
replication pools, so the confidence interval follows from the delta
method.  All internal arithmetic runs on frequencies scaled by
exp(+lam_star x), which keeps the math in O(1) range for barriers far past
the underflow point of the raw probabilities.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import streams
from .cumulant import (
    CumulantProfile,
    LevyModel,
    Model,
    optimal_particles,
    tilt,
)
from .errors import DegenerateBudget, DomainError
from .paths import SimConfig, simulate_levy_passage, simulate_walk_passage
from .tables import ResultTable

__all__ = [
    "ParallelSpec",
    "RatioCell",
    "min_passage_probability",
    "estimate_ratio",
    "sweep_phase_transition",
]


@dataclass(frozen=True)
class ParallelSpec:
    """One phase-transition study: model, budget line, and the (x, N) grid."""

    model: Model
    budget_slope: float
    barriers: tuple[float, ...]
    particle_grid: tuple[int, ...]
    reps: int = 1000
    tilt_at_lambda_star: bool = True
    master_seed: int = 0
    sim: SimConfig = field(default_factory=SimConfig)

    def __post_init__(self) -> None:
        if not self.budget_slope > 0.0:
            raise DomainError(f"budget slope must be > 0, got {self.budget_slope}")
        if any(x <= 0 for x in self.barriers):
            raise DomainError("all barriers must be positive")
        if any(n < 1 for n in self.particle_grid):
            raise DomainError("all particle counts must be >= 1")
        if self.reps < 1:
            raise DomainError("reps must be >= 1")


@dataclass(frozen=True)
class RatioCell:
    x: float
    n_particles: int
    ratio: float
    ci_half_width: float
    p_single_hat: float
    p_min_hat: float
    note: str = ""


def min_passage_probability(p_single: float, n: int) -> float:
    """P(min of n independent passage times beats the clock) = 1 - (1-p)^n."""
    if not 0.0 <= p_single <= 1.0:
        raise DomainError(f"p_single must be a probability, got {p_single}")
    if n < 1:
        raise DomainError(f"n must be >= 1, got {n}")
    if p_single == 1.0:
        return 1.0
    return -math.expm1(n * math.log1p(-p_single))


def _scaled_passage_sample(
    spec: ParallelSpec,
    profile: CumulantProfile,
    x: float,
    budget: float,
    key: tuple,
) -> np.ndarray:
    """Per-replication values of e^{lam* x} * weight * 1(hit) (or plain hits)."""
    lam = profile.lambda_star if spec.tilt_at_lambda_star else 0.0
    model = tilt(spec.model, lam) if lam != 0.0 else spec.model
    is_levy = isinstance(spec.model, LevyModel)
    psi_lam = profile.psi(lam) if lam != 0.0 else 0.0
    out = np.zeros(spec.reps)
    for rep in range(spec.reps):
        rng = streams.stream(spec.master_seed, "parallel", *key, rep)
        if is_levy:
            o = simulate_levy_passage(model, x, budget, spec.sim, rng)
        else:
            o = simulate_walk_passage(model, x, int(budget), rng)
        if o.hit:
            # log weight plus lam*x, exponentiated in O(1) range
            out[rep] = math.exp(
                lam * x - lam * o.terminal_position + o.time * psi_lam
            )
    return out


def estimate_ratio(spec: ParallelSpec, x: float, n: int) -> RatioCell:
    """Ratio cell for barrier x and N = n particles (n = 1 is exactly 1)."""
    profile = CumulantProfile.from_model(spec.model)
    lam = profile.lambda_star if spec.tilt_at_lambda_star else 0.0
    budget_total = spec.budget_slope * x
    is_levy = isinstance(spec.model, LevyModel)
    if not is_levy and math.floor(budget_total / n) < 1:
        raise DegenerateBudget(
            f"per-particle budget floor(B/N) = floor({budget_total}/{n}) is zero steps"
        )
    budget_split = budget_total / n if is_levy else float(math.floor(budget_total / n))

    scale = math.exp(-lam * x)  # may underflow to a denormal; primed space is O(1)
    den = _scaled_passage_sample(spec, profile, x, budget_total, ("den", x))
    den_mean = float(den.mean())
    den_var = float(den.var(ddof=1)) / spec.reps if spec.reps > 1 else 0.0
    p_single = scale * den_mean

    if n == 1:
        # numerator and denominator are the same quantity; reuse the pool
        return RatioCell(
            x=x,
            n_particles=1,
            ratio=1.0 if den_mean > 0.0 else 0.0,
            ci_half_width=0.0,
            p_single_hat=p_single,
            p_min_hat=p_single,
            note="" if den_mean > 0.0 else "no-denominator-signal",
        )

    num = _scaled_passage_sample(spec, profile, x, budget_split, ("num", x, n))
    num_mean = float(num.mean())
    num_var = float(num.var(ddof=1)) / spec.reps if spec.reps > 1 else 0.0
    p_split = scale * num_mean

    if den_mean <= 0.0:
        return RatioCell(
            x=x,
            n_particles=n,
            ratio=0.0,
            ci_half_width=math.inf,
            p_single_hat=0.0,
            p_min_hat=min_passage_probability(min(p_split, 1.0), n),
            note="no-denominator-signal",
        )

    p_split_c = min(p_split, 1.0)
    p_min = min_passage_probability(p_split_c, n)
    # correction factor (1 - (1-p)^n) / (n p); exactly 1.0 in the deep-rare regime
    corr = p_min / (n * p_split_c) if p_split_c > 0.0 else 1.0
    ratio = corr * n * num_mean / den_mean
    # delta method; d(num assembly)/d(p_split) = n (1-p)^(n-1)
    dnum = math.exp((n - 1) * math.log1p(-min(p_split_c, 1.0 - 1e-16)))
    var_ratio = (n * dnum / den_mean) ** 2 * num_var + (
        ratio / den_mean
    ) ** 2 * den_var
    ci = 1.96 * math.sqrt(max(var_ratio, 0.0))
    return RatioCell(
        x=x,
        n_particles=n,
        ratio=ratio,
        ci_half_width=ci,
        p_single_hat=p_single,
        p_min_hat=p_min,
    )


def _cell_job(spec: ParallelSpec, x: float, n: int) -> RatioCell:
    try:
        return estimate_ratio(spec, x, n)
    except DegenerateBudget:
        return RatioCell(
            x=x,
            n_particles=n,
            ratio=0.0,
            ci_half_width=0.0,
            p_single_hat=0.0,
            p_min_hat=0.0,
            note="degenerate-budget",
        )


_SWEEP_COLUMNS = (
    "x",
    "N",
    "ratio",
    "ci",
    "pSingle",
    "pMin",
    "thresholdN",
    "nStar",
    "note",
)


def sweep_phase_transition(spec: ParallelSpec, workers: int = 1) -> ResultTable:
    """One RatioCell per (x, N), annotated with the theoretical threshold."""
    profile = CumulantProfile.from_model(spec.model)
    threshold = profile.drift_at_star * spec.budget_slope
    n_star = optimal_particles(profile, spec.budget_slope)
    cells = [(x, n) for x in spec.barriers for n in spec.particle_grid]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(
                pool.map(
                    _cell_job,
                    [spec] * len(cells),
                    [x for x, _ in cells],
                    [n for _, n in cells],
                )
            )
    else:
        results = [_cell_job(spec, x, n) for x, n in cells]
    rows = [
        (
            c.x,
            c.n_particles,
            c.ratio,
            c.ci_half_width,
            c.p_single_hat,
            c.p_min_hat,
            threshold,
            n_star,
            c.note,
        )
        for c in results
    ]
    return ResultTable(columns=_SWEEP_COLUMNS, rows=rows)
