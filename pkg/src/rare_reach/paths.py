"""Trajectory simulation: stepwise walks and event-driven Levy paths.

Walks are observed at integer times.  Levy paths are simulated exactly at
jump times; between jumps the diffusion component advances on sub-steps of
length <= dt, and (by default) every sub-step that does not cross a barrier
at its endpoints runs a Brownian-bridge crossing test with probability
exp(-2 (b1 - a)(b1 - b) / (sigma^2 h)) per barrier.  For a pure diffusion
this makes the hit/no-hit decision exact in law; crossing times are
attributed to the sub-step end, so they carry a positive bias below dt.

Draw sequences are chunked at fixed sizes so that a replication's stream
consumption does not depend on budgets or barrier placement of *earlier*
chunks; identical (master seed, replication key) therefore reproduces the
trajectory bit for bit no matter how work is scheduled.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .cumulant import IncrementLaw, LevyModel, Model, TwoPointLaw, psi
from .errors import BudgetCapExceeded, DomainError, EventCapExceeded

__all__ = [
    "SimConfig",
    "PassageOutcome",
    "ExitOutcome",
    "UPPER",
    "LOWER",
    "simulate_walk_passage",
    "simulate_levy_passage",
    "simulate_exit",
    "passage_weight",
]

UPPER = "upper"
LOWER = "lower"

_WALK_CHUNK = 4096
_DIFF_CHUNK = 512


@dataclass(frozen=True)
class SimConfig:
    """Knobs of the event-driven scheme (walks only read master_seed)."""

    master_seed: int = 0
    dt: float = 0.01
    bridge_correction: bool = True
    max_events: int = 10_000_000

    def __post_init__(self) -> None:
        if not self.dt > 0.0:
            raise DomainError(f"dt must be positive, got {self.dt}")
        if self.max_events < 1:
            raise DomainError(f"max_events must be >= 1, got {self.max_events}")


@dataclass(frozen=True)
class PassageOutcome:
    """Result of one first-passage attempt over a single barrier."""

    hit: bool
    time: float
    terminal_position: float
    overshoot: float = 0.0
    log_weight: float = 0.0


@dataclass(frozen=True)
class ExitOutcome:
    """Result of one exit from the interval (0, x)."""

    side: str
    time: float
    terminal_position: float


# ---------------------------------------------------------------------------
# walks
# ---------------------------------------------------------------------------


def _walk_until(
    law: IncrementLaw,
    start: float,
    upper: float,
    lower: float | None,
    max_steps: int,
    rng: np.random.Generator,
) -> tuple[str, int, float]:
    """Run the walk to the first barrier crossing or step budget."""
    z = float(start)
    done = 0
    while done < max_steps:
        if isinstance(law, TwoPointLaw):
            inc = np.where(rng.random(_WALK_CHUNK) < law.p, 1.0, -1.0)
        else:
            inc = law.mean_step + math.sqrt(law.var_step) * rng.standard_normal(
                _WALK_CHUNK
            )
        k = min(_WALK_CHUNK, max_steps - done)
        path = z + np.cumsum(inc[:k])
        hit_up = path >= upper
        hit_low = path <= lower if lower is not None else None
        idx_up = int(np.argmax(hit_up)) if hit_up.any() else k
        idx_low = int(np.argmax(hit_low)) if hit_low is not None and hit_low.any() else k
        idx = min(idx_up, idx_low)
        if idx < k:
            side = UPPER if idx_up <= idx_low else LOWER
            return side, done + idx + 1, float(path[idx])
        z = float(path[-1])
        done += k
    return "timeout", max_steps, z


def simulate_walk_passage(
    law: IncrementLaw, x: float, budget: int, rng: np.random.Generator
) -> PassageOutcome:
    """First passage of the walk over barrier x within an integer step budget."""
    if not x > 0.0:
        raise DomainError(f"barrier must be positive, got {x}")
    if budget < 0:
        raise DomainError(f"budget must be >= 0, got {budget}")
    status, steps, z = _walk_until(law, 0.0, x, None, budget, rng)
    if status == UPPER:
        return PassageOutcome(hit=True, time=steps, terminal_position=z, overshoot=z - x)
    return PassageOutcome(hit=False, time=budget, terminal_position=z)


# ---------------------------------------------------------------------------
# Levy paths: diffusion segments + exponential jumps
# ---------------------------------------------------------------------------


def _diffuse_segment(
    model: LevyModel,
    z: float,
    seg: float,
    upper: float | None,
    lower: float | None,
    cfg: SimConfig,
    rng: np.random.Generator,
    events_used: int,
    cap_error: type[Exception],
) -> tuple[str, float, float, int]:
    """Advance the diffusion part over a segment of length seg (may be inf).

    Returns (status, elapsed-within-segment, position, substeps used) where
    status is "none" (segment completed), UPPER or LOWER.  Raises cap_error
    once events_used plus the substeps taken here exceed cfg.max_events.
    """
    sigma = model.sigma
    drift = -model.drift_mu
    n_sub: float = math.inf if math.isinf(seg) else max(1, math.ceil(seg / cfg.dt))
    done = 0
    elapsed = 0.0
    while done < n_sub:
        if events_used + done > cfg.max_events:
            raise cap_error(
                f"event cap {cfg.max_events} exceeded inside a diffusion segment"
            )
        k = int(min(_DIFF_CHUNK, n_sub - done))
        h = np.full(k, cfg.dt)
        if done + k == n_sub:  # last chunk holds the ragged sub-step
            h[-1] = max(seg - (n_sub - 1) * cfg.dt, 1e-15)
        norm = rng.standard_normal(_DIFF_CHUNK)[:k]
        path = z + np.cumsum(drift * h + sigma * np.sqrt(h) * norm)
        starts = np.empty(k)
        starts[0] = z
        starts[1:] = path[:-1]

        # a diffusion first touches a barrier from inside, so crossings are
        # recorded at the barrier itself (endpoints past it are artifacts of
        # the sub-step grid); only jumps produce genuine overshoot
        cand_idx = k
        cand_side = "none"
        cand_pos = 0.0
        if upper is not None and (path >= upper).any():
            i = int(np.argmax(path >= upper))
            cand_idx, cand_side, cand_pos = i, UPPER, float(upper)
        if lower is not None and (path <= lower).any():
            i = int(np.argmax(path <= lower))
            if i < cand_idx:
                cand_idx, cand_side, cand_pos = i, LOWER, float(lower)
        if cfg.bridge_correction:
            # bridge tests only below the first endpoint crossing
            inside = np.ones(k, dtype=bool)
            if upper is not None:
                inside &= (starts < upper) & (path < upper)
            if lower is not None:
                inside &= (starts > lower) & (path > lower)
            var = sigma * sigma * h
            if lower is not None:
                u = rng.random(_DIFF_CHUNK)[:k]
                prob = np.exp(-2.0 * (starts - lower) * (path - lower) / var)
                fired = inside & (u < prob)
                if fired.any():
                    i = int(np.argmax(fired))
                    if i < cand_idx:
                        cand_idx, cand_side, cand_pos = i, LOWER, float(lower)
            if upper is not None:
                u = rng.random(_DIFF_CHUNK)[:k]
                prob = np.exp(-2.0 * (upper - starts) * (upper - path) / var)
                fired = inside & (u < prob)
                if fired.any():
                    i = int(np.argmax(fired))
                    if i < cand_idx:
                        cand_idx, cand_side, cand_pos = i, UPPER, float(upper)
        if cand_idx < k:
            elapsed += float(np.sum(h[: cand_idx + 1]))
            return cand_side, elapsed, cand_pos, done + cand_idx + 1
        z = float(path[-1])
        elapsed += float(np.sum(h))
        done += k
    return "none", seg, z, n_sub


def _levy_until(
    model: LevyModel,
    start: float,
    horizon: float,
    upper: float | None,
    lower: float | None,
    cfg: SimConfig,
    rng: np.random.Generator,
    cap_error: type[Exception],
) -> tuple[str, float, float, int]:
    """Run the Levy path to a barrier, the horizon, or the event cap."""
    t = 0.0
    z = float(start)
    events = 0
    total_rate = model.pos_rate + model.neg_rate
    while True:
        t_before = t
        if total_rate > 0.0:
            gap = rng.exponential(1.0 / total_rate)
        else:
            gap = math.inf
        if math.isfinite(horizon):
            jump_inside = gap < horizon - t_before
        else:
            jump_inside = math.isfinite(gap)
        seg = gap if jump_inside else horizon - t_before
        if seg > 0.0:
            status, elapsed, z, used = _diffuse_segment(
                model, z, seg, upper, lower, cfg, rng, events, cap_error
            )
            events += used
            t = t_before + elapsed
            if status != "none":
                return status, t, z, events
        if not jump_inside:
            return "timeout", horizon, z, events
        t = t_before + gap
        events += 1
        if events > cfg.max_events:
            raise cap_error(f"event cap {cfg.max_events} exceeded at t={t:.6g}")
        positive = rng.random() < model.pos_rate / total_rate
        if positive:
            z += rng.exponential(1.0 / model.pos_jump_rate)
            if upper is not None and z >= upper:
                return UPPER, t, z, events
        else:
            z -= rng.exponential(1.0 / model.neg_jump_rate)
            if lower is not None and z <= lower:
                return LOWER, t, z, events


def simulate_levy_passage(
    model: LevyModel,
    x: float,
    budget: float,
    cfg: SimConfig,
    rng: np.random.Generator,
) -> PassageOutcome:
    """First passage over x within a real-time budget (EventCapExceeded on runaway)."""
    if not x > 0.0:
        raise DomainError(f"barrier must be positive, got {x}")
    if budget < 0.0:
        raise DomainError(f"budget must be >= 0, got {budget}")
    if budget == 0.0:
        return PassageOutcome(hit=False, time=0.0, terminal_position=0.0)
    status, t, z, _ = _levy_until(
        model, 0.0, budget, x, None, cfg, rng, EventCapExceeded
    )
    if status == UPPER:
        return PassageOutcome(hit=True, time=t, terminal_position=z, overshoot=z - x)
    return PassageOutcome(hit=False, time=budget, terminal_position=z)


def simulate_exit(
    model: Model,
    y0: float,
    x: float,
    cfg: SimConfig,
    rng: np.random.Generator,
    budget_cap: int | None = None,
) -> ExitOutcome:
    """First exit from (0, x) started at y0 (BudgetCapExceeded on runaway).

    Walk laws step on integer times; Levy models run the event-driven scheme
    with both barriers bridge-corrected.
    """
    if not 0.0 < y0 < x:
        raise DomainError(f"need 0 < y0 < x, got y0={y0}, x={x}")
    cap = budget_cap if budget_cap is not None else cfg.max_events
    if isinstance(model, LevyModel):
        capped = SimConfig(
            master_seed=cfg.master_seed,
            dt=cfg.dt,
            bridge_correction=cfg.bridge_correction,
            max_events=cap,
        )
        status, t, z, _ = _levy_until(
            model, y0, math.inf, x, 0.0, capped, rng, BudgetCapExceeded
        )
        return ExitOutcome(side=status, time=t, terminal_position=z)
    status, steps, z = _walk_until(model, y0, x, 0.0, cap, rng)
    if status == "timeout":
        raise BudgetCapExceeded(f"no exit from (0, {x}) within {cap} steps")
    return ExitOutcome(side=status, time=steps, terminal_position=z)


def passage_weight(base_model: Model, outcome: PassageOutcome, lam: float) -> float:
    """Importance weight exp(-lam Z(tau) + tau psi(lam)) for a tilted outcome.

    ``base_model`` is the untilted model whose probabilities are being
    estimated; the outcome must have been simulated under tilt(base, lam).
    The estimator mean of weight * 1(hit) is the untilted hit probability.
    At lam = 0 the weight is exactly 1.
    """
    if lam == 0.0:
        return 1.0
    return math.exp(
        -lam * outcome.terminal_position + outcome.time * psi(base_model, lam)
    )
