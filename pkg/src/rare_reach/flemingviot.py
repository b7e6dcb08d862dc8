"""Fleming-Viot particle systems: N walkers with copy-on-absorption.

All particles advance on a shared clock (synchronous steps for chains,
shared dt sub-steps for diffusions).  A particle that lands in the
absorbing set instantly adopts the position of a uniformly chosen particle
among those that survived the same step; simultaneous absorptions are
resolved in ascending particle index, each choosing among the survivors.
After burn-in, the empirical measure of positions approximates the
quasi-stationary distribution of the killed dynamics, which the eigen and
closed-form oracles verify.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import streams
from .errors import DomainError, ExtinctionError
from .restart import BrownianQsd, EmpiricalMeasure
from .tables import ResultTable

__all__ = [
    "BirthDeathDomain",
    "Mm1kExcursionDomain",
    "BrownianDomain",
    "FvDomain",
    "FvSystem",
    "fv_system",
    "step_fv",
    "empirical_measure",
    "burn_in",
    "chain_occupancy",
    "brownian_occupancy",
    "tv_distance",
    "convergence_curve",
]


@dataclass(frozen=True)
class BirthDeathDomain:
    """Walk on {1..interior_max} with absorption at 0 and interior_max + 1."""

    p_up: float
    interior_max: int

    def __post_init__(self) -> None:
        if not 0.0 < self.p_up < 1.0 or self.interior_max < 1:
            raise DomainError("need 0 < p_up < 1 and interior_max >= 1")

    def states(self) -> np.ndarray:
        return np.arange(1, self.interior_max + 1)

    def propose(self, pos: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        steps = np.where(rng.random(pos.size) < self.p_up, 1, -1)
        return pos + steps

    def absorbed(self, pos: np.ndarray) -> np.ndarray:
        return (pos < 1) | (pos > self.interior_max)

    def kernel(self) -> np.ndarray:
        n = self.interior_max
        k = np.zeros((n, n))
        for i in range(n):
            if i + 1 < n:
                k[i, i + 1] = self.p_up
            if i - 1 >= 0:
                k[i, i - 1] = 1.0 - self.p_up
        return k

    def initial(self, n: int, rng: np.random.Generator) -> np.ndarray:
        return rng.integers(1, self.interior_max + 1, size=n)


@dataclass(frozen=True)
class Mm1kExcursionDomain:
    """M/M/1/K jump chain on {j_state..k_state}, absorbed below j_state.

    Up-moves at the capacity k_state are blocked arrivals (the particle
    stays put), matching the queue's boundary behaviour.
    """

    p_up: float
    j_state: int
    k_state: int

    def __post_init__(self) -> None:
        if not 0.0 < self.p_up < 1.0 or not 0 <= self.j_state < self.k_state:
            raise DomainError("need 0 < p_up < 1 and 0 <= j_state < k_state")

    def states(self) -> np.ndarray:
        return np.arange(self.j_state, self.k_state + 1)

    def propose(self, pos: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        steps = np.where(rng.random(pos.size) < self.p_up, 1, -1)
        return np.minimum(pos + steps, self.k_state)

    def absorbed(self, pos: np.ndarray) -> np.ndarray:
        return pos < self.j_state

    def kernel(self) -> np.ndarray:
        states = self.states()
        n = states.size
        k = np.zeros((n, n))
        for i in range(n):
            if i + 1 < n:
                k[i, i + 1] = self.p_up
            else:
                k[i, i] = self.p_up  # blocked arrival at capacity
            if i - 1 >= 0:
                k[i, i - 1] = 1.0 - self.p_up
        return k

    def initial(self, n: int, rng: np.random.Generator) -> np.ndarray:
        return np.full(n, self.j_state)


@dataclass(frozen=True)
class BrownianDomain:
    """Drift -mu diffusion on (0, upper), absorbed at both ends."""

    mu: float
    upper: float
    sigma: float = 1.0
    dt: float = 0.01
    bridge_correction: bool = True

    def __post_init__(self) -> None:
        if not self.upper > 0.0 or not self.sigma > 0.0 or not self.dt > 0.0:
            raise DomainError("need upper > 0, sigma > 0, dt > 0")

    def initial(self, n: int, rng: np.random.Generator) -> np.ndarray:
        return rng.uniform(0.05 * self.upper, 0.95 * self.upper, size=n)


FvDomain = BirthDeathDomain | Mm1kExcursionDomain | BrownianDomain


class FvSystem:
    """Mutable N-particle state; one stream drives the whole system."""

    def __init__(
        self,
        domain: FvDomain,
        positions: np.ndarray,
        rng: np.random.Generator,
    ) -> None:
        if positions.size < 2:
            raise DomainError("a Fleming-Viot system needs at least 2 particles")
        self.domain = domain
        self.positions = positions
        self.rng = rng
        self.clock = 0.0
        self.jump_events = 0

    @property
    def n(self) -> int:
        return int(self.positions.size)


def fv_system(
    domain: FvDomain, n: int, master_seed: int = 0, key: str = "fv"
) -> FvSystem:
    rng = streams.stream(master_seed, key)
    return FvSystem(domain=domain, positions=domain.initial(n, rng), rng=rng)


def _resample_absorbed(system: FvSystem, proposed: np.ndarray, dead: np.ndarray) -> None:
    if not dead.any():
        system.positions = proposed
        return
    if dead.all():
        raise ExtinctionError("all particles absorbed in the same step")
    survivors = proposed[~dead]
    idx = np.flatnonzero(dead)
    picks = system.rng.integers(0, survivors.size, size=idx.size)
    proposed[idx] = survivors[picks]
    system.jump_events += int(idx.size)
    system.positions = proposed


def step_fv(system: FvSystem, duration: float) -> FvSystem:
    """Advance the system for `duration` (steps for chains, time for diffusions)."""
    domain = system.domain
    if isinstance(domain, BrownianDomain):
        n_sub = max(1, math.ceil(duration / domain.dt))
        drift = -domain.mu * domain.dt
        scale = domain.sigma * math.sqrt(domain.dt)
        for _ in range(n_sub):
            old = system.positions
            new = old + drift + scale * system.rng.standard_normal(old.size)
            dead = (new <= 0.0) | (new >= domain.upper)
            if domain.bridge_correction:
                alive = ~dead
                u_low = system.rng.random(old.size)
                u_up = system.rng.random(old.size)
                var = domain.sigma**2 * domain.dt
                p_low = np.exp(-2.0 * np.maximum(old, 0.0) * np.maximum(new, 0.0) / var)
                p_up = np.exp(
                    -2.0
                    * np.maximum(domain.upper - old, 0.0)
                    * np.maximum(domain.upper - new, 0.0)
                    / var
                )
                dead = dead | (alive & ((u_low < p_low) | (u_up < p_up)))
            _resample_absorbed(system, new, dead)
            system.clock += domain.dt
        return system
    steps = int(duration)
    for _ in range(steps):
        proposed = domain.propose(system.positions, system.rng)
        dead = domain.absorbed(proposed)
        _resample_absorbed(system, proposed, dead)
        system.clock += 1.0
    return system


def empirical_measure(system: FvSystem) -> EmpiricalMeasure:
    """Current positions as a restart measure (caller declares burn-in)."""
    domain = system.domain
    if isinstance(domain, BrownianDomain):
        upper = domain.upper
    elif isinstance(domain, BirthDeathDomain):
        upper = float(domain.interior_max + 1)
    else:
        upper = float(domain.k_state + 1)
    return EmpiricalMeasure(
        samples=tuple(float(v) for v in system.positions), upper=upper
    )


def burn_in(system: FvSystem, multiplier: float = 10.0) -> float:
    """Advance until the clock passes `multiplier` estimated absorption times.

    The expected single-particle absorption time is estimated on the fly
    from the system's own copy-jump counter.
    """
    start_clock = system.clock
    start_jumps = system.jump_events
    chunk = 2.0 if isinstance(system.domain, BrownianDomain) else 32.0
    while True:
        step_fv(system, chunk)
        elapsed = system.clock - start_clock
        absorbs = system.jump_events - start_jumps
        if absorbs > 0:
            lifetime = elapsed * system.n / absorbs
            if elapsed >= multiplier * lifetime:
                return lifetime
            chunk = max(chunk, 0.5 * (multiplier * lifetime - elapsed))
        else:
            chunk *= 2.0


def tv_distance(p: np.ndarray, q: np.ndarray) -> float:
    return 0.5 * float(np.abs(np.asarray(p) - np.asarray(q)).sum())


def chain_occupancy(system: FvSystem, steps: int, thin: int = 1) -> np.ndarray:
    """Time-averaged empirical distribution over domain states."""
    states = system.domain.states()
    counts = np.zeros(states.size)
    taken = 0
    for _ in range(0, steps, thin):
        step_fv(system, thin)
        counts += np.bincount(
            system.positions - states[0], minlength=states.size
        )[: states.size]
        taken += 1
    return counts / (taken * system.n)


def brownian_occupancy(
    system: FvSystem, duration: float, snapshots: int, bins: np.ndarray
) -> np.ndarray:
    """Time-averaged histogram masses over `bins` edges."""
    masses = np.zeros(bins.size - 1)
    dt_chunk = duration / snapshots
    for _ in range(snapshots):
        step_fv(system, dt_chunk)
        hist, _ = np.histogram(system.positions, bins=bins)
        masses += hist
    return masses / masses.sum()


def convergence_curve(
    domain: FvDomain,
    n_grid: tuple[int, ...],
    run_length: float,
    master_seed: int = 0,
    seeds: int = 3,
    bins: int = 25,
) -> ResultTable:
    """TV distance to the oracle QSD per particle count, averaged over seeds."""
    from .oracle import qsd_eigen, quadrature

    if len(n_grid) == 0 or list(n_grid) != sorted(n_grid):
        raise DomainError("n_grid must be nonempty and ascending")
    if isinstance(domain, BrownianDomain):
        edges = np.linspace(0.0, domain.upper, bins + 1)
        qsd = BrownianQsd(mu=domain.mu / domain.sigma**2, upper=domain.upper)
        target = np.array(
            [
                quadrature(lambda y: float(qsd.density(y)), a, b, 1e-10)
                for a, b in zip(edges[:-1], edges[1:])
            ]
        )
        target /= target.sum()
    else:
        target = qsd_eigen(domain.kernel()).nu
        edges = None
    rows = []
    for n in n_grid:
        tvs = []
        for seed_idx in range(seeds):
            system = fv_system(domain, n, master_seed, key=f"fv-curve-{n}-{seed_idx}")
            burn_in(system)
            if isinstance(domain, BrownianDomain):
                occ = brownian_occupancy(system, run_length, snapshots=50, bins=edges)
            else:
                occ = chain_occupancy(system, int(run_length), thin=1)
            tvs.append(tv_distance(occ, target))
        arr = np.asarray(tvs)
        rows.append(
            (n, float(arr.mean()), float(arr.std(ddof=1)) if seeds > 1 else 0.0, seeds, run_length)
        )
    return ResultTable(
        columns=("N", "tvMean", "tvStd", "seeds", "runLength"), rows=rows
    )
