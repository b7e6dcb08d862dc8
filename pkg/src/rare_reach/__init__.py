"""Rare-event exploration toolkit.

Simulation and analysis of first-passage problems for negatively drifted
random walks and Levy processes under finite time budgets: the parallel
splitting phase transition and its optimal particle count, restarted
processes with pluggable restart measures (including quasi-stationary
restart and its Fleming-Viot approximation), M/M/1 queueing case studies,
and brute-force oracles that pin every closed form at desk scale.
"""

__version__ = "0.1.0"

from .cumulant import (  # noqa: F401
    CumulantProfile,
    IncrementLaw,
    LevyModel,
    NormalLaw,
    TwoPointLaw,
    brownian,
    legendre,
    optimal_particles,
    psi,
    psi_prime,
    psi_second,
    solve_cramer_root,
    solve_lambda_for_drift,
    tilt,
)
from .errors import (  # noqa: F401
    BudgetCapExceeded,
    ConfigError,
    ConvergenceError,
    DegenerateBudget,
    DomainError,
    DriftOutOfRange,
    EventCapExceeded,
    ExtinctionError,
    InsufficientSignal,
    NoCramerRoot,
    SizeError,
    ToleranceNotMet,
    ToolkitError,
)
from .parallel import (  # noqa: F401
    ParallelSpec,
    RatioCell,
    estimate_ratio,
    min_passage_probability,
    sweep_phase_transition,
)
from .paths import (  # noqa: F401
    ExitOutcome,
    PassageOutcome,
    SimConfig,
    passage_weight,
    simulate_exit,
    simulate_levy_passage,
    simulate_walk_passage,
)
from .restart import (  # noqa: F401
    BrownianQsd,
    EmpiricalMeasure,
    GainReport,
    RestartRunResult,
    TruncatedExponential,
    beta_rate,
    estimate_q,
    exp_moment,
    restart_gain_report,
    sample_restart,
    simulate_cycles,
    simulate_restarted_passage,
)
