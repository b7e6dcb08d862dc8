"""Cumulant / Levy exponents: evaluation, derivatives, roots, tilting.

Driving noises come in three families, all with closed-form exponents:

* ``TwoPointLaw(p)``     -- lattice steps +1/-1 with P(+1) = p,
  psi(lam) = log(p e^lam + (1-p) e^-lam).
* ``NormalLaw(m, v)``    -- Gaussian steps,  psi(lam) = m lam + v lam^2 / 2.
* ``LevyModel``          -- drift -mu, diffusion sigma, two-sided exponential
  jumps (positive: rate r, sizes Exp(alpha); negative: rate s, sizes
  Exp(beta)), psi(lam) = -mu lam + (sigma lam)^2/2
  + r lam/(alpha-lam) - s lam/(beta+lam)  on  lam in (-beta, alpha).

For a model with negative mean and a positive zero of psi (Cramer root
lam_star), ``CumulantProfile.from_model`` solves and caches the constants
that drive every experiment: lam_zero (zero of psi'), lam_star, lam_max.

Dataclasses validate structural constraints only (rates positive, variances
positive).  Admissibility for the rare regime -- negative mean, existence of
the Cramer root -- is checked when a profile is built, because ``tilt`` must
be able to return supercritical members of the same family (e.g. tilting a
TwoPointLaw at lam_star yields p -> 1-p > 1/2).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

from .errors import ConvergenceError, DomainError, DriftOutOfRange, NoCramerRoot

__all__ = [
    "TwoPointLaw",
    "NormalLaw",
    "LevyModel",
    "IncrementLaw",
    "Model",
    "CumulantProfile",
    "psi",
    "psi_prime",
    "psi_second",
    "domain",
    "mean_increment",
    "solve_cramer_root",
    "solve_lambda_for_drift",
    "legendre",
    "optimal_particles",
    "tilt",
    "brownian",
]

_DOMAIN_MARGIN = 1e-12


@dataclass(frozen=True)
class TwoPointLaw:
    """Step +1 with probability p, else -1."""

    p: float

    def __post_init__(self) -> None:
        if not 0.0 < self.p < 1.0:
            raise DomainError(f"TwoPointLaw requires 0 < p < 1, got p={self.p}")


@dataclass(frozen=True)
class NormalLaw:
    """Gaussian step with mean ``mean_step`` and variance ``var_step``."""

    mean_step: float
    var_step: float = 1.0

    def __post_init__(self) -> None:
        if not self.var_step > 0.0:
            raise DomainError(f"NormalLaw requires var_step > 0, got {self.var_step}")


@dataclass(frozen=True)
class LevyModel:
    """Drift -drift_mu, diffusion sigma, two-sided exponential jumps.

    Positive jumps arrive at Poisson rate ``pos_rate`` with Exp(``pos_jump_rate``)
    sizes; negative jumps at rate ``neg_rate`` with Exp(``neg_jump_rate``) sizes.
    The finite-variation case sigma = 0 is excluded.
    """

    drift_mu: float
    sigma: float = 1.0
    pos_rate: float = 0.0
    pos_jump_rate: float = 1.0
    neg_rate: float = 0.0
    neg_jump_rate: float = 1.0

    def __post_init__(self) -> None:
        if not self.sigma > 0.0:
            raise DomainError(f"LevyModel requires sigma > 0, got {self.sigma}")
        if self.pos_rate < 0.0 or self.neg_rate < 0.0:
            raise DomainError("jump intensities must be nonnegative")
        if not self.pos_jump_rate > 0.0 or not self.neg_jump_rate > 0.0:
            raise DomainError("jump size rates must be positive")


IncrementLaw = TwoPointLaw | NormalLaw
Model = TwoPointLaw | NormalLaw | LevyModel


def brownian(mu: float, sigma: float = 1.0) -> LevyModel:
    """Brownian motion with drift -mu (no jumps)."""
    return LevyModel(drift_mu=mu, sigma=sigma)


def domain(model: Model) -> tuple[float, float]:
    """Open interval on which psi is finite."""
    if isinstance(model, (TwoPointLaw, NormalLaw)):
        return (-math.inf, math.inf)
    lo = -model.neg_jump_rate if model.neg_rate > 0.0 else -math.inf
    hi = model.pos_jump_rate if model.pos_rate > 0.0 else math.inf
    return (lo, hi)


def _check_domain(model: Model, lam: float) -> None:
    lo, hi = domain(model)
    if lam <= lo + _DOMAIN_MARGIN or lam >= hi - _DOMAIN_MARGIN:
        raise DomainError(
            f"lambda={lam} outside the finite domain ({lo}, {hi}) "
            f"of {type(model).__name__}"
        )


def psi(model: Model, lam: float) -> float:
    """Cumulant (log moment generating function of Z(1)), closed form."""
    _check_domain(model, lam)
    if isinstance(model, TwoPointLaw):
        p, q = model.p, 1.0 - model.p
        # overflow-safe split: log(p e^lam + q e^-lam)
        if lam >= 0.0:
            return lam + math.log(p + q * math.exp(-2.0 * lam))
        return -lam + math.log(p * math.exp(2.0 * lam) + q)
    if isinstance(model, NormalLaw):
        return model.mean_step * lam + 0.5 * model.var_step * lam * lam
    m = model
    out = -m.drift_mu * lam + 0.5 * (m.sigma * lam) ** 2
    if m.pos_rate > 0.0:
        out += m.pos_rate * lam / (m.pos_jump_rate - lam)
    if m.neg_rate > 0.0:
        out -= m.neg_rate * lam / (m.neg_jump_rate + lam)
    return out


def psi_prime(model: Model, lam: float) -> float:
    """Analytic first derivative of psi (drift of the lam-tilted process)."""
    _check_domain(model, lam)
    if isinstance(model, TwoPointLaw):
        p, q = model.p, 1.0 - model.p
        if lam >= 0.0:
            t = (q / p) * math.exp(-2.0 * lam)
            return (1.0 - t) / (1.0 + t)
        t = (p / q) * math.exp(2.0 * lam)
        return (t - 1.0) / (t + 1.0)
    if isinstance(model, NormalLaw):
        return model.mean_step + model.var_step * lam
    m = model
    out = -m.drift_mu + m.sigma**2 * lam
    if m.pos_rate > 0.0:
        out += m.pos_rate * m.pos_jump_rate / (m.pos_jump_rate - lam) ** 2
    if m.neg_rate > 0.0:
        out -= m.neg_rate * m.neg_jump_rate / (m.neg_jump_rate + lam) ** 2
    return out


def psi_second(model: Model, lam: float) -> float:
    """Analytic second derivative of psi (variance of the tilted process)."""
    _check_domain(model, lam)
    if isinstance(model, TwoPointLaw):
        d = psi_prime(model, lam)
        return 1.0 - d * d
    if isinstance(model, NormalLaw):
        return model.var_step
    m = model
    out = m.sigma**2
    if m.pos_rate > 0.0:
        out += 2.0 * m.pos_rate * m.pos_jump_rate / (m.pos_jump_rate - lam) ** 3
    if m.neg_rate > 0.0:
        out += 2.0 * m.neg_rate * m.neg_jump_rate / (m.neg_jump_rate + lam) ** 3
    return out


def mean_increment(model: Model) -> float:
    """E[Z(1)] = psi'(0)."""
    return psi_prime(model, 0.0)


# ---------------------------------------------------------------------------
# root finding: bracketed bisection refined by safeguarded Newton
# ---------------------------------------------------------------------------


def _solve_increasing_root(f, fprime, lo: float, hi: float, f_tol: float) -> float:
    """Root of increasing f with f(lo) < 0 < f(hi), Newton inside a bracket."""
    a, b = lo, hi
    x = 0.5 * (a + b)
    for _ in range(200):
        fx = f(x)
        if abs(fx) <= f_tol:
            return x
        if fx > 0.0:
            b = x
        else:
            a = x
        step_ok = False
        d = fprime(x)
        if d > 0.0 and math.isfinite(d):
            x_new = x - fx / d
            if a < x_new < b:
                x = x_new
                step_ok = True
        if not step_ok:
            x = 0.5 * (a + b)
        if b - a <= 4.0 * math.ulp(max(abs(a), abs(b), 1.0)):
            return 0.5 * (a + b)
    raise ConvergenceError("root solve did not reach tolerance in 200 iterations")


def _upper_bracket(model: Model, f, start: float) -> float:
    """Point where f > 0, walking toward lambda_max (finite or not)."""
    _, hi = domain(model)
    if math.isfinite(hi):
        probe = hi - 1e-9
        if f(probe) > 0.0:
            return probe
        raise NoCramerRoot(
            f"{type(model).__name__}: psi stays negative on the whole domain"
        )
    step = max(1.0, abs(start))
    probe = start + step
    for _ in range(200):
        if f(probe) > 0.0:
            return probe
        probe += step
        step *= 2.0
    raise NoCramerRoot(
        f"{type(model).__name__}: no sign change of psi found on (0, +inf)"
    )


def solve_cramer_root(model: Model) -> float:
    """Positive zero lam_star of psi.

    Raises NoCramerRoot when the model does not satisfy the rare-regime
    assumptions (nonnegative mean, or psi < 0 on the whole positive domain).
    """
    if mean_increment(model) >= 0.0:
        raise NoCramerRoot(
            f"{type(model).__name__} has nonnegative mean {mean_increment(model):g}; "
            "reaching a distant barrier is not a rare event"
        )
    lam_zero = _solve_lambda_zero(model)
    hi = _upper_bracket(model, lambda u: psi(model, u), lam_zero)
    lam_star = _solve_increasing_root(
        lambda u: psi(model, u),
        lambda u: psi_prime(model, u),
        lam_zero,
        hi,
        f_tol=0.0,
    )
    # contract: |psi(lam_star)| <= 1e-12 * max(1, |psi'(lam_star)|)
    if abs(psi(model, lam_star)) > 1e-12 * max(1.0, abs(psi_prime(model, lam_star))):
        raise ConvergenceError("Cramer root did not reach the required accuracy")
    return lam_star


def _solve_lambda_zero(model: Model) -> float:
    """Zero of psi' (argmin of psi), strictly inside (0, lambda_max)."""
    hi = _upper_bracket(model, lambda u: psi_prime(model, u), 0.0)
    return _solve_increasing_root(
        lambda u: psi_prime(model, u),
        lambda u: psi_second(model, u),
        0.0,
        hi,
        f_tol=0.0,
    )


@dataclass(frozen=True)
class CumulantProfile:
    """Solved cumulant constants for one admissible model."""

    model: Model
    lambda_star: float
    lambda_zero: float
    lambda_max: float

    @classmethod
    def from_model(cls, model: Model) -> "CumulantProfile":
        lam_star = solve_cramer_root(model)
        lam_zero = _solve_lambda_zero(model)
        _, hi = domain(model)
        return cls(model=model, lambda_star=lam_star, lambda_zero=lam_zero, lambda_max=hi)

    def psi(self, lam: float) -> float:
        return psi(self.model, lam)

    def psi_prime(self, lam: float) -> float:
        return psi_prime(self.model, lam)

    def psi_second(self, lam: float) -> float:
        return psi_second(self.model, lam)

    @property
    def drift_at_star(self) -> float:
        """psi'(lam_star): drift of the conditioned-to-succeed trajectory."""
        return psi_prime(self.model, self.lambda_star)


def _lambda_for_slope(profile: CumulantProfile, s: float) -> float:
    """lambda with psi'(lambda) = s, over the full finite domain."""
    model = profile.model
    lo, hi = domain(model)
    lo_eff = lo + 1e-9 if math.isfinite(lo) else None
    hi_eff = hi - 1e-9 if math.isfinite(hi) else None

    f = lambda u: psi_prime(model, u) - s

    # lower end of the bracket: walk left until f < 0
    if f(0.0) < 0.0:
        a = 0.0
    else:
        a = -1.0 if lo_eff is None else max(lo_eff, -1.0)
        step = 1.0
        while f(a) >= 0.0:
            if lo_eff is not None and a <= lo_eff:
                raise DriftOutOfRange(f"target drift {s} below the range of psi'")
            a = a - step if lo_eff is None else max(lo_eff, a - step)
            step *= 2.0
            if step > 1e18:
                raise DriftOutOfRange(f"target drift {s} below the range of psi'")
    # upper end: walk right until f > 0
    if f(a) >= 0.0:
        raise DriftOutOfRange(f"target drift {s} below the range of psi'")
    b = a + 1.0 if hi_eff is None else hi_eff
    if hi_eff is None:
        step = 1.0
        while f(b) <= 0.0:
            b += step
            step *= 2.0
            if step > 1e18:
                raise DriftOutOfRange(f"target drift {s} above the range of psi'")
    elif f(b) <= 0.0:
        raise DriftOutOfRange(
            f"target drift {s} exceeds sup psi' = {psi_prime(model, b):g}"
        )
    return _solve_increasing_root(
        f, lambda u: psi_second(model, u), a, b, f_tol=0.0
    )


def solve_lambda_for_drift(profile: CumulantProfile, target_drift: float) -> float:
    """lambda in (lambda_zero, lambda_max) with psi'(lambda) = target_drift > 0.

    A budget line B(x) = C x corresponds to target_drift = 1/C: the tilted
    process with this drift reaches x right at the budget.
    """
    if not target_drift > 0.0:
        raise DriftOutOfRange(f"target drift must be positive, got {target_drift}")
    lam = _lambda_for_slope(profile, target_drift)
    if abs(psi_prime(profile.model, lam) - target_drift) > 1e-10 * max(1.0, target_drift):
        raise ConvergenceError("drift inversion did not reach tolerance")
    return lam


def legendre(profile: CumulantProfile, s: float) -> float:
    """Convex conjugate zeta[s] = sup_lam {lam s - psi(lam)}.

    For s in the range of psi' the supremum is attained at lam_s with
    psi'(lam_s) = s, so zeta[s] = lam_s s - psi(lam_s).
    """
    lam_s = _lambda_for_slope(profile, s)
    return lam_s * s - psi(profile.model, lam_s)


def optimal_particles(profile: CumulantProfile, budget_slope: float) -> int:
    """Largest N with N / C < psi'(lam_star), i.e. ceil(psi'(lam_star) C) - 1.

    Exact integer ratios (within relative 1e-9, to absorb float noise in the
    solved lam_star) fall under the strict inequality, so a ratio of exactly
    40 yields 39.  Budgets at or below the single-particle threshold give 1.
    """
    if not budget_slope > 0.0:
        raise DomainError(f"budget slope must be positive, got {budget_slope}")
    ratio = profile.drift_at_star * budget_slope
    nearest = round(ratio)
    if abs(ratio - nearest) <= 1e-9 * max(1.0, abs(ratio)):
        ratio = float(nearest)
    if ratio <= 1.0:
        return 1
    return max(1, math.ceil(ratio) - 1)


def tilt(model: Model, lam: float) -> Model:
    """Exponentially tilted model of the same family.

    The tilted exponent satisfies psi_tilted(u) = psi(lam + u) - psi(lam).
    TwoPoint: p -> p e^lam / (p e^lam + (1-p) e^-lam).
    Normal:   mean -> mean + lam var.
    Levy:     drift_mu -> drift_mu - lam sigma^2, jump measure reweighted by
    e^{lam y}: (r, alpha) -> (r alpha/(alpha-lam), alpha-lam) and
    (s, beta) -> (s beta/(beta+lam), beta+lam).
    """
    _check_domain(model, lam)
    if lam == 0.0:
        return model
    if isinstance(model, TwoPointLaw):
        p, q = model.p, 1.0 - model.p
        if lam >= 0.0:
            return TwoPointLaw(p=1.0 / (1.0 + (q / p) * math.exp(-2.0 * lam)))
        t = (p / q) * math.exp(2.0 * lam)
        return TwoPointLaw(p=t / (1.0 + t))
    if isinstance(model, NormalLaw):
        return NormalLaw(
            mean_step=model.mean_step + lam * model.var_step,
            var_step=model.var_step,
        )
    m = model
    kwargs: dict[str, float] = {"drift_mu": m.drift_mu - lam * m.sigma**2}
    if m.pos_rate > 0.0:
        kwargs["pos_rate"] = m.pos_rate * m.pos_jump_rate / (m.pos_jump_rate - lam)
        kwargs["pos_jump_rate"] = m.pos_jump_rate - lam
    if m.neg_rate > 0.0:
        kwargs["neg_rate"] = m.neg_rate * m.neg_jump_rate / (m.neg_jump_rate + lam)
        kwargs["neg_jump_rate"] = m.neg_jump_rate + lam
    return replace(m, **kwargs)
