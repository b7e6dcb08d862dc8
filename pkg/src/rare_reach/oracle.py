"""Brute-force ground truth used to verify every stochastic estimator.

Nothing here is Monte Carlo: dense dynamic programming for lattice passage
probabilities, gambler's-ruin and scale-function closed forms, power
iteration for quasi-stationary eigenproblems, and adaptive Simpson
quadrature.  These routines are deliberately independent of the simulation
code paths they are used to check.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .cumulant import TwoPointLaw
from .errors import ConvergenceError, SizeError, ToleranceNotMet

__all__ = [
    "DpTable",
    "exact_walk_passage",
    "exact_walk_exit",
    "QsdEigenResult",
    "qsd_eigen",
    "quadrature",
    "brownian_passage_cdf",
    "brownian_exit_up",
]

_DP_ENTRY_CAP = 10_000_000


@dataclass(frozen=True)
class DpTable:
    """Exact lattice first-passage table for a TwoPoint walk started at 0.

    ``passage[s]`` is P(tau(x) <= s) for s = 0..max_time; ``occupation`` is
    the interior position distribution at the final time (positions
    ``-max_time .. x-1`` in order), i.e. the mass that has not yet crossed.
    """

    barrier: int
    max_time: int
    passage: np.ndarray
    occupation: np.ndarray

    def prob(self, s: int | None = None) -> float:
        return float(self.passage[self.max_time if s is None else s])


def exact_walk_passage(law: TwoPointLaw, x: int, t: int) -> DpTable:
    """Forward DP for P(tau(x) <= s), s = 0..t, with absorption at x."""
    if x < 1 or t < 0:
        raise SizeError(f"need x >= 1 and t >= 0, got x={x}, t={t}")
    if x * max(t, 1) > _DP_ENTRY_CAP:
        raise SizeError(f"dense DP cap exceeded: x*t = {x * t} > {_DP_ENTRY_CAP}")
    p = law.p
    q = 1.0 - p
    width = x + t  # positions -t .. x-1, index pos + t
    occ = np.zeros(width, dtype=float)
    occ[t] = 1.0  # start at position 0
    passage = np.zeros(t + 1, dtype=float)
    absorbed = 0.0
    for s in range(1, t + 1):
        new = np.zeros_like(occ)
        new[1:] += p * occ[:-1]  # up-steps; occ[-1]'s up-mass crosses the barrier
        new[:-1] += q * occ[1:]  # down-steps; occ[0] is vacant until the last step
        absorbed += p * occ[-1]
        occ = new
        passage[s] = absorbed
    return DpTable(barrier=x, max_time=t, passage=passage, occupation=occ)


def exact_walk_exit(law: TwoPointLaw, y0: int, x: int) -> tuple[float, float]:
    """(P(exit through x before 0), mean exit time) for a walk started at y0.

    The upper-exit probability is the gambler's-ruin closed form with
    r = (1-p)/p; the mean time solves the standard tridiagonal system
    m(y) = 1 + p m(y+1) + (1-p) m(y-1), m(0) = m(x) = 0.
    """
    if not 0 < y0 < x:
        raise SizeError(f"need 0 < y0 < x, got y0={y0}, x={x}")
    p = law.p
    q = 1.0 - p
    if abs(p - q) < 1e-15:
        q_up = y0 / x
    else:
        r = q / p
        q_up = -math.expm1(y0 * math.log(r)) / -math.expm1(x * math.log(r))
    n = x - 1  # interior states 1..x-1
    a = np.zeros((n, n))
    rhs = np.ones(n)
    for i in range(n):
        a[i, i] = 1.0
        if i + 1 < n:
            a[i, i + 1] = -p
        if i - 1 >= 0:
            a[i, i - 1] = -q
    mean_times = np.linalg.solve(a, rhs)
    return q_up, float(mean_times[y0 - 1])


@dataclass(frozen=True)
class QsdEigenResult:
    nu: np.ndarray
    decay_rate: float
    eigenvalue: float
    residual: float


def qsd_eigen(
    kernel: np.ndarray,
    *,
    continuous_time: bool = False,
    tol: float = 1e-12,
    max_iter: int = 500_000,
) -> QsdEigenResult:
    """Principal left eigenvector of a killed kernel, by power iteration.

    Discrete time: ``kernel`` is sub-stochastic; returns nu with
    nu K = theta nu and decay_rate = -log(theta).  Continuous time:
    ``kernel`` is a killed generator (off-diagonal >= 0, row sums <= 0);
    the iteration runs on the uniformization I + Q/c and decay_rate is the
    absorption rate c (1 - theta).
    """
    k = np.asarray(kernel, dtype=float)
    if k.ndim != 2 or k.shape[0] != k.shape[1]:
        raise SizeError(f"kernel must be square, got shape {k.shape}")
    if continuous_time:
        c = float(np.max(np.abs(np.diag(k)))) + 1.0
        step = np.eye(k.shape[0]) + k / c
    else:
        # damping keeps periodic chains (e.g. birth-death) from oscillating;
        # eigenvectors are unchanged and theta maps through (1 + theta) / 2
        step = 0.5 * (np.eye(k.shape[0]) + k)
    nu = np.full(k.shape[0], 1.0 / k.shape[0])
    theta_step = 1.0
    for _ in range(max_iter):
        nxt = nu @ step
        theta_step = float(nxt.sum())
        if theta_step <= 0.0:
            raise ConvergenceError("kernel killed all mass; no QSD on this support")
        nxt /= theta_step
        if float(np.max(np.abs(nxt - nu))) <= tol:
            nu = nxt
            break
        nu = nxt
    else:
        raise ConvergenceError(f"power iteration did not converge in {max_iter} steps")
    if continuous_time:
        theta_step = float((nu @ step).sum())
        decay = c * (1.0 - theta_step)
        eig = -decay
        residual = float(np.max(np.abs(nu @ k - eig * nu)))
    else:
        theta = 2.0 * float((nu @ step).sum()) - 1.0
        if theta <= 0.0:
            raise ConvergenceError("principal eigenvalue is not positive")
        decay = -math.log(theta)
        eig = theta
        residual = float(np.max(np.abs(nu @ k - theta * nu)))
    return QsdEigenResult(nu=nu, decay_rate=decay, eigenvalue=eig, residual=residual)


def _simpson(f, a: float, fa: float, b: float, fb: float) -> tuple[float, float, float]:
    m = 0.5 * (a + b)
    fm = f(m)
    return m, fm, (b - a) / 6.0 * (fa + 4.0 * fm + fb)


def quadrature(
    f, a: float, b: float, tol: float, *, max_depth: int = 60, panels: int = 16
) -> float:
    """Adaptive Simpson integral of f on [a, b] with absolute error <= tol.

    The interval is pre-split into equal panels before adapting, so sharply
    localized integrands cannot fool the first coarse probe into returning
    zero with a zero error estimate.
    """
    if not tol > 0.0:
        raise ToleranceNotMet(f"tolerance must be positive, got {tol}")
    edges = np.linspace(a, b, panels + 1)
    stack = []
    for lo, hi in zip(edges[:-1], edges[1:]):
        flo, fhi = f(lo), f(hi)
        m, fm, whole = _simpson(f, lo, flo, hi, fhi)
        stack.append((lo, flo, hi, fhi, m, fm, whole, tol / panels, 0))
    total = 0.0
    while stack:
        a0, fa0, b0, fb0, m0, fm0, whole0, tol0, depth = stack.pop()
        lm, flm, left = _simpson(f, a0, fa0, m0, fm0)
        rm, frm, right = _simpson(f, m0, fm0, b0, fb0)
        delta = left + right - whole0
        if abs(delta) <= 15.0 * tol0:
            total += left + right + delta / 15.0
            continue
        if depth >= max_depth:
            raise ToleranceNotMet(
                f"adaptive Simpson hit depth {max_depth} on [{a0}, {b0}]"
            )
        stack.append((a0, fa0, m0, fm0, lm, flm, left, 0.5 * tol0, depth + 1))
        stack.append((m0, fm0, b0, fb0, rm, frm, right, 0.5 * tol0, depth + 1))
    return total


def brownian_passage_cdf(mu: float, x: float, t: float, sigma: float = 1.0) -> float:
    """P(tau(x) <= t) for Z(t) = -mu t + sigma W(t), closed form."""
    if t <= 0.0:
        return 0.0
    sd = sigma * math.sqrt(t)
    phi = lambda z: 0.5 * math.erfc(-z / math.sqrt(2.0))
    return phi((-x - mu * t) / sd) + math.exp(-2.0 * mu * x / sigma**2) * phi(
        (-x + mu * t) / sd
    )


def brownian_exit_up(mu: float, y0: float, x: float, sigma: float = 1.0) -> float:
    """P(hit x before 0 | start y0) for drift -mu: scale-function form."""
    theta = 2.0 * mu / sigma**2
    if abs(theta) < 1e-14:
        return y0 / x
    return math.expm1(theta * y0) / math.expm1(theta * x)
