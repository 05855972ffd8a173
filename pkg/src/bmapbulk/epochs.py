"""Departure-epoch to arbitrary- and pre-arrival-epoch conversion."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .bmap import BmapModel, stationary_summary, tail_dprime
from .errors import NegativeProbabilityError
from .service import ServicePolicy
from .solver import DepartureDistribution, SolverContext

CLAMP_TOL = 1e-8


@dataclass(frozen=True)
class NormalizationScalars:
    """``omega``: mean time busy per departure; ``E_star``: mean time between
    departures (busy plus idle)."""

    omega: float
    E_star: float


@dataclass
class EpochDistribution:
    """Joint distribution at one observation epoch.

    ``idle[n]`` is ``p(n, 0)`` for n < a and ``busy[n, r - a]`` is
    ``pi(n, r)``; both are row vectors over the arrival phase.
    ``busy_totals`` holds the exact mass of each batch size.
    """

    kind: str
    a: int
    b: int
    idle: np.ndarray              # (a, m)
    busy: np.ndarray              # (nmax + 1, b - a + 1, m)
    busy_totals: np.ndarray       # (b - a + 1,) exact column masses

    @property
    def nmax(self) -> int:
        return self.busy.shape[0] - 1

    def queue_distribution(self) -> np.ndarray:
        """``P(queue = n)`` for n <= nmax."""
        q = self.busy.sum(axis=(1, 2))
        q[:self.a] += self.idle.sum(axis=1)
        return q

    def system_distribution(self) -> np.ndarray:
        """``P(system = n)`` for n <= nmax + b."""
        out = np.zeros(self.nmax + self.b + 1)
        out[:self.a] += self.idle.sum(axis=1)
        col = self.busy.sum(axis=2)
        for k, r in enumerate(range(self.a, self.b + 1)):
            out[r:r + self.nmax + 1] += col[:, k]
        return out

    def total_mass(self) -> float:
        return float(self.idle.sum() + self.busy.sum())


def compute_omega_estar(ctx: SolverContext, dep: DepartureDistribution) -> NormalizationScalars:
    a, b, m = ctx.a, ctx.b, ctx.m
    model, policy = ctx.model, ctx.policy
    psi = dep.psi_plus
    e = np.ones(m)
    s = {r: policy.mean(r) for r in policy.sizes}
    dbar = model.dbar_all
    omega = 0.0
    for n in range(a):
        acc = sum(ctx.C[ell - a, n] * s[ell] for ell in range(a, b + 1))
        for j in range(n, a):
            # idle period overshooting b: the batch starts a size-b service
            if b + 1 - j <= model.K:
                acc = acc + s[b] * ctx.M[j, n] @ dbar[b + 1 - j:].sum(axis=0)
        omega += psi[n] @ acc @ e
    for n in range(a, b + 1):
        omega += s[n] * psi[n].sum()
    beyond = 1.0 - psi[:b + 1].sum()
    omega += s[b] * beyond
    idle = 0.0
    for n in range(a):
        for j in range(n + 1):
            idle += psi[j] @ ctx.M[n, j] @ model.neg_d0_inv @ e
    return NormalizationScalars(float(omega), float(omega + idle))


def clamp(x: np.ndarray, what: str = "probability") -> np.ndarray:
    """Zero out round-off negatives; anything below ``-CLAMP_TOL`` is an error."""
    low = float(np.min(x)) if np.size(x) else 0.0
    if low < -CLAMP_TOL:
        raise NegativeProbabilityError(f"{what} {low:.3e} below -{CLAMP_TOL:g}")
    return np.where(x < 0, 0.0, x)


def to_arbitrary(ctx: SolverContext, dep: DepartureDistribution,
                 scalars: NormalizationScalars = None) -> EpochDistribution:
    a, b, m = ctx.a, ctx.b, ctx.m
    model = ctx.model
    D = model.D
    K = model.K
    if scalars is None:
        scalars = compute_omega_estar(ctx, dep)
    E = scalars.E_star
    nmax = dep.nmax
    psi = dep.psi_plus                      # rows 0 .. nmax + b
    pi_plus = dep.pi_plus
    d0_inv = np.linalg.inv(D[0])

    def Dk(k):
        return D[k] if 0 <= k <= K else None

    idle = np.zeros((a, m))
    for n in range(a):
        acc = np.zeros(m)
        for j in range(n + 1):
            acc += psi[j] @ ctx.M[n, j]
        idle[n] = acc / E @ model.neg_d0_inv

    busy = np.zeros((nmax + 1, b - a + 1, m))
    for k, r in enumerate(range(a, b + 1)):
        rhs = (pi_plus[0, k] - psi[r]) / E
        for i in range(a):
            Dm = Dk(r - i)
            if Dm is not None and r - i >= 1:
                rhs = rhs - idle[i] @ Dm
        busy[0, k] = rhs @ d0_inv
        for n in range(1, nmax + 1):
            rhs = pi_plus[n, k] / E
            for i in range(1, min(n, K) + 1):
                rhs = rhs - busy[n - i, k] @ D[i]
            if r == b:
                rhs = rhs - psi[n + b] / E
                for i in range(a):
                    Dm = Dk(n + b - i)
                    if Dm is not None:
                        rhs = rhs - idle[i] @ Dm
            busy[n, k] = rhs @ d0_inv

    idle = clamp(idle, "idle probability")
    busy = clamp(busy, "busy probability")
    totals = np.array([ctx.policy.mean(r) * dep.phi_plus[k].sum() / E
                       for k, r in enumerate(range(a, b + 1))])
    return EpochDistribution("arbitrary", a, b, idle, busy, totals)


def to_pre_arrival(model: BmapModel, arb: EpochDistribution,
                   lambda_g: float = None) -> EpochDistribution:
    """Distribution seen by an arriving batch; the phase is the one entered
    with the arrival."""
    if lambda_g is None:
        lambda_g = stationary_summary(model).lambda_g
    Dp = tail_dprime(model, 1)
    idle = arb.idle @ Dp / lambda_g
    busy = arb.busy @ Dp / lambda_g
    totals = busy.sum(axis=(0, 2))
    return EpochDistribution("prearrival", arb.a, arb.b, idle, busy, totals)
