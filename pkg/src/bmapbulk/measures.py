"""Performance measures and the stability check."""
from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .bmap import BmapModel, stationary_summary
from .epochs import EpochDistribution
from .errors import UnstableSystemError
from .service import ServicePolicy


@dataclass(frozen=True)
class PerformanceReport:
    L: float
    L_q: float
    L_s: float
    P_idle: float
    P_busy: float
    W: float
    W_q: float
    rho: float
    lambda_star: float
    lambda_g: float

    def as_dict(self) -> dict:
        return asdict(self)


def traffic_intensity(model: BmapModel, policy: ServicePolicy) -> float:
    """``rho = lambda* s_b / b``: load offered to full batches."""
    lam = stationary_summary(model).lambda_star
    return lam * policy.mean(policy.b) / policy.b


def stability_check(model: BmapModel, policy: ServicePolicy) -> float:
    """Return ``rho``; raise :class:`UnstableSystemError` when ``rho >= 1``."""
    rho = traffic_intensity(model, policy)
    if not rho < 1.0:
        raise UnstableSystemError(f"traffic intensity rho={rho:.6g} >= 1")
    return rho


def build_report(model: BmapModel, policy: ServicePolicy,
                 arb: EpochDistribution) -> PerformanceReport:
    summary = stationary_summary(model)
    a, b = policy.a, policy.b
    n = np.arange(arb.nmax + 1)
    idle_mass = arb.idle.sum(axis=1)
    col = arb.busy.sum(axis=2)              # (nmax + 1, b - a + 1)
    sizes = np.arange(a, b + 1)

    P_idle = float(idle_mass.sum())
    P_busy = float(col.sum())
    idle_q = float(np.arange(a) @ idle_mass)
    L_q = idle_q + float(n @ col.sum(axis=1))
    L = L_q + float(col.sum(axis=0) @ sizes)
    L_s = float(col.sum(axis=0) @ sizes) / P_busy if P_busy > 0 else 0.0
    lam = summary.lambda_star
    return PerformanceReport(
        L=L, L_q=L_q, L_s=L_s, P_idle=P_idle, P_busy=P_busy,
        W=L / lam, W_q=L_q / lam,
        rho=lam * policy.mean(b) / b,
        lambda_star=lam, lambda_g=summary.lambda_g,
    )
