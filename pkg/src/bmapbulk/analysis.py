"""One-call analytic solution of a model."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

from .bmap import BmapModel, StationaryArrivalSummary, stationary_summary
from .epochs import (EpochDistribution, NormalizationScalars,
                     compute_omega_estar, to_arbitrary, to_pre_arrival)
from .errors import RootCountError, UnstableSystemError
from .kernel import CharPoly, char_poly
from .measures import PerformanceReport, build_report, stability_check
from .service import ServicePolicy
from .solver import DepartureDistribution, SolverContext, solve_departure


@dataclass
class Solution:
    model: BmapModel
    policy: ServicePolicy
    summary: StationaryArrivalSummary
    charpoly: CharPoly
    departure: DepartureDistribution
    scalars: NormalizationScalars
    arbitrary: EpochDistribution
    prearrival: EpochDistribution
    report: PerformanceReport


def solve(model: BmapModel, policy: ServicePolicy, nmax: Optional[int] = None,
          tail_tol: float = 1e-12, series_method: str = "auto") -> Solution:
    """Departure, arbitrary and pre-arrival distributions plus measures.

    ``nmax`` fixes the last reported queue length; by default it is chosen so
    that the departure-epoch mass beyond it is below ``tail_tol``.
    """
    rho = stability_check(model, policy)
    summary = stationary_summary(model)
    ctx = SolverContext.build(model, policy, series_method)
    try:
        cp = char_poly(ctx.family, rho=rho)
    except RootCountError as exc:
        if exc.unstable:
            raise UnstableSystemError(str(exc)) from exc
        raise
    dep = solve_departure(ctx, cp, nmax=nmax, tail_tol=tail_tol, rho=rho)
    scalars = compute_omega_estar(ctx, dep)
    arb = to_arbitrary(ctx, dep, scalars)
    pre = to_pre_arrival(model, arb, summary.lambda_g)
    report = build_report(model, policy, arb)
    return Solution(model, policy, summary, cp, dep, scalars, arb, pre, report)
