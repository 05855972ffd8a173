"""Internal consistency checks on a solved model."""
from __future__ import annotations

from dataclasses import dataclass
from typing import List

import numpy as np

from .analysis import Solution


@dataclass(frozen=True)
class Check:
    name: str
    value: float
    tol: float

    @property
    def ok(self) -> bool:
        return bool(np.isfinite(self.value) and self.value <= self.tol)

    def line(self) -> str:
        status = "PASS" if self.ok else "FAIL"
        return f"[{status}] {self.name}: {self.value:.3e} (tol {self.tol:.0e})"


def identity_checks(sol: Solution) -> List[Check]:
    dep, arb, pre, rep = sol.departure, sol.arbitrary, sol.prearrival, sol.report
    lam = sol.summary.lambda_star
    a, b = sol.policy.a, sol.policy.b
    out = [
        Check("departure mass", abs(dep.phi_plus.sum() - 1.0), 1e-9),
        Check("departure table mass", abs(dep.table().sum() - 1.0), 1e-9),
        Check("arbitrary mass", abs(arb.total_mass() - 1.0), 1e-9),
        Check("pre-arrival mass", abs(pre.total_mass() - 1.0), 1e-9),
        Check("W = L / lambda*", abs(rep.W * lam - rep.L) / max(1.0, rep.L), 1e-14),
        Check("W_q = L_q / lambda*", abs(rep.W_q * lam - rep.L_q) / max(1.0, rep.L_q), 1e-14),
        Check("L = L_q + P_busy L_s", abs(rep.L - rep.L_q - rep.P_busy * rep.L_s), 1e-8),
        Check("boundary vectors = extracted marginals",
              float(np.max(np.abs(dep.boundary.psi_plus - dep.psi_plus[:b]))), 1e-9),
        Check("busy mass per batch size",
              float(np.max(np.abs(arb.busy.sum(axis=(0, 2)) - arb.busy_totals))), 1e-9),
        Check("customer flow balance",
              abs(float(np.arange(a, b + 1) @ dep.phi_plus.sum(axis=1)) / sol.scalars.E_star - lam)
              / lam, 1e-8),
        Check("nonnegativity",
              max(0.0, -float(min(dep.pi_plus.min(), arb.busy.min(), arb.idle.min(),
                                  pre.busy.min(), pre.idle.min()))), 1e-12),
    ]
    return out
