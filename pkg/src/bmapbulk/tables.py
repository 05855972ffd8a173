"""Tabular output: departure, arbitrary and pre-arrival tables, measures
panel and the analytic/simulated comparison."""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np

from .analysis import Solution
from .epochs import EpochDistribution
from .simulation import SimEstimate


@dataclass
class Table:
    title: str
    header: List[str]
    rows: List[List[Optional[float]]]      # first entry of each row is n
    total: Optional[List[Optional[float]]] = None
    footer: List[str] = field(default_factory=list)

    def column(self, label: str) -> np.ndarray:
        j = self.header.index(label)
        return np.array([np.nan if r[j] is None else r[j] for r in self.rows], dtype=float)

    def to_text(self, precision: int = 6) -> str:
        cells = [self.header] + [_fmt_row(r, precision) for r in self.rows]
        if self.total is not None:
            cells.append(["Total"] + _fmt_row(self.total, precision)[1:])
        widths = [max(len(row[j]) for row in cells) for j in range(len(self.header))]
        lines = [self.title]
        for i, row in enumerate(cells):
            lines.append("  ".join(c.rjust(w) for c, w in zip(row, widths)))
            if i == 0 or (self.total is not None and i == len(cells) - 2):
                lines.append("-" * (sum(widths) + 2 * (len(widths) - 1)))
        lines.extend(self.footer)
        return "\n".join(lines) + "\n"

    def to_csv(self, precision: int = 6) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.header)
        for r in self.rows:
            w.writerow(_fmt_row(r, precision))
        if self.total is not None:
            w.writerow(["Total"] + _fmt_row(self.total, precision)[1:])
        return buf.getvalue()


def _fmt_row(row, precision):
    out = []
    for j, v in enumerate(row):
        if v is None:
            out.append("")
        elif isinstance(v, str):
            out.append(v)
        elif j == 0 and float(v).is_integer():
            out.append(str(int(v)))
        else:
            out.append(f"{v:.{precision}f}")
    return out


def _select(nmax: int, rows: Optional[Sequence[int]]) -> List[int]:
    if rows is None:
        return list(range(nmax + 1))
    return [n for n in rows if 0 <= n <= nmax]


def departure_table(sol: Solution, rows: Optional[Sequence[int]] = None) -> Table:
    dep = sol.departure
    a, b, m = dep.a, dep.b, sol.model.m
    header = ["n"] + [f"pi+_{i + 1}(n,{r})" for r in range(a, b + 1) for i in range(m)] + ["psi+(n)e"]
    body = []
    for n in _select(dep.nmax, rows):
        vals = dep.pi_plus[n].reshape(-1).tolist()
        body.append([n] + vals + [float(dep.pi_plus[n].sum())])
    tab = dep.table()
    total = [None] + tab.sum(axis=0).reshape(-1).tolist() + [float(tab.sum())]
    return Table(f"Departure epoch ({sol.policy.a},{sol.policy.b})", header, body, total)


def _epoch_table(dist: EpochDistribution, m: int, title: str, sym: str,
                 rows: Optional[Sequence[int]]) -> Table:
    a, b = dist.a, dist.b
    header = (["n"] + [f"{sym[0]}_{i + 1}(n,0)" for i in range(m)]
              + [f"{sym[1]}_{i + 1}(n,{r})" for r in range(a, b + 1) for i in range(m)]
              + ["p_queue(n)"])
    queue = dist.queue_distribution()
    body = []
    for n in _select(dist.nmax, rows):
        idle = dist.idle[n].tolist() if n < a else [None] * m
        body.append([n] + idle + dist.busy[n].reshape(-1).tolist() + [float(queue[n])])
    total = ([None] + dist.idle.sum(axis=0).tolist()
             + dist.busy.sum(axis=0).reshape(-1).tolist() + [float(queue.sum())])
    return Table(title, header, body, total)


def arbitrary_table(sol: Solution, rows: Optional[Sequence[int]] = None) -> Table:
    t = _epoch_table(sol.arbitrary, sol.model.m,
                     f"Arbitrary epoch ({sol.policy.a},{sol.policy.b})", ("p", "pi"), rows)
    t.footer = measures_panel(sol)
    return t


def prearrival_table(sol: Solution, rows: Optional[Sequence[int]] = None) -> Table:
    return _epoch_table(sol.prearrival, sol.model.m,
                        f"Pre-arrival epoch ({sol.policy.a},{sol.policy.b})", ("p-", "pi-"), rows)


def measures_panel(sol: Solution, precision: int = 6) -> List[str]:
    r = sol.report
    f = f".{precision}f"
    return [f"L={r.L:{f}}  L_q={r.L_q:{f}}  L_s={r.L_s:{f}}",
            f"P_idle={r.P_idle:{f}}  W={r.W:{f}}  W_q={r.W_q:{f}}"]


def comparison_table(sol: Solution, est: SimEstimate) -> Table:
    rep = sol.report.as_dict()
    header = ["measure", "analytic", "simulated", "half_width", "z"]
    body = []
    for name in ("L", "L_q", "L_s", "P_idle", "W", "W_q"):
        v = rep[name]
        body.append([name, v, est.point[name], est.halfwidth[name], est.z_score(name, v)])
    v = 1.0 / sol.scalars.E_star
    body.append(["departure_rate", v, est.point["departure_rate"],
                 est.halfwidth["departure_rate"], est.z_score("departure_rate", v)])
    level = int(round(est.config.level * 100))
    return Table(f"Analytic vs simulation ({est.config.replications} replications, "
                 f"{level}% half-widths)", header, body)
