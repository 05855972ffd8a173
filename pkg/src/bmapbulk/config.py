"""JSON model specifications and built-in example models.

A specification looks like::

    {
      "name": "example",
      "arrival": {"matrices": [{"k": 0, "values": [[-1.0]]},
                               {"k": 1, "values": [[1.0]]}]},
      "service": {"a": 2, "b": 4,
                  "law": {"kind": "ph", "beta": [1.0], "T": [[-1.0]],
                          "rule": "mu_r = r*mu", "mu": 0.5}},
      "solver": {"nmax": null, "tail_tol": 1e-12, "pade_order": [6, 7]},
      "sim": {"departures": 125000, "replications": 10, "seed": 1}
    }

``service.law`` is a template applied to every batch size; ``service.laws``
maps individual sizes to explicit laws and takes precedence.  A phase-type
template has its ``T`` multiplied by ``mu_r``; a deterministic template
lasts ``1 / mu_r``.  Explicit laws give ``T`` or ``duration`` directly.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Optional, Tuple, Union

import numpy as np

from .bmap import BmapModel, validate_bmap
from .errors import InvalidModelError
from .service import (DEFAULT_PADE, ServiceLaw, ServicePolicy,
                      make_deterministic, make_phase_type)
from .simulation import SimConfig

RATE_RULES = {
    "mu_r = r*mu": lambda r, mu: r * mu,
    "mu_r = mu/r": lambda r, mu: mu / r,
    "mu_r = mu": lambda r, mu: mu,
}


@dataclass
class SolverOptions:
    nmax: Optional[int] = None
    tail_tol: float = 1e-12
    pade_order: Tuple[int, int] = DEFAULT_PADE
    series_method: str = "auto"


@dataclass
class ModelSpec:
    name: str
    model: BmapModel
    policy: ServicePolicy
    solver: SolverOptions = field(default_factory=SolverOptions)
    sim: SimConfig = field(default_factory=SimConfig)


class SpecError(InvalidModelError):
    """Malformed specification; the message names the offending key."""


def load_spec(source: Union[str, Path, dict]) -> ModelSpec:
    """Parse a specification from a path, a JSON string or a dict."""
    if isinstance(source, dict):
        data = source
    else:
        text = source
        p = Path(source) if isinstance(source, Path) or not str(source).lstrip().startswith("{") else None
        if p is not None:
            try:
                text = p.read_text()
            except OSError as exc:
                raise SpecError(f"cannot read {p}: {exc}") from exc
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise SpecError(f"line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc
    return parse_spec(data)


def parse_spec(data: Dict[str, Any]) -> ModelSpec:
    if not isinstance(data, dict):
        raise SpecError("top level must be an object")
    model = _parse_arrival(_get(data, "arrival", dict))
    solver = _parse_solver(data.get("solver", {}))
    policy = _parse_service(_get(data, "service", dict), solver.pade_order)
    sim = _parse_sim(data.get("sim", {}))
    return ModelSpec(str(data.get("name", "model")), model, policy, solver, sim)


def _get(d, key, typ, where=""):
    if key not in d:
        raise SpecError(f"missing key '{where}{key}'")
    v = d[key]
    if typ is not None and not isinstance(v, typ):
        raise SpecError(f"'{where}{key}' must be of type {typ.__name__}")
    return v


def _parse_arrival(arr) -> BmapModel:
    mats = _get(arr, "matrices", list, "arrival.")
    out = {}
    for i, item in enumerate(mats):
        where = f"arrival.matrices[{i}]."
        if not isinstance(item, dict):
            raise SpecError(f"'arrival.matrices[{i}]' must be an object")
        k = _get(item, "k", int, where)
        vals = np.asarray(_get(item, "values", list, where), dtype=float)
        if vals.ndim == 1:
            m = int(round(np.sqrt(vals.size)))
            if m * m != vals.size:
                raise SpecError(f"'{where}values' is not a square matrix")
            vals = vals.reshape(m, m)
        if k in out:
            raise SpecError(f"duplicate batch size k={k} in arrival.matrices")
        out[k] = vals
    return validate_bmap(out)


def _make_law(spec: dict, r: int, pade, where: str) -> ServiceLaw:
    kind = _get(spec, "kind", str, where)
    rule = spec.get("rule")
    rate = None
    if rule is not None:
        if rule not in RATE_RULES:
            raise SpecError(f"'{where}rule' must be one of {sorted(RATE_RULES)}")
        rate = RATE_RULES[rule](r, float(_get(spec, "mu", (int, float), where)))
    if kind == "ph":
        beta = _get(spec, "beta", list, where)
        T = _get(spec, "T", list, where)
        return make_phase_type(beta, T, scale=rate if rate is not None else 1.0)
    if kind in ("exponential", "exp"):
        if rate is None:
            rate = float(_get(spec, "rate", (int, float), where))
        return make_phase_type([1.0], [[-rate]])
    if kind == "deterministic":
        order = tuple(spec.get("pade_order", pade))
        if rate is not None:
            return make_deterministic(1.0 / rate, order)
        return make_deterministic(float(_get(spec, "duration", (int, float), where)), order)
    raise SpecError(f"'{where}kind' must be 'ph', 'exponential' or 'deterministic'")


def _parse_service(svc, pade) -> ServicePolicy:
    a = _get(svc, "a", int, "service.")
    b = _get(svc, "b", int, "service.")
    if not 1 <= a <= b:
        raise SpecError(f"service needs 1 <= a <= b, got a={a}, b={b}")
    explicit = svc.get("laws", {})
    template = svc.get("law")
    laws = {}
    for r in range(a, b + 1):
        if str(r) in explicit:
            laws[r] = _make_law(explicit[str(r)], r, pade, f"service.laws.{r}.")
        elif template is not None:
            laws[r] = _make_law(template, r, pade, "service.law.")
        else:
            raise SpecError(f"no service law for batch size {r} (give 'service.law' or 'service.laws')")
    return ServicePolicy(a, b, laws)


def _parse_solver(sv) -> SolverOptions:
    opts = SolverOptions()
    if "nmax" in sv and sv["nmax"] is not None:
        opts.nmax = int(sv["nmax"])
    if "tail_tol" in sv:
        opts.tail_tol = float(sv["tail_tol"])
    if "pade_order" in sv:
        opts.pade_order = tuple(int(v) for v in sv["pade_order"])
    if "series_method" in sv:
        opts.series_method = str(sv["series_method"])
    return opts


def _parse_sim(sm) -> SimConfig:
    allowed = set(SimConfig.__dataclass_fields__)
    bad = set(sm) - allowed
    if bad:
        raise SpecError(f"unknown sim keys {sorted(bad)}")
    return SimConfig(**sm)


# -- built-in examples ------------------------------------------------------------

EXAMPLE1 = {
    "name": "example1",
    "arrival": {"matrices": [
        {"k": 0, "values": [[-0.542410, 0.003728, 0.000000],
                            [0.004349, -0.022989, 0.000621],
                            [0.000000, 0.001243, -0.269670]]},
        {"k": 1, "values": [[0.010252, 0.000000, 0.259089],
                            [0.000000, 0.008698, 0.000311],
                            [0.129554, 0.002485, 0.002175]]},
        {"k": 3, "values": [[0.010252, 0.000000, 0.259089],
                            [0.000002, 0.008698, 0.000310],
                            [0.129553, 0.002485, 0.002175]]},
    ]},
    "service": {"a": 7, "b": 13,
                "law": {"kind": "ph", "beta": [0.2, 0.8], "T": [[-1.0, 1.0], [0.0, -1.0]],
                        "rule": "mu_r = r*mu", "mu": 0.035}},
    "solver": {"tail_tol": 1e-12},
    "sim": {"departures": 125000, "replications": 10, "seed": 11},
}

EXAMPLE2 = {
    "name": "example2",
    "arrival": {"matrices": [
        {"k": 0, "values": [[-6.9375, 0.9375], [0.0625, -0.1958]]},
        {"k": 1, "values": [[5.4, 0.0], [0.0, 0.11997]]},
        {"k": 5, "values": [[0.6, 0.0], [0.0, 0.01333]]},
    ]},
    "service": {"a": 4, "b": 7,
                "law": {"kind": "deterministic", "rule": "mu_r = mu/r", "mu": 7.0}},
    "solver": {"tail_tol": 1e-12, "pade_order": [6, 7]},
    "sim": {"departures": 125000, "replications": 10, "seed": 12},
}


def mm1_spec(lam: float = 0.5, mu: float = 1.0) -> dict:
    return {
        "name": "mm1",
        "arrival": {"matrices": [{"k": 0, "values": [[-lam]]}, {"k": 1, "values": [[lam]]}]},
        "service": {"a": 1, "b": 1, "law": {"kind": "exponential", "rate": mu}},
    }


def example(name: str) -> ModelSpec:
    specs = {"example1": EXAMPLE1, "example2": EXAMPLE2, "mm1": mm1_spec()}
    if name not in specs:
        raise KeyError(f"unknown example {name!r}; choose from {sorted(specs)}")
    return parse_spec(specs[name])
