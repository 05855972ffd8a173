"""Service-time laws with rational Laplace-Stieltjes transforms.

Each law stores its transform as ``P(theta) / Q(theta)`` with coefficients in
ascending powers of ``theta`` and ``Q(0) = 1``.  Phase-type laws are exact;
deterministic laws are rationalised with a Pade approximant of ``exp(-theta
tau)``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from math import factorial
from typing import Dict, Optional, Tuple

import numpy as np
from numpy.polynomial import polynomial as npoly
from scipy import stats

from .errors import (DegenerateApproximant, InvalidModelError,
                     InvalidSubGenerator, PoleEvaluation)

DEFAULT_PADE = (6, 7)


@dataclass(frozen=True, eq=False)
class ServiceLaw:
    kind: str
    lst_num: np.ndarray
    lst_den: np.ndarray
    mean: float
    beta: Optional[np.ndarray] = None
    T: Optional[np.ndarray] = None
    duration: Optional[float] = None
    pade_order: Optional[Tuple[int, int]] = None

    def lst(self, theta):
        return lst_eval(self, theta)

    @property
    def poles(self) -> np.ndarray:
        return npoly.polyroots(self.lst_den) if len(self.lst_den) > 1 else np.array([])

    def describe(self) -> str:
        if self.kind == "ph":
            return f"PH(order={len(self.beta)}, mean={self.mean:.6g})"
        k, l = self.pade_order
        return f"D(tau={self.duration:.6g}, pade=({k},{l}))"


@dataclass(frozen=True)
class ServicePolicy:
    """General bulk service ``(a, b)`` rule with one law per batch size."""

    a: int
    b: int
    laws: Dict[int, ServiceLaw] = field(repr=False)

    def __post_init__(self):
        if not (isinstance(self.a, (int, np.integer)) and 1 <= self.a <= self.b):
            raise InvalidModelError(f"need integers 1 <= a <= b, got a={self.a}, b={self.b}")
        missing = [r for r in range(self.a, self.b + 1) if r not in self.laws]
        if missing:
            raise InvalidModelError(f"no service law for batch sizes {missing}")

    @property
    def sizes(self) -> range:
        return range(self.a, self.b + 1)

    def law(self, r: int) -> ServiceLaw:
        return self.laws[r]

    def mean(self, r: int) -> float:
        return self.laws[r].mean


def make_phase_type(beta, T, scale: float = 1.0) -> ServiceLaw:
    """Phase-type law with initial vector ``beta`` and sub-generator
    ``scale * T``.  Any defect ``1 - beta e`` is an atom at zero."""
    beta = np.atleast_1d(np.asarray(beta, dtype=float))
    T = np.atleast_2d(np.asarray(T, dtype=float)) * float(scale)
    nu = len(beta)
    if T.shape != (nu, nu):
        raise InvalidSubGenerator(f"T has shape {T.shape}, beta has length {nu}")
    if np.any(beta < 0) or beta.sum() > 1 + 1e-12:
        raise InvalidSubGenerator("beta must be a (sub-)probability vector")
    d = np.diag(T)
    if np.any(d >= 0):
        raise InvalidSubGenerator("T must have a strictly negative diagonal")
    if np.any(T - np.diag(d) < 0):
        raise InvalidSubGenerator("T must have nonnegative off-diagonal entries")
    exit_rates = -T.sum(axis=1)
    if np.any(exit_rates < -1e-12) or not np.any(exit_rates > 0):
        raise InvalidSubGenerator("T e must be <= 0 with at least one strict row")
    try:
        neg_inv = np.linalg.inv(-T)
    except np.linalg.LinAlgError as exc:
        raise InvalidSubGenerator("T is singular") from exc

    char, adj = _faddeev_leverrier(T)
    t0 = np.clip(exit_rates, 0.0, None)
    atom = 1.0 - beta.sum()
    num = np.array([beta @ adj[i] @ t0 for i in range(nu)])
    num = npoly.polyadd(num, atom * char)
    num, den = _normalise(num, char)
    mean = float(beta @ neg_inv @ np.ones(nu))
    return ServiceLaw("ph", num, den, mean, beta=beta, T=T)


def make_exponential(rate: float) -> ServiceLaw:
    return make_phase_type([1.0], [[-float(rate)]])


def make_deterministic(duration: float, pade_order=DEFAULT_PADE) -> ServiceLaw:
    """Constant service time rationalised by the Pade(k, l) approximant."""
    k, ell = (int(v) for v in pade_order)
    if duration <= 0:
        raise InvalidModelError("deterministic service time must be positive")
    if not 0 <= k < ell:
        raise InvalidModelError(f"Pade order needs 0 <= k < l, got ({k}, {ell})")
    num, den = pade_exp_coefficients(k, ell)
    powers = duration ** np.arange(max(k, ell) + 1)
    num = num * powers[:k + 1]
    den = den * powers[:ell + 1]
    num, den = _normalise(num, den)
    roots = npoly.polyroots(den)
    if np.any(roots.real >= 0):
        raise DegenerateApproximant(
            f"Pade({k},{ell}) denominator has a root in the right half-plane")
    # -d/dtheta (P/Q) at 0 with P(0) = Q(0) = 1
    mean = float(den[1] - num[1]) if len(num) > 1 else float(den[1])
    return ServiceLaw("deterministic", num, den, mean, duration=float(duration),
                      pade_order=(k, ell))


def pade_exp_coefficients(k: int, ell: int) -> Tuple[np.ndarray, np.ndarray]:
    """Ascending coefficients of the Pade(k, l) approximant of ``exp(-x)``."""
    n = k + ell
    num = np.array([factorial(n - j) * factorial(k)
                    / (factorial(n) * factorial(j) * factorial(k - j)) * (-1) ** j
                    for j in range(k + 1)])
    den = np.array([factorial(n - j) * factorial(ell)
                    / (factorial(n) * factorial(j) * factorial(ell - j))
                    for j in range(ell + 1)])
    return num, den


def lst_eval(law: ServiceLaw, theta):
    """``P(theta) / Q(theta)``; raises :class:`PoleEvaluation` at a pole."""
    theta = np.asarray(theta, dtype=complex if np.iscomplexobj(theta) else float)
    q = npoly.polyval(theta, law.lst_den)
    if np.any(np.abs(q) < 1e-300):
        raise PoleEvaluation(f"transform evaluated at a pole: theta={theta}")
    out = npoly.polyval(theta, law.lst_num) / q
    return out if out.ndim else out.item()


def uniformization_weights(law: ServiceLaw, rate: float, tail: float = 1e-14) -> np.ndarray:
    """Mixing weights ``g_k = int exp(-rate t) (rate t)^k / k! dS(t)``.

    Computed from the exact law (no Pade step) and truncated once the
    remaining mass is below ``tail``.
    """
    if law.kind == "deterministic":
        mu = rate * law.duration
        kmax = int(stats.poisson.isf(tail, mu)) + 2 if mu > 0 else 0
        return stats.poisson.pmf(np.arange(kmax + 1), mu)
    beta, T = law.beta, law.T
    nu = len(beta)
    solve = np.linalg.inv(rate * np.eye(nu) - T)
    y = solve @ (-T.sum(axis=1))
    out = [float(beta @ y) + (1.0 - beta.sum())]
    mass = out[0]
    step = rate * solve
    while 1.0 - mass > tail and len(out) < 1_000_000:
        y = step @ y
        g = float(beta @ y)
        out.append(g)
        mass += g
        if g == 0.0:
            break
    return np.asarray(out)


def _faddeev_leverrier(A):
    """Characteristic polynomial det(xI - A) (ascending) and the
    coefficient matrices of adj(xI - A) by ascending power."""
    n = A.shape[0]
    c = np.zeros(n + 1)
    c[n] = 1.0
    Mk = np.zeros_like(A)
    mats = []
    eye = np.eye(n)
    for k in range(1, n + 1):
        Mk = A @ Mk + c[n - k + 1] * eye
        mats.append(Mk)
        c[n - k] = -np.trace(A @ Mk) / k
    # adj(xI - A) = sum_{k=1}^{n} M_k x^{n-k}
    adj = [mats[n - 1 - i] for i in range(n)]
    return c, adj


def _normalise(num, den):
    num = np.trim_zeros(np.asarray(num, dtype=float), "b")
    den = np.trim_zeros(np.asarray(den, dtype=float), "b")
    if len(num) > len(den):
        raise InvalidModelError("transform numerator degree exceeds denominator degree")
    c = den[0]
    if len(num) == 0:
        num = np.zeros(1)
    return num / c, den / c
