"""Batch Markovian arrival process: validation, stationary quantities and
the level-crossing recursions used by the queue solver.

A BMAP with ``m`` phases and maximum batch size ``K`` is stored as a single
array ``D`` of shape ``(K + 1, m, m)`` holding ``D_0, ..., D_K``.  Batch sizes
that are not listed are zero matrices.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Mapping, Sequence, Union

import numpy as np
from scipy.sparse.csgraph import connected_components

from .errors import (GeneratorRowSumError, InvalidModelError, ReducibleError,
                     SignPatternError, SingularSolveError)

ROW_SUM_TOL = 1e-12

MatrixSet = Union[Sequence, Mapping[int, object], np.ndarray]


@dataclass(frozen=True, eq=False)
class BmapModel:
    """Validated BMAP.  Build it with :func:`validate_bmap`."""

    D: np.ndarray

    @property
    def m(self) -> int:
        return self.D.shape[1]

    @property
    def K(self) -> int:
        return self.D.shape[0] - 1

    @property
    def D0(self) -> np.ndarray:
        return self.D[0]

    @cached_property
    def generator(self) -> np.ndarray:
        return self.D.sum(axis=0)

    @cached_property
    def neg_d0_inv(self) -> np.ndarray:
        """``(-D_0)^{-1}``; entrywise nonnegative."""
        return np.linalg.inv(-self.D[0])

    @cached_property
    def dbar_all(self) -> np.ndarray:
        """``Dbar_k = (-D_0)^{-1} D_k`` for k = 0..K (index 0 is unused)."""
        out = np.einsum("ij,kjl->kil", self.neg_d0_inv, self.D)
        out[0] = 0.0
        return out

    def __repr__(self):
        return f"BmapModel(m={self.m}, K={self.K})"


@dataclass(frozen=True)
class StationaryArrivalSummary:
    pi_bar: np.ndarray
    lambda_star: float
    lambda_g: float


def validate_bmap(matrices: MatrixSet, tol: float = ROW_SUM_TOL) -> BmapModel:
    """Check the BMAP invariants and return a :class:`BmapModel`.

    ``matrices`` is either a sequence ``[D_0, D_1, ...]`` or a mapping
    ``{k: D_k}`` (missing batch sizes are zero).  All violated invariants are
    listed in the message of the raised exception, whose type is that of the
    first violation found.
    """
    D = _stack(matrices)
    K = D.shape[0] - 1
    m = D.shape[1]
    if K < 1:
        raise InvalidModelError("need D_0 and at least one D_k with k >= 1")

    problems = []
    D0 = D[0]
    diag = np.diag(D0)
    if np.any(diag >= 0):
        bad = np.flatnonzero(diag >= 0).tolist()
        problems.append((SignPatternError,
                         f"D_0 diagonal must be strictly negative (rows {bad})"))
    off = D0 - np.diag(diag)
    if np.any(off < 0):
        problems.append((SignPatternError,
                         "D_0 off-diagonal entries must be nonnegative"))
    for k in range(1, K + 1):
        if np.any(D[k] < 0):
            problems.append((SignPatternError,
                             f"D_{k} must be entrywise nonnegative"))
    if not np.any(D[1:] > 0):
        problems.append((InvalidModelError, "no arrivals: all D_k (k>=1) vanish"))

    gen = D.sum(axis=0)
    scale = max(1.0, float(np.max(np.abs(D))))
    rows = gen.sum(axis=1)
    if np.any(np.abs(rows) > tol * scale):
        problems.append((GeneratorRowSumError,
                         f"rows of sum(D_k) must sum to 0, got {rows.tolist()}"))

    pattern = (np.abs(gen - np.diag(np.diag(gen))) > 0).astype(int)
    if m > 1:
        ncomp, _ = connected_components(pattern, directed=True, connection="strong")
        if ncomp != 1:
            problems.append((ReducibleError,
                             f"sum(D_k) is reducible ({ncomp} communicating classes)"))

    if problems:
        kind = problems[0][0]
        raise kind("; ".join(msg for _, msg in problems))
    D.setflags(write=False)
    return BmapModel(D)


def _stack(matrices: MatrixSet) -> np.ndarray:
    if isinstance(matrices, Mapping):
        items = {int(k): np.atleast_2d(np.asarray(v, dtype=float))
                 for k, v in matrices.items()}
        if 0 not in items:
            raise InvalidModelError("D_0 is required")
        K = max(items)
        m = items[0].shape[0]
        D = np.zeros((K + 1, m, m))
        for k, v in items.items():
            if k < 0:
                raise InvalidModelError(f"negative batch size {k}")
            D[k] = _square(v, m, k)
        return _trim(D)
    arr = [np.atleast_2d(np.asarray(v, dtype=float)) for v in matrices]
    if not arr:
        raise InvalidModelError("no matrices supplied")
    m = arr[0].shape[0]
    return _trim(np.stack([_square(v, m, k) for k, v in enumerate(arr)]))


def _square(v, m, k):
    if v.shape != (m, m):
        raise InvalidModelError(f"D_{k} has shape {v.shape}, expected {(m, m)}")
    return v


def _trim(D):
    K = D.shape[0] - 1
    while K > 1 and not np.any(D[K]):
        K -= 1
    return D[:K + 1].copy()


def stationary_summary(model: BmapModel) -> StationaryArrivalSummary:
    """Stationary phase vector, customer arrival rate and batch arrival rate."""
    gen = model.generator
    A = gen.copy()
    A[:, -1] = 1.0
    rhs = np.zeros(model.m)
    rhs[-1] = 1.0
    if np.linalg.cond(A) > 1e12:
        raise SingularSolveError("stationary equations are numerically singular")
    pi = np.linalg.solve(A.T, rhs)
    e = np.ones(model.m)
    k = np.arange(model.K + 1)
    lam_star = float(pi @ np.einsum("k,kij->ij", k, model.D) @ e)
    lam_g = float(pi @ tail_dprime(model, 1) @ e)
    return StationaryArrivalSummary(pi, lam_star, lam_g)


def d_of_z(model: BmapModel, z):
    """Evaluate ``D(z) = sum_k D_k z^k``.

    A scalar ``z`` gives an ``(m, m)`` matrix, an array of shape ``s`` gives
    shape ``s + (m, m)``.
    """
    z = np.asarray(z)
    powers = z[..., None] ** np.arange(model.K + 1)
    return np.einsum("...k,kij->...ij", powers, model.D)


def dbar(model: BmapModel, k: int) -> np.ndarray:
    if k < 1:
        raise ValueError("dbar is defined for k >= 1")
    if k > model.K:
        return np.zeros((model.m, model.m))
    return model.dbar_all[k].copy()


def tail_dprime(model: BmapModel, n: int) -> np.ndarray:
    """``D'_n = sum_{k >= n} D_k`` (zero when n > K)."""
    if n < 1:
        raise ValueError("tail_dprime is defined for n >= 1")
    return model.D[n:].sum(axis=0) if n <= model.K else np.zeros((model.m, model.m))


def tau(model: BmapModel, j: int, z) -> np.ndarray:
    """``tau_j(z) = sum_{k >= j} Dbar_k z^k`` (finite sum, zero when j > K)."""
    j = max(j, 1)
    z = np.asarray(z)
    out = np.zeros(z.shape + (model.m, model.m), dtype=np.result_type(z, float))
    for k in range(j, model.K + 1):
        out = out + model.dbar_all[k] * (z[..., None, None] ** k)
    return out


def _dbar_ext(model: BmapModel, k: int) -> np.ndarray:
    return model.dbar_all[k] if 1 <= k <= model.K else np.zeros((model.m, model.m))


def recursion_C(model: BmapModel, a: int, b: int) -> np.ndarray:
    """First-passage matrices ``C[l - a, n]`` for a <= l <= b, 0 <= n <= a-1.

    ``psi C_{l,n}`` is the phase vector at the moment an idle server that
    started with ``n`` waiting customers first sees exactly ``l`` of them.
    """
    if not 1 <= a <= b:
        raise ValueError("need 1 <= a <= b")
    m = model.m
    C = np.zeros((b - a + 1, a, m, m))
    for li, ell in enumerate(range(a, b + 1)):
        C[li, a - 1] = _dbar_ext(model, ell - a + 1)
        for n in range(a - 2, -1, -1):
            acc = _dbar_ext(model, ell - n).copy()
            for j in range(n + 1, a):
                acc += _dbar_ext(model, j - n) @ C[li, j]
            C[li, n] = acc
    return C


def recursion_M(model: BmapModel, a: int) -> np.ndarray:
    """Visit matrices ``M[n, i]`` for 0 <= i <= n <= a-1 (zero above)."""
    m = model.m
    M = np.zeros((a, a, m, m))
    eye = np.eye(m)
    for n in range(a):
        M[n, n] = eye
        if n >= 1:
            M[n, n - 1] = _dbar_ext(model, 1)
        for i in range(n - 2, -1, -1):
            acc = _dbar_ext(model, n - i).copy()
            for j in range(i + 1, n):
                acc += M[n, j] @ _dbar_ext(model, j - i)
            M[n, i] = acc
    return M


def recursion_Q(model: BmapModel, a: int) -> np.ndarray:
    """``Q_0 .. Q_{a-1}`` with ``Q_0 = I`` and ``Q_n = sum_{j<n} Q_j Dbar_{n-j}``."""
    m = model.m
    Q = np.zeros((max(a, 1), m, m))
    Q[0] = np.eye(m)
    for n in range(1, a):
        acc = _dbar_ext(model, n).copy()
        for j in range(1, n):
            acc += Q[j] @ _dbar_ext(model, n - j)
        Q[n] = acc
    return Q
