"""Departure-epoch solution: boundary vectors and joint distribution of queue
content and departing batch size.

Unknowns are ``psi+(0) .. psi+(b-1)``.  The queue-length transform satisfies
``Psi+(z) (z^b I - A^(b)(z)) = V(z)`` with ``V`` linear in the unknowns; its
analyticity at the ``mb - 1`` inside roots other than 1 gives the boundary
equations and the total mass fixes the scale.  The batch-size-``b`` column is
then inverted by a partial-fraction expansion over the exterior poles.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from math import comb
from typing import List, Optional, Tuple

import numpy as np
from numpy.polynomial import polynomial as npoly

from .bmap import BmapModel, recursion_C, recursion_M, recursion_Q, tau
from .errors import (NegativeSolutionError, NullSpaceDimensionError,
                     ResidueInstability)
from .kernel import CharPoly, KernelFamily, _group_points, mp_eval
from .service import ServicePolicy

CLAMP_TOL = 1e-8
REMOTE_FACTOR = 8.0


@dataclass
class SolverContext:
    """Everything that depends only on the model and the policy."""

    model: BmapModel
    policy: ServicePolicy
    family: KernelFamily
    C: np.ndarray = field(init=False, repr=False)
    M: np.ndarray = field(init=False, repr=False)
    Q: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        a, b = self.policy.a, self.policy.b
        self.C = recursion_C(self.model, a, b)
        self.M = recursion_M(self.model, a)
        self.Q = recursion_Q(self.model, a)

    @classmethod
    def build(cls, model, policy, series_method="auto"):
        return cls(model, policy, KernelFamily(model, policy, series_method))

    @property
    def a(self):
        return self.policy.a

    @property
    def b(self):
        return self.policy.b

    @property
    def m(self):
        return self.model.m

    def overshoot(self, n: int, z) -> np.ndarray:
        """``sum_{l > b} C_{l,n} z^l``: an idle period started at level ``n``
        ending with more than ``b`` waiting customers."""
        z = np.asarray(z, dtype=complex)
        out = np.zeros(z.shape + (self.m, self.m), dtype=complex)
        for j in range(n, self.a):
            t = tau(self.model, self.b + 1 - j, z)
            if np.any(t):
                out = out + self.Q[j - n] @ (t * z[..., None, None] ** j)
        return out

    def kernels(self, z) -> dict:
        return {r: self.family.eval(r, z) for r in self.policy.sizes}


@dataclass
class BoundaryVectors:
    psi_plus: np.ndarray          # (b, m)
    total_mass: float             # mass before scaling, for diagnostics
    singular_values: np.ndarray
    residual: float


@dataclass
class TailModel:
    """Closed form of the size-``b`` column ``F+(z) = sum_n pi+(n, b) z^n``.

    ``groups`` holds ``(pole, multiplicity, eta)`` with ``eta[j - 1]`` the
    coefficient vector of ``(pole - z)^{-j}``; ``eps`` is the polynomial part.
    """

    groups: List[Tuple[complex, int, np.ndarray]]
    eps: np.ndarray

    def coefficients(self, n) -> np.ndarray:
        n = np.atleast_1d(np.asarray(n))
        m = self.eps.shape[1]
        out = np.zeros((len(n), m), dtype=complex)
        k = n < self.eps.shape[0]
        out[k] += self.eps[n[k]]
        for beta, delta, eta in self.groups:
            for j in range(1, delta + 1):
                binom = np.array([comb(int(v) + j - 1, j - 1) for v in n], dtype=float)
                # log form: beta ** -n goes through 1 / beta ** n and overflows for far poles
                out += np.outer(binom * np.exp(-(n + j) * np.log(complex(beta))), eta[j - 1])
        return out.real

    def evaluate(self, z) -> np.ndarray:
        z = complex(z)
        out = npoly.polyval(z, self.eps).astype(complex) if len(self.eps) else 0
        out = np.array(out, dtype=complex).reshape(-1)
        for beta, delta, eta in self.groups:
            for j in range(1, delta + 1):
                out = out + eta[j - 1] * (beta - z) ** (-j)
        return out

    def total(self) -> np.ndarray:
        """``F+(1)``, the exact column sums."""
        return self.evaluate(1.0).real

    def first_moment(self) -> np.ndarray:
        """``F+'(1) = sum_n n pi+(n, b)``."""
        out = np.zeros(self.eps.shape[1], dtype=complex)
        if self.eps.shape[0] > 1:
            out += (self.eps[1:] * np.arange(1, self.eps.shape[0])[:, None]).sum(axis=0)
        for beta, delta, eta in self.groups:
            for j in range(1, delta + 1):
                out += eta[j - 1] * j * (beta - 1.0) ** (-j - 1)
        return out.real

    def decay_ratio(self) -> float:
        if not self.groups:
            return 0.0
        return 1.0 / min(abs(g[0]) for g in self.groups)

    def scaled(self, c: float) -> "TailModel":
        return TailModel([(p, d, e * c) for p, d, e in self.groups], self.eps * c)


@dataclass
class DepartureDistribution:
    """``pi_plus[n, r - a]`` for 0 <= n <= nmax, plus exact totals and the
    size-``b`` tail model."""

    a: int
    b: int
    pi_plus: np.ndarray           # (nmax + 1, b - a + 1, m)
    phi_plus: np.ndarray          # (b - a + 1, m) exact column totals
    first_moment: np.ndarray      # (b - a + 1, m) exact sum_n n pi+(n, r)
    tail: TailModel
    boundary: BoundaryVectors
    starts: np.ndarray            # c_r for r < b: (b - a, m)
    nmax: int                     # rows beyond nmax (b of them) are padding

    def table(self) -> np.ndarray:
        """``pi+(n, r)`` for n <= nmax without the padding rows."""
        return self.pi_plus[:self.nmax + 1]

    @property
    def psi_plus(self) -> np.ndarray:
        """Queue-length marginal ``psi+(n)`` for n <= nmax."""
        return self.pi_plus.sum(axis=1)

    def psi_total(self) -> np.ndarray:
        return self.phi_plus.sum(axis=0)

    def tail_mass(self) -> float:
        """Departure-epoch mass beyond ``nmax``."""
        return float(self.phi_plus.sum() - self.table().sum())


# -- boundary equations -------------------------------------------------------

def numerator_operator(ctx: SolverContext, z) -> np.ndarray:
    """Linear map from the unknowns to ``V(z)``.

    Returns ``B`` with shape ``z.shape + (b, m, m)`` such that
    ``V(z) = sum_n psi+(n) B[..., n, :, :]``.
    """
    a, b, m = ctx.a, ctx.b, ctx.m
    z = np.asarray(z, dtype=complex)
    A = ctx.kernels(z)
    Ab = A[b]
    zz = z[..., None, None]
    B = np.zeros(z.shape + (b, m, m), dtype=complex)
    for n in range(a):
        acc = np.zeros(z.shape + (m, m), dtype=complex)
        for j in range(a, b + 1):
            acc = acc + ctx.C[j - a, n] @ A[j]
        acc = zz ** b * acc
        acc = acc + (ctx.overshoot(n, z) - zz ** n * np.eye(m)) @ Ab
        B[..., n, :, :] = acc
    for n in range(a, b):
        B[..., n, :, :] = zz ** b * A[n] - zz ** n * Ab
    return B


def numerator_vector(ctx: SolverContext, z, psi: np.ndarray) -> np.ndarray:
    """``V(z)`` for given unknowns ``psi`` of shape ``(b, m)``."""
    B = numerator_operator(ctx, z)
    return np.einsum("nk,...nkl->...l", psi, B)


def boundary_equations(ctx: SolverContext, charpoly: CharPoly) -> np.ndarray:
    """Real ``(mb - 1) x mb`` matrix of the homogeneous boundary system.

    A root of multiplicity ``k`` contributes one condition per vector of its
    ``k``-dimensional null space."""
    rows = []
    Mp = charpoly.matrix_poly
    done = []
    for zi, k in _group_points(charpoly.inside_roots, 1e-6):
        if abs(zi - 1.0) < 1e-12:
            continue
        if any(abs(zi.conjugate() - w) < 1e-9 * max(1, abs(w)) for w in done):
            continue
        done.append(zi)
        _, _, vh = np.linalg.svd(mp_eval(Mp, zi))
        B = numerator_operator(ctx, zi)
        for u in vh[-k:].conj():
            row = np.einsum("nkl,l->nk", B, u).reshape(-1)
            row = row / np.linalg.norm(row)
            rows.append(row.real)
            if abs(zi.imag) > 1e-12 * max(1.0, abs(zi)):
                rows.append(row.imag)
    return np.array(rows).reshape(len(rows), ctx.m * ctx.b)


def solve_boundary(ctx: SolverContext, charpoly: CharPoly,
                   poles: Optional[list] = None) -> BoundaryVectors:
    """Solve the homogeneous boundary system and normalise the total
    departure-epoch mass to one."""
    E = boundary_equations(ctx, charpoly)
    mb = ctx.m * ctx.b
    if E.shape[0] != mb - 1:
        raise NullSpaceDimensionError(f"assembled {E.shape[0]} equations, expected {mb - 1}")
    if E.shape[0]:
        _, s, vh = np.linalg.svd(E)
        x = vh[-1]
    else:
        s, x = np.zeros(0), np.ones(1)
    # the (mb-1) x mb system always has a null vector; it must be unique
    if mb > 1 and s[-1] < 1e-10 * s[0]:
        raise NullSpaceDimensionError(
            f"boundary system has a null space of dimension > 1 (s_min={s[-1]:.3e})")
    if x.sum() < 0:
        x = -x
    psi = x.reshape(ctx.b, ctx.m)
    if poles is None:
        poles = exterior_poles(ctx, charpoly)
    total = total_mass(ctx, psi, charpoly, poles)
    psi = psi / total
    residual = float(np.max(np.abs(E @ psi.reshape(-1)))) if len(E) else 0.0
    if np.min(psi) < -CLAMP_TOL:
        raise NegativeSolutionError(f"boundary vector has entry {np.min(psi):.3e}")
    psi = np.where(psi < 0, 0.0, psi)
    return BoundaryVectors(psi, float(total), s, residual)


def starts(ctx: SolverContext, psi: np.ndarray) -> np.ndarray:
    """Row vectors ``c_r = sum_i psi+(i) C_{r,i} + psi+(r)`` for a <= r < b:
    phase at the start of a size-``r`` service, per departure."""
    a, b = ctx.a, ctx.b
    out = np.zeros((b - a, ctx.m))
    for r in range(a, b):
        acc = psi[r].copy()
        for i in range(a):
            acc += psi[i] @ ctx.C[r - a, i]
        out[r - a] = acc
    return out


def size_b_numerator(ctx: SolverContext, psi: np.ndarray, z) -> np.ndarray:
    """Row vector ``w(z)`` with ``F+(z) = w(z) A^(b)(z) (z^b I - A^(b)(z))^{-1}``."""
    a, b, m = ctx.a, ctx.b, ctx.m
    z = np.asarray(z, dtype=complex)
    zz = z[..., None]
    w = np.zeros(z.shape + (m,), dtype=complex)
    for n in range(a):
        v = zz ** b * (psi[n] @ ctx.C[b - a, n])
        v = v + np.einsum("k,...kl->...l", psi[n], ctx.overshoot(n, z))
        w = w + v
    for n in range(b):
        w = w - zz ** n * psi[n]
    c = starts(ctx, psi)
    for r in range(a, b):
        w = w + np.einsum("k,...kl->...l", c[r - a], ctx.family.eval(r, z))
    return w


def size_b_transform(ctx: SolverContext, psi: np.ndarray, z) -> np.ndarray:
    """``F+(z)`` evaluated directly; valid away from the characteristic roots.

    Uses ``A (z^b I - A)^{-1} = z^b (z^b I - A)^{-1} - I`` with the kernel in
    factored form; power-form coefficients of ``chi`` lose accuracy far
    from the origin."""
    b, m = ctx.b, ctx.m
    z = np.asarray(z, dtype=complex)
    w = size_b_numerator(ctx, psi, z)
    G = (z[..., None, None] ** b) * np.eye(m) - ctx.family.eval(b, z)
    # x G = w  <=>  G^T x^T = w^T
    x = np.linalg.solve(np.swapaxes(G, -1, -2), w[..., None])[..., 0]
    return (z[..., None] ** b) * x - w


def exterior_poles(ctx: SolverContext, charpoly: CharPoly) -> List[Tuple[complex, int]]:
    """Candidate poles of ``F+``: exterior characteristic roots and the zeros
    of ``d^(r)`` for a <= r < b, merged within the cluster tolerance."""
    pts = [(z, k) for z, k in charpoly.outside_roots]
    for r in range(ctx.a, ctx.b):
        pts += [(z, k) for z, k in ctx.family.denominator_poles(r) if abs(z) > 1]
    # coincident candidates merge; multiplicities add (an upper bound on the order)
    expanded = [p for p, k in pts for _ in range(k)]
    return _group_points(expanded, 1e-6)


def _circle_radius(charpoly: CharPoly, poles) -> float:
    rmin = min((abs(p) for p, _ in poles), default=np.inf)
    rin = max(abs(z) for z in charpoly.inside_roots)
    if not np.isfinite(rmin):
        return 2.0
    return float(np.sqrt(rin * rmin)) if rin > 0 else 0.5 * rmin


def size_b_coefficients_fft(ctx: SolverContext, psi: np.ndarray, charpoly: CharPoly,
                            poles, nmax: int, npts: int = 2048) -> np.ndarray:
    """Taylor coefficients of ``F+`` by the trapezoidal Cauchy integral on a
    circle separating the inside roots from the exterior poles."""
    r0 = _circle_radius(charpoly, poles)
    n = max(npts, 1 << int(np.ceil(np.log2(2 * (nmax + 1)))))
    z = r0 * np.exp(2j * np.pi * np.arange(n) / n)
    vals = size_b_transform(ctx, psi, z)
    coef = np.fft.fft(vals, axis=0) / n
    k = np.arange(n)
    coef = coef * (r0 ** (-k.astype(float)))[:, None]
    return coef[:min(nmax + 1, n // 2)].real


def total_mass(ctx: SolverContext, psi: np.ndarray, charpoly: CharPoly, poles) -> float:
    """Total departure-epoch mass ``Psi+(1) e`` for (unnormalised) ``psi``."""
    c = starts(ctx, psi)
    coef = size_b_coefficients_fft(ctx, psi, charpoly, poles, nmax=1 << 12)
    return float(c.sum() + coef.sum())


# -- extraction ---------------------------------------------------------------

def extract_lt_b(ctx: SolverContext, psi: np.ndarray, nmax: int) -> np.ndarray:
    """``pi+(n, r) = c_r A^(r)_n`` for a <= r < b, shape (nmax+1, b-a, m)."""
    c = starts(ctx, psi)
    out = np.zeros((nmax + 1, ctx.b - ctx.a, ctx.m))
    for r in range(ctx.a, ctx.b):
        A = ctx.family.series(r, nmax)
        out[:, r - ctx.a] = np.einsum("k,nkl->nl", c[r - ctx.a], A)
    return out


def _pole_clusters(poles, inside, ratio: float = 0.03):
    """Merge poles much closer to each other than to anything else.

    Returns ``(centre, order, radius)``: the contour of radius ``radius``
    around ``centre`` encloses the cluster and nothing else."""
    pts = [complex(p) for p, _ in poles]
    mult = [int(k) for _, k in poles]
    allpts = pts + [complex(z) for z in inside]
    n = len(pts)
    parent = list(range(n))

    def find(i):
        while parent[i] != i:
            i = parent[i]
        return i

    if n:
        P = np.array(allpts)
        dist = np.abs(P[:n, None] - P[None, :])
        dist[np.arange(n), np.arange(n)] = np.inf
        order2 = np.argsort(dist, axis=1)[:, :2]
        # only a nearest neighbour can be much closer than everything else
        for i in range(n):
            j = int(order2[i, 0])
            second = dist[i, order2[i, 1]] if len(allpts) > 2 else np.inf
            if j < n and dist[i, j] < ratio * second:
                parent[find(i)] = find(j)
    members = {}
    for i in range(n):
        members.setdefault(find(i), []).append(i)
    out = []
    for idx in members.values():
        w = np.array([mult[i] for i in idx], dtype=float)
        centre = complex(np.dot(w, [pts[i] for i in idx]) / w.sum())
        far = [abs(centre - q) for k, q in enumerate(allpts) if k not in idx]
        rad = 0.4 * min(far) if far else 0.5 * abs(centre)
        out.append((centre, int(w.sum()), rad))
    return out


def _principal_part(ctx, psi, centre, order, rad, extra: int = 24):
    """Laurent coefficients ``c_{-1} .. c_{-J}`` of ``F+`` about ``centre``.

    ``J`` is chosen adaptively: terms are kept while their size on the
    contour stands above the round-off floor estimated from the highest
    computed coefficients."""
    jmax = order + extra
    npts = max(128, 4 * jmax)
    zc = centre + rad * np.exp(2j * np.pi * (np.arange(npts) + 0.5) / npts)
    F = size_b_transform(ctx, psi, zc)
    scale = float(np.max(np.abs(F)))
    u = np.exp(2j * np.pi * (np.arange(npts) + 0.5) / npts)[:, None]
    # coefficients of (z - centre)^{-j}, measured on the contour: c_{-j} / rad^j
    onc = np.array([np.mean(F * u ** j, axis=0) for j in range(1, jmax + 1)])
    size = np.max(np.abs(onc), axis=1) / scale if scale > 0 else np.zeros(jmax)
    floor = float(np.median(size[-10:]))
    if floor > 1e-6:
        raise ResidueInstability(f"transform too noisy near {centre:.6g} (floor {floor:.1e})")
    big = np.flatnonzero(size > max(1e-13, 100 * floor))
    J = max(order, int(big[-1]) + 1 if len(big) else 0)
    if J > jmax - 10:
        raise ResidueInstability(
            f"principal part at {centre:.6g} does not converge (order > {jmax - 10})")
    return onc[:J] * (rad ** np.arange(1, J + 1, dtype=float))[:, None]


def extract_b(ctx: SolverContext, psi: np.ndarray, charpoly: CharPoly, poles) -> TailModel:
    """Partial-fraction model of ``F+(z)`` over the exterior poles.

    Each pole, or cluster of nearly coincident poles, contributes the
    principal part of its Laurent series about the centre, with
    coefficients from Cauchy integrals on a circle that encloses it alone.
    For an isolated simple pole this is ``-Res``; for a cluster or a pole
    known to limited accuracy the series carries a few fast-decaying extra
    terms, and no residue ever has to be resolved at the scale of the
    pole separation.  The polynomial part is what remains after
    subtracting all principal parts; poles beyond ``REMOTE_FACTOR`` times
    the remainder circle are left in it.
    """
    r0 = _circle_radius(charpoly, poles)
    # remote poles only touch the first few coefficients; the remainder's
    # Taylor series absorbs them
    near = [(p, k) for p, k in poles if abs(p) <= REMOTE_FACTOR * r0]
    obstacles = list(charpoly.inside_roots) + [p for p, _ in poles if abs(p) > REMOTE_FACTOR * r0]
    groups = []
    for centre, order, rad in _pole_clusters(near, obstacles):
        c = _principal_part(ctx, psi, centre, order, rad)
        # c_{-j} (z - centre)^{-j} = (-1)^j c_{-j} (centre - z)^{-j}
        eta = c * ((-1.0) ** np.arange(1, len(c) + 1))[:, None]
        groups.append((centre, len(c), eta))

    partial = TailModel(groups, np.zeros((0, ctx.m)))
    n = 512
    z = r0 * np.exp(2j * np.pi * np.arange(n) / n)
    rest = size_b_transform(ctx, psi, z)
    for beta, delta, eta in groups:
        for j in range(1, delta + 1):
            rest = rest - np.outer((beta - z) ** (-j), eta[j - 1])
    coef = np.fft.fft(rest, axis=0) / n * (r0 ** (-np.arange(n, dtype=float)))[:, None]
    coef = coef[:n // 2]
    ref = max(1e-300, float(np.max(np.abs(psi))))
    keep = np.flatnonzero(np.max(np.abs(coef), axis=1) > 1e-13 * ref)
    top = int(keep[-1]) + 1 if len(keep) else 0
    if top > n // 4:
        raise ResidueInstability("remainder after partial fractions is not a polynomial")
    partial.eps = coef[:top]
    return partial


def solve_departure(ctx: SolverContext, charpoly: CharPoly, nmax: Optional[int] = None,
                    tail_tol: float = 1e-12, nmax_cap: Optional[int] = None,
                    rho: Optional[float] = None) -> DepartureDistribution:
    """Full departure-epoch solution.

    When ``nmax`` is None it is the smallest index whose remaining mass is
    below ``tail_tol`` (bounded by ``nmax_cap``); ``b`` extra rows are always
    kept because the arbitrary-epoch recursion reads ``psi+(n + b)``.
    """
    a, b, m = ctx.a, ctx.b, ctx.m
    poles = exterior_poles(ctx, charpoly)
    boundary = solve_boundary(ctx, charpoly, poles)
    psi = boundary.psi_plus
    tail = extract_b(ctx, psi, charpoly, poles)
    c = starts(ctx, psi)

    phi = np.zeros((b - a + 1, m))
    phi[:b - a] = c
    phi[b - a] = tail.total()

    if nmax_cap is None:
        r = 0.0 if rho is None else min(rho, 0.999)
        nmax_cap = int(max(200, 100 * b / (1 - r)))
    if nmax is None:
        nmax = _choose_nmax(ctx, c, tail, tail_tol, nmax_cap)
    rows = nmax + b + 1
    pi = np.zeros((rows, b - a + 1, m))
    pi[:, :b - a] = extract_lt_b(ctx, psi, rows - 1)
    pi[:, b - a] = tail.coefficients(np.arange(rows))
    if np.min(pi) < -CLAMP_TOL:
        raise NegativeSolutionError(f"departure probability {np.min(pi):.3e}")
    pi = np.where(pi < 0, 0.0, pi)

    moment = np.zeros((b - a + 1, m))
    for r in range(a, b):
        moment[r - a] = c[r - a] @ kernel_first_moment(ctx, r)
    moment[b - a] = tail.first_moment()
    return DepartureDistribution(a, b, pi, phi, moment, tail, boundary, c, nmax)


def kernel_first_moment(ctx: SolverContext, r: int, h: float = 1e-3) -> np.ndarray:
    """``A^(r)'(1)`` by a centred Cauchy difference on a small circle."""
    npts = 64
    z = 1.0 + h * np.exp(2j * np.pi * np.arange(npts) / npts)
    A = ctx.family.eval(r, z)
    return np.mean(A * (z - 1.0)[:, None, None] ** -1, axis=0).real


def _choose_nmax(ctx, c, tail, tail_tol, cap):
    a, b = ctx.a, ctx.b
    n = 64
    while True:
        n = min(n, cap)
        remaining = tail.total().sum() - tail.coefficients(np.arange(n + 1)).sum()
        for r in range(a, b):
            A = ctx.family.series(r, n)
            remaining += c[r - a].sum() - (c[r - a] @ A.sum(axis=0)).sum()
        if remaining < tail_tol or n >= cap:
            return n
        n *= 2


def marginals(dist: DepartureDistribution):
    """``(psi+(n) for n <= nmax, phi+(r))`` with exact column totals."""
    return dist.psi_plus, dist.phi_plus
