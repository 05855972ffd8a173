"""Service-period kernels ``A^(r)(z)`` and the characteristic roots of
``det(z^b I - A^(b)(z))``.

With ``X(z) = -D(z)`` and a rational transform ``P_r / Q_r``, the kernel is
the matrix function ``A^(r)(z) = P_r(X(z)) Q_r(X(z))^{-1}``.  Both factors
are polynomials in the same matrix, so they commute with each other and with
every other kernel of the family.  Matrix polynomials in ``z`` are stored as
arrays of shape ``(degree + 1, m, m)`` in ascending powers.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np
from numpy.polynomial import polynomial as npoly
from scipy import linalg

from .bmap import BmapModel, d_of_z
from .errors import (DegenerateApproximant, DegreeMismatch, RootCountError, SingularDenominator,
                     TruncationError)
from .service import ServiceLaw, ServicePolicy, uniformization_weights

CLUSTER_TOL = 1e-6
UNIT_TOL = 1e-8


# -- matrix polynomial helpers ------------------------------------------------

def mp_mul(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    out = np.zeros((A.shape[0] + B.shape[0] - 1,) + A.shape[1:],
                   dtype=np.result_type(A, B))
    for i in range(A.shape[0]):
        out[i:i + B.shape[0]] += np.einsum("ij,kjl->kil", A[i], B)
    return out


def mp_add(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    n = max(A.shape[0], B.shape[0])
    out = np.zeros((n,) + A.shape[1:], dtype=np.result_type(A, B))
    out[:A.shape[0]] += A
    out[:B.shape[0]] += B
    return out


def mp_of_scalar_poly(coeffs: np.ndarray, X: np.ndarray) -> np.ndarray:
    """Matrix polynomial ``sum_j c_j X(z)^j`` by Horner's rule."""
    m = X.shape[1]
    eye = np.eye(m)[None]
    out = coeffs[-1] * eye
    for c in coeffs[-2::-1]:
        out = mp_add(mp_mul(out, X), c * eye)
    return out


def mp_eval(Mp: np.ndarray, z) -> np.ndarray:
    """Evaluate a matrix polynomial at scalar or array ``z``."""
    z = np.asarray(z)
    out = np.zeros(z.shape + Mp.shape[1:], dtype=np.result_type(z, Mp, float))
    for c in Mp[::-1]:
        out = out * z[..., None, None] + c
    return out


def mp_derivative(Mp: np.ndarray) -> np.ndarray:
    if Mp.shape[0] == 1:
        return np.zeros_like(Mp)
    return Mp[1:] * np.arange(1, Mp.shape[0])[:, None, None]


def mp_trim(Mp: np.ndarray, rel: float = 0.0) -> np.ndarray:
    scale = np.max(np.abs(Mp)) if Mp.size else 0.0
    n = Mp.shape[0]
    while n > 1 and np.max(np.abs(Mp[n - 1])) <= rel * scale:
        n -= 1
    return Mp[:n]


def matrix_polynomial_roots(Mp: np.ndarray) -> np.ndarray:
    """Finite roots of ``det(sum_k M_k z^k)`` from the block companion pencil.

    The variable is first scaled, ``z = s w`` with
    ``s = (|M_0| / |M_deg|)^(1/deg)``, so that the end coefficients balance;
    without it a tiny leading coefficient (high-order Pade denominators) gives
    wrong or missing far roots.
    """
    Mp = mp_trim(Mp)
    deg = Mp.shape[0] - 1
    m = Mp.shape[1]
    if deg == 0:
        return np.array([], dtype=complex)
    lo, hi = np.abs(Mp[0]).max(), np.abs(Mp[-1]).max()
    scale = (lo / hi) ** (1.0 / deg) if lo > 0 and hi > 0 else 1.0
    if scale != 1.0:
        Mp = Mp * (scale ** np.arange(deg + 1))[:, None, None]
    n = m * deg
    A = np.zeros((n, n), dtype=Mp.dtype)
    B = np.eye(n, dtype=Mp.dtype)
    A[:-m, m:] = np.eye(n - m)
    for k in range(deg):
        A[-m:, k * m:(k + 1) * m] = -Mp[k]
    B[-m:, -m:] = Mp[deg]
    w = linalg.eig(A, B, right=False, homogeneous_eigvals=True)
    alpha, beta = w
    finite = np.abs(beta) > 1e-13 * np.abs(alpha)
    return scale * alpha[finite] / beta[finite]


def polish_root(Mp: np.ndarray, z0: complex, steps: int = 8) -> complex:
    """Newton refinement of a simple root of ``det M(z)`` using
    ``(log det M)' = tr(M^{-1} M')``."""
    dM = mp_derivative(Mp)
    z = complex(z0)
    for _ in range(steps):
        Mz = mp_eval(Mp, z)
        try:
            g = np.trace(np.linalg.solve(Mz, mp_eval(dM, z)))
        except np.linalg.LinAlgError:
            break
        if not np.isfinite(g) or g == 0:
            break
        step = 1.0 / g
        if abs(step) > 1e-3 * max(1.0, abs(z)):
            break
        z -= step
        if abs(step) < 1e-16 * max(1.0, abs(z)):
            break
    return z


def _eigen_terms(family: "KernelFamily", z: complex) -> Tuple[np.ndarray, np.ndarray]:
    """``z^b q(lam_i)`` and ``p(lam_i)`` over the eigenvalues ``lam_i`` of
    ``X(z)``, where ``S~ = p / q``.

    All terms of the characteristic matrix are functions of ``X(z)``, so
    ``chi(z) ~ prod_i (z^b q(lam_i) - p(lam_i))``.  Unlike a matrix product
    this has no poles and keeps the small eigen-directions of a nearly
    singular ``X``.
    """
    law = family.policy.law(family.policy.b)
    lam = np.linalg.eigvals(-d_of_z(family.model, np.asarray(z, dtype=complex)))
    zb = complex(z) ** family.policy.b
    if law.T is not None:
        k = len(law.beta)
        t = -law.T.sum(axis=1)
        q = np.empty(len(lam), dtype=complex)
        p = np.empty(len(lam), dtype=complex)
        for i, x in enumerate(lam):
            R = x * np.eye(k) - law.T
            q[i] = np.linalg.det(R)
            p[i] = q[i] * (law.beta @ np.linalg.solve(R, t) + 1.0 - law.beta.sum())
        return zb * q, p
    gain, zeros, poles = _pole_zero_form(law)
    q = np.array([np.prod(x - poles) for x in lam])
    p = np.array([gain * np.prod(x - zeros) for x in lam])
    return zb * q, p


def root_residual(family: "KernelFamily", z: complex) -> float:
    """Scale-free residual ``min_i |u_i - v_i| / (|u_i| + |v_i|)``."""
    u, v = _eigen_terms(family, z)
    return float(np.min(np.abs(u - v) / (np.abs(u) + np.abs(v) + 1e-300)))


def refine_root(family: "KernelFamily", z0: complex, max_step: float,
                steps: int = 30) -> complex:
    """Newton steps on ``log prod_i (u_i - v_i)`` from :func:`_eigen_terms`,
    with the derivative as a central difference.  Steps are bounded by
    ``max_step`` so a root cannot jump to a neighbour; the result is kept only
    if its residual is lower."""
    z = complex(z0)

    def logchi(w):
        u, v = _eigen_terms(family, w)
        return np.sum(np.log(u - v))

    try:
        with np.errstate(divide="raise", invalid="raise"):
            res0 = root_residual(family, z)
            for _ in range(steps):
                h = 1e-7 * max(1.0, abs(z))
                diff = logchi(z + h) - logchi(z - h)
                # the log difference is only defined modulo 2 pi i
                g = np.log(np.exp(diff)) / (2 * h)
                if not np.isfinite(g) or g == 0:
                    break
                step = 1.0 / g
                if abs(step) > max_step:
                    break
                z -= step
                if abs(step) < 1e-14 * max(1.0, abs(z)):
                    break
            res = root_residual(family, z)
    except (np.linalg.LinAlgError, DegenerateApproximant, FloatingPointError):
        return complex(z0)
    return z if res < res0 else complex(z0)


# -- kernel family ------------------------------------------------------------

@dataclass
class KernelFamily:
    """Kernels ``A^(r)`` for every batch size of a policy.

    ``num[r]`` and ``den[r]`` are the matrix polynomials ``P_r(X(z))`` and
    ``Q_r(X(z))``; ``series_method`` selects how ``A^(r)_n`` are obtained
    (``"uniformization"`` from the exact law, ``"transform"`` from the
    rational transform, ``"auto"``: exact for PH, transform otherwise).
    """

    model: BmapModel
    policy: ServicePolicy
    series_method: str = "auto"
    num: Dict[int, np.ndarray] = field(init=False, repr=False)
    den: Dict[int, np.ndarray] = field(init=False, repr=False)
    _series: Dict[int, np.ndarray] = field(init=False, repr=False, default_factory=dict)

    def __post_init__(self):
        X = -self.model.D
        self.num = {}
        self.den = {}
        for r in self.policy.sizes:
            law = self.policy.law(r)
            self.num[r] = mp_of_scalar_poly(law.lst_num, X)
            self.den[r] = mp_of_scalar_poly(law.lst_den, X)

    def eval(self, r: int, z) -> np.ndarray:
        """``A^(r)(z)`` for scalar or array ``z``."""
        return kernel_eval(self.model, self.policy.law(r), z)

    def denominator_det(self, r: int, z):
        """The scalar denominator ``d^(r)(z) = det Q_r(X(z))``."""
        return np.linalg.det(mp_eval(self.den[r], z))

    def series(self, r: int, nmax: int, max_tail: Optional[float] = None) -> np.ndarray:
        cached = self._series.get(r)
        if cached is None or cached.shape[0] < nmax + 1:
            method = self.series_method
            if method == "auto":
                method = "uniformization" if self.policy.law(r).kind == "ph" else "transform"
            if method == "uniformization":
                coef, _ = kernel_series(self.model, self.policy.law(r), nmax, max_tail=None)
            else:
                coef = transform_series(self, r, nmax)
            self._series[r] = coef
            cached = coef
        out = cached[:nmax + 1]
        if max_tail is not None:
            tail = 1.0 - out.sum(axis=0).sum(axis=1).min()
            if tail > max_tail:
                raise TruncationError(f"A^({r}) tail mass {tail:.3e} beyond n={nmax}")
        return out

    def char_matrix_poly(self) -> np.ndarray:
        """``M(z) = z^b Q_b(X(z)) - P_b(X(z))``; ``det M = det(z^b I - A^(b)) d^(b)``."""
        b = self.policy.b
        shifted = np.concatenate([np.zeros((b,) + self.den[b].shape[1:]), self.den[b]])
        return mp_add(shifted, -self.num[b])

    def linearized_char_poly(self) -> np.ndarray:
        """Matrix polynomial ``L(z)`` of size ``(k + 1) m`` with
        ``det L(z) ~ chi(z)``:

            [ I x X(z) - F x I    g x I           ]
            [ c x I               (z^b - d) I     ]

        for a realization ``(F, g, c, d)`` of ``S~`` for batch size ``b``.
        The coefficients are the ``D_j`` themselves, so the roots are free of
        the rounding that power-form ``Q(X(z))`` accumulates for large ``|z|``.
        """
        b, m = self.policy.b, self.model.m
        F, g, c, d = state_space(self.policy.law(b))
        k = len(g)
        D = self.model.D
        deg = max(len(D) - 1, b)
        n = (k + 1) * m
        L = np.zeros((deg + 1, n, n), dtype=complex)
        for j, Dj in enumerate(D):
            L[j, :k * m, :k * m] = -np.kron(np.eye(k), Dj)
        L[0, :k * m, :k * m] -= np.kron(F, np.eye(m))
        L[0, :k * m, k * m:] = np.kron(g[:, None], np.eye(m))
        L[0, k * m:, :k * m] = np.kron(c[None, :], np.eye(m))
        L[0, k * m:, k * m:] = -d * np.eye(m)
        L[b, k * m:, k * m:] += np.eye(m)
        return L

    def denominator_poles(self, r: int) -> List[Tuple[complex, int]]:
        """Zeros of ``d^(r)(z)`` as ``(root, multiplicity)`` pairs.

        Each pole ``q`` of the transform contributes the zeros of
        ``det(-D(z) - q I)`` with the pole's multiplicity.
        """
        law = self.policy.law(r)
        out = []
        for q, mult in _group_points(law.poles, 1e-8):
            Mp = -self.model.D.astype(complex)
            Mp[0] = Mp[0] - q * np.eye(self.model.m)
            for z in matrix_polynomial_roots(Mp):
                out.append((complex(z), mult))
        return out


def _solve_den(Q, P):
    try:
        cond = np.linalg.cond(Q)
    except np.linalg.LinAlgError as exc:
        raise SingularDenominator("Q_r(-D(z)) is singular") from exc
    if np.any(~np.isfinite(cond)) or np.any(cond > 1e14):
        raise SingularDenominator("Q_r(-D(z)) is numerically singular")
    return np.linalg.solve(Q, P)


def kernel_eval(model: BmapModel, law: ServiceLaw, z) -> np.ndarray:
    """``A(z) = S~(-D(z))`` for a single law.

    Evaluated in factored form, so the only ill-conditioning comes from
    genuine zeros of ``d(z)``: a PH law through the Kronecker resolvent
    ``(beta x I)(I x X - T x I)^{-1}(t x I)``, any other rational law as
    a product of pole-zero factors.  Power-form ``Q(X)^{-1} P(X)`` loses
    all accuracy once ``|X|`` is large.
    """
    X = -d_of_z(model, np.asarray(z, dtype=complex))
    m = model.m
    eye = np.broadcast_to(np.eye(m), X.shape)
    if law.T is not None:
        k = len(law.beta)
        t = -law.T.sum(axis=1)
        big = np.kron(np.eye(k), X) - np.kron(law.T, np.eye(m))
        rhs = np.broadcast_to(np.kron(t[:, None], np.eye(m)), X.shape[:-2] + (k * m, m))
        out = np.kron(law.beta[None, :], np.eye(m)) @ _solve_den(big, rhs)
        return out + (1.0 - law.beta.sum()) * eye
    gain, zeros, poles = _pole_zero_form(law)
    out = gain * eye.astype(complex)
    # pair each zero with a pole so every factor stays bounded for large X
    for j, q in enumerate(poles):
        factor = _solve_den(X - q * eye, eye)
        if j < len(zeros):
            factor = (X - zeros[j] * eye) @ factor
        out = out @ factor
    return out


def _pole_zero_form(law: ServiceLaw):
    """``S~(t) = gain * prod (t - zeros) / prod (t - poles)``."""
    num = np.trim_zeros(np.asarray(law.lst_num, float), "b")
    den = np.trim_zeros(np.asarray(law.lst_den, float), "b")
    if len(num) > len(den):
        raise DegenerateApproximant("improper service transform")
    zeros = npoly.polyroots(num) if len(num) > 1 else np.array([])
    return num[-1] / den[-1], zeros, law.poles


def state_space(law: ServiceLaw):
    """Realization ``S~(s) = d + c (s I - F)^{-1} g``.

    A PH law uses its own ``(T, t, beta)``; any other rational law is a
    cascade of first-order pole-zero sections, matching the factored kernel.
    """
    if law.T is not None:
        return law.T, -law.T.sum(axis=1), law.beta, 1.0 - law.beta.sum()
    gain, zeros, poles = _pole_zero_form(law)
    F = np.zeros((0, 0), dtype=complex)
    g = np.zeros(0, dtype=complex)
    c = np.zeros(0, dtype=complex)
    d = complex(gain)
    for j, q in enumerate(poles):
        # (s - z_j)/(s - q) = 1 + (q - z_j)/(s - q); a bare 1/(s - q) has d = 0
        gs, ds = (q - zeros[j], 1.0) if j < len(zeros) else (1.0, 0.0)
        k = len(g)
        F2 = np.zeros((k + 1, k + 1), dtype=complex)
        F2[:k, :k] = F
        F2[k, :k] = gs * c
        F2[k, k] = q
        F, g, c, d = F2, np.append(g, gs * d), np.append(ds * c, 1.0), ds * d
    return F, g, c, d


def _horner_matrix(coeffs, X, eye):
    out = coeffs[-1] * eye
    for c in coeffs[-2::-1]:
        out = out @ X + c * eye
    return out


def kernel_series(model: BmapModel, law: ServiceLaw, nmax: int,
                  max_tail: Optional[float] = 1e-12,
                  weight_tail: float = 1e-14) -> Tuple[np.ndarray, float]:
    """Coefficients ``A_0 .. A_nmax`` by uniformization.

    ``A_n = sum_k g_k K^(k)_n`` where ``K^(k)_n`` is the probability of ``n``
    arrivals in ``k`` steps of the uniformized chain with step matrices
    ``I + D_0/q`` and ``D_j/q``.  Returns ``(coefficients, tail_mass)``.
    """
    if nmax < 0:
        raise ValueError("nmax must be >= 0")
    m, K = model.m, model.K
    rate = float(np.max(-np.diag(model.D0)))
    steps = model.D / rate
    steps[0] = steps[0] + np.eye(m)
    g = uniformization_weights(law, rate, weight_tail)
    cur = np.zeros((nmax + 1, m, m))
    cur[0] = np.eye(m)
    out = g[0] * cur
    for gk in g[1:]:
        nxt = np.zeros_like(cur)
        for j in range(min(K, nmax) + 1):
            if np.any(steps[j]):
                nxt[j:] += cur[:nmax + 1 - j] @ steps[j]
        cur = nxt
        out += gk * cur
    tail = float(max(0.0, 1.0 - out.sum(axis=0).sum(axis=1).min()))
    if max_tail is not None and tail > max_tail:
        raise TruncationError(f"kernel tail mass {tail:.3e} beyond n={nmax}")
    return out, tail


def transform_series(family: KernelFamily, r: int, nmax: int) -> np.ndarray:
    """Coefficients of the rational kernel by FFT on the unit circle.

    The sample count doubles until the top half of the aliased spectrum is
    below 1e-15, so the returned coefficients are those of the rational
    transform itself.
    """
    n = 1 << max(10, int(np.ceil(np.log2(4 * (nmax + 1)))))
    while True:
        z = np.exp(2j * np.pi * np.arange(n) / n)
        vals = family.eval(r, z)
        coef = np.fft.fft(vals, axis=0).real / n
        if np.max(np.abs(coef[n // 2:])) < 1e-15 or n >= 1 << 20:
            break
        n *= 2
    out = np.zeros((nmax + 1,) + coef.shape[1:])
    k = min(nmax + 1, n // 2)
    out[:k] = coef[:k]
    return out


# -- characteristic polynomial and roots --------------------------------------

@dataclass
class CharPoly:
    """Characteristic polynomial ``chi(z) = det(z^b Q_b(X) - P_b(X))``.

    ``coefficients`` are ascending and real.  ``inside_roots`` holds the ``mb``
    roots with ``|z| <= 1`` (the one at 1 snapped to exactly 1) and
    ``outside_roots`` the remaining ones as ``(value, multiplicity)``.
    """

    coefficients: np.ndarray
    matrix_poly: np.ndarray
    inside_roots: np.ndarray
    outside_roots: List[Tuple[complex, int]]
    clusters: List[Tuple[complex, int]]

    @property
    def degree(self) -> int:
        return len(self.coefficients) - 1

    def __call__(self, z):
        return npoly.polyval(z, self.coefficients)


def char_poly(family: KernelFamily, rho: Optional[float] = None,
              cluster_tol: float = CLUSTER_TOL) -> CharPoly:
    """Build the characteristic polynomial of a kernel family and classify its
    roots.

    Coefficients come from sampling ``det M(z)`` at roots of unity (2x
    oversampled) followed by an inverse DFT.  The roots come from the block
    companion pencil of :meth:`KernelFamily.linearized_char_poly`; those in
    the disk are polished by Newton steps on ``det M``, the others against
    the eigenvalue form of :func:`_eigen_terms`.
    """
    m, b = family.model.m, family.policy.b
    Mp = mp_trim(family.char_matrix_poly())
    nominal = m * (Mp.shape[0] - 1)
    n = 1 << int(np.ceil(np.log2(2 * (nominal + 1))))
    z = np.exp(2j * np.pi * np.arange(n) / n)
    vals = np.linalg.det(mp_eval(Mp, z))
    coef = np.fft.fft(vals) / n
    scale = np.max(np.abs(coef))
    if np.max(np.abs(coef[nominal + 1:]), initial=0.0) > 1e-9 * scale:
        raise DegreeMismatch("characteristic polynomial has energy above its nominal degree")
    coef = coef[:nominal + 1].real
    top = len(coef)
    while top > 1 and abs(coef[top - 1]) <= 1e-14 * scale:
        top -= 1
    coef = coef[:top]

    # roots from the linearization; power form is accurate only near the disk
    roots = matrix_polynomial_roots(family.linearized_char_poly())
    gap = [np.min(np.abs(np.delete(roots, i) - z), initial=np.inf) for i, z in enumerate(roots)]
    roots = np.array([polish_root(Mp, z) if abs(z) <= 1 + UNIT_TOL
                      else refine_root(family, z, 0.25 * g) for z, g in zip(roots, gap)])
    inside, outside, clusters = classify_roots(roots, m * b, rho=rho, cluster_tol=cluster_tol,
                                               matrix_poly=Mp, polish=False)
    return CharPoly(coef, Mp, inside, outside, clusters)


def null_dimension(matrix_poly: Optional[np.ndarray], z: complex, rel: float = 1e-6) -> int:
    """Numerical dimension of the null space of the matrix polynomial at
    ``z``; a scalar polynomial (``None``) counts as dimension 1."""
    if matrix_poly is None:
        return 1
    s = np.linalg.svd(mp_eval(matrix_poly, z), compute_uv=False)
    return int(np.sum(s <= rel * s[0]))


def classify_roots(roots_or_coeffs, mb: int, rho: Optional[float] = None,
                   cluster_tol: float = CLUSTER_TOL, unit_tol: float = UNIT_TOL,
                   matrix_poly: Optional[np.ndarray] = None, polish: bool = True):
    """Split roots into the closed unit disk and its exterior.

    ``roots_or_coeffs`` is either an array of roots or, when real, the
    ascending coefficients of a scalar polynomial whose roots are then taken
    from its companion matrix.  Returns ``(inside, outside_groups,
    clusters)`` where groups are ``(value, multiplicity)``.  Raises
    :class:`RootCountError` unless exactly ``mb`` roots lie in ``|z| <= 1``
    and every repeated one among them is semisimple (its multiplicity equals
    the dimension of the null space there).
    """
    arr = np.asarray(roots_or_coeffs)
    if np.isrealobj(arr):
        roots = npoly.polyroots(arr).astype(complex)
    else:
        roots = arr.astype(complex)
    if matrix_poly is not None and polish:
        roots = np.array([polish_root(matrix_poly, z) for z in roots])

    groups = _group_points(roots, cluster_tol)
    clusters = [(c, k) for c, k in groups if k > 1]
    inside = [c for c, k in groups for _ in range(k) if abs(c) <= 1 + unit_tol]
    outside = [(c, k) for c, k in groups if abs(c) > 1 + unit_tol]
    n_in = len(inside)
    if n_in != mb:
        unstable = rho is not None and rho >= 1
        why = f" (rho={rho:.6g} >= 1: no stationary regime)" if unstable else ""
        raise RootCountError(f"found {n_in} roots in |z|<=1, expected {mb}{why}",
                             unstable=unstable)
    defective = [c for c, k in clusters
                 if abs(c) <= 1 + unit_tol and null_dimension(matrix_poly, c) != k]
    if defective:
        raise RootCountError(
            f"repeated roots inside the unit disk at {defective} without a full set of "
            "null vectors; only semisimple inside roots are supported")
    inside = np.array(inside, dtype=complex)
    i1 = int(np.argmin(np.abs(inside - 1.0)))
    inside[i1] = 1.0
    # enforce exact conjugate symmetry
    inside = _symmetrise(inside)
    return inside, outside, clusters


def _symmetrise(roots):
    out = roots.copy()
    used = np.zeros(len(out), bool)
    for i, z in enumerate(out):
        if used[i]:
            continue
        used[i] = True
        if abs(z.imag) <= 1e-12 * max(1.0, abs(z)):
            out[i] = z.real
            continue
        d = np.abs(out - z.conjugate())
        d[used] = np.inf
        j = int(np.argmin(d))
        if d[j] < 1e-6 * max(1.0, abs(z)):
            used[j] = True
            out[j] = z.conjugate()
    return out


def _group_points(points, tol):
    """Single-linkage clustering of complex points; returns (mean, count)."""
    pts = [complex(p) for p in np.atleast_1d(points)]
    n = len(pts)
    parent = list(range(n))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for i in range(n):
        for j in range(i + 1, n):
            if abs(pts[i] - pts[j]) < tol * max(1.0, abs(pts[i])):
                parent[find(i)] = find(j)
    groups: Dict[int, List[complex]] = {}
    for i in range(n):
        groups.setdefault(find(i), []).append(pts[i])
    return [(complex(np.mean(g)), len(g)) for g in groups.values()]
