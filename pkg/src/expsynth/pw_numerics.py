"""Paley-Wiener functions as integer sample vectors.

Since the cardinal sines K_n, n in Z, are an orthonormal basis of PW_pi,
a function is represented by its samples f(n) on a window [-N, N] and
inner products become l2 sums.  The truncation error of the slowly
decaying sinc tails is O(1/N) and is reported alongside the numbers.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial import legendre
from scipy.special import gammaln

from . import numerics as nx
from .genfun import GenFnModel, ZeroList, find_zeros
from .numerics import ContractError, DomainError

DENSE_MAX_COLUMNS = 4096
# the weighted Legendre columns lose orthogonality to the kernels as their
# degree grows (worst seen: 4e-11 at 10 columns, 2e-9 at 15, 1e-6 at 36)
STRUCTURED_MAX_COMPLEMENT = 10


@dataclass(frozen=True)
class SampledPWVector:
    """Samples f(n), n = -N..N."""

    N: int
    samples: np.ndarray
    label: str = ""

    def __post_init__(self):
        if self.samples.shape != (2 * self.N + 1,):
            raise ContractError("sample count does not match the window")
        if not np.all(np.isfinite(self.samples)):
            raise DomainError("samples must be finite")

    @property
    def n(self) -> np.ndarray:
        return np.arange(-self.N, self.N + 1, dtype=float)

    def norm(self) -> float:
        return math.sqrt(nx.fsum(np.abs(self.samples) ** 2))

    @classmethod
    def from_function(cls, fn, N: int, label: str = "") -> "SampledPWVector":
        n = np.arange(-N, N + 1, dtype=float)
        return cls(N, np.asarray(fn(n), dtype=float), label)

    @classmethod
    def unit(cls, j: int, N: int) -> "SampledPWVector":
        v = np.zeros(2 * N + 1)
        v[j + N] = 1.0
        return cls(N, v, f"e_{j}")


def _same_window(vectors) -> int:
    ns = {v.N for v in vectors}
    if len(ns) != 1:
        raise ContractError(f"window mismatch: {sorted(ns)}")
    return ns.pop()


def pairing(u: SampledPWVector, v: SampledPWVector) -> float:
    """l2 inner product of the samples."""
    _same_window([u, v])
    return nx.fsum(u.samples * np.conj(v.samples))


def sample_kernel(lam: float, N: int) -> SampledPWVector:
    """K_lambda(n) = sinc(pi (n - lambda))."""
    n = np.arange(-N, N + 1, dtype=float)
    return SampledPWVector(N, nx.sinc(n - lam), f"K_{lam!r}")


def sample_biorth(model: GenFnModel, lam: float, N: int, zeros: ZeroList | None = None) -> SampledPWVector:
    """G_lambda(n) = G(n)/(G'(lambda)(n - lambda)) for a certified zero lambda."""
    if zeros is None:
        zeros = find_zeros(model, (lam - 2.0, lam + 2.0))
    dg = zeros.deriv_of(lam)
    n = np.arange(-N, N + 1, dtype=float)
    gn = np.asarray(model(n), dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        s = gn / (dg * (n - lam))
    hit = n == lam
    s[hit] = 1.0
    return SampledPWVector(N, s, f"G_{lam!r}")


def sample_weighted_kernel(n_w: np.ndarray, w: np.ndarray, lam: float, N: int) -> SampledPWVector:
    """Coefficients w_n/(n - lambda) of the kernel of the weighted Cauchy space.

    The squared norm of this vector is sum w_n^2/(n - lambda)^2, the kernel
    norm of the space with weights w_n.
    """
    n = np.arange(-N, N + 1, dtype=float)
    ww = np.zeros(n.size)
    idx = np.asarray(n_w, dtype=np.int64) + N
    ok = (idx >= 0) & (idx < n.size)
    ww[idx[ok]] = w[ok]
    return SampledPWVector(N, ww / (n - lam), f"k_{lam!r}")


def gram(vectors) -> np.ndarray:
    _same_window(vectors)
    A = np.stack([v.samples for v in vectors], axis=1)
    return A.T @ A


def tail_budget(N: int, points) -> float:
    """Bound for the part of sum_n sinc(n-x) sinc(n-y) beyond |n| > N, |x|, |y| <= N/2.

    Each factor is at most 1/(pi (|n| - N/2)), so the tail is at most
    2 sum_{m > N/2} 1/(pi m)^2 <= 4/(pi^2 N) + 2/(pi^2 (N/2)^2).
    """
    p = np.max(np.abs(np.asarray(points, dtype=float)), initial=0.0)
    h = N - p
    if h <= 1:
        raise DomainError("points too close to the window edge")
    return 2.0 / (math.pi**2 * h) + 2.0 / (math.pi**2 * h**2)


@dataclass
class DefectReport:
    N: int
    columns: int
    method: str
    smallest_sv: float | None
    largest_sv: float | None
    condition: float | None
    candidate_residual: float | None
    complement_dim: int | None = None
    lower_bound: float | None = None
    pairing: float | None = None
    projected_pairing: float | None = None
    tail_budget: float | None = None
    singular_values: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def gram_defect(vectors, candidate: SampledPWVector | None = None, keep_sv: bool = False) -> DefectReport:
    """Smallest singular value of the column-normalized system and the candidate's projection residual."""
    if not vectors:
        raise DomainError("no vectors")
    N = _same_window(list(vectors) + ([candidate] if candidate is not None else []))
    if len(vectors) > DENSE_MAX_COLUMNS:
        raise DomainError(f"{len(vectors)} columns exceed the dense limit {DENSE_MAX_COLUMNS}")
    A = np.stack([v.samples for v in vectors], axis=1).astype(float)
    norms = np.linalg.norm(A, axis=0)
    if np.any(norms == 0):
        raise DomainError("zero column")
    A = A / norms
    sv = np.linalg.svd(A, compute_uv=False)
    res = None
    if candidate is not None:
        c = candidate.samples
        cn = np.linalg.norm(c)
        if cn == 0:
            raise DomainError("zero candidate")
        coef, *_ = np.linalg.lstsq(A, c, rcond=None)
        res = float(np.linalg.norm(c - A @ coef) / cn)
    # with more columns than rows the trailing singular values are implicit zeros
    smin = float(sv[-1]) if A.shape[1] <= A.shape[0] else 0.0
    return DefectReport(N, A.shape[1], "dense", smin, float(sv[0]),
                        float(sv[0] / smin) if smin > 0 else math.inf, res,
                        singular_values=sv.tolist() if keep_sv else [])


# ----------------------------------------------------------------------
# structured path for kernel systems at nearly all integers' worth of points
# ----------------------------------------------------------------------

def _log_abs_prod_half(lo: int, hi: int) -> float:
    """log prod_{i=lo}^{hi} |i - 1/2| for integers lo <= hi."""
    def up(m):  # log prod_{i=1}^m (i - 1/2)
        return float(gammaln(m + 0.5) - gammaln(0.5)) if m > 0 else 0.0
    if lo >= 1:
        return up(hi) - up(lo - 1)
    if hi <= 0:
        return up(1 - lo) - up(-hi)  # |i - 1/2| = (1 - i) - 1/2
    return up(hi) + up(1 - lo)


def kernel_annihilator_basis(zeros: np.ndarray, N: int) -> np.ndarray:
    """Orthonormal basis of the samples x on [-N, N] with sum_n x_n sinc(lambda - n) = 0 for all given lambda.

    Such x are exactly (-1)^n x_n = L(n) p(n)/Q'(n) with L(z) = prod (z - lambda),
    Q(z) = prod_{|j| <= N} (z - j) and deg p <= 2N - len(zeros); p runs
    over Legendre polynomials in n/N and the result is orthonormalized.
    Only meant for nearly complete systems: at most
    ``STRUCTURED_MAX_COMPLEMENT`` samples may be left unconstrained.
    """
    lam = np.sort(np.asarray(zeros, dtype=float))
    lam = lam[(lam >= -N) & (lam <= N)]
    if np.any(lam == np.round(lam)):
        raise DomainError("zeros at integers")
    r = 2 * N + 1 - lam.size
    if r <= 0:
        return np.zeros((2 * N + 1, 0))
    if r > STRUCTURED_MAX_COMPLEMENT:
        raise DomainError(f"complement of dimension {r} exceeds {STRUCTURED_MAX_COMPLEMENT}; use the dense path")
    n = np.arange(-N, N + 1)
    # reference set H: the 2N half-integers strictly inside the window
    h = np.arange(-N, N) + 0.5
    in_h = np.isin(lam, h)
    extra = lam[~in_h]
    missing = np.setdiff1d(h, lam)
    logv = np.empty(n.size)
    for i, m in enumerate(n):
        # sum_{j=-N}^{N-1} log|m - j - 1/2| = log prod_{i=m-N+1}^{m+N} |i - 1/2|
        lh = _log_abs_prod_half(int(m) - N + 1, int(m) + N)
        lq = float(gammaln(m + N + 1) + gammaln(N - m + 1))
        logv[i] = lh - lq
    nf = n.astype(float)
    for arr, sgn in ((extra, 1.0), (missing, -1.0)):
        for x in arr:
            logv += sgn * np.log(np.abs(nf - x))
    # sign of L(n)/Q'(n) times (-1)^n
    above_l = lam.size - np.searchsorted(lam, nf, side="right")
    above_q = N - n
    sign = np.where((above_l + above_q + n) % 2 == 0, 1.0, -1.0)
    v = sign * np.exp(logv - logv.max())
    P = legendre.legvander(nf / N, r - 1)
    B = v[:, None] * P
    q, rr = np.linalg.qr(B)
    keep = np.abs(np.diag(rr)) > 1e-13 * np.max(np.abs(np.diag(rr)))
    return q[:, keep]


def structured_defect(kernel_zeros: np.ndarray, extra_vectors, candidate: SampledPWVector,
                      partner: SampledPWVector) -> DefectReport:
    """Candidate residual against span{K_lambda} + span(extra_vectors), through the orthogonal complement.

    ``partner`` is a vector f with (f, candidate) != 0; the residual of the
    candidate is bounded below by (|(f, g)| - |(g, P_V f)|)/(|f| |g|), since
    the residual r = g - P_V g satisfies (r, f - P_V f) = (g, f) - (g, P_V f).
    """
    N = _same_window([candidate, partner] + list(extra_vectors))
    U = kernel_annihilator_basis(kernel_zeros, N)
    if extra_vectors:
        E = np.stack([v.samples for v in extra_vectors], axis=1)
        C = U.T @ E
        # V-perp inside U: combinations orthogonal to every extra vector
        uu, ss, vt = np.linalg.svd(C.T, full_matrices=True)
        rank = int(np.sum(ss > 1e-12 * max(1.0, ss.max(initial=0.0))))
        Z = U @ vt[rank:].T
    else:
        Z = U
    g, f = candidate.samples, partner.samples
    gn, fn = np.linalg.norm(g), np.linalg.norm(f)
    if gn == 0 or fn == 0:
        raise DomainError("zero candidate or partner")
    zg, zf = Z.T @ g, Z.T @ f
    res = float(np.linalg.norm(zg) / gn)
    pair = nx.fsum(f * g)
    proj = pair - nx.fsum(zg * zf)  # (g, P_V f)
    lb = (abs(pair) - abs(proj)) / (fn * gn)
    return DefectReport(N, int(np.sum((kernel_zeros >= -N) & (kernel_zeros <= N))) + len(extra_vectors),
                        "structured", None, None, None, res, complement_dim=int(Z.shape[1]),
                        lower_bound=float(lb), pairing=float(pair), projected_pairing=float(proj),
                        tail_budget=2.0 / (math.pi**2 * N))
