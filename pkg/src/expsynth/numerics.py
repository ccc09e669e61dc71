"""Shared numerical kernels.

Everything here is vectorised over numpy arrays and free of model knowledge:
range-reduced trigonometry, an accurate log-gamma ratio for large arguments,
vectorised bracketed bisection, and lattice sums of smooth functions.
"""
from __future__ import annotations

import math
from typing import Callable

import numpy as np
from scipy import special

EPS = np.finfo(float).eps


class ExpsynthError(Exception):
    """Base class for all library errors."""


class DomainError(ExpsynthError, ValueError):
    pass


class RangeError(ExpsynthError, IndexError):
    pass


class PoleError(ExpsynthError, ZeroDivisionError):
    pass


class ConvergenceError(ExpsynthError, ArithmeticError):
    def __init__(self, message: str, last_iterates=None):
        super().__init__(message)
        self.last_iterates = last_iterates


class StructuralError(ExpsynthError):
    pass


class ContractError(ExpsynthError, ValueError):
    pass


class PreconditionError(ExpsynthError):
    pass


# --------------------------------------------------------------------------
# trigonometry with exact reduction modulo 2
# --------------------------------------------------------------------------

def sinpi(x):
    """sin(pi x); the reduction x mod 2 is exact in binary floating point."""
    x = np.asarray(x, dtype=float)
    r = np.fmod(x, 2.0)
    r = np.where(r > 1.0, r - 2.0, np.where(r < -1.0, r + 2.0, r))
    # fold to [-1/2, 1/2] so the argument passed to sin is small
    r = np.where(r > 0.5, 1.0 - r, np.where(r < -0.5, -1.0 - r, r))
    return np.sin(np.pi * r)


def cospi(x):
    x = np.asarray(x, dtype=float)
    return sinpi(0.5 - np.abs(np.fmod(x, 2.0)))


def sinc(x):
    """Normalised sinc, sin(pi x)/(pi x), accurate for large |x|."""
    x = np.asarray(x, dtype=float)
    small = np.abs(x) < 1.0
    safe = np.where(small, 1.0, x)
    return np.where(small, np.sinc(x), sinpi(safe) / (np.pi * safe))


def sinc_deriv(x):
    """d/dx of sin(pi x)/(pi x)."""
    x = np.asarray(x, dtype=float)
    tiny = np.abs(x) < 1e-4
    safe = np.where(tiny, 1.0, x)
    full = (cospi(safe) - sinc(safe)) / safe
    series = -(np.pi**2) * x / 3.0 + (np.pi**4) * x**3 / 30.0
    return np.where(tiny, series, full)


# --------------------------------------------------------------------------
# log-gamma ratios
# --------------------------------------------------------------------------

_ASYMPTOTIC_FROM = 64.0


def lgamma_ratio(y, c):
    """log Gamma(y + c) - log Gamma(y) for real y > 0 and real or complex c.

    For large y the Stirling series is differenced analytically, so there is
    no cancellation between two huge log-gamma values.  The real part is the
    log of the modulus; for complex c the imaginary part is a phase.
    """
    y = np.asarray(y, dtype=float)
    c = np.asarray(c)
    is_complex = np.iscomplexobj(c)
    y, c = np.broadcast_arrays(y, c)
    out = np.empty(y.shape, dtype=complex if is_complex else float)
    big = y >= _ASYMPTOTIC_FROM
    if np.any(big):
        yb, cb = y[big], c[big]
        w = yb + cb
        val = (yb - 0.5) * np.log1p(cb / yb) + cb * np.log(w) - cb
        val = val + (1.0 / w - 1.0 / yb) / 12.0
        val = val - (1.0 / w**3 - 1.0 / yb**3) / 360.0
        val = val + (1.0 / w**5 - 1.0 / yb**5) / 1260.0
        out[big] = val
    small = ~big
    if np.any(small):
        ys, cs = y[small], c[small]
        if is_complex:
            out[small] = special.loggamma(ys + cs) - special.loggamma(ys)
        else:
            out[small] = special.gammaln(ys + cs) - special.gammaln(ys)
    return out if out.ndim else out[()]


# --------------------------------------------------------------------------
# roots
# --------------------------------------------------------------------------

def sign_change_brackets(fn: Callable, lo: float, hi: float, step: float):
    """Scan [lo, hi] on a grid; return (left, right, f_left, f_right) of every sign change.

    Exact zeros on grid points are reported as degenerate brackets (left == right).
    """
    n = max(int(math.ceil((hi - lo) / step)), 1)
    xs = np.linspace(lo, hi, n + 1)
    fs = np.asarray(fn(xs), dtype=float)
    exact = np.flatnonzero(fs == 0.0)
    s = np.sign(fs)
    idx = np.flatnonzero(s[:-1] * s[1:] < 0)
    left = np.concatenate([xs[idx], xs[exact]])
    right = np.concatenate([xs[idx + 1], xs[exact]])
    fl = np.concatenate([fs[idx], fs[exact]])
    fr = np.concatenate([fs[idx + 1], fs[exact]])
    order = np.argsort(left, kind="stable")
    return left[order], right[order], fl[order], fr[order]


def bisect_many(fn: Callable, lo, hi, abs_tol: float = 1e-13, max_iter: int = 200):
    """Vectorised bisection on many brackets at once.

    ``fn`` maps an array to an array.  Brackets must show a sign change (or
    have an exact zero at an endpoint).  Iteration stops per bracket when the
    width drops below ``abs_tol`` or no representable midpoint remains.
    Returns (root, lo, hi).
    """
    lo = np.array(lo, dtype=float, copy=True)
    hi = np.array(hi, dtype=float, copy=True)
    flo = np.asarray(fn(lo), dtype=float)
    fhi = np.asarray(fn(hi), dtype=float)
    if np.any(np.sign(flo) * np.sign(fhi) > 0):
        raise ConvergenceError("bracket without sign change", (lo, hi))
    done = (flo == 0) | (fhi == 0) | (hi - lo <= abs_tol)
    root = np.where(flo == 0, lo, np.where(fhi == 0, hi, 0.5 * (lo + hi)))
    for _ in range(max_iter):
        active = ~done
        if not np.any(active):
            break
        mid = 0.5 * (lo[active] + hi[active])
        stuck = (mid <= lo[active]) | (mid >= hi[active])
        fm = np.asarray(fn(mid), dtype=float)
        left = np.sign(fm) == np.sign(flo[active])
        a_idx = np.flatnonzero(active)
        lo[a_idx[left]] = mid[left]
        flo[a_idx[left]] = fm[left]
        hi[a_idx[~left]] = mid[~left]
        fhi[a_idx[~left]] = fm[~left]
        hit = fm == 0
        root[a_idx] = np.where(hit, mid, 0.5 * (lo[a_idx] + hi[a_idx]))
        done[a_idx] = hit | stuck | (hi[a_idx] - lo[a_idx] <= abs_tol)
    else:
        if not np.all(done):
            raise ConvergenceError("bisection did not converge", (lo[~done], hi[~done]))
    return root, lo, hi


# --------------------------------------------------------------------------
# sums
# --------------------------------------------------------------------------

def fsum(values) -> float:
    return math.fsum(np.asarray(values, dtype=float).ravel().tolist())


def direct_lattice_sum(fn: Callable, a: int, b: int, chunk: int = 1 << 18) -> float:
    """sum_{n=a}^{b} fn(n), chunked, with compensated accumulation of chunk sums."""
    if b < a:
        return 0.0
    parts = []
    start = a
    while start <= b:
        stop = min(b, start + chunk - 1)
        n = np.arange(start, stop + 1, dtype=float)
        parts.append(fsum(fn(n)))
        start = stop + 1
    return math.fsum(parts)


_GL_HI = np.polynomial.legendre.leggauss(40)
_GL_LO = np.polynomial.legendre.leggauss(20)


def _panel_integral(fn: Callable, edges: np.ndarray, rtol: float = 1e-12):
    """Integral over consecutive panels by Gauss-Legendre; error from a lower-order rule.

    Panels whose two rules disagree are split in half, up to 30 rounds.
    """
    total, err = [], []
    lo, hi = edges[:-1], edges[1:]
    for _ in range(30):
        mid, half = 0.5 * (lo + hi), 0.5 * (hi - lo)
        vals = []
        for x, w in (_GL_HI, _GL_LO):
            pts = mid[:, None] + half[:, None] * x[None, :]
            f = np.asarray(fn(pts.ravel()), dtype=float).reshape(pts.shape)
            vals.append(half * (f @ w))
            if len(vals) == 1:
                scale = half * (np.abs(f) @ w)
        diff = np.abs(vals[0] - vals[1])
        ok = diff <= rtol * scale + 1e-300
        total.extend(vals[0][ok].tolist())
        err.extend(diff[ok].tolist())
        if np.all(ok):
            return math.fsum(total), math.fsum(err)
        lo, hi = lo[~ok], hi[~ok]
        mid = 0.5 * (lo + hi)
        lo, hi = np.concatenate([lo, mid]), np.concatenate([mid, hi])
    raise ConvergenceError("panel quadrature did not converge", (lo, hi))


def _geometric_edges(span: float, first: float) -> np.ndarray:
    """0, first, 2 first, 4 first, ... , span."""
    pts = [0.0]
    w = first
    while w < span:
        pts.append(w)
        w *= 2
    pts.append(float(span))
    return np.array(pts)


def lattice_sum(fn: Callable, a: int, b: int, exact_max: int = 1 << 20, edge: int = 512):
    """sum_{n=a}^{b} fn(n) for fn smooth on the scale of ``edge``.

    See :func:`lattice_sum_local`; here the summand takes absolute positions.
    """
    return lattice_sum_local(lambda base, off: fn(base + off), a, b, exact_max, edge)


def lattice_sum_local(fn: Callable, a: int, b: int, exact_max: int = 1 << 20, edge: int = 512):
    """sum_{n=a}^{b} fn(base, n - base) with base one of the two ends.

    The summand receives an exact integer base and a float offset (>= 0 from
    ``a``, <= 0 from ``b``), so that distances to the ends keep full relative
    precision even when |n| is huge.  Short ranges are summed directly.  Long
    ranges: ``edge`` terms at each end directly, the two middle halves by
    Gregory's formula (integral on geometric panels plus end differences).
    Returns (value, error_estimate).
    """
    a, b = int(a), int(b)
    count = b - a + 1
    if count <= 0:
        return 0.0, 0.0
    if count <= exact_max:
        val = direct_lattice_sum(lambda n: fn(float(a), n - a), a, b)
        return val, 8 * EPS * abs(val)
    head = direct_lattice_sum(lambda j: fn(float(a), j), 0, edge - 1)
    tail = direct_lattice_sum(lambda j: fn(float(b), -j), 0, edge - 1)
    # middle [a + edge, b - edge] split at an integer m; left part offsets from a,
    # right part offsets from b
    p_off = edge
    q_off = count - 1 - edge            # offset of b - edge from a
    m_off = (p_off + q_off) // 2
    left_span = m_off - p_off           # left half covers offsets [p_off, m_off]
    right_span = q_off - m_off          # right half covers [m_off, q_off] = b-offsets [-(count-1-m_off), -edge]
    fa = lambda t: fn(float(a), p_off + t)
    fb = lambda t: fn(float(b), -edge - t)
    integral, quad_err = 0.0, 0.0
    for g, span in ((fa, left_span), (fb, right_span)):
        # geometric panels refine toward the outer end, where the summand may vary fastest
        v, e = _panel_integral(g, _geometric_edges(float(span), float(edge)))
        integral += v
        quad_err += e
    # Gregory end corrections at the two outer points p = a + edge and q = b - edge;
    # the shared midpoint is interior, so both half-integrals simply add.
    hp = np.asarray(fa(np.arange(5, dtype=float)), dtype=float)
    hq = np.asarray(fb(np.arange(5, dtype=float)), dtype=float)
    fwd = [np.diff(hp, k)[0] for k in range(1, 4)]
    bwd = [np.diff(hq, k)[0] for k in range(1, 4)]
    # sum_{p..q} h = integral + (h_p + h_q)/2 - 1/12 (delta h_p + delta' h_q)
    #              + 1/24 (delta^2 h_p + delta'^2 h_q) - 19/720 (delta^3 h_p + delta'^3 h_q)
    # with delta' the forward difference taken inward from q
    corr = (hp[0] + hq[0]) / 2.0
    corr -= (fwd[0] + bwd[0]) / 12.0
    corr += (fwd[1] + bwd[1]) / 24.0
    last = -19.0 / 720.0 * (fwd[2] + bwd[2])
    corr += last
    value = head + tail + integral + corr
    err = quad_err + 10 * abs(last) + 16 * EPS * abs(value)
    return value, err
