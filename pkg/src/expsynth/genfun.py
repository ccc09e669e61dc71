"""Evaluable generating functions: the explicit sinc-series example, the
Kadets-type family, and principal-value canonical products over a spectrum.
"""
from __future__ import annotations

import math
import threading
from dataclasses import dataclass, field

import numpy as np
from scipy import special

from . import numerics as nx
from .numerics import ConvergenceError, DomainError, PoleError
from .spectra import IntervalFamily, Spectrum

SIMPLE_K0 = 10


# ----------------------------------------------------------------------
# zero lists
# ----------------------------------------------------------------------

@dataclass(frozen=True)
class ZeroList:
    """Sorted simple real zeros with G'(zero) and sign-change certificates."""

    zeros: np.ndarray
    derivs: np.ndarray
    bracket_lo: np.ndarray
    bracket_hi: np.ndarray
    g_lo: np.ndarray
    g_hi: np.ndarray
    window: tuple[float, float]

    def __len__(self) -> int:
        return self.zeros.size

    def in_range(self, lo: float, hi: float) -> "ZeroList":
        m = (self.zeros >= lo) & (self.zeros <= hi)
        return ZeroList(self.zeros[m], self.derivs[m], self.bracket_lo[m], self.bracket_hi[m],
                        self.g_lo[m], self.g_hi[m], (lo, hi))

    def deriv_of(self, lam: float, tol: float = 1e-9) -> float:
        i = int(np.argmin(np.abs(self.zeros - lam))) if self.zeros.size else -1
        if i < 0 or abs(self.zeros[i] - lam) > tol * max(1.0, abs(lam)):
            raise DomainError(f"{lam!r} is not a certified zero")
        return float(self.derivs[i])

    def to_dict(self) -> dict:
        return {"window": list(self.window), "zeros": self.zeros.tolist(),
                "derivs": self.derivs.tolist()}


# ----------------------------------------------------------------------
# model base
# ----------------------------------------------------------------------

class GenFnModel:
    """Common surface of every generating-function model.

    Subclasses implement ``__call__`` (real arrays) and ``eval_complex``.
    ``deriv`` defaults to a central difference with h = 1e-6 max(1, |x|).
    """

    kind = "abstract"

    def __init__(self):
        self._zero_cache: dict = {}
        self._lock = threading.Lock()

    def __call__(self, x):
        raise NotImplementedError

    def eval_complex(self, z):
        raise NotImplementedError

    def deriv(self, x):
        x = np.asarray(x, dtype=float)
        h = 1e-6 * np.maximum(1.0, np.abs(x))
        return (self(x + h) - self(x - h)) / (2 * h)

    def deriv_at_zero(self, lam):
        return self.deriv(lam)

    def sq_sum(self, a: int, b: int):
        """sum_{n=a}^{b} G(n)^2 with an error estimate."""
        val = nx.direct_lattice_sum(lambda n: self(n) ** 2, int(a), int(b))
        return val, 16 * nx.EPS * abs(val)

    def weighted_sq_sum(self, a: int, b: int, weight):
        """sum_{n=a}^{b} weight(n) G(n)^2."""
        return nx.direct_lattice_sum(lambda n: weight(n) * self(n) ** 2, int(a), int(b))

    def zero_float_floor(self, lam):
        """Smallest |G| achievable at a double-precision approximation of a zero."""
        lam = np.asarray(lam, dtype=float)
        return np.abs(self.deriv_at_zero(lam)) * np.spacing(np.abs(lam) + 1.0)

    def to_dict(self) -> dict:
        return {"kind": self.kind}

    # zero cache -----------------------------------------------------------
    def cached_zeros(self, key, compute):
        with self._lock:
            hit = self._zero_cache.get(key)
        if hit is not None:
            return hit
        value = compute()
        with self._lock:
            self._zero_cache.setdefault(key, value)
            return self._zero_cache[key]


# ----------------------------------------------------------------------
# explicit example
# ----------------------------------------------------------------------

def _pair_term(x, center):
    """cos(pi x) [1/(x - c + 1/2) - 1/(x - c - 1/2)] for an even integer c.

    Equal to pi (sinc(x - c + 1/2) + sinc(x - c - 1/2)), which is how it is
    evaluated within 3/2 of c (removable singularities at c +- 1/2).
    """
    u = x - center
    near = np.abs(u) < 1.5
    with np.errstate(divide="ignore", invalid="ignore"):
        far = -nx.cospi(x) / ((u - 0.5) * (u + 0.5))
    if not np.any(near):
        return far
    close = np.pi * (nx.sinc(u + 0.5) + nx.sinc(u - 0.5))
    return np.where(near, close, far)


def _pair_term_deriv(x, center):
    u = x - center
    near = np.abs(u) < 1.5
    q = np.where(near, 1.0, (u - 0.5) * (u + 0.5))
    far = np.pi * nx.sinpi(x) / q + nx.cospi(x) * 2 * u / q**2
    if not np.any(near):
        return far
    close = np.pi * (nx.sinc_deriv(u + 0.5) + nx.sinc_deriv(u - 0.5))
    return np.where(near, close, far)


class SimpleExample(GenFnModel):
    """G(x) = cos(pi x) (1/(x - 1/2) + sum_{k>=10} [1/(x - 2^k + 1/2) - 1/(x - 2^k - 1/2)]).

    Every summand is pi times a sum of two integer-shifted sincs, so G is
    evaluated without 0 * inf at the removable points 1/2 and 2^k +- 1/2.
    The series is cut at ``k_cap``; :meth:`tail_bound` bounds the rest.
    """

    kind = "simple_example"

    def __init__(self, k_cap: int = 60):
        super().__init__()
        if k_cap < SIMPLE_K0:
            raise DomainError("k_cap must be >= 10")
        self.k_cap = int(k_cap)
        self.centers = np.ldexp(1.0, np.arange(SIMPLE_K0, self.k_cap + 1))

    def _head(self, x):
        v = x - 0.5
        near = np.abs(v) < 1.0
        safe = np.where(near, 1.0, v)
        return np.where(near, -np.pi * nx.sinc(v), nx.cospi(x) / safe)

    def _head_deriv(self, x):
        v = x - 0.5
        near = np.abs(v) < 1.0
        safe = np.where(near, 1.0, v)
        far = -np.pi * nx.sinpi(x) / safe - nx.cospi(x) / safe**2
        return np.where(near, -np.pi * nx.sinc_deriv(v), far)

    def __call__(self, x):
        x_in = np.asarray(x, dtype=float)
        x = np.atleast_1d(x_in)
        cx = nx.cospi(x)
        far_sum = np.zeros_like(x)
        out = self._head(x)
        for c in self.centers:
            u = x - c
            near = np.abs(u) < 1.5
            if np.any(near):
                idx = np.flatnonzero(near)
                q = (u - 0.5) * (u + 0.5)
                q.flat[idx] = np.inf
                far_sum -= 1.0 / q
                un = u.flat[idx]
                out = np.array(out, dtype=float, copy=True)
                out.flat[idx] += np.pi * (nx.sinc(un + 0.5) + nx.sinc(un - 0.5))
            else:
                far_sum -= 1.0 / ((u - 0.5) * (u + 0.5))
        return (out + cx * far_sum).reshape(x_in.shape)

    def deriv(self, x):
        x = np.asarray(x, dtype=float)
        out = self._head_deriv(x)
        for c in self.centers:
            out = out + _pair_term_deriv(x, c)
        return out

    def eval_complex(self, z):
        z = np.asarray(z, dtype=complex)
        h = 1.0 / (z - 0.5)
        for c in self.centers:
            h = h - 1.0 / ((z - c) ** 2 - 0.25)
        return np.cos(np.pi * z) * h

    def tail_bound(self, x):
        """Bound on |omitted terms k > k_cap| at real x."""
        ax = np.abs(np.asarray(x, dtype=float))
        first = 2.0 ** (self.k_cap + 1)
        ok = first >= 2 * (ax + 2)
        # each omitted term is <= 1/((2^k - |x|)^2 - 1/4) <= 4^(2 - k)
        bound = (16.0 / 3.0) * 4.0 ** (-(self.k_cap + 1)) * 4.0
        return np.where(ok, bound, np.inf)

    def to_dict(self):
        return {"kind": self.kind, "k_cap": self.k_cap}


def eval_simple_example(x, k_cap: int = 60, return_bound: bool = False):
    model = SimpleExample(k_cap)
    val = model(x)
    if return_bound:
        return val, model.tail_bound(x)
    return val


# ----------------------------------------------------------------------
# Kadets-type example
# ----------------------------------------------------------------------

def kadets_g0(x, delta0: float):
    """G_0(x) = (x - 1/2) prod_{n>=1} (1 - x^2/(n + delta0)^2) via log-gamma."""
    x = np.asarray(x, dtype=float)
    ax = np.abs(x)
    pref = special.gamma(1.0 + delta0) ** 2
    small = ax < 1.0
    out = np.empty_like(x)
    if np.any(small):
        xs = ax[small]
        out[small] = pref * special.rgamma(1 + delta0 + xs) * special.rgamma(1 + delta0 - xs)
    big = ~small
    if np.any(big):
        xb = ax[big]
        out[big] = pref * nx.sinpi(xb - delta0) * np.exp(-nx.lgamma_ratio(xb - delta0, 1 + 2 * delta0)) / np.pi
    return (x - 0.5) * out


def kadets_g0_complex(z, delta0: float):
    z = np.asarray(z, dtype=complex)
    lg = 2 * special.gammaln(1 + delta0) - special.loggamma(1 + delta0 + z) - special.loggamma(1 + delta0 - z)
    return (z - 0.5) * np.exp(lg)


def kadets_g0_product(x, delta0: float, n_terms: int = 200000):
    """Truncated product for G_0 with a second-order tail correction (oracle path)."""
    x = float(x)
    if abs(x) > n_terms / 20:
        raise DomainError("product oracle needs |x| well below n_terms")
    n = np.arange(1, n_terms + 1, dtype=float)
    logp = nx.fsum(np.log(np.abs(1.0 - x * x / (n + delta0) ** 2)))
    sign = np.prod(np.sign(1.0 - x * x / (n + delta0) ** 2))
    a = n_terms + 1 + delta0
    tail = -x**2 * special.polygamma(1, a) - x**4 / 2 * special.polygamma(3, a) / 6.0
    return (x - 0.5) * sign * math.exp(logp + tail)


class KadetsModel(GenFnModel):
    """G = G_0 prod_k prod_{n in I'_k} (z - (n - delta)) / (z - (n + delta0)).

    ``family`` holds I'_k.  Each inner product is split per evaluation point
    into a near block (direct product) and two far blocks (closed form via
    log-gamma ratios), so intervals with 1e9 integers cost O(1).
    """

    kind = "kadets"
    NEAR = 32

    def __init__(self, delta0: float, delta: float, family: IntervalFamily):
        super().__init__()
        if not (0.5 <= delta0 < delta < 1.0):
            raise DomainError("need 1/2 <= delta0 < delta < 1")
        self.delta0 = float(delta0)
        self.delta = float(delta)
        self.c = self.delta + self.delta0
        self.family = family
        self.a = np.array([math.ceil(r - d) for r, d in zip(family.rho, family.d)], dtype=float)
        self.b = np.array([math.floor(r + d) for r, d in zip(family.rho, family.d)], dtype=float)

    # -- construction check ------------------------------------------------
    def dd_residual(self) -> float:
        """max_k |d_k^(delta0+delta) / rho_k^(2 delta0) - 1|."""
        rho, d = self.family.rho_arr, self.family.d_arr
        if not rho.size:
            return 0.0
        lhs = (self.delta0 + self.delta) * np.log(d)
        rhs = 2 * self.delta0 * np.log(rho)
        return float(np.max(np.abs(np.expm1(lhs - rhs))))

    def hypothesis_family(self) -> IntervalFamily:
        """I_k = [rho_k - 2 d_k, rho_k + 2 d_k], the intervals used for the hypotheses."""
        return IntervalFamily(self.family.rho, [2 * d for d in self.family.d], self.family.k_offset)

    # -- evaluation ----------------------------------------------------------
    def _log_blocks(self, x, i):
        """log of the two far blocks and the near product for interval i (real x)."""
        a, b, c = self.a[i], self.b[i], self.c
        d0, de = self.delta0, self.delta
        fx = np.floor(x)
        m_left = np.minimum(b, fx - self.NEAR)       # last index of left block
        m_right = np.maximum(a, fx + self.NEAR + 1)  # first index of right block
        logv = np.zeros_like(x)
        cnt_l = m_left - a + 1
        has_l = cnt_l >= 1
        if np.any(has_l):
            y0 = x[has_l] - d0 - m_left[has_l]
            k = cnt_l[has_l]
            logv[has_l] += nx.lgamma_ratio(y0 + k, c) - nx.lgamma_ratio(y0, c)
        cnt_r = b - m_right + 1
        has_r = cnt_r >= 1
        if np.any(has_r):
            u0 = m_right[has_r] - x[has_r] - de
            k = cnt_r[has_r]
            logv[has_r] -= nx.lgamma_ratio(u0 + k, c) - nx.lgamma_ratio(u0, c)
        return logv, m_left, m_right

    def _evaluate(self, x, skip_zero=None):
        """G(x); with ``skip_zero`` (array of integers n) the factor (x - n + delta) is omitted."""
        x = np.asarray(x, dtype=float)
        scalar = x.ndim == 0
        x = np.atleast_1d(x)
        d0, de = self.delta0, self.delta
        ax = np.abs(x)
        pref = special.gamma(1.0 + d0) ** 2
        # G_0 = (x - 1/2) pref * trig * exp(-L) / pi for |x| >= 1
        trig = nx.sinpi(ax - d0)
        small = ax < 1.0
        log_amp = np.where(small, 0.0, -nx.lgamma_ratio(np.where(small, 2.0, ax) - d0, 1 + 2 * d0))
        base_small = pref * special.rgamma(1 + d0 + np.where(small, ax, 0.0)) * special.rgamma(1 + d0 - np.where(small, ax, 0.0))
        near_prod = np.ones_like(x)
        mstar = np.round(x - d0)
        for i in range(len(self.family)):
            a, b = self.a[i], self.b[i]
            if not np.any((x > a - self.NEAR - 2) | (x < b + self.NEAR + 2)):
                continue
            logv, m_left, m_right = self._log_blocks(x, i)
            log_amp = log_amp + logv
            for m_off in range(-self.NEAR - 1, self.NEAR + 2):
                m = np.floor(x) + m_off
                sel = (m > m_left) & (m < m_right) & (m >= a) & (m <= b)
                if not np.any(sel):
                    continue
                num = x - m + de
                if skip_zero is not None:
                    num = np.where(m == skip_zero, 1.0, num)
                den = x - d0 - m
                is_star = (m == mstar) & (x > 1.0)
                # sin(pi (x - d0)) / (x - d0 - m*) = (-1)^m* pi sinc(x - d0 - m*)
                star_val = np.where(np.fmod(np.abs(m), 2) == 1, -1.0, 1.0) * np.pi * nx.sinc(x - d0 - m)
                trig = np.where(sel & is_star, star_val, trig)
                factor = np.where(is_star, num, num / np.where(den == 0, 1.0, den))
                near_prod = np.where(sel, near_prod * factor, near_prod)
        val = np.where(small, base_small * near_prod * np.exp(log_amp),
                       pref * trig * near_prod * np.exp(log_amp) / np.pi)
        val = (x - 0.5) * val
        return val[0] if scalar else val

    def __call__(self, x):
        return self._evaluate(x)

    def g0(self, x):
        return kadets_g0(x, self.delta0)

    def deriv(self, x):
        x = np.asarray(x, dtype=float)
        h = np.minimum(1e-6 * np.maximum(1.0, np.abs(x)), 1e-4)
        return (self(x + h) - self(x - h)) / (2 * h)

    def deriv_at_zero(self, lam):
        """Exact for the moved zeros n - delta (factor removal), differences otherwise."""
        lam = np.asarray(lam, dtype=float)
        n = np.round(lam + self.delta)
        moved = np.abs(lam - (n - self.delta)) <= 1e-9 * np.maximum(1.0, np.abs(lam))
        inside = np.zeros(lam.shape, dtype=bool)
        for a, b in zip(self.a, self.b):
            inside |= (n >= a) & (n <= b)
        moved &= inside
        out = np.asarray(self.deriv(lam), dtype=float).copy()
        if np.any(moved):
            out[moved] = self._evaluate(lam[moved], skip_zero=n[moved])
        return out

    def eval_complex(self, z):
        z = np.asarray(z, dtype=complex)
        out = kadets_g0_complex(z, self.delta0)
        c = self.c
        for a, b in zip(self.a, self.b):
            # prod_{n=a}^{b} (z - n + delta)/(z - n - delta0) = prod (n - z - delta)/(n - z + delta0)
            u0 = a - z - self.delta
            cnt = b - a + 1
            # Gamma(u0 + cnt)/Gamma(u0) / [Gamma(u0 + c + cnt)/Gamma(u0 + c)]
            lg = (special.loggamma(u0 + cnt) - special.loggamma(u0)
                  - special.loggamma(u0 + c + cnt) + special.loggamma(u0 + c))
            out = out * np.exp(lg)
        return out

    def known_zeros(self, lo: float, hi: float) -> np.ndarray:
        """Zeros by construction: 1/2, +-(n + delta0) (n >= 1, moved ones removed), n - delta."""
        d0, de = self.delta0, self.delta
        pos = np.arange(max(1, math.ceil(lo - d0)), math.floor(hi - d0) + 1, dtype=float)
        neg = np.arange(max(1, math.ceil(-hi - d0)), math.floor(-lo - d0) + 1, dtype=float)
        inside = np.zeros(pos.shape, dtype=bool)
        moved = []
        for a, b in zip(self.a, self.b):
            inside |= (pos >= a) & (pos <= b)
            m = np.arange(max(a, math.ceil(lo + de)), min(b, math.floor(hi + de)) + 1, dtype=float)
            moved.append(m - de)
        zs = np.concatenate([pos[~inside] + d0, -(neg + d0), *moved,
                             np.array([0.5]) if lo <= 0.5 <= hi else np.zeros(0)])
        return np.sort(zs)

    # -- integer envelope ----------------------------------------------------
    def _log_abs_r(self, base, off, i):
        """log |prod_{m in I'_i} (n - m + delta)/(n - m - delta0)| at n = base + off."""
        a, b, c = self.a[i], self.b[i], self.c
        d0, de = self.delta0, self.delta
        da = (base - a) + off          # n - a, exact when off is small or base is near a
        db = (b - base) - off          # b - n
        out = np.zeros(np.shape(off))
        cnt = b - a + 1
        left = da < 0
        if np.any(left):
            u0 = -da[left] - de
            out[left] = -(nx.lgamma_ratio(u0 + cnt, c) - nx.lgamma_ratio(u0, c))
        right = db < 0
        if np.any(right):
            y0 = -db[right] - d0
            out[right] = nx.lgamma_ratio(y0 + cnt, c) - nx.lgamma_ratio(y0, c)
        mid = ~(left | right)
        if np.any(mid):
            out[mid] = (nx.lgamma_ratio(da[mid] + 1 - d0, c) - nx.lgamma_ratio(1 - d0, c)
                        + math.log(de / d0)
                        - nx.lgamma_ratio(db[mid] + 1 - de, c) + nx.lgamma_ratio(1 - de, c))
        return out

    def abs_at_integers(self, n, base: float = 0.0):
        """|G(n)| for integer n = base + n, as a smooth function between breakpoints.

        At integers sin(pi (n - delta0)) has modulus sin(pi delta0), and every
        product factor reduces to a ratio of gamma functions of positive
        arguments; the formula is therefore smooth in n on each of the pieces
        separated by the interval ends (used for lattice sums).  Passing an
        integer ``base`` near the evaluation points keeps distances to the
        interval ends exact at large |n|.
        """
        off = np.asarray(n, dtype=float)
        d0 = self.delta0
        full = base + off
        an = np.abs(full)
        pref = special.gamma(1.0 + d0) ** 2 * math.sin(math.pi * d0) / math.pi
        big = an >= 1.0
        logv = np.where(big, -nx.lgamma_ratio(np.where(big, an, 2.0) - d0, 1 + 2 * d0), 0.0)
        for i in range(len(self.family)):
            logv = logv + self._log_abs_r(float(base), off, i)
        # |G_0(0)| = 1/2
        return np.where(big, pref * np.abs(full - 0.5) * np.exp(logv), 0.5 * np.exp(logv))

    def breakpoints(self):
        pts = []
        for a, b in zip(self.a, self.b):
            pts.extend([a, b])
        return pts

    def sq_sum(self, a: int, b: int):
        return self.weighted_sq_sum_err(a, b, None)

    def weighted_sq_sum_err(self, lo: int, hi: int, weight):
        """Piecewise-smooth lattice sum of weight(n) |G(n)|^2 over [lo, hi]."""
        lo, hi = int(lo), int(hi)
        cuts = [lo]
        for p in sorted(set(self.breakpoints()) | {0.0}):
            for q in (p, p + 1):
                if lo < q <= hi:
                    cuts.append(int(q))
        cuts = sorted(set(cuts)) + [hi + 1]
        total, err = 0.0, 0.0
        for s, e in zip(cuts[:-1], cuts[1:]):
            if weight is None:
                fn = lambda base, off: self.abs_at_integers(off, base) ** 2
            else:
                fn = lambda base, off: weight(base + off) * self.abs_at_integers(off, base) ** 2
            v, er = nx.lattice_sum_local(fn, s, e - 1)
            total += v
            err += er
        return total, err

    def weighted_sq_sum(self, a, b, weight):
        return self.weighted_sq_sum_err(a, b, weight)[0]

    def to_dict(self):
        return {"kind": self.kind, "delta0": self.delta0, "delta": self.delta,
                "family": self.family.to_dict()}


def make_kadets(delta0: float, delta: float, rho_rule: dict, d_cap: float = 0.01) -> KadetsModel:
    """Kadets-type model with d_k = rho_k^(2 delta0/(delta0 + delta)).

    The family starts at the first k of the rule with d_k <= d_cap rho_k.
    ``rho_rule`` is {"kind": "powers_of_two", "k_min", "k_max", "center_shift"}
    or {"rho": [...], "k_offset": int}.
    """
    if not (0.5 <= delta0 < delta < 1.0):
        raise DomainError("need 1/2 <= delta0 < delta < 1")
    if not 0 < d_cap <= 0.1:
        raise DomainError("d_cap must lie in (0, 0.1]")
    expo = 2 * delta0 / (delta0 + delta)
    if "rho" in rho_rule:
        rho = np.asarray(rho_rule["rho"], dtype=float)
        ks = int(rho_rule.get("k_offset", 0)) + np.arange(rho.size)
    else:
        if rho_rule.get("kind", "powers_of_two") != "powers_of_two":
            raise DomainError("unknown rho rule")
        ks = np.arange(int(rho_rule.get("k_min", 1)), int(rho_rule["k_max"]) + 1)
        rho = np.ldexp(1.0, ks) + float(rho_rule.get("center_shift", 0.0))
    d = rho**expo
    ok = np.flatnonzero(d <= d_cap * rho)
    if ok.size == 0:
        raise DomainError("rho rule admits no k with d_k <= d_cap rho_k")
    first = ok[0]
    family = IntervalFamily(rho[first:].tolist(), d[first:].tolist(), int(ks[first]),
                            {"rho_rule": dict(rho_rule), "exponent": expo})
    return KadetsModel(delta0, delta, family)


def first_admissible_k(delta0: float, delta: float, d_cap: float = 0.01) -> int:
    """Smallest k with (2^k)^(1 - 2 delta0/(delta0+delta)) >= 1/d_cap."""
    expo = 1 - 2 * delta0 / (delta0 + delta)
    return math.ceil(math.log2(1.0 / d_cap) / expo - 1e-12)


# ----------------------------------------------------------------------
# principal-value products
# ----------------------------------------------------------------------

@dataclass(frozen=True)
class TruncationPolicy:
    tol: float = 1e-10
    max_doublings: int = 40
    r0: float = 1.0
    direct_max: int = 4096


@dataclass(frozen=True)
class PVResult:
    value: object
    rel_change: float
    radius: float
    doublings: int


def _shell_log(spectrum: Spectrum, z, r_lo: float, r_hi: float, direct_max: int):
    """log prod_{r_lo <= |lambda| < r_hi} (1 - z/lambda) and an exact-zero mask."""
    z = np.asarray(z)
    is_c = np.iscomplexobj(z)
    acc = np.zeros(z.shape, dtype=complex)
    hit = np.zeros(z.shape, dtype=bool)

    def direct(lams):
        nonlocal acc, hit
        for chunk in np.array_split(lams, max(1, lams.size // 65536)):
            f = 1.0 - z[..., None] / chunk
            zero = np.any(f == 0, axis=-1)
            hit |= zero
            acc = acc + np.sum(np.log(np.where(f == 0, 1.0, f).astype(complex)), axis=-1)

    for block in spectrum.shell(r_lo, r_hi):
        if block[0] == "points":
            direct(block[1])
            continue
        _, p, j0, j1 = block
        v = p.start / p.step
        c = -p.sign * z / p.step
        y0 = j0 + v
        if (j1 - j0) <= direct_max or y0 < 64 + 4 * float(np.max(np.abs(c), initial=0.0)):
            lams = p.sign * (p.start + p.step * np.arange(j0, j1, dtype=float))
            direct(lams)
        else:
            cc = c.astype(complex) if is_c else c
            acc = acc + (nx.lgamma_ratio(j1 + v, cc) - nx.lgamma_ratio(y0, cc))
    return acc, hit


def pv_product(spectrum: Spectrum, z, policy: TruncationPolicy = TruncationPolicy()) -> PVResult:
    """Symmetric truncation prod_{|lambda| < R} (1 - z/lambda), R doubled to convergence."""
    z_in = np.asarray(z)
    is_c = np.iscomplexobj(z_in)
    zz = np.atleast_1d(z_in.astype(complex if is_c else float))
    r = float(policy.r0)
    logp, hit = _shell_log(spectrum, zz, 0.0, r, policy.direct_max)
    last = np.exp(logp)
    bound = spectrum.max_abs()
    change = np.inf
    for it in range(1, policy.max_doublings + 1):
        r_new = 2.0 * r
        lg, h2 = _shell_log(spectrum, zz, r, r_new, policy.direct_max)
        logp = logp + lg
        hit |= h2
        cur = np.exp(logp)
        with np.errstate(invalid="ignore", divide="ignore"):
            rel = np.abs(np.expm1(lg))
        rel = np.where(hit, 0.0, rel)
        change = float(np.max(rel)) if rel.size else 0.0
        r = r_new
        if change < policy.tol or r > bound:
            out = np.where(hit, 0.0, cur)
            if not is_c:
                out = out.real
            val = out[0] if z_in.ndim == 0 else out
            return PVResult(val, change, r, it)
        last = cur
    raise ConvergenceError(f"pv product not converged after {policy.max_doublings} doublings "
                           f"(last relative change {change:.3g})", (last, cur))


class PVProductModel(GenFnModel):
    kind = "pv"

    def __init__(self, spectrum: Spectrum, policy: TruncationPolicy = TruncationPolicy()):
        super().__init__()
        self.spectrum = spectrum
        self.policy = policy

    def __call__(self, x):
        res = pv_product(self.spectrum, np.asarray(x, dtype=float), self.policy)
        return np.real(res.value)

    def eval_complex(self, z):
        return pv_product(self.spectrum, np.asarray(z, dtype=complex), self.policy).value

    def deriv_at_zero(self, lam):
        """G'(lambda_j) = -(1/lambda_j) prod_{lambda != lambda_j} (1 - lambda_j/lambda)."""
        lam = np.atleast_1d(np.asarray(lam, dtype=float))
        out = np.empty_like(lam)
        eps = 1e-7
        for i, l in enumerate(lam):
            # the removed factor is (1 - z/l); divide it out at a nearby point and take the limit
            zs = np.array([l * (1 - eps), l * (1 + eps)])
            vals = pv_product(self.spectrum, zs, self.policy).value
            ratio = vals / (1 - zs / l)
            out[i] = -0.5 * (ratio[0] + ratio[1]) / l
        return out

    def to_dict(self):
        return {"kind": self.kind, "tol": self.policy.tol, "max_doublings": self.policy.max_doublings}


# ----------------------------------------------------------------------
# zeros and samples
# ----------------------------------------------------------------------

def find_zeros(model: GenFnModel, window: tuple[float, float], step: float = 1.0 / 64,
               abs_tol: float = 1e-13) -> ZeroList:
    """All sign-change zeros on a scan grid, refined by bisection and one Newton polish."""
    lo, hi = float(window[0]), float(window[1])
    if not (math.isfinite(lo) and math.isfinite(hi)) or hi <= lo:
        raise DomainError("window must be finite and nonempty")

    def compute():
        left, right, fl, fr = nx.sign_change_brackets(model, lo, hi, step)
        if left.size == 0:
            e = np.zeros(0)
            return ZeroList(e, e, e, e, e, e, (lo, hi))
        root, blo, bhi = nx.bisect_many(model, left, right, abs_tol=abs_tol)
        der = np.asarray(model.deriv_at_zero(root), dtype=float)
        groot = np.asarray(model(root), dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            polished = root - groot / der
        accept = (np.isfinite(polished) & (polished > left) & (polished < right))
        if np.any(accept):
            gp = np.asarray(model(polished[accept]), dtype=float)
            better = np.abs(gp) <= np.abs(groot[accept])
            idx = np.flatnonzero(accept)[better]
            root[idx] = polished[idx]
        if np.any(der == 0):
            raise ConvergenceError("zero with vanishing derivative (not simple)", root[der == 0])
        root, keep = np.unique(root, return_index=True)
        return ZeroList(root, der[keep], left[keep], right[keep], fl[keep], fr[keep], (lo, hi))

    return model.cached_zeros((lo, hi, step, abs_tol), compute)


@dataclass
class IntegerSamples:
    n: np.ndarray
    values: np.ndarray
    inside_sq: float
    outside_sq: float


def samples_on_integers(model: GenFnModel, window: tuple[int, int],
                        family: IntervalFamily | None = None) -> IntegerSamples:
    """G(n) on an integer window and the split of sum G(n)^2 into inside/outside the I_k."""
    n = np.arange(int(window[0]), int(window[1]) + 1, dtype=float)
    vals = np.asarray(model(n), dtype=float)
    inside = family.contains(n) if family is not None else np.zeros(n.shape, dtype=bool)
    sq = vals**2
    return IntegerSamples(n, vals, nx.fsum(sq[inside]), nx.fsum(sq[~inside]))


def model_from_config(cfg: dict) -> GenFnModel:
    kind = cfg.get("kind")
    if kind == "simple_example":
        return SimpleExample(int(cfg.get("k_cap", 60)))
    if kind == "kadets":
        return make_kadets(float(cfg["delta0"]), float(cfg["delta"]), cfg["rho"],
                           float(cfg.get("d_cap", 0.01)))
    if kind == "pv":
        spec = Spectrum.from_config(cfg["spectrum"])
        pol = TruncationPolicy(tol=float(cfg.get("tol", 1e-10)),
                               max_doublings=int(cfg.get("max_doublings", 40)))
        return PVProductModel(spec, pol)
    raise DomainError(f"unknown model kind {kind!r}")


# ----------------------------------------------------------------------
# empirical checks used by the hypothesis reports
# ----------------------------------------------------------------------

def imaginary_axis_decay(model: GenFnModel, j_range=range(0, 9)) -> dict:
    """|G(iy)| e^(-pi |y|) at y = 2^j; condition (d) is read as monotone decrease."""
    ys = np.ldexp(1.0, np.asarray(list(j_range)))
    vals = np.abs(model.eval_complex(1j * ys))
    # e^(-pi y) applied in log space to avoid overflow of cosh
    scaled = np.exp(np.log(vals) - np.pi * ys)
    dec = bool(np.all(np.diff(scaled) < 0))
    return {"y": ys.tolist(), "scaled": scaled.tolist(), "decreasing": dec}


def kadets_band_ratio(model: KadetsModel, x) -> np.ndarray:
    """|G(x)| / [(|x|+1)^(-2 delta0) dist(x, Z_G) ((|x-(rho_k-d_k)|+1)/(|x-(rho_k+d_k)|+1))^(delta0+delta)].

    k is the interval whose band [(rho_(k-1)+rho_k)/2, (rho_k+rho_(k+1))/2] holds x.
    """
    x = np.asarray(x, dtype=float)
    fam = model.family
    rho, d = fam.rho_arr, fam.d_arr
    mids = np.concatenate([[-np.inf], 0.5 * (rho[:-1] + rho[1:]), [np.inf]])
    k = np.clip(np.searchsorted(mids, np.abs(x)) - 1, 0, rho.size - 1)
    zs = model.known_zeros(float(x.min()) - 4, float(x.max()) + 4)
    idx = np.clip(np.searchsorted(zs, x), 1, zs.size - 1)
    dist = np.minimum(np.abs(x - zs[idx - 1]), np.abs(x - zs[idx]))
    shape = ((np.abs(x - (rho[k] - d[k])) + 1) / (np.abs(x - (rho[k] + d[k])) + 1)) ** model.c
    denom = (np.abs(x) + 1) ** (-2 * model.delta0) * dist * shape
    return np.abs(model(x)) / denom
