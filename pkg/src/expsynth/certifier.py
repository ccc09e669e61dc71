"""Checks for spectra whose gaps have infinite logarithmic length.

The weights w_n = |G(n)| define a space of meromorphic functions with
reproducing kernels K_lambda whose squared norm is sum w_n^2/(n - lambda)^2.
The function M(t) = sum w_n^2/(n - t) has exactly one root between any two
consecutive poles, and kernels at distinct roots are orthogonal.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import numerics as nx
from .genfun import GenFnModel
from .numerics import DomainError, ExpsynthError, PoleError
from .spectra import IntervalFamily, log_length_terms

C1_START = 4.0
C1_CAP = 2.0**20


class WeightDegeneracyError(ExpsynthError, ValueError):
    """A weight that must be positive vanishes."""


class IntervalConsistencyError(ExpsynthError, ArithmeticError):
    """M has the same sign at both ends of a pole-to-pole interval."""


# ----------------------------------------------------------------------
# weights
# ----------------------------------------------------------------------

@dataclass(frozen=True)
class KernelWeights:
    """w_n on an integer window; ``abs_g`` evaluates |G(x)| off the integers."""

    lo: int
    w: np.ndarray
    source: str = "synthetic"
    abs_g: Callable | None = field(default=None, compare=False)

    def __post_init__(self):
        if np.any(self.w < 0) or not np.all(np.isfinite(self.w)):
            raise DomainError("weights must be finite and nonnegative")

    @property
    def hi(self) -> int:
        return self.lo + self.w.size - 1

    @property
    def n(self) -> np.ndarray:
        return np.arange(self.lo, self.hi + 1, dtype=float)

    def support(self) -> tuple[np.ndarray, np.ndarray]:
        """(n, w_n^2) over n with w_n > 0."""
        idx = np.flatnonzero(self.w > 0)
        return idx.astype(float) + self.lo, self.w[idx] ** 2

    def at(self, n) -> np.ndarray:
        idx = np.asarray(n, dtype=np.int64) - self.lo
        inside = (idx >= 0) & (idx < self.w.size)
        out = np.zeros(idx.shape)
        out[inside] = self.w[idx[inside]]
        return out

    def mass(self, a: float, b: float) -> float:
        """sum of w_n^2 over integers in [a, b]."""
        n, w2 = self.support()
        return nx.fsum(w2[(n >= a) & (n <= b)])

    def standing_partial(self) -> np.ndarray:
        """Partial sums of (w^2 + w)/(|n| + 1) over |n| <= 2^j."""
        n = self.n
        terms = (self.w**2 + self.w) / (np.abs(n) + 1)
        rmax = int(max(abs(self.lo), abs(self.hi)))
        out = []
        j = 0
        while 2**j <= rmax:
            out.append(nx.fsum(terms[np.abs(n) <= 2**j]))
            j += 1
        return np.array(out)

    @classmethod
    def from_model(cls, model: GenFnModel, window: tuple[int, int]) -> "KernelWeights":
        n = np.arange(int(window[0]), int(window[1]) + 1, dtype=float)
        w = np.abs(np.asarray(model(n), dtype=float))
        return cls(int(window[0]), w, model.kind, lambda x: np.abs(np.asarray(model(x), dtype=float)))

    @classmethod
    def uniform(cls, family: IntervalFamily, window: tuple[int, int]) -> "KernelWeights":
        """w_n = 1 on every I_k and 0 elsewhere; |G| taken as 1 on the intervals."""
        n = np.arange(int(window[0]), int(window[1]) + 1, dtype=float)
        w = family.contains(n).astype(float)
        return cls(int(window[0]), w, "uniform", lambda x: np.ones(np.shape(x)))

    @classmethod
    def atoms(cls, positions, weights_sq) -> "KernelWeights":
        """Finitely many atoms w_n^2 at integer positions."""
        pos = np.asarray(positions, dtype=np.int64)
        lo, hi = int(pos.min()), int(pos.max())
        w = np.zeros(hi - lo + 1)
        w[pos - lo] = np.sqrt(np.asarray(weights_sq, dtype=float))
        return cls(lo, w, "atoms")


# ----------------------------------------------------------------------
# M and kernels
# ----------------------------------------------------------------------

def _cauchy(n, w2, t, power: int = 1):
    t = np.atleast_1d(np.asarray(t, dtype=float))
    out = np.empty(t.size)
    chunk = max(1, (1 << 23) // max(1, n.size))
    for s in range(0, t.size, chunk):
        tt = t[s:s + chunk]
        out[s:s + chunk] = (w2[None, :] / (n[None, :] - tt[:, None]) ** power).sum(axis=1)
    return out


def m_eval(weights: KernelWeights, t):
    """M(t) = sum w_n^2/(n - t) over the window, and a tail estimate.

    The tail estimate is the contribution of the outermost dyadic shell of
    the window, a majorant of what lies beyond it when the weights decay at
    least geometrically per shell.
    """
    t = np.asarray(t, dtype=float)
    if np.any(t == np.round(t)):
        raise PoleError("M has poles at the integers")
    n, w2 = weights.support()
    val = _cauchy(n, w2, t)
    r = max(abs(weights.lo), abs(weights.hi))
    shell = np.abs(n) > r / 2
    tail = _cauchy(n[shell], w2[shell], t) if np.any(shell) else np.zeros(np.size(t))
    val = val.reshape(t.shape) if t.ndim else val[0]
    return val, np.abs(tail).reshape(t.shape) if t.ndim else abs(tail[0])


def m_deriv(weights: KernelWeights, t):
    """M'(t) = sum w_n^2/(t - n)^2 (strictly positive off the poles)."""
    n, w2 = weights.support()
    return _cauchy(n, w2, t, power=2)


def kernel_norm_sq(weights: KernelWeights, lam):
    """||K_lambda||^2 = sum w_n^2/(n - lambda)^2."""
    return m_deriv(weights, lam)


def kernel_gram(weights: KernelWeights, points) -> np.ndarray:
    """<K_x, K_y> = sum w_n^2 / ((n - x)(n - y)) for all pairs."""
    n, w2 = weights.support()
    p = np.asarray(points, dtype=float)
    q = w2[None, :] / (n[None, :] - p[:, None])
    return q @ (1.0 / (n[:, None] - p[None, :]))


@dataclass
class MRootTable:
    k: np.ndarray
    n: np.ndarray
    t: np.ndarray
    lo: np.ndarray
    hi: np.ndarray
    m_lo: np.ndarray
    m_hi: np.ndarray
    eps: np.ndarray
    in_j: np.ndarray

    def rows_for(self, k: int) -> np.ndarray:
        return np.flatnonzero(self.k == k)

    def grid_confirm(self, weights: KernelWeights, step: float = 1e-3) -> np.ndarray:
        """Number of sign changes of M on a grid of each (n, n+1) (expected 1)."""
        counts = np.empty(self.n.size, dtype=int)
        offs = np.arange(step, 1.0, step)
        for i, n0 in enumerate(self.n):
            vals, _ = m_eval(weights, n0 + offs)
            s = np.sign(vals)
            counts[i] = int(np.sum(s[:-1] * s[1:] < 0))
        return counts


def half_interval(family: IntervalFamily, i: int) -> tuple[float, float]:
    """J_k = [rho_k - d_k/2, rho_k + d_k/2]."""
    return family.rho[i] - 0.5 * family.d[i], family.rho[i] + 0.5 * family.d[i]


def _unit_intervals(family: IntervalFamily, i: int, weights: KernelWeights | None = None) -> np.ndarray:
    """Integers n in J_k; each labels the pole-to-pole interval (n, n+1).

    With ``weights`` given, n whose right neighbour carries no weight are
    skipped (M has no pole at n+1 there); a zero weight at n itself raises.
    """
    lo, hi = half_interval(family, i)
    n = np.arange(math.ceil(lo), math.floor(hi) + 1, dtype=float)
    if weights is None:
        return n
    if np.any(weights.at(n) <= 0):
        raise WeightDegeneracyError(f"zero weight in J_k at n in {n[weights.at(n) <= 0][:5].tolist()}")
    return n[weights.at(n + 1) > 0]


def m_roots(weights: KernelWeights, family: IntervalFamily, abs_tol: float = 1e-13) -> MRootTable:
    """The root of M in each (n, n+1) with n in some J_k, by bisection.

    Between consecutive poles M is strictly increasing (M' > 0), from -inf
    at n+ to +inf at (n+1)-, so the root is unique when w_n, w_{n+1} > 0.
    """
    ks, ns = [], []
    for i, k in enumerate(family.ks):
        u = _unit_intervals(family, i, weights)
        ks.append(np.full(u.size, k))
        ns.append(u)
    k_arr = np.concatenate(ks) if ks else np.zeros(0, dtype=int)
    n_arr = np.concatenate(ns) if ns else np.zeros(0)
    if n_arr.size and (np.any(weights.at(n_arr) <= 0) or np.any(weights.at(n_arr + 1) <= 0)):
        bad = n_arr[(weights.at(n_arr) <= 0) | (weights.at(n_arr + 1) <= 0)][:5]
        raise WeightDegeneracyError(f"zero weight at an end of (n, n+1) for n in {bad.tolist()}")
    fn = lambda x: m_eval(weights, x)[0]
    # start just inside the poles, where the pole term dominates
    delta = 1e-9
    lo = n_arr + delta
    hi = n_arr + 1 - delta
    flo, fhi = fn(lo), fn(hi)
    bad = ~((flo < 0) & (fhi > 0))
    if np.any(bad):
        raise IntervalConsistencyError(
            f"M does not change sign on (n, n+1) for n in {n_arr[bad][:5].tolist()}")
    root, blo, bhi = nx.bisect_many(fn, lo, hi, abs_tol=abs_tol)
    eps = np.minimum(root - n_arr, n_arr + 1 - root)
    in_j = np.zeros(root.size, dtype=bool)
    for i, k in enumerate(family.ks):
        a, b = half_interval(family, i)
        sel = k_arr == k
        in_j[sel] = (root[sel] >= a) & (root[sel] <= b)
    return MRootTable(k_arr, n_arr, root, blo, bhi, fn(blo), fn(bhi), eps, in_j)


# ----------------------------------------------------------------------
# N_k and separation
# ----------------------------------------------------------------------

@dataclass
class NkSelection:
    k: int
    n: np.ndarray
    c1: float
    size: int
    target: float
    ok: bool
    kernel_sum_ratio: float


def select_nk(weights: KernelWeights, family: IntervalFamily, c1_start: float = C1_START,
              c1_cap: float = C1_CAP) -> list[NkSelection]:
    """N_k = {n : ||K_(n+1/2)||^2 and |M(n+1/2)| both <= C1 g_k/d_k}, C1 doubled until |N_k| >= d_k/2."""
    out = []
    for i, k in enumerate(family.ks):
        g = weights.mass(family.lower[i], family.upper[i])
        if g <= 0:
            raise WeightDegeneracyError(f"g_k = 0 at k={k}")
        d = family.d[i]
        cand = _unit_intervals(family, i, weights)
        kn = kernel_norm_sq(weights, cand + 0.5)
        mh = np.abs(m_eval(weights, cand + 0.5)[0])
        c1 = c1_start
        while True:
            thr = c1 * g / d
            sel = (kn <= thr) & (mh <= thr)
            if sel.sum() >= d / 2 or c1 >= c1_cap:
                break
            c1 *= 2
        out.append(NkSelection(int(k), cand[sel], c1, int(sel.sum()), d / 2, bool(sel.sum() >= d / 2),
                               float(nx.fsum(kn) / g)))
    return out


def epsilon_separation(table: MRootTable, nk: list[NkSelection]) -> dict:
    """min over n in N_k of dist(t_n, {n, n+1}), per k."""
    floors = {}
    for sel in nk:
        rows = table.rows_for(sel.k)
        mask = np.isin(table.n[rows], sel.n)
        floors[sel.k] = float(np.min(table.eps[rows][mask])) if np.any(mask) else float("nan")
    return floors


# ----------------------------------------------------------------------
# condition checks
# ----------------------------------------------------------------------

@dataclass
class CertificateReport:
    ks: list
    g: list
    cond_i: list
    cond_ii: list
    cond_ii_grid_step: list
    flagged_i: list
    c_empirical: float
    log_partial: list
    log_slope: float
    log_min_k_ratio: float
    log_divergent: bool
    standing_partial: list
    nk: list = field(default_factory=list)
    eps_floor: dict = field(default_factory=dict)
    roots: dict = field(default_factory=dict)
    kernel_sum_ratios: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        nk_ok = all(s["ok"] for s in self.nk)
        return bool(self.log_divergent and nk_ok and np.isfinite(self.c_empirical))

    def to_dict(self) -> dict:
        out = dict(self.__dict__)
        out["eps_floor"] = {str(k): v for k, v in self.eps_floor.items()}
        out["passed"] = self.passed
        return out


def check_conditions(weights: KernelWeights, family: IntervalFamily, flag_above: float = 100.0,
                     require_integer_free: bool = False) -> CertificateReport:
    """Per-k ratios for conditions (i) and (ii) and the log-length diagnostic.

    (i): (d_k/g_k) sum_{n not in I_k} w_n^2/|n - rho_k|.
    (ii): max over a grid of I_k (step min(0.1, d_k/32)) of sqrt(g_k/d_k)/|G(x)|.
    k whose (i) ratio exceeds ``flag_above`` are flagged: the condition asks
    for one bound across k, and a single heavy interval lifts the ratios of
    all the others, so a comparison with the median would hide it.
    """
    if require_integer_free and np.any(weights.w == 0):
        bad = weights.n[weights.w == 0][:5]
        raise WeightDegeneracyError(f"G vanishes at integers {bad.tolist()}")
    n, w2 = weights.support()
    g, ci, cii, steps = [], [], [], []
    for i in range(len(family)):
        lo, hi = family.lower[i], family.upper[i]
        inside = (n >= lo) & (n <= hi)
        gk = nx.fsum(w2[inside])
        if gk <= 0:
            raise WeightDegeneracyError(f"g_k = 0 at k={family.ks[i]}")
        g.append(gk)
        d, rho = family.d[i], family.rho[i]
        ci.append(d / gk * nx.fsum(w2[~inside] / np.abs(n[~inside] - rho)))
        step = min(0.1, d / 32)
        x = np.arange(lo, hi + step / 2, step)
        if weights.abs_g is None:
            raise DomainError("condition (ii) needs |G| off the integers")
        ag = np.asarray(weights.abs_g(x), dtype=float)
        if np.any(ag == 0):
            raise WeightDegeneracyError(f"G vanishes on the grid of I_k, k={family.ks[i]}")
        cii.append(float(np.max(math.sqrt(gk / d) / ag)))
        steps.append(step)
    ci_arr = np.array(ci)
    flagged = [int(k) for k, r in zip(family.ks, ci_arr) if r > flag_above]
    terms = log_length_terms(family)
    partial = np.cumsum(terms)
    ks = family.ks.astype(float)
    slope = float(np.polyfit(ks, partial, 1)[0]) if len(family) >= 2 else 0.0
    min_k_ratio = float(np.min(terms * ks)) if len(family) else 0.0
    c_emp = float(max(np.max(ci_arr, initial=0.0), np.max(cii, initial=0.0)))
    return CertificateReport(
        ks=family.ks.tolist(), g=g, cond_i=ci, cond_ii=cii, cond_ii_grid_step=steps, flagged_i=flagged,
        c_empirical=c_emp, log_partial=partial.tolist(), log_slope=slope,
        log_min_k_ratio=min_k_ratio, log_divergent=bool(slope > 0 and min_k_ratio > 0),
        standing_partial=weights.standing_partial().tolist())


def certify(weights: KernelWeights, family: IntervalFamily, c1_cap: float = C1_CAP) -> CertificateReport:
    """Conditions, the M-root table, the sets N_k and the separation floor."""
    rep = check_conditions(weights, family)
    table = m_roots(weights, family)
    nk = select_nk(weights, family, c1_cap=c1_cap)
    rep.nk = [{"k": s.k, "c1": s.c1, "size": s.size, "target": s.target, "ok": s.ok} for s in nk]
    rep.eps_floor = epsilon_separation(table, nk)
    rep.kernel_sum_ratios = [s.kernel_sum_ratio for s in nk]
    in_nk = np.zeros(table.n.size, dtype=bool)
    for s in nk:
        rows = table.rows_for(s.k)
        in_nk[rows] = np.isin(table.n[rows], s.n)
    rep.roots = {"n": table.n.tolist(), "t": table.t.tolist(), "eps": table.eps.tolist(),
                 "in_nk": in_nk.tolist()}
    return rep


# ----------------------------------------------------------------------
# Cauchy transforms
# ----------------------------------------------------------------------

@dataclass
class CauchyZeros:
    s: np.ndarray
    partial: np.ndarray


def cauchy_zeros(mu, t, abs_tol: float = 1e-13) -> CauchyZeros:
    """Zeros of f(z) = sum mu_k/(z - t_k) between consecutive poles.

    f decreases strictly between poles (from +inf to -inf) so each gap holds
    exactly one zero.  Also returns partial sums of (t_(k+1) - s_k)/s_k over
    gaps with t_k > 0.
    """
    mu = np.asarray(mu, dtype=float)
    t = np.asarray(t, dtype=float)
    if mu.shape != t.shape or np.any(mu < 0):
        raise DomainError("mu must be nonnegative and match t")
    if not np.any(mu > 0):
        raise DomainError("all mu vanish")
    if np.any(np.diff(t) <= 0):
        raise DomainError("t must be strictly increasing")
    keep = mu > 0
    mu, t = mu[keep], t[keep]

    def f(z):
        z = np.atleast_1d(z)
        return (mu[None, :] / (z[:, None] - t[None, :])).sum(axis=1)

    lo = t[:-1] + 1e-12 * np.maximum(1.0, np.abs(t[:-1]))
    hi = t[1:] - 1e-12 * np.maximum(1.0, np.abs(t[1:]))
    bad = ~((f(lo) > 0) & (f(hi) < 0))
    if np.any(bad):
        # the zero sits closer to a pole than double precision resolves
        raise DomainError(f"weights too small to separate the zero from the pole in gaps {np.flatnonzero(bad)[:5].tolist()}")
    s, _, _ = nx.bisect_many(f, lo, hi, abs_tol=abs_tol)
    if not np.all((t[:-1] < s) & (s < t[1:])):
        raise nx.ContractError("interlacing t_k < s_k < t_(k+1) violated")
    pos = t[:-1] > 0
    terms = (t[1:][pos] - s[pos]) / s[pos]
    return CauchyZeros(s, np.cumsum(terms))


def functional_identity_residual(model: GenFnModel, n, a, z_samples) -> dict:
    """Both sides of f(z) sum a_n G(n)/(z-n) = G(z) sum a_n^2/(z-n), f(z) = sin(pi z) sum (-1)^n a_n/(z-n)."""
    n = np.asarray(n, dtype=float)
    a = np.asarray(a, dtype=float)
    z = np.asarray(z_samples, dtype=float)
    if np.any(z == np.round(z)):
        raise PoleError("z must avoid the integers")
    gn = np.asarray(model(n), dtype=float)
    gz = np.asarray(model(z), dtype=float)
    sign = np.where(np.fmod(np.abs(n), 2) == 1, -1.0, 1.0)
    inv = 1.0 / (z[:, None] - n[None, :])
    fz = nx.sinpi(z) * np.array([nx.fsum(r) for r in (sign * a)[None, :] * inv])
    left = fz * np.array([nx.fsum(r) for r in (a * gn)[None, :] * inv])
    right = gz * np.array([nx.fsum(r) for r in (a * a)[None, :] * inv])
    res = np.abs(left - right)
    return {"z": z.tolist(), "left": left.tolist(), "right": right.tolist(), "residual": res.tolist(),
            "max_residual": float(np.max(res)) if res.size else 0.0}
