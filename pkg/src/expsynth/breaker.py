"""Construction of an annihilating pair (f, g) for a spectrum with lacunary
gaps of finite logarithmic length.

Pipeline: measure the hypotheses, pick one zero t_k of G beside every
interval, form m(z) = prod (1 - z/rho_k)/(1 - z/t_k) and f = G m, solve the
fixed-point system for the coefficients c_k, and build the sequence b whose
pairing with a_n = (-1)^n f(n) is nonzero while the orthogonality relations
at every t_k hold.  Every sum over Z is truncated to the configured window.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import numerics as nx
from .genfun import GenFnModel, ZeroList, find_zeros, imaginary_axis_decay
from .numerics import (ConvergenceError, DomainError, ExpsynthError, PoleError,
                       PreconditionError, StructuralError)
from .spectra import (HALF_LENGTH_RATIO, Check, IntervalFamily, SideIntervalData,
                      drop_prefix, log_length_terms, side_intervals, validate_family)

RATIO_TEST_LOG = math.log(0.99)
PRODUCT_RANGE = (1e-3, 1e3)


class PivotError(ExpsynthError, ZeroDivisionError):
    """a_0 = 0, so b_0 = 1/a_0 is undefined."""


class DegenerateIntervalError(StructuralError):
    """Some D_k vanishes."""


class NonContractionError(ConvergenceError):
    """The fixed-point map was observed not to contract."""


# ----------------------------------------------------------------------
# configuration and sequences
# ----------------------------------------------------------------------

@dataclass
class BreakerConfig:
    model: GenFnModel
    family: IntervalFamily
    window: tuple[int, int]
    eta: float = 0.01
    fp_tol: float = 1e-12
    fp_max_iter: int = 200
    cell_length: float = 3.0
    s_rescale: float = 1.0
    zero_step: float = 1.0 / 64
    origin_window: float = 4096.0
    integer_tol: float = 1e-9
    decay_j: tuple[int, int] = (0, 7)

    def __post_init__(self):
        lo, hi = int(self.window[0]), int(self.window[1])
        if hi <= lo:
            raise DomainError("window must be a nonempty integer range")
        self.window = (lo, hi)
        if not 0 < self.eta < 1:
            raise DomainError("eta must lie in (0, 1)")
        if self.fp_tol <= 0 or self.fp_max_iter < 1 or self.cell_length <= 0:
            raise DomainError("tolerances and cell length must be positive")
        if not 0 < self.s_rescale <= 1:
            raise DomainError("s_rescale must lie in (0, 1]")


@dataclass(frozen=True)
class WindowSeq:
    """Real sequence indexed by the integers lo .. lo + len - 1."""

    lo: int
    values: np.ndarray

    @property
    def hi(self) -> int:
        return self.lo + self.values.size - 1

    @property
    def n(self) -> np.ndarray:
        return np.arange(self.lo, self.hi + 1, dtype=float)

    def at(self, n):
        idx = np.asarray(n, dtype=np.int64) - self.lo
        if np.any((idx < 0) | (idx >= self.values.size)):
            raise nx.RangeError("index outside the window")
        return self.values[idx]

    def slice(self, a: int, b: int) -> tuple[np.ndarray, np.ndarray]:
        a, b = max(int(a), self.lo), min(int(b), self.hi)
        if b < a:
            return np.zeros(0), np.zeros(0)
        return np.arange(a, b + 1, dtype=float), self.values[a - self.lo:b - self.lo + 1]

    def norm(self) -> float:
        return math.sqrt(nx.fsum(self.values**2))


def _int_range(lo: float, hi: float) -> tuple[int, int]:
    return math.ceil(lo), math.floor(hi)


def _complement_ranges(lo: int, hi: int, family: IntervalFamily) -> list[tuple[int, int]]:
    """Integer ranges covering [lo, hi] minus the intervals of ``family``."""
    out = []
    cur = lo
    for a, b in sorted(zip(np.ceil(family.lower), np.floor(family.upper))):
        a, b = int(a), int(b)
        if b < cur or a > hi:
            continue
        if a > cur:
            out.append((cur, min(a - 1, hi)))
        cur = max(cur, b + 1)
        if cur > hi:
            break
    if cur <= hi:
        out.append((cur, hi))
    return out


def ratio_test(terms) -> dict:
    """Convergence diagnostic: mean log-ratio of the trailing half of the positive terms."""
    t = np.asarray(terms, dtype=float)
    pos = t[t > 0]
    if pos.size == 0:
        return {"converges": True, "mean_log_ratio": float("-inf"), "last_term": 0.0}
    if pos.size < 3:
        return {"converges": False, "mean_log_ratio": float("nan"), "last_term": float(pos[-1])}
    lr = np.diff(np.log(pos))
    tail = lr[-max(2, lr.size // 2):]
    mean = float(np.mean(tail))
    return {"converges": bool(mean <= RATIO_TEST_LOG), "mean_log_ratio": mean,
            "last_term": float(pos[-1])}


# ----------------------------------------------------------------------
# hypotheses
# ----------------------------------------------------------------------

@dataclass
class HypothesisSums:
    family: IntervalFamily
    g: np.ndarray
    side: SideIntervalData
    outside_shells: np.ndarray
    outside_partial: np.ndarray
    side_terms: np.ndarray
    side_partial: np.ndarray
    log_terms: np.ndarray
    log_partial: np.ndarray
    effective_radius: float


def hypothesis_sums(model: GenFnModel, family: IntervalFamily, window: tuple[int, int],
                    s_rescale: float = 1.0) -> HypothesisSums:
    """g_k, s_k, J_k and the partial sums behind conditions (i), (ii), (iv).

    The outside sum is taken over dyadic shells up to min(window, 1.5 rho_last):
    past the last interval the truncated family no longer describes where G is
    large.
    """
    g = np.array([model.sq_sum(*_int_range(r - d, r + d))[0] for r, d in zip(family.rho, family.d)])
    side = side_intervals(family, g, s_rescale)
    r_max = min(float(max(-window[0], window[1])),
                1.5 * family.rho_arr[-1] if len(family) else float(window[1]))
    j_max = max(1, int(math.floor(math.log2(r_max))))
    shells = []
    for j in range(0, j_max + 1):
        if j == 0:
            pieces = [(-1, 1)]
        else:
            lo, hi = 2 ** (j - 1) + 1, 2**j
            pieces = [(-hi, -lo), (lo, hi)]
        tot = 0.0
        for a, b in pieces:
            for s, e in _complement_ranges(a, b, family):
                tot += model.sq_sum(s, e)[0]
        shells.append(tot)
    shells = np.array(shells)
    side_terms = []
    for i in range(len(family)):
        tot = 0.0
        for lo, hi in (side.j_minus[i], side.j_plus[i]):
            a, b = _int_range(lo, hi)
            if b >= a:
                tot += model.sq_sum(a, b)[0]
        side_terms.append(side.s[i] * tot)
    side_terms = np.array(side_terms)
    logt = log_length_terms(family)
    return HypothesisSums(family, g, side, shells, np.cumsum(shells), side_terms,
                          np.cumsum(side_terms), logt, np.cumsum(logt), r_max)


@dataclass
class HypothesisReport:
    sums: HypothesisSums
    checks: dict
    structural: list
    keep_from: int
    kept: IntervalFamily
    zeros: list
    decay: dict

    CONDITIONS = ("a", "b", "c", "d", "i", "ii", "iii", "iv")

    @property
    def passed(self) -> bool:
        return all(self.checks[c].passed for c in self.CONDITIONS)

    @property
    def structural_passed(self) -> bool:
        return all(c.passed for c in self.structural)

    def to_dict(self) -> dict:
        s = self.sums
        return {
            "passed": self.passed,
            "checks": {k: v.to_dict() for k, v in self.checks.items()},
            "structural": [c.to_dict() for c in self.structural],
            "ks": s.family.ks.tolist(),
            "g": s.g.tolist(),
            "s": s.side.s.tolist(),
            "violates_iii": s.side.violates_iii.tolist(),
            "kept_ks": self.kept.ks.tolist(),
            "outside_shells": s.outside_shells.tolist(),
            "side_terms": s.side_terms.tolist(),
            "log_terms": s.log_terms.tolist(),
            "effective_radius": s.effective_radius,
            "decay": self.decay,
        }


def _zero_regions(cfg: BreakerConfig, side: SideIntervalData, ks_idx) -> list[tuple[float, float]]:
    z0 = min(cfg.origin_window, float(cfg.window[1]), float(-cfg.window[0]))
    regions = [(-z0, z0)]
    for i in ks_idx:
        if side.degenerate[i]:
            continue
        for sgn in ("-", "+"):
            regions.append(side.half(i, sgn))
    return regions


def check_hypotheses(cfg: BreakerConfig) -> HypothesisReport:
    """Conditions (a)-(d) on sampled zero sets and (i)-(iv) as partial sums.

    (iii) is asymptotic: it passes when the violating k form a proper prefix,
    which is then dropped (together with degenerate k and the log-length
    prefix beyond ``eta``) to give the kept family.
    """
    fam = cfg.family
    if len(fam) == 0:
        raise DomainError("empty interval family")
    sums = hypothesis_sums(cfg.model, fam, cfg.window, cfg.s_rescale)
    side = sums.side
    checks = {}

    # (iii) and the kept family
    viol = np.flatnonzero(side.violates_iii | side.degenerate)
    start_iii = int(viol[-1]) + 1 if viol.size else 0
    prefix_ok = viol.size == 0 or (np.array_equal(viol, np.arange(viol.size)) and start_iii < len(fam))
    checks["iii"] = Check("iii", bool(prefix_ok),
                          f"s_k <= {HALF_LENGTH_RATIO} rho_k from k = "
                          f"{fam.ks[min(start_iii, len(fam) - 1)]} on; violators {fam.ks[viol].tolist()}",
                          float(np.max(side.s / fam.rho_arr)))
    tail = fam.tail(min(start_iii, len(fam) - 1))
    eta_tail = drop_prefix(tail, cfg.eta)
    keep_from = start_iii + (len(tail) - len(eta_tail))
    if keep_from >= len(fam):
        keep_from = len(fam) - 1
    kept = fam.tail(keep_from)

    # window precondition on the kept family
    for i in range(keep_from, len(fam)):
        lo = fam.rho[i] - fam.d[i] - 4 * side.s[i]
        hi = fam.rho[i] + fam.d[i] + 4 * side.s[i]
        if lo < cfg.window[0] or hi > cfg.window[1]:
            raise PreconditionError(
                f"window {cfg.window} does not cover interval k={fam.ks[i]} with margin 2 s_k")

    rt = ratio_test(sums.outside_shells)
    checks["i"] = Check("i", rt["converges"], f"outside l2 shells, mean log ratio {rt['mean_log_ratio']:.4g}",
                        float(sums.outside_partial[-1]))
    rt = ratio_test(sums.side_terms[keep_from:])
    checks["ii"] = Check("ii", rt["converges"], f"mean log ratio {rt['mean_log_ratio']:.4g}",
                         float(sums.side_partial[-1]))
    rt = ratio_test(sums.log_terms)
    checks["iv"] = Check("iv", rt["converges"], f"mean log ratio {rt['mean_log_ratio']:.4g}",
                         float(sums.log_partial[-1]))

    # (a)-(c) on scanned zero sets
    regions = _zero_regions(cfg, side, range(keep_from, len(fam)))
    zls = []
    simple, dmin, gap = True, float("inf"), 0.0
    count = 0
    for lo, hi in regions:
        try:
            zl = find_zeros(cfg.model, (lo, hi), cfg.zero_step)
        except ConvergenceError:
            simple = False
            continue
        zls.append(zl)
        count += len(zl)
        if len(zl):
            simple &= bool(np.all(np.isfinite(zl.derivs)) and np.all(zl.derivs != 0))
            dmin = min(dmin, float(np.min(np.abs(zl.zeros - np.round(zl.zeros)))))
            pts = np.concatenate([[lo], zl.zeros, [hi]])
            gap = max(gap, float(np.max(np.diff(pts))))
        else:
            gap = max(gap, hi - lo)
    checks["a"] = Check("a", bool(simple and count > 0), f"{count} simple real zeros on {len(regions)} regions",
                        float(count))
    checks["b"] = Check("b", dmin > cfg.integer_tol, "min distance of zeros to Z", dmin)
    checks["c"] = Check("c", gap <= cfg.cell_length, f"max gap between zeros (C = {cfg.cell_length})", gap)
    decay = imaginary_axis_decay(cfg.model, range(cfg.decay_j[0], cfg.decay_j[1] + 1))
    checks["d"] = Check("d", decay["decreasing"], "|G(iy)| exp(-pi |y|) decreasing at y = 2^j",
                        float(decay["scaled"][-1]))
    structural = validate_family(fam).checks
    return HypothesisReport(sums, checks, structural, keep_from, kept, zls, decay)


# ----------------------------------------------------------------------
# zero selection and m
# ----------------------------------------------------------------------

@dataclass
class Selection:
    family: IntervalFamily
    t: np.ndarray
    sides: list
    costs: np.ndarray
    running_products: np.ndarray
    candidates: dict


def _side_sample(model: GenFnModel, side: SideIntervalData, i: int):
    ns, vals = [], []
    for lo, hi in (side.j_minus[i], side.j_plus[i]):
        a, b = _int_range(lo, hi)
        n = np.arange(a, b + 1, dtype=float)
        ns.append(n)
        vals.append(np.asarray(model(n), dtype=float))
    return np.concatenate(ns), np.concatenate(vals)


def selection_cost(lam, n, w) -> np.ndarray:
    """sum_n w_n / (n - lambda)^2 for each lambda (chunked)."""
    lam = np.atleast_1d(np.asarray(lam, dtype=float))
    out = np.empty(lam.size)
    chunk = max(1, (1 << 24) // max(1, n.size))
    for s in range(0, lam.size, chunk):
        l = lam[s:s + chunk]
        out[s:s + chunk] = ((1.0 / (n[None, :] - l[:, None]) ** 2) @ w)
    return out


def select_tk(cfg: BreakerConfig, family: IntervalFamily, side: SideIntervalData) -> Selection:
    """One zero per side of every interval, then a greedy side choice.

    ``side`` must be indexed like ``family``.  Each half side interval is cut
    into cells of length in [C, 2C); each cell contributes its cheapest zero
    and the side candidate is the cheapest of those.
    """
    C = cfg.cell_length
    t, sides, costs, prods = [], [], [], []
    cands = {}
    logp = 0.0
    lo_log, hi_log = math.log(PRODUCT_RANGE[0]), math.log(PRODUCT_RANGE[1])
    for i, k in enumerate(family.ks):
        if side.degenerate[i]:
            raise StructuralError(f"k={k}: g_k = 0, interval must be excluded")
        n, gv = _side_sample(cfg.model, side, i)
        w = side.s[i] ** 2 * gv**2
        options = {}
        for sgn in ("-", "+"):
            lo, hi = side.half(i, sgn)
            zl = find_zeros(cfg.model, (lo, hi), cfg.zero_step)
            ncell = max(1, int(math.floor((hi - lo) / C)))
            edges = np.linspace(lo, hi, ncell + 1)
            cell = np.clip(np.searchsorted(edges, zl.zeros, side="right") - 1, 0, ncell - 1)
            present = np.zeros(ncell, dtype=bool)
            present[cell] = True
            if not np.all(present):
                bad = int(np.flatnonzero(~present)[0])
                raise StructuralError(f"k={k} side {sgn}: no zero of G in cell "
                                      f"[{edges[bad]!r}, {edges[bad + 1]!r}]")
            cost = selection_cost(zl.zeros, n, w)
            # cheapest zero of each cell, then cheapest cell
            picks = np.array([np.flatnonzero(cell == c)[np.argmin(cost[cell == c])] for c in range(ncell)])
            best = picks[np.argmin(cost[picks])]
            options[sgn] = (float(zl.zeros[best]), float(cost[best]))
            cands[(int(k), sgn)] = ncell
        rho = family.rho[i]
        best_sgn, best_val = None, None
        for sgn in ("+", "-"):
            cand = logp + math.log(options[sgn][0] / rho)
            if not lo_log <= cand <= hi_log:
                continue
            if best_val is None or abs(cand) < abs(best_val) - 1e-15:
                best_sgn, best_val = sgn, cand
        if best_sgn is None:
            raise StructuralError(f"k={k}: neither side keeps the running product in {PRODUCT_RANGE}")
        logp = best_val
        t.append(options[best_sgn][0])
        costs.append(options[best_sgn][1])
        sides.append(best_sgn)
        prods.append(math.exp(logp))
    return Selection(family, np.array(t), sides, np.array(costs), np.array(prods), cands)


def eval_m(z, rho, t):
    """m(z) = prod_k (1 - z/rho_k) / (1 - z/t_k) (finite product, real z)."""
    z = np.asarray(z, dtype=float)
    rho = np.asarray(rho, dtype=float)
    t = np.asarray(t, dtype=float)
    if np.any(np.isin(z, t)):
        raise PoleError("m has a pole at every t_k")
    out = np.ones_like(z)
    for r, tk in zip(rho, t):
        out = out * ((r - z) / r) * (tk / (tk - z))
    return out


def m_deriv_at_rho(rho, t) -> np.ndarray:
    """m'(rho_j) for every j."""
    rho = np.asarray(rho, dtype=float)
    t = np.asarray(t, dtype=float)
    out = np.empty(rho.size)
    for j, r in enumerate(rho):
        others = np.arange(rho.size) != j
        rest = eval_m(np.array([r]), rho[others], t[others])[0]
        out[j] = (-1.0 / r) * (t[j] / (t[j] - r)) * rest
    return out


def m_band_constants(rho, t, samples: int = 64) -> dict:
    """Empirical constants in |m(x)| ~ |x - rho_k| / |x - t_k| on the band around rho_k."""
    rho = np.asarray(rho, dtype=float)
    lo_c, hi_c = [], []
    for k in range(rho.size):
        a = 0.5 * (rho[k - 1] + rho[k]) if k > 0 else 0.5 * rho[k]
        b = 0.5 * (rho[k] + rho[k + 1]) if k + 1 < rho.size else 1.5 * rho[k]
        x = np.linspace(a, b, samples + 2)[1:-1]
        x = x[(np.abs(x - t[k]) > 1e-3) & (np.abs(x - rho[k]) > 1e-3)]
        ratio = np.abs(eval_m(x, rho, t)) / (np.abs(x - rho[k]) / np.abs(x - t[k]))
        lo_c.append(float(np.min(ratio)))
        hi_c.append(float(np.max(ratio)))
    return {"lower": lo_c, "upper": hi_c}


# ----------------------------------------------------------------------
# f and the fixed point
# ----------------------------------------------------------------------

@dataclass
class FData:
    a: WindowSeq
    g_values: WindowSeq
    m_values: WindowSeq
    i_parts: np.ndarray
    i_ratios: np.ndarray
    j_parts: np.ndarray
    j_ratios: np.ndarray
    remainder: float
    remainder_partial: np.ndarray

    def to_dict(self) -> dict:
        return {"i_parts": self.i_parts.tolist(), "i_ratios": self.i_ratios.tolist(),
                "j_parts": self.j_parts.tolist(), "j_ratios": self.j_ratios.tolist(),
                "remainder": self.remainder, "remainder_partial": self.remainder_partial.tolist(),
                "norm_f": self.a.norm()}


def build_f(cfg: BreakerConfig, selection: Selection, side: SideIntervalData) -> FData:
    """a_n = (-1)^n G(n) m(n) on the window, with the l2 split I / J / remainder."""
    fam = selection.family
    lo, hi = cfg.window
    n = np.arange(lo, hi + 1, dtype=float)
    gv = np.asarray(cfg.model(n), dtype=float)
    mv = eval_m(n, fam.rho, selection.t) if len(fam) else np.ones_like(n)
    sign = np.where(np.fmod(np.abs(n), 2) == 1, -1.0, 1.0)
    a = sign * gv * mv
    if a[-lo] == 0.0:
        raise PivotError("a_0 = 0: the normalisation b_0 = 1/a_0 is impossible")
    sq = a * a
    in_i = np.zeros(n.size, dtype=bool)
    in_j = np.zeros(n.size, dtype=bool)
    i_parts, j_parts, i_ratio, j_ratio = [], [], [], []
    for i in range(len(fam)):
        m_i = (n >= fam.lower[i]) & (n <= fam.upper[i])
        in_i |= m_i
        i_parts.append(nx.fsum(sq[m_i]))
        i_ratio.append(i_parts[-1] / (fam.d[i] / fam.rho[i]))
        m_j = (((n >= side.j_minus[i][0]) & (n <= side.j_minus[i][1]))
               | ((n >= side.j_plus[i][0]) & (n <= side.j_plus[i][1])))
        in_j |= m_j
        j_parts.append(nx.fsum(sq[m_j]))
        ref = side.s[i] * nx.fsum(gv[m_j] ** 2)
        j_ratio.append(j_parts[-1] / ref if ref > 0 else float("inf"))
    # past 1.5 rho_last the truncated family no longer tracks where G is large
    r_eff = min(float(max(-lo, hi)), 1.5 * fam.rho_arr[-1]) if len(fam) else float(max(-lo, hi))
    rest = ~(in_i | in_j) & (np.abs(n) <= r_eff)
    remainder = nx.fsum(sq[rest])
    rmax = int(r_eff)
    partial = []
    j = 0
    while 2**j <= rmax:
        partial.append(nx.fsum(sq[rest & (np.abs(n) <= 2**j)]))
        j += 1
    return FData(WindowSeq(lo, a), WindowSeq(lo, gv), WindowSeq(lo, mv), np.array(i_parts),
                 np.array(i_ratio), np.array(j_parts), np.array(j_ratio), remainder, np.array(partial))


def interaction_matrix(family: IntervalFamily, a: WindowSeq) -> np.ndarray:
    """A[k, m] = sum_{n in I_m} a_n^2 / ((rho_k - n)(rho_m - n)); the diagonal is D_k."""
    K = len(family)
    rho = family.rho_arr
    A = np.zeros((K, K))
    for m in range(K):
        n, av = a.slice(math.ceil(family.lower[m]), math.floor(family.upper[m]))
        w = av**2 / (rho[m] - n)
        for k in range(K):
            A[k, m] = nx.fsum(w / (rho[k] - n))
    return A


def linear_part_norm(family: IntervalFamily, A: np.ndarray) -> float:
    """Operator norm of c -> -D^-1 (A - diag D) c in sup_k |c_k| / d_k."""
    if len(family) <= 1:
        return 0.0
    d = family.d_arr
    D = np.diag(A)
    off = np.abs(A) * d[None, :]
    np.fill_diagonal(off, 0.0)
    return float(np.max(off.sum(axis=1) / (np.abs(D) * d)))


@dataclass
class CoefficientState:
    family: IntervalFamily
    a: WindowSeq
    b: WindowSeq
    c: np.ndarray

    @property
    def banach_norm(self) -> float:
        return float(np.max(np.abs(self.c) / self.family.d_arr)) if self.c.size else 0.0

    def support(self) -> np.ndarray:
        return np.flatnonzero(self.b.values) + self.b.lo


@dataclass
class FixedPointTrace:
    norms: list
    steps: list
    ratios: list
    iterations: int
    linear_bound: float

    def to_dict(self) -> dict:
        return {"norms": self.norms, "steps": self.steps, "ratios": self.ratios,
                "iterations": self.iterations, "linear_bound": self.linear_bound}


def solve_fixed_point(family: IntervalFamily, a: WindowSeq, tol: float = 1e-12,
                      max_iter: int = 200) -> tuple[CoefficientState, FixedPointTrace]:
    """Iterate c <- T c from c = 0, then build b.

    (T c)_k = D_k^-1 (-1/rho_k - sum_{m != k} A_km c_m).  b_0 = 1/a_0 and
    b_n = c_k a_n / (rho_k - n) on I_k.
    """
    if a.lo > 0 or a.hi < 0:
        raise PreconditionError("window must contain n = 0")
    a0 = a.values[-a.lo]
    if a0 == 0:
        raise PivotError("a_0 = 0: the normalisation b_0 = 1/a_0 is impossible")
    A = interaction_matrix(family, a)
    D = np.diag(A).copy()
    if np.any(D == 0):
        bad = family.ks[D == 0].tolist()
        raise DegenerateIntervalError(f"D_k = 0 for k in {bad}")
    off = A.copy()
    np.fill_diagonal(off, 0.0)
    rho, d = family.rho_arr, family.d_arr
    bound = linear_part_norm(family, A)
    c = np.zeros(len(family))
    norms, steps, ratios = [], [], []
    floor = 64 * nx.EPS
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        c_new = (-1.0 / rho - off @ c) / D
        step = float(np.max(np.abs(c_new - c) / d))
        norm = float(np.max(np.abs(c_new) / d))
        if steps:
            ratio = step / steps[-1] if steps[-1] > 0 else 0.0
            ratios.append(ratio)
            if ratio >= 1.0 and step > floor * norm:
                raise NonContractionError(
                    f"contraction ratio {ratio:.3g} at iteration {it}; drop more of the prefix",
                    (c, c_new))
        steps.append(step)
        norms.append(norm)
        c = c_new
        if step <= tol * max(norm, 1e-300):
            converged = True
            break
    if not converged:
        raise ConvergenceError(f"fixed point not reached in {max_iter} iterations", (c,))
    b = np.zeros_like(a.values)
    b[-a.lo] = 1.0 / a0
    for k in range(len(family)):
        n, av = a.slice(math.ceil(family.lower[k]), math.floor(family.upper[k]))
        idx = (n - a.lo).astype(np.int64)
        b[idx] = c[k] * av / (rho[k] - n)
    state = CoefficientState(family, a, WindowSeq(a.lo, b), c)
    return state, FixedPointTrace(norms, steps, ratios, it, bound)


def direct_solve(family: IntervalFamily, a: WindowSeq) -> np.ndarray:
    """Dense solve of D_k c_k + sum_{m != k} A_km c_m = -1/rho_k."""
    A = interaction_matrix(family, a)
    return np.linalg.solve(A, -1.0 / family.rho_arr)


# ----------------------------------------------------------------------
# verification
# ----------------------------------------------------------------------

@dataclass
class BreakerReport:
    ks: list
    t: list
    sides: list
    running_products: list
    c: list
    banach_norm: float
    s_residuals: list
    s_target: float
    pairing: float
    pairing_via_c: float
    certificate_constant: float
    b_l2_constant: float
    orth_residuals: list
    orth_budgets: list
    identity_points: list
    identity_residuals: list
    identity_budgets: list
    f_diagnostics: dict
    trace: dict
    norm_f: float
    norm_g: float
    m_band: dict = field(default_factory=dict)
    dropped_ks: list = field(default_factory=list)

    @property
    def residual_targets_met(self) -> bool:
        return (max(self.s_residuals, default=0.0) <= self.s_target
                and self.pairing >= 0.5
                and all(r <= b for r, b in zip(self.orth_residuals, self.orth_budgets))
                and all(r <= b for r, b in zip(self.identity_residuals, self.identity_budgets)))

    def to_dict(self) -> dict:
        out = dict(self.__dict__)
        out["residual_targets_met"] = self.residual_targets_met
        return out


def _cauchy_sum(n, coef, z) -> tuple[np.ndarray, np.ndarray]:
    """sum_n coef_n / (z - n) and sum |coef_n / (z - n)| for each z."""
    z = np.atleast_1d(np.asarray(z, dtype=float))
    terms = coef[None, :] / (z[:, None] - n[None, :])
    val = np.array([nx.fsum(r) for r in terms])
    return val, np.sum(np.abs(terms), axis=1)


def identity_points(family: IntervalFamily, count: int = 20) -> np.ndarray:
    """Deterministic off-grid real points spread over [1, 1.5 rho_last]."""
    top = 1.5 * family.rho_arr[-1] if len(family) else 64.0
    base = np.geomspace(1.0, top, count)
    return np.floor(base) + 0.3183098861837907


def verify_breaker(model: GenFnModel, selection: Selection, fdata: FData, state: CoefficientState,
                   trace: FixedPointTrace, z_points=None) -> BreakerReport:
    fam = state.family
    rho, t = fam.rho_arr, selection.t
    supp = state.support()
    a_s = state.a.at(supp)
    b_s = state.b.at(supp)
    ab = a_s * b_s
    s_rho, s_abs = _cauchy_sum(supp.astype(float), ab, rho)
    s_res = np.abs(s_rho)
    s_target = 1e-8 / rho[0]
    pairing = nx.fsum(ab)
    inner = [nx.fsum(state.a.slice(math.ceil(fam.lower[k]), math.floor(fam.upper[k]))[1] ** 2
                     / (rho[k] - state.a.slice(math.ceil(fam.lower[k]), math.floor(fam.upper[k]))[0]))
             for k in range(len(fam))]
    pairing_via_c = 1.0 + nx.fsum(state.c * np.array(inner))
    cn = state.banach_norm
    ll = float(np.sum(fam.d_arr / rho))
    cert = (1.0 - pairing) / (cn**2 * ll) if cn > 0 and ll > 0 else 0.0
    b_tail = nx.fsum(state.b.values**2) - state.b.values[-state.b.lo] ** 2
    b_const = b_tail / (cn * ll) if cn > 0 and ll > 0 else 0.0
    mder = np.abs(m_deriv_at_rho(rho, t))
    g_supp = np.asarray(model(supp.astype(float)), dtype=float)
    sign = np.where(np.fmod(np.abs(supp), 2) == 1, -1.0, 1.0)
    coef = sign * b_s * g_supp
    # orthogonality: sum (-1)^n b_n G(n) / (n - t_k) = -(value of the sum at z = t_k)
    o_val, o_abs = _cauchy_sum(supp.astype(float), coef, t)
    orth = np.abs(o_val)
    h_bound = lambda z: np.array([nx.fsum(s_res / (mder * np.abs(zz - rho))) for zz in np.atleast_1d(z)])
    orth_budget = h_bound(t) + 64 * nx.EPS * o_abs
    # identity G S / f = sum (-1)^n b_n G(n) / (z - n)
    zp = identity_points(fam) if z_points is None else np.asarray(z_points, dtype=float)
    gz = np.asarray(model(zp), dtype=float)
    mz = eval_m(zp, rho, t)
    sz, sz_abs = _cauchy_sum(supp.astype(float), ab, zp)
    lhs = gz * sz / (gz * mz)
    rhs, rhs_abs = _cauchy_sum(supp.astype(float), coef, zp)
    id_res = np.abs(lhs - rhs)
    id_budget = h_bound(zp) + 64 * nx.EPS * (sz_abs / np.abs(mz) + rhs_abs)
    return BreakerReport(
        ks=fam.ks.tolist(), t=t.tolist(), sides=list(selection.sides),
        running_products=selection.running_products.tolist(), c=state.c.tolist(),
        banach_norm=cn, s_residuals=s_res.tolist(), s_target=s_target, pairing=pairing,
        pairing_via_c=pairing_via_c, certificate_constant=cert, b_l2_constant=b_const,
        orth_residuals=orth.tolist(), orth_budgets=orth_budget.tolist(),
        identity_points=zp.tolist(), identity_residuals=id_res.tolist(),
        identity_budgets=id_budget.tolist(), f_diagnostics=fdata.to_dict(), trace=trace.to_dict(),
        norm_f=fdata.a.norm(), norm_g=state.b.norm(), m_band=m_band_constants(rho, t))


@dataclass
class BreakerRun:
    hypotheses: HypothesisReport
    selection: Selection
    fdata: FData
    state: CoefficientState
    trace: FixedPointTrace
    report: BreakerReport
    side: SideIntervalData


def run_breaker(cfg: BreakerConfig) -> BreakerRun:
    """Full pipeline; drops further prefix intervals until the linear part has norm < 1/2."""
    hyp = check_hypotheses(cfg)
    if not hyp.passed:
        raise StructuralError("hypotheses fail: " + ", ".join(
            k for k in HypothesisReport.CONDITIONS if not hyp.checks[k].passed))
    if not hyp.structural_passed:
        raise StructuralError("structural checks fail: " + ", ".join(
            c.name for c in hyp.structural if not c.passed))
    start = hyp.keep_from
    fam = cfg.family
    while True:
        kept = fam.tail(start)
        side = side_intervals(kept, hyp.sums.g[start:], cfg.s_rescale)
        sel = select_tk(cfg, kept, side)
        fdata = build_f(cfg, sel, side)
        A = interaction_matrix(kept, fdata.a)
        if linear_part_norm(kept, A) < 0.5 or len(kept) == 1:
            break
        start += 1
    state, trace = solve_fixed_point(kept, fdata.a, cfg.fp_tol, cfg.fp_max_iter)
    report = verify_breaker(cfg.model, sel, fdata, state, trace)
    report.dropped_ks = fam.ks[:start].tolist()
    return BreakerRun(hyp, sel, fdata, state, trace, report, side)
