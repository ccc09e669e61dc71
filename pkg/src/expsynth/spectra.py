"""Lacunary interval families, side intervals and real spectra."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .numerics import DomainError, RangeError, fsum

LACUNARITY = 2.0
HALF_LENGTH_RATIO = 0.1
CENTER_INT_DIST = 1.0 / 3.0


@dataclass(frozen=True)
class IntervalFamily:
    """Intervals I_k = [rho_k - d_k, rho_k + d_k], k = k_offset, k_offset + 1, ...

    Structural invariants (lacunarity, d_k <= rho_k / 10) are *checked* by
    :func:`validate_family`, not enforced here, so that invalid inputs can be
    reported on.  Only nondegenerate, positive data is accepted.
    """

    rho: tuple[float, ...]
    d: tuple[float, ...]
    k_offset: int = 0
    rule: dict | None = field(default=None, compare=False)

    def __post_init__(self):
        rho = tuple(float(r) for r in self.rho)
        d = tuple(float(x) for x in self.d)
        object.__setattr__(self, "rho", rho)
        object.__setattr__(self, "d", d)
        if len(rho) != len(d):
            raise DomainError("rho and d must have equal length")
        if any(not math.isfinite(r) or r <= 0 for r in rho):
            raise DomainError("interval centers must be positive and finite")
        if any(not math.isfinite(x) or x <= 0 for x in d):
            raise DomainError("half-lengths must be positive (degenerate intervals are rejected)")

    def __len__(self) -> int:
        return len(self.rho)

    @property
    def ks(self) -> np.ndarray:
        return np.arange(self.k_offset, self.k_offset + len(self), dtype=int)

    @property
    def k_last(self) -> int:
        return self.k_offset + len(self) - 1

    @property
    def rho_arr(self) -> np.ndarray:
        return np.asarray(self.rho, dtype=float)

    @property
    def d_arr(self) -> np.ndarray:
        return np.asarray(self.d, dtype=float)

    @property
    def lower(self) -> np.ndarray:
        return self.rho_arr - self.d_arr

    @property
    def upper(self) -> np.ndarray:
        return self.rho_arr + self.d_arr

    def index(self, k: int) -> int:
        i = int(k) - self.k_offset
        if not 0 <= i < len(self):
            raise RangeError(f"k={k} outside [{self.k_offset}, {self.k_last}]")
        return i

    def integers_in(self, i: int) -> np.ndarray:
        """Integers n with n in I_k for the i-th stored interval."""
        lo = math.ceil(self.rho[i] - self.d[i])
        hi = math.floor(self.rho[i] + self.d[i])
        return np.arange(lo, hi + 1, dtype=float)

    def tail(self, start: int) -> "IntervalFamily":
        """Entries from position ``start`` on (positions, not k values)."""
        return IntervalFamily(self.rho[start:], self.d[start:], self.k_offset + start, self.rule)

    def scaled(self, factor: float) -> "IntervalFamily":
        return IntervalFamily([r * factor for r in self.rho], [x * factor for x in self.d],
                              self.k_offset, None)

    def contains(self, x) -> np.ndarray:
        """Boolean mask: x lies in some I_k."""
        x = np.asarray(x, dtype=float)
        inside = np.zeros(x.shape, dtype=bool)
        for lo, hi in zip(self.lower, self.upper):
            inside |= (x >= lo) & (x <= hi)
        return inside

    def to_dict(self) -> dict:
        return {"k_offset": self.k_offset, "rho": list(self.rho), "d": list(self.d)}

    # ------------------------------------------------------------------
    @classmethod
    def empty(cls) -> "IntervalFamily":
        return cls((), (), 0)

    @classmethod
    def from_config(cls, cfg: dict) -> "IntervalFamily":
        """Build from explicit arrays or from a ``powers_of_two`` rule."""
        if "rho" in cfg:
            return cls(cfg["rho"], cfg["d"], int(cfg.get("k_offset", 0)))
        kind = cfg["kind"]
        if kind != "powers_of_two":
            raise DomainError(f"unknown family rule kind {kind!r}")
        k_min, k_max = int(cfg["k_min"]), int(cfg["k_max"])
        shift = float(cfg.get("center_shift", 0.0))
        d_rule = cfg["d_rule"]
        ks = np.arange(k_min, k_max + 1)
        rho = np.ldexp(1.0, ks) + shift
        if d_rule["kind"] == "power":
            d = rho ** float(d_rule["exponent"])
        elif d_rule["kind"] == "ratio":
            d = float(d_rule["value"]) * rho
        else:
            raise DomainError(f"unknown d_rule kind {d_rule['kind']!r}")
        return cls(rho.tolist(), d.tolist(), k_min, dict(cfg))


def log_length(family: IntervalFamily, k_max: int | None = None) -> float:
    """Partial sum of d_k / rho_k over k <= k_max."""
    if len(family) == 0:
        if k_max is not None and k_max >= family.k_offset:
            raise RangeError("empty family has no index range")
        return 0.0
    if k_max is None:
        k_max = family.k_last
    if not family.k_offset - 1 <= k_max <= family.k_last:
        raise RangeError(f"k_max={k_max} outside [{family.k_offset - 1}, {family.k_last}]")
    stop = k_max - family.k_offset + 1
    return fsum(family.d_arr[:stop] / family.rho_arr[:stop])


def log_length_terms(family: IntervalFamily) -> np.ndarray:
    return family.d_arr / family.rho_arr


def drop_prefix(family: IntervalFamily, eta: float = 0.01) -> IntervalFamily:
    """Remove the shortest prefix leaving a tail with sum d_k / rho_k < eta."""
    if not 0 < eta:
        raise DomainError("eta must be positive")
    terms = log_length_terms(family)
    # tails[i] = sum_{j >= i} terms[j]
    tails = np.array([fsum(terms[i:]) for i in range(len(terms))] + [0.0])
    start = int(np.flatnonzero(tails < eta)[0])
    return family.tail(start)


# ----------------------------------------------------------------------
# validation
# ----------------------------------------------------------------------

@dataclass
class Check:
    name: str
    passed: bool
    detail: str = ""
    value: float | None = None

    def to_dict(self) -> dict:
        return {"name": self.name, "passed": self.passed, "detail": self.detail, "value": self.value}


@dataclass
class ValidationReport:
    checks: list[Check]
    k_range: tuple[int, int]

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def failed(self) -> list[str]:
        return [c.name for c in self.checks if not c.passed]

    def __getitem__(self, name: str) -> Check:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def to_dict(self) -> dict:
        return {"passed": self.passed, "k_range": list(self.k_range),
                "checks": [c.to_dict() for c in self.checks]}


def validate_family(family: IntervalFamily, spectrum: "Spectrum | None" = None,
                    density_c: float | None = None) -> ValidationReport:
    rho, d = family.rho_arr, family.d_arr
    checks = []
    if len(family) > 1:
        ratio = rho[1:] / rho[:-1]
        bad = family.ks[1:][ratio < LACUNARITY]
        checks.append(Check("lacunarity", bad.size == 0,
                            f"rho_(k+1) < 2 rho_k at k+1 in {bad.tolist()}" if bad.size else "",
                            float(ratio.min())))
    else:
        checks.append(Check("lacunarity", True, "fewer than two intervals"))
    hl = d / rho if len(family) else np.zeros(0)
    bad = family.ks[hl > HALF_LENGTH_RATIO]
    checks.append(Check("half_length_bound", bad.size == 0,
                        f"d_k > 0.1 rho_k at k in {bad.tolist()}" if bad.size else "",
                        float(hl.max()) if hl.size else 0.0))
    dist = np.abs(rho - np.round(rho))
    bad = family.ks[dist < CENTER_INT_DIST]
    checks.append(Check("center_distance_to_integers", bad.size == 0,
                        f"dist(rho_k, Z) < 1/3 at k in {bad.tolist()}" if bad.size else "",
                        float(dist.min()) if dist.size else None))
    overlap = [int(k) for k, hi, lo in zip(family.ks[1:], family.upper[:-1], family.lower[1:]) if hi >= lo]
    checks.append(Check("disjoint", not overlap,
                        f"I_(k-1) meets I_k at k in {overlap}" if overlap else ""))
    if spectrum is not None:
        c = spectrum.density_c if density_c is None else density_c
        dz = spectrum.dist_to_integers
        checks.append(Check("cond_b_dist_to_integers", dz > spectrum.integer_tol,
                            f"window {list(spectrum.window)}", dz))
        gap = spectrum.density_gap
        checks.append(Check("cond_c_local_density", gap <= c,
                            f"max gap {gap:.6g} vs C={c:.6g} on window {list(spectrum.window)}", gap))
    k_range = (family.k_offset, family.k_last)
    return ValidationReport(checks, k_range)


# ----------------------------------------------------------------------
# side intervals
# ----------------------------------------------------------------------

@dataclass(frozen=True)
class SideIntervalData:
    ks: np.ndarray
    g: np.ndarray
    s: np.ndarray
    j_minus: np.ndarray  # shape (K, 2)
    j_plus: np.ndarray
    violates_iii: np.ndarray
    throw_away: np.ndarray
    degenerate: np.ndarray
    scale: float = 1.0

    def half(self, i: int, side: str) -> tuple[float, float]:
        """The concentric half of J_k^side."""
        lo, hi = (self.j_plus if side == "+" else self.j_minus)[i]
        mid, quarter = 0.5 * (lo + hi), 0.25 * (hi - lo)
        return mid - quarter, mid + quarter

    def overlaps(self, family: IntervalFamily) -> list[tuple[int, int]]:
        """(k, k') pairs where J_k meets I_k' or J_k' (k != k' for J-J pairs)."""
        spans = []
        for i, k in enumerate(self.ks):
            spans.append((int(k), "I", family.lower[i], family.upper[i]))
            spans.append((int(k), "J-", *self.j_minus[i]))
            spans.append((int(k), "J+", *self.j_plus[i]))
        bad = []
        for a in range(len(spans)):
            for b in range(a + 1, len(spans)):
                ka, ta, la, ha = spans[a]
                kb, tb, lb, hb = spans[b]
                if ta == "I" and tb == "I":
                    continue
                if la < hb and lb < ha:
                    bad.append((ka, kb))
        return bad


def side_intervals(family: IntervalFamily, g: Sequence[float], scale: float = 1.0) -> SideIntervalData:
    """g_k -> s_k = scale * sqrt(d_k g_k rho_k) and the side intervals J_k^-, J_k^+.

    ``scale`` < 1 implements the rescaling that trades condition (iii) for a
    constant (off by default).
    """
    g = np.asarray(g, dtype=float)
    if g.shape != (len(family),):
        raise DomainError("one g_k per interval required")
    if np.any(g < 0) or not np.all(np.isfinite(g)):
        raise DomainError("g_k must be finite and nonnegative")
    rho, d = family.rho_arr, family.d_arr
    s = scale * np.sqrt(d * g * rho)
    jm = np.stack([rho - d - 2 * s, rho - d - s], axis=1) if len(family) else np.zeros((0, 2))
    jp = np.stack([rho + d + s, rho + d + 2 * s], axis=1) if len(family) else np.zeros((0, 2))
    return SideIntervalData(
        ks=family.ks, g=g, s=s, j_minus=jm, j_plus=jp,
        violates_iii=s > HALF_LENGTH_RATIO * rho,
        throw_away=d >= 0.1 * s,
        degenerate=g == 0,
        scale=scale,
    )


# ----------------------------------------------------------------------
# spectra
# ----------------------------------------------------------------------

@dataclass(frozen=True)
class Progression:
    """sign * (start + j * step), j = 0 .. count - 1 (count None: infinite)."""

    start: float
    step: float
    sign: int = 1
    count: int | None = None

    def __post_init__(self):
        if self.start <= 0 or self.step <= 0 or self.sign not in (1, -1):
            raise DomainError("progression needs start > 0, step > 0, sign = +-1")

    def index_range(self, r_lo: float, r_hi: float) -> tuple[int, int]:
        """Indices j with r_lo <= start + j step < r_hi (inclusive j0, exclusive j1)."""
        j0 = max(0, math.ceil((r_lo - self.start) / self.step))
        j1 = max(0, math.ceil((r_hi - self.start) / self.step))
        if self.count is not None:
            j0, j1 = min(j0, self.count), min(j1, self.count)
        return j0, max(j0, j1)


class Spectrum:
    """A real spectrum given as a union of arithmetic progressions and explicit points.

    ``window`` is the enumeration window used for the empirical quantities
    ``density_gap`` (largest gap, the local-density constant) and
    ``dist_to_integers``.
    """

    integer_tol = 1e-9

    def __init__(self, progressions: Iterable[Progression] = (), points: Iterable[float] = (),
                 window: tuple[float, float] = (-64.0, 64.0), density_c: float = 3.0):
        self.progressions = tuple(progressions)
        self.extra = np.unique(np.asarray(list(points), dtype=float))
        if np.any(self.extra == 0):
            raise DomainError("0 cannot belong to a spectrum with a canonical product")
        self.window = (float(window[0]), float(window[1]))
        self.density_c = float(density_c)
        self._stats = None

    # -- constructors --------------------------------------------------
    @classmethod
    def integers_nonzero(cls, **kw) -> "Spectrum":
        return cls([Progression(1.0, 1.0, 1), Progression(1.0, 1.0, -1)], **kw)

    @classmethod
    def symmetric_shifted(cls, shift: float, **kw) -> "Spectrum":
        """{+-(n + shift): n >= 0}."""
        return cls([Progression(shift, 1.0, 1), Progression(shift, 1.0, -1)], **kw)

    @classmethod
    def from_points(cls, points, **kw) -> "Spectrum":
        return cls((), points, **kw)

    @classmethod
    def from_config(cls, cfg: dict) -> "Spectrum":
        kw = {}
        if "window" in cfg:
            kw["window"] = tuple(cfg["window"])
        if "density_c" in cfg:
            kw["density_c"] = cfg["density_c"]
        kind = cfg["kind"]
        if kind == "integers_nonzero":
            return cls.integers_nonzero(**kw)
        if kind == "symmetric_shifted":
            return cls.symmetric_shifted(float(cfg["shift"]), **kw)
        if kind == "points":
            return cls.from_points(cfg["points"], **kw)
        if kind == "progressions":
            progs = [Progression(float(p["start"]), float(p["step"]), int(p.get("sign", 1)),
                                 p.get("count")) for p in cfg["progressions"]]
            return cls(progs, cfg.get("points", ()), **kw)
        raise DomainError(f"unknown spectrum kind {kind!r}")

    # -- enumeration ---------------------------------------------------
    @property
    def is_finite(self) -> bool:
        return all(p.count is not None for p in self.progressions)

    def max_abs(self) -> float:
        """Largest |lambda| for finite spectra, inf otherwise."""
        if not self.is_finite:
            return math.inf
        m = float(np.abs(self.extra).max()) if self.extra.size else 0.0
        for p in self.progressions:
            if p.count:
                m = max(m, p.start + (p.count - 1) * p.step)
        return m

    def points(self, lo: float, hi: float) -> np.ndarray:
        """Sorted, strictly increasing points of the spectrum in [lo, hi]."""
        out = [self.extra[(self.extra >= lo) & (self.extra <= hi)]]
        for p in self.progressions:
            if p.sign > 0:
                j0, j1 = p.index_range(lo, math.nextafter(hi, math.inf))
            else:
                j0, j1 = p.index_range(-hi, math.nextafter(-lo, math.inf))
            vals = p.sign * (p.start + p.step * np.arange(j0, j1, dtype=float))
            out.append(vals)
        pts = np.unique(np.concatenate(out)) if out else np.zeros(0)
        return pts

    def shell(self, r_lo: float, r_hi: float):
        """Blocks of the spectrum with r_lo <= |lambda| < r_hi.

        Yields ("points", array) and ("progression", Progression, j0, j1).
        """
        ab = np.abs(self.extra)
        sel = self.extra[(ab >= r_lo) & (ab < r_hi)]
        if sel.size:
            yield ("points", sel)
        for p in self.progressions:
            j0, j1 = p.index_range(r_lo, r_hi)
            if j1 > j0:
                yield ("progression", p, j0, j1)

    # -- empirical constants ---------------------------------------------
    def _compute_stats(self):
        lo, hi = self.window
        pts = self.points(lo, hi)
        if pts.size == 0:
            self._stats = (math.inf, math.inf)
            return
        edges = np.concatenate([[lo], pts, [hi]])
        gap = float(np.diff(edges).max())
        dist = float(np.abs(pts - np.round(pts)).min())
        self._stats = (gap, dist)

    @property
    def density_gap(self) -> float:
        if self._stats is None:
            self._compute_stats()
        return self._stats[0]

    @property
    def dist_to_integers(self) -> float:
        if self._stats is None:
            self._compute_stats()
        return self._stats[1]

    def every_long_interval_hit(self, length: float, samples: int = 4096) -> bool:
        """Every interval of the given length inside the window contains a point."""
        lo, hi = self.window
        pts = self.points(lo, hi)
        if hi - lo < length:
            return True
        starts = np.linspace(lo, hi - length, samples)
        idx = np.searchsorted(pts, starts, side="left")
        ok = idx < pts.size
        return bool(np.all(ok) and np.all(pts[idx[ok]] <= starts[ok] + length))
