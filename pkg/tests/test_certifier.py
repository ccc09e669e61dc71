import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from expsynth.certifier import (IntervalConsistencyError, KernelWeights, WeightDegeneracyError, cauchy_zeros,
                                certify, check_conditions, epsilon_separation, functional_identity_residual,
                                kernel_gram, kernel_norm_sq, m_eval, m_roots, select_nk)
from expsynth.numerics import DomainError, PoleError
from expsynth.pw_numerics import sample_weighted_kernel
from expsynth.spectra import IntervalFamily
from oracle_values import CAUCHY_ZEROS_GEOMETRIC

from conftest import dyadic_family


def ratio_family(k_min=4, k_max=12):
    return IntervalFamily.from_config({"kind": "powers_of_two", "k_min": k_min, "k_max": k_max,
                                       "d_rule": {"kind": "ratio", "value": 1 / 16}})


@pytest.fixture(scope="module")
def uniform_case():
    fam = ratio_family()
    w = KernelWeights.uniform(fam, (-2**14, 2**14))
    return fam, w, certify(w, fam)


# ----- closed forms -----

def test_two_equal_atoms_root_is_half():
    w = KernelWeights.atoms([0, 1], [1.0, 1.0])
    table = m_roots(w, IntervalFamily([0.5], [2.0], 0))
    assert table.t.tolist() == [0.5]
    assert table.eps.tolist() == [0.5]


def test_unequal_atoms_root_is_quarter():
    w = KernelWeights.atoms([0, 1], [1.0, 3.0])
    table = m_roots(w, IntervalFamily([0.5], [2.0], 0))
    assert abs(table.t[0] - 0.25) < 1e-12
    assert abs(table.eps[0] - 0.25) < 1e-12


def test_m_rejects_integer_argument():
    with pytest.raises(PoleError):
        m_eval(KernelWeights.atoms([0, 1], [1.0, 1.0]), 1.0)


@settings(max_examples=30, deadline=None)
@given(st.lists(st.floats(0.01, 100.0), min_size=3, max_size=12), st.integers(0, 9))
def test_m_increases_between_poles(w2, j):
    w = KernelWeights.atoms(np.arange(len(w2)), w2)
    n0 = min(j, len(w2) - 2)
    t = n0 + np.linspace(0.01, 0.99, 99)
    v, _ = m_eval(w, t)
    assert np.all(np.diff(v) > 0)


# ----- conditions -----

def test_single_interval_has_no_outside_mass():
    fam = IntervalFamily([64.0], [4.0], 6)
    w = KernelWeights.uniform(fam, (-256, 256))
    rep = check_conditions(w, fam)
    assert rep.cond_i == [0.0]
    g = rep.g[0]
    assert g == 9.0
    assert rep.cond_ii[0] == pytest.approx(math.sqrt(g / 4.0), rel=1e-15)


def test_uniform_family_ratios_bounded(uniform_case):
    fam, w, rep = uniform_case
    assert max(rep.cond_i) < 1.0
    assert max(rep.cond_ii) < 2.0
    assert rep.log_divergent
    assert rep.log_slope == pytest.approx(1 / 16, rel=1e-12)


def test_spike_is_flagged():
    fam = ratio_family(4, 12)
    w = KernelWeights.uniform(fam, (-2**14, 2**14))
    vals = w.w.copy()
    inside = (w.n >= fam.lower[4]) & (w.n <= fam.upper[4])
    vals[inside] *= 1e3  # g_8 inflated by 1e6
    spiked = KernelWeights(w.lo, vals, "spike", w.abs_g)
    base = check_conditions(w, fam)
    rep = check_conditions(spiked, fam)
    assert rep.cond_i[3] > 1e4 * base.cond_i[3]
    assert 7 in rep.flagged_i


def test_zero_weight_in_j_is_degenerate():
    fam = IntervalFamily([64.5], [4.0], 6)
    w = KernelWeights.uniform(fam, (-256, 256))
    vals = w.w.copy()
    vals[64 - w.lo] = 0.0
    with pytest.raises(WeightDegeneracyError):
        m_roots(KernelWeights(w.lo, vals), fam)


def test_model_weights_reject_integer_zeros():
    fam = IntervalFamily([64.5], [4.0], 6)
    w = KernelWeights(-128, np.where(np.arange(-128, 129) == 3, 0.0, 1.0), "model", lambda x: np.ones(np.shape(x)))
    with pytest.raises(WeightDegeneracyError):
        check_conditions(w, fam, require_integer_free=True)


# ----- roots, N_k and separation -----

def test_uniform_roots_one_per_interval(uniform_case):
    fam, w, rep = uniform_case
    table = m_roots(w, fam)
    assert np.all(table.grid_confirm(w) == 1)
    assert np.all((table.t > table.n) & (table.t < table.n + 1))


def test_uniform_nk_sizes_and_separation(uniform_case):
    fam, w, rep = uniform_case
    for s, d in zip(rep.nk, fam.d):
        assert s["size"] >= d / 2
        assert s["c1"] <= 16
    floors = np.array(list(rep.eps_floor.values()))
    assert floors.min() >= 0.05
    assert floors[-3:].min() >= 0.5 * floors[:3].min()


def test_aggregate_kernel_bound_is_stable(uniform_case):
    fam, w, rep = uniform_case
    r = np.array(rep.kernel_sum_ratios)
    assert np.all(r > 0) and r.max() / r.min() < 4


def test_central_atom_excluded_from_nk():
    fam = IntervalFamily([1024.0], [64.0], 10)
    w = KernelWeights.uniform(fam, (-4096, 4096))
    vals = w.w.copy()
    vals[1024 - w.lo] = 30.0
    heavy = KernelWeights(w.lo, vals, "atom", w.abs_g)
    sel = select_nk(heavy, fam)[0]
    assert sel.ok
    assert not np.any(np.isin([1023.0, 1024.0], sel.n))
    assert np.any(sel.n < 1020) and np.any(sel.n > 1028)


def test_simple_example_weights_k10_to_16(simple_model):
    fam = dyadic_family(10, 16, shift=-0.5)
    w = KernelWeights.from_model(simple_model, (-2**18, 2**18))
    rep = certify(w, fam)
    assert max(rep.cond_i) < 0.02
    assert all(s["ok"] for s in rep.nk) and max(s["c1"] for s in rep.nk) <= 32
    table = m_roots(w, IntervalFamily([4095.5], [fam.d[2]], 12))
    assert np.all(table.grid_confirm(w) == 1)
    # |G(n)| falls off like 1/u^2 away from each centre, so the lower bound on
    # |G| over I_k fails and the separation floor shrinks as J_k widens
    floors = np.array(list(rep.eps_floor.values()))
    assert floors[-1] < 0.1 * floors[0]
    assert min(rep.cond_ii) > 100


# ----- kernels -----

def test_kernel_norm_matches_sampled_gram(uniform_case):
    fam, w, _ = uniform_case
    N = 2**14
    n_w, w_all = w.n, w.w
    g = np.random.default_rng(7)
    for n in g.integers(-N // 2, N // 2, 10):
        v = sample_weighted_kernel(n_w, w_all, n + 0.5, N)
        assert kernel_norm_sq(w, n + 0.5)[0] == pytest.approx(float(v.samples @ v.samples), rel=1e-12)


def test_root_kernels_are_orthogonal(uniform_case):
    fam, w, _ = uniform_case
    table = m_roots(w, fam)
    pts = table.t[:200]
    G = kernel_gram(w, pts)
    d = np.sqrt(np.diag(G))
    off = G / np.outer(d, d)
    np.fill_diagonal(off, 0.0)
    assert np.max(np.abs(off)) < 1e-10


# ----- Cauchy transforms -----

def test_cauchy_zeros_closed_forms():
    assert cauchy_zeros([1, 1], [0, 1]).s.tolist() == [0.5]
    assert abs(cauchy_zeros([1, 3], [0, 1]).s[0] - 0.25) < 1e-12


def test_cauchy_zeros_geometric_weights():
    k = np.arange(31)
    out = cauchy_zeros(2.0**-k, k.astype(float))
    assert np.allclose(out.s, CAUCHY_ZEROS_GEOMETRIC, rtol=0, atol=1e-12)
    assert np.all(np.diff(out.partial) >= 0)
    assert out.partial[-1] - out.partial[-5] < 1e-6


@settings(max_examples=40, deadline=None)
@given(st.lists(st.one_of(st.just(0.0), st.floats(1e-3, 10.0)), min_size=2, max_size=15)
       .filter(lambda m: sum(v > 0 for v in m) >= 2),
       st.floats(0.5, 3.0))
def test_cauchy_zeros_interlace(mu, gap):
    t = np.cumsum(np.full(len(mu), gap))
    out = cauchy_zeros(mu, t)
    tp = t[np.asarray(mu) > 0]
    assert np.all((tp[:-1] < out.s) & (out.s < tp[1:]))


def test_cauchy_zeros_input_contract():
    with pytest.raises(DomainError):
        cauchy_zeros([1, 1], [1, 0])
    with pytest.raises(DomainError):
        cauchy_zeros([0, 0], [0, 1])
    with pytest.raises(DomainError):
        cauchy_zeros([1.0, 1e-306], [0, 1])  # zero within an ulp of the pole


# ----- the functional identity -----

def test_identity_zero_sequence(simple_model):
    out = functional_identity_residual(simple_model, np.arange(-5, 6), np.zeros(11), [0.3, 2.7])
    assert out["max_residual"] == 0.0


def test_identity_unit_atom_closed_form(simple_model):
    z = np.array([0.3, 2.7, -4.1])
    out = functional_identity_residual(simple_model, [0], [1.0], z)
    g0 = simple_model(0.0)
    expect = np.abs(np.sin(np.pi * z) / (np.pi * z) * np.pi * g0 / z - simple_model(z) / z)
    assert np.allclose(out["residual"], expect, rtol=1e-13, atol=1e-15)


def test_identity_summation_order(simple_model):
    g = np.random.default_rng(11)
    n = np.arange(-40, 41)
    a = g.normal(size=n.size)
    z = [0.37, 5.81, -12.2]
    fwd = functional_identity_residual(simple_model, n, a, z)
    rev = functional_identity_residual(simple_model, n[::-1], a[::-1], z)
    assert np.allclose(fwd["left"], rev["left"], rtol=1e-12)
    assert np.allclose(fwd["right"], rev["right"], rtol=1e-12)


def test_identity_rejects_integer_points(simple_model):
    with pytest.raises(PoleError):
        functional_identity_residual(simple_model, [0], [1.0], [2.0])
