import math
from decimal import ROUND_CEILING, Decimal, getcontext

import numpy as np
import pytest

from tucker3 import (BoundInput, IncoherenceProfile, bound_theorem1,
                     bound_theorem2, check_recoverable, estimate_rank,
                     explicit_mask, full_mask, gen_phantom,
                     incoherence_profile, tensor3, uniform_mask, zeros)
from tucker3.solver import truncated_hosvd
from tucker3.tensors import mode_n_product


def unit_profile(r_star=1.0):
    return IncoherenceProfile(mu_star=1.0, alpha_star=1.0, lambda_star=1.0,
                              r_star=r_star, d=2.0, d_star=2.0)


# --------------------------------------------------------------------------
# bound calculators
# --------------------------------------------------------------------------

def test_theorem1_hand_value():
    # k=3, c=1, beta=1, mu=alpha=lam=1, r*=1, I=2:
    # 2 * (4 + 2*sqrt(2)) * ln(2)^2 = 6.5614... -> ceil 7
    inp = BoundInput(dims=(2, 2, 2), r=1, beta=1.0, c=1.0)
    res = bound_theorem1(inp, unit_profile())
    assert res.bound == 7
    want = 2.0 * (4.0 + 2.0 * math.sqrt(2.0)) * math.log(2.0) ** 2
    assert abs(res.raw - want) < 1e-12


def test_theorem1_linear_in_c():
    prof = unit_profile(r_star=2.0)
    a = bound_theorem1(BoundInput(dims=(8, 8, 8), r=2, beta=1.0, c=1.0), prof)
    b = bound_theorem1(BoundInput(dims=(8, 8, 8), r=2, beta=1.0, c=2.0), prof)
    assert b.raw == 2.0 * a.raw


def test_theorem1_rejects_degenerate():
    with pytest.raises(ValueError):
        bound_theorem1(BoundInput(dims=(1, 1, 1), r=1), unit_profile())
    with pytest.raises(ValueError):
        unit_profile(r_star=0.0)


def test_theorem2_frozen_value_and_decimal_oracle():
    inp = BoundInput(dims=(64, 64, 64), r=1, s=0, c=1.0)
    res = bound_theorem2(inp)
    assert res.bound == 8856

    getcontext().prec = 50
    ln64 = Decimal(64).ln()
    raw = Decimal(512) * ln64 * ln64
    oracle = int(raw.to_integral_value(rounding=ROUND_CEILING))
    assert res.bound == oracle
    assert abs(res.raw - float(raw)) < 1e-6


def test_theorem2_additivity_in_s():
    log_sq = math.log(64) ** 2
    a = bound_theorem2(BoundInput(dims=(64, 64, 64), r=1, s=10, c=1.0))
    b = bound_theorem2(BoundInput(dims=(64, 64, 64), r=1, s=11, c=1.0))
    assert b.raw - a.raw == pytest.approx(log_sq, abs=1e-9)


def test_theorem2_degenerate_zero():
    res = bound_theorem2(BoundInput(dims=(4, 4, 4), r=0, s=0))
    assert res.bound == 0
    assert res.raw == 0.0


def test_bounds_monotone_on_grid():
    prof = unit_profile(r_star=1.0)
    prev = -1
    for i_max in (4, 8, 16, 32, 64):
        b = bound_theorem2(BoundInput(dims=(i_max,) * 3, r=2, s=5)).bound
        assert b > prev
        prev = b
    for field, values in (("r", [0, 1, 2, 3, 4]), ("s", [0, 5, 50, 500]),
                          ("c", [0.5, 1.0, 2.0, 4.0])):
        got = []
        for v in values:
            kwargs = dict(dims=(16, 16, 16), r=1, s=0, c=1.0)
            kwargs[field] = v
            got.append(bound_theorem2(BoundInput(**kwargs)).raw)
        assert all(x <= y for x, y in zip(got, got[1:]))
    for beta in (0.5, 1.0, 2.0):
        vals = [bound_theorem1(BoundInput(dims=(8, 8, 8), r=1, beta=b, c=1.0),
                               prof).raw for b in (0.5, 1.0, 2.0)]
    assert all(x <= y for x, y in zip(vals, vals[1:]))


def test_theorem_leading_terms_agree_within_constants():
    # theorem 2 at s=0 vs theorem 1's simplified k=3 form: ratio in [1/4, 4]
    for i_max in (8, 16, 32, 64, 128):
        for r in range(1, 9):
            inp = BoundInput(dims=(i_max,) * 3, r=r, s=0, c=1.0)
            t2 = bound_theorem2(inp).raw
            t1s = bound_theorem1(inp, unit_profile(r_star=float(r))
                                 ).simplified_raw
            ratio = t1s / t2
            assert 0.25 <= ratio <= 4.0


# --------------------------------------------------------------------------
# incoherence profile
# --------------------------------------------------------------------------

def test_r_star_hand_value():
    t = gen_phantom((8, 8, 8), (2, 2, 2), "lowrank", 0)
    prof = incoherence_profile(t, (2, 2, 2))
    assert prof.r_star == pytest.approx(2.0, abs=1e-12)
    assert prof.d == 8.0
    assert prof.d_star == pytest.approx(8.0, abs=1e-12)


def test_am_gm_exact_assertion():
    rng = np.random.default_rng(0)
    for _ in range(30):
        dims = tuple(int(d) for d in rng.integers(2, 12, size=3))
        t = tensor3(rng.standard_normal(dims))
        prof = incoherence_profile(t, (1, 1, 1))
        assert prof.d_star <= prof.d


def test_qt_norm_matches_explicit_projector_oracle():
    rng = np.random.default_rng(1)
    dims, ranks = (4, 3, 5), (2, 2, 2)
    t = tensor3(rng.standard_normal(dims))
    fac = truncated_hosvd(t, ranks)
    us = fac.factors
    proj = [u @ u.T for u in us]
    comp = [np.eye(d) - p for p, d in zip(proj, dims)]
    lev = [np.sum(u * u, axis=1) for u in us]

    def apply3(z, mats):
        out = tensor3(z)
        for mode, m in enumerate(mats, start=1):
            out = mode_n_product(out, m, mode)
        return out.data

    for i in range(dims[0]):
        for j in range(dims[1]):
            for k in range(dims[2]):
                e = np.zeros(dims)
                e[i, j, k] = 1.0
                qt = (apply3(e, (proj[0], proj[1], proj[2]))
                      + apply3(e, (comp[0], proj[1], proj[2]))
                      + apply3(e, (proj[0], comp[1], proj[2]))
                      + apply3(e, (proj[0], proj[1], comp[2])))
                explicit = float(np.sum(qt * qt))
                a, b, c = lev[0][i], lev[1][j], lev[2][k]
                closed = a * b + a * c + b * c - 2.0 * a * b * c
                assert abs(explicit - closed) < 1e-12


def test_canonical_factors_fully_coherent():
    core = np.random.default_rng(2).standard_normal((2, 2, 2))
    us = [np.eye(16)[:, :2] for _ in range(3)]
    x = np.einsum("abc,ia,jb,kc->ijk", core, *us)
    prof = incoherence_profile(tensor3(x), (2, 2, 2))
    # grid max of the tangent norm is exactly 1, so mu_* hits its ceiling
    ceiling = 16.0 ** 3 / (3.0 * 2.0 ** 2 * 16.0)
    assert prof.mu_star == pytest.approx(ceiling, rel=1e-12)
    # per-mode coherence maximal: mu_j r_j / r_* = (16/2 * 2) / 2 = 8
    assert prof.lambda_star == pytest.approx(8.0, rel=1e-9)


def test_mu_star_regression_random_orthonormal():
    # frozen after an oracle run over 200 seeded draws at dims (16,16,16),
    # ranks (2,2,2): band [4.11, 13.04], mean 7.09; seed-0 value below
    r = np.random.default_rng(0)
    us = [np.linalg.qr(r.standard_normal((16, 2)))[0] for _ in range(3)]
    core = r.standard_normal((2, 2, 2))
    x = np.einsum("abc,ia,jb,kc->ijk", core, *us)
    prof = incoherence_profile(tensor3(x), (2, 2, 2))
    assert prof.mu_star == pytest.approx(7.284664852056, abs=1e-9)
    assert 4.0 < prof.mu_star < 13.5
    assert prof.alpha_star >= 0.0


def test_profile_validation():
    with pytest.raises(ValueError):
        IncoherenceProfile(mu_star=-1.0, alpha_star=0.0, lambda_star=1.0,
                           r_star=1.0, d=2.0, d_star=2.0)
    with pytest.raises(ValueError):
        IncoherenceProfile(mu_star=1.0, alpha_star=0.0, lambda_star=1.0,
                           r_star=1.0, d=2.0, d_star=3.0)


# --------------------------------------------------------------------------
# rank estimation and recoverability
# --------------------------------------------------------------------------

def test_estimate_rank_exact_construction():
    t = gen_phantom((10, 12, 14), (2, 3, 4), "lowrank", 3)
    assert estimate_rank(t, energy=1.0 - 1e-12) == (2, 3, 4)


def test_estimate_rank_zero_tensor():
    assert estimate_rank(zeros((4, 4, 4)), energy=0.99) == (0, 0, 0)


def test_estimate_rank_full_energy_full_rank():
    rng = np.random.default_rng(4)
    t = tensor3(rng.standard_normal((5, 6, 7)))
    assert estimate_rank(t, energy=1.0) == (5, 6, 7)


def test_estimate_rank_validates_energy():
    with pytest.raises(ValueError):
        estimate_rank(zeros((2, 2, 2)), energy=0.0)
    with pytest.raises(ValueError):
        estimate_rank(zeros((2, 2, 2)), energy=1.1)


def test_check_recoverable_boundary_inclusive():
    # craft a mask whose cardinality equals the bound exactly
    inp = BoundInput(dims=(8, 8, 8), r=1, s=0, c=0.01)
    bound = bound_theorem2(inp).bound
    mask = explicit_mask((8, 8, 8), np.arange(bound))
    chk = check_recoverable(mask, (1, 1, 1), 0, c=0.01)
    assert chk.margin == 0
    assert chk.recoverable


def test_check_recoverable_full_and_tiny():
    full = full_mask((64, 64, 64))
    chk = check_recoverable(full, (1, 1, 1), 0, c=1.0)
    assert chk.bound == 8856
    assert chk.recoverable
    tiny = explicit_mask((8, 8, 8), [0])
    chk2 = check_recoverable(tiny, (1, 1, 1), 0, c=1.0)
    assert not chk2.recoverable
    assert chk2.margin < 0


def test_bound_input_validation():
    with pytest.raises(ValueError):
        BoundInput(dims=(4, 4), r=1)
    with pytest.raises(ValueError):
        BoundInput(dims=(4, 4, 4), r=5)
    with pytest.raises(ValueError):
        BoundInput(dims=(4, 4, 4), r=1, beta=0.0)
    with pytest.raises(ValueError):
        BoundInput(dims=(4, 4, 4), r=1, c=0.0)
    # order k > 3 is accepted for the symbolic bounds
    assert bound_theorem2(BoundInput(dims=(4, 4, 4, 4), r=1)).bound > 0
