import numpy as np
import pytest
from hypothesis import given, strategies as st

from conftest import smooth_field
from gibbs_tree import (ContractViolation, NoConvergenceError, apply_A, apply_kA, estimate_contraction,
                        h_bounds, invert_kA, jacobian_A, make_grid, preset_kernel)
from gibbs_tree.operator import lipschitz_ratio

coeffs = st.lists(st.floats(-1, 1), min_size=5, max_size=5)
amps = st.floats(0.1, 6.0)
presets = st.sampled_from(["ehr12-k2", "ehr12-k3"])
G32 = make_grid(32)


def test_zero_field_under_zero_mean(k2, g64):
    assert np.max(np.abs(apply_A(k2, g64, g64.zeros()))) < 1e-15
    assert np.max(np.abs(apply_kA(k2, g64, 2, g64.zeros()))) < 1e-15


@given(coeffs, amps)
def test_constant_kernel_maps_to_zero(c, a):
    kern = preset_kernel("constant")
    assert np.array_equal(apply_A(kern, G32, smooth_field(G32, c, a)), G32.zeros())


@given(presets, coeffs, amps, st.floats(-5, 5))
def test_normalization_and_shift_invariance(name, c, a, shift):
    kern = preset_kernel(name)
    h = smooth_field(G32, c, a)
    Ah = apply_A(kern, G32, h)
    assert Ah[0] == 0.0
    assert np.max(np.abs(apply_A(kern, G32, h + shift) - Ah)) < 1e-12


@given(presets, coeffs, amps, st.integers(1, 4))
def test_kA_and_dominance(name, c, a, k):
    kern = preset_kernel(name)
    h = smooth_field(G32, c, a)
    Ah = apply_A(kern, G32, h)
    assert np.allclose(apply_kA(kern, G32, k, h), k * Ah, rtol=0, atol=1e-14)
    lo, hi = h_bounds(kern, G32, k)
    assert np.all(k * Ah >= lo - 1e-12) and np.all(k * Ah <= hi + 1e-12)


def test_kA_with_k1_equals_A(k3, g64):
    h = smooth_field(g64, [0.3, -0.2, 0.1, 0.0, 0.5], 2.0)
    assert np.array_equal(apply_kA(k3, g64, 1, h), apply_A(k3, g64, h))


def test_huge_fields_stay_finite(k2, g64):
    h = 700.0 * g64.nodes
    assert np.all(np.isfinite(apply_A(k2, g64, h)))


@given(presets, coeffs, amps)
def test_jacobian_matches_finite_differences(name, c, a):
    kern = preset_kernel(name)
    g = make_grid(16)
    h = smooth_field(g, c, a)
    J = jacobian_A(kern, g, h)
    eps = 1e-5
    fd = np.empty_like(J)
    for j in range(g.n_nodes):
        e = np.zeros(g.n_nodes)
        e[j] = eps
        fd[:, j] = (apply_A(kern, g, h + e) - apply_A(kern, g, h - e)) / (2 * eps)
    assert np.max(np.abs(J - fd)) <= 1e-6 * max(1.0, np.max(np.abs(fd)))


def test_jacobian_constant_kernel_is_zero(kconst, g64):
    assert np.array_equal(jacobian_A(kconst, g64, g64.zeros()), np.zeros((64, 64)))


def test_jacobian_rows_annihilate_constants(k2, g64):
    # A(h + c) = A(h), so J @ 1 = 0.
    h = smooth_field(g64, [0.4, 0.1, -0.3, 0.2, 0.7], 3.0)
    assert np.max(np.abs(jacobian_A(k2, g64, h) @ np.ones(64))) < 1e-13


def test_invert_zero_target(k2, g64):
    assert np.array_equal(invert_kA(k2, g64, 2, g64.zeros()), g64.zeros())


@given(coeffs, st.floats(0.1, 2.0))
def test_invert_roundtrip_full_rank(kfull, g16, c, a):
    target = apply_kA(kfull, g16, 2, smooth_field(g16, c, a))
    h = invert_kA(kfull, g16, 2, target)
    assert h[0] == 0.0
    assert np.max(np.abs(apply_kA(kfull, g16, 2, h) - target)) < 1e-8


def test_invert_roundtrip_rank_deficient(k2, g64):
    # The range of A is a curve for this kernel; any target on it has preimages.
    target = apply_kA(k2, g64, 2, smooth_field(g64, [0.2, 0.5, -0.1, 0.3, 0.8], 1.5))
    h = invert_kA(k2, g64, 2, target)
    assert np.max(np.abs(apply_kA(k2, g64, 2, h) - target)) < 1e-8


def test_invert_unreachable_target(kconst, g16):
    target = 0.3 * g16.nodes
    with pytest.raises(NoConvergenceError) as info:
        invert_kA(kconst, g16, 2, target)
    assert info.value.best is not None


def test_invert_requires_pinned_target(k2, g16):
    with pytest.raises(ContractViolation):
        invert_kA(k2, g16, 2, g16.zeros() + 1.0)


def test_contraction_constant_kernel(kconst, g16):
    est = estimate_contraction(kconst, g16, 20, 3.0, 1)
    assert est.alpha_hat == 0.0


def test_contraction_shift_pair_ratio_zero(k2, g16):
    h = smooth_field(g16, [0.1, 0.2, 0.3, 0.4, 0.5])
    assert lipschitz_ratio(k2, g16, h + 0.7, h) < 1e-12


def test_contraction_reproducible_and_consistent(k2, g64):
    amp = 2 * np.log(29)
    a = estimate_contraction(k2, g64, 60, amp, 7)
    b = estimate_contraction(k2, g64, 60, amp, 7)
    assert a == b
    assert a.alpha_hat == max(a.alpha_pairs, a.alpha_local)
    assert 0 < a.alpha_pairs < 1
    # the pointwise quotient is never smaller than the sup-norm one
    assert a.pointwise_ratio >= a.alpha_pairs
