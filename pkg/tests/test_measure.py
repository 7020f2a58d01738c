import numpy as np
import pytest
from hypothesis import given, strategies as st

from conftest import smooth_field
from gibbs_tree import (ContractViolation, check_compatibility, field_to_vertexfield, integrate,
                        log_density, marginal_at, messages, root_marginal, sample_configuration,
                        sample_configurations)
from gibbs_tree.measure import log_partition


def test_messages_depth_zero(k2, g64):
    h = smooth_field(g64, [0.3, -0.2, 0.5, 0.1, 0.9], 2.0)
    vf = field_to_vertexfield(h, 2, 0)
    msgs = messages(k2, g64, vf)
    assert np.array_equal(msgs.log_z[()], h)
    assert msgs.log_Z == pytest.approx(np.log(integrate(g64, np.exp(h))), abs=1e-13)
    dens = root_marginal(k2, g64, vf)
    assert np.allclose(dens, np.exp(h) / integrate(g64, np.exp(h)), rtol=1e-13)


def test_messages_constant_kernel(kconst, g16):
    vf = field_to_vertexfield(g16.zeros(), 3, 3)
    msgs = messages(kconst, g16, vf)
    assert abs(msgs.log_Z) < 1e-13
    assert all(np.max(np.abs(z)) < 1e-13 for z in msgs.log_z.values())


def test_messages_chain(k2, g64):
    vf = field_to_vertexfield(g64.zeros(), 1, 1)
    msgs = messages(k2, g64, vf)
    want = k2.matrix(g64) @ g64.weights
    assert np.allclose(np.exp(msgs.log_z[()]), want, rtol=1e-13)


@pytest.mark.parametrize("depth", [0, 1, 3])
def test_densities_normalized(k2, g64, ti_k2, depth):
    vf = field_to_vertexfield(ti_k2[-1], 2, depth)
    msgs = messages(k2, g64, vf)
    for x in vf.vertices():
        assert integrate(g64, marginal_at(k2, g64, vf, x, msgs)) == pytest.approx(1.0, abs=1e-10)


def test_root_marginal_uniform_for_free_measure(kconst, g16):
    vf = field_to_vertexfield(g16.zeros(), 2, 3)
    assert np.allclose(root_marginal(kconst, g16, vf), 1.0, atol=1e-13)
    assert np.allclose(marginal_at(kconst, g16, vf, (1, 0, 1)), 1.0, atol=1e-13)


def test_marginal_at_root_is_root_marginal(k2, g64, ti_k2):
    vf = field_to_vertexfield(ti_k2[1], 2, 3)
    assert np.array_equal(marginal_at(k2, g64, vf, ()), root_marginal(k2, g64, vf))


def test_marginal_mirror_symmetry(k2, g64, ti_k2):
    # the two nonzero fixed points are mirror images, and so are their marginals
    _, neg, pos = ti_k2
    a = marginal_at(k2, g64, field_to_vertexfield(pos, 2, 3), (0, 1))
    b = marginal_at(k2, g64, field_to_vertexfield(neg, 2, 3), (0, 1))
    assert np.max(np.abs(a - b[::-1])) < 1e-8
    z = marginal_at(k2, g64, field_to_vertexfield(ti_k2[0], 2, 3), (1, 1))
    assert np.max(np.abs(z - z[::-1])) < 1e-8


def test_marginal_outside_volume(k2, g16):
    with pytest.raises(ContractViolation):
        marginal_at(k2, g16, field_to_vertexfield(g16.zeros(), 2, 1), (0, 0))


def test_volume_consistency(k2, g64, ti_k2):
    h = ti_k2[-1]
    a = root_marginal(k2, g64, field_to_vertexfield(h, 2, 4))
    b = root_marginal(k2, g64, field_to_vertexfield(h, 2, 5))
    assert integrate(g64, np.abs(a - b)) < 1e-6


def test_log_density_free(kconst, g16):
    vf = field_to_vertexfield(g16.zeros(), 2, 2)
    rng = np.random.default_rng(3)
    sigma = {x: float(rng.random()) for x in vf.vertices()}
    assert abs(log_density(kconst, g16, vf, sigma)) < 1e-13


def test_log_density_depth_zero(k2, g64):
    h = smooth_field(g64, [0.3, -0.2, 0.5, 0.1, 0.9], 2.0)
    vf = field_to_vertexfield(h, 2, 0)
    i = 17
    want = h[i] - np.log(integrate(g64, np.exp(h)))
    assert log_density(k2, g64, vf, {(): float(g64.nodes[i])}) == pytest.approx(want, abs=1e-13)


@given(st.floats(-3, 3))
def test_leaf_shift_invariance(c):
    from gibbs_tree import make_grid, preset_kernel
    kern, g = preset_kernel("ehr12-k3"), make_grid(16)
    h = smooth_field(g, [0.2, 0.1, -0.4, 0.3, 0.6], 1.5)
    vf = field_to_vertexfield(h, 2, 2)
    shifted = field_to_vertexfield([h, h, h + c], 2, 2)
    n_leaves = 4
    assert log_partition(kern, g, shifted) - log_partition(kern, g, vf) == pytest.approx(n_leaves * c,
                                                                                          abs=1e-10)
    sigma = {x: float(g.nodes[(3 * len(x) + sum(x)) % 16]) for x in vf.vertices()}
    assert log_density(kern, g, shifted, sigma) == pytest.approx(log_density(kern, g, vf, sigma), abs=1e-10)


def test_log_density_rejects_bad_configuration(k2, g16):
    vf = field_to_vertexfield(g16.zeros(), 2, 1)
    with pytest.raises(ContractViolation):
        log_density(k2, g16, vf, {(): 0.5, (0,): 0.2})
    with pytest.raises(ContractViolation):
        log_density(k2, g16, vf, {(): 1.5, (0,): 0.2, (1,): 0.3})


def test_compatibility_zero_field(k2, g64):
    rep = check_compatibility(k2, g64, field_to_vertexfield(g64.zeros(), 2, 3), tol=1e-8)
    assert rep.passed and rep.max_rel_err < 1e-8


def test_compatibility_fixed_point(k2, g64, ti_k2):
    rep = check_compatibility(k2, g64, field_to_vertexfield(ti_k2[-1], 2, 3))
    assert rep.passed


def test_compatibility_fails_off_equation(ktu, g64):
    rep = check_compatibility(ktu, g64, field_to_vertexfield(g64.zeros(), 2, 3))
    assert not rep.passed and rep.max_rel_err > 1e-2


def test_compatibility_needs_depth(k2, g16):
    with pytest.raises(ContractViolation):
        check_compatibility(k2, g16, field_to_vertexfield(g16.zeros(), 2, 0))


def test_sampling_deterministic(k2, g64, ti_k2):
    vf = field_to_vertexfield(ti_k2[-1], 2, 2)
    a = sample_configuration(k2, g64, vf, 11)
    assert a == sample_configuration(k2, g64, vf, 11)
    assert a != sample_configuration(k2, g64, vf, 12)
    order, spins = sample_configurations(k2, g64, vf, 3, rng_seed=10)
    assert [spins[1, order.index(x)] for x in order] == [a[x] for x in order]
    assert np.all((spins >= 0) & (spins <= 1))


def test_sampling_free_measure_mean(kconst, g16):
    vf = field_to_vertexfield(g16.zeros(), 2, 1)
    _, spins = sample_configurations(kconst, g16, vf, 20000, rng_seed=5)
    assert abs(spins[:, 0].mean() - 0.5) < 0.01
    # spins are i.i.d. uniform: parent and child are uncorrelated
    assert abs(np.corrcoef(spins[:, 0], spins[:, 1])[0, 1]) < 0.03


def test_sampling_matches_child_marginal(k2, g64, ti_k2):
    vf = field_to_vertexfield(ti_k2[-1], 2, 2)
    order, spins = sample_configurations(k2, g64, vf, 20000, rng_seed=1)
    x = (1, 0)
    dens = marginal_at(k2, g64, vf, x)
    edges = g64.cell_edges
    hist, _ = np.histogram(spins[:, order.index(x)], bins=edges)
    assert np.sum(np.abs(hist / len(spins) - dens * g64.weights)) < 0.05
