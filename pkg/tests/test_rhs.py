import numpy as np
import pytest
from hypothesis import given, strategies as st

from collbreak.kernels import BreakupTable, CollisionKernel, DaughterDistribution
from collbreak.rhs import (
    RhsWorkspace,
    gain_loss,
    gross_flux,
    moment_rate_gme,
    rhs_B_form,
    rhs_b_form,
)

from conftest import ALL_BUILTIN_DAUGHTERS, ref_B_from_b, ref_daughter, ref_kernel, ref_rhs_B, ref_rhs_b

KERNELS = {
    "product": (CollisionKernel.product(1.3), ref_kernel("product", 1.3)),
    "power": (CollisionKernel.power(0.8, 0.6), ref_kernel("power", 0.8, 0.6)),
    "constant": (CollisionKernel.constant(2.0), ref_kernel("constant", 2.0)),
}

states = st.integers(2, 14).flatmap(
    lambda l: st.lists(st.one_of(st.just(0.0), st.floats(0.0, 5.0)), min_size=l, max_size=l))


def test_examples_b_form():
    prod = CollisionKernel.product(1.0)
    uni = DaughterDistribution.builtin("discrete-uniform")
    np.testing.assert_allclose(rhs_b_form([1.0, 1.0, 1.0], prod, uni), [4, -2, 0])
    shatter = DaughterDistribution.builtin("monomer-shatter")
    np.testing.assert_allclose(rhs_b_form([0.0, 1.0, 0.0, 0.0], prod, shatter), [8, -4, 0, 0])
    for fam in ALL_BUILTIN_DAUGHTERS:
        w = np.zeros(9)
        w[0] = 3.0
        np.testing.assert_array_equal(rhs_b_form(w, prod, DaughterDistribution.builtin(fam)), 0.0)


def test_examples_B_form():
    prod = CollisionKernel.product(1.0)
    B = BreakupTable.from_daughter(DaughterDistribution.builtin("monomer-shatter"), 4)
    np.testing.assert_allclose(rhs_B_form([0.0, 1.0, 0.0, 0.0], prod, B), [8, -4, 0, 0])
    B2 = BreakupTable.from_daughter(DaughterDistribution.builtin("binary-split"), 2)
    np.testing.assert_allclose(rhs_B_form([0.7, 0.0], prod, B2), [0, 0], atol=1e-15)


def test_mass_transfer_example():
    B = BreakupTable.from_entries({(1, 1, 1): 2.0, (3, 2, 2): 1.0, (1, 2, 2): 1.0}, 4)
    rate = rhs_B_form([0.0, 1.0, 0.0, 0.0], CollisionKernel.constant(1.0), B)
    np.testing.assert_allclose(rate, [0.5, -1.0, 0.5, 0.0])
    assert np.dot(np.arange(1, 5), rate) == pytest.approx(0.0, abs=1e-15)


def test_gme_examples():
    prod = CollisionKernel.product(1.0)
    shatter = DaughterDistribution.builtin("monomer-shatter")
    w = [0.0, 1.0, 0.0, 0.0]
    assert moment_rate_gme(w, prod, shatter, np.arange(1.0, 5) ** 2) == pytest.approx(-8.0)
    assert moment_rate_gme(w, prod, shatter, np.zeros(4)) == 0.0
    assert moment_rate_gme(w, prod, shatter, np.arange(1.0, 5)) == pytest.approx(0.0, abs=1e-14)
    with pytest.raises(ValueError):
        moment_rate_gme(w, prod, shatter, np.zeros(3))


@given(w=states, kname=st.sampled_from(sorted(KERNELS)), fam=st.sampled_from(ALL_BUILTIN_DAUGHTERS))
def test_b_form_matches_reference_sums(w, kname, fam):
    kernel, ref_a = KERNELS[kname]
    d = DaughterDistribution.builtin(fam)
    expect = ref_rhs_b(w, ref_a, ref_daughter(fam))
    scale = np.abs(expect).max() + 1.0
    for method in ("auto", "rowsum", "tensor", "naive"):
        np.testing.assert_allclose(rhs_b_form(w, kernel, d, method=method), expect,
                                   rtol=1e-12, atol=1e-13 * scale)


@given(w=states, kname=st.sampled_from(sorted(KERNELS)), fam=st.sampled_from(ALL_BUILTIN_DAUGHTERS))
def test_B_form_matches_reference_sums(w, kname, fam):
    kernel, ref_a = KERNELS[kname]
    B = BreakupTable.from_daughter(DaughterDistribution.builtin(fam), len(w))
    expect = ref_rhs_B(w, ref_a, ref_B_from_b(ref_daughter(fam)))
    scale = np.abs(expect).max() + 1.0
    np.testing.assert_allclose(rhs_B_form(w, kernel, B), expect, rtol=1e-12, atol=1e-13 * scale)


@given(w=states, kname=st.sampled_from(sorted(KERNELS)), fam=st.sampled_from(ALL_BUILTIN_DAUGHTERS))
def test_mass_annihilation(w, kname, fam):
    kernel, _ = KERNELS[kname]
    d = DaughterDistribution.builtin(fam)
    sizes = np.arange(1.0, len(w) + 1)
    flux = gross_flux(w, kernel)
    rate_b = np.dot(sizes, rhs_b_form(w, kernel, d))
    rate_B = np.dot(sizes, rhs_B_form(w, kernel, BreakupTable.from_daughter(d, len(w))))
    if fam == "paper-remark-uniform":
        # fragments carry j-1 instead of j; mass leaks unless nothing breaks
        return
    assert abs(rate_b) <= 1e-12 * flux + 1e-300
    assert abs(rate_B) <= 1e-12 * flux + 1e-300


@given(w=states, kname=st.sampled_from(sorted(KERNELS)), fam=st.sampled_from(ALL_BUILTIN_DAUGHTERS),
       seed=st.integers(0, 2**32 - 1))
def test_gme_equals_weighted_rhs(w, kname, fam, seed):
    kernel, _ = KERNELS[kname]
    d = DaughterDistribution.builtin(fam)
    mu = np.random.default_rng(seed).normal(size=len(w))
    rhs = rhs_b_form(w, kernel, d)
    gain, loss = gain_loss(w, kernel, d)
    scale = np.dot(np.abs(mu), gain + loss) + 1e-300
    assert abs(moment_rate_gme(w, kernel, d, mu) - np.dot(mu, rhs)) <= 1e-12 * scale


@given(w=states, kname=st.sampled_from(sorted(KERNELS)), fam=st.sampled_from(ALL_BUILTIN_DAUGHTERS))
def test_sign_structure_and_quasi_positivity(w, kname, fam):
    kernel, _ = KERNELS[kname]
    d = DaughterDistribution.builtin(fam)
    gain, loss = gain_loss(w, kernel, d)
    assert np.all(gain >= 0) and np.all(loss >= 0)
    rhs = rhs_b_form(w, kernel, d)
    np.testing.assert_allclose(rhs, gain - loss, rtol=1e-12, atol=1e-12 * (gain.max() + 1))
    zero = np.asarray(w) == 0
    assert np.all(rhs[zero] >= 0)


def test_last_component_has_no_gain():
    w = np.random.default_rng(3).random(12)
    gain, _ = gain_loss(w, CollisionKernel.product(), DaughterDistribution.builtin("discrete-uniform"))
    assert gain[-1] == 0.0


def test_k_dependent_table_uses_tensor_tier():
    l = 6
    T = np.zeros((l, l, l))
    for j in range(2, l + 1):
        for k in range(1, l + 1):
            if k % 2:
                T[0, j - 1, k - 1] = j  # shatter into monomers
            else:
                lo = j // 2
                T[lo - 1, j - 1, k - 1] += 1
                T[j - lo - 1, j - 1, k - 1] += 1
    d = DaughterDistribution.from_table(T, dominance=(2.0, 1.0))
    assert not d.k_independent
    ws = RhsWorkspace(l, CollisionKernel.product(), d)
    assert ws.tier == "tensor"
    w = np.random.default_rng(1).random(l)
    ref = ref_rhs_b(w, ref_kernel("product"), lambda i, j, k: 1.0 if i == j == 1 else
                    (T[i - 1, j - 1, k - 1] if i < j else 0.0))
    np.testing.assert_allclose(ws(w), ref, rtol=1e-12, atol=1e-14)
    np.testing.assert_allclose(rhs_b_form(w, CollisionKernel.product(), d, method="naive"), ref,
                               rtol=1e-12, atol=1e-14)
    assert abs(np.dot(np.arange(1, l + 1), ws(w))) <= 1e-12 * gross_flux(w, CollisionKernel.product())
    with pytest.raises(ValueError):
        RhsWorkspace(l, CollisionKernel.product(), d, method="separable")


def test_tier_selection_and_errors():
    d = DaughterDistribution.builtin("binary-split")
    assert RhsWorkspace(8, CollisionKernel.product(), d).tier == "separable"
    table = CollisionKernel.from_table(np.ones((8, 8)))
    assert RhsWorkspace(8, table, d).tier == "rowsum"
    with pytest.raises(ValueError):
        RhsWorkspace(8, table, d, method="separable")
    with pytest.raises(ValueError):
        RhsWorkspace(8, table, d, method="bogus")
    with pytest.raises(ValueError):
        RhsWorkspace(8, table, d)(np.ones(7))
    with pytest.raises(ValueError):
        RhsWorkspace(8, table, BreakupTable.from_daughter(d, 4))


@pytest.mark.parametrize("fam", ["discrete-uniform", "binary-split"])
def test_extended_precision_path_above_threshold(fam):
    l = 1100
    rng = np.random.default_rng(7)
    w = rng.random(l) * 1e-3
    kernel = CollisionKernel.product()
    d = DaughterDistribution.builtin(fam)
    fast = rhs_b_form(w, kernel, d)
    ref = rhs_b_form(w, kernel, d, method="rowsum")
    gain, loss = gain_loss(w, kernel, d)
    np.testing.assert_allclose(fast, ref, rtol=0, atol=1e-12 * (gain + loss).max())
    assert abs(np.dot(np.arange(1.0, l + 1), fast)) <= 1e-12 * gross_flux(w, kernel)


def test_workspace_is_deterministic():
    w = np.random.default_rng(11).random(64)
    ws = RhsWorkspace(64, CollisionKernel.power(1.0, 0.5), DaughterDistribution.builtin("discrete-uniform"))
    a, b = ws(w), ws(w)
    assert np.array_equal(a, b)
