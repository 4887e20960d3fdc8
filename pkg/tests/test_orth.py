"""Block orthogonalization: correctness, dependence handling, and the
instrumented reduction counts that the communication model promises."""

import numpy as np
import pytest
import scipy.sparse

from gcgeig import OrthConfig, modified_block_orth, orth_against, recursive_orth_svd
from gcgeig.errors import AllDependent, InvalidRange
from gcgeig.operators import CsrOperator


def random_block(n, m, seed):
    rng = np.random.default_rng(seed)
    return np.asfortranarray(rng.uniform(-1.0, 1.0, (n, m)))


def spd_tridiag(n):
    d = 4.0 * np.ones(n)
    off = 1.0 * np.ones(n - 1)
    return CsrOperator(scipy.sparse.diags([off, d, off], [-1, 0, 1], format="csr"))


def bgram(x, b=None):
    bx = x if b is None else b.apply(np.asfortranarray(x))
    return x.T @ bx


def gram_defect(x, b=None):
    g = bgram(x, b)
    return float(np.abs(g - np.eye(g.shape[0])).max())


def span_residual(kept, original, b=None):
    """How much of the original columns lies outside span(kept)."""
    bo = original if b is None else b.apply(np.asfortranarray(original))
    proj = kept @ (kept.T @ bo)
    return float(np.abs(original - proj).max()) / float(np.abs(original).max())


# ---------------------------------------------------------------------------
# reduction counts: one fused local-dot + global reduce per unit
# ---------------------------------------------------------------------------


def test_block_scheme_count_m8_b2():
    # m columns + one deflation sweep per block boundary: m + m/b - 1
    x = random_block(64, 8, seed=101)
    out = modified_block_orth(x, cfg=OrthConfig(block_width=2))
    assert out.reduction_count == 8 + 8 // 2 - 1 == 11
    assert out.num_kept == 8
    assert out.replaced_indices == []
    assert gram_defect(x[:, :8]) <= 1e-12


def test_block_scheme_count_m32_b2():
    x = random_block(256, 32, seed=202)
    out = modified_block_orth(x, cfg=OrthConfig(block_width=2))
    assert out.reduction_count == 32 + 32 // 2 - 1 == 47
    assert out.num_kept == 32


def test_block_scheme_count_default_width():
    # default block width is m // 4 (capped at 200): m=8 -> b=2 -> 11 again
    x = random_block(64, 8, seed=103)
    out = modified_block_orth(x)
    assert out.reduction_count == 11


def test_recursive_count_three_leaf_passes():
    # ask for an unattainable Gram defect so every leaf runs the full
    # three-pass budget: two 16-wide leaves at 3 + one split sweep = 7
    x = random_block(256, 32, seed=303)
    out = recursive_orth_svd(x, cfg=OrthConfig(reorth_tol=1e-15))
    assert out.reduction_count == 32 // 4 - 1 == 7
    assert out.num_kept == 32
    assert gram_defect(x) <= 1e-12


def test_recursive_count_adaptive_exit():
    # at the default tolerance the second Gram check already passes,
    # so each leaf stops after 2 rounds: 2 + 2 + 1
    x = random_block(256, 32, seed=304)
    out = recursive_orth_svd(x, cfg=OrthConfig())
    assert out.reduction_count == 5
    assert gram_defect(x) <= 1e-10


# ---------------------------------------------------------------------------
# orthonormality and span, with and without a B inner product
# ---------------------------------------------------------------------------


@pytest.mark.parametrize("scheme", ["block", "recursive"])
@pytest.mark.parametrize("use_b", [False, True])
def test_gram_defect_within_tolerance(scheme, use_b):
    b = spd_tridiag(50) if use_b else None
    x = random_block(50, 8, seed=7 if use_b else 8)
    original = x.copy()
    cfg = OrthConfig()
    if scheme == "block":
        out = modified_block_orth(x, b=b, cfg=cfg)
    else:
        out = recursive_orth_svd(x, b=b, cfg=cfg)
    assert out.num_kept == 8
    assert gram_defect(x, b) <= 10 * cfg.reorth_tol
    assert span_residual(x, original, b) <= 1e-10


@pytest.mark.parametrize("scheme", ["block", "recursive"])
def test_many_seeds_property_sweep(scheme):
    for seed in range(20):
        rng = np.random.default_rng(5000 + seed)
        n = int(rng.integers(10, 90))
        m = int(rng.integers(2, min(n, 24) + 1))
        x = np.asfortranarray(rng.uniform(-1, 1, (n, m)))
        original = x.copy()
        if scheme == "block":
            out = modified_block_orth(x)
        else:
            out = recursive_orth_svd(x)
        assert out.num_kept == m
        assert gram_defect(x[:, :m]) <= 1e-9
        assert span_residual(x[:, :m], original) <= 1e-8


def test_block_scheme_idempotent_on_orthonormal_input():
    x = random_block(40, 6, seed=11)
    modified_block_orth(x)
    before = x.copy()
    out = modified_block_orth(x)
    assert out.num_kept == 6
    assert np.abs(x - before).max() <= 1e-12


def test_recursive_leaf_skips_touching_orthonormal_input():
    # a single leaf whose first Gram check passes must not modify anything
    x = random_block(40, 6, seed=12)
    recursive_orth_svd(x)
    before = x.copy()
    out = recursive_orth_svd(x)
    assert out.reduction_count == 1
    assert np.array_equal(x, before)


# ---------------------------------------------------------------------------
# dependence: rearmost replacement, shrinking, total collapse
# ---------------------------------------------------------------------------


def test_block_scheme_replaces_duplicate_column():
    x = random_block(40, 8, seed=21)
    x[:, 3] = x[:, 1]
    out = modified_block_orth(x, cfg=OrthConfig(block_width=2))
    assert out.num_kept == 7
    assert 3 in out.replaced_indices
    assert gram_defect(x[:, :7]) <= 1e-9


def test_recursive_replaces_duplicate_column():
    x = random_block(40, 8, seed=22)
    x[:, 3] = x[:, 1]
    out = recursive_orth_svd(x)
    assert out.num_kept == 7
    assert out.replaced_indices  # some slot was refilled from the rear
    assert all(0 <= k < 8 for k in out.replaced_indices)
    assert gram_defect(x[:, :7]) <= 1e-9


def test_block_scheme_zero_column_mid_block():
    x = random_block(30, 6, seed=23)
    x[:, 4] = 0.0
    out = modified_block_orth(x, cfg=OrthConfig(block_width=3))
    assert out.num_kept == 5
    assert gram_defect(x[:, :5]) <= 1e-9


@pytest.mark.parametrize("scheme", ["block", "recursive"])
def test_all_dependent_raises(scheme):
    x = np.zeros((20, 4), order="F")
    with pytest.raises(AllDependent):
        if scheme == "block":
            modified_block_orth(x)
        else:
            recursive_orth_svd(x)


def test_rank_two_input_keeps_two():
    rng = np.random.default_rng(31)
    base = np.asfortranarray(rng.uniform(-1, 1, (30, 2)))
    mix = rng.uniform(-1, 1, (2, 6))
    x = np.asfortranarray(base @ mix)
    out = recursive_orth_svd(x)
    assert out.num_kept == 2
    assert gram_defect(x[:, :2]) <= 1e-9


# ---------------------------------------------------------------------------
# column ranges (1-based, inclusive) and argument validation
# ---------------------------------------------------------------------------


def test_recursive_range_leaves_outside_columns_alone():
    x = random_block(20, 6, seed=41)
    before = x.copy()
    out = recursive_orth_svd(x, 2, 5)
    assert out.num_kept == 4
    assert np.array_equal(x[:, 0], before[:, 0])
    assert np.array_equal(x[:, 5], before[:, 5])
    assert gram_defect(x[:, 1:5]) <= 1e-9


@pytest.mark.parametrize("bad", [(0, 3), (3, 2), (1, 9), (-1, 1)])
def test_recursive_range_validation(bad):
    x = random_block(10, 6, seed=42)
    with pytest.raises(InvalidRange):
        recursive_orth_svd(x, bad[0], bad[1])


# ---------------------------------------------------------------------------
# orth_against: deflate then orthonormalize
# ---------------------------------------------------------------------------


@pytest.mark.parametrize("use_b", [False, True])
def test_orth_against_basic(use_b):
    b = spd_tridiag(30) if use_b else None
    basis = random_block(30, 4, seed=51)
    recursive_orth_svd(basis, b=b)
    x = random_block(30, 3, seed=52)
    out = orth_against(x, basis, b=b)
    assert out.num_kept == 3
    bx = x if b is None else b.apply(x)
    assert float(np.abs(basis.T @ bx).max()) <= 1e-9
    assert gram_defect(x, b) <= 1e-9


def test_orth_against_drops_spanned_column():
    basis = random_block(30, 4, seed=53)
    recursive_orth_svd(basis)
    x = random_block(30, 3, seed=54)
    x[:, 1] = basis @ np.array([0.2, -0.4, 1.0, 0.3])
    out = orth_against(x, basis)
    assert out.num_kept == 2
    kept = x[:, :2]
    assert float(np.abs(basis.T @ kept).max()) <= 1e-9
    assert gram_defect(kept) <= 1e-9


def test_orth_against_empty_basis_is_plain_orth():
    x = random_block(25, 5, seed=55)
    out = orth_against(x, np.zeros((25, 0), order="F"))
    assert out.num_kept == 5
    assert gram_defect(x) <= 1e-9
