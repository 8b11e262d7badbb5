"""Fused vectors, block layouts, importance scoring, and selection policies."""

import csv

import numpy as np
import pytest

from mifuse.errors import ConfigError, DataError
from mifuse.fusion import (
    BlockLayout,
    FeatureMatrix,
    FeatureSelection,
    ImportanceSelector,
    apply_selection,
    feature_matrix_to_csv,
    fuse_trial,
    fuse_trials,
    rf_feature_importance,
    select_cumulative,
    select_features,
    select_top_k,
)


def region_blocks(rng, regions=("left", "right"), csp=2, fcm=2, tsm=120):
    return {
        r: {
            "csp": rng.standard_normal(csp),
            "fcm": rng.standard_normal(fcm),
            "tsm": rng.standard_normal(tsm),
        }
        for r in regions
    }


def planted_matrix(rng, n_trials=500, n_noise=247):
    """One label-carrying column among pure-noise columns."""
    y = rng.permutation(np.array([1, 2] * (n_trials // 2)))
    planted = np.where(y == 2, 1.0, -1.0) + 0.05 * rng.standard_normal(n_trials)
    noise = rng.standard_normal((n_trials, n_noise))
    X = np.column_stack([noise[:, :3], planted, noise[:, 3:]])
    return X, y, 3  # planted column index


# fuse_trial -------------------------------------------------------------------------

def test_fused_length_two_regions_248():
    rng = np.random.default_rng(0)
    fused = fuse_trial(region_blocks(rng), region_order=("left", "right"))
    assert fused.values.shape == (248,)
    assert fused.layout.total_length == 248


def test_fused_length_one_region_124():
    rng = np.random.default_rng(1)
    blocks = region_blocks(rng, regions=("only",))
    fused = fuse_trial(blocks, region_order=("only",))
    assert fused.values.shape == (124,)


def test_fusion_order_follows_montage_not_input():
    rng = np.random.default_rng(2)
    blocks = region_blocks(rng)
    reversed_blocks = {k: blocks[k] for k in reversed(list(blocks))}
    a = fuse_trial(blocks, region_order=("left", "right"))
    b = fuse_trial(reversed_blocks, region_order=("left", "right"))
    assert np.array_equal(a.values, b.values)
    assert a.layout == b.layout


def test_fusion_missing_block_errors():
    rng = np.random.default_rng(3)
    blocks = region_blocks(rng)
    del blocks["left"]["fcm"]
    with pytest.raises(DataError, match="fcm"):
        fuse_trial(blocks, region_order=("left", "right"))


def test_layout_roundtrip_recovers_blocks():
    rng = np.random.default_rng(4)
    blocks = region_blocks(rng)
    fused = fuse_trial(blocks, region_order=("left", "right"))
    for region in ("left", "right"):
        for name in ("csp", "fcm", "tsm"):
            assert np.array_equal(fused.block(region, name), blocks[region][name])


def test_layout_mismatch_across_trials_errors():
    rng = np.random.default_rng(5)
    first = region_blocks(rng)
    second = region_blocks(rng, tsm=119)
    with pytest.raises(DataError, match="layout"):
        fuse_trials([first, second], ("left", "right"), labels=[1, 2])


def test_fuse_trials_matrix_and_column_names():
    rng = np.random.default_rng(6)
    fm = fuse_trials(
        [region_blocks(rng) for _ in range(4)], ("left", "right"), labels=[1, 2, 1, 2]
    )
    assert fm.values.shape == (4, 248)
    assert fm.column_names[0] == "left/csp[0]"
    assert fm.column_names[4] == "left/tsm[0]"
    assert fm.column_names[124] == "right/csp[0]"


# rf_feature_importance -----------------------------------------------------------------

def test_planted_feature_dominates_importance():
    # With a full feature scan a label-valued column takes the root split of
    # every tree, so its importance share dominates outright; the default
    # sqrt scan still ranks it first but spreads mass over deep noise splits.
    rng = np.random.default_rng(7)
    y = rng.permutation(np.array([1, 2] * 250))
    planted_col = np.where(y == 2, 1.0, -1.0)
    noise = rng.standard_normal((500, 247))
    X = np.column_stack([noise[:, :3], planted_col, noise[:, 3:]])
    scores = rf_feature_importance(X, y, trees=100, seed=1, max_features=None)
    assert int(np.argmax(scores)) == 3
    assert scores[3] > 0.5
    default_scores = rf_feature_importance(X, y, trees=100, seed=1)
    assert int(np.argmax(default_scores)) == 3


def test_importance_sums_to_one():
    rng = np.random.default_rng(8)
    X = rng.standard_normal((60, 10))
    y = np.array([1, 2] * 30)
    scores = rf_feature_importance(X, y, trees=50, seed=0)
    assert abs(float(scores.sum()) - 1.0) <= 1e-9
    assert np.all(scores >= 0)


def test_importance_all_constant_errors():
    X = np.ones((20, 5))
    y = np.array([1, 2] * 10)
    with pytest.raises(DataError, match="constant"):
        rf_feature_importance(X, y, trees=10, seed=0)


def test_importance_single_class_errors():
    rng = np.random.default_rng(9)
    X = rng.standard_normal((20, 5))
    with pytest.raises(DataError):
        rf_feature_importance(X, np.ones(20, dtype=int), trees=10, seed=0)


def test_importance_deterministic_per_seed():
    rng = np.random.default_rng(10)
    X = rng.standard_normal((50, 8))
    y = np.array([1, 2] * 25)
    a = rf_feature_importance(X, y, trees=30, seed=5)
    b = rf_feature_importance(X, y, trees=30, seed=5)
    assert np.array_equal(a, b)


def test_importance_permutation_equivariant_with_full_feature_scan():
    # Feature subsampling and deep-node tie-breaks are keyed to column
    # indices, so exact equivariance needs every feature scanned per split
    # and tie-free splits; depth-1 trees over continuous features give both.
    # The only remaining randomness is row-wise, which permuting columns
    # cannot touch, so the scores must permute exactly (tolerance 0).
    rng = np.random.default_rng(11)
    X = rng.standard_normal((80, 9))
    y = np.where(X[:, 2] + 0.3 * rng.standard_normal(80) > 0, 2, 1)
    base = rf_feature_importance(X, y, trees=20, seed=3, max_features=None, max_depth=1)
    perm = rng.permutation(9)
    permuted = rf_feature_importance(
        X[:, perm], y, trees=20, seed=3, max_features=None, max_depth=1
    )
    back = np.empty_like(permuted)
    back[perm] = permuted
    assert np.array_equal(back, base)


# selection policies ------------------------------------------------------------------

def test_top_k_keeps_highest():
    sel = select_top_k(np.array([0.5, 0.3, 0.2]), 2)
    assert sel.kept_indices == (0, 1)


def test_cumulative_prefix():
    sel = select_cumulative(np.array([0.5, 0.3, 0.2]), 0.8)
    assert sel.kept_indices == (0, 1)


def test_top_k_tie_break_by_index():
    scores = np.full(6, 1.0 / 6.0)
    sel = select_top_k(scores, 3)
    assert sel.kept_indices == (0, 1, 2)


def test_cumulative_full_mass_keeps_all_nonzero():
    scores = np.array([0.4, 0.0, 0.35, 0.25, 0.0])
    sel = select_cumulative(scores, 1.0)
    assert sel.kept_indices == (0, 2, 3)


def test_top_k_too_large_errors():
    with pytest.raises(ConfigError):
        select_top_k(np.array([0.6, 0.4]), 3)


def test_cumulative_bad_fraction_errors():
    with pytest.raises(ConfigError):
        select_cumulative(np.array([0.6, 0.4]), 0.0)


def test_policy_string_dispatch():
    scores = np.array([0.5, 0.3, 0.2])
    assert select_features(scores, "top:1").kept_indices == (0,)
    assert select_features(scores, "cum:0.5").kept_indices == (0,)
    with pytest.raises(ConfigError):
        select_features(scores, "none")
    with pytest.raises(ConfigError):
        select_features(scores, "top:x")


# apply_selection -------------------------------------------------------------------

def make_fm(rng, n=10, d=6):
    return FeatureMatrix(
        values=rng.standard_normal((n, d)),
        labels=np.array([1, 2] * (n // 2)),
        column_names=tuple(f"c{i}" for i in range(d)),
    )


def test_apply_identity_selection():
    rng = np.random.default_rng(12)
    fm = make_fm(rng)
    scores = np.full(6, 1.0 / 6.0)
    out = apply_selection(fm, select_top_k(scores, 6))
    assert np.array_equal(out.values, fm.values)
    assert np.array_equal(out.labels, fm.labels)


def test_apply_empty_selection_errors():
    rng = np.random.default_rng(13)
    fm = make_fm(rng)
    sel = FeatureSelection(
        kept_indices=(), importance_scores=np.full(6, 1.0 / 6.0), policy="manual"
    )
    with pytest.raises(DataError):
        apply_selection(fm, sel)


def test_apply_out_of_range_errors():
    rng = np.random.default_rng(14)
    fm = make_fm(rng, d=3)
    sel = FeatureSelection(
        kept_indices=(0, 4), importance_scores=np.full(5, 0.2), policy="manual"
    )
    with pytest.raises(DataError):
        apply_selection(fm, sel)


def test_planted_column_survives_top_1():
    rng = np.random.default_rng(15)
    X, y, planted = planted_matrix(rng)
    fm = FeatureMatrix(
        values=X, labels=y, column_names=tuple(f"f{i}" for i in range(X.shape[1]))
    )
    scores = rf_feature_importance(X, y, trees=100, seed=2)
    out = apply_selection(fm, select_top_k(scores, 1))
    assert out.column_names == (f"f{planted}",)
    assert np.array_equal(out.values[:, 0], X[:, planted])


def test_csv_export_headers(tmp_path):
    rng = np.random.default_rng(16)
    fm = fuse_trials(
        [region_blocks(rng, tsm=3) for _ in range(2)], ("left", "right"), labels=[1, 2]
    )
    path = feature_matrix_to_csv(fm, tmp_path / "features.csv")
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    assert rows[0][:3] == ["label", "left/csp[0]", "left/csp[1]"]
    assert len(rows) == 3
    assert float(rows[1][1]) == fm.values[0, 0]


def test_importance_selector_estimator():
    rng = np.random.default_rng(17)
    X, y, planted = planted_matrix(rng, n_trials=200, n_noise=20)
    sel = ImportanceSelector(policy="top:1", trees=50, seed=0).fit(X, y)
    assert sel.selection_.kept_indices == (planted,)
    out = sel.transform(X)
    assert out.shape == (200, 1)


def test_block_layout_validates_offsets():
    with pytest.raises(DataError):
        BlockLayout(entries=(("a", "csp", 1, 2),))
