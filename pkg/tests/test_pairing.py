import numpy as np
import pytest

from paireffect.datagen import BINARY, CONTINUOUS, Dataset
from paireffect.pairing import (
    EmptyPairDataset,
    IdentityEmbedding,
    NoEligibleNeighbor,
    PairingConfig,
    PhiEmbedding,
    RandomProjectionEmbedding,
    create_pair_ds,
    derive_seed,
    embed,
    neighbor_diagnostics,
    save_pairs_csv,
)

from conftest import binary_dataset, quick_pairs


def test_derive_seed_is_stable_and_sensitive():
    assert derive_seed(1, "a", 2) == derive_seed(1, "a", 2)
    assert derive_seed(1, "a", 2) != derive_seed(1, "a", 3)
    assert derive_seed("x") != derive_seed("y")
    assert 0 <= derive_seed("anything") < 2**63


def test_pairing_config_validation():
    with pytest.raises(ValueError):
        PairingConfig(temperature=-1.0)
    with pytest.raises(ValueError):
        PairingConfig(delta_pair=1.0)
    with pytest.raises(ValueError):
        PairingConfig(num_neighbors=0)


def test_same_seed_gives_bit_identical_pairs():
    a = quick_pairs(seed=42, num_neighbors=2)
    b = quick_pairs(seed=42, num_neighbors=2)
    c = quick_pairs(seed=43, num_neighbors=2)
    assert a.content_hash() == b.content_hash()
    assert a.content_hash() != c.content_hash()


def test_neighbors_come_from_opposite_arm():
    pairs = quick_pairs(seed=0, num_neighbors=3)
    assert np.all(pairs.tp == 1.0 - pairs.t)


def test_anchor_never_paired_with_itself_same_source():
    ds = binary_dataset(n=40, seed=5)
    pairs = quick_pairs(ds, seed=1, num_neighbors=2)
    assert np.all(pairs.anchor_idx != pairs.nbr_idx)


def test_distinct_sources_allow_index_overlap():
    # candidates from a different dataset are a different population, so a
    # shared row index is not self-pairing and must stay eligible
    anchors = Dataset(
        x=np.zeros((1, 1)), t=np.array([0.0]), y=np.array([0.0]), mode=BINARY
    )
    candidates = Dataset(
        x=np.array([[0.0], [5.0]]), t=np.array([1.0, 1.0]),
        y=np.zeros(2), mode=BINARY,
    )
    cfg = PairingConfig(temperature=1e6, num_neighbors=1, delta_pair=0.0)
    pairs = create_pair_ds(anchors, candidates, cfg, IdentityEmbedding(1), 0)
    # the co-indexed candidate is also the nearest one
    assert list(pairs.nbr_idx) == [0]


def test_single_arm_dataset_has_no_neighbors():
    ds = Dataset(
        x=np.random.default_rng(0).normal(size=(10, 2)),
        t=np.ones(10), y=np.zeros(10), mode=BINARY,
    )
    with pytest.raises((NoEligibleNeighbor, EmptyPairDataset)):
        quick_pairs(ds, seed=0)


def test_nearest_neighbor_at_extreme_temperature():
    ds = binary_dataset(n=50, seed=7)
    pairs = quick_pairs(ds, seed=3, temperature=1e6, num_neighbors=1,
                        delta_pair=0.0)
    emb = ds.x
    for i in range(len(pairs)):
        a = pairs.anchor_idx[i]
        opposite = np.flatnonzero(ds.t != ds.t[a])
        dists = np.linalg.norm(emb[opposite] - emb[a], axis=1)
        assert pairs.nbr_idx[i] == opposite[np.argmin(dists)]


def test_without_replacement_no_duplicate_neighbors():
    pairs = quick_pairs(seed=11, num_neighbors=4, delta_pair=0.0)
    for a in np.unique(pairs.anchor_idx):
        chosen = pairs.nbr_idx[pairs.anchor_idx == a]
        assert len(chosen) == len(set(chosen))


def test_uniform_sampling_at_zero_temperature():
    # lambda = 0 makes every opposite-arm candidate equally likely; check the
    # frequency of the farthest candidate is within chi-square-ish slack
    rng = np.random.default_rng(8)
    x = np.concatenate([np.zeros(1), np.linspace(0.0, 3.0, 30)])
    t = np.concatenate([np.zeros(1), np.ones(30)])
    ds = Dataset(x=x[:, None], t=t, y=np.zeros(31), mode=BINARY)
    cfg = PairingConfig(temperature=0.0, num_neighbors=1, delta_pair=0.0)
    counts = np.zeros(31)
    for s in range(600):
        pairs = create_pair_ds(
            ds.subset([0]), ds, cfg, IdentityEmbedding(1), s
        )
        counts[pairs.nbr_idx[0]] += 1
    freq = counts[1:] / 600.0
    assert np.all(np.abs(freq - 1 / 30) < 0.05)


def test_trim_drops_global_distance_tail():
    ds = binary_dataset(n=60, seed=2)
    kept = quick_pairs(ds, seed=4, num_neighbors=2, delta_pair=0.25)
    full = quick_pairs(ds, seed=4, num_neighbors=2, delta_pair=0.0)
    n = len(full)
    expect = int(np.floor((1.0 - 0.25) * n + 0.5))
    assert len(kept) == expect
    assert kept.distance.max() <= np.sort(full.distance)[expect - 1] + 1e-12


def test_continuous_candidates_respect_dosage_window():
    rng = np.random.default_rng(3)
    n = 80
    ds = Dataset(
        x=rng.normal(size=(n, 2)), t=rng.uniform(size=n),
        y=rng.normal(size=n), mode=CONTINUOUS,
    )
    cfg = PairingConfig(num_neighbors=1, continuous_halfwidth=0.05,
                        delta_pair=0.0)
    pairs = create_pair_ds(ds, ds, cfg, IdentityEmbedding(2), 9)
    assert np.all(np.abs(pairs.tp - pairs.target_t) < 0.05)
    # the sampled alternative dosage is the anchor's own target, not its
    # observed one
    assert not np.allclose(pairs.target_t, pairs.t)


def test_embedding_providers_shape_and_determinism(rng):
    x = rng.normal(size=(12, 6))
    ident = embed(IdentityEmbedding(6), x)
    assert np.array_equal(ident, x)
    proj_a = embed(RandomProjectionEmbedding(6, 3, seed=1), x)
    proj_b = embed(RandomProjectionEmbedding(6, 3, seed=1), x)
    proj_c = embed(RandomProjectionEmbedding(6, 3, seed=2), x)
    assert proj_a.shape == (12, 3)
    assert np.array_equal(proj_a, proj_b)
    assert not np.allclose(proj_a, proj_c)


def test_phi_embedding_uses_model_representation(rng):
    from paireffect.models import build_model

    model = build_model(arch="shallow", mode="binary", input_dim=4, rng_seed=0)
    z = embed(PhiEmbedding(model), rng.normal(size=(3, 4)))
    assert z.shape == (3, 200)  # shallow trunk width


def test_pair_dataset_subset_and_len():
    pairs = quick_pairs(seed=13, num_neighbors=2)
    sub = pairs.subset(np.arange(5))
    assert len(sub) == 5
    assert np.array_equal(sub.anchor_idx, pairs.anchor_idx[:5])


def test_diagnostics_report_distance_moments():
    pairs = quick_pairs(seed=21, num_neighbors=2)
    diag = neighbor_diagnostics(pairs)
    assert diag["n_pairs"] == len(pairs)
    assert diag["mean_distance"] == pytest.approx(np.mean(pairs.distance))
    assert diag["mean_sq_distance"] == pytest.approx(np.mean(pairs.distance**2))
    # delta_hat is the worst anchor's mean neighbor distance, the empirical
    # counterpart of the boundedness assumption on the neighbor kernel
    worst = max(
        np.mean(pairs.distance[pairs.anchor_idx == a])
        for a in np.unique(pairs.anchor_idx)
    )
    assert diag["delta_hat"] == pytest.approx(worst)
    assert diag["delta_hat"] >= diag["mean_distance"] - 1e-12
    assert set(diag["per_treatment_counts"]) == {0, 1}


def test_save_pairs_csv_round_readable(tmp_path):
    import csv

    pairs = quick_pairs(seed=17)
    path = tmp_path / "pairs.csv"
    save_pairs_csv(pairs, path)
    rows = list(csv.DictReader(open(path)))
    assert len(rows) == len(pairs)
    assert float(rows[0]["distance"]) == pytest.approx(pairs.distance[0])
