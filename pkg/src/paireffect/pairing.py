"""Cross-treatment pair construction.

For each anchor record, opposite-treatment neighbors are sampled from a
softmax over negative embedding distances, exp(-lambda * d); the fraction of
assembled pairs with the largest distances is then dropped globally.
Continuous treatments first draw a target t' ~ Uniform[0,1] per anchor and
restrict candidates to a window around it.

Determinism: each anchor owns an rng derived from (seed, anchor position), so
results are independent of iteration order and safe to parallelize.
"""

from __future__ import annotations

import csv
import hashlib
from dataclasses import dataclass, field

import numpy as np

from . import nets
from .datagen import BINARY, CONTINUOUS, Dataset


class NoEligibleNeighbor(RuntimeError):
    pass


class EmptyPairDataset(RuntimeError):
    pass


def derive_seed(*parts) -> int:
    """Stable 63-bit seed from arbitrary hashable parts (order-sensitive)."""
    digest = hashlib.sha256(repr(parts).encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little") >> 1


# ---------------------------------------------------------------------------
# Embedding providers


class IdentityEmbedding:
    kind = "identity"

    def __init__(self, dim):
        self.output_dim = dim

    def embed(self, x):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        if x.shape[1] != self.output_dim:
            raise ValueError(
                f"expected dimension {self.output_dim}, got {x.shape[1]}"
            )
        return x


class RandomProjectionEmbedding:
    """Fixed Gaussian projection, scaled by 1/sqrt(output_dim)."""

    kind = "random_projection"

    def __init__(self, in_dim, out_dim, seed=0):
        self.in_dim = in_dim
        self.output_dim = out_dim
        rng = np.random.default_rng(seed)
        self.matrix = rng.standard_normal((in_dim, out_dim)) / np.sqrt(out_dim)

    def embed(self, x):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        if x.shape[1] != self.in_dim:
            raise ValueError(f"expected dimension {self.in_dim}, got {x.shape[1]}")
        return x @ self.matrix


class PhiEmbedding:
    """Frozen representation chain of a trained model."""

    kind = "phi"

    def __init__(self, model):
        self.phi_specs = list(model.phi_specs)
        self.chain = [(w.copy(), b.copy()) for w, b in model.params.blocks["phi"]]
        self.in_dim = model.input_dim
        self.output_dim = self.phi_specs[-1].n_out

    def embed(self, x):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        if x.shape[1] != self.in_dim:
            raise ValueError(f"expected dimension {self.in_dim}, got {x.shape[1]}")
        return nets._chain_forward(self.chain, self.phi_specs, x)


def embed(provider, x):
    return provider.embed(x)


# ---------------------------------------------------------------------------
# Pair datasets


@dataclass
class PairingConfig:
    delta_pair: float = 0.1
    num_neighbors: int = 3
    temperature: float = 1.0
    continuous_halfwidth: float = 0.05

    def __post_init__(self):
        if not 0.0 <= self.delta_pair < 1.0:
            raise ValueError("delta_pair must lie in [0, 1)")
        if self.num_neighbors < 1:
            raise ValueError("num_neighbors must be >= 1")
        if self.temperature < 0.0:
            raise ValueError("temperature must be non-negative")
        if self.continuous_halfwidth <= 0.0:
            raise ValueError("continuous_halfwidth must be positive")


@dataclass
class PairDataset:
    """Columnar pair records: anchor (x, t, y) with neighbor (xp, tp, yp)."""

    anchor_idx: np.ndarray
    nbr_idx: np.ndarray
    x: np.ndarray
    t: np.ndarray
    y: np.ndarray
    xp: np.ndarray
    tp: np.ndarray
    yp: np.ndarray
    distance: np.ndarray
    target_t: np.ndarray | None = None   # continuous mode: per-pair drawn t'
    provenance: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.t)

    def subset(self, idx) -> "PairDataset":
        idx = np.asarray(idx)
        return PairDataset(
            anchor_idx=self.anchor_idx[idx],
            nbr_idx=self.nbr_idx[idx],
            x=self.x[idx],
            t=self.t[idx],
            y=self.y[idx],
            xp=self.xp[idx],
            tp=self.tp[idx],
            yp=self.yp[idx],
            distance=self.distance[idx],
            target_t=None if self.target_t is None else self.target_t[idx],
            provenance=self.provenance,
        )

    def content_hash(self) -> str:
        h = hashlib.sha256()
        for arr in (self.anchor_idx, self.nbr_idx, self.distance):
            h.update(np.ascontiguousarray(arr).tobytes())
        return h.hexdigest()[:16]


def _softmax_neg(distances, lam):
    z = np.exp(-lam * (distances - np.min(distances)))
    return z / np.sum(z)


def neighbor_distribution(anchor_x, anchor_t, candidates: Dataset, provider,
                          lam, mode=BINARY, target_t=None, halfwidth=0.05,
                          exclude_id=None):
    """Probability over candidate rows of being sampled as the anchor's pair.

    Ineligible rows (same treatment in binary mode, outside the target window
    in continuous mode, or the anchor itself via `exclude_id`) get zero.
    """
    e_anchor = provider.embed(np.asarray(anchor_x, dtype=float)[None, :])[0]
    e_cand = provider.embed(candidates.x)
    if mode == BINARY:
        eligible = candidates.t != anchor_t
    else:
        if target_t is None:
            raise ValueError("continuous mode needs the drawn target treatment")
        eligible = np.abs(candidates.t - target_t) < halfwidth
    if exclude_id is not None:
        eligible &= candidates.ids != exclude_id
    if not np.any(eligible):
        raise NoEligibleNeighbor("no candidate satisfies the treatment rule")
    d = np.linalg.norm(e_cand[eligible] - e_anchor, axis=1)
    probs = np.zeros(len(candidates))
    probs[np.flatnonzero(eligible)] = _softmax_neg(d, lam)
    return probs


def create_pair_ds(anchors: Dataset, candidates: Dataset,
                   config: PairingConfig, provider, rng_seed) -> PairDataset:
    """Sample num_neighbors opposite-treatment pairs per anchor, then drop
    the delta_pair fraction with the largest embedding distances."""
    if anchors.dim != candidates.dim or anchors.mode != candidates.mode:
        raise ValueError("anchor and candidate datasets disagree on shape/mode")
    mode = anchors.mode
    e_anchor = provider.embed(anchors.x)
    e_cand = provider.embed(candidates.x)
    same_table = anchors.source == candidates.source

    rows_a, rows_c, dists, targets = [], [], [], []
    skipped = 0
    for i in range(len(anchors)):
        rng = np.random.default_rng([rng_seed, i])
        if mode == BINARY:
            eligible = candidates.t != anchors.t[i]
            target = None
        else:
            target = rng.uniform()
            eligible = np.abs(candidates.t - target) < config.continuous_halfwidth
        if same_table:
            eligible = eligible & (candidates.ids != anchors.ids[i])
        idx = np.flatnonzero(eligible)
        if len(idx) == 0:
            skipped += 1
            continue
        d = np.linalg.norm(e_cand[idx] - e_anchor[i], axis=1)
        if len(idx) >= config.num_neighbors:
            # Gumbel top-k == successive softmax draws without replacement,
            # and stays exact for arbitrarily large temperatures where the
            # normalized probabilities would underflow
            keys = -config.temperature * d + rng.gumbel(size=len(idx))
            pick = np.argsort(-keys, kind="stable")[:config.num_neighbors]
        else:
            probs = _softmax_neg(d, config.temperature)
            pick = rng.choice(len(idx), size=config.num_neighbors,
                              replace=True, p=probs)
        for j in pick:
            rows_a.append(i)
            rows_c.append(idx[j])
            dists.append(d[j])
            targets.append(0.0 if target is None else target)
    if not rows_a:
        raise EmptyPairDataset("every anchor was skipped")

    rows_a = np.array(rows_a)
    rows_c = np.array(rows_c)
    dists = np.array(dists)
    keep = int(np.floor((1.0 - config.delta_pair) * len(rows_a) + 0.5))
    order = np.argsort(dists, kind="stable")[:keep]
    order = np.sort(order)  # keep assembly order among the retained pairs

    pairs = PairDataset(
        anchor_idx=anchors.ids[rows_a[order]],
        nbr_idx=candidates.ids[rows_c[order]],
        x=anchors.x[rows_a[order]],
        t=anchors.t[rows_a[order]],
        y=anchors.y[rows_a[order]],
        xp=candidates.x[rows_c[order]],
        tp=candidates.t[rows_c[order]],
        yp=candidates.y[rows_c[order]],
        distance=dists[order],
        target_t=np.array(targets)[order] if mode == CONTINUOUS else None,
        provenance={
            "anchor_source": anchors.source,
            "candidate_source": candidates.source,
            "seed": int(rng_seed),
            "skipped_anchors": skipped,
            "pre_trim_size": int(len(rows_a)),
            "config": {
                "delta_pair": config.delta_pair,
                "num_neighbors": config.num_neighbors,
                "temperature": config.temperature,
                "continuous_halfwidth": config.continuous_halfwidth,
            },
        },
    )
    return pairs


def neighbor_diagnostics(pairs: PairDataset) -> dict:
    """Distance summaries: delta_hat is the max over anchors of the mean
    retained-neighbor distance (squared variant reported alongside)."""
    if len(pairs) == 0:
        raise ValueError("empty pair dataset")
    per_anchor_mean = {}
    per_anchor_mean_sq = {}
    for a in np.unique(pairs.anchor_idx):
        d = pairs.distance[pairs.anchor_idx == a]
        per_anchor_mean[a] = float(np.mean(d))
        per_anchor_mean_sq[a] = float(np.mean(d**2))
    counts = {}
    if np.all((pairs.t == 0) | (pairs.t == 1)):
        counts = {int(g): int(np.sum(pairs.t == g)) for g in (0, 1)}
    return {
        "mean_distance": float(np.mean(pairs.distance)),
        "mean_sq_distance": float(np.mean(pairs.distance**2)),
        "delta_hat": max(per_anchor_mean.values()),
        "delta_hat_sq": max(per_anchor_mean_sq.values()),
        "per_treatment_counts": counts,
        "n_pairs": len(pairs),
    }


def save_pairs_csv(pairs: PairDataset, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["anchor_idx", "nbr_idx", "t", "y", "t_prime", "y_prime", "distance"])
        for i in range(len(pairs)):
            writer.writerow([
                int(pairs.anchor_idx[i]),
                int(pairs.nbr_idx[i]),
                repr(float(pairs.t[i])),
                repr(float(pairs.y[i])),
                repr(float(pairs.tp[i])),
                repr(float(pairs.yp[i])),
                repr(float(pairs.distance[i])),
            ])
