"""Training loop with early stopping, plus method comparison helpers.

Every run follows one recipe: stratified train/validation split, minibatch
Adam on the configured objective, early stopping once the validation signal
has not improved for `patience` consecutive epochs, and restoration of the
best-validation parameter snapshot.  Pair-based objectives rebuild their
training pairs from the train split at the start of every epoch, while the
validation pair set (validation anchors, candidates drawn from the full
dataset) is built once and kept fixed so epochs stay comparable.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field

import numpy as np

from . import losses, nets
from .datagen import BINARY, Dataset, split_stratified
from .losses import LossConfig
from .metrics import paired_t_test_one_sided, pehe
from .models import DEEP, build_model, predict_outcomes, predict_ites
from .nets import RegConfig
from .pairing import (
    IdentityEmbedding,
    PairingConfig,
    PhiEmbedding,
    RandomProjectionEmbedding,
    create_pair_ds,
    derive_seed,
)

PSI_IDENTITY = "identity"
PSI_RANDOM = "random_projection"
PSI_FACTUAL = "factual"
_PSI_KINDS = (PSI_IDENTITY, PSI_RANDOM, PSI_FACTUAL)


@dataclass
class TrainConfig:
    """One run's knobs.  Defaults: minibatches of 100, up to 1000 epochs,
    patience 10, 30% validation."""

    loss: LossConfig = field(default_factory=LossConfig)
    pairing: PairingConfig = field(default_factory=PairingConfig)
    reg: RegConfig = field(default_factory=RegConfig)
    lr: float = 1e-4
    batch_size: int = 100
    max_epochs: int = 1000
    patience: int = 10
    val_fraction: float = 0.3
    arch: str = DEEP
    psi: str = PSI_FACTUAL
    seed: int = 0

    def __post_init__(self):
        if self.lr <= 0.0:
            raise ValueError("lr must be positive")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.max_epochs < 0:
            raise ValueError("max_epochs must be >= 0")
        if self.patience < 1:
            raise ValueError("patience must be >= 1")
        if not 0.0 < self.val_fraction < 1.0:
            raise ValueError("val_fraction must lie in (0, 1)")
        if self.psi not in _PSI_KINDS:
            raise ValueError(f"unknown psi kind {self.psi!r}")

    def config_hash(self) -> str:
        blob = json.dumps(asdict(self), sort_keys=True)
        return hashlib.sha256(blob.encode()).hexdigest()[:16]


@dataclass
class RunRecord:
    """What happened during one training run.

    train_losses are regularized minibatch means per epoch; val_losses are
    raw objective values on the fixed validation data (the early-stopping
    signal).  pair_hashes fingerprint each epoch's regenerated training
    pairs; model_hash fingerprints the returned (best-epoch) parameters.
    """

    config_hash: str
    train_losses: list
    val_losses: list
    stop_epoch: int
    best_epoch: int
    best_val: float
    pair_hashes: list = field(default_factory=list)
    model_hash: str = ""
    notes: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.stop_epoch < 0:
            raise ValueError("stop_epoch must be >= 0")
        if len(self.train_losses) != len(self.val_losses):
            raise ValueError("per-epoch loss lists disagree in length")

    def to_json(self) -> str:
        return json.dumps({
            "config_hash": self.config_hash,
            "train_losses": self.train_losses,
            "val_losses": self.val_losses,
            "stop_epoch": self.stop_epoch,
            "best_epoch": self.best_epoch,
            "best_val": self.best_val,
            "pair_hashes": self.pair_hashes,
            "model_hash": self.model_hash,
            "notes": self.notes,
        })


def _params_hash(model) -> str:
    return hashlib.sha256(model.params.to_json().encode()).hexdigest()[:16]


def _embedding_provider(config: TrainConfig, ds: Dataset):
    """The pair-distance embedding; psi="factual" trains a factual-loss
    model first (same early-stopping rule) and freezes its representation."""
    if config.psi == PSI_IDENTITY:
        return IdentityEmbedding(ds.dim), None
    if config.psi == PSI_RANDOM:
        proj = RandomProjectionEmbedding(
            ds.dim, ds.dim, seed=derive_seed(config.seed, "proj")
        )
        return proj, None
    inner = TrainConfig(
        loss=LossConfig(kind=losses.FACTUAL),
        pairing=config.pairing,
        reg=config.reg,
        lr=config.lr,
        batch_size=config.batch_size,
        max_epochs=config.max_epochs,
        patience=config.patience,
        val_fraction=config.val_fraction,
        arch=config.arch,
        psi=PSI_IDENTITY,
        seed=derive_seed(config.seed, "psi"),
    )
    psi_model, psi_record = train(ds, inner)
    return PhiEmbedding(psi_model), psi_record


def train(ds: Dataset, config: TrainConfig):
    """Run the full pipeline on one dataset; returns (model, RunRecord)."""
    if config.loss.kind == losses.PAIR_BINARY and ds.mode != BINARY:
        raise ValueError("binary-outcome pair loss needs binary treatments")
    objective = losses.make_objective(config.loss)
    pair_based = config.loss.kind != losses.FACTUAL
    model = build_model(
        config.arch, ds.mode, ds.dim, rng_seed=derive_seed(config.seed, "init")
    )
    chash = config.config_hash()
    if config.max_epochs == 0:
        record = RunRecord(chash, [], [], 0, 0, float("inf"),
                           model_hash=_params_hash(model))
        return model, record

    train_ds, val_ds = split_stratified(
        ds, config.val_fraction,
        np.random.default_rng(derive_seed(config.seed, "split")),
    )
    notes = {}
    if pair_based:
        provider, psi_record = _embedding_provider(config, ds)
        if psi_record is not None:
            notes["psi_epochs"] = psi_record.stop_epoch
        val_batch = create_pair_ds(
            val_ds, ds, config.pairing, provider,
            derive_seed(config.seed, "val-pairs"),
        )
        notes["n_val_pairs"] = len(val_batch)
        notes["val_skipped_anchors"] = val_batch.provenance["skipped_anchors"]
    else:
        provider = None
        val_batch = val_ds

    state = nets.adam_init(model.params, lr=config.lr)
    train_losses, val_losses, pair_hashes = [], [], []
    best_val = float("inf")
    best_params = model.params.copy()
    best_epoch = 0
    since_best = 0
    epoch = 0
    for epoch in range(1, config.max_epochs + 1):
        if pair_based:
            data = create_pair_ds(
                train_ds, train_ds, config.pairing, provider,
                derive_seed(config.seed, "train-pairs", epoch),
            )
            pair_hashes.append(data.content_hash())
        else:
            data = train_ds
        rng = np.random.default_rng(derive_seed(config.seed, "shuffle", epoch))
        perm = rng.permutation(len(data))
        total = 0.0
        for lo in range(0, len(perm), config.batch_size):
            rows = perm[lo:lo + config.batch_size]
            batch = data.subset(rows)
            value, grads = nets.loss_and_gradient(
                model, batch, objective, config.reg
            )
            model.params, state = nets.adam_step(model.params, grads, state)
            total += value * len(rows)
        train_losses.append(total / len(perm))
        val = losses.objective_value(model, val_batch, objective)
        val_losses.append(val)
        if val < best_val:
            best_val = val
            best_params = model.params.copy()
            best_epoch = epoch
            since_best = 0
        else:
            since_best += 1
        if since_best >= config.patience:
            break

    model.params = best_params
    record = RunRecord(
        config_hash=chash,
        train_losses=train_losses,
        val_losses=val_losses,
        stop_epoch=epoch,
        best_epoch=best_epoch,
        best_val=best_val,
        pair_hashes=pair_hashes,
        model_hash=_params_hash(model),
        notes=notes,
    )
    return model, record


def _prob_outcome_one(model, x, t):
    # raw head outputs are logits of P(outcome = 0) in the binary-outcome
    # pair pipeline, so P(outcome = 1) = 1 - sigmoid(output)
    return 1.0 - losses._sigmoid(predict_outcomes(model, x, t))


def evaluate_pehe(model, ds: Dataset, seed=0, probability_outputs=False) -> float:
    """Root-mean-squared effect-estimation error against the oracle.

    Binary mode scores the treat-vs-control effect on every row; continuous
    mode draws one uniform alternative dose per row (seeded) and scores the
    effect of switching from the observed dose.  probability_outputs scores
    effects on P(outcome = 1) instead of raw head outputs.
    """
    if ds.mode == BINARY:
        t_hi = np.ones(len(ds))
        t_lo = np.zeros(len(ds))
    else:
        rng = np.random.default_rng(derive_seed(seed, "pehe-alt"))
        t_hi = ds.t
        t_lo = rng.uniform(size=len(ds))
    tau_true = ds.true_ite(t_hi, t_lo)
    if probability_outputs:
        tau_hat = _prob_outcome_one(model, ds.x, t_hi) - _prob_outcome_one(
            model, ds.x, t_lo
        )
    else:
        tau_hat = predict_ites(model, ds.x, t_hi, t_lo)
    return pehe(tau_true, tau_hat)


def compare_methods(results_a, results_b) -> dict:
    """One-sided paired t-test that method A's per-seed values are lower.

    results_*: mapping seed -> value (e.g. PEHE).  Seed sets must match.
    """
    if set(results_a) != set(results_b):
        raise ValueError("methods were run on different seed sets")
    seeds = sorted(results_a)
    a = np.array([results_a[s] for s in seeds], dtype=float)
    b = np.array([results_b[s] for s in seeds], dtype=float)
    out = paired_t_test_one_sided(a, b)
    out["mean_a"] = float(np.mean(a))
    out["mean_b"] = float(np.mean(b))
    out["seeds"] = [int(s) for s in seeds]
    return out
