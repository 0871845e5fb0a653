"""Training objectives.

Each objective exposes two methods consumed by the gradient machinery:
requests(model, batch) -> (x, heads, extras) routes what must be predicted,
and value_and_output_grads(outputs, batch) -> (value, d_outputs) turns those
predictions into a mean loss and its gradient w.r.t. each prediction.
Public scalar functions (factual_loss, pair_loss, ...) wrap the same code
paths.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import models, nets

FACTUAL = "factual"
PAIR = "pair"
PAIR_ALPHA = "pair_alpha"
MATCHING = "matching"
PAIR_BINARY = "pair_binary"
KINDS = (FACTUAL, PAIR, PAIR_ALPHA, MATCHING, PAIR_BINARY)

PROB_CLAMP = 1e-12
_clamp_count = 0


def clamp_count() -> int:
    """How many cross-entropy targets have been clamped at PROB_CLAMP."""
    return _clamp_count


def reset_clamp_count() -> None:
    global _clamp_count
    _clamp_count = 0


@dataclass
class LossConfig:
    kind: str = PAIR
    alpha: float = 2.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown loss kind {self.kind!r}")
        if not 0.0 <= self.alpha <= 2.0:
            raise ValueError("alpha must lie in [0, 2]")
        if self.kind == PAIR:
            self.alpha = 2.0


def make_objective(config: LossConfig):
    if config.kind == FACTUAL:
        return FactualObjective()
    if config.kind in (PAIR, PAIR_ALPHA):
        return PairObjective(config.alpha)
    if config.kind == MATCHING:
        return MatchingObjective()
    return PairBinaryObjective()


def objective_value(model, batch, objective) -> float:
    x, heads, extras = objective.requests(model, batch)
    outputs = nets.network_outputs(model, x, heads, extras)
    value, _ = objective.value_and_output_grads(outputs, batch)
    return value


class FactualObjective:
    """Mean squared error on observed outcomes."""

    def requests(self, model, batch):
        heads, extras = models.head_routing(model, batch.t)
        return batch.x, heads, extras

    def value_and_output_grads(self, outputs, batch):
        r = batch.y - outputs
        m = len(r)
        return float(np.mean(r**2)), (-2.0 / m) * r


class PairObjective:
    """Mean of r^2 + r'^2 - alpha * r * r' over pairs, r the anchor residual
    and r' the neighbor's; alpha = 2 makes this the squared error between the
    observed and predicted within-pair outcome differences."""

    def __init__(self, alpha=2.0):
        if not 0.0 <= alpha <= 2.0:
            raise ValueError("alpha must lie in [0, 2]")
        self.alpha = alpha

    def requests(self, model, batch):
        x = np.vstack([batch.x, batch.xp])
        t = np.concatenate([batch.t, batch.tp])
        heads, extras = models.head_routing(model, t)
        return x, heads, extras

    def value_and_output_grads(self, outputs, batch):
        m = len(batch)
        r = batch.y - outputs[:m]
        rp = batch.yp - outputs[m:]
        value = float(np.mean(r**2 + rp**2 - self.alpha * r * rp))
        d = np.concatenate([
            (-2.0 * r + self.alpha * rp) / m,
            (-2.0 * rp + self.alpha * r) / m,
        ])
        return value, d


class MatchingObjective:
    """Counterfactual supervision: predict the anchor under the neighbor's
    treatment and regress onto the neighbor's observed outcome."""

    def requests(self, model, batch):
        heads, extras = models.head_routing(model, batch.tp)
        return batch.x, heads, extras

    def value_and_output_grads(self, outputs, batch):
        r = outputs - batch.yp
        m = len(r)
        return float(np.mean(r**2)), (2.0 / m) * r


def _sigmoid(z):
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


class PairBinaryObjective:
    """Three-way cross-entropy on the within-pair outcome difference.

    Model outputs pass through a sigmoid to give p = P(outcome = 0); with
    a = p(anchor | its arm) and b = p(neighbor | its arm), the label
    y - y' in {-1, 0, +1} has probabilities a(1-b), ab + (1-a)(1-b), (1-a)b.
    """

    def requests(self, model, batch):
        if not (np.all((batch.y == 0) | (batch.y == 1))
                and np.all((batch.yp == 0) | (batch.yp == 1))):
            raise ValueError("pair_binary needs 0/1 outcomes")
        x = np.vstack([batch.x, batch.xp])
        t = np.concatenate([batch.t, batch.tp])
        heads, extras = models.head_routing(model, t)
        return x, heads, extras

    def value_and_output_grads(self, outputs, batch):
        global _clamp_count
        m = len(batch)
        a = _sigmoid(outputs[:m])
        b = _sigmoid(outputs[m:])
        label = (batch.y - batch.yp).astype(int)

        p = np.where(
            label == -1, a * (1.0 - b),
            np.where(label == 0, a * b + (1.0 - a) * (1.0 - b), (1.0 - a) * b),
        )
        dp_da = np.where(label == -1, 1.0 - b,
                         np.where(label == 0, 2.0 * b - 1.0, -b))
        dp_db = np.where(label == -1, -a,
                         np.where(label == 0, 2.0 * a - 1.0, 1.0 - a))

        clamped = p < PROB_CLAMP
        _clamp_count += int(np.sum(clamped))
        p = np.maximum(p, PROB_CLAMP)
        value = float(np.mean(-np.log(p)))
        d_a = (-dp_da / p) * a * (1.0 - a) / m
        d_b = (-dp_db / p) * b * (1.0 - b) / m
        return value, np.concatenate([d_a, d_b])


# ---------------------------------------------------------------------------
# Public scalar losses


def factual_loss(model, batch) -> float:
    return objective_value(model, batch, FactualObjective())


def pair_loss(model, batch, alpha=2.0, weights=None) -> float:
    if weights is None:
        return objective_value(model, batch, PairObjective(alpha))
    yhat = models.predict_outcomes(model, batch.x, batch.t)
    yhatp = models.predict_outcomes(model, batch.xp, batch.tp)
    r = batch.y - yhat
    rp = batch.yp - yhatp
    terms = r**2 + rp**2 - alpha * r * rp
    w = np.asarray(weights, dtype=float)
    return float(np.sum(w * terms) / np.sum(w))


def pair_loss_decomposition(y, y_prime, yhat, yhat_prime):
    """Split one pair's alpha=2 loss into (anchor squared error, neighbor
    squared error, residual alignment); the three sum to the pair loss."""
    r = np.asarray(y, dtype=float) - np.asarray(yhat, dtype=float)
    rp = np.asarray(y_prime, dtype=float) - np.asarray(yhat_prime, dtype=float)
    return r**2, rp**2, -2.0 * r * rp


def matching_loss(model, batch) -> float:
    return objective_value(model, batch, MatchingObjective())


def pair_loss_binary(model, batch) -> float:
    return objective_value(model, batch, PairBinaryObjective())
