"""Dense feedforward primitives on plain float64 numpy arrays.

A network is a set of named parameter blocks ("phi", "head_0", "head_1", ...),
each holding the (weight, bias) pairs of one chain of affine layers with ELU
or identity activations.  Gradients are hand-rolled reverse-mode and are
validated against central finite differences (`finite_diff_check`).

Everything here is pure: functions return fresh arrays and never mutate
their inputs.  Batch losses are means over records, so gradient magnitudes
do not scale with batch size.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

ELU = "elu"
IDENTITY = "identity"
_ACTIVATIONS = (ELU, IDENTITY)


class ShapeMismatch(ValueError):
    """Layer input/parameter shapes disagree; the message names the layer."""


class NonFiniteValue(FloatingPointError):
    """A pass produced NaN or inf; the message names the parameter block."""


@dataclass(frozen=True)
class LayerSpec:
    """One affine layer: n_in -> n_out followed by an activation."""

    n_in: int
    n_out: int
    activation: str = ELU

    def __post_init__(self):
        if self.n_in <= 0 or self.n_out <= 0:
            raise ValueError(
                f"layer widths must be positive, got {self.n_in}x{self.n_out}"
            )
        if self.activation not in _ACTIVATIONS:
            raise ValueError(f"unknown activation {self.activation!r}")


def _apply_act(z, activation):
    if activation == ELU:
        return np.where(z >= 0.0, z, np.expm1(z))
    return z


def _act_deriv(z, activation):
    if activation == ELU:
        return np.where(z >= 0.0, 1.0, np.exp(z))
    return np.ones_like(z)


class ParamStore:
    """Named blocks of (weight, bias) pairs, one pair per layer.

    Weights are (n_out, n_in) float64, biases (n_out,).  The store behaves
    like an immutable value in the public API: arithmetic helpers return new
    stores and leave the operands untouched.
    """

    def __init__(self, blocks: dict[str, list[tuple[np.ndarray, np.ndarray]]]):
        self.blocks = {
            name: [
                (np.asarray(w, dtype=float), np.asarray(b, dtype=float))
                for w, b in layers
            ]
            for name, layers in blocks.items()
        }

    def copy(self) -> "ParamStore":
        return ParamStore(
            {
                name: [(w.copy(), b.copy()) for w, b in layers]
                for name, layers in self.blocks.items()
            }
        )

    def zeros_like(self) -> "ParamStore":
        return self.map(np.zeros_like)

    def map(self, fn) -> "ParamStore":
        return ParamStore(
            {
                name: [(fn(w), fn(b)) for w, b in layers]
                for name, layers in self.blocks.items()
            }
        )

    def combine(self, other: "ParamStore", fn) -> "ParamStore":
        out = {}
        for name, layers in self.blocks.items():
            out[name] = [
                (fn(w, ow), fn(b, ob))
                for (w, b), (ow, ob) in zip(layers, other.blocks[name])
            ]
        return ParamStore(out)

    def arrays(self):
        """Yield every parameter array (weights and biases), in a fixed order."""
        for name in sorted(self.blocks):
            for w, b in self.blocks[name]:
                yield w
                yield b

    def check_finite(self) -> None:
        for name, layers in self.blocks.items():
            for i, (w, b) in enumerate(layers):
                if not (np.all(np.isfinite(w)) and np.all(np.isfinite(b))):
                    raise NonFiniteValue(
                        f"non-finite values in block {name!r}, layer {i}"
                    )

    def to_json(self) -> str:
        doc = {
            name: [{"w": w.tolist(), "b": b.tolist()} for w, b in layers]
            for name, layers in self.blocks.items()
        }
        return json.dumps(doc)

    @classmethod
    def from_json(cls, text: str) -> "ParamStore":
        doc = json.loads(text)
        return cls(
            {
                name: [(np.array(d["w"], dtype=float), np.array(d["b"], dtype=float)) for d in layers]
                for name, layers in doc.items()
            }
        )


def init_chain(specs, rng) -> list[tuple[np.ndarray, np.ndarray]]:
    """Initialise one layer chain: W ~ U(-1/sqrt(n_in), 1/sqrt(n_in)), b = 0."""
    chain = []
    for spec in specs:
        bound = 1.0 / np.sqrt(spec.n_in)
        w = rng.uniform(-bound, bound, size=(spec.n_out, spec.n_in))
        b = np.zeros(spec.n_out)
        chain.append((w, b))
    return chain


def forward(chain, specs, x, extra=None):
    """Evaluate one layer chain on a single input vector.

    `extra`, when given, is a scalar appended to the input of every affine
    layer in the chain (used for the within-bin treatment coordinate of
    continuous-treatment heads).
    """
    h = np.asarray(x, dtype=float)
    if h.ndim != 1:
        raise ShapeMismatch(f"expected a 1-d input vector, got shape {h.shape}")
    out = _chain_forward(
        chain,
        specs,
        h[None, :],
        None if extra is None else np.array([float(extra)]),
    )[0]
    return out[0]


def _chain_forward(chain, specs, x, extras=None, caches=None):
    """Batched chain evaluation.  x is (m, n); extras, if given, is (m,)."""
    if len(chain) != len(specs):
        raise ShapeMismatch(
            f"chain has {len(chain)} layers but {len(specs)} specs were given"
        )
    h = np.asarray(x, dtype=float)
    for i, ((w, b), spec) in enumerate(zip(chain, specs)):
        v = h if extras is None else np.hstack([h, extras[:, None]])
        if v.shape[1] != spec.n_in or w.shape != (spec.n_out, spec.n_in):
            raise ShapeMismatch(
                f"layer {i}: spec {spec.n_in}->{spec.n_out}, "
                f"weight shape {w.shape}, input width {v.shape[1]}"
            )
        z = v @ w.T + b
        if caches is not None:
            caches.append((v, z))
        h = _apply_act(z, spec.activation)
    return h


def _chain_backward(chain, specs, caches, d_out, has_extra):
    """Backprop through one chain.  Returns ([(dW, db), ...], d_input)."""
    grads = [None] * len(chain)
    dh = d_out
    for i in reversed(range(len(chain))):
        w, _ = chain[i]
        v, z = caches[i]
        dz = dh * _act_deriv(z, specs[i].activation)
        grads[i] = (dz.T @ v, dz.sum(axis=0))
        dv = dz @ w
        dh = dv[:, :-1] if has_extra else dv
    return grads, dh


def network_outputs(model, x, heads, extras):
    """Scalar network outputs for a batch of routed requests.

    x is (k, d); heads is a (k,) int array choosing the output chain for each
    row ("head_{h}"); extras is None or a (k,) float array appended to every
    affine layer of the chosen head.  The shared representation chain "phi"
    is applied first.
    """
    outputs, _, _, _ = _network_forward(model, x, heads, extras)
    return outputs


def _network_forward(model, x, heads, extras):
    x = np.asarray(x, dtype=float)
    phi_caches = []
    phi_out = _chain_forward(
        model.params.blocks["phi"], model.phi_specs, x, caches=phi_caches
    )
    outputs = np.empty(len(x))
    head_state = {}
    for h in np.unique(heads):
        idx = np.flatnonzero(heads == h)
        ex = None if extras is None else extras[idx]
        caches = []
        out = _chain_forward(
            model.params.blocks[f"head_{h}"],
            model.head_specs,
            phi_out[idx],
            ex,
            caches=caches,
        )
        if out.shape[1] != 1:
            raise ShapeMismatch(
                f"head_{h} must end in a single output, got width {out.shape[1]}"
            )
        outputs[idx] = out[:, 0]
        head_state[int(h)] = (idx, caches)
    return outputs, phi_out, phi_caches, head_state


def l2_penalty(params, reg) -> float:
    """Sum of weight * ||theta||^2 over every parameter array in every block."""
    total = 0.0
    for name, layers in params.blocks.items():
        weight = reg.l2_phi if name == "phi" else reg.l2_head
        for w, b in layers:
            total += weight * (np.sum(w * w) + np.sum(b * b))
    return total


def loss_and_gradient(model, batch, objective, reg):
    """Mean batch loss (plus L2 penalty) and its gradient for every parameter.

    `objective` must provide requests(model, batch) -> (x, heads, extras)
    and value_and_output_grads(outputs, batch) -> (value, d_outputs), where
    d_outputs already carries the 1/m mean factor.
    """
    x, heads, extras = objective.requests(model, batch)
    outputs, phi_out, phi_caches, head_state = _network_forward(
        model, x, heads, extras
    )
    value, d_out = objective.value_and_output_grads(outputs, batch)

    grads = {name: None for name in model.params.blocks}
    d_phi_out = np.zeros_like(phi_out)
    for h, (idx, caches) in head_state.items():
        name = f"head_{h}"
        g, d_in = _chain_backward(
            model.params.blocks[name],
            model.head_specs,
            caches,
            d_out[idx][:, None],
            has_extra=extras is not None,
        )
        grads[name] = g
        d_phi_out[idx] += d_in
    g_phi, _ = _chain_backward(
        model.params.blocks["phi"], model.phi_specs, phi_caches, d_phi_out,
        has_extra=False,
    )
    grads["phi"] = g_phi

    out = {}
    for name, layers in model.params.blocks.items():
        weight = reg.l2_phi if name == "phi" else reg.l2_head
        g = grads[name]
        if g is None:  # head never routed to in this batch: L2 term only
            out[name] = [(2.0 * weight * w, 2.0 * weight * b) for w, b in layers]
        else:
            out[name] = [
                (gw + 2.0 * weight * w, gb + 2.0 * weight * b)
                for (gw, gb), (w, b) in zip(g, layers)
            ]
    store = ParamStore(out)
    store.check_finite()
    return value + l2_penalty(model.params, reg), store


def gradient(model, batch, objective, reg) -> ParamStore:
    """Gradient of the regularized mean batch loss; see `loss_and_gradient`."""
    return loss_and_gradient(model, batch, objective, reg)[1]


@dataclass
class RegConfig:
    """Per-block L2 weights.  The penalty adds 2*weight*theta per parameter
    to the gradient; biases are regularized along with weights."""

    l2_phi: float = 1.0
    l2_head: float = 1e-4


@dataclass
class AdamState:
    m: ParamStore
    v: ParamStore
    step: int
    lr: float = 1e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8


def adam_init(params, lr=1e-4, beta1=0.9, beta2=0.999, eps=1e-8) -> AdamState:
    return AdamState(
        m=params.zeros_like(),
        v=params.zeros_like(),
        step=0,
        lr=lr,
        beta1=beta1,
        beta2=beta2,
        eps=eps,
    )


def adam_step(params, grads, state):
    """One Adam update with bias correction; returns (new params, new state)."""
    t = state.step + 1
    m = state.m.combine(grads, lambda m_, g: state.beta1 * m_ + (1 - state.beta1) * g)
    v = state.v.combine(grads, lambda v_, g: state.beta2 * v_ + (1 - state.beta2) * g * g)
    c1 = 1.0 - state.beta1**t
    c2 = 1.0 - state.beta2**t
    mhat = m.map(lambda a: a / c1)
    vhat = v.map(lambda a: a / c2)
    step = mhat.combine(vhat, lambda m_, v_: state.lr * m_ / (np.sqrt(v_) + state.eps))
    new_params = params.combine(step, lambda p, s: p - s)
    return new_params, AdamState(m, v, t, state.lr, state.beta1, state.beta2, state.eps)


def finite_diff_check(model, batch, objective, reg, epsilon=1e-5) -> float:
    """Max relative error between analytic and central-difference gradients.

    Error per coordinate is |a - n| / max(1, |n|): relative where the numeric
    gradient is large, absolute where it is small (a tiny denominator would
    only amplify the cancellation noise of the central difference).
    """
    if not 1e-7 <= epsilon <= 1e-3:
        raise ValueError(f"epsilon {epsilon} outside [1e-7, 1e-3]")
    _, analytic = loss_and_gradient(model, batch, objective, reg)

    work = model.params.copy()
    probe = _Probe(model, work)

    def total():
        x, heads, extras = objective.requests(probe, batch)
        outputs = network_outputs(probe, x, heads, extras)
        value, _ = objective.value_and_output_grads(outputs, batch)
        return value + l2_penalty(work, reg)

    worst = 0.0
    for arr, g_arr in zip(work.arrays(), analytic.arrays()):
        flat = arr.reshape(-1)
        g_flat = g_arr.reshape(-1)
        for j in range(flat.size):
            orig = flat[j]
            flat[j] = orig + epsilon
            up = total()
            flat[j] = orig - epsilon
            down = total()
            flat[j] = orig
            numeric = (up - down) / (2.0 * epsilon)
            err = abs(g_flat[j] - numeric) / max(1.0, abs(numeric))
            worst = max(worst, err)
    return worst


class _Probe:
    """Model stand-in for finite differences: same architecture, shared
    mutable parameter store."""

    def __init__(self, model, params):
        self.params = params
        self.phi_specs = model.phi_specs
        self.head_specs = model.head_specs
        self.mode = model.mode
        self.input_dim = model.input_dim
        self.n_heads = model.n_heads
