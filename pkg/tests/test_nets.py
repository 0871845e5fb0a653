import numpy as np
import pytest

from paireffect import losses, models, nets
from paireffect.nets import (
    NonFiniteValue,
    ParamStore,
    RegConfig,
    ShapeMismatch,
    adam_init,
    adam_step,
    finite_diff_check,
    l2_penalty,
    loss_and_gradient,
)

from conftest import random_pair_batch, tiny_network


def test_init_is_seeded():
    a = models.build_model(arch="deep", input_dim=5, rng_seed=3)
    b = models.build_model(arch="deep", input_dim=5, rng_seed=3)
    c = models.build_model(arch="deep", input_dim=5, rng_seed=4)
    for pa, pb in zip(a.params.arrays(), b.params.arrays()):
        assert np.array_equal(pa, pb)
    assert any(
        not np.array_equal(pa, pc)
        for pa, pc in zip(a.params.arrays(), c.params.arrays())
    )


def test_param_store_round_trip():
    model = models.build_model(arch="shallow", input_dim=4, rng_seed=0)
    clone = ParamStore.from_json(model.params.to_json())
    for p, p2 in zip(model.params.arrays(), clone.arrays()):
        assert np.array_equal(p, p2)


def test_param_store_check_finite():
    model = models.build_model(arch="shallow", input_dim=4, rng_seed=0)
    model.params.blocks["phi"][0][0][0, 0] = np.nan
    with pytest.raises(NonFiniteValue):
        model.params.check_finite()


def test_forward_rejects_bad_input_width(small_model):
    with pytest.raises(ShapeMismatch):
        models.predict_outcomes(small_model, np.zeros((5, 9)), np.zeros(5))


def test_l2_includes_biases(small_model):
    reg = RegConfig(l2_phi=1.0, l2_head=1.0)
    total = sum(float(np.sum(p**2)) for p in small_model.params.arrays())
    assert l2_penalty(small_model.params, reg) == pytest.approx(total)


def test_l2_zero_reg_is_zero(small_model):
    assert l2_penalty(small_model.params, RegConfig(l2_phi=0.0, l2_head=0.0)) == 0.0


def test_gradient_matches_finite_difference_factual(rng):
    batch = random_pair_batch(rng, n=30)
    gap = finite_diff_check(
        tiny_network(seed=5), batch, losses.FactualObjective(), RegConfig()
    )
    assert gap <= 1e-4


def test_regularized_gradient_matches_finite_difference(rng):
    # the L2 term contributes 2*v*theta to every coordinate; checking with a
    # large coefficient makes a missing factor of 2 stand out
    batch = random_pair_batch(rng, n=25)
    gap = finite_diff_check(
        tiny_network(seed=6), batch, losses.PairObjective(alpha=2.0),
        RegConfig(l2_phi=3.0, l2_head=0.5),
    )
    assert gap <= 1e-4


def test_head_isolation(small_model, rng):
    # a batch observed entirely under arm 1 must not touch head 0
    batch = random_pair_batch(rng, n=20)
    batch.t[:] = 1.0
    batch.tp[:] = 1.0
    grads = nets.gradient(
        small_model, batch, losses.FactualObjective(), RegConfig(l2_phi=0, l2_head=0)
    )
    for w, b in grads.blocks["head_0"]:
        assert not np.any(w) and not np.any(b)
    assert any(np.any(w) for w, _ in grads.blocks["head_1"])


def test_loss_and_gradient_returns_regularized_value(small_model, rng):
    batch = random_pair_batch(rng, n=15)
    obj = losses.FactualObjective()
    raw = losses.objective_value(small_model, batch, obj)
    reg = RegConfig(l2_phi=0.7, l2_head=0.2)
    value, _ = loss_and_gradient(small_model, batch, obj, reg)
    assert value == pytest.approx(raw + l2_penalty(small_model.params, reg))


def test_adam_first_step_size():
    # with bias correction the very first update moves each coordinate by
    # almost exactly lr, regardless of the gradient's magnitude
    params = ParamStore({"phi": [(np.array([[1.0]]), np.array([0.5]))]})
    grads = ParamStore({"phi": [(np.array([[123.0]]), np.array([-42.0]))]})
    state = adam_init(params, lr=0.01)
    new, state = adam_step(params, grads, state)
    (w, b), = new.blocks["phi"]
    assert w[0, 0] == pytest.approx(1.0 - 0.01, abs=1e-6)
    assert b[0] == pytest.approx(0.5 + 0.01, abs=1e-6)
    assert state.step == 1


def test_adam_state_advances_deterministically(rng):
    params = ParamStore({"phi": [(rng.normal(size=(3, 3)), rng.normal(size=3))]})
    grads = params.map(lambda a: np.ones_like(a))
    s1 = adam_init(params, lr=1e-3)
    s2 = adam_init(params, lr=1e-3)
    p1, p2 = params, params
    for _ in range(5):
        p1, s1 = adam_step(p1, grads, s1)
        p2, s2 = adam_step(p2, grads, s2)
    for q1, q2 in zip(p1.arrays(), p2.arrays()):
        assert np.array_equal(q1, q2)
