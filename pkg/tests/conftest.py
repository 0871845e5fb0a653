import numpy as np
import pytest

from paireffect.datagen import BINARY, Dataset
from paireffect.models import TwoHeadedNetwork, build_model
from paireffect.nets import LayerSpec, ParamStore, init_chain
from paireffect.pairing import IdentityEmbedding, PairingConfig, create_pair_ds


class PairBatch:
    """Minimal anchor/neighbor batch for exercising the pair objectives
    without going through CreatePairDS."""

    def __init__(self, x, t, y, xp, tp, yp):
        self.x = np.atleast_2d(np.asarray(x, dtype=float))
        self.t = np.asarray(t, dtype=float)
        self.y = np.asarray(y, dtype=float)
        self.xp = np.atleast_2d(np.asarray(xp, dtype=float))
        self.tp = np.asarray(tp, dtype=float)
        self.yp = np.asarray(yp, dtype=float)

    def __len__(self):
        return len(self.y)


def random_pair_batch(rng, n=40, dim=3, binary_outcomes=False):
    t = rng.integers(0, 2, size=n).astype(float)
    if binary_outcomes:
        y = rng.integers(0, 2, size=n).astype(float)
        yp = rng.integers(0, 2, size=n).astype(float)
    else:
        y = rng.normal(size=n)
        yp = rng.normal(size=n)
    return PairBatch(
        x=rng.normal(size=(n, dim)), t=t, y=y,
        xp=rng.normal(size=(n, dim)), tp=1.0 - t, yp=yp,
    )


def tiny_network(seed=0, mode=BINARY, input_dim=3):
    """A handful-of-units network; full-size models make coordinate-wise
    finite differences needlessly slow."""
    extra = 0 if mode == BINARY else 1
    phi_specs = [LayerSpec(input_dim, 8, "elu")]
    head_specs = [LayerSpec(8 + extra, 6, "elu"), LayerSpec(6 + extra, 1, "identity")]
    n_heads = 2 if mode == BINARY else 5
    rng = np.random.default_rng(seed)
    blocks = {"phi": init_chain(phi_specs, rng)}
    for k in range(n_heads):
        blocks[f"head_{k}"] = init_chain(head_specs, rng)
    return TwoHeadedNetwork(
        input_dim=input_dim, mode=mode, arch="shallow",
        phi_specs=phi_specs, head_specs=head_specs, params=ParamStore(blocks),
    )


def binary_dataset(n=60, dim=3, seed=0):
    rng = np.random.default_rng(seed)
    x = rng.normal(size=(n, dim))
    t = rng.integers(0, 2, size=n).astype(float)
    y = x[:, 0] + t * (1.0 + x[:, 1]) + 0.1 * rng.normal(size=n)
    return Dataset(x=x, t=t, y=y, mode=BINARY)


def quick_pairs(ds=None, seed=0, **cfg_kwargs):
    ds = ds if ds is not None else binary_dataset(seed=seed)
    config = PairingConfig(**cfg_kwargs)
    return create_pair_ds(ds, ds, config, IdentityEmbedding(ds.dim), seed)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def small_model():
    return build_model(arch="shallow", mode=BINARY, input_dim=3, rng_seed=7)
