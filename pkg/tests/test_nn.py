import numpy as np
import pytest

from graphood import autodiff as ad
from graphood import nn
from graphood.autodiff import Tensor
from graphood.nn import (
    AdamState,
    ParamStore,
    adam_step,
    gru_cell,
    gumbel,
    init_gru,
    init_linear,
    init_mlp,
    linear,
    load_params,
    mlp,
    save_params,
)


# ---------------------------------------------------------------------------
# Linear / MLP
# ---------------------------------------------------------------------------


def test_init_linear_bounds_and_shapes():
    store = ParamStore()
    init_linear(store, "l", 16, 8, np.random.default_rng(0))
    W, b = store["l.W"], store["l.b"]
    assert W.shape == (16, 8) and b.shape == (8,)
    bound = 1.0 / 4.0
    assert (np.abs(W.data) <= bound).all() and (np.abs(b.data) <= bound).all()


def test_linear_computes_affine_map():
    store = ParamStore()
    init_linear(store, "l", 3, 2, np.random.default_rng(1))
    x = np.random.default_rng(2).normal(size=(5, 3))
    y = linear(store, "l", Tensor(x))
    assert np.allclose(y.data, x @ store["l.W"].data + store["l.b"].data)


def test_mlp_relu_between_layers_only():
    store = ParamStore()
    init_mlp(store, "m", [2, 4, 3], np.random.default_rng(3))
    x = np.random.default_rng(4).normal(size=(6, 2))
    y = mlp(store, "m", Tensor(x), 2)
    h = np.maximum(x @ store["m.0.W"].data + store["m.0.b"].data, 0.0)
    want = h @ store["m.1.W"].data + store["m.1.b"].data
    assert np.allclose(y.data, want)
    assert (y.data < 0).any()  # output layer is linear, not rectified


def test_mlp_single_layer_is_linear():
    store = ParamStore()
    init_mlp(store, "m", [3, 2], np.random.default_rng(5))
    x = np.random.default_rng(6).normal(size=(4, 3))
    y = mlp(store, "m", Tensor(x), 1)
    assert np.allclose(y.data, x @ store["m.0.W"].data + store["m.0.b"].data)


def test_mlp_gradcheck():
    store = ParamStore()
    init_mlp(store, "m", [3, 5, 1], np.random.default_rng(7))
    x = Tensor(np.random.default_rng(8).normal(size=(4, 3)))
    ad.gradcheck(
        lambda: ad.reduce_sum(mlp(store, "m", x, 2)), store.tensors() + [x]
    )


# ---------------------------------------------------------------------------
# GRU
# ---------------------------------------------------------------------------


def test_gru_zero_weights_closed_form():
    # all-zero parameters: z = r = 1/2, hcand = 0, h' = h/2
    store = ParamStore()
    init_gru(store, "g", 3, 3, np.random.default_rng(9))
    for t in store.values():
        t.data = np.zeros_like(t.data)
    h = Tensor(np.random.default_rng(10).normal(size=(5, 3)))
    m = Tensor(np.random.default_rng(11).normal(size=(5, 3)))
    out = gru_cell(store, "g", h, m)
    assert np.allclose(out.data, h.data / 2.0, atol=1e-12)


def test_gru_matches_manual_equations():
    store = ParamStore()
    init_gru(store, "g", 4, 4, np.random.default_rng(12))
    rng = np.random.default_rng(13)
    h = rng.normal(size=(3, 4))
    m = rng.normal(size=(3, 4))

    def sig(x):
        return 1.0 / (1.0 + np.exp(-x))

    z = sig(m @ store["g.Wz.W"].data + store["g.Wz.b"].data + h @ store["g.Uz.W"].data)
    r = sig(m @ store["g.Wr.W"].data + store["g.Wr.b"].data + h @ store["g.Ur.W"].data)
    hc = np.tanh(
        m @ store["g.Wh.W"].data + store["g.Wh.b"].data + (r * h) @ store["g.Uh.W"].data
    )
    want = (1 - z) * h + z * hc
    out = gru_cell(store, "g", Tensor(h), Tensor(m))
    assert np.allclose(out.data, want, atol=1e-12)


def test_gru_gradcheck():
    store = ParamStore()
    init_gru(store, "g", 2, 2, np.random.default_rng(14))
    h = Tensor(np.random.default_rng(15).normal(size=(3, 2)))
    m = Tensor(np.random.default_rng(16).normal(size=(3, 2)))
    def f():
        out = gru_cell(store, "g", h, m)
        return ad.reduce_sum(out * out)

    ad.gradcheck(f, store.tensors() + [h, m])


# ---------------------------------------------------------------------------
# Adam
# ---------------------------------------------------------------------------


def test_adam_first_step_magnitude():
    # with zero state, the first bias-corrected step is lr * g / (|g| + eps)
    store = ParamStore()
    store["w"] = Tensor(np.array([1.0, -2.0]))
    store["w"].grad = np.array([0.5, -3.0])
    st = AdamState(lr=0.1)
    adam_step(st, store)
    assert np.allclose(store["w"].data, [1.0 - 0.1, -2.0 + 0.1], atol=1e-6)


def test_adam_weight_decay_is_l2_on_gradient():
    a = ParamStore({"w": Tensor(np.array([2.0]))})
    b = ParamStore({"w": Tensor(np.array([2.0]))})
    a["w"].grad = np.array([0.0])
    b["w"].grad = np.array([0.0 + 0.01 * 2.0])
    adam_step(AdamState(lr=0.1, weight_decay=0.01), a)
    adam_step(AdamState(lr=0.1, weight_decay=0.0), b)
    assert np.allclose(a["w"].data, b["w"].data, atol=1e-12)


def test_adam_converges_on_quadratic():
    store = ParamStore({"w": Tensor(np.array([0.0]))})
    st = AdamState(lr=0.05)
    for _ in range(2000):
        store.zero_grad()
        loss = ad.reduce_sum((store["w"] - 5.0) * (store["w"] - 5.0))
        ad.backward(loss)
        adam_step(st, store)
    assert abs(store["w"].data[0] - 5.0) < 1e-3


def test_adam_missing_grad_counts_as_zero():
    store = ParamStore({"w": Tensor(np.array([1.0]))})
    adam_step(AdamState(lr=0.1), store)
    assert store["w"].data[0] == pytest.approx(1.0)


# ---------------------------------------------------------------------------
# Gumbel
# ---------------------------------------------------------------------------


def test_gumbel_moments():
    draws = gumbel((200000,), seed=0)
    assert draws.mean() == pytest.approx(0.5772, abs=0.01)  # Euler-Mascheroni
    assert draws.var() == pytest.approx(np.pi**2 / 6, abs=0.03)


def test_gumbel_deterministic_and_finite():
    assert np.array_equal(gumbel((10,), 5), gumbel((10,), 5))
    assert np.isfinite(gumbel((1000,), 1)).all()


# ---------------------------------------------------------------------------
# Checkpoints
# ---------------------------------------------------------------------------


def test_checkpoint_round_trip(tmp_path):
    store = ParamStore()
    rng = np.random.default_rng(20)
    init_mlp(store, "m", [4, 8, 2], rng)
    init_gru(store, "g", 8, 8, rng)
    path = tmp_path / "model.ckpt"
    save_params(path, store)
    back = load_params(path)
    assert set(back) == set(store)
    for k in store:
        assert np.array_equal(back[k].data, store[k].data)


def test_checkpoint_magic_and_rejection(tmp_path):
    path = tmp_path / "model.ckpt"
    save_params(path, ParamStore({"w": Tensor(np.zeros((2, 2)))}))
    assert path.read_bytes()[:5] == b"ODGL1"
    bad = tmp_path / "bad.ckpt"
    bad.write_bytes(b"XXXXX" + path.read_bytes()[5:])
    with pytest.raises(ValueError):
        load_params(bad)


def test_checkpoint_bytes_deterministic(tmp_path):
    store = ParamStore()
    init_mlp(store, "m", [3, 3], np.random.default_rng(21))
    p1, p2 = tmp_path / "a.ckpt", tmp_path / "b.ckpt"
    save_params(p1, store)
    save_params(p2, store)
    assert p1.read_bytes() == p2.read_bytes()
