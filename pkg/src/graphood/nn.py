"""Neural-net building blocks on top of the autodiff engine: linear layers,
MLPs, a GRU cell, Adam, Gumbel noise, and a binary parameter checkpoint."""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor

__all__ = [
    "ParamStore",
    "init_linear",
    "linear",
    "mlp",
    "gru_cell",
    "AdamState",
    "adam_step",
    "gumbel",
    "gumbel_from",
    "save_params",
    "load_params",
]

CHECKPOINT_MAGIC = b"ODGL1"


class ParamStore(dict):
    """Named parameter dict (str -> Tensor) with gradient helpers."""

    def zero_grad(self):
        for t in self.values():
            t.grad = None

    def tensors(self):
        return list(self.values())

    def copy_values(self) -> dict:
        return {k: v.data.copy() for k, v in self.items()}

    def load_values(self, values: dict):
        for k, v in values.items():
            self[k].data = np.array(v, dtype=np.float64)


def init_linear(store: ParamStore, name: str, fan_in: int, fan_out: int, rng):
    """Uniform(-1/sqrt(fan_in), +1/sqrt(fan_in)) weights and biases."""
    bound = 1.0 / np.sqrt(fan_in)
    store[f"{name}.W"] = Tensor(rng.uniform(-bound, bound, (fan_in, fan_out)))
    store[f"{name}.b"] = Tensor(rng.uniform(-bound, bound, fan_out))


def linear(store: ParamStore, name: str, x: Tensor) -> Tensor:
    return ad.matmul(x, store[f"{name}.W"]) + store[f"{name}.b"]


def init_mlp(store: ParamStore, name: str, dims, rng):
    """dims: (in, hidden..., out). Two entries make this a plain linear map."""
    for li in range(len(dims) - 1):
        init_linear(store, f"{name}.{li}", dims[li], dims[li + 1], rng)


def mlp(store: ParamStore, name: str, x: Tensor, n_layers: int) -> Tensor:
    h = x
    for li in range(n_layers):
        h = linear(store, f"{name}.{li}", h)
        if li < n_layers - 1:
            h = ad.relu(h)
    return h


def init_gru(store: ParamStore, name: str, input_dim: int, hidden_dim: int, rng):
    for gate in ("z", "r", "h"):
        init_linear(store, f"{name}.W{gate}", input_dim, hidden_dim, rng)
        # recurrent maps carry no separate bias
        bound = 1.0 / np.sqrt(hidden_dim)
        store[f"{name}.U{gate}.W"] = Tensor(
            rng.uniform(-bound, bound, (hidden_dim, hidden_dim))
        )


def gru_cell(store: ParamStore, name: str, h: Tensor, m: Tensor) -> Tensor:
    """Standard GRU update (reset-before-candidate form).

    z = sig(Wz m + Uz h + bz), r = sig(Wr m + Ur h + br),
    hcand = tanh(Wh m + Uh (r*h) + bh), h' = (1-z)*h + z*hcand.
    """
    z = ad.sigmoid(linear(store, f"{name}.Wz", m) + ad.matmul(h, store[f"{name}.Uz.W"]))
    r = ad.sigmoid(linear(store, f"{name}.Wr", m) + ad.matmul(h, store[f"{name}.Ur.W"]))
    hcand = ad.tanh(
        linear(store, f"{name}.Wh", m) + ad.matmul(r * h, store[f"{name}.Uh.W"])
    )
    one = Tensor(1.0)
    return (one - z) * h + z * hcand


@dataclass
class AdamState:
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    weight_decay: float = 0.0
    step: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)


def adam_step(state: AdamState, params: ParamStore):
    """One bias-corrected Adam update in place; missing grads count as zero."""
    state.step += 1
    t = state.step
    for name, p in params.items():
        g = p.grad if p.grad is not None else np.zeros_like(p.data)
        if state.weight_decay:
            g = g + state.weight_decay * p.data
        if name not in state.m:
            state.m[name] = np.zeros_like(p.data)
            state.v[name] = np.zeros_like(p.data)
        state.m[name] = state.beta1 * state.m[name] + (1 - state.beta1) * g
        state.v[name] = state.beta2 * state.v[name] + (1 - state.beta2) * g * g
        mhat = state.m[name] / (1 - state.beta1**t)
        vhat = state.v[name] / (1 - state.beta2**t)
        p.data = p.data - state.lr * mhat / (np.sqrt(vhat) + state.eps)


def gumbel(shape, seed: int) -> np.ndarray:
    """Gumbel(0,1) draws: -log(-log(u)) with u clamped away from {0, 1}."""
    return gumbel_from(np.random.default_rng(seed), shape)


def gumbel_from(rng, shape) -> np.ndarray:
    u = np.clip(rng.random(shape), 1e-12, 1 - 1e-12)
    return -np.log(-np.log(u))


# ---------------------------------------------------------------------------
# Checkpoint: magic "ODGL1", then per parameter
#   u32 name length, name bytes, u32 rank, u32 dims..., little-endian f64 data
# ---------------------------------------------------------------------------

def save_params(path, params: ParamStore):
    with open(path, "wb") as f:
        f.write(CHECKPOINT_MAGIC)
        for name in sorted(params):
            data = params[name].data
            nb = name.encode()
            f.write(struct.pack("<I", len(nb)))
            f.write(nb)
            f.write(struct.pack("<I", data.ndim))
            for dim in data.shape:
                f.write(struct.pack("<I", dim))
            f.write(data.astype("<f8").tobytes())


def load_params(path) -> ParamStore:
    store = ParamStore()
    with open(path, "rb") as f:
        magic = f.read(len(CHECKPOINT_MAGIC))
        if magic != CHECKPOINT_MAGIC:
            raise ValueError(f"bad checkpoint magic {magic!r}")
        while True:
            head = f.read(4)
            if not head:
                break
            (nlen,) = struct.unpack("<I", head)
            name = f.read(nlen).decode()
            (rank,) = struct.unpack("<I", f.read(4))
            dims = [struct.unpack("<I", f.read(4))[0] for _ in range(rank)]
            count = int(np.prod(dims)) if dims else 1
            data = np.frombuffer(f.read(8 * count), dtype="<f8").reshape(dims)
            store[name] = Tensor(data.astype(np.float64))
    return store
