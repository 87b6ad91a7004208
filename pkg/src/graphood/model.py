"""Encode-process-decode message-passing network with configurable
aggregation, optional attention, and single- or multi-module node updates
(sigmoid gating, Gumbel binary gating, or an explicit per-node assignment).
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from . import autodiff as ad
from . import nn
from .autodiff import Tensor
from .graphs import Graph
from .graph_tasks import MultiTaskTarget, TaskFeatures
from .ising import KL_EPS

__all__ = [
    "ProcessorConfig",
    "GraphBatch",
    "IsingInstance",
    "GTheoryInstance",
    "TaskNorm",
    "init_net",
    "encode",
    "propagate_step",
    "binary_gate_alpha",
    "decode",
    "forward",
    "compute_loss",
    "train",
    "collect_message_stats",
    "MessageStats",
    "ising_config",
    "gtheory_config",
]

PI_EPS = 1e-6


@dataclass
class ProcessorConfig:
    task: str = "ising"  # "ising" | "gtheory"
    hidden_dim: int = 64
    layers: int = 1  # hidden layers of the message net (0 = linear)
    steps: int = 10
    aggregation: str = "sum"  # "sum" | "max"
    attention: bool = True
    update: str = "single"  # single | sigmoid_gate | binary_gate | assigned
    tau: float = 1.0  # Gumbel temperature (binary gating)
    tau_min: float = 0.1  # exponential anneal floor across training

    def validate(self):
        if self.task not in ("ising", "gtheory"):
            raise ValueError(f"unknown task {self.task!r}")
        if self.aggregation not in ("sum", "max"):
            raise ValueError(f"unknown aggregation {self.aggregation!r}")
        if self.update not in ("single", "sigmoid_gate", "binary_gate", "assigned"):
            raise ValueError(f"unknown update strategy {self.update!r}")
        if self.hidden_dim <= 0 or self.steps <= 0:
            raise ValueError("dims and step counts must be positive")
        if self.update == "binary_gate" and self.tau <= 0:
            raise ValueError("tau must be positive")

    @property
    def multi_module(self) -> bool:
        return self.update != "single"

    @property
    def gated(self) -> bool:
        return self.update in ("sigmoid_gate", "binary_gate")

    def node_feat_dim(self) -> int:
        return 1 if self.task == "ising" else 2

    def edge_feat_dim(self) -> int:
        return 1


def ising_config(**overrides) -> ProcessorConfig:
    """Marginal-inference defaults: attention, sum aggregation, dim 64,
    MLP messages, 10 propagation steps."""
    cfg = ProcessorConfig(
        task="ising", hidden_dim=64, layers=1, steps=10,
        aggregation="sum", attention=True,
    )
    return replace(cfg, **overrides)


def gtheory_config(**overrides) -> ProcessorConfig:
    """Graph-theory defaults: plain MPNN, linear messages, max aggregation,
    dim 16, 2 layers, 1 propagation step."""
    cfg = ProcessorConfig(
        task="gtheory", hidden_dim=16, layers=0, steps=1,
        aggregation="max", attention=False,
    )
    return replace(cfg, **overrides)


# ---------------------------------------------------------------------------
# Instances and batching
# ---------------------------------------------------------------------------

@dataclass
class IsingInstance:
    graph: Graph
    b: np.ndarray
    J: np.ndarray  # aligned with sorted(graph.edges)
    target: np.ndarray  # per-node p(x_i = +1)
    graph_id: str = ""


@dataclass
class GTheoryInstance:
    graph: Graph
    feats: TaskFeatures
    target: MultiTaskTarget
    graph_id: str = ""


@dataclass
class TaskNorm:
    """Training-split statistics for commensurate multi-task losses."""

    lap_mean: float = 0.0
    lap_std: float = 1.0
    sr_mean: float = 0.0
    sr_std: float = 1.0

    @classmethod
    def fit(cls, instances) -> "TaskNorm":
        lap = np.concatenate([inst.target.lapfeat for inst in instances])
        sr = np.array([inst.target.spectral_radius for inst in instances])
        return cls(
            lap_mean=float(lap.mean()),
            lap_std=float(lap.std()) or 1.0,
            sr_mean=float(sr.mean()),
            sr_std=float(sr.std()) or 1.0,
        )


@dataclass
class GraphBatch:
    n_nodes: int
    n_graphs: int
    node_feat: np.ndarray  # (N, F)
    edge_feat: np.ndarray  # (E, Fe), both orientations
    src: np.ndarray
    dst: np.ndarray
    node_graph: np.ndarray  # (N,) graph index per node
    graph_sizes: np.ndarray
    targets: dict
    graphs: list


def make_batch(instances, norm: TaskNorm | None = None) -> GraphBatch:
    """Disjoint-union batch of featurized instances (homogeneous task)."""
    if not instances:
        raise ValueError("empty batch")
    node_feat, edge_feat, srcs, dsts, node_graph = [], [], [], [], []
    sizes = []
    offset = 0
    is_ising = isinstance(instances[0], IsingInstance)
    tgt_node, masks = [], {}
    tgt_graph = []
    for gi, inst in enumerate(instances):
        g = inst.graph
        arcs = g.directed_edges()
        if is_ising:
            node_feat.append(inst.b[:, None])
            jmap = {}
            for (i, j), Jij in zip(sorted(g.edges), inst.J):
                jmap[(i, j)] = Jij
                jmap[(j, i)] = Jij
            edge_feat.append(
                np.array([[jmap[(s, d)]] for s, d in arcs]).reshape(len(arcs), 1)
            )
            tgt_node.append(inst.target)
        else:
            node_feat.append(
                np.stack([inst.feats.source_onehot, inst.feats.scalar], axis=1)
            )
            edge_feat.append(np.ones((len(arcs), 1)))
            t = inst.target
            n = g.n
            tgt_node.append(
                np.stack(
                    [t.sssp / n, t.ecc / n,
                     (t.lapfeat - norm.lap_mean) / norm.lap_std],
                    axis=1,
                )
            )
            masks.setdefault("node", []).append(
                np.stack([t.sssp >= 0, t.ecc >= 0, np.ones(n, bool)], axis=1)
            )
            tgt_graph.append(
                [
                    t.diameter / n if t.diameter >= 0 else 0.0,
                    (t.spectral_radius - norm.sr_mean) / norm.sr_std,
                    1.0 if t.connected else 0.0,
                ]
            )
            masks.setdefault("graph", []).append(
                [t.diameter >= 0, True, True]
            )
        srcs.append(arcs[:, 0] + offset)
        dsts.append(arcs[:, 1] + offset)
        node_graph.append(np.full(g.n, gi))
        sizes.append(g.n)
        offset += g.n

    targets = {}
    if is_ising:
        targets["p_plus"] = np.concatenate(tgt_node)
    else:
        targets["node"] = np.concatenate(tgt_node)
        targets["node_mask"] = np.concatenate(masks["node"]).astype(np.float64)
        targets["graph"] = np.array(tgt_graph, dtype=np.float64)
        targets["graph_mask"] = np.array(masks["graph"], dtype=np.float64)

    return GraphBatch(
        n_nodes=offset,
        n_graphs=len(instances),
        node_feat=np.concatenate(node_feat),
        edge_feat=np.concatenate(edge_feat) if offset else np.zeros((0, 1)),
        src=np.concatenate(srcs) if srcs else np.zeros(0, np.int64),
        dst=np.concatenate(dsts) if dsts else np.zeros(0, np.int64),
        node_graph=np.concatenate(node_graph),
        graph_sizes=np.array(sizes),
        targets=targets,
        graphs=[inst.graph for inst in instances],
    )


# ---------------------------------------------------------------------------
# Network parameters
# ---------------------------------------------------------------------------

def init_net(config: ProcessorConfig, seed: int) -> nn.ParamStore:
    config.validate()
    rng = np.random.default_rng(seed)
    store = nn.ParamStore()
    dim = config.hidden_dim
    fin = config.node_feat_dim()
    fedge = config.edge_feat_dim()
    msg_in = 2 * dim + fedge

    nn.init_linear(store, "enc", fin, dim, rng)
    _init_message(store, "msg", msg_in, dim, config.layers, rng)
    if config.attention:
        nn.init_linear(store, "att.score", 2 * dim, dim, rng)
        nn.init_linear(store, "att.out", dim, 1, rng)
    nn.init_gru(store, "u1", dim, dim, rng)
    if config.multi_module:
        nn.init_gru(store, "u2", dim, dim, rng)
    if config.gated:
        nn.init_linear(store, "gate.enc", fin, dim, rng)
        _init_message(store, "gate.msg", msg_in, dim, config.layers, rng)
        nn.init_gru(store, "gate.u", dim, dim, rng)
        nn.init_linear(store, "gate.head", dim, 1, rng)
    if config.task == "ising":
        nn.init_linear(store, "dec.0", dim, dim, rng)
        nn.init_linear(store, "dec.1", dim, 1, rng)
    else:
        nn.init_linear(store, "dec_node.0", dim, dim, rng)
        nn.init_linear(store, "dec_node.1", dim, 3, rng)
        nn.init_linear(store, "dec_graph.0", dim, dim, rng)
        nn.init_linear(store, "dec_graph.1", dim, 3, rng)
    return store


def _init_message(store, name, msg_in, dim, layers, rng):
    # layers counts hidden layers; 0 means a plain linear message map
    nn.init_mlp(store, name, [msg_in] + [dim] * (layers + 1), rng)


def _message(store, name, x, layers):
    return nn.mlp(store, name, x, layers + 1)


# ---------------------------------------------------------------------------
# Forward pieces
# ---------------------------------------------------------------------------

def encode(params: nn.ParamStore, batch: GraphBatch) -> Tensor:
    return nn.linear(params, "enc", Tensor(batch.node_feat))


def binary_gate_alpha(pi: Tensor, g1, g2, tau: float) -> Tensor:
    """Gumbel-reparameterized Bernoulli gate: a value in (0, 1) that
    concentrates on {0, 1} as tau -> 0."""
    pi = ad.clip(pi, PI_EPS, 1 - PI_EPS)
    logit = ad.log(pi) - ad.log(Tensor(1.0) - pi)
    noise = Tensor(np.asarray(g1) - np.asarray(g2))
    return ad.sigmoid(ad.scale(logit + noise, 1.0 / tau))


def _aggregate(params, config, h, batch, prefix=""):
    """Messages along directed edges plus aggregation; returns (E-msgs
    aggregated per destination node)."""
    h_dst = ad.gather(h, batch.dst)
    h_src = ad.gather(h, batch.src)
    z = Tensor(batch.edge_feat)
    m = _message(params, prefix + "msg", ad.concat([h_dst, h_src, z]), config.layers)
    if config.attention and not prefix:
        s = ad.tanh(nn.linear(params, "att.score", ad.concat([h_dst, h_src])))
        s = nn.linear(params, "att.out", s)
        smax = ad.segment_max(s, batch.dst, batch.n_nodes)
        es = ad.exp(s - ad.gather(smax, batch.dst))
        denom = ad.segment_sum(es, batch.dst, batch.n_nodes)
        w = es / ad.gather(denom, batch.dst)
        m = m * w
    if config.aggregation == "sum" or (config.attention and not prefix):
        return ad.segment_sum(m, batch.dst, batch.n_nodes)
    return ad.segment_max(m, batch.dst, batch.n_nodes)


def propagate_step(
    params, h, batch, config, gate_h=None, rng=None, assignment=None,
    tau=None, collect=None,
):
    """One round of message passing; returns (h', gate_h')."""
    agg = _aggregate(params, config, h, batch)
    if collect is not None:
        collect.append(agg.data.copy())

    if config.update == "single":
        return nn.gru_cell(params, "u1", h, agg), gate_h

    h1 = nn.gru_cell(params, "u1", h, agg)
    h2 = nn.gru_cell(params, "u2", h, agg)

    if config.update == "assigned":
        mask = Tensor(np.asarray(assignment, dtype=np.float64)[:, None])
        return (Tensor(1.0) - mask) * h1 + mask * h2, gate_h

    # gating: a parallel processor with its own weights and a scalar head
    gate_agg = _aggregate(params, config, gate_h, batch, prefix="gate.")
    gate_h = nn.gru_cell(params, "gate.u", gate_h, gate_agg)
    raw = ad.sigmoid(nn.linear(params, "gate.head", gate_h))
    if config.update == "sigmoid_gate":
        alpha = raw
    else:
        t = config.tau if tau is None else tau
        g1 = nn.gumbel_from(rng, (batch.n_nodes, 1))
        g2 = nn.gumbel_from(rng, (batch.n_nodes, 1))
        alpha = binary_gate_alpha(raw, g1, g2, t)
    return alpha * h1 + (Tensor(1.0) - alpha) * h2, gate_h


def decode(params, h: Tensor, batch: GraphBatch, config: ProcessorConfig):
    """Task heads: per-node output, plus a mean-pooled graph head for the
    graph-theory task."""
    out = {}
    if config.task == "ising":
        x = ad.relu(nn.linear(params, "dec.0", h))
        out["p_plus"] = ad.sigmoid(nn.linear(params, "dec.1", x))
    else:
        x = ad.relu(nn.linear(params, "dec_node.0", h))
        out["node"] = nn.linear(params, "dec_node.1", x)
        pooled = segment_mean(h, batch.node_graph, batch.n_graphs, batch.graph_sizes)
        y = ad.relu(nn.linear(params, "dec_graph.0", pooled))
        out["graph"] = nn.linear(params, "dec_graph.1", y)
    return out


def segment_mean(x, seg, num, sizes):
    total = ad.segment_sum(x, seg, num)
    return total * Tensor(1.0 / np.asarray(sizes, dtype=np.float64)[:, None])


def forward(
    params, batch, config, rng=None, assignment=None, tau=None, collect=None
):
    """Full encode-process-decode pass; returns the decode output dict."""
    h = encode(params, batch)
    gate_h = (
        nn.linear(params, "gate.enc", Tensor(batch.node_feat))
        if config.gated
        else None
    )
    for step in range(config.steps):
        coll = collect if step == config.steps - 1 else None
        h, gate_h = propagate_step(
            params, h, batch, config,
            gate_h=gate_h, rng=rng, assignment=assignment, tau=tau,
            collect=coll,
        )
    return decode(params, h, batch, config)


# ---------------------------------------------------------------------------
# Losses
# ---------------------------------------------------------------------------

def compute_loss(
    params, batch, config, rng=None, assignment=None, tau=None, collect=None
):
    """Scalar training loss and per-graph numpy losses.

    Ising: mean Bernoulli KL(target || pred). Graph theory: mean of six
    per-task MSE losses with -1 targets masked.
    """
    out = forward(
        params, batch, config, rng=rng, assignment=assignment, tau=tau,
        collect=collect,
    )
    gid = batch.node_graph
    G = batch.n_graphs
    sizes = batch.graph_sizes.astype(np.float64)
    if config.task == "ising":
        p = ad.clip(out["p_plus"], KL_EPS, 1 - KL_EPS)
        t = np.clip(batch.targets["p_plus"], KL_EPS, 1 - KL_EPS)[:, None]
        tt = Tensor(t)
        kl = tt * (ad.log(tt) - ad.log(p)) + (Tensor(1.0) - tt) * (
            ad.log(Tensor(1.0) - tt) - ad.log(Tensor(1.0) - p)
        )
        loss = ad.reduce_mean(kl)
        per_graph = np.bincount(gid, weights=kl.data[:, 0], minlength=G) / sizes
        return loss, per_graph

    node_t = Tensor(batch.targets["node"])
    node_m = batch.targets["node_mask"]
    graph_t = Tensor(batch.targets["graph"])
    graph_m = batch.targets["graph_mask"]

    nd = (out["node"] - node_t) * Tensor(node_m)
    gd = (out["graph"] - graph_t) * Tensor(graph_m)
    n_counts = np.maximum(node_m.sum(axis=0), 1.0)
    g_counts = np.maximum(graph_m.sum(axis=0), 1.0)
    nsq = nd * nd
    gsq = gd * gd
    # mean of six per-task mean-squared errors
    task_scale = np.concatenate([1.0 / n_counts, 1.0 / g_counts]) / 6.0
    loss = ad.reduce_sum(nsq * Tensor(task_scale[:3])) + ad.reduce_sum(
        gsq * Tensor(task_scale[3:])
    )

    per_node = (nsq.data * np.where(node_m > 0, 1.0, 0.0)).sum(axis=1)
    node_cnt = np.maximum(
        np.array([node_m[gid == g].sum() for g in range(G)]), 1.0
    )
    per_graph = (
        np.bincount(gid, weights=per_node, minlength=G) / node_cnt
        + (gsq.data * graph_m).sum(axis=1) / np.maximum(graph_m.sum(axis=1), 1.0)
    ) / 2.0
    return loss, per_graph


# ---------------------------------------------------------------------------
# Training
# ---------------------------------------------------------------------------

TRAIN_DEFAULTS = {
    "ising": dict(epochs=1000, lr=1e-3, batch_size=32, weight_decay=0.0),
    "gtheory": dict(epochs=5000, lr=3e-3, batch_size=256, weight_decay=1e-6),
}


def train(
    dataset,
    config: ProcessorConfig,
    seed: int,
    epochs: int | None = None,
    lr: float | None = None,
    batch_size: int | None = None,
    weight_decay: float | None = None,
    norm: TaskNorm | None = None,
    val_batch: GraphBatch | None = None,
):
    """Mini-batch training; returns (params, loss trace).

    Trace rows are (epoch, train_loss, val_loss) with val_loss = nan when no
    validation batch is given. A non-finite loss aborts with the epoch index.
    """
    defaults = TRAIN_DEFAULTS[config.task]
    epochs = defaults["epochs"] if epochs is None else epochs
    lr = defaults["lr"] if lr is None else lr
    batch_size = defaults["batch_size"] if batch_size is None else batch_size
    wd = defaults["weight_decay"] if weight_decay is None else weight_decay

    if config.task == "gtheory" and norm is None:
        norm = TaskNorm.fit(dataset)

    params = init_net(config, seed)
    opt = nn.AdamState(lr=lr, weight_decay=wd)
    rng = np.random.default_rng(seed + 1)
    trace = []
    n = len(dataset)
    for epoch in range(epochs):
        order = rng.permutation(n)
        tau = _anneal_tau(config, epoch, epochs)
        ep_loss = 0.0
        nb = 0
        for lo in range(0, n, batch_size):
            idx = order[lo : lo + batch_size]
            batch = make_batch([dataset[i] for i in idx], norm=norm)
            params.zero_grad()
            loss, _ = compute_loss(params, batch, config, rng=rng, tau=tau)
            if not np.isfinite(loss.data):
                raise ArithmeticError(f"training diverged at epoch {epoch}")
            ad.backward(loss)
            nn.adam_step(opt, params)
            ep_loss += float(loss.data)
            nb += 1
        val = np.nan
        if val_batch is not None:
            vl, _ = compute_loss(params, val_batch, config, rng=rng, tau=tau)
            val = float(vl.data)
        trace.append((epoch, ep_loss / nb, val))
    return params, trace


def _anneal_tau(config: ProcessorConfig, epoch: int, epochs: int) -> float:
    """Exponential anneal of the Gumbel temperature toward tau_min."""
    if config.update != "binary_gate" or epochs <= 1:
        return config.tau
    frac = epoch / (epochs - 1)
    return float(config.tau * (config.tau_min / config.tau) ** frac)


@dataclass
class MessageStats:
    mean_magnitude: float
    cov_trace: float


def collect_message_stats(params, batches, config, rng=None, assignments=None):
    """Aggregated-message statistics at the final propagation step across
    graphs: mean L2 norm and trace of the sample covariance."""
    rng = rng or np.random.default_rng(0)
    msgs = []
    for bi, batch in enumerate(batches):
        coll = []
        assignment = assignments[bi] if assignments is not None else None
        forward(
            params, batch, config, rng=rng, assignment=assignment,
            tau=config.tau_min, collect=coll,
        )
        msgs.append(coll[-1])
    M = np.concatenate(msgs)
    mags = np.linalg.norm(M, axis=1)
    if M.shape[0] < 2:
        return MessageStats(float(mags.mean()), 0.0)
    cov = np.cov(M, rowvar=False, ddof=1)
    trace = float(np.trace(np.atleast_2d(cov)))
    return MessageStats(float(mags.mean()), trace)
