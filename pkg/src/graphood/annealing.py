"""Simulated-annealing search over per-node update-module assignments,
alternated with gradient steps (BounceGrad), plus the meta-test search for a
single degree-keyed module rule shared across graphs."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from . import nn
from .model import GraphBatch, ProcessorConfig, compute_loss, make_batch

__all__ = [
    "SaState",
    "schedule_temp",
    "accept",
    "propose",
    "bounce",
    "grad",
    "meta_train",
    "meta_test_search",
    "apply_rule",
    "write_assignments",
    "write_rule",
    "read_rule",
]


@dataclass
class SaState:
    T: float = 1.0
    sa_r: float = 1.0  # running accuracy rate
    sa_f: float = 1.0  # running accuracy factor
    alpha: float = 0.95
    step: int = 0

    def validate(self):
        if self.T <= 0 or self.sa_r <= 0 or self.sa_f <= 0:
            raise ValueError("T, SA_r, SA_f must be positive")
        if not (0 < self.alpha <= 1):
            raise ValueError("alpha must be in (0, 1]")


def schedule_temp(state: SaState, max_epochs: int) -> float:
    """Cool when the running acceptance rate is below exp(-5 * progress),
    otherwise heat."""
    state.validate()
    acc = math.exp(-5.0 * state.step / max_epochs)
    if state.sa_r / state.sa_f < acc:
        return state.T * state.alpha
    return state.T / state.alpha


def accept(loss_old: float, loss_new: float, T: float, rng) -> bool:
    """Always accept improvements; accept a worse move with probability
    exp(-(loss_new - loss_old) / T)."""
    if loss_new < loss_old:
        return True
    return rng.random() < math.exp(min(0.0, (loss_old - loss_new) / T))


def propose(assignment: np.ndarray, rng) -> np.ndarray:
    """Flip the module id of one uniformly chosen node."""
    out = assignment.copy()
    i = int(rng.integers(len(out)))
    out[i] = 1 - out[i]
    return out


def _batched_losses(params, batch: GraphBatch, config, assignments):
    flat = np.concatenate(assignments)
    _, per_graph = compute_loss(params, batch, config, assignment=flat)
    return per_graph


def bounce(
    assignments, train_batch: GraphBatch, state: SaState, params, config, rng
):
    """One sweep of per-graph proposals.

    Losses for the current and proposed assignments are evaluated in two
    batched passes; acceptance and the SA_r/SA_f blends run serially in
    graph-id order. Returns (new assignments, per-graph losses after the
    sweep).
    """
    proposals = [propose(a, rng) for a in assignments]
    cur = _batched_losses(params, train_batch, config, assignments)
    new = _batched_losses(params, train_batch, config, proposals)
    out = []
    losses = np.empty(len(assignments))
    for j in range(len(assignments)):
        f = min(1e-2, state.sa_r / state.sa_f)
        if accept(cur[j], new[j], state.T, rng):
            out.append(proposals[j])
            losses[j] = new[j]
            if new[j] >= cur[j]:
                state.sa_f = (1 - f) * state.sa_f + f
                state.sa_r = (1 - f) * state.sa_r + f
        else:
            out.append(assignments[j])
            losses[j] = cur[j]
            state.sa_f = (1 - f) * state.sa_f + f
            state.sa_r = (1 - f) * state.sa_r
    return out, losses


def grad(params, assignments, test_batch: GraphBatch, config, opt):
    """One full-batch Adam step on the meta-test halves, assignments fixed."""
    flat = np.concatenate(assignments)
    params.zero_grad()
    loss, _ = compute_loss(params, test_batch, config, assignment=flat)
    ad.backward(loss)
    nn.adam_step(opt, params)
    return float(loss.data)


@dataclass
class MetaResult:
    params: nn.ParamStore
    assignments: list
    state: SaState
    trace: list = field(default_factory=list)  # (epoch, T, bounce_loss, grad_loss)
    events: list = field(default_factory=list)


def meta_train(
    train_instances,
    test_instances,
    config: ProcessorConfig,
    seed: int,
    epochs: int = 300,
    lr: float = 1e-3,
    weight_decay: float = 0.0,
    alpha: float = 0.95,
    T0: float = 1.0,
    norm=None,
    params=None,
) -> MetaResult:
    """BounceGrad loop: ScheduleTemp, Bounce (on train halves), Grad (on
    test halves), once per epoch.

    train_instances and test_instances are aligned per structural graph;
    assignments are shared between the halves.
    """
    if config.update != "assigned":
        raise ValueError("meta_train requires the 'assigned' update strategy")
    if len(train_instances) != len(test_instances):
        raise ValueError("train/test halves must be aligned")
    from .model import init_net

    rng = np.random.default_rng(seed)
    if params is None:
        params = init_net(config, seed)
    train_batch = make_batch(train_instances, norm=norm)
    test_batch = make_batch(test_instances, norm=norm)
    assignments = [
        rng.integers(0, 2, size=inst.graph.n) for inst in train_instances
    ]
    state = SaState(T=T0, alpha=alpha)
    opt = nn.AdamState(lr=lr, weight_decay=weight_decay)
    result = MetaResult(params=params, assignments=assignments, state=state)
    for epoch in range(epochs):
        state.T = schedule_temp(state, epochs)
        result.events.append("schedule_temp")
        state.step += 1
        assignments, b_losses = bounce(
            assignments, train_batch, state, params, config, rng
        )
        result.events.append("bounce")
        g_loss = grad(params, assignments, test_batch, config, opt)
        result.events.append("grad")
        if not np.isfinite(g_loss):
            raise ArithmeticError(f"meta-training diverged at epoch {epoch}")
        result.trace.append((epoch, state.T, float(b_losses.mean()), g_loss))
    result.assignments = assignments
    return result


# ---------------------------------------------------------------------------
# Meta-test: a single module scheme shared across graphs. Because node
# counts differ at evaluation time, the scheme is a degree-keyed rule:
# module 1 iff node degree >= threshold, plus the two constant rules.
# ---------------------------------------------------------------------------

def apply_rule(rule, graph) -> np.ndarray:
    kind, value = rule
    deg = graph.degrees()
    if kind == "constant":
        return np.full(graph.n, int(value), dtype=np.int64)
    if kind == "threshold":
        return (deg >= int(value)).astype(np.int64)
    raise ValueError(f"unknown rule kind {kind!r}")


def meta_test_search(
    params, few_shot_instances, config: ProcessorConfig,
    iters: int = 1000, seed: int = 0, norm=None,
):
    """SA over the shared rule space with frozen params; returns
    (best_rule, best_loss)."""
    rng = np.random.default_rng(seed)
    batch = make_batch(few_shot_instances, norm=norm)
    max_deg = int(max(g.degrees().max() for g in batch.graphs))
    rules = [("constant", 0), ("constant", 1)] + [
        ("threshold", t) for t in range(1, max_deg + 2)
    ]

    def loss_of(rule):
        assignments = [apply_rule(rule, inst.graph) for inst in few_shot_instances]
        return float(_batched_losses(params, batch, config, assignments).mean())

    cur = rules[int(rng.integers(len(rules)))]
    cur_loss = loss_of(cur)
    best, best_loss = cur, cur_loss
    T = 1.0
    for _ in range(iters):
        cand = rules[int(rng.integers(len(rules)))]
        cand_loss = loss_of(cand)
        if accept(cur_loss, cand_loss, T, rng):
            cur, cur_loss = cand, cand_loss
            if cur_loss < best_loss:
                best, best_loss = cur, cur_loss
        T = max(T * 0.995, 1e-3)
    return best, best_loss


# ---------------------------------------------------------------------------
# Dumps
# ---------------------------------------------------------------------------

def write_assignments(path, rows):
    """rows: iterable of (graph_id, assignment array)."""
    with open(path, "w") as f:
        f.write("graph_id,node,module\n")
        for gid, a in rows:
            for node, module in enumerate(a):
                f.write(f"{gid},{node},{int(module)}\n")


def write_rule(path, rule):
    kind, value = rule
    with open(path, "w") as f:
        if kind == "threshold":
            f.write(f"rule=threshold t={int(value)}\n")
        else:
            f.write(f"rule=constant m={int(value)}\n")


def read_rule(path):
    with open(path) as f:
        line = f.readline().strip()
    if line.startswith("rule=threshold t="):
        return ("threshold", int(line.split("=")[-1]))
    if line.startswith("rule=constant m="):
        return ("constant", int(line.split("=")[-1]))
    raise ValueError(f"bad rule line {line!r}")
