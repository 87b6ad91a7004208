import math

import numpy as np
import pytest

from graphood.annealing import (
    SaState,
    accept,
    apply_rule,
    bounce,
    grad,
    meta_test_search,
    meta_train,
    propose,
    read_rule,
    schedule_temp,
    write_assignments,
    write_rule,
)
from graphood import nn
from graphood.graphs import GenParams, generate, make_graph
from graphood.ising import sample_model
from graphood.model import (
    IsingInstance,
    ProcessorConfig,
    forward,
    init_net,
    make_batch,
)


def tiny_cfg(**kw):
    base = dict(task="ising", hidden_dim=5, layers=0, steps=2,
                aggregation="sum", attention=False, update="assigned")
    base.update(kw)
    return ProcessorConfig(**base)


def teacher_instances(cfg, params, graphs_seeds, rule):
    """Instances whose targets come from a frozen two-module teacher, so the
    planted assignment is exactly recoverable."""
    insts = []
    planted = []
    for seed in graphs_seeds:
        g = generate(GenParams(n=10, k=4.0, p=0.5, seed=seed))
        m = sample_model(g, seed + 70)
        a = apply_rule(rule, g)
        probe = IsingInstance(graph=g, b=m.b, J=m.J, target=np.full(g.n, 0.5))
        batch = make_batch([probe])
        p = forward(params, batch, cfg, assignment=a)["p_plus"].data[:, 0]
        insts.append(IsingInstance(graph=g, b=m.b, J=m.J, target=p, graph_id=str(seed)))
        planted.append(a)
    return insts, planted


# ---------------------------------------------------------------------------
# Schedule / accept / propose
# ---------------------------------------------------------------------------


def test_schedule_temp_cools_and_heats():
    st = SaState(T=1.0, sa_r=0.1, sa_f=1.0, alpha=0.9, step=0)
    # acceptance rate 0.1 < exp(0) = 1 -> cool
    assert schedule_temp(st, 100) == pytest.approx(0.9)
    st2 = SaState(T=1.0, sa_r=1.0, sa_f=1.0, alpha=0.9, step=0)
    # rate 1.0 >= 1 -> heat
    assert schedule_temp(st2, 100) == pytest.approx(1.0 / 0.9)
    # late in training the bar drops to exp(-5 * progress)
    st3 = SaState(T=2.0, sa_r=0.5, sa_f=1.0, alpha=0.9, step=100)
    assert st3.sa_r / st3.sa_f > math.exp(-5.0)
    assert schedule_temp(st3, 100) == pytest.approx(2.0 / 0.9)


def test_schedule_temp_validation():
    with pytest.raises(ValueError):
        schedule_temp(SaState(T=-1.0), 10)
    with pytest.raises(ValueError):
        schedule_temp(SaState(alpha=1.5), 10)


def test_accept_improvement_always():
    rng = np.random.default_rng(0)
    assert all(accept(1.0, 0.999, 1e-9, rng) for _ in range(50))


def test_accept_worse_frequency_matches_boltzmann():
    rng = np.random.default_rng(1)
    for delta, T in ((0.5, 1.0), (1.0, 0.5), (0.2, 0.1)):
        p = math.exp(-delta / T)
        n = 4000
        hits = sum(accept(0.0, delta, T, rng) for _ in range(n))
        sigma = math.sqrt(n * p * (1 - p))
        assert abs(hits - n * p) < 3.5 * sigma


def test_propose_flips_exactly_one_node():
    rng = np.random.default_rng(2)
    a = np.array([0, 1, 0, 1, 1])
    for _ in range(20):
        b = propose(a, rng)
        diff = np.flatnonzero(a != b)
        assert len(diff) == 1
        assert b[diff[0]] == 1 - a[diff[0]]
        assert set(np.unique(b)) <= {0, 1}


def test_propose_reaches_every_node():
    rng = np.random.default_rng(3)
    seen = set()
    a = np.zeros(6, dtype=int)
    for _ in range(300):
        b = propose(a, rng)
        seen.add(int(np.flatnonzero(a != b)[0]))
    assert seen == set(range(6))


# ---------------------------------------------------------------------------
# Bounce / Grad
# ---------------------------------------------------------------------------


def test_bounce_greedy_at_low_temperature():
    cfg = tiny_cfg()
    params = init_net(cfg, seed=0)
    insts, planted = teacher_instances(
        cfg, params, range(4), ("threshold", 4)
    )
    batch = make_batch(insts)
    rng = np.random.default_rng(4)
    assignments = [np.zeros(i.graph.n, dtype=np.int64) for i in insts]
    state = SaState(T=1e-12)
    from graphood.annealing import _batched_losses

    before = _batched_losses(params, batch, cfg, assignments)
    for _ in range(40):
        assignments, losses = bounce(assignments, batch, state, params, cfg, rng)
    # at T ~ 0 every accepted move is an improvement
    assert (losses <= before + 1e-12).all()
    assert losses.mean() < before.mean()


def test_bounce_updates_sa_statistics():
    cfg = tiny_cfg()
    params = init_net(cfg, seed=1)
    insts, planted = teacher_instances(cfg, params, range(3), ("constant", 0))
    batch = make_batch(insts)
    # zeros is already optimal, so every single-flip proposal is worse and is
    # rejected at T ~ 0: sa_f blends toward 1, sa_r decays toward 0
    state = SaState(T=1e-12)
    rng = np.random.default_rng(5)
    out, _ = bounce(planted, batch, state, params, cfg, rng)
    f = 1e-2
    want_f = want_r = 1.0
    for _ in range(3):
        want_f = (1 - f) * want_f + f
        want_r = (1 - f) * want_r
    assert state.sa_f == pytest.approx(want_f)
    assert state.sa_r == pytest.approx(want_r)
    assert all(np.array_equal(a, b) for a, b in zip(out, planted))


def test_grad_reduces_full_batch_loss():
    cfg = tiny_cfg()
    params = init_net(cfg, seed=2)
    insts, planted = teacher_instances(cfg, params, range(3), ("threshold", 4))
    # perturb away from the teacher so there is something to learn
    rng = np.random.default_rng(6)
    for t in params.tensors():
        t.data = t.data + rng.normal(scale=0.05, size=t.data.shape)
    batch = make_batch(insts)
    opt = nn.AdamState(lr=1e-2)
    first = grad(params, planted, batch, cfg, opt)
    for _ in range(60):
        last = grad(params, planted, batch, cfg, opt)
    assert last < first


# ---------------------------------------------------------------------------
# Meta loops
# ---------------------------------------------------------------------------


def test_meta_train_event_order_and_outputs():
    cfg = tiny_cfg()
    teacher = init_net(cfg, seed=3)
    train_insts, _ = teacher_instances(cfg, teacher, range(3), ("threshold", 4))
    test_insts, _ = teacher_instances(cfg, teacher, range(10, 13), ("threshold", 4))
    result = meta_train(train_insts, test_insts, cfg, seed=0, epochs=5)
    assert result.events == ["schedule_temp", "bounce", "grad"] * 5
    assert len(result.trace) == 5
    assert len(result.assignments) == 3
    for inst, a in zip(train_insts, result.assignments):
        assert len(a) == inst.graph.n
    assert result.state.step == 5


def test_meta_train_initial_temperature():
    cfg = tiny_cfg()
    teacher = init_net(cfg, seed=6)
    insts, _ = teacher_instances(cfg, teacher, range(2), ("constant", 0))
    result = meta_train(insts, insts, cfg, seed=0, epochs=1, T0=1e-6)
    # first schedule step heats or cools by exactly one factor of alpha
    assert result.state.T in (
        pytest.approx(1e-6 / result.state.alpha),
        pytest.approx(1e-6 * result.state.alpha),
    )


def test_meta_train_requires_assigned_update():
    cfg = tiny_cfg(update="single")
    with pytest.raises(ValueError):
        meta_train([], [], cfg, seed=0)


def test_meta_train_requires_aligned_halves():
    cfg = tiny_cfg()
    teacher = init_net(cfg, seed=4)
    insts, _ = teacher_instances(cfg, teacher, range(2), ("constant", 0))
    with pytest.raises(ValueError):
        meta_train(insts, insts[:1], cfg, seed=0)


def test_apply_rule():
    g = make_graph(4, [(0, 1), (0, 2), (0, 3)])  # degrees 3,1,1,1
    assert apply_rule(("constant", 0), g).tolist() == [0, 0, 0, 0]
    assert apply_rule(("constant", 1), g).tolist() == [1, 1, 1, 1]
    assert apply_rule(("threshold", 2), g).tolist() == [1, 0, 0, 0]
    with pytest.raises(ValueError):
        apply_rule(("nope", 1), g)


def test_meta_test_search_recovers_planted_rule():
    cfg = tiny_cfg()
    params = init_net(cfg, seed=5)
    insts, _ = teacher_instances(cfg, params, range(5), ("threshold", 5))
    rule, loss = meta_test_search(params, insts, cfg, iters=300, seed=1)
    assert loss == pytest.approx(0.0, abs=1e-9)
    # any rule reproducing the planted assignments is acceptable
    planted = [apply_rule(("threshold", 5), i.graph) for i in insts]
    found = [apply_rule(rule, i.graph) for i in insts]
    assert all(np.array_equal(a, b) for a, b in zip(planted, found))


# ---------------------------------------------------------------------------
# Files
# ---------------------------------------------------------------------------


def test_write_assignments_format(tmp_path):
    path = tmp_path / "a.csv"
    write_assignments(path, [("g1", np.array([0, 1])), ("g2", np.array([1]))])
    assert path.read_text() == (
        "graph_id,node,module\ng1,0,0\ng1,1,1\ng2,0,1\n"
    )


def test_rule_round_trip(tmp_path):
    path = tmp_path / "rule.txt"
    for rule in (("threshold", 6), ("constant", 0), ("constant", 1)):
        write_rule(path, rule)
        assert read_rule(path) == rule
    path.write_text("rule=banana\n")
    with pytest.raises(ValueError):
        read_rule(path)
