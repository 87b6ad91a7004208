"""Command-line pipeline: corpus -> split -> targets -> train -> eval ->
analyze, plus the meta-learning path. All commands are deterministic under
fixed seeds and exchange data through the documented CSV/TSV formats."""

from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from . import analysis, annealing, embedding, graph_tasks, graphs, ising, model, nn

DEFAULT_GIBBS_SWEEPS = 20000
DEFAULT_GIBBS_BURN_IN = 1000


class CliError(Exception):
    pass


def _atomic_write(path, writer):
    tmp = f"{path}.tmp"
    writer(tmp)
    os.replace(tmp, path)


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------

def cmd_corpus(args):
    n = args.n
    gk, gp = _parse_grid(args.grid)
    ks = np.linspace(2, n - 2, gk)
    ps = np.linspace(0, 1, gp) ** 2  # denser sampling at small p
    records = []
    meas = []
    gid = 0
    for ki, k in enumerate(ks):
        for pi, p in enumerate(ps):
            for s in range(args.seeds):
                seed = args.seed + gid
                params = graphs.GenParams(n=n, k=float(k), p=float(p), seed=seed)
                g = graphs.generate(params)
                records.append((str(gid), params, g))
                meas.append((str(gid), graphs.measures(g)))
                gid += 1
    _atomic_write(args.out, lambda p_: graphs.write_corpus(p_, records))
    measures_out = args.measures_out or _default_measures_path(args.out)
    _atomic_write(measures_out, lambda p_: graphs.write_measures(p_, meas))
    print(f"corpus: wrote {gid} graphs to {args.out}")


def _default_measures_path(corpus_path):
    base, _ = os.path.splitext(corpus_path)
    return base + ".measures.csv"


def cmd_split(args):
    corpus = graphs.read_corpus(args.corpus)
    measures_path = args.measures or _default_measures_path(args.corpus)
    meas = graphs.read_measures(measures_path)
    ids = [gid for gid, _ in meas]
    X = np.stack([m.vector() for _, m in meas])
    pca = embedding.fit_pca(X)
    pts = embedding.project(pca, X)

    if args.centers:
        centers = [
            tuple(float(v) for v in c.split(","))
            for c in args.centers.split(";")
        ]
    else:
        centers = embedding.default_centers(pts, args.groups)
    rows_bins = _parse_grid(args.bins)

    by_id = {gid: g for gid, _, g in corpus}
    keys = [graphs.iso_key(by_id[gid]) for gid in ids]
    spec = embedding.SplitSpec(
        centers=centers,
        radius=args.radius,
        test_bins=rows_bins,
        group_size=args.group_size,
    )
    groups = embedding.select_groups(pts, spec, keys, seed=args.seed)
    test_idx = embedding.subsample_test(pts, rows_bins, seed=args.seed + 1)

    rows = []
    for ci, members in enumerate(groups):
        for idx, fs in members:
            rows.append(
                (f"g{ci + 1}", ids[idx], pts[idx, 0], pts[idx, 1], fs)
            )
    rng = np.random.default_rng(args.seed + 2)
    for idx in test_idx:
        rows.append(
            ("test", ids[idx], pts[idx, 0], pts[idx, 1], int(rng.integers(2**31)))
        )
    _atomic_write(args.out, lambda p_: embedding.write_split(p_, rows))
    print(
        f"split: {len(groups)} groups x {spec.group_size}, "
        f"{len(test_idx)} test graphs -> {args.out}"
    )


def cmd_targets(args):
    corpus = {gid: g for gid, _, g in graphs.read_corpus(args.corpus)}
    split_rows = embedding.read_split(args.split)
    if args.task == "ising":
        rows = []
        for group, gid, _, _, fs in split_rows:
            g = corpus[gid]
            m = ising.sample_model(g, fs)
            if args.method == "exact":
                marg = ising.exact_marginals(m)
            else:
                marg = ising.gibbs_marginals(
                    m, args.sweeps, args.burn_in, seed=fs + 1
                )
            rows.append((gid, fs, m, marg))
        ising.write_ising_targets(
            f"{args.out_prefix}.marginals.csv",
            f"{args.out_prefix}.couplings.csv",
            rows,
        )
        print(f"targets ising: {len(rows)} instances -> {args.out_prefix}.*")
    else:
        rows = []
        for group, gid, _, _, fs in split_rows:
            g = corpus[gid]
            feats = graph_tasks.make_features(g, fs)
            rows.append((gid, fs, graph_tasks.multitask_target(g, feats)))
        graph_tasks.write_gtheory_targets(
            f"{args.out_prefix}.nodes.csv",
            f"{args.out_prefix}.graphs.csv",
            rows,
        )
        print(f"targets gtheory: {len(rows)} instances -> {args.out_prefix}.*")


def read_train_config(path) -> dict:
    cfg = {}
    with open(path) as f:
        for ln, line in enumerate(f, 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise CliError(f"{path}:{ln}: expected key=value")
            k, v = line.split("=", 1)
            cfg[k.strip()] = v.strip()
    return cfg


UPDATE_NAMES = {
    "single": "single",
    "sigmoid": "sigmoid_gate",
    "binary": "binary_gate",
    "assigned": "assigned",
}


def config_from_file(path) -> tuple:
    """Parse a key=value training config; returns (ProcessorConfig, opts)."""
    raw = read_train_config(path)
    task = raw.get("task", "ising")
    base = model.ising_config() if task == "ising" else model.gtheory_config()
    cfg = model.ProcessorConfig(
        task=task,
        hidden_dim=int(raw.get("dim", base.hidden_dim)),
        layers=int(raw.get("layers", base.layers)),
        steps=int(raw.get("steps", base.steps)),
        aggregation=raw.get("agg", base.aggregation),
        attention=bool(int(raw.get("attention", int(base.attention)))),
        update=UPDATE_NAMES.get(raw.get("update", "single")),
        tau=float(raw.get("tau", 1.0)),
    )
    if cfg.update is None:
        raise CliError(f"unknown update strategy in {path}")
    cfg.validate()
    defaults = model.TRAIN_DEFAULTS[task]
    opts = dict(
        lr=float(raw.get("lr", defaults["lr"])),
        batch_size=int(raw.get("batch", defaults["batch_size"])),
        epochs=int(raw.get("epochs", defaults["epochs"])),
        weight_decay=float(raw.get("weight_decay", defaults["weight_decay"])),
        seed=int(raw.get("seed", 0)),
    )
    return cfg, opts


def load_instances(corpus_path, split_path, targets_prefix, task, groups):
    """Assemble featurized instances for the requested split groups."""
    corpus = {gid: g for gid, _, g in graphs.read_corpus(corpus_path)}
    split_rows = embedding.read_split(split_path)
    wanted = [r for r in split_rows if r[0] in groups]
    if not wanted:
        raise CliError(f"no split rows for groups {sorted(groups)}")
    instances = []
    points = []
    if task == "ising":
        data = ising.read_ising_targets(
            f"{targets_prefix}.marginals.csv", f"{targets_prefix}.couplings.csv"
        )
        for group, gid, pc1, pc2, fs in wanted:
            b, p_plus, j_rows = data[(gid, fs)]
            g = corpus[gid]
            jmap = {(i, j): J for i, j, J in j_rows}
            J = np.array([jmap[e] for e in sorted(g.edges)])
            instances.append(
                model.IsingInstance(graph=g, b=b, J=J, target=p_plus, graph_id=gid)
            )
            points.append((pc1, pc2))
    else:
        data = graph_tasks.read_gtheory_targets(
            f"{targets_prefix}.nodes.csv", f"{targets_prefix}.graphs.csv"
        )
        for group, gid, pc1, pc2, fs in wanted:
            g = corpus[gid]
            feats = graph_tasks.make_features(g, fs)
            instances.append(
                model.GTheoryInstance(
                    graph=g, feats=feats, target=data[(gid, fs)], graph_id=gid
                )
            )
            points.append((pc1, pc2))
    return instances, points


def cmd_train(args):
    cfg, opts = config_from_file(args.config)
    groups = set(args.groups.split(","))
    dataset, _ = load_instances(
        args.corpus, args.split, args.targets_prefix, cfg.task, groups
    )
    norm = model.TaskNorm.fit(dataset) if cfg.task == "gtheory" else None
    params, trace = model.train(
        dataset,
        cfg,
        seed=opts["seed"],
        epochs=opts["epochs"],
        lr=opts["lr"],
        batch_size=opts["batch_size"],
        weight_decay=opts["weight_decay"],
        norm=norm,
    )
    _atomic_write(args.out, lambda p_: nn.save_params(p_, params))
    if args.trace:
        _atomic_write(args.trace, lambda p_: _write_trace(p_, trace))
    print(f"train: final loss {trace[-1][1]:.6g} -> {args.out}")


def _write_trace(path, trace):
    with open(path, "w") as f:
        f.write("epoch,train_loss,val_loss\n")
        for epoch, tr, vl in trace:
            vls = "" if not np.isfinite(vl) else repr(vl)
            f.write(f"{epoch},{tr!r},{vls}\n")


def cmd_meta(args):
    cfg, opts = config_from_file(args.config)
    cfg.update = "assigned"
    groups = set(args.groups.split(","))
    dataset, _ = load_instances(
        args.corpus, args.split, args.targets_prefix, cfg.task, groups
    )
    norm = model.TaskNorm.fit(dataset) if cfg.task == "gtheory" else None
    # 50/50 inner/outer split by position (featurizations alternate)
    train_half = dataset[0::2]
    test_half = dataset[1::2]
    m = min(len(train_half), len(test_half))
    result = annealing.meta_train(
        train_half[:m],
        test_half[:m],
        cfg,
        seed=opts["seed"],
        epochs=opts["epochs"],
        lr=opts["lr"],
        weight_decay=opts["weight_decay"],
        norm=norm,
    )
    _atomic_write(args.out, lambda p_: nn.save_params(p_, result.params))
    if args.assignments:
        rows = [
            (inst.graph_id, a)
            for inst, a in zip(train_half[:m], result.assignments)
        ]
        _atomic_write(
            args.assignments, lambda p_: annealing.write_assignments(p_, rows)
        )
    few = train_half[: args.few_shot]
    rule, rule_loss = annealing.meta_test_search(
        result.params, few, cfg, iters=args.rule_iters,
        seed=opts["seed"] + 7, norm=norm,
    )
    _atomic_write(args.rule, lambda p_: annealing.write_rule(p_, rule))
    print(f"meta: rule {rule} (loss {rule_loss:.6g}) -> {args.rule}")


def evaluate_instances(params, cfg, instances, points, norm=None, rule=None, seed=0):
    """Per-graph losses in evaluation batches; returns list of EvalResult."""
    rng = np.random.default_rng(seed)
    results = []
    bs = 64
    for lo in range(0, len(instances), bs):
        chunk = instances[lo : lo + bs]
        batch = model.make_batch(chunk, norm=norm)
        assignment = None
        if cfg.update == "assigned":
            if rule is None:
                raise CliError("assigned update needs a meta-test rule")
            assignment = np.concatenate(
                [annealing.apply_rule(rule, inst.graph) for inst in chunk]
            )
        _, per_graph = model.compute_loss(
            params, batch, cfg, rng=rng, assignment=assignment, tau=cfg.tau_min
        )
        for inst, pt, loss in zip(chunk, points[lo : lo + bs], per_graph):
            results.append(
                analysis.EvalResult(
                    graph_id=inst.graph_id,
                    point=tuple(pt),
                    loss=float(loss),
                    graph=inst.graph,
                )
            )
    return results


def cmd_eval(args):
    cfg, opts = config_from_file(args.config)
    params = nn.load_params(args.model)
    groups = set(args.groups.split(","))
    instances, points = load_instances(
        args.corpus, args.split, args.targets_prefix, cfg.task, groups
    )
    if not instances:
        raise CliError("empty evaluation split")
    norm = None
    if cfg.task == "gtheory":
        train_groups = set(args.norm_groups.split(",")) if args.norm_groups else groups
        train_ds, _ = load_instances(
            args.corpus, args.split, args.targets_prefix, cfg.task, train_groups
        )
        norm = model.TaskNorm.fit(train_ds)
    rule = annealing.read_rule(args.rule) if args.rule else None
    results = evaluate_instances(
        params, cfg, instances, points, norm=norm, rule=rule, seed=opts["seed"]
    )
    _atomic_write(
        f"{args.out_prefix}.losses.csv", lambda p_: _write_losses(p_, results)
    )
    grid = analysis.heatmap(results, rows=args.grid_rows, cols=args.grid_cols)
    _atomic_write(
        f"{args.out_prefix}.grid.csv", lambda p_: analysis.write_grid_csv(p_, grid)
    )
    _atomic_write(f"{args.out_prefix}.pgm", lambda p_: analysis.write_pgm(p_, grid))
    print(f"eval: {len(results)} graphs -> {args.out_prefix}.*")


def _write_losses(path, results):
    with open(path, "w") as f:
        f.write("graph_id,pc1,pc2,loss\n")
        for r in results:
            f.write(f"{r.graph_id},{r.point[0]!r},{r.point[1]!r},{r.loss!r}\n")


def read_losses(path):
    out = []
    with open(path) as f:
        header = f.readline().strip()
        if header != "graph_id,pc1,pc2,loss":
            raise ValueError(f"{path}: unexpected header")
        for line in f:
            gid, pc1, pc2, loss = line.strip().split(",")
            out.append((gid, float(pc1), float(pc2), float(loss)))
    return out


def cmd_analyze(args):
    rows = read_losses(args.losses)
    corpus = {gid: g for gid, _, g in graphs.read_corpus(args.corpus)}
    results = [
        analysis.EvalResult(
            graph_id=gid, point=(pc1, pc2), loss=loss, graph=corpus[gid]
        )
        for gid, pc1, pc2, loss in rows
    ]
    report = analysis.valley_mode_report(
        results, fraction=args.fraction, bandwidth=args.bandwidth
    )
    metrics = {
        "loss_valley_1": report.valley_losses[0],
        "loss_valley_2": report.valley_losses[1],
        "nodes_mode_1": report.mode_counts[0],
        "nodes_mode_2": report.mode_counts[1],
    }
    if args.model and args.config:
        cfg, opts = config_from_file(args.config)
        params = nn.load_params(args.model)
        instances, points = load_instances(
            args.corpus, args.split, args.targets_prefix, cfg.task,
            set(args.groups.split(",")),
        )
        norm = model.TaskNorm.fit(instances) if cfg.task == "gtheory" else None
        batches = [
            model.make_batch(instances[lo : lo + 64], norm=norm)
            for lo in range(0, len(instances), 64)
        ]
        assignments = None
        if cfg.update == "assigned":
            rule = annealing.read_rule(args.rule)
            assignments = [
                np.concatenate([annealing.apply_rule(rule, g) for g in b.graphs])
                for b in batches
            ]
        stats = model.collect_message_stats(
            params, batches, cfg,
            rng=np.random.default_rng(opts["seed"]), assignments=assignments,
        )
        metrics["msg_mean_magnitude"] = stats.mean_magnitude
        metrics["msg_cov_trace"] = stats.cov_trace
    _atomic_write(args.out, lambda p_: analysis.write_report(p_, metrics))
    print(f"analyze: report -> {args.out}")


# ---------------------------------------------------------------------------
# Argument parsing
# ---------------------------------------------------------------------------

def _parse_grid(s):
    try:
        a, b = s.lower().split("x")
        return int(a), int(b)
    except ValueError as e:
        raise CliError(f"bad grid spec {s!r}, expected RxC") from e


def build_parser():
    p = argparse.ArgumentParser(
        prog="graphood",
        description="Random-graph OOD benchmark pipeline",
    )
    sub = p.add_subparsers(dest="command", required=True)

    c = sub.add_parser("corpus", help="generate a graph corpus over a (k, p) grid")
    c.add_argument("--n", type=int, required=True)
    c.add_argument("--grid", default="300x300", help="k-grid x p-grid, e.g. 60x60")
    c.add_argument("--seeds", type=int, default=40)
    c.add_argument("--seed", type=int, default=0, help="base RNG seed")
    c.add_argument("--out", required=True)
    c.add_argument("--measures-out", default=None)
    c.set_defaults(func=cmd_corpus)

    s = sub.add_parser("split", help="PCA embedding, training circles, test bins")
    s.add_argument("--corpus", required=True)
    s.add_argument("--measures", default=None)
    s.add_argument("--centers", default=None, help='"x1,y1;x2,y2;..."')
    s.add_argument("--groups", type=int, default=5)
    s.add_argument("--radius", type=float, default=0.5)
    s.add_argument("--bins", default="250x250")
    s.add_argument("--group-size", type=int, default=1000)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_split)

    t = sub.add_parser("targets", help="ground-truth target generation")
    t.add_argument("task", choices=["ising", "gtheory"])
    t.add_argument("--corpus", required=True)
    t.add_argument("--split", required=True)
    t.add_argument("--method", choices=["exact", "gibbs"], default="exact")
    t.add_argument("--sweeps", type=int, default=DEFAULT_GIBBS_SWEEPS)
    t.add_argument("--burn-in", type=int, default=DEFAULT_GIBBS_BURN_IN)
    t.add_argument("--seed", type=int, default=0)
    t.add_argument("--out-prefix", required=True)
    t.set_defaults(func=cmd_targets)

    tr = sub.add_parser("train", help="train a message-passing model")
    tr.add_argument("--config", required=True, help="key=value training config")
    tr.add_argument("--corpus", required=True)
    tr.add_argument("--split", required=True)
    tr.add_argument("--targets-prefix", required=True)
    tr.add_argument("--groups", default="g1")
    tr.add_argument("--out", required=True)
    tr.add_argument("--trace", default=None)
    tr.set_defaults(func=cmd_train)

    mt = sub.add_parser("meta", help="BounceGrad meta-training + rule search")
    mt.add_argument("--config", required=True)
    mt.add_argument("--corpus", required=True)
    mt.add_argument("--split", required=True)
    mt.add_argument("--targets-prefix", required=True)
    mt.add_argument("--groups", default="g1")
    mt.add_argument("--few-shot", type=int, default=5)
    mt.add_argument("--rule-iters", type=int, default=1000)
    mt.add_argument("--out", required=True)
    mt.add_argument("--assignments", default=None)
    mt.add_argument("--rule", required=True)
    mt.set_defaults(func=cmd_meta)

    ev = sub.add_parser("eval", help="per-graph losses, grid CSV, PGM image")
    ev.add_argument("--config", required=True)
    ev.add_argument("--model", required=True)
    ev.add_argument("--corpus", required=True)
    ev.add_argument("--split", required=True)
    ev.add_argument("--targets-prefix", required=True)
    ev.add_argument("--groups", default="test")
    ev.add_argument("--norm-groups", default=None)
    ev.add_argument("--rule", default=None)
    ev.add_argument("--grid-rows", type=int, default=30)
    ev.add_argument("--grid-cols", type=int, default=30)
    ev.add_argument("--out-prefix", required=True)
    ev.set_defaults(func=cmd_eval)

    an = sub.add_parser("analyze", help="valley/mode report (+ message stats)")
    an.add_argument("--losses", required=True)
    an.add_argument("--corpus", required=True)
    an.add_argument("--fraction", type=float, default=0.4)
    an.add_argument("--bandwidth", type=float, default=0.15)
    an.add_argument("--model", default=None)
    an.add_argument("--config", default=None)
    an.add_argument("--split", default=None)
    an.add_argument("--targets-prefix", default=None)
    an.add_argument("--groups", default="test")
    an.add_argument("--rule", default=None)
    an.add_argument("--out", required=True)
    an.set_defaults(func=cmd_analyze)

    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        args.func(args)
    except (CliError, FileNotFoundError, ValueError, KeyError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
