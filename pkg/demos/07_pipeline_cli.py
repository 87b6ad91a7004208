"""Drive the whole pipeline through the CLI in a temporary directory.

corpus -> split -> targets -> train -> eval -> analyze, with the same
arguments the shell entry point takes. Every stage is deterministic under
its seeds, so re-running reproduces every artifact byte for byte.
"""

import tempfile
from pathlib import Path

from graphood.cli import main


def run(argv):
    print("$ graphood " + " ".join(argv))
    assert main(argv) == 0


def demo():
    d = Path(tempfile.mkdtemp(prefix="graphood_"))
    corpus, split = str(d / "c.tsv"), str(d / "split.csv")
    run(["corpus", "--n", "12", "--grid", "8x8", "--seeds", "2",
         "--out", corpus])
    run(["split", "--corpus", corpus, "--groups", "2", "--radius", "0.8",
         "--bins", "12x12", "--group-size", "16", "--out", split])
    run(["targets", "ising", "--corpus", corpus, "--split", split,
         "--method", "exact", "--out-prefix", str(d / "t")])

    cfg = d / "cfg.txt"
    cfg.write_text("task=ising\ndim=8\nsteps=2\nepochs=10\nbatch=8\n")
    run(["train", "--config", str(cfg), "--corpus", corpus, "--split", split,
         "--targets-prefix", str(d / "t"), "--groups", "g1",
         "--out", str(d / "m.ckpt"), "--trace", str(d / "trace.csv")])
    run(["eval", "--config", str(cfg), "--model", str(d / "m.ckpt"),
         "--corpus", corpus, "--split", split,
         "--targets-prefix", str(d / "t"), "--groups", "test",
         "--out-prefix", str(d / "e")])
    run(["analyze", "--losses", str(d / "e.losses.csv"), "--corpus", corpus,
         "--out", str(d / "report.csv")])

    print("\nreport.csv:")
    print((d / "report.csv").read_text())
    print(f"artifacts in {d}")


if __name__ == "__main__":
    demo()
