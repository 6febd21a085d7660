#!/usr/bin/env python3
"""End-to-end classification demo on a planted two-community graph.

Drives the real CLI (ingest -> walk -> train -> eval classify) for both
walk modes on the same synthetic fixture as the acceptance suite, so the
printed F1 scores line up with the acceptance numbers.

    python scripts/run_sbm_pipeline.py --workdir /tmp/sbm-demo
"""

import argparse
import csv
import json
import os
import sys

from walkforge.cli import main as cli
from walkforge.synth import sbm_stream


def run(argv):
    code = cli(argv)
    if code != 0:
        raise SystemExit(f"command failed ({code}): walkforge {' '.join(argv)}")


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--workdir", default="sbm-demo")
    ap.add_argument("--graph-seed", type=int, default=100)
    ap.add_argument("--seeds", type=int, default=5, help="pipeline seeds to sweep")
    args = ap.parse_args()
    os.makedirs(args.workdir, exist_ok=True)

    rows, labels = sbm_stream(sizes=(30, 30), p_in=0.3, p_out=0.01,
                              seed=args.graph_seed)
    edges = os.path.join(args.workdir, "edges.csv")
    with open(edges, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["src", "dst", "value", "timestamp"])
        writer.writerows(rows)
    labels_csv = os.path.join(args.workdir, "labels.csv")
    with open(labels_csv, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["address", "label"])
        for addr, block in sorted(labels.items()):
            if block == 0:
                writer.writerow([addr, 1])

    graph = os.path.join(args.workdir, "graph.wfg")
    run(["ingest", edges, "--out", graph])

    print(f"{'mode':<9}{'seed':>5}{'accuracy':>10}{'f1':>8}")
    summary = {}
    for mode in ("mh", "uniform"):
        f1s = []
        for seed in range(args.seeds):
            tag = f"{mode}_{seed}"
            corpus = os.path.join(args.workdir, f"corpus_{tag}.wfw")
            emb = os.path.join(args.workdir, f"emb_{tag}.txt")
            report_path = os.path.join(args.workdir, f"report_{tag}.json")
            run(["walk", graph, "--mode", mode, "--h", "2", "--alpha-min", "0.5",
                 "--p", "D_in", "--q", "S", "--n", "3", "--l", "5",
                 "--seed", str(seed), "--out", corpus])
            run(["train", corpus, "--graph", graph, "--dim", "64", "--window", "5",
                 "--epochs", "5", "--negatives", "5", "--seed", str(seed),
                 "--out", emb])
            run(["eval", "classify", "--embeddings", emb, "--labels", labels_csv,
                 "--repeats", "5", "--seed", str(seed), "--out", report_path])
            with open(report_path) as fh:
                report = json.load(fh)
            print(f"{mode:<9}{seed:>5}{report['accuracy']:>10.3f}{report['f1']:>8.3f}")
            f1s.append(report["f1"])
        summary[mode] = f1s
    print()
    for mode, f1s in summary.items():
        print(f"{mode}: mean F1 = {sum(f1s) / len(f1s):.3f} "
              f"(>=0.85 in {sum(1 for x in f1s if x >= 0.85)}/{len(f1s)} seeds)")
    return 0


if __name__ == "__main__":
    sys.exit(main())
