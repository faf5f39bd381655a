#!/usr/bin/env python3
"""Desk-scale paired comparison of the relaxation attack against PGD.

Trains a small ReLU net on synthetic 2-class data, then for each test point
runs both attacks at a sweep of perturbation budgets and prints the pass/fail
table (PGD-pass vs PGD-fail rows, relaxation-attack success counts per row).

    python3 scripts/run_desk_bench.py --n 6 --k 5 --points 40 --seed 7
"""
import argparse
import json
import sys
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "tests"))

from _netfit import fit_net_sgd

from ptfrobust.attack import FOUND
from ptfrobust.boxmax import derive_seed, make_stream
from ptfrobust.neural import attack_net, pgd_attack
from ptfrobust.poly import sign_pm1


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--n", type=int, default=6)
    ap.add_argument("--k", type=int, default=5)
    ap.add_argument("--points", type=int, default=40)
    ap.add_argument("--deltas", type=float, nargs="+", default=[0.1, 0.3, 0.6])
    ap.add_argument("--alpha", type=float, default=1.0)
    ap.add_argument("--trials", type=int, default=256)
    ap.add_argument("--seed", type=int, default=7)
    ap.add_argument("--out", default=None, help="optional JSON dump of raw results")
    args = ap.parse_args()

    rng = make_stream(args.seed, namespace=0xBE7C)
    X = rng.uniform(-1, 1, (400, args.n))
    y = sign_pm1(X[:, 0] - 0.4 * X[:, 1] + 0.2 * X[:, 2 % args.n])
    net = fit_net_sgd(X, y, k=args.k, steps=600, seed=args.seed)
    test = rng.uniform(-1, 1, (args.points, args.n))

    raw = []
    for delta in args.deltas:
        table = {"pgd_pass": [0, 0], "pgd_fail": [0, 0]}  # [total, sdp succeeds]
        for i, x in enumerate(test):
            if net.margin(x) == 0.0:
                continue
            s = derive_seed(args.seed, i)
            pgd = pgd_attack(net, x, delta, seed=s)
            sdp = attack_net(net, x, delta, seed=s, trials=args.trials, alpha=args.alpha)
            row = "pgd_pass" if pgd.verdict == FOUND else "pgd_fail"
            table[row][0] += 1
            table[row][1] += sdp.verdict == FOUND
            raw.append({"delta": delta, "index": i, "pgd": pgd.verdict,
                        "sdp": sdp.verdict, "sdp_linf": sdp.linf})
        print(f"delta = {delta}")
        for row, (total, succ) in table.items():
            print(f"  {row:9s}: relaxation attack succeeds on {succ} out of {total}")
    if args.out:
        Path(args.out).write_text(json.dumps(raw, indent=1))
        print(f"raw results -> {args.out}")


if __name__ == "__main__":
    main()
