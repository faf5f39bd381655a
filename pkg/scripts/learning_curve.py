#!/usr/bin/env python3
"""Held-out robust error of the cutting-plane learner as the training set
grows, against the sample-size formula's prediction.

    python3 scripts/learning_curve.py --degree 1 --delta 0.1 --runs 5
"""
import argparse

import numpy as np

from ptfrobust.learner import SUCCESS, robust_learn, sample_size
from ptfrobust.poly import LabeledSet, evaluate_many, sign_pm1
from ptfrobust.boxmax import make_stream


def margin_data(rng, m, w, c, delta):
    X_rows, y_rows = [], []
    need = m
    while need > 0:
        x = rng.uniform(-2, 2, (max(4 * need, 64), len(w)))
        v = x @ w + c
        keep = np.abs(v) >= 2 * delta * np.sum(np.abs(w))
        X_rows.append(x[keep])
        y_rows.append(sign_pm1(v[keep]))
        need = m - sum(len(b) for b in X_rows)
    return LabeledSet(np.vstack(X_rows)[:m], np.concatenate(y_rows)[:m].astype(int))


def robust_error_linear(f, S, delta):
    flip = -S.y * evaluate_many(f.g, S.X) + delta * float(np.sum(np.abs(f.g.b)))
    return float(np.mean((f.classify_many(S.X) != S.y) | (flip > 0)
                         | ((flip == 0) & (S.y == -1))))


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--degree", type=int, default=1, choices=[1])
    ap.add_argument("--delta", type=float, default=0.1)
    ap.add_argument("--runs", type=int, default=5)
    ap.add_argument("--sizes", type=int, nargs="+",
                    default=[25, 100, 400, 1600])
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    m_formula = sample_size(args.degree, 2, epsilon=0.1, eta=0.1)
    print(f"sample-size formula at (epsilon=0.1, eta=0.1): m = {m_formula}")
    rng = make_stream(args.seed, namespace=0xCA11)
    for m in args.sizes + [m_formula]:
        errs = []
        for run in range(args.runs):
            w = rng.uniform(-1, 1, 2)
            while not np.any(w):
                w = rng.uniform(-1, 1, 2)
            c = float(rng.uniform(-0.3, 0.3))
            S = margin_data(rng, m, w, c, args.delta)
            res = robust_learn(S, args.degree, args.delta, seed=97 * run + m)
            if res.status != SUCCESS:
                errs.append(float("nan"))
                continue
            held = margin_data(rng, 2000, w, c, args.delta)
            errs.append(robust_error_linear(res.f, held, args.delta))
        print(f"m = {m:5d}: held-out robust error per run: "
              + " ".join(f"{e:.4f}" for e in errs))


if __name__ == "__main__":
    main()
