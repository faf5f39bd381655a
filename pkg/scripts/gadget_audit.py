#!/usr/bin/env python3
"""Generate hardness gadgets across seeds and audit every structural claim:
point counts, zero plain error of the intended classifier, per-point
robustness (exact oracle on the multilinear forms), pair separation, and the
rank/null-space property of the uniqueness system.

    python3 scripts/gadget_audit.py --seeds 10
"""
import argparse

import numpy as np

from ptfrobust import hardness
from ptfrobust.boxmax import make_stream


def rand_qp(rng, n):
    A = np.triu(rng.uniform(0.5, 1.5, (n, n)) * rng.choice([-1.0, 1.0], (n, n)), 1)
    return A + A.T


def audit_main(rng, seed):
    inst = hardness.gen_main_gadget(rand_qp(rng, 2), s=120.0 + 10 * seed)
    robust, bad = hardness.verify_robustness(inst)
    return {
        "kind": "main", "seed": seed, "points": len(inst.S),
        "counts": hardness.verify_counts(inst),
        "zero_error": hardness.verify_zero_plain_error(inst),
        "yes_case": inst.params["yes_case"],
        "robust": robust, "robust_failures": bad,
    }


def audit_appendix(rng, seed):
    inst = hardness.gen_appendix_gadget(rand_qp(rng, 2), beta=6.0, delta=0.125,
                                        m=12, seed=seed)
    robust, bad = hardness.verify_robustness(inst)
    rank = hardness.verify_uniqueness_rank(inst)
    return {
        "kind": "appendix", "seed": seed, "points": len(inst.S),
        "counts": hardness.verify_counts(inst),
        "zero_error": hardness.verify_zero_plain_error(inst),
        "event": inst.event_holds,
        "pair_separation": hardness.verify_pair_separation(inst),
        "robust": robust, "robust_failures": bad,
        "rank_ok": rank.ok, "rank": rank.numerical_rank, "cos": rank.null_cosine,
    }


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seeds", type=int, default=10)
    args = ap.parse_args()
    rng = make_stream(0, namespace=0xAD17)
    rows = []
    for seed in range(args.seeds):
        rows.append(audit_main(rng, seed))
        rows.append(audit_appendix(rng, seed))
    all_ok = True
    for row in rows:
        core = {k: v for k, v in row.items() if isinstance(v, bool)}
        # robustness of the intended classifier is only claimed for YES-case
        # main gadgets and event-satisfying appendix gadgets
        claimed = dict(core)
        if row["kind"] == "main" and not row["yes_case"]:
            claimed.pop("robust")
        if row["kind"] == "appendix" and not row["event"]:
            claimed.pop("robust")
        ok = all(claimed.values())
        all_ok &= ok
        flags = " ".join(f"{k}={'Y' if v else 'N'}" for k, v in core.items())
        print(f"{row['kind']:8s} seed={row['seed']:2d} pts={row['points']:3d} {flags}"
              f"{'' if ok else '  <-- CHECK'}")
    print("all audited claims hold" if all_ok else "AUDIT FAILURES above")
    return 0 if all_ok else 1


if __name__ == "__main__":
    raise SystemExit(main())
