"""Command-line interface: attacks, certification, learning, gadgets, bench.

All commands are deterministic given (inputs, flags, seed). Reports are
versioned JSON with the effective configuration echoed back, floats rounded
to 12 significant digits (so byte-identity holds across platforms up to the
inherently non-reproducible wall-clock timings), and are validated against
their schema and written atomically: a failing run leaves no partial report.

Exit codes: 0 success, 1 a verification check failed, 2 validation error
(bad flags or malformed inputs), 3 solver non-convergence.
"""
from __future__ import annotations

import argparse
import json
import math
import os
import sys
import time

import numpy as np

from . import boxmax, hardness, learner, neural
from .attack import CERTIFIED, FOUND, UNKNOWN, batch_attack
from .poly import LabeledSet, PtfClassifier
from .neural import TwoLayerNet

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_VALIDATION = 2
EXIT_SOLVER = 3

_OUTCOME_SCHEMA = {
    "type": "object",
    "required": ["index", "verdict", "linf", "margin", "gamma_used"],
    "properties": {
        "index": {"type": "integer"},
        "verdict": {"enum": [FOUND, CERTIFIED, UNKNOWN, "error"]},
        "z": {"type": ["array", "null"]},
        "linf": {"type": "number"},
        "margin": {"type": "number"},
        "certificate_value": {"type": ["number", "null"]},
        "gamma_used": {"type": "number"},
        "error": {"type": ["string", "null"]},
    },
}

SCHEMAS = {
    "attack-report/1": {
        "type": "object",
        "required": ["schema", "command", "config", "seed", "summary", "results", "timings"],
        "properties": {
            "schema": {"const": "attack-report/1"},
            "command": {"type": "string"},
            "config": {"type": "object"},
            "seed": {"type": "integer"},
            "summary": {"type": "object"},
            "results": {"type": "array", "items": _OUTCOME_SCHEMA},
            "timings": {"type": "object"},
        },
    },
    "bench-report/1": {
        "type": "object",
        "required": ["schema", "command", "config", "seed", "table", "results", "timings"],
        "properties": {
            "schema": {"const": "bench-report/1"},
            "table": {"type": "object"},
            "results": {"type": "array"},
            "timings": {"type": "object"},
        },
    },
    "gadget-verify-report/1": {
        "type": "object",
        "required": ["schema", "command", "config", "checks", "passed", "timings"],
        "properties": {
            "schema": {"const": "gadget-verify-report/1"},
            "checks": {"type": "object"},
            "passed": {"type": "boolean"},
        },
    },
    "sample-size-report/1": {
        "type": "object",
        "required": ["schema", "command", "config", "m"],
        "properties": {"m": {"type": "integer"}},
    },
    "learn-report/1": {
        "type": "object",
        "required": ["schema", "command", "config", "seed", "status", "timings"],
        "properties": {
            "status": {"type": "string"},
            "model": {"type": ["object", "null"]},
        },
    },
}


class ValidationFailure(Exception):
    pass


def round_sig(x: float, sig: int = 12) -> float:
    if x == 0 or not math.isfinite(x):
        return x
    return float(f"{x:.{sig}g}")


def round_floats(obj, sig: int = 12):
    if isinstance(obj, float):
        return round_sig(obj, sig)
    if isinstance(obj, dict):
        return {k: round_floats(v, sig) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [round_floats(v, sig) for v in obj]
    return obj


def write_report(path: str, report: dict) -> None:
    import jsonschema

    jsonschema.validate(report, SCHEMAS[report["schema"]])
    text = json.dumps(round_floats(report), sort_keys=True, indent=1)
    tmp = f"{path}.tmp"
    with open(tmp, "w") as fh:
        fh.write(text + "\n")
    os.replace(tmp, path)


def _load_model(path: str) -> PtfClassifier:
    with open(path) as fh:
        return PtfClassifier.from_dict(json.load(fh))


def _load_net(path: str) -> TwoLayerNet:
    with open(path) as fh:
        return TwoLayerNet.from_dict(json.load(fh))


def _load_data(path: str, delta=None) -> LabeledSet:
    return LabeledSet.load_csv(path, delta=delta)


def _default_jobs() -> int:
    return int(os.environ.get("PTFROBUST_JOBS", "1"))


def _config_dict(args, keys) -> dict:
    return {k: getattr(args, k) for k in keys if getattr(args, k, None) is not None}


def _outcome_record(i: int, out, err: str | None) -> dict:
    if out is None:
        return {"index": i, "verdict": "error", "z": None, "linf": 0.0, "margin": 0.0,
                "certificate_value": None, "gamma_used": 1.0, "error": err}
    d = out.to_dict()
    d["index"] = i
    d["error"] = err
    return d


def cmd_attack(args) -> int:
    f = _load_model(args.model)
    S = _load_data(args.data, delta=args.delta)
    t0 = time.monotonic()
    outcomes, errors, summary = batch_attack(
        f, S, args.delta, eta=args.eta, seed=args.seed, mode=args.mode, jobs=args.jobs
    )
    report = {
        "schema": "attack-report/1",
        "command": args.command,
        "config": _config_dict(args, ("model", "data", "delta", "eta", "mode", "jobs")),
        "seed": args.seed,
        "summary": summary.to_dict(),
        "results": [_outcome_record(i, o, e) for i, (o, e) in enumerate(zip(outcomes, errors))],
        "timings": {"wall_clock_s": time.monotonic() - t0},
    }
    write_report(args.out, report)
    print(f"found={summary.found} certified={summary.certified} "
          f"unknown={summary.unknown} errors={summary.errors}")
    return EXIT_OK


def _attack_net_one(task):
    net, x, delta, seed_i, trials, alpha, i = task
    try:
        out = neural.attack_net(net, x, delta, seed=seed_i, trials=trials, alpha=alpha)
        return i, out, None
    except (neural.AmbiguousLabel, boxmax.SolverError) as e:
        return i, None, str(e)


def cmd_attack_net(args) -> int:
    net = _load_net(args.model)
    S = _load_data(args.data, delta=args.delta)
    t0 = time.monotonic()
    results = []
    counts = {FOUND: 0, CERTIFIED: 0, UNKNOWN: 0, "error": 0}
    tasks = [
        (net, S.X[i], args.delta, boxmax.derive_seed(args.seed, i),
         args.trials, args.alpha, i)
        for i in range(len(S))
    ]
    if args.jobs and args.jobs > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=args.jobs) as ex:
            processed = list(ex.map(_attack_net_one, tasks))
    else:
        processed = [_attack_net_one(t) for t in tasks]
    for i, out, err in processed:
        if out is None:
            results.append(_outcome_record(i, None, err))
            counts["error"] += 1
        else:
            results.append(_outcome_record(i, out, None))
            counts[out.verdict] += 1
    report = {
        "schema": "attack-report/1",
        "command": "attack-net",
        "config": _config_dict(args, ("model", "data", "delta", "alpha", "trials", "jobs")),
        "seed": args.seed,
        "summary": {"total": len(S), "found": counts[FOUND], "certified": counts[CERTIFIED],
                    "unknown": counts[UNKNOWN], "errors": counts["error"],
                    "delta": args.delta, "alpha": args.alpha},
        "results": results,
        "timings": {"wall_clock_s": time.monotonic() - t0},
    }
    write_report(args.out, report)
    print(f"found={counts[FOUND]} certified={counts[CERTIFIED]} unknown={counts[UNKNOWN]}")
    return EXIT_OK


def cmd_learn(args) -> int:
    S = _load_data(args.data, delta=args.delta)
    t0 = time.monotonic()
    res = learner.robust_learn(S, args.degree, args.delta, epsilon=args.epsilon,
                               eta=args.eta, seed=args.seed, engine=args.engine)
    transcript_path = args.transcript or (args.out + ".transcript.jsonl")
    with open(transcript_path, "w") as fh:
        for entry in res.transcript:
            fh.write(json.dumps(round_floats(entry), sort_keys=True) + "\n")
    report = {
        "schema": "learn-report/1",
        "command": "learn",
        "config": _config_dict(args, ("data", "degree", "delta", "epsilon", "eta", "engine")),
        "seed": args.seed,
        "status": res.status,
        "achieved_gamma": res.achieved_gamma,
        "train_robust_error": res.train_robust_error_at_delta_over_gamma,
        "oracle_calls": res.oracle_calls,
        "iterations": res.iterations,
        "model": res.f.to_dict() if res.f is not None else None,
        "timings": {"wall_clock_s": time.monotonic() - t0},
    }
    write_report(args.out + ".report.json", report)
    if res.f is not None:
        with open(args.out, "w") as fh:
            json.dump(round_floats(res.f.to_dict(), sig=17), fh, sort_keys=True)
    print(f"status={res.status} gamma={res.achieved_gamma:.4f} "
          f"iterations={res.iterations} oracle_calls={res.oracle_calls}")
    return EXIT_OK if res.status == learner.SUCCESS else EXIT_CHECK_FAILED


def cmd_gen_gadget(args) -> int:
    rng = boxmax.make_stream(args.seed, namespace=0x900)
    n = args.n
    A = np.triu(rng.uniform(0.5, 1.5, (n, n)) * rng.choice([-1.0, 1.0], (n, n)), 1)
    A = A + A.T
    if args.kind == "main":
        inst = hardness.gen_main_gadget(A, s=args.s)
    elif args.kind == "appendix":
        inst = hardness.gen_appendix_gadget(A, beta=args.beta, delta=args.delta,
                                            m=args.m, seed=args.seed)
    elif args.kind == "redundant":
        inst = hardness.gen_redundant_gadget(A, beta=args.beta, delta=args.delta,
                                             seed=args.seed, jitter=args.jitter)
    else:
        raise ValidationFailure(f"unknown gadget kind {args.kind!r}")
    with open(args.out, "w") as fh:
        json.dump(inst.to_dict(), fh, sort_keys=True)
    print(f"kind={inst.kind} points={len(inst.S)} delta={inst.delta}")
    return EXIT_OK


def cmd_verify_gadget(args) -> int:
    with open(getattr(args, "in")) as fh:
        inst = hardness.GadgetInstance.from_dict(json.load(fh))
    t0 = time.monotonic()
    checks: dict[str, object] = {}
    wanted = args.check.split(",") if args.check != "all" else ["counts", "robustness", "rank"]
    for check in wanted:
        if check == "counts":
            checks["counts"] = hardness.verify_counts(inst)
            checks["zero_plain_error"] = hardness.verify_zero_plain_error(inst)
            if inst.kind in (hardness.APPENDIX, hardness.REDUNDANT):
                checks["pair_separation"] = hardness.verify_pair_separation(inst)
        elif check == "robustness":
            ok, bad = hardness.verify_robustness(inst)
            checks["robustness"] = ok
            checks["robustness_failures"] = bad
        elif check == "rank":
            if inst.kind == hardness.MAIN:
                raise ValidationFailure("rank check applies to sampled gadgets only")
            rep = hardness.verify_uniqueness_rank(inst)
            checks["rank"] = rep.ok
            checks["numerical_rank"] = rep.numerical_rank
            checks["expected_rank"] = rep.expected_rank
            checks["null_cosine"] = rep.null_cosine
        else:
            raise ValidationFailure(f"unknown check {check!r}")
    passed = all(v for k, v in checks.items() if isinstance(v, bool))
    report = {
        "schema": "gadget-verify-report/1",
        "command": "verify-gadget",
        "config": {"in": getattr(args, "in"), "check": args.check},
        "checks": checks,
        "passed": passed,
        "timings": {"wall_clock_s": time.monotonic() - t0},
    }
    if args.out:
        write_report(args.out, report)
    print(json.dumps(round_floats(checks), sort_keys=True))
    return EXIT_OK if passed else EXIT_CHECK_FAILED


def cmd_bench(args) -> int:
    net = _load_net(args.model)
    S = _load_data(args.data, delta=args.delta)
    t0 = time.monotonic()
    results = []
    table = {"pgd_pass": {"total": 0, "sdp_succeeds": 0},
             "pgd_fail": {"total": 0, "sdp_succeeds": 0}}
    for i in range(len(S)):
        seed_i = boxmax.derive_seed(args.seed, i)
        try:
            pgd = neural.pgd_attack(net, S.X[i], args.delta, seed=seed_i,
                                    steps=args.steps, restarts=args.restarts)
            sdp = neural.attack_net(net, S.X[i], args.delta, seed=seed_i,
                                    trials=args.trials, alpha=args.alpha)
        except (neural.AmbiguousLabel, boxmax.SolverError) as e:
            results.append({"index": i, "error": str(e)})
            continue
        bucket = "pgd_pass" if pgd.verdict == FOUND else "pgd_fail"
        table[bucket]["total"] += 1
        table[bucket]["sdp_succeeds"] += int(sdp.verdict == FOUND)
        results.append({"index": i, "pgd": pgd.verdict, "sdp": sdp.verdict,
                        "pgd_margin": pgd.margin, "sdp_margin": sdp.margin})
    report = {
        "schema": "bench-report/1",
        "command": "bench",
        "config": _config_dict(args, ("model", "data", "delta", "alpha", "trials",
                                      "steps", "restarts")),
        "seed": args.seed,
        "table": table,
        "results": results,
        "timings": {"wall_clock_s": time.monotonic() - t0},
    }
    write_report(args.out, report)
    print(json.dumps(table))
    return EXIT_OK


def cmd_sample_size(args) -> int:
    m = learner.sample_size(args.degree, args.n, args.epsilon, args.eta)
    if args.out:
        write_report(args.out, {
            "schema": "sample-size-report/1",
            "command": "sample-size",
            "config": _config_dict(args, ("degree", "n", "epsilon", "eta")),
            "m": m,
        })
    print(m)
    return EXIT_OK


def cmd_plot(args) -> int:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    with open(getattr(args, "in")) as fh:
        report = json.load(fh)
    fig, ax = plt.subplots(figsize=(7, 4))
    if report.get("schema") == "bench-report/1":
        table = report["table"]
        keys = list(table)
        totals = [table[k]["total"] for k in keys]
        succ = [table[k]["sdp_succeeds"] for k in keys]
        xs = np.arange(len(keys))
        ax.bar(xs - 0.2, totals, width=0.4, label="total")
        ax.bar(xs + 0.2, succ, width=0.4, label="relaxation attack succeeds")
        ax.set_xticks(xs, keys)
        ax.set_ylabel("examples")
        ax.legend()
    else:
        colors = {FOUND: "tab:red", CERTIFIED: "tab:green", UNKNOWN: "tab:gray",
                  "error": "tab:orange"}
        for verdict, col in colors.items():
            pts = [(r["index"], r["margin"]) for r in report["results"]
                   if r["verdict"] == verdict]
            if pts:
                ax.scatter(*zip(*pts), s=14, c=col, label=verdict)
        ax.axhline(0.0, color="k", lw=0.6)
        ax.set_xlabel("example index")
        ax.set_ylabel("achieved flip margin")
        ax.legend()
    fig.tight_layout()
    fig.savefig(args.out, format="svg")
    print(args.out)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="ptfrobust", description=__doc__)
    p.add_argument("--config", help="JSON file with default flag values "
                                    "(precedence: flags > config > defaults)")
    sub = p.add_subparsers(dest="command", required=True)

    def add_common(q, with_out=True):
        q.add_argument("--seed", type=int, default=0)
        if with_out:
            q.add_argument("--out", required=True)

    q = sub.add_parser("attack", help="per-point PTF attack / certification")
    q.add_argument("--model", required=True)
    q.add_argument("--data", required=True)
    q.add_argument("--delta", type=float, required=True)
    q.add_argument("--eta", type=float, default=0.01)
    q.add_argument("--mode", choices=["label", "model"], default="label")
    q.add_argument("--jobs", type=int, default=None)
    add_common(q)
    q.set_defaults(func=cmd_attack)

    q = sub.add_parser("certify", help="attack with certification-focused summary")
    q.add_argument("--model", required=True)
    q.add_argument("--data", required=True)
    q.add_argument("--delta", type=float, required=True)
    q.add_argument("--eta", type=float, default=0.01)
    q.add_argument("--mode", choices=["label", "model"], default="label")
    q.add_argument("--jobs", type=int, default=None)
    add_common(q)
    q.set_defaults(func=cmd_attack)

    q = sub.add_parser("attack-net", help="SDP attack on a 2-layer ReLU net")
    q.add_argument("--model", required=True)
    q.add_argument("--data", required=True)
    q.add_argument("--delta", type=float, required=True)
    q.add_argument("--alpha", type=float, default=1.0,
                   help="the relaxation runs at the internal radius alpha*delta")
    q.add_argument("--trials", type=int, default=256)
    q.add_argument("--jobs", type=int, default=None)
    q.add_argument("--seed", type=int, default=0)
    q.add_argument("--out", default="report.json")
    q.set_defaults(func=cmd_attack_net)

    q = sub.add_parser("learn", help="robust ERM via cutting planes")
    q.add_argument("--data", required=True)
    q.add_argument("--degree", type=int, choices=[1, 2], required=True)
    q.add_argument("--delta", type=float, required=True)
    q.add_argument("--epsilon", type=float, default=0.1)
    q.add_argument("--eta", type=float, default=0.05)
    q.add_argument("--engine", choices=["chebyshev", "ellipsoid"], default="chebyshev")
    q.add_argument("--transcript", default=None)
    add_common(q)
    q.set_defaults(func=cmd_learn)

    q = sub.add_parser("gen-gadget", help="generate a hardness gadget instance")
    q.add_argument("--kind", choices=["main", "appendix", "redundant"], required=True)
    q.add_argument("--n", type=int, required=True)
    q.add_argument("--s", type=float, default=150.0)
    q.add_argument("--beta", type=float, default=2.0)
    q.add_argument("--delta", type=float, default=0.125)
    q.add_argument("--m", type=int, default=12)
    q.add_argument("--jitter", action="store_true")
    add_common(q)
    q.set_defaults(func=cmd_gen_gadget)

    q = sub.add_parser("verify-gadget", help="verify gadget structural claims")
    q.add_argument("--in", required=True)
    q.add_argument("--check", default="all",
                   help="comma list of counts,robustness,rank or 'all'")
    q.add_argument("--out", default=None)
    q.add_argument("--seed", type=int, default=0)
    q.set_defaults(func=cmd_verify_gadget)

    q = sub.add_parser("bench", help="paired relaxation-vs-PGD comparison table")
    q.add_argument("--model", required=True)
    q.add_argument("--data", required=True)
    q.add_argument("--delta", type=float, required=True)
    q.add_argument("--alpha", type=float, default=1.0)
    q.add_argument("--trials", type=int, default=256)
    q.add_argument("--steps", type=int, default=40)
    q.add_argument("--restarts", type=int, default=5)
    add_common(q)
    q.set_defaults(func=cmd_bench)

    q = sub.add_parser("sample-size", help="uniform-convergence sample size")
    q.add_argument("--degree", type=int, choices=[1, 2], required=True)
    q.add_argument("--n", type=int, required=True)
    q.add_argument("--epsilon", type=float, required=True)
    q.add_argument("--eta", type=float, required=True)
    q.add_argument("--out", default=None)
    q.add_argument("--seed", type=int, default=0)
    q.set_defaults(func=cmd_sample_size)

    q = sub.add_parser("plot", help="render a report JSON as an SVG figure")
    q.add_argument("--in", required=True)
    q.add_argument("--out", required=True)
    q.set_defaults(func=cmd_plot)
    return p


def _apply_config_file(args: argparse.Namespace, parser: argparse.ArgumentParser,
                       argv: list[str]) -> argparse.Namespace:
    if not args.config:
        return args
    with open(args.config) as fh:
        defaults = json.load(fh)
    explicit = {a.lstrip("-").split("=")[0].replace("-", "_") for a in argv
                if a.startswith("--")}
    for key, val in defaults.items():
        attr = key.replace("-", "_")
        if hasattr(args, attr) and attr not in explicit:
            setattr(args, attr, val)
    return args


def _validate(args) -> None:
    for name in ("delta", "epsilon", "eta"):
        v = getattr(args, name, None)
        if v is not None and v <= 0:
            raise ValidationFailure(f"--{name} must be positive, got {v}")
    eta = getattr(args, "eta", None)
    if eta is not None and eta >= 1:
        raise ValidationFailure(f"--eta must be below 1, got {eta}")
    eps = getattr(args, "epsilon", None)
    if eps is not None and eps >= 1:
        raise ValidationFailure(f"--epsilon must be below 1, got {eps}")
    trials = getattr(args, "trials", None)
    if trials is not None and trials < 1:
        raise ValidationFailure("--trials must be at least 1")
    if getattr(args, "jobs", None) is None and hasattr(args, "jobs"):
        args.jobs = _default_jobs()


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        args = _apply_config_file(args, parser, argv)
        _validate(args)
        return args.func(args)
    except ValidationFailure as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_VALIDATION
    except (ValueError, OSError, json.JSONDecodeError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_VALIDATION
    except boxmax.SolverError as e:
        print(f"solver error: {e}", file=sys.stderr)
        if e.residual is not None:
            print(f"best-iterate residual: {e.residual}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
