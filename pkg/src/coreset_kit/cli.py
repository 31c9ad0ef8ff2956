"""Experiment harness: run any subsystem on a matrix/stream file, write a
JSON report with measured values against instantiated budgets, and a CSV of
plot data.

Reports are deterministic given the configuration (including the seed)
except for the ``timestamp`` field.  Exit codes: 0 pass, 1 budget failure,
2 usage error.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import math
import os
import sys
import time

import numpy as np

from . import active as active_mod
from . import clustering as cluster_mod
from . import css as css_mod
from . import ellipsoid as ell_mod
from . import lewis as lewis_mod
from . import online_subspace as online_mod
from . import oracles as oracle_mod
from . import sketching as sketch_mod
from .core import InputError, gnorm, load_matrix
from .losses import get_loss
from .rng import SeededRng

SUBCOMMANDS = [
    "spanning-set",
    "lewis",
    "ose-bench",
    "css",
    "online-subspace",
    "online-cluster",
    "active-regression",
    "oracle",
    "verify",
]


def _parse_const(pairs):
    out = {}
    for pair in pairs or []:
        if "=" not in pair:
            raise InputError(f"--const expects name=value, got {pair!r}")
        name, val = pair.split("=", 1)
        out[name] = float(val)
    return out


def _apply_consts(consts_obj, overrides):
    applied = {}
    for name, val in overrides.items():
        if hasattr(consts_obj, name):
            setattr(consts_obj, name, type(getattr(consts_obj, name))(val))
            applied[name] = val
    return applied


def _write_report(out_dir, report, series_rows, series_header):
    os.makedirs(out_dir, exist_ok=True)
    report = dict(report)
    report["timestamp"] = time.strftime("%Y-%m-%dT%H:%M:%S")
    with open(os.path.join(out_dir, "report.json"), "w") as f:
        json.dump(report, f, indent=2, sort_keys=True, default=_json_default)
        f.write("\n")
    with open(os.path.join(out_dir, "series.csv"), "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(series_header)
        writer.writerows(series_rows)


def _json_default(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if dataclasses.is_dataclass(obj):
        return dataclasses.asdict(obj)
    raise TypeError(f"not JSON serializable: {type(obj)}")


def _echo(args, constants):
    cfg = {k: v for k, v in vars(args).items() if k not in ("func",) and v is not None}
    cfg["constants"] = constants
    return cfg


# ---------------------------------------------------------------------------
# subcommands

def run_spanning_set(args, consts):
    a = load_matrix(args.input)
    rng = SeededRng(args.seed)
    eps = args.eps
    ss = ell_mod.l2_spanning_set(a, eps, rng=rng, method=args.method)
    _, kappa = ell_mod.linf_embedding_subset(a, eps, method=args.method, rng=rng.child(1))
    probe = rng.child(2).normal(size=(2000, a.shape[1]))
    full = np.max(np.abs(probe @ a.T), axis=1)
    sub = np.max(np.abs(probe @ a[ss.support].T), axis=1)
    ok = sub > 0
    measured = float(np.max(full[ok] / sub[ok])) if ok.any() else float("inf")
    report = {
        "subcommand": "spanning-set",
        "config": _echo(args, consts),
        "results": {
            "support": ss.support,
            "size": len(ss.support),
            "max_coefficient_norm": ss.max_coefficient_norm,
            "kappa_bound": kappa,
            "kappa_measured": measured,
        },
        "budgets": {
            "size": {
                "formula": "8 * d * max(1, log2 log2 d)",
                "instantiated": ss.size_budget,
                "measured": len(ss.support),
                "pass": len(ss.support) <= ss.size_budget,
            },
            "certificate": {
                "formula": "1 + eps",
                "instantiated": 1 + eps,
                "measured": ss.max_coefficient_norm,
                "pass": ss.max_coefficient_norm <= 1 + eps + 1e-8,
            },
            "linf_distortion": {
                "formula": "(1+eps)^2 sqrt(d)",
                "instantiated": kappa,
                "measured": measured,
                "pass": measured <= kappa,
            },
        },
    }
    series = [[i, float(n)] for i, n in enumerate(ell_mod.coefficient_norms(a, ss.support))]
    return report, series, ["row", "coefficient_norm"]


def run_lewis(args, consts):
    a = load_matrix(args.input)
    rng = SeededRng(args.seed)
    p = args.p
    lw = lewis_mod.compute_lewis(a, p)
    tau = lewis_mod.lewis_tau(a, lw.w, p)
    sm = lewis_mod.lewis_sample(lw, args.eps, args.delta, rng, c=consts.get("sample_c", 10.0))
    probe = rng.child(1).normal(size=(200, a.shape[1]))
    ratios = []
    sa = sm.apply(a)
    for x in probe:
        denom = np.sum(np.abs(a @ x) ** p) ** (1 / p)
        if denom > 0:
            ratios.append(float(np.sum(np.abs(sa @ x) ** p) ** (1 / p) / denom))
    report = {
        "subcommand": "lewis",
        "config": _echo(args, consts),
        "results": {
            "sum_w": lw.total,
            "alpha": lw.alpha,
            "converged": lw.converged,
            "iterations": lw.iterations,
            "sample_size": len(sm),
            "embedding_ratio_min": min(ratios) if ratios else None,
            "embedding_ratio_max": max(ratios) if ratios else None,
        },
        "budgets": {
            "weight_sum": {
                "formula": "4 d",
                "instantiated": 4.0 * a.shape[1],
                "measured": lw.total,
                "pass": lw.total <= 4.0 * a.shape[1],
            },
            "one_sided": {
                "formula": "w_i >= alpha tau_i - 1e-6",
                "instantiated": 0.0,
                "measured": float(np.min(lw.w - lw.alpha * tau)),
                "pass": bool(np.all(lw.w >= lw.alpha * tau - 1e-6)),
            },
        },
    }
    series = [[i, float(w)] for i, w in enumerate(lw.w)]
    return report, series, ["row", "lewis_weight"]


def run_ose_bench(args, consts):
    a = load_matrix(args.input)
    rng = SeededRng(args.seed)
    p = args.p
    d = a.shape[1]
    r = int(consts.get("rows_c", 40.0) * d * max(1.0, math.log(max(d, 2))))
    sa = sketch_mod.pstable_embed(a, p, r, rng, scale_c=consts.get("scale_c", 4.0))
    probe = rng.child(1).normal(size=(100, d))
    ratios = []
    for x in probe:
        denom = np.sum(np.abs(a @ x) ** p) ** (1 / p)
        if denom > 0:
            ratios.append(float(np.sum(np.abs(sa @ x) ** p) ** (1 / p) / denom))
    expansion_budget = 8.0 * d
    report = {
        "subcommand": "ose-bench",
        "config": _echo(args, consts),
        "results": {"rows": r, "ratio_min": min(ratios), "ratio_max": max(ratios)},
        "budgets": {
            "no_contraction": {
                "formula": "min ratio >= 0.9",
                "instantiated": 0.9,
                "measured": min(ratios),
                "pass": min(ratios) >= 0.9,
            },
            "expansion": {
                "formula": "8 d (logs absorbed)",
                "instantiated": expansion_budget,
                "measured": max(ratios),
                "pass": max(ratios) <= expansion_budget,
            },
        },
    }
    series = [[i, v] for i, v in enumerate(sorted(ratios))]
    return report, series, ["rank", "ratio"]


def run_css(args, consts):
    a = load_matrix(args.input)
    rng = SeededRng(args.seed)
    loss = get_loss(args.loss, **({"p": args.p} if args.loss == "abs_p" else {}))
    cc = css_mod.CssConstants()
    applied = _apply_consts(cc, consts)
    result = css_mod.css_gnorm(a, args.k, loss, rng, consts=cc)
    result.validate(a, loss=loss)
    from .core import best_rank_k

    frob_opt = gnorm(a - best_rank_k(a, args.k), loss)
    distortion = result.residual / frob_opt if frob_opt > 0 else (0.0 if result.residual == 0 else float("inf"))
    report = {
        "subcommand": "css",
        "config": _echo(args, {**consts, **applied}),
        "results": {
            "selected": result.selected,
            "size": len(result.selected),
            "residual": result.residual,
            "rounds": result.rounds,
            "rank_k_frobenius_surrogate_cost": frob_opt,
            "distortion_vs_surrogate": distortion,
        },
        "budgets": {
            "distortion": {
                "formula": "8 k",
                "instantiated": 8.0 * args.k,
                "measured": distortion,
                "pass": distortion <= 8.0 * args.k or result.residual == 0.0,
            }
        },
    }
    series = [[t["round"], t["d_l"], t["removed_cost"]] for t in result.trace]
    return report, series, ["round", "surviving", "removed_cost"]


def run_online_subspace(args, consts):
    a = load_matrix(args.stream or args.input)
    rng = SeededRng(args.seed)
    oc = online_mod.OnlineConstants()
    applied = _apply_consts(oc, consts)
    cs = online_mod.online_subspace_coreset(
        a, args.k, args.p, args.eps, args.delta, rng, consts=oc
    )
    deviation = None
    if a.shape[1] <= 4 and args.k <= 2:
        deviation = oracle_mod.strong_coreset_check(
            a, cs.indices, cs.weights, args.k, args.p,
            resolution_deg=consts.get("net_resolution", 2.0),
        )
    budget = cs.meta["budget"]
    report = {
        "subcommand": "online-subspace",
        "config": _echo(args, {**consts, **applied}),
        "results": {
            "coreset_size": len(cs),
            "sigma_sum": cs.meta["sigma_sum"],
            "beta": cs.meta["beta"],
            "net_check_deviation": deviation,
        },
        "budgets": {
            "sigma_sum": {
                "formula": "(c t^2 log^2(n Delta))^{max(1,p/2)} log^2 t log n R",
                "instantiated": budget,
                "measured": cs.meta["sigma_sum"],
                "pass": cs.meta["sigma_sum"] <= budget,
            },
            "net_deviation": {
                "formula": "eps target",
                "instantiated": args.eps,
                "measured": deviation,
                "pass": deviation is None or deviation <= args.eps,
            },
        },
    }
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        with open(os.path.join(args.out, "coreset.csv"), "w", newline="") as f:
            w = csv.writer(f)
            w.writerow(["index", "weight"])
            for i, wt in zip(cs.indices, cs.weights):
                w.writerow([int(i), float(wt)])
    series = [[int(i), float(w)] for i, w in zip(cs.indices, cs.weights)]
    return report, series, ["index", "weight"]


def run_online_cluster(args, consts):
    a = load_matrix(args.stream or args.input)
    rng = SeededRng(args.seed)
    cc = cluster_mod.ClusterConstants()
    applied = _apply_consts(cc, consts)
    res = cluster_mod.cluster_coreset(
        a, args.k, args.p, args.eps, args.delta, rng, consts=cc
    )
    st = res.bicriteria
    baseline = cluster_mod.kmeans_pp_cost(a, args.k, args.p, rng.child(9))
    n = a.shape[0]
    w_star = res.coreset.meta["w_star"]
    upper = n * max(
        float(np.max(np.linalg.norm(a - a.mean(axis=0), axis=1)) ** args.p), w_star
    )
    centers_budget = 16.0 * args.k * math.log2(max(n, 2)) * max(
        1.0, math.log2(max(upper / w_star, 2.0))
    )
    report = {
        "subcommand": "online-cluster",
        "config": _echo(args, {**consts, **applied}),
        "results": {
            "centers": len(st.centers),
            "online_cost": st.cost,
            "baseline_cost": baseline,
            "coreset_size": len(res.coreset),
        },
        "budgets": {
            "centers": {
                "formula": "16 k log(n) log(W*/w*)",
                "instantiated": centers_budget,
                "measured": len(st.centers),
                "pass": len(st.centers) <= centers_budget,
            },
            "cost": {
                "formula": "8 x offline baseline (p=2)",
                "instantiated": 8.0 * baseline,
                "measured": st.cost,
                "pass": args.p != 2.0 or st.cost <= 8.0 * baseline or baseline == 0.0,
            },
        },
    }
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        with open(os.path.join(args.out, "coreset.csv"), "w", newline="") as f:
            w = csv.writer(f)
            w.writerow(["index", "weight", "center_id"])
            for i, wt, cid in zip(res.coreset.indices, res.coreset.weights, res.center_ids):
                w.writerow([int(i), float(wt), int(cid)])
        with open(os.path.join(args.out, "assignments.csv"), "w", newline="") as f:
            w = csv.writer(f)
            w.writerow(["index", "center_id"])
            for i, cid in enumerate(st.assignments):
                w.writerow([i, int(cid)])
    series = [[i, int(c)] for i, c in enumerate(st.assignments)]
    return report, series, ["index", "center_id"]


def run_active_regression(args, consts):
    a = load_matrix(args.input)
    if not args.labels:
        raise InputError("active-regression requires --labels")
    oracle = active_mod.LabelOracle.from_file(args.labels)
    rng = SeededRng(args.seed)
    res = active_mod.active_lp_solve(
        a, oracle, args.p, args.eps, args.delta, rng,
        theta=consts.get("theta", 4.0),
    )
    _, opt, _ = oracle_mod.exact_lp_regression(a, oracle.read_many(range(a.shape[0])), args.p)
    achieved = float(np.sum(np.abs(a @ res.x - oracle.read_many(range(a.shape[0]))) ** args.p))
    rel = achieved / opt if opt > 0 else 1.0
    budget = active_mod.query_budget(a.shape[1], args.p, args.eps, args.delta, a.shape[0])
    report = {
        "subcommand": "active-regression",
        "config": _echo(args, consts),
        "results": {
            "queries_expected": res.queries_expected,
            "queries_realized": res.queries_realized,
            "relative_error": rel,
        },
        "budgets": {
            "queries": {
                "formula": "d^{p/2} eps^{-(p-1)} ((log d)^2 log n + log 1/delta) polylog",
                "instantiated": budget,
                "measured": res.queries_realized,
                "pass": res.queries_realized <= max(budget, a.shape[0]),
            },
            "relative_error": {
                "formula": "1 + eps",
                "instantiated": (1 + args.eps),
                "measured": rel,
                "pass": rel <= (1 + args.eps) ** args.p + 1e-9,
            },
        },
    }
    series = [[i, float(v)] for i, v in enumerate(res.x)]
    return report, series, ["coordinate", "value"]


def run_oracle(args, consts):
    a = load_matrix(args.input)
    rng = SeededRng(args.seed)
    sub, val = oracle_mod.brute_css(
        a, args.k, args.k, mode="frobenius", budget=int(consts.get("budget", 1e6))
    )
    report = {
        "subcommand": "oracle",
        "config": _echo(args, consts),
        "results": {"best_subset": sub, "residual": val},
        "budgets": {},
    }
    return report, [[int(s)] for s in sub], ["column"]


# ---------------------------------------------------------------------------
# verify suites (invariant spot checks, exit 0/1)

def _verify_spanning(seed):
    rng = SeededRng(seed)
    for trial in range(5):
        g = rng.child(trial)
        n = int(g.integers(30, 120))
        d = int(g.integers(2, 6))
        a = g.normal(size=(n, d))
        core = ell_mod.mvee_coreset(a, 0.25)
        core.validate()
        ss = ell_mod.l2_spanning_set(a, 0.25)
        if ss.max_coefficient_norm > 1.25 + 1e-8:
            return False, f"certificate {ss.max_coefficient_norm} > 1.25"
    return True, "ok"


def _verify_lewis(seed):
    rng = SeededRng(seed)
    for trial, p in enumerate([1.0, 1.5, 3.0]):
        g = rng.child(trial)
        a = g.normal(size=(50, 3))
        lw = lewis_mod.compute_lewis(a, p)
        tau = lewis_mod.lewis_tau(a, lw.w, p)
        if not np.all(lw.w >= lw.alpha * tau - 1e-6):
            return False, f"one-sided inequality failed at p={p}"
        if lw.total > 4 * 3:
            return False, f"sum w = {lw.total} > 4d at p={p}"
    return True, "ok"


def _verify_css(seed):
    rng = SeededRng(seed)
    a = rng.normal(size=(20, 8))
    from .losses import huber

    res = css_mod.css_gnorm(a, 2, huber(), rng.child(1))
    res.validate(a, loss=huber())
    return True, "ok"


VERIFY_SUITES = {
    "spanning": _verify_spanning,
    "lewis": _verify_lewis,
    "css": _verify_css,
}


def run_verify(args, consts):
    suite = args.suite
    if suite not in VERIFY_SUITES:
        raise InputError(f"unknown suite {suite!r}; known: {sorted(VERIFY_SUITES)}")
    ok, detail = VERIFY_SUITES[suite](args.seed)
    report = {
        "subcommand": "verify",
        "config": _echo(args, consts),
        "results": {"suite": suite, "pass": ok, "detail": detail},
        "budgets": {"suite": {"formula": suite, "instantiated": 1, "measured": int(ok), "pass": ok}},
    }
    return report, [[suite, int(ok)]], ["suite", "pass"]


# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="coreset-kit",
        description="Coreset and subset-selection experiment harness",
    )
    sub = parser.add_subparsers(dest="subcommand", required=True)
    runners = {
        "spanning-set": run_spanning_set,
        "lewis": run_lewis,
        "ose-bench": run_ose_bench,
        "css": run_css,
        "online-subspace": run_online_subspace,
        "online-cluster": run_online_cluster,
        "active-regression": run_active_regression,
        "oracle": run_oracle,
        "verify": run_verify,
    }
    for name in SUBCOMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--input", help="matrix file")
        sp.add_argument("--stream", help="stream file (row per line)")
        sp.add_argument("--labels", help="labels file for active regression")
        sp.add_argument("--k", type=int, default=1)
        sp.add_argument("--p", type=float, default=2.0)
        sp.add_argument("--eps", type=float, default=0.25)
        sp.add_argument("--delta", type=float, default=0.1)
        sp.add_argument("--seed", type=int, required=True)
        sp.add_argument("--const", action="append", metavar="NAME=VAL")
        sp.add_argument("--out", default=None)
        sp.add_argument("--loss", default="huber")
        sp.add_argument("--method", default="coordinate_ascent")
        sp.add_argument("--suite", default="spanning")
        sp.set_defaults(func=runners[name])
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return 2 if e.code not in (0, None) else 0
    try:
        consts = _parse_const(args.const)
        report, series, header = args.func(args, consts)
    except (InputError, FileNotFoundError, KeyError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    out_dir = args.out or "."
    _write_report(out_dir, report, series, header)
    budgets = report.get("budgets", {})
    ok = all(b.get("pass", True) for b in budgets.values())
    print(json.dumps({k: v.get("pass", True) for k, v in budgets.items()}))
    return 0 if ok else 1


if __name__ == "__main__":
    sys.exit(main())
