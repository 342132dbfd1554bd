"""Task implementations behind the batch front end.

Each task maps a RunConfig to CSV tables (deterministic bodies), a JSON
summary with verdicts and the tolerances used, and a pass flag.  Thread
count comes from the RIEMLAB_THREADS environment variable (or the config);
results are collected in submission order, so parallel runs stay
deterministic.
"""

from __future__ import annotations

import hashlib
import json
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import __version__
from .config import ConfigError, build_body, build_metric

TAU_MARGIN = 1e-7


@dataclass
class Table:
    name: str
    columns: list
    rows: list  # list of dicts


@dataclass
class TaskResult:
    passed: bool
    tables: list
    summary: dict


def _fmt(value):
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, np.ndarray):
        return " ".join(repr(float(v)) for v in value.ravel())
    return str(value)


def thread_count(cfg):
    if cfg.threads:
        return max(1, int(cfg.threads))
    env = os.environ.get("RIEMLAB_THREADS")
    return max(1, int(env)) if env else 1


def parallel_map(fn, items, workers):
    if workers <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        futures = [pool.submit(fn, item) for item in items]
        return [f.result() for f in futures]


# --------------------------------------------------------------------------
# individual tasks
# --------------------------------------------------------------------------

def task_transport_convergence(cfg):
    from .geodesics import shoot_geodesic
    from .transport import transport_convergence_report

    M = build_metric(cfg.metric)
    m = M.m
    p = cfg.params.get("start") or [0.0] * m
    if cfg.metric.get("name") == "round-sphere" and \
            cfg.metric.get("chart") == "stereographic" and not cfg.params.get("start"):
        p = [1.0 / np.sqrt(cfg.metric.get("K", 1.0))] + [0.0] * (m - 1)
    v = cfg.params.get("direction") or [0.0] * (m - 1) + [1.0]
    w = cfg.params.get("vector") or [1.0] + [0.0] * (m - 1)
    a, b = cfg.params["a"], cfg.params["b"]
    ks = cfg.params["ks"]
    span = b + (b - a) / min(ks) + 0.05
    path = shoot_geodesic(M, p, v, span, n=128)
    if path.truncated:
        raise ConfigError("transport geodesic leaves the chart domain")
    spec = [{"id": "g0", "path": path, "a": a, "b": b, "v0": w, "ks": ks}]
    reports = transport_convergence_report(M, spec)
    rows = []
    for rep in reports:
        rows.extend(rep.rows())
    rep = reports[0]
    finite = [e for e in rep.errors if np.isfinite(e)]
    passed = rep.monotone and len(finite) == len(rep.errors)
    max_error = cfg.params.get("max_error")
    if max_error is not None and finite:
        passed = passed and rep.errors_scaled[-1] <= max_error
    summary = {
        "task": "transport-convergence",
        "metric": M.name,
        "errors": rep.errors,
        "errors_scaled": rep.errors_scaled,
        "monotone": bool(rep.monotone),
        "max_error": max_error,
        "verdict": "pass" if passed else "fail",
    }
    table = Table("transport_convergence", ["metric", "geodesic", "k",
                                            "error", "error_scaled"], rows)
    return TaskResult(passed=passed, tables=[table], summary=summary)


def task_jet_check(cfg):
    from .polynomials import QQ
    from .exceptional import random_curvature_jet
    from .jets import (check_normal, component_basis, curvature_jet,
                       normal_jet_from_curvature, normalize_jet, MetricJet)
    from .polynomials import TensorPoly

    m = cfg.params["m"]
    k = cfg.params["k"]
    samples = cfg.params["samples"]
    rng = np.random.default_rng(cfg.seed)
    rows = []
    ok_all = True

    # single-component leading-ratio checks
    for i in range(2, k + 1):
        basis = component_basis(m, i)
        E = basis[min(1, len(basis) - 1)]
        comps = [TensorPoly.zero(m, (m, m)) for _ in range(i)]
        comps[i - 1] = E
        jet = MetricJet(m, i, tuple(comps))
        cj = curvature_jet(jet)
        a_i = QQ(-2 * (i - 1), i + 1)
        ok = (cj.component(i).scale(a_i) == E) and all(
            cj.component(j).is_zero() for j in range(2, i))
        ok_all &= ok
        rows.append({"check": "leading-ratio", "m": m, "k": i,
                     "pass": bool(ok)})

    # exact round trips on random curvature jets
    for s in range(samples):
        R = random_curvature_jet(m, k, rng)
        jet = normal_jet_from_curvature(R)
        ok = check_normal(jet)[0]
        back = curvature_jet(jet)
        ok &= all(back.component(i) == R.component(i) for i in range(2, k + 1))
        nj = normalize_jet(jet)
        ok &= all(nj.component(i) == jet.component(i) for i in range(1, k + 1))
        ok_all &= ok
        rows.append({"check": "round-trip", "m": m, "k": k, "pass": bool(ok)})

    summary = {"task": "jet-check", "m": m, "k": k, "samples": samples,
               "verdict": "pass" if ok_all else "fail"}
    return TaskResult(passed=bool(ok_all),
                      tables=[Table("jet_check", ["check", "m", "k", "pass"],
                                    rows)],
                      summary=summary)


def task_exceptional_scan(cfg):
    from .exceptional import exceptional_at, scan_directions

    M = build_metric(cfg.metric)
    p = cfg.params.get("point") or [0.0] * M.m
    k = cfg.params["k"]
    scan = scan_directions(M, p, k, grid=cfg.params["grid"],
                           refine=cfg.params["refine"])
    rows = []
    for entry in scan.rows:
        margin = entry["margin"]
        verdict = ("exceptional" if margin <= TAU_MARGIN else
                   "not-exceptional" if margin > 10 * TAU_MARGIN else
                   "inconclusive")
        wdim = ""
        if margin <= TAU_MARGIN:
            rep = exceptional_at(M, p, entry["direction"], k)
            wdim = rep.witness_dim if rep.witness is not None else ""
        rows.append({"metric": M.name, "p": _fmt(np.asarray(p, float)),
                     "x": _fmt(entry["direction"]), "k": k,
                     "margin": margin, "verdict": verdict,
                     "witness_dim": wdim})
    n_exc = len(scan.exceptional_directions)
    expect = cfg.params["expect"]
    if expect == "all-exceptional":
        passed = n_exc == len(scan.rows)
    elif expect == "none-exceptional":
        passed = n_exc == 0 and scan.min_margin > TAU_MARGIN
    else:
        passed = True
    summary = {"task": "exceptional-scan", "metric": M.name,
               "min_margin": scan.min_margin,
               "argmin": [float(v) for v in scan.argmin],
               "n_exceptional_directions": n_exc,
               "tau_margin": TAU_MARGIN,
               "verdict": "pass" if passed else "fail"}
    table = Table("exceptional_scan",
                  ["metric", "p", "x", "k", "margin", "verdict", "witness_dim"],
                  rows)
    return TaskResult(passed=passed, tables=[table], summary=summary)


def task_geodesic_scan(cfg):
    from .exceptional import scan_geodesic
    from .geodesics import shoot_geodesic

    M = build_metric(cfg.metric)
    m = M.m
    k = cfg.params["k"]
    rows = []
    geodesics = []
    if cfg.params.get("start") and cfg.params.get("direction"):
        geodesics.append(("g0", np.asarray(cfg.params["start"], float),
                          np.asarray(cfg.params["direction"], float)))
    else:
        rng = np.random.default_rng(cfg.seed)
        half = cfg.params["start_box"]
        for i in range(cfg.params["count"]):
            p = rng.uniform(-half, half, m)
            v = rng.standard_normal(m)
            v /= np.linalg.norm(v)
            geodesics.append(("g%d" % i, p, v))

    def run_one(item):
        gid, p, v = item
        path = shoot_geodesic(M, p, v, cfg.params["length"], n=64)
        if path.truncated:
            return gid, None
        return gid, scan_geodesic(M, path, k, samples=cfg.params["samples"])

    results = parallel_map(run_one, geodesics, thread_count(cfg))
    n_exc = 0
    min_margin = float("inf")
    for gid, scan in results:
        if scan is None:
            rows.append({"geodesic": gid, "verdict": "truncated",
                         "min_margin": "", "witnesses": 0})
            continue
        n_exc += scan.exceptional
        mm = min(scan.margins)
        min_margin = min(min_margin, mm)
        rows.append({"geodesic": gid, "verdict": scan.verdict,
                     "min_margin": mm, "witnesses": len(scan.witnesses)})
    expect = cfg.params["expect"]
    if expect == "exceptional":
        passed = n_exc == len([r for r in rows if r["verdict"] != "truncated"])
    elif expect == "none-exceptional":
        passed = n_exc == 0 and min_margin > TAU_MARGIN
    else:
        passed = True
    summary = {"task": "geodesic-scan", "metric": M.name, "k": k,
               "exceptional_count": n_exc, "min_margin": min_margin
               if np.isfinite(min_margin) else None,
               "verdict": "pass" if passed else "fail"}
    table = Table("geodesic_scan", ["geodesic", "verdict", "min_margin",
                                    "witnesses"], rows)
    return TaskResult(passed=passed, tables=[table], summary=summary)


def task_jet_survey(cfg):
    from .exceptional import random_jet_survey

    result = random_jet_survey(cfg.params["m"], cfg.params["k"],
                               cfg.params["samples"], cfg.seed,
                               grid=cfg.params["grid"])
    rows = [{"sample": r.sample, "k": r.k, "min_margin": r.min_margin,
             "n_exceptional_directions": r.n_exceptional_directions,
             "min_margin_k2": r.min_margin_k2} for r in result.rows]
    k2_ok = all(r.min_margin_k2 <= TAU_MARGIN for r in result.rows)
    passed = (result.fraction_above_threshold >= cfg.params["min_fraction"]
              and k2_ok)
    summary = {"task": "jet-survey", "m": cfg.params["m"], "k": cfg.params["k"],
               "samples": cfg.params["samples"], "seed": cfg.seed,
               "fraction_above_threshold": result.fraction_above_threshold,
               "quantiles": result.quantiles,
               "all_k2_exceptional": bool(k2_ok),
               "tau_margin": result.tau_margin,
               "verdict": "pass" if passed else "fail"}
    table = Table("jet_survey", ["sample", "k", "min_margin",
                                 "n_exceptional_directions", "min_margin_k2"],
                  rows)
    return TaskResult(passed=passed, tables=[table], summary=summary)


def task_hull_iterate(cfg):
    from .convex import hull_iterate

    M = build_metric(cfg.metric)
    points = np.asarray(cfg.params["points"], dtype=float)
    net_h = cfg.params.get("net_h") or M.domain.scale / 200.0
    result = hull_iterate(M, points, rounds=cfg.params["rounds"],
                          density=cfg.params["density"], net_h=net_h,
                          seed=cfg.seed)
    rows = [{"round": i, "cloud_size": len(c),
             "gap": result.gaps[i - 1] if i >= 1 else 0.0}
            for i, c in enumerate(result.clouds)]
    stable_round = cfg.params.get("stable_round")
    passed = True
    if stable_round is not None:
        for i in range(stable_round, len(result.clouds)):
            if i >= 1 and result.gaps[i - 1] > 2 * net_h:
                passed = False
    summary = {"task": "hull-iterate", "metric": M.name, "net_h": net_h,
               "gaps": result.gaps, "ambiguous_pairs": result.ambiguous_pairs,
               "verdict": "pass" if passed else "fail"}
    table = Table("hull_iterate", ["round", "cloud_size", "gap"], rows)
    return TaskResult(passed=passed, tables=[table], summary=summary)


def task_key_lemma_audit(cfg):
    from .convex import BoundaryGeodesicError, key_lemma_audit
    from .geodesics import shoot_geodesic

    M = build_metric(cfg.metric)
    body = build_body(M, cfg.body)
    path = shoot_geodesic(M, cfg.params["start"], cfg.params["direction"],
                          cfg.params["length"], n=96)
    expect = cfg.params["expect"]
    tol = cfg.params["max_residual"]
    try:
        audit = key_lemma_audit(body, path, samples=cfg.params["samples"],
                                directions=cfg.params["directions"])
    except BoundaryGeodesicError as exc:
        passed = expect == "refuse"
        summary = {"task": "key-lemma-audit", "metric": M.name,
                   "body": body.name, "refused": True, "reason": str(exc),
                   "verdict": "pass" if passed else "fail"}
        table = Table("key_lemma_audit",
                      ["body", "refused", "reason"],
                      [{"body": body.name, "refused": True,
                        "reason": str(exc)}])
        return TaskResult(passed=passed, tables=[table], summary=summary)
    ok = (audit.parallelism_deviation <= tol
          and audit.parallelism_violation <= tol
          and audit.condition_b_residual <= tol
          and audit.condition_a_residual <= tol)
    passed = ok if expect == "pass" else not ok
    rows = [{"body": body.name, "cone_rank": audit.cone_rank,
             "parallelism_deviation": audit.parallelism_deviation,
             "parallelism_violation": audit.parallelism_violation,
             "condition_b_residual": audit.condition_b_residual,
             "condition_a_residual": audit.condition_a_residual}]
    summary = {"task": "key-lemma-audit", "metric": M.name, "body": body.name,
               "refused": False, "max_residual": tol,
               "cone_rank": audit.cone_rank,
               "parallelism_deviation": audit.parallelism_deviation,
               "parallelism_violation": audit.parallelism_violation,
               "condition_b_residual": audit.condition_b_residual,
               "condition_a_residual": audit.condition_a_residual,
               "verdict": "pass" if passed else "fail"}
    table = Table("key_lemma_audit", list(rows[0].keys()), rows)
    return TaskResult(passed=passed, tables=[table], summary=summary)


def task_strict_convexity_audit(cfg):
    from .convex import strict_convexity_audit

    M = build_metric(cfg.metric)
    body = build_body(M, cfg.body)
    report = strict_convexity_audit(body, samples=cfg.params["samples"],
                                    seed=cfg.seed,
                                    directions=cfg.params["directions"])
    rows = []
    for p in report.boundary_points:
        rows.append({"point": _fmt(p), "non_extreme": False, "rank": ""})
    for (p, witness, rank) in report.non_extreme:
        for row in rows:
            if row["point"] == _fmt(p):
                row["non_extreme"] = True
                row["rank"] = rank
    expect = cfg.params["expect"]
    if expect == "strict":
        passed = len(report.non_extreme) == 0
    elif expect == "flagged":
        passed = len(report.flagged) > 0
    else:
        passed = True
    summary = {"task": "strict-convexity-audit", "metric": M.name,
               "body": body.name, "samples": cfg.params["samples"],
               "non_extreme_count": len(report.non_extreme),
               "flagged_count": len(report.flagged),
               "flagged_ranks": sorted({int(r) for _, r in report.flagged}),
               "verdict": "pass" if passed else "fail"}
    table = Table("strict_convexity_audit", ["point", "non_extreme", "rank"],
                  rows)
    return TaskResult(passed=passed, tables=[table], summary=summary)


TASKS = {
    "transport-convergence": task_transport_convergence,
    "jet-check": task_jet_check,
    "exceptional-scan": task_exceptional_scan,
    "geodesic-scan": task_geodesic_scan,
    "jet-survey": task_jet_survey,
    "hull-iterate": task_hull_iterate,
    "key-lemma-audit": task_key_lemma_audit,
    "strict-convexity-audit": task_strict_convexity_audit,
}


# --------------------------------------------------------------------------
# artifact writing
# --------------------------------------------------------------------------

def write_artifacts(cfg, result, outdir):
    os.makedirs(outdir, exist_ok=True)
    for table in result.tables:
        path = os.path.join(outdir, table.name + ".csv")
        with open(path, "w") as fh:
            fh.write(",".join(table.columns) + "\n")
            for row in table.rows:
                fh.write(",".join(_fmt(row.get(c, "")) for c in table.columns)
                         + "\n")
    summary = dict(result.summary)
    summary["generated_at"] = time.strftime("%Y-%m-%dT%H:%M:%S")
    summary["passed"] = bool(result.passed)
    with open(os.path.join(outdir, "summary.json"), "w") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True, default=_json_default)
        fh.write("\n")
    digest = hashlib.sha256(cfg.source_text.encode()).hexdigest()
    with open(os.path.join(outdir, "repro.txt"), "w") as fh:
        fh.write("riemlab %s\n" % __version__)
        fh.write("task %s\n" % cfg.task)
        fh.write("seed %s\n" % cfg.seed)
        fh.write("config_sha256 %s\n" % digest)


def _json_default(obj):
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError("not JSON serializable: %r" % type(obj))


def run_task(cfg):
    if cfg.task not in TASKS:
        raise ConfigError("unknown task %r" % cfg.task)
    return TASKS[cfg.task](cfg)
