"""Sampler campaigns over parameter sweeps, with CSV and JSON output.

Replication ``r`` uses seed ``mix_seed(base_seed, r)`` at every sweep point,
so the sweep points share their event streams (common random numbers).
"""

from __future__ import annotations

import csv
import io
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .cftp import Outcome, batch_reports
from .config import ExperimentConfig
from .events import mix_seed
from .individual import IndividualModel, bound_pos_coupling, bound_tos_coupling
from .joint import best_algo4_bound, bound_hsr, project
from .oracle import empirical, oracle_for, tv_distance

ROW_FIELDS = ["point", "param", "value", "replication", "seed", "status", "horizon",
              "stop_time", "event_draws", "jobs_lo", "jobs_hi", "width"]
SUMMARY_FIELDS = ["point", "param", "value", "n", "non_coalesced", "mean_stop_time",
                  "se_stop_time", "ci95_stop_time", "log2_mean_stop_time", "mean_jobs_lo",
                  "se_jobs_lo", "ci95_jobs_lo", "mean_jobs_hi", "se_jobs_hi", "ci95_jobs_hi",
                  "mean_width", "bound", "tv_vs_oracle"]
Z95 = 1.959963984540054


def replication_seeds(base_seed: int, n: int) -> list[int]:
    return [mix_seed(base_seed, r) for r in range(n)]


def model_bound(model, sampler: str) -> float | None:
    """Applicable analytic bound on the mean coupling or stopping time, else None."""
    if sampler == "psa":
        b = bound_pos_coupling(model)
    elif sampler == "epsa":
        b = bound_tos_coupling(model)
    elif sampler == "alg4":
        b = best_algo4_bound(model, keep_order=True)
    elif sampler == "exact":
        b = bound_hsr(model)
    else:
        return None
    return b.value


def _run_chunk(args):
    model, sampler, seeds, max_horizon = args
    return batch_reports(model, sampler, seeds, max_horizon)


def _reports(model, sampler, seeds, max_horizon, pool, parallelism):
    if pool is None or len(seeds) < 2 * parallelism:
        return batch_reports(model, sampler, seeds, max_horizon)
    chunks = np.array_split(np.arange(len(seeds)), parallelism)
    jobs = [(model, sampler, [seeds[k] for k in c], max_horizon) for c in chunks if len(c)]
    out = []
    for part in pool.map(_run_chunk, jobs):
        out.extend(part)
    return out


def _sample_state(rep):
    return rep.value if rep.kind in (Outcome.EXACT_STATE, Outcome.EXACT_STATE_N) else None


def _ends(rep, model):
    if rep.kind is Outcome.EXACT_STATE_N:
        x = project(rep.value, model.n_items)
        return x, x
    iv = rep.interval
    return iv.lo, iv.hi


def _stats(v: np.ndarray) -> tuple[float, float, float]:
    mean = float(v.mean())
    se = float(v.std(ddof=1) / math.sqrt(len(v))) if len(v) > 1 else 0.0
    return mean, se, Z95 * se


@dataclass
class RunResult:
    config: ExperimentConfig
    rows: list[dict]
    summary: list[dict]

    def rows_csv(self) -> str:
        return _to_csv(ROW_FIELDS, self.rows)

    def summary_csv(self) -> str:
        return _to_csv(SUMMARY_FIELDS, self.summary)

    def summary_json(self) -> str:
        cfg = self.config
        doc = {
            "model": cfg.model,
            "sampler": cfg.sampler,
            "caps": list(cfg.caps),
            "replications": cfg.replications,
            "seed": cfg.seed,
            "max_horizon": cfg.max_horizon,
            "sweep": {"param": cfg.sweep_param,
                      "values": [v for v in cfg.sweep_values if v is not None]},
            "points": [{k: (None if v == "" else v) for k, v in row.items()}
                       for row in self.summary],
        }
        return json.dumps(doc, indent=2, sort_keys=False) + "\n"


def _fmt(v) -> str:
    if v is None or v == "":
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _to_csv(fields, rows) -> str:
    out = io.StringIO()
    w = csv.writer(out, lineterminator="\n")
    w.writerow(fields)
    for row in rows:
        w.writerow([_fmt(row.get(f)) for f in fields])
    return out.getvalue()


def run_experiment(cfg: ExperimentConfig, parallelism: int = 1) -> RunResult:
    seeds = replication_seeds(cfg.seed, cfg.replications)
    rows, summary = [], []
    pool = ProcessPoolExecutor(parallelism) if parallelism > 1 else None
    try:
        for point, value in enumerate(cfg.sweep_values):
            model = cfg.build(value)
            reps = _reports(model, cfg.sampler, seeds, cfg.max_horizon, pool, parallelism)
            stop = np.empty(len(reps))
            lo_j = np.empty(len(reps))
            hi_j = np.empty(len(reps))
            samples, non_coalesced = [], 0
            for r, rep in enumerate(reps):
                lo, hi = _ends(rep, model)
                stop[r], lo_j[r], hi_j[r] = rep.stop_time, sum(lo), sum(hi)
                non_coalesced += not rep.coalesced
                samples.append(_sample_state(rep))
                rows.append({
                    "point": point, "param": cfg.sweep_param or "", "value": value,
                    "replication": r, "seed": rep.seed,
                    "status": "ok" if rep.coalesced else "non-coalesced",
                    "horizon": rep.horizon, "stop_time": rep.stop_time,
                    "event_draws": rep.event_draws,
                    "jobs_lo": int(lo_j[r]), "jobs_hi": int(hi_j[r]),
                    "width": int(hi_j[r] - lo_j[r]),
                })
            summary.append(_summarize(cfg, model, point, value, stop, lo_j, hi_j, samples,
                                      non_coalesced))
    finally:
        if pool is not None:
            pool.shutdown()
    return RunResult(cfg, rows, summary)


def _summarize(cfg, model, point, value, stop, lo_j, hi_j, samples, non_coalesced) -> dict:
    ms, ss, cs = _stats(stop)
    ml, sl, cl = _stats(lo_j)
    mh, sh, ch = _stats(hi_j)
    row = {"point": point, "param": cfg.sweep_param or "", "value": value, "n": len(stop),
           "non_coalesced": non_coalesced, "mean_stop_time": ms, "se_stop_time": ss,
           "ci95_stop_time": cs, "log2_mean_stop_time": math.log2(ms) if ms > 0 else "",
           "mean_jobs_lo": ml, "se_jobs_lo": sl, "ci95_jobs_lo": cl, "mean_jobs_hi": mh,
           "se_jobs_hi": sh, "ci95_jobs_hi": ch, "mean_width": float((hi_j - lo_j).mean()),
           "bound": "", "tv_vs_oracle": ""}
    if "bound-values" in cfg.outputs:
        b = model_bound(model, cfg.sampler)
        row["bound"] = "" if b is None else b
    if "tv-vs-oracle" in cfg.outputs:
        row["tv_vs_oracle"] = oracle_tv(model, cfg.model, samples)
    return row


def oracle_tv(model, model_kind: str, samples) -> float | str:
    """TV distance between exact samples and the oracle; empty for interval samplers."""
    if any(s is None for s in samples):
        return ""
    policy = "tos" if model_kind == "tos-individual" else "pos"
    chain, pi = oracle_for(model, policy)
    return tv_distance(empirical(samples, chain), pi)


def validate_config(cfg: ExperimentConfig) -> list[str]:
    """Warnings about bound applicability and termination at each sweep point."""
    notes = []
    for value, model in cfg.points():
        where = "" if value is None else f"{cfg.sweep_param} = {value:g}: "
        if isinstance(model, IndividualModel):
            b = bound_pos_coupling(model)
            if not b.applicable:
                notes.append(f"warning: {where}POS coupling-time bound not applicable ({b.reason})")
            if cfg.model == "tos-individual":
                t = bound_tos_coupling(model)
                if not t.applicable:
                    notes.append(f"warning: {where}TOS coupling-time bound not applicable "
                                 f"({t.reason})")
        else:
            h = bound_hsr(model)
            if not h.applicable:
                notes.append(f"warning: {where}exact joint sampler may not terminate; "
                             f"horizon cap applies ({h.reason})")
            if cfg.sampler == "alg4":
                a = best_algo4_bound(model, keep_order=True)
                if not a.applicable:
                    notes.append(f"warning: {where}componentwise stopping-time bound not "
                                 f"applicable ({a.reason})")
    return notes
