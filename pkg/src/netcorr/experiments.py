"""
Desk-scale replications of the simulation studies.

Four experiments are provided:

``fig1``
    Phi permutation tests on quantile-categorised SAR data over random
    neighbour graphs, rejection rate against ``rho``.
``fig2``
    Phi permutation tests on correlated-error data over point locations,
    using either the true exponential-decay weights or truncated
    inverse-distance weights.
``fig3``
    Coverage of the i.i.d. 95% interval for the mean and Moran power after
    neighbour averaging on a small-world network.
``table1``
    Simultaneous coverage of i.i.d. multinomial intervals and Phi power
    (normal and permutation) after random-neighbour copying.

Replicate ``r`` of setting ``s`` draws all of its randomness from seeds
derived from ``(seed, experiment, s, r)``.  Replicates are grouped in chunks
of fixed size; chunks may run in worker processes, and the report is always
assembled in replicate order, so the output does not depend on the number
of workers.
"""

from __future__ import annotations

import csv
import json
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.stats import norm

from ._seeding import derive_seed, stream
from .inference import PermutationPlan, run_moran_test, run_phi_test
from .simgen import (
    CORRERR_CUTOFFS,
    SAR_CUTOFFS,
    TRANSMISSION_MARGINALS,
    categorize_by_quantiles,
    covariance_factor,
    draw_labels,
    gen_correlated_error,
    gen_network,
    gen_neighbor_matrix,
    gen_sar,
    transmit_categorical,
    transmit_continuous,
    uniform_coordinates,
)
from .stats import CategoricalSample
from .weights import capped_fraction, exp_decay_weights, inverse_distance_weights

__all__ = [
    "EXPERIMENTS",
    "ExperimentReport",
    "QUICK",
    "coverage_experiment_categorical",
    "coverage_experiment_continuous",
    "rejection_curve_correrr",
    "rejection_curve_sar",
    "replay",
    "run_experiment",
]

CHUNK = 25
CSV_FIELDS = (
    "experiment",
    "setting",
    "replicate",
    "seed",
    "statistic",
    "z",
    "p_normal",
    "p_permutation",
    "reject_permutation",
    "reject_normal",
    "covered",
    "ybar",
)

# experiment tags keep the seed streams of different experiments apart
_TAGS = {"fig1": 1, "fig2": 2, "fig3": 3, "table1": 4}


@dataclass
class ExperimentReport:
    """Per-setting summaries plus one record per replicate.

    ``config`` holds every argument needed to rerun the experiment;
    ``wall_clock`` is the only field that varies between reruns.
    """

    experiment: str
    config: dict
    settings: list[dict]
    records: list[dict] = field(repr=False)
    wall_clock: float = 0.0
    extra: dict = field(default_factory=dict)

    def content(self) -> dict:
        return {
            "experiment": self.experiment,
            "config": self.config,
            "settings": self.settings,
            "records": self.records,
            "extra": self.extra,
        }

    def to_dict(self) -> dict:
        out = self.content()
        out["wall_clock_seconds"] = self.wall_clock
        return out

    def setting(self, setting_id: str) -> dict:
        for s in self.settings:
            if s["setting"] == setting_id:
                return s
        raise KeyError(setting_id)

    def write_json(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n")

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=CSV_FIELDS, extrasaction="ignore", lineterminator="\n")
            writer.writeheader()
            for rec in self.records:
                writer.writerow({k: ("" if rec.get(k) is None else rec[k]) for k in CSV_FIELDS})


def _rate(flags) -> tuple[float, float]:
    flags = np.asarray(flags, dtype=bool)
    r = flags.sum() / flags.size
    return float(r), float(np.sqrt(r * (1 - r) / flags.size))


def _map_chunks(fn, jobs: list[tuple], threads: int | None) -> list:
    workers = (os.cpu_count() or 1) if threads is None else max(1, int(threads))
    if workers <= 1 or len(jobs) <= 1:
        return [fn(*job) for job in jobs]
    with ProcessPoolExecutor(min(workers, len(jobs))) as pool:
        return list(pool.map(fn, *zip(*jobs)))


def _chunks(reps: int):
    return [(a, min(a + CHUNK, reps)) for a in range(0, reps, CHUNK)]


def _run_settings(name: str, chunk_fn, settings: list[dict], reps: int, threads: int | None) -> list[list[dict]]:
    jobs = [(s, a, b) for s in settings for a, b in _chunks(reps)]
    parts = _map_chunks(chunk_fn, jobs, threads)
    out, i = [], 0
    for _ in settings:
        recs = []
        for _ in _chunks(reps):
            recs.extend(parts[i])
            i += 1
        out.append(recs)
    return out


def _base_record(name: str, setting: dict, r: int, seed: int) -> dict:
    return {"experiment": name, "setting": setting["setting"], "replicate": r, "seed": seed}


def _test_fields(res, alpha: float) -> dict:
    return {
        "statistic": res.statistic,
        "z": res.z,
        "p_normal": res.p_normal,
        "p_permutation": res.p_permutation,
        "reject_permutation": bool(res.p_permutation <= alpha),
        "reject_normal": None if res.p_normal is None else bool(res.p_normal <= alpha),
    }


def _summarize(setting: dict, recs: list[dict]) -> dict:
    out = dict(setting)
    out["reps"] = len(recs)
    rate, se = _rate([r["reject_permutation"] for r in recs])
    out["rejection_permutation"], out["se_permutation"] = rate, se
    zflags = [r["reject_normal"] for r in recs if r.get("reject_normal") is not None]
    if len(zflags) == len(recs):
        out["rejection_normal"], out["se_normal"] = _rate(zflags)
    if recs and recs[0].get("covered") is not None:
        out["coverage"], out["se_coverage"] = _rate([r["covered"] for r in recs])
    if recs and recs[0].get("ybar") is not None:
        ybar = np.array([r["ybar"] for r in recs])
        out["mean_ybar"] = float(ybar.mean())
        out["se_mean_ybar"] = float(ybar.std(ddof=1) / np.sqrt(ybar.size)) if ybar.size > 1 else None
    return out


# --------------------------------------------------------------------- fig1


def _fig1_chunk(setting: dict, start: int, stop: int) -> list[dict]:
    cfg = setting["_cfg"]
    recs = []
    for r in range(start, stop):
        rs = derive_seed(cfg["seed"], _TAGS["fig1"], setting["_index"], r)
        W = gen_neighbor_matrix(cfg["n"], setting["d"], derive_seed(rs, 1))
        y = gen_sar(W, setting["rho"], derive_seed(rs, 2))
        sample = categorize_by_quantiles(y, SAR_CUTOFFS)
        res = run_phi_test(sample, W, PermutationPlan(cfg["m"], derive_seed(rs, 3)), threads=1)
        rec = _base_record("fig1", setting, r, rs)
        rec.update(_test_fields(res, cfg["alpha"]))
        recs.append(rec)
    return recs


def rejection_curve_sar(
    d_values=(3, 5, 7, 10),
    rho_values=(0.0, 0.2, 0.4, 0.6),
    n: int = 100,
    reps: int = 500,
    m: int = 500,
    seed: int = 0,
    alpha: float = 0.05,
    threads: int | None = 1,
) -> ExperimentReport:
    """Phi rejection rates on categorised SAR data for each ``(d, rho)``.

    A fresh neighbour graph with degrees ``1 + Binomial(2(d-1), 1/2)`` is drawn
    for every replicate, SAR data are cut at the quartiles into four
    categories, and the Phi permutation test is run at level ``alpha``.
    """
    config = dict(d_values=list(d_values), rho_values=[float(r) for r in rho_values], n=n, reps=reps, m=m,
                  seed=seed, alpha=alpha)
    cfg = dict(n=n, m=m, seed=seed, alpha=alpha)
    settings = []
    for d in d_values:
        for rho in rho_values:
            settings.append({"setting": f"d={d},rho={float(rho):g}", "d": int(d), "rho": float(rho),
                             "_index": len(settings), "_cfg": cfg})
    return _finish("fig1", config, settings, _fig1_chunk, reps, threads)


def _finish(name, config, settings, chunk_fn, reps, threads, extra=None) -> ExperimentReport:
    t0 = time.perf_counter()
    per_setting = _run_settings(name, chunk_fn, settings, reps, threads)
    summaries, records = [], []
    for s, recs in zip(settings, per_setting):
        public = {k: v for k, v in s.items() if not k.startswith("_")}
        summaries.append(_summarize(public, recs))
        records.extend(recs)
    return ExperimentReport(name, config, summaries, records, time.perf_counter() - t0, extra or {})


# --------------------------------------------------------------------- fig2


def _fig2_structures(cfg: dict):
    coords = np.asarray(cfg["coords"]) if cfg["coords"] is not None else uniform_coordinates(
        cfg["n"], derive_seed(cfg["seed"], _TAGS["fig2"], 0))
    return coords, inverse_distance_weights(coords, cfg["cap"])


def _fig2_chunk(setting: dict, start: int, stop: int) -> list[dict]:
    cfg = setting["_cfg"]
    coords, W_est = _fig2_structures(cfg)
    q = setting["q"]
    Pi = exp_decay_weights(coords, q) if q is not None else None
    factor = covariance_factor(Pi) if Pi is not None else np.eye(len(coords))
    W = W_est if setting["weight_mode"] == "estimated_w" or Pi is None else Pi
    recs = []
    for r in range(start, stop):
        rs = derive_seed(cfg["seed"], _TAGS["fig2"], setting["_data_index"], r)
        y = gen_correlated_error(None, derive_seed(rs, 1), factor=factor)
        sample = categorize_by_quantiles(y, CORRERR_CUTOFFS)
        res = run_phi_test(sample, W, PermutationPlan(cfg["m"], derive_seed(rs, 2)), threads=1)
        rec = _base_record("fig2", setting, r, rs)
        rec.update(_test_fields(res, cfg["alpha"]))
        recs.append(rec)
    return recs


def rejection_curve_correrr(
    q_values=(25.0, 50.0, 100.0),
    n: int = 400,
    reps: int = 200,
    m: int = 500,
    seed: int = 0,
    weight_mode: str = "both",
    include_null: bool = True,
    coords=None,
    cap: float = 10.0,
    alpha: float = 0.05,
    threads: int | None = 1,
) -> ExperimentReport:
    """Phi rejection rates on correlated-error data over fixed locations.

    Data are ``B^T xi`` with ``B^T B = Pi(q)``, ``Pi_ij = exp(-q d_ij / D)``,
    cut at the (0.1, 0.3, 0.6, 0.85) quantiles into five categories.  The
    test weights are ``Pi`` (``"true_pi"``), truncated inverse distance
    (``"estimated_w"``), or both on the same data.  The null setting draws
    independent data; it has no true weight matrix, so it is always tested
    with the inverse-distance weights.

    Locations are uniform on a 5 x 1 rectangle unless ``coords`` is given;
    that shape caps about 12% of the inverse-distance weights at 10.
    """
    if weight_mode not in ("true_pi", "estimated_w", "both"):
        raise ValueError("weight_mode must be true_pi, estimated_w or both")
    coords_list = None if coords is None else np.asarray(coords, dtype=float).tolist()
    if coords_list is not None:
        n = len(coords_list)
    config = dict(q_values=[float(q) for q in q_values], n=n, reps=reps, m=m, seed=seed, weight_mode=weight_mode,
                  include_null=include_null, coords=coords_list, cap=cap, alpha=alpha)
    cfg = dict(n=n, m=m, seed=seed, coords=coords_list, cap=cap, alpha=alpha)
    modes = ["true_pi", "estimated_w"] if weight_mode == "both" else [weight_mode]
    settings = []
    if include_null:
        settings.append({"setting": "null", "q": None, "weight_mode": "estimated_w", "_data_index": 0, "_cfg": cfg})
    for i, q in enumerate(q_values, start=1):
        for mode in modes:
            settings.append({"setting": f"q={float(q):g},{mode}", "q": float(q), "weight_mode": mode,
                             "_data_index": i, "_cfg": cfg})
    _, W_est = _fig2_structures(cfg)
    extra = {"capped_fraction": capped_fraction(W_est, cap)}
    return _finish("fig2", config, settings, _fig2_chunk, reps, threads, extra)


# --------------------------------------------------------------------- fig3


def _network(cfg: dict):
    return gen_network(cfg["n"], cfg["graph_model"], derive_seed(cfg["seed"], cfg["_tag"], 0), **cfg["graph_params"])


def _fig3_chunk(setting: dict, start: int, stop: int) -> list[dict]:
    cfg = setting["_cfg"]
    A = _network(cfg)
    n = cfg["n"]
    recs = []
    for r in range(start, stop):
        rs = derive_seed(cfg["seed"], _TAGS["fig3"], setting["_index"], r)
        y0 = stream(derive_seed(rs, 1)).standard_normal(n)
        y = transmit_continuous(y0, A, setting["t"], cfg["alpha_mix"])
        ybar = float(y.mean())
        se = float(y.std(ddof=1) / np.sqrt(n))
        res = run_moran_test(y, A, PermutationPlan(cfg["m"], derive_seed(rs, 2)), threads=1)
        rec = _base_record("fig3", setting, r, rs)
        rec.update(_test_fields(res, cfg["alpha"]))
        rec["ybar"] = ybar
        rec["covered"] = bool(abs(ybar) <= cfg["z_crit"] * se)
        recs.append(rec)
    return recs


def coverage_experiment_continuous(
    t_values=(0, 1, 2, 3),
    n: int = 200,
    reps: int = 500,
    m: int = 500,
    seed: int = 0,
    alpha_mix: float = 0.3,
    graph_model: str = "watts_strogatz",
    graph_params: dict | None = None,
    alpha: float = 0.05,
    threads: int | None = 1,
) -> ExperimentReport:
    """Coverage of ``ybar +- 1.96 s/sqrt(n)`` and Moran power after averaging.

    One connected network is drawn per experiment.  Each replicate starts
    from i.i.d. N(0, 1) values and applies ``t`` synchronous averaging steps
    with mixing weight ``alpha_mix``; the true mean is 0 throughout.
    """
    graph_params = dict(graph_params or {"k": 30, "beta": 0.1})
    config = dict(t_values=[int(t) for t in t_values], n=n, reps=reps, m=m, seed=seed, alpha_mix=alpha_mix,
                  graph_model=graph_model, graph_params=graph_params, alpha=alpha)
    cfg = dict(n=n, m=m, seed=seed, alpha_mix=alpha_mix, graph_model=graph_model, graph_params=graph_params,
               alpha=alpha, z_crit=1.96, _tag=_TAGS["fig3"])
    settings = [{"setting": f"t={int(t)}", "t": int(t), "_index": i, "_cfg": cfg} for i, t in enumerate(t_values)]
    return _finish("fig3", config, settings, _fig3_chunk, reps, threads)


# ------------------------------------------------------------------- table1


def simultaneous_cover(counts, truth, level: float = 0.95, method: str = "wilson") -> bool:
    """Whether Bonferroni-adjusted intervals cover every true proportion.

    ``method`` is ``"wilson"`` (score intervals) or ``"wald"``.
    """
    counts = np.asarray(counts, dtype=float)
    truth = np.asarray(truth, dtype=float)
    n = counts.sum()
    phat = counts / n
    z = norm.ppf(1 - (1 - level) / (2 * counts.size))
    if method == "wald":
        center, half = phat, z * np.sqrt(phat * (1 - phat) / n)
    elif method == "wilson":
        shrink = 1 + z * z / n
        center = (phat + z * z / (2 * n)) / shrink
        half = z * np.sqrt(phat * (1 - phat) / n + z * z / (4 * n * n)) / shrink
    else:
        raise ValueError(f"unknown interval method {method!r}")
    return bool(np.all(np.abs(center - truth) <= half))


def _table1_chunk(setting: dict, start: int, stop: int) -> list[dict]:
    cfg = setting["_cfg"]
    A = _network(cfg)
    marg = np.asarray(cfg["marginals"])
    K = marg.size
    recs = []
    for r in range(start, stop):
        rs = derive_seed(cfg["seed"], _TAGS["table1"], setting["_index"], r)
        labels0 = draw_labels(cfg["n"], marg, derive_seed(rs, 1))
        labels = transmit_categorical(labels0, A, setting["t"], cfg["p_adopt"], derive_seed(rs, 2))
        sample = CategoricalSample.from_values(labels, categories=range(K))
        res = run_phi_test(sample, A, PermutationPlan(cfg["m"], derive_seed(rs, 3)), threads=1)
        rec = _base_record("table1", setting, r, rs)
        rec.update(_test_fields(res, cfg["alpha"]))
        rec["covered"] = simultaneous_cover(sample.counts, marg, 1 - cfg["alpha"], cfg["ci_method"])
        recs.append(rec)
    return recs


def coverage_experiment_categorical(
    t_values=(0, 1, 2, 3),
    n: int = 200,
    reps: int = 500,
    m: int = 500,
    seed: int = 0,
    p_adopt: float = 0.3,
    marginals=TRANSMISSION_MARGINALS,
    graph_model: str = "watts_strogatz",
    graph_params: dict | None = None,
    ci_method: str = "wilson",
    alpha: float = 0.05,
    threads: int | None = 1,
) -> ExperimentReport:
    """Simultaneous CI coverage and Phi power after random-neighbour copying.

    Labels start i.i.d. from ``marginals`` and go through ``t`` copying
    steps with adoption probability ``p_adopt`` on one connected network.
    Coverage uses Bonferroni-adjusted intervals for all five proportions,
    Wilson score intervals by default; plain Wald intervals undercover at
    ``n = 200`` for the smallest category even without dependence.
    """
    graph_params = dict(graph_params or {"k": 30, "beta": 0.1})
    config = dict(t_values=[int(t) for t in t_values], n=n, reps=reps, m=m, seed=seed, p_adopt=p_adopt,
                  marginals=[float(p) for p in marginals], graph_model=graph_model, graph_params=graph_params,
                  ci_method=ci_method, alpha=alpha)
    cfg = dict(n=n, m=m, seed=seed, p_adopt=p_adopt, marginals=config["marginals"], graph_model=graph_model,
               graph_params=graph_params, ci_method=ci_method, alpha=alpha, _tag=_TAGS["table1"])
    settings = [{"setting": f"t={int(t)}", "t": int(t), "_index": i, "_cfg": cfg} for i, t in enumerate(t_values)]
    return _finish("table1", config, settings, _table1_chunk, reps, threads)


EXPERIMENTS = {
    "fig1": rejection_curve_sar,
    "fig2": rejection_curve_correrr,
    "fig3": coverage_experiment_continuous,
    "table1": coverage_experiment_categorical,
}

# quick profile: fewer replicates and permutations
QUICK = {"reps": 100, "m": 199}


def run_experiment(name: str, threads: int | None = 1, **overrides) -> ExperimentReport:
    if name not in EXPERIMENTS:
        raise ValueError(f"unknown experiment {name!r}; choose from {sorted(EXPERIMENTS)}")
    return EXPERIMENTS[name](threads=threads, **overrides)


def replay(report: ExperimentReport | dict, threads: int | None = 1) -> ExperimentReport:
    """Rerun an experiment from the configuration echoed in its report."""
    data = report.to_dict() if isinstance(report, ExperimentReport) else report
    return run_experiment(data["experiment"], threads=threads, **data["config"])
