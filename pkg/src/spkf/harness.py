"""Campaign runner: seeded scenario runs, wall-clock timing, result tables.

Per-step timing wraps only the filter's predict+update call; truth
generation, error scoring and file output happen outside the timed
region. The first few steps of every run are dropped from timing
summaries as warmup, and medians are reported next to means because
single-run wall-clock numbers are noisy.
"""

import csv
import json
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .complexity import (ALGORITHMS, CostModelParams, cost_bound,
                         reduction_percent, state_dim_limit)
from .errors import EstimationError, NoPositiveRoot
from .filters import FILTER_NAMES, FILTER_STEPS, StateEstimate
from .scenarios import SCENARIOS

__all__ = [
    "DIVERGENCE_NORM",
    "RunResult",
    "CampaignConfig",
    "run_scenario",
    "monte_carlo",
    "timing_report",
    "complexity_grid",
    "summarize_campaign",
    "write_campaign_outputs",
    "write_summary_csv",
    "read_summary_csv",
    "write_errors_csv",
    "write_timing_csv",
    "write_complexity_csv",
    "write_run_csv",
]

DIVERGENCE_NORM = 1e9
_WARMUP_DEFAULT = 10


@dataclass
class RunResult:
    """Error and timing series for one (filter, seed) pass.

    times holds the measurement epochs, errors the per-step
    estimate-minus-truth vectors, error_norms the scenario's headline
    error metric, and step_ns the wall-clock nanoseconds spent inside
    the filter step. A run cut short by divergence keeps the series it
    produced, so all four stay equal in length.
    """

    filter_name: str
    seed: int
    times: np.ndarray
    errors: np.ndarray
    error_norms: np.ndarray
    step_ns: np.ndarray
    steady_state_start: float
    diverged: bool = False

    def summary(self, warmup_steps: int = _WARMUP_DEFAULT) -> dict:
        """Mean steady-state error and mean per-step time, with medians."""
        ss = self.error_norms[self.times >= self.steady_state_start]
        if ss.size == 0:
            ss = self.error_norms
        timed = self.step_ns
        if timed.size > warmup_steps:
            timed = timed[warmup_steps:]
        return {
            "filter": self.filter_name,
            "seed": self.seed,
            "mean_error": float(ss.mean()) if ss.size else float("nan"),
            "median_error": float(np.median(ss)) if ss.size else float("nan"),
            "mean_step_ns": float(timed.mean()) if timed.size else float("nan"),
            "median_step_ns": float(np.median(timed)) if timed.size else float("nan"),
            "diverged": self.diverged,
        }


@dataclass
class CampaignConfig:
    """What to run and where to write it."""

    scenario: str
    filters: list = field(default_factory=lambda: list(FILTER_NAMES))
    seeds: list = field(default_factory=lambda: [0])
    warmup_steps: int = _WARMUP_DEFAULT
    out_dir: Path | None = None

    def __post_init__(self):
        if self.scenario not in SCENARIOS:
            raise ValueError(f"unknown scenario '{self.scenario}'")
        unknown = [f for f in self.filters if f not in FILTER_STEPS]
        if unknown:
            raise ValueError(f"unknown filters {unknown}")
        if not self.seeds:
            raise ValueError("at least one seed is required")
        if len(set(self.seeds)) != len(self.seeds):
            raise ValueError("seeds must be distinct")
        if self.warmup_steps < 0:
            raise ValueError("warmup_steps must be non-negative")
        if self.out_dir is not None:
            self.out_dir = Path(self.out_dir)


def run_scenario(scenario, filter_name: str, seed: int, cfg=None, *,
                 clock=None, run=None) -> RunResult:
    """Step one filter over one seeded run, timing predict+update only.

    run lets a campaign reuse the seed's simulated truth across filters;
    simulate(seed) is deterministic, so passing it is purely a speedup.
    A step whose error norm passes DIVERGENCE_NORM, or that raises an
    EstimationError, flags the run as diverged and ends it; the caller's
    campaign carries on.
    """
    if filter_name not in FILTER_STEPS:
        raise ValueError(f"unknown filter '{filter_name}'")
    step = FILTER_STEPS[filter_name]
    if cfg is None:
        cfg = scenario.filter_config()
    if clock is None:
        clock = time.perf_counter_ns
    if run is None:
        run = scenario.simulate(seed)
    dyn = scenario.dynamics()
    dt = scenario.dt
    steps = len(run.measurements)
    est = StateEstimate(run.initial.t, run.initial.mean.copy(),
                        run.initial.cov.copy())

    means = np.empty((steps, scenario.state_dim))
    step_ns = np.empty(steps, dtype=np.int64)
    done = 0
    diverged = False
    for k in range(steps):
        z, model = run.measurements[k], run.meas_models[k]
        try:
            t0 = clock()
            est = step(dyn, model, est, z, dt, cfg)
            step_ns[k] = clock() - t0
        except EstimationError:
            diverged = True
            break
        means[k] = est.mean
        done = k + 1
        if scenario.error_norm(est.mean, run.states[k + 1]) > DIVERGENCE_NORM:
            diverged = True
            break

    truth = run.states[1:done + 1]
    errors = np.array([scenario.error_vector(means[k], truth[k])
                       for k in range(done)]).reshape(done, scenario.state_dim)
    norms = np.array([scenario.error_norm(means[k], truth[k])
                      for k in range(done)])
    return RunResult(filter_name, seed, run.times[1:done + 1].copy(), errors,
                     norms, step_ns[:done].copy(), scenario.steady_state_start,
                     diverged)


def monte_carlo(cfg: CampaignConfig, scenario=None, *, sequential=False,
                max_workers=None, clock=None):
    """Run every (seed, filter) pair and aggregate per-filter statistics.

    Truth and measurements are simulated once per seed and shared across
    filters. Pairs fan out over a thread pool unless sequential is set
    (use it for timing runs to avoid contention skew); aggregation is
    always single-threaded. Returns (summary rows, {(seed, filter):
    RunResult}) and writes the result tables when cfg.out_dir is set.
    """
    if scenario is None:
        scenario = SCENARIOS[cfg.scenario]()
    runs = {seed: scenario.simulate(seed) for seed in cfg.seeds}
    pairs = [(seed, f) for seed in cfg.seeds for f in cfg.filters]
    if sequential:
        results = {
            (seed, f): run_scenario(scenario, f, seed, clock=clock,
                                    run=runs[seed])
            for seed, f in pairs
        }
    else:
        with ThreadPoolExecutor(max_workers=max_workers) as pool:
            futures = {
                (seed, f): pool.submit(run_scenario, scenario, f, seed,
                                       clock=clock, run=runs[seed])
                for seed, f in pairs
            }
        results = {key: fut.result() for key, fut in futures.items()}
    rows = summarize_campaign(cfg, results)
    if cfg.out_dir is not None:
        write_campaign_outputs(cfg, results, rows)
    return rows, results


def summarize_campaign(cfg: CampaignConfig, results: dict) -> list:
    """Per-filter mean/std steady-state error and mean step time.

    Diverged seeds are excluded from the statistics and counted in the
    row's failures field. reduction_pct compares each filter's mean step
    time against the UKF's (None when no UKF ran).
    """
    rows = []
    for f in cfg.filters:
        sums = [results[(seed, f)].summary(cfg.warmup_steps)
                for seed in cfg.seeds]
        good = [s for s in sums if not s["diverged"]]
        errs = np.array([s["mean_error"] for s in good])
        nss = np.array([s["mean_step_ns"] for s in good])
        rows.append({
            "filter": f,
            "mean_err": float(errs.mean()) if errs.size else float("nan"),
            "std_err": float(errs.std()) if errs.size else float("nan"),
            "median_err": float(np.median(errs)) if errs.size else float("nan"),
            "mean_step_ns": float(nss.mean()) if nss.size else float("nan"),
            "median_step_ns": float(np.median(nss)) if nss.size else float("nan"),
            "reduction_pct": None,
            "failures": len(sums) - len(good),
        })
    base = next((r["mean_step_ns"] for r in rows if r["filter"] == "ukf"), None)
    if base is not None and base == base:
        for r in rows:
            r["reduction_pct"] = 100.0 * (1.0 - r["mean_step_ns"] / base)
    return rows


def timing_report(results, warmup_steps: int = _WARMUP_DEFAULT) -> list:
    """Percentage per-step time reduction of each filter against the UKF."""
    runs = list(results.values()) if isinstance(results, dict) else list(results)
    by_filter = {}
    for r in runs:
        by_filter.setdefault(r.filter_name, []).append(
            r.summary(warmup_steps)["mean_step_ns"])
    if "ukf" not in by_filter:
        raise ValueError("timing report needs a UKF baseline")
    means = {f: float(np.mean(v)) for f, v in by_filter.items()}
    base = means["ukf"]
    return [
        {"filter": f, "mean_step_ns": m,
         "reduction_pct": 100.0 * (1.0 - m / base)}
        for f, m in means.items()
    ]


def complexity_grid(n_values, j_values, h_values):
    """Cost-model rows over a parameter grid plus dimension-limit rows.

    Returns (grid rows, limit rows). Grid rows carry (algo, n, j, h,
    cost_bound, reduction_percent); the UKF baseline reduction is 0 by
    definition. Limit rows carry the largest beneficial state dimension
    per (algo, j, h), infinite when the fast variant never loses.
    """
    grid = []
    for algo in ALGORITHMS:
        for n in n_values:
            for j in j_values:
                for h in h_values:
                    p = CostModelParams(n, j, h)
                    red = 0.0 if algo == "ukf" else reduction_percent(algo, p)
                    grid.append({
                        "algo": algo, "n": n, "j": j, "h": h,
                        "cost_bound": cost_bound(algo, p),
                        "reduction_percent": red,
                    })
    limits = []
    for algo in ALGORITHMS:
        if algo == "ukf":
            continue
        for j in j_values:
            for h in h_values:
                try:
                    lim = state_dim_limit(algo, j, h)
                except NoPositiveRoot:
                    lim = float("inf")
                limits.append({"algo": algo, "j": j, "h": h,
                               "state_dim_limit": lim})
    return grid, limits


def _fmt(value) -> str:
    """repr for floats so CSV numbers round-trip exactly."""
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _write_rows(path: Path, header, rows):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        writer.writerows([[_fmt(v) for v in row] for row in rows])


_SUMMARY_COLUMNS = ("filter", "mean_err", "std_err", "mean_step_ns",
                    "reduction_pct")


def write_summary_csv(path, rows):
    _write_rows(Path(path), _SUMMARY_COLUMNS,
                [[r[c] for c in _SUMMARY_COLUMNS] for r in rows])


def read_summary_csv(path) -> list:
    """Parse a summary table back; inverse of write_summary_csv."""
    out = []
    with open(path, encoding="utf-8", newline="") as fh:
        for rec in csv.DictReader(fh):
            row = {"filter": rec["filter"]}
            for c in _SUMMARY_COLUMNS[1:]:
                row[c] = float(rec[c]) if rec[c] else None
            out.append(row)
    return out


def write_errors_csv(path, result: RunResult):
    n = result.errors.shape[1]
    header = ["t"] + [f"err_{i}" for i in range(n)] + ["norm"]
    rows = [[result.times[k], *result.errors[k], result.error_norms[k]]
            for k in range(result.times.size)]
    _write_rows(Path(path), header, rows)


def write_timing_csv(path, results: dict, warmup_steps: int = _WARMUP_DEFAULT):
    header = ["filter", "seed", "mean_step_ns", "median_step_ns", "diverged"]
    rows = []
    for (seed, f), res in sorted(results.items(), key=lambda kv: (kv[0][1], kv[0][0])):
        s = res.summary(warmup_steps)
        rows.append([f, seed, s["mean_step_ns"], s["median_step_ns"],
                     int(s["diverged"])])
    _write_rows(Path(path), header, rows)


def write_complexity_csv(path, grid, limits):
    """Write the grid to path and the limit table next to it."""
    path = Path(path)
    _write_rows(path, ["algo", "n", "j", "h", "cost_bound", "reduction_percent"],
                [[r["algo"], r["n"], r["j"], r["h"], r["cost_bound"],
                  r["reduction_percent"]] for r in grid])
    limit_path = path.with_name(path.stem + "_limits" + path.suffix)
    _write_rows(limit_path, ["algo", "j", "h", "state_dim_limit"],
                [[r["algo"], r["j"], r["h"], r["state_dim_limit"]]
                 for r in limits])
    return limit_path


def write_run_csv(path, run):
    """Export one simulated run: truth states and raw measurements.

    Measurement widths can vary per epoch (satellite visibility), so
    short epochs leave trailing columns blank.
    """
    n = run.states.shape[1]
    widest = max((np.atleast_1d(z).size for z in run.measurements), default=0)
    header = (["t"] + [f"x_{i}" for i in range(n)]
              + [f"z_{i}" for i in range(widest)])
    rows = [[run.times[0], *run.states[0], *[None] * widest]]
    for k, z in enumerate(run.measurements):
        z = np.atleast_1d(z)
        pad = [None] * (widest - z.size)
        rows.append([run.times[k + 1], *run.states[k + 1], *z, *pad])
    _write_rows(Path(path), header, rows)


def write_campaign_outputs(cfg: CampaignConfig, results: dict, rows: list):
    """summary.csv/json, timing.csv and per-run error series under out_dir."""
    out = cfg.out_dir
    out.mkdir(parents=True, exist_ok=True)
    write_summary_csv(out / "summary.csv", rows)
    write_timing_csv(out / "timing.csv", results, cfg.warmup_steps)
    for (seed, f), res in results.items():
        write_errors_csv(out / f"errors_{f}_{seed}.csv", res)
    payload = {
        "scenario": cfg.scenario,
        "seeds": list(cfg.seeds),
        "warmup_steps": cfg.warmup_steps,
        "summary": rows,
        "runs": [res.summary(cfg.warmup_steps) for res in results.values()],
    }
    with open(out / "summary.json", "w", encoding="utf-8", newline="") as fh:
        json.dump(payload, fh, indent=2)
        fh.write("\n")
