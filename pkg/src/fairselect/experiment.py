"""Seeded trial sweeps over alpha / lambda / tau / n grids.

One experiment = a generator, one sweep axis, a set of algorithms, and a
trial count. Every trial derives its own substreams from (seed, grid
index, trial index), so results are byte-identical no matter how trials
are scheduled; the worker count only changes wall-clock time.

Fractional outputs (the LP vertex and the multi-objective iterate) are
rounded to exactly-n subsets with marginal-preserving dependent rounding
before metrics are computed, mirroring how the sweeps are reported.
"""

from __future__ import annotations

import csv
import io
import json
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import metrics as metrics_mod
from . import selectors
from .core import (InfeasibleError, Instance, constraints_from_alpha,
                   violation_report)
from .datagen import (KIND_DISPARATE_ERROR, GeneratorSpec,
                      estimate_q_by_utility_bins, gen_disparate_error,
                      gen_disparate_utility, inject_flip_noise)
from .seeding import seed_sequence

ALGORITHMS = ("Blind", "FairExpec", "FairExpecGrp", "Thrsh", "MultObj")
SWEEP_KINDS = ("alpha_grid", "lambda_grid", "tau_grid", "n_grid")
TARGET_EQUAL = "EqualRepresentation"
TARGET_PROPORTIONAL = "Proportional"
METRIC_NAMES = ("risk_difference", "selection_lift", "utility_ratio", "max_violation")
WORKERS_ENV = "FAIRSELECT_WORKERS"


@dataclass(frozen=True, eq=False)
class ExperimentConfig:
    generator: GeneratorSpec
    sweep_kind: str
    grid: tuple
    algorithms: tuple
    trials: int
    n: int
    m: int
    target: str
    delta: float
    seed: int
    alpha: float = 1.0      # fixed alpha when the sweep axis is another knob
    lambda_: float = 0.0    # fixed lambda likewise
    tau: float = 0.0        # fixed flip noise likewise
    fw_iters: int = 500
    bins: int = 20

    def __post_init__(self):
        if self.sweep_kind not in SWEEP_KINDS:
            raise ValueError(f"sweep must be one of {SWEEP_KINDS}")
        if not self.grid:
            raise ValueError("the sweep grid must be nonempty")
        if self.trials < 1:
            raise ValueError("need at least one trial")
        bad = [a for a in self.algorithms if a not in ALGORITHMS]
        if bad:
            raise ValueError(f"unknown algorithms: {bad}")
        if self.target not in (TARGET_EQUAL, TARGET_PROPORTIONAL):
            raise ValueError(f"target must be {TARGET_EQUAL} or {TARGET_PROPORTIONAL}")
        object.__setattr__(self, "grid", tuple(float(g) for g in self.grid))
        object.__setattr__(self, "algorithms", tuple(self.algorithms))

    def to_dict(self) -> dict:
        return {
            "generator": self.generator.to_dict(),
            "sweep": {self.sweep_kind: list(self.grid)},
            "algorithms": list(self.algorithms),
            "trials": self.trials, "n": self.n, "m": self.m,
            "target": self.target, "delta": self.delta, "seed": self.seed,
            "alpha": self.alpha, "lambda": self.lambda_, "tau": self.tau,
            "fw_iters": self.fw_iters, "bins": self.bins,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        sweep = data["sweep"]
        if len(sweep) != 1:
            raise ValueError("the sweep section must contain exactly one grid")
        (kind, grid), = sweep.items()
        return cls(
            generator=GeneratorSpec.from_dict(data["generator"]),
            sweep_kind=kind, grid=tuple(grid),
            algorithms=tuple(data["algorithms"]),
            trials=int(data["trials"]), n=int(data["n"]), m=int(data["m"]),
            target=data["target"], delta=float(data["delta"]), seed=int(data["seed"]),
            alpha=float(data.get("alpha", 1.0)), lambda_=float(data.get("lambda", 0.0)),
            tau=float(data.get("tau", 0.0)), fw_iters=int(data.get("fw_iters", 500)),
            bins=int(data.get("bins", 20)),
        )


def load_config(path) -> ExperimentConfig:
    with open(path) as fh:
        return ExperimentConfig.from_dict(json.load(fh))


def save_config(cfg: ExperimentConfig, path) -> None:
    with open(path, "w") as fh:
        json.dump(cfg.to_dict(), fh, indent=2)


@dataclass(frozen=True, eq=False)
class ResultRow:
    grid: float
    algorithm: str
    metric: str
    mean: Optional[float]
    sem: Optional[float]

    def key(self):
        return (self.grid, self.algorithm, self.metric, self.mean, self.sem)


@dataclass(frozen=True, eq=False)
class ResultTable:
    rows: tuple
    per_trial: tuple = field(default_factory=tuple, repr=False)
    # per_trial entries: (grid, algorithm, metric, trial index, value or None)

    def __eq__(self, other):
        return isinstance(other, ResultTable) and \
            [r.key() for r in self.rows] == [r.key() for r in other.rows]

    def mean_of(self, grid: float, algorithm: str, metric: str) -> Optional[float]:
        for row in self.rows:
            if (row.grid, row.algorithm, row.metric) == (grid, algorithm, metric):
                return row.mean
        raise KeyError((grid, algorithm, metric))


def _grid_settings(cfg: ExperimentConfig, value: float):
    """Resolve the knobs for one grid point."""
    alpha, lam, tau, n = cfg.alpha, cfg.lambda_, cfg.tau, cfg.n
    if cfg.sweep_kind == "alpha_grid":
        alpha = value
    elif cfg.sweep_kind == "lambda_grid":
        lam = value
    elif cfg.sweep_kind == "tau_grid":
        tau = value
    else:
        n = int(value)
    return alpha, lam, tau, n


def _make_trial_instance(cfg: ExperimentConfig, tau: float, n: int, ss) -> Instance:
    gen = cfg.generator
    if gen.kind == KIND_DISPARATE_ERROR:
        spec = GeneratorSpec(kind=gen.kind, m=cfg.m, n=n,
                             seed=seed_sequence(ss, 0), params=gen.params)
        return gen_disparate_error(spec)
    spec_train = GeneratorSpec(kind=gen.kind, m=cfg.m, n=n,
                               seed=seed_sequence(ss, 0), params=gen.params)
    spec_eval = GeneratorSpec(kind=gen.kind, m=cfg.m, n=n,
                              seed=seed_sequence(ss, 1), params=gen.params)
    train = gen_disparate_utility(spec_train)
    inst = gen_disparate_utility(spec_eval)
    if tau > 0:
        inst = inject_flip_noise(inst, tau, seed_sequence(ss, 2))
    else:
        inst = inst.with_noisy_attrs(inst.true_attrs.copy())
    q = estimate_q_by_utility_bins(inst, cfg.bins, train=train)
    return inst.with_noise((q,))


def _target_vector(cfg: ExperimentConfig, inst: Instance) -> np.ndarray:
    p = inst.p[0]
    if cfg.target == TARGET_EQUAL:
        return np.full(p, 1.0 / p)
    counts = np.bincount(inst.true_attrs[:, 0], minlength=p)
    return counts / inst.m


def run_trial(cfg: ExperimentConfig, grid_idx: int, trial: int) -> dict:
    """All algorithms on one freshly drawn instance; returns
    {algorithm: {metric: value or None}} with None marking an infeasible run."""
    alpha, lam, tau, n = _grid_settings(cfg, cfg.grid[grid_idx])
    ss = seed_sequence(cfg.seed, grid_idx, trial)
    inst = _make_trial_instance(cfg, tau, n, ss)
    t = _target_vector(cfg, inst)
    if np.any(t <= 0):
        return {alg: dict.fromkeys(METRIC_NAMES) for alg in cfg.algorithms}
    cs = constraints_from_alpha(n, t, alpha, delta=cfg.delta)
    blind_sel = selectors.blind(inst)
    qprime = None
    if "Thrsh" in cfg.algorithms or "MultObj" in cfg.algorithms:
        qprime = selectors.impute_bayes(inst.noise_matrix(0), seed=seed_sequence(ss, 3))

    out = {}
    for a_idx, alg in enumerate(cfg.algorithms):
        round_seed = seed_sequence(ss, 4, a_idx)
        try:
            if alg == "Blind":
                sel = blind_sel
            elif alg == "FairExpec":
                frac = selectors.denoised_bfs(inst, cs)
                sel = selectors.dependent_round(frac.x, n, round_seed, inst.utilities)
            elif alg == "FairExpecGrp":
                frac = selectors.denoised_bfs(selectors.group_level_instance(inst), cs)
                sel = selectors.dependent_round(frac.x, n, round_seed, inst.utilities)
            elif alg == "Thrsh":
                sel = selectors.thrsh(inst, cs, qprime=qprime)
            else:  # MultObj
                acfg = selectors.AlgorithmConfig(target=tuple(t), alpha=alpha, lambda_=lam,
                                                 delta=cfg.delta, fw_iters=cfg.fw_iters)
                frac_x = selectors.mult_obj(inst, acfg, qprime=qprime)
                sel = selectors.dependent_round(frac_x, n, round_seed, inst.utilities)
        except InfeasibleError:
            out[alg] = dict.fromkeys(METRIC_NAMES)
            continue
        report = metrics_mod.compute_report(inst, sel, t, blind_sel.total_utility)
        viol = violation_report(sel, inst, cs, attrs="true")
        out[alg] = {
            "risk_difference": report.risk_difference,
            "selection_lift": report.selection_lift,
            "utility_ratio": report.utility_ratio,
            "max_violation": viol.max_violation,
        }
    return out


def _worker(args) -> dict:
    cfg_dict, grid_idx, trial = args
    return run_trial(ExperimentConfig.from_dict(cfg_dict), grid_idx, trial)


def run_experiment(cfg: ExperimentConfig, workers: Optional[int] = None) -> ResultTable:
    """Full sweep. Output ordering is fixed by (grid index, algorithm,
    metric) regardless of scheduling; infeasible trials are excluded from
    means and counted in an extra ``excluded_trials`` row."""
    if workers is None:
        workers = int(os.environ.get(WORKERS_ENV, "1"))
    tasks = [(cfg.to_dict(), gi, tr)
             for gi in range(len(cfg.grid)) for tr in range(cfg.trials)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_worker, tasks, chunksize=max(1, len(tasks) // (4 * workers))))
    else:
        results = [run_trial(cfg, gi, tr) for _, gi, tr in tasks]

    by_point = {}
    for (_, gi, tr), res in zip(tasks, results):
        by_point.setdefault(gi, []).append(res)

    rows = []
    per_trial = []
    for gi in range(len(cfg.grid)):
        grid_value = cfg.grid[gi]
        for alg in cfg.algorithms:
            excluded = 0
            series = {name: [] for name in METRIC_NAMES}
            for tr, res in enumerate(by_point[gi]):
                vals = res[alg]
                if vals["risk_difference"] is None:
                    excluded += 1
                for name in METRIC_NAMES:
                    per_trial.append((grid_value, alg, name, tr, vals[name]))
                    if vals[name] is not None:
                        series[name].append(vals[name])
            for name in METRIC_NAMES:
                vals = series[name]
                if not vals:
                    rows.append(ResultRow(grid_value, alg, name, None, None))
                    continue
                mean = float(np.mean(vals))
                sem = float(np.std(vals, ddof=1) / np.sqrt(len(vals))) if len(vals) > 1 else 0.0
                rows.append(ResultRow(grid_value, alg, name, mean, sem))
            rows.append(ResultRow(grid_value, alg, "excluded_trials", float(excluded), 0.0))
    return ResultTable(rows=tuple(rows), per_trial=tuple(per_trial))


def _fmt(value: Optional[float]) -> str:
    return "NA" if value is None else f"{value:.6g}"


def render_csv(table: ResultTable) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["grid", "algorithm", "metric", "mean", "sem"])
    for row in table.rows:
        writer.writerow([_fmt(row.grid), row.algorithm, row.metric,
                         _fmt(row.mean), _fmt(row.sem)])
    return buf.getvalue()


def write_results(table: ResultTable, path, format: str = "csv") -> None:
    """Bit-stable dump: floats at six significant digits, NA for missing."""
    if format == "csv":
        with open(path, "w", newline="") as fh:
            fh.write(render_csv(table))
    elif format == "json":
        payload = {"rows": [
            {"grid": row.grid, "algorithm": row.algorithm, "metric": row.metric,
             "mean": row.mean, "sem": row.sem} for row in table.rows]}
        with open(path, "w") as fh:
            json.dump(payload, fh, indent=2)
    else:
        raise ValueError(f"unknown format {format!r}")


def read_results(path, format: str = "csv") -> ResultTable:
    if format == "json":
        with open(path) as fh:
            payload = json.load(fh)
        rows = tuple(ResultRow(r["grid"], r["algorithm"], r["metric"], r["mean"], r["sem"])
                     for r in payload["rows"])
        return ResultTable(rows=rows)
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header != ["grid", "algorithm", "metric", "mean", "sem"]:
            raise ValueError(f"unexpected header {header}")
        rows = []
        for grid, alg, metric, mean, sem in reader:
            rows.append(ResultRow(
                float(grid), alg, metric,
                None if mean == "NA" else float(mean),
                None if sem == "NA" else float(sem)))
    return ResultTable(rows=tuple(rows))


def write_per_trial(table: ResultTable, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["grid", "algorithm", "metric", "trial", "value"])
        for grid, alg, metric, trial, value in table.per_trial:
            writer.writerow([_fmt(grid), alg, metric, trial,
                             "NA" if value is None else f"{value:.12g}"])
