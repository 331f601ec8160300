"""Synthetic instance generators and noise-information estimators.

Two families:

* disparate error rates: utilities are iid uniform, the probability rows
  come from a two-component truncated-normal mixture whose imputed labels
  have a much higher false discovery rate for the minority group.
* disparate utilities: the minority group is (unfairly) shifted to lower
  utilities; probability rows are not generated but estimated afterwards
  by binning utilities (estimate_q_by_utility_bins), optionally after
  flipping the observed labels with probability tau.

Generators are pure functions of their GeneratorSpec (including its seed);
regenerating reproduces the instance bit-exactly.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .core import Instance, UnsupportedError
from .seeding import make_rng

logger = logging.getLogger(__name__)

KIND_DISPARATE_ERROR = "disparate_error"
KIND_DISPARATE_UTILITY = "disparate_utility"

# Mixture for the disparate-error probability rows: component 1 produces
# confidently-minority-looking rows with a wide error band, component 2
# confidently-majority rows. Expected minority mass is about 0.40 and the
# imputed labels have FDR ~0.40 (minority) vs ~0.08 (majority).
DISPARATE_ERROR_DEFAULTS = {
    "mixture_weights": (7.0 / 11.0, 4.0 / 11.0),
    "component_means": (0.6, 0.05),
    "component_stds": (0.05, 0.05),
}

# Surrogate population for the disparate-utility setting. Rates are the
# group frequencies; the mean table keys are (group, experience) cells.
# The magnitudes of the utility gaps are free parameters of the surrogate;
# they are recorded here and echoed into every experiment config.
DISPARATE_UTILITY_DEFAULTS = {
    "minority_rate": 0.37,
    "no_experience_rate": 0.37,
    "joint_rate": 0.137,
    "utility_means": {(0, 0): 0.6, (0, 1): 1.6, (1, 0): 1.6, (1, 1): 2.6},
    "feature_weight": 0.4,
    "utility_std": 0.4,
    "bins": 20,
}


@dataclass(frozen=True, eq=False)
class GeneratorSpec:
    """Which generator to run and with what parameters."""

    kind: str
    m: int
    n: int
    seed: object = 0  # int or SeedSequence
    tau: float = 0.0
    bins: int = 20
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in (KIND_DISPARATE_ERROR, KIND_DISPARATE_UTILITY):
            raise ValueError(f"unknown generator kind {self.kind!r}")
        if not 0.0 <= self.tau <= 0.5:
            raise ValueError("tau must be in [0, 0.5]")
        if self.m < 1 or self.n < 1 or self.n > self.m:
            raise ValueError("need 1 <= n <= m")

    def merged_params(self) -> dict:
        base = dict(DISPARATE_ERROR_DEFAULTS if self.kind == KIND_DISPARATE_ERROR
                    else DISPARATE_UTILITY_DEFAULTS)
        base.update(self.params)
        return base

    def to_dict(self) -> dict:
        params = {}
        for key, val in self.params.items():
            if key == "utility_means":
                params[key] = {f"{z},{a}": v for (z, a), v in val.items()}
            else:
                params[key] = val
        return {"kind": self.kind, "m": self.m, "n": self.n,
                "seed": self.seed if isinstance(self.seed, int) else None,
                "tau": self.tau, "bins": self.bins, "params": params}

    @classmethod
    def from_dict(cls, data: dict) -> "GeneratorSpec":
        params = dict(data.get("params", {}))
        if "utility_means" in params:
            params["utility_means"] = {
                tuple(int(v) for v in key.split(",")): val
                for key, val in params["utility_means"].items()
            }
        return cls(kind=data["kind"], m=int(data["m"]), n=int(data["n"]),
                   seed=int(data.get("seed", 0) or 0), tau=float(data.get("tau", 0.0)),
                   bins=int(data.get("bins", 20)), params=params)


def truncated_normal(rng: np.random.Generator, mean, std, size: int) -> np.ndarray:
    """Normal restricted to [0, 1] by rejection (renormalized, not clipped).

    std may be 0 (or an array containing 0), in which case the component
    degenerates to a point mass at its mean.
    """
    mean = np.broadcast_to(np.asarray(mean, dtype=float), (size,))
    std = np.broadcast_to(np.asarray(std, dtype=float), (size,))
    out = np.where(std > 0, np.nan, np.clip(mean, 0.0, 1.0))
    pending = std > 0
    while np.any(pending):
        draw = rng.normal(mean[pending], std[pending])
        out[pending] = draw
        pending = pending & ((out < 0.0) | (out > 1.0))
    return out


def gen_disparate_error(spec: GeneratorSpec) -> Instance:
    """Uniform utilities; probability rows from the truncated mixture;
    true attributes sampled from the rows themselves."""
    if spec.kind != KIND_DISPARATE_ERROR:
        raise ValueError(f"spec kind is {spec.kind!r}")
    par = spec.merged_params()
    rng = make_rng(spec.seed)
    m = spec.m
    weights = np.asarray(par["mixture_weights"], dtype=float)
    component = (rng.random(m) >= weights[0]).astype(int)
    means = np.asarray(par["component_means"], dtype=float)[component]
    stds = np.asarray(par["component_stds"], dtype=float)[component]
    q0 = truncated_normal(rng, means, stds, m)
    utilities = rng.random(m)
    z = (rng.random(m) >= q0).astype(int)  # group 0 with probability q0
    noise = np.column_stack([q0, 1.0 - q0])
    return Instance(m=m, n=spec.n, s=1, p=(2,), utilities=utilities,
                    noise=(noise,), true_attrs=z[:, None])


def gen_disparate_utility(spec: GeneratorSpec) -> Instance:
    """Binary group and experience flag, real qualification score, and
    Gaussian utilities whose means drop for the disadvantaged cells.

    No probability rows are attached; estimate them afterwards with
    estimate_q_by_utility_bins. Utilities are clamped at 0 to keep the
    nonnegativity contract."""
    if spec.kind != KIND_DISPARATE_UTILITY:
        raise ValueError(f"spec kind is {spec.kind!r}")
    par = spec.merged_params()
    rng = make_rng(spec.seed)
    m = spec.m
    p00 = par["joint_rate"]
    p01 = par["minority_rate"] - p00
    p10 = par["no_experience_rate"] - p00
    p11 = 1.0 - p00 - p01 - p10
    if min(p00, p01, p10, p11) < 0:
        raise ValueError("inconsistent group rates")
    cell = rng.choice(4, size=m, p=[p00, p01, p10, p11])
    z = (cell >= 2).astype(int)          # 0 = minority group
    a1 = (cell % 2).astype(int)          # 1 = has prior experience
    a2 = rng.normal(0.0, 1.0, m)
    means = np.array([
        par["utility_means"][(0, 0)], par["utility_means"][(0, 1)],
        par["utility_means"][(1, 0)], par["utility_means"][(1, 1)],
    ])[cell]
    w = means + par["feature_weight"] * a2 + rng.normal(0.0, par["utility_std"], m)
    w = np.maximum(w, 0.0)
    return Instance(m=m, n=spec.n, s=1, p=(2,), utilities=w, noise=None,
                    true_attrs=z[:, None],
                    features=np.column_stack([a1.astype(float), a2]))


def inject_flip_noise(inst: Instance, tau: float, seed) -> Instance:
    """Observed labels: flip each true binary label independently with
    probability tau. True attributes are left untouched."""
    if inst.s != 1 or inst.p[0] != 2:
        raise UnsupportedError("flip noise is defined for one binary attribute")
    if inst.true_attrs is None:
        raise ValueError("flip noise requires true attributes")
    if not 0.0 <= tau <= 0.5:
        raise ValueError("tau must be in [0, 0.5]")
    rng = make_rng(seed)
    flips = rng.random(inst.m) < tau
    zhat = np.where(flips, 1 - inst.true_attrs[:, 0], inst.true_attrs[:, 0])
    return inst.with_noisy_attrs(zhat[:, None])


def _equal_count_bins(train_w: np.ndarray, b: int):
    """Sort positions split into b bins; first b-1 bins of equal size,
    the last absorbs the remainder. Returns (assignment, inner edges)."""
    m = len(train_w)
    order = np.argsort(train_w, kind="stable")
    base = m // b
    assignment = np.empty(m, dtype=int)
    starts = [j * base for j in range(b)] + [m]
    for j in range(b):
        assignment[order[starts[j]:starts[j + 1]]] = j
    edges = np.array([train_w[order[starts[j]]] for j in range(1, b)])
    return assignment, edges


def estimate_q_by_utility_bins(inst: Instance, b: int, train: Optional[Instance] = None) -> np.ndarray:
    """Probability rows from class frequencies in equal-count utility bins.

    Bin boundaries and per-bin frequencies come from the training instance
    (by default the instance itself); items of ``inst`` are then assigned
    to bins by utility value, so items in the same bin share a row.
    """
    if train is None:
        train = inst
    if train.true_attrs is None:
        raise ValueError("the training instance must carry true attributes")
    if b < 1:
        raise ValueError("need at least one bin")
    if b > train.m:
        raise ValueError(f"cannot split {train.m} items into {b} bins")
    p = train.p[0]
    assignment, edges = _equal_count_bins(train.utilities, b)
    freq = np.empty((b, p))
    labels = train.true_attrs[:, 0]
    for j in range(b):
        members = assignment == j
        freq[j] = np.bincount(labels[members], minlength=p) / members.sum()
    which = np.searchsorted(edges, inst.utilities, side="right")
    return freq[which]


def attach_utility_bin_noise(inst: Instance, b: int, train: Optional[Instance] = None) -> Instance:
    return inst.with_noise((estimate_q_by_utility_bins(inst, b, train=train),))


def calibrate_scores_by_bins(scores, labels, b: int, num_groups: Optional[int] = None) -> np.ndarray:
    """Calibrate classifier scores by frequency in b equal-width bins on [0,1].

    The row for an item whose score falls in bin j is the empirical class
    distribution of that bin. Empty bins borrow the nearest nonempty bin's
    estimate (ties prefer the lower bin) and are logged as warnings.
    """
    scores = np.asarray(scores, dtype=float)
    labels = np.asarray(labels, dtype=int)
    if b < 1:
        raise ValueError("need at least one bin")
    if np.any(scores < 0) or np.any(scores > 1):
        raise ValueError("scores must lie in [0, 1]")
    p = num_groups if num_groups is not None else int(labels.max()) + 1
    which = np.minimum((scores * b).astype(int), b - 1)
    freq = np.full((b, p), np.nan)
    for j in range(b):
        members = which == j
        if members.any():
            freq[j] = np.bincount(labels[members], minlength=p) / members.sum()
    empty = np.flatnonzero(np.isnan(freq[:, 0]))
    if empty.size:
        filled = np.flatnonzero(~np.isnan(freq[:, 0]))
        if filled.size == 0:
            raise ValueError("no scores to calibrate")
        logger.warning("calibration bins %s are empty; borrowing nearest estimates",
                       empty.tolist())
        for j in empty:
            freq[j] = freq[filled[np.argmin(np.abs(filled - j))]]
    return freq[which]
