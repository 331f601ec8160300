"""Domain types shared by every other module.

An Instance holds m items, a selection size n, and for each of s protected
attributes a per-item probability row over that attribute's values. Group
values are 0-based everywhere (in memory and in the JSON file format).
All types are immutable after construction and safe to share across threads.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from typing import Optional, Sequence

import numpy as np

# Probability rows whose sum is within this tolerance of 1 are renormalized
# on ingestion; rows further out are left untouched for validation to report.
ROW_SUM_TOL = 1e-9


class InfeasibleError(Exception):
    """The constraint system admits no selection."""


class UnsupportedError(Exception):
    """The operation does not support this instance shape."""


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Item:
    """One selectable item: utility plus per-attribute noise rows."""

    utility: float
    noise: Optional[tuple]  # one probability vector per attribute, or None
    true_attrs: Optional[tuple] = None
    noisy_attrs: Optional[tuple] = None
    features: Optional[tuple] = None


@dataclass(frozen=True, eq=False)
class Instance:
    """m items with utilities, noise rows, and optional attribute columns.

    Arrays are stored column-major by attribute: ``noise[k]`` is the
    (m, p[k]) probability matrix for attribute k, ``true_attrs`` is an
    (m, s) integer matrix. ``noise`` may be None for generator output that
    has not had its probability estimate attached yet.
    """

    m: int
    n: int
    s: int
    p: tuple
    utilities: np.ndarray
    noise: Optional[tuple]  # tuple of s arrays, each (m, p[k])
    true_attrs: Optional[np.ndarray] = None   # (m, s) ints
    noisy_attrs: Optional[np.ndarray] = None  # (m, s) ints
    features: Optional[np.ndarray] = None     # (m, d) reals

    def __post_init__(self):
        object.__setattr__(self, "p", tuple(int(v) for v in self.p))
        object.__setattr__(self, "utilities", _readonly(np.asarray(self.utilities, dtype=float)))
        if self.noise is not None:
            rows = []
            for q in self.noise:
                q = np.array(q, dtype=float)
                if q.ndim == 2 and q.shape[0] == self.m:
                    sums = q.sum(axis=1)
                    ok = np.abs(sums - 1.0) <= ROW_SUM_TOL
                    q[ok] = q[ok] / sums[ok, None]
                rows.append(_readonly(q))
            object.__setattr__(self, "noise", tuple(rows))
        for name in ("true_attrs", "noisy_attrs"):
            val = getattr(self, name)
            if val is not None:
                object.__setattr__(self, name, _readonly(np.asarray(val, dtype=int)))
        if self.features is not None:
            object.__setattr__(self, "features", _readonly(np.asarray(self.features, dtype=float)))

    @classmethod
    def from_items(cls, items: Sequence[Item], n: int, p: Sequence[int]) -> "Instance":
        m, s = len(items), len(p)
        utilities = np.array([it.utility for it in items], dtype=float)
        noise = None
        if all(it.noise is not None for it in items) and m > 0:
            noise = tuple(np.array([it.noise[k] for it in items], dtype=float) for k in range(s))
        true_attrs = None
        if all(it.true_attrs is not None for it in items) and m > 0:
            true_attrs = np.array([it.true_attrs for it in items], dtype=int)
        noisy_attrs = None
        if all(it.noisy_attrs is not None for it in items) and m > 0:
            noisy_attrs = np.array([it.noisy_attrs for it in items], dtype=int)
        features = None
        if all(it.features is not None for it in items) and m > 0:
            features = np.array([it.features for it in items], dtype=float)
        return cls(m=m, n=int(n), s=s, p=tuple(p), utilities=utilities, noise=noise,
                   true_attrs=true_attrs, noisy_attrs=noisy_attrs, features=features)

    @property
    def items(self) -> tuple:
        out = []
        for i in range(self.m):
            out.append(Item(
                utility=float(self.utilities[i]),
                noise=None if self.noise is None else tuple(self.noise[k][i].copy() for k in range(self.s)),
                true_attrs=None if self.true_attrs is None else tuple(int(v) for v in self.true_attrs[i]),
                noisy_attrs=None if self.noisy_attrs is None else tuple(int(v) for v in self.noisy_attrs[i]),
                features=None if self.features is None else tuple(float(v) for v in self.features[i]),
            ))
        return tuple(out)

    def noise_matrix(self, k: int = 0) -> np.ndarray:
        if self.noise is None:
            raise ValueError("instance carries no noise information")
        return self.noise[k]

    def with_noise(self, noise: Sequence[np.ndarray]) -> "Instance":
        return replace(self, noise=tuple(noise))

    def with_noisy_attrs(self, noisy_attrs: np.ndarray) -> "Instance":
        return replace(self, noisy_attrs=noisy_attrs)


@dataclass(frozen=True, eq=False)
class ValidationResult:
    ok: bool
    violations: tuple

    def __bool__(self) -> bool:
        return self.ok


def validate_instance(inst: Instance) -> ValidationResult:
    """Check structural invariants; reports every violation, never raises."""
    bad = []
    if inst.m < 1:
        bad.append("m must be positive")
    if inst.n < 1:
        bad.append("n must be positive")
    if inst.n > inst.m:
        bad.append(f"selection size n={inst.n} exceeds item count m={inst.m}")
    if inst.s < 1:
        bad.append("s must be at least 1")
    if len(inst.p) != inst.s:
        bad.append(f"p has {len(inst.p)} entries, expected s={inst.s}")
    for k, pk in enumerate(inst.p):
        if pk < 1:
            bad.append(f"attribute {k} has p={pk} < 1")
    if inst.utilities.shape != (inst.m,):
        bad.append(f"utilities shape {inst.utilities.shape} != ({inst.m},)")
    elif np.any(inst.utilities < 0):
        idx = int(np.argmax(inst.utilities < 0))
        bad.append(f"negative utility at item {idx}")
    if inst.noise is not None:
        if len(inst.noise) != inst.s:
            bad.append(f"noise has {len(inst.noise)} attribute blocks, expected {inst.s}")
        else:
            for k, q in enumerate(inst.noise):
                if q.shape != (inst.m, inst.p[k]):
                    bad.append(f"noise block {k} shape {q.shape} != ({inst.m}, {inst.p[k]})")
                    continue
                sums = q.sum(axis=1)
                off = np.abs(sums - 1.0) > ROW_SUM_TOL
                if np.any(off):
                    i = int(np.argmax(off))
                    bad.append(f"noise row sums to {sums[i]:.12g} (item {i}, attribute {k})")
                if np.any(q < -ROW_SUM_TOL) or np.any(q > 1 + ROW_SUM_TOL):
                    bad.append(f"noise entries outside [0,1] in attribute {k}")
    for name in ("true_attrs", "noisy_attrs"):
        col = getattr(inst, name)
        if col is None:
            continue
        if col.shape != (inst.m, inst.s):
            bad.append(f"{name} shape {col.shape} != ({inst.m}, {inst.s})")
            continue
        for k, pk in enumerate(inst.p):
            if np.any((col[:, k] < 0) | (col[:, k] >= pk)):
                bad.append(f"{name} column {k} outside [0, {pk})")
    return ValidationResult(ok=not bad, violations=tuple(bad))


@dataclass(frozen=True, eq=False)
class ConstraintSet:
    """Per attribute-value count bounds [L, U] plus slack delta."""

    lower: tuple  # tuple of s arrays, lower[k][l] >= 0
    upper: tuple
    delta: float

    def __post_init__(self):
        object.__setattr__(self, "lower", tuple(_readonly(np.asarray(a, dtype=float)) for a in self.lower))
        object.__setattr__(self, "upper", tuple(_readonly(np.asarray(a, dtype=float)) for a in self.upper))
        if not 0.0 <= self.delta < 1.0:
            raise ValueError(f"delta must be in [0, 1), got {self.delta}")
        for k, (lo, hi) in enumerate(zip(self.lower, self.upper)):
            if lo.shape != hi.shape:
                raise ValueError(f"bound shapes differ for attribute {k}")
            if np.any(lo > hi + 1e-12):
                raise ValueError(f"lower bound exceeds upper bound for attribute {k}")
            if np.any(lo < 0) or np.any(hi < 0):
                raise ValueError(f"negative bound for attribute {k}")

    def with_delta(self, delta: float) -> "ConstraintSet":
        return replace(self, delta=delta)


def make_constraints(lower, upper, delta: float, n: int) -> ConstraintSet:
    """Build a ConstraintSet, clamping all bounds into [0, n]."""
    lower = [np.clip(np.asarray(a, dtype=float), 0.0, float(n)) for a in lower]
    upper = [np.clip(np.asarray(a, dtype=float), 0.0, float(n)) for a in upper]
    return ConstraintSet(lower=tuple(lower), upper=tuple(upper), delta=delta)


def constraints_from_alpha(n: int, t, alpha: float, delta: float = 0.0) -> ConstraintSet:
    """Interpolated upper bounds U_l = n(1-alpha) + n*alpha*t_l, L = 0.

    alpha=0 leaves the selection unconstrained (U_l = n for every group);
    alpha=1 caps group l at exactly n*t_l.
    """
    t = np.asarray(t, dtype=float)
    if abs(t.sum() - 1.0) > 1e-9 or np.any(t < 0):
        raise ValueError("target must be a probability vector")
    if not 0.0 <= alpha <= 1.0:
        raise ValueError(f"alpha must be in [0, 1], got {alpha}")
    upper = n * (1.0 - alpha) + n * alpha * t
    lower = np.zeros_like(upper)
    return make_constraints([lower], [upper], delta=delta, n=n)


@dataclass(frozen=True, eq=False)
class Selection:
    """Binary inclusion vector with its utility and cardinality."""

    chosen: np.ndarray
    total_utility: float
    cardinality: int

    def __post_init__(self):
        object.__setattr__(self, "chosen", _readonly(np.asarray(self.chosen, dtype=int)))
        recomputed = int(self.chosen.sum())
        if recomputed != self.cardinality:
            raise ValueError(f"cardinality {self.cardinality} != sum of chosen {recomputed}")

    @classmethod
    def from_mask(cls, mask: np.ndarray, utilities: np.ndarray) -> "Selection":
        mask = np.asarray(mask)
        chosen = (mask != 0).astype(int)
        total = float(np.dot(chosen, np.asarray(utilities, dtype=float)))
        return cls(chosen=chosen, total_utility=total, cardinality=int(chosen.sum()))

    @property
    def indices(self) -> np.ndarray:
        return np.flatnonzero(self.chosen)


def group_counts(mask: np.ndarray, attrs: np.ndarray, p: int) -> np.ndarray:
    """|S ∩ G_l| for each group value l of one attribute column."""
    mask = np.asarray(mask) != 0
    return np.bincount(np.asarray(attrs, dtype=int)[mask], minlength=p).astype(float)


@dataclass(frozen=True, eq=False)
class ViolationReport:
    """Additive violations of the count bounds [L, U] plus cardinality excess.

    ``fairness[k][l]`` is how far the (true or expected) count for group
    (k, l) lies outside [L, U]; zero when the bound is satisfied.
    """

    fairness: tuple  # tuple of s arrays
    cardinality_excess: float
    max_violation: float

    @property
    def ok(self) -> bool:
        return self.max_violation == 0.0 and self.cardinality_excess == 0.0


def violation_report(x, inst: Instance, cs: ConstraintSet, attrs: str = "true") -> ViolationReport:
    """Measure how far selection ``x`` violates the target bounds.

    attrs="true" counts members of each true group; attrs="expected" uses
    the expected counts sum_i q_il * x_i. Either way the bounds checked are
    the raw [L, U] (no delta slack).
    """
    if isinstance(x, Selection):
        vec = x.chosen.astype(float)
    else:
        vec = np.asarray(x, dtype=float)
    if attrs not in ("true", "expected"):
        raise ValueError(f"attrs must be 'true' or 'expected', got {attrs!r}")
    if attrs == "true" and inst.true_attrs is None:
        raise ValueError("true-attribute mode requires true_attrs")
    fairness = []
    worst = 0.0
    for k in range(inst.s):
        if attrs == "true":
            sel = vec > 0.5
            counts = np.bincount(inst.true_attrs[sel, k], minlength=inst.p[k]).astype(float)
        else:
            counts = inst.noise[k].T @ vec
        viol = np.maximum(0.0, np.maximum(cs.lower[k] - counts, counts - cs.upper[k]))
        viol[viol < 1e-12] = 0.0
        fairness.append(viol)
        worst = max(worst, float(viol.max(initial=0.0)))
    excess = max(0.0, float(vec.sum()) - inst.n)
    if excess < 1e-12:
        excess = 0.0
    return ViolationReport(fairness=tuple(fairness), cardinality_excess=excess, max_violation=worst)


# --- instance file format -------------------------------------------------
# {m, n, s, p: [...], items: [{w, q: [[...], ...], z?, zhat?, a?}, ...]}

def instance_to_dict(inst: Instance) -> dict:
    items = []
    for i in range(inst.m):
        rec = {"w": float(inst.utilities[i])}
        if inst.noise is not None:
            rec["q"] = [[float(v) for v in inst.noise[k][i]] for k in range(inst.s)]
        if inst.true_attrs is not None:
            rec["z"] = [int(v) for v in inst.true_attrs[i]]
        if inst.noisy_attrs is not None:
            rec["zhat"] = [int(v) for v in inst.noisy_attrs[i]]
        if inst.features is not None:
            rec["a"] = [float(v) for v in inst.features[i]]
        items.append(rec)
    return {"m": inst.m, "n": inst.n, "s": inst.s, "p": list(inst.p), "items": items}


def instance_from_dict(data: dict) -> Instance:
    m, n, s = int(data["m"]), int(data["n"]), int(data["s"])
    p = tuple(int(v) for v in data["p"])
    items = data["items"]
    if len(items) != m:
        raise ValueError(f"items list has {len(items)} entries, header says m={m}")
    utilities = np.array([it["w"] for it in items], dtype=float)
    noise = None
    if items and all("q" in it for it in items):
        noise = tuple(np.array([it["q"][k] for it in items], dtype=float) for k in range(s))
    true_attrs = None
    if items and all("z" in it for it in items):
        true_attrs = np.array([it["z"] for it in items], dtype=int)
    noisy_attrs = None
    if items and all("zhat" in it for it in items):
        noisy_attrs = np.array([it["zhat"] for it in items], dtype=int)
    features = None
    if items and all("a" in it for it in items):
        features = np.array([it["a"] for it in items], dtype=float)
    return Instance(m=m, n=n, s=s, p=p, utilities=utilities, noise=noise,
                    true_attrs=true_attrs, noisy_attrs=noisy_attrs, features=features)


def save_instance(inst: Instance, path) -> None:
    with open(path, "w") as fh:
        json.dump(instance_to_dict(inst), fh)


def load_instance(path) -> Instance:
    with open(path) as fh:
        return instance_from_dict(json.load(fh))
