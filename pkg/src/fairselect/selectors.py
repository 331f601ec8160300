"""Selection algorithms: the LP-and-round approach plus the baselines.

All algorithms are pure given (instance, constraints, seed); stochastic
steps (argmax tie-breaking, rounding) draw from substreams derived with
seeding.make_rng, so runs are reproducible and order-independent.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import ConstraintSet, InfeasibleError, Instance, Selection, UnsupportedError
from .lp import FRAC_TOL, BfsSolution, SolveStatus, build_denoised_lp, solve_bfs
from .seeding import make_rng, seed_sequence


@dataclass(frozen=True, eq=False)
class AlgorithmConfig:
    """Knobs shared by the selection algorithms.

    alpha controls constraint tightness, lambda_ the KL penalty weight of
    the multi-objective baseline, target the desired group distribution.
    """

    target: tuple
    alpha: float = 0.0
    lambda_: float = 0.0
    delta: float = 0.0
    seed: int = 0
    fw_iters: int = 500
    kl_epsilon: float = 1e-6

    def __post_init__(self):
        t = np.asarray(self.target, dtype=float)
        if abs(t.sum() - 1.0) > 1e-9 or np.any(t < 0):
            raise ValueError("target must be a probability vector")
        object.__setattr__(self, "target", tuple(float(v) for v in t))
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError("alpha must be in [0, 1]")
        if self.lambda_ < 0:
            raise ValueError("lambda_ must be nonnegative")
        if not 0.0 < self.kl_epsilon <= 1e-3:
            raise ValueError("kl_epsilon must be in (0, 1e-3]")
        if self.fw_iters < 1:
            raise ValueError("fw_iters must be positive")


def _top_n_mask(scores: np.ndarray, n: int) -> np.ndarray:
    """Indicator of the n largest scores, ties broken by lowest index."""
    order = np.argsort(-np.asarray(scores, dtype=float), kind="stable")
    mask = np.zeros(len(scores), dtype=int)
    mask[order[:n]] = 1
    return mask


def blind(inst: Instance) -> Selection:
    """The n highest-utility items, ignoring all fairness information."""
    return Selection.from_mask(_top_n_mask(inst.utilities, inst.n), inst.utilities)


def denoised_bfs(inst: Instance, cs: ConstraintSet) -> BfsSolution:
    """Optimal vertex of the expected-count relaxation; raises if infeasible."""
    sol = solve_bfs(build_denoised_lp(inst, cs))
    if sol.status is not SolveStatus.OPTIMAL:
        raise InfeasibleError("expected-count constraint system is infeasible")
    return sol


def ceil_round(x: np.ndarray, utilities: np.ndarray) -> Selection:
    """Round every fractional coordinate up to 1.

    Entries below the fractionality tolerance are clamped to 0 first so
    floating-point dust cannot select spurious items.
    """
    x = np.array(x, dtype=float)
    x[x < FRAC_TOL] = 0.0
    return Selection.from_mask(np.ceil(x).astype(int), utilities)


def fair_expec(inst: Instance, cs: ConstraintSet) -> Selection:
    """Vertex of the relaxation, ceiling-rounded.

    The result never loses utility relative to the vertex and picks at
    most (number of fractional coordinates) extra items beyond n.
    """
    sol = denoised_bfs(inst, cs)
    return ceil_round(sol.x, inst.utilities)


def estimate_group_level_q(inst: Instance) -> np.ndarray:
    """Group-level probabilities: average the noise rows within each
    noisy-label class, so items sharing a noisy label share an estimate.

    When the instance carries no noisy labels, each item's label is taken
    to be the argmax of its own noise row.
    """
    if inst.s != 1:
        raise UnsupportedError("group-level estimates are defined for a single attribute")
    q = inst.noise_matrix(0)
    if inst.noisy_attrs is not None:
        zhat = inst.noisy_attrs[:, 0]
    else:
        zhat = np.argmax(q, axis=1)
    qbar = np.empty_like(q)
    for v in np.unique(zhat):
        members = zhat == v
        qbar[members] = q[members].mean(axis=0)
    qbar /= qbar.sum(axis=1, keepdims=True)
    return qbar


def group_level_instance(inst: Instance) -> Instance:
    return inst.with_noise((estimate_group_level_q(inst),))


def fair_expec_grp(inst: Instance, cs: ConstraintSet) -> Selection:
    """fair_expec run on the group-level probability estimate."""
    return fair_expec(group_level_instance(inst), cs)


def impute_bayes(q: np.ndarray, seed=0) -> np.ndarray:
    """One-hot each row at its argmax; exact ties are broken uniformly at
    random from the seeded stream."""
    q = np.asarray(q, dtype=float)
    rng = make_rng(seed)
    out = np.zeros_like(q)
    row_max = q.max(axis=1)
    is_max = q == row_max[:, None]
    picks = np.argmax(is_max, axis=1)
    for i in np.flatnonzero(is_max.sum(axis=1) > 1):
        winners = np.flatnonzero(is_max[i])
        picks[i] = winners[rng.integers(winners.size)]
    out[np.arange(q.shape[0]), picks] = 1.0
    return out


def _integer_bounds(cs: ConstraintSet, k: int = 0):
    # integer count window implied by real bounds; 1e-9 guards float dust
    lo = np.ceil(cs.lower[k] - 1e-9).astype(int)
    hi = np.floor(cs.upper[k] + 1e-9).astype(int)
    return np.maximum(lo, 0), hi


def thrsh(inst: Instance, cs: ConstraintSet, seed=0, qprime: np.ndarray | None = None) -> Selection:
    """Exact optimum of the count-bounded problem on imputed groups.

    Greedy: take the ceil(L) best items of each imputed group, then
    repeatedly add the globally best remaining item whose group is still
    below floor(U). The constraints form a partition matroid intersected
    with a cardinality bound, for which this greedy is optimal.
    """
    if inst.s != 1:
        raise UnsupportedError(
            "thrsh supports one attribute; for s > 1 run fair_expec on the imputed matrix")
    if qprime is None:
        qprime = impute_bayes(inst.noise_matrix(0), seed=seed)
    groups = np.argmax(qprime, axis=1)
    p = inst.p[0]
    lo, hi = _integer_bounds(cs)
    sizes = np.bincount(groups, minlength=p)
    caps = np.minimum(hi, sizes)
    if np.any(lo > caps) or int(lo.sum()) > inst.n or int(caps.sum()) < inst.n:
        raise InfeasibleError("imputed group bounds admit no size-n selection")

    order = np.argsort(-inst.utilities, kind="stable")
    taken = np.zeros(inst.m, dtype=bool)
    counts = np.zeros(p, dtype=int)
    # lower bounds first: the best lo[g] items of each group
    for g in range(p):
        need = lo[g]
        if need == 0:
            continue
        members = order[groups[order] == g][:need]
        taken[members] = True
        counts[g] = need
    total = int(counts.sum())
    for i in order:
        if total == inst.n:
            break
        g = groups[i]
        if taken[i] or counts[g] >= caps[g]:
            continue
        taken[i] = True
        counts[g] += 1
        total += 1
    return Selection.from_mask(taken, inst.utilities)


def _kl(a: np.ndarray, b: np.ndarray) -> float:
    return float(np.sum(a * np.log(a / b)))


def mult_obj_objective(x: np.ndarray, inst: Instance, cfg: AlgorithmConfig,
                       qprime: np.ndarray) -> float:
    """Utility minus the scaled KL penalty between the selected imputed
    distribution and the target. Both KL arguments are mixed with
    epsilon-uniform so an unselected group does not produce log 0."""
    t = np.asarray(cfg.target)
    p = len(t)
    eps = cfg.kl_epsilon
    dist = qprime.T @ x / inst.n
    dist_s = (1 - eps) * dist + eps / p
    t_s = (1 - eps) * t + eps / p
    scale = float(inst.utilities.sum()) / inst.m
    return float(inst.utilities @ x) - cfg.lambda_ * _kl(dist_s, t_s) * scale


def mult_obj(inst: Instance, cfg: AlgorithmConfig, qprime: np.ndarray | None = None) -> np.ndarray:
    """Frank-Wolfe on the KL-penalized utility over {x in [0,1]^m: sum x = n}.

    The linear minimization oracle over that polytope is exactly "top-n by
    gradient", so no projection is needed. Step size 2/(k+2), and the
    best-so-far iterate is returned, so more iterations never hurt. With
    lambda_=0 the gradient is the utility vector at every step and the
    blind indicator is returned unchanged.
    """
    if qprime is None:
        qprime = impute_bayes(inst.noise_matrix(0), seed=seed_sequence(cfg.seed, 17))
    w = inst.utilities
    n, p = inst.n, qprime.shape[1]
    t = np.asarray(cfg.target, dtype=float)
    if len(t) != p:
        raise ValueError(f"target has {len(t)} entries, imputed matrix has {p} groups")
    x = _top_n_mask(w, n).astype(float)
    if cfg.lambda_ == 0.0:
        return x
    eps = cfg.kl_epsilon
    t_s = (1 - eps) * t + eps / p
    scale = cfg.lambda_ * (float(w.sum()) / inst.m) * (1 - eps) / n
    best_x, best_val = x, mult_obj_objective(x, inst, cfg, qprime)
    for it in range(cfg.fw_iters):
        dist = qprime.T @ x / n
        dist_s = (1 - eps) * dist + eps / p
        grad = w - scale * (qprime @ (np.log(dist_s / t_s) + 1.0))
        vertex = _top_n_mask(grad, n)
        gamma = 2.0 / (it + 2.0)
        x = x + gamma * (vertex - x)
        val = mult_obj_objective(x, inst, cfg, qprime)
        if val > best_val + 1e-12:
            best_x, best_val = x, val
    return best_x


def dependent_round(x: np.ndarray, n: int, seed, utilities: np.ndarray) -> Selection:
    """Round a fractional selection to exactly n items, preserving marginals.

    Systematic sampling over a random permutation: lay the entries out as
    consecutive intervals, then sample the unit grid {u, u+1, ..., u+n-1}.
    Each item's inclusion probability is exactly x_i, and a binary input
    is returned unchanged.
    """
    x = np.asarray(x, dtype=float)
    total = float(x.sum())
    if abs(total - n) > 1e-6:
        raise ValueError(f"entries sum to {total}, expected n={n}")
    rng = make_rng(seed)
    perm = rng.permutation(len(x))
    cum = np.cumsum(x[perm])
    points = rng.random() + np.arange(n)
    idx = np.searchsorted(cum, points, side="right")
    idx = np.minimum(idx, len(x) - 1)
    mask = np.zeros(len(x), dtype=int)
    mask[perm[idx]] = 1
    if int(mask.sum()) != n:  # pragma: no cover
        raise RuntimeError("systematic sampling failed to produce n distinct items")
    return Selection.from_mask(mask, utilities)
