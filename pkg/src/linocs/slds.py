"""Switching-linear identification: sticky-chain Viterbi segmentation
alternating with per-state operator fitting (lookahead-weighted or plain
1-step), with lookahead terms never crossing a decoded switch."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.cluster.vq

from .core import SwitchingModel, TimeSeries
from .linear import LinearFitConfig, _fit_linocs_segments, fit_one_step_ls
from .synth import rng_for
from .weights import WeightSchedule

TAU_FLOOR = 1e-8


@dataclass(frozen=True)
class SldsFitConfig:
    J: int
    stickiness: float = 0.98
    outer_iters: int = 20
    linear_config: LinearFitConfig = field(default_factory=LinearFitConfig)
    min_segment: int = 3
    seed: int = 0

    def __post_init__(self):
        if self.J < 1:
            raise ValueError(f"J must be >= 1, got {self.J}")
        if not (0.0 < self.stickiness < 1.0):
            raise ValueError(f"stickiness must be in (0, 1), got {self.stickiness}")
        if self.outer_iters < 1 or self.min_segment < 1:
            raise ValueError("outer_iters and min_segment must be >= 1")


def _residual_norms(X: np.ndarray, operators, offsets) -> np.ndarray:
    """R[j, t] = ||x_{t+1} - f_j x_t - b_j||, shape (J, T)."""
    J = len(operators)
    T = X.shape[1] - 1
    R = np.empty((J, T))
    for j in range(J):
        diff = X[:, 1:] - operators[j] @ X[:, :-1] - offsets[j][:, None]
        R[j] = np.linalg.norm(diff, axis=0)
    return R


def estimate_switches(
    observations: TimeSeries,
    operators,
    offsets,
    stickiness: float = 0.98,
    tau: float | None = None,
) -> np.ndarray:
    """Most likely state path under a sticky discrete chain with Gaussian
    residual emissions, decoded by dynamic programming.

    The per-step log-likelihood of state j is -0.5 ||x_{t+1} - f_j x_t - b_j||^2
    / tau^2; tau defaults to the median per-step best-state residual norm.
    """
    X = observations.values
    J = len(operators)
    R = _residual_norms(X, operators, offsets)
    if tau is None:
        tau = float(np.median(R.min(axis=0)))
    tau = max(tau, TAU_FLOOR)
    loglik = -0.5 * (R / tau) ** 2
    T = loglik.shape[1]
    if J == 1:
        return np.zeros(T, dtype=int)
    stay = np.log(stickiness)
    switch = np.log((1.0 - stickiness) / (J - 1))
    score = loglik[:, 0].copy()
    back = np.zeros((T, J), dtype=int)
    for t in range(1, T):
        # trans[i, j]: arriving in j from i
        cand = score[:, None] + np.where(np.eye(J, dtype=bool), stay, switch)
        back[t] = np.argmax(cand, axis=0)
        score = cand[back[t], np.arange(J)] + loglik[:, t]
    path = np.empty(T, dtype=int)
    path[-1] = int(np.argmax(score))
    for t in range(T - 1, 0, -1):
        path[t - 1] = back[t, path[t]]
    return path


def segments_of(path: np.ndarray) -> list[tuple[int, int, int]]:
    """Contiguous runs as (state, start, end) with end exclusive."""
    segs = []
    start = 0
    for t in range(1, len(path) + 1):
        if t == len(path) or path[t] != path[start]:
            segs.append((int(path[start]), start, t))
            start = t
    return segs


def _smooth_short_runs(path: np.ndarray, min_segment: int, R: np.ndarray) -> np.ndarray:
    """Absorb runs shorter than min_segment into the neighboring state with the
    smaller added residual."""
    path = path.copy()
    changed = True
    while changed:
        changed = False
        segs = segments_of(path)
        if len(segs) == 1:
            break
        for i, (state, a, b) in enumerate(segs):
            if b - a >= min_segment:
                continue
            candidates = []
            if i > 0:
                candidates.append(segs[i - 1][0])
            if i + 1 < len(segs):
                candidates.append(segs[i + 1][0])
            best = min(candidates, key=lambda j: R[j, a:b].sum())
            path[a:b] = best
            changed = True
            break
    return path


def _state_segments(X: np.ndarray, path: np.ndarray, j: int) -> list[np.ndarray]:
    """Observation chunks of state j, each including the segment's closing
    column so that every in-segment transition is covered."""
    return [X[:, a: b + 1] for state, a, b in segments_of(path) if state == j]


def match_models(estimated, truth) -> np.ndarray:
    """Permutation pi minimizing sum_i ||truth_i - estimated_pi(i)||_F."""
    from .numerics import linear_sum_assignment

    if len(estimated) != len(truth):
        raise ValueError(f"operator counts differ: {len(estimated)} vs {len(truth)}")
    J = len(truth)
    cost = np.empty((J, J))
    for i in range(J):
        for j in range(J):
            cost[i, j] = np.linalg.norm(np.asarray(truth[i]) - np.asarray(estimated[j]))
    return linear_sum_assignment(cost)


def _init_by_lag_pair_clustering(X: np.ndarray, J: int, seed: int):
    """k-means on stacked [x_t; x_{t+1}] features, then per-cluster 1-step LS."""
    T = X.shape[1] - 1
    feats = np.vstack([X[:, :-1], X[:, 1:]]).T  # (T, 2p)
    rng = rng_for(seed, "slds-kmeans")
    _, labels = scipy.cluster.vq.kmeans2(feats, J, minit="++", seed=rng, missing="warn")
    return labels


def _fit_states(X, path, config) -> tuple[list, list]:
    p = X.shape[0]
    segs_by_state = [_state_segments(X, path, j) for j in range(config.J)]
    ops, offs = [], []
    for j in range(config.J):
        segs = [s for s in segs_by_state[j] if s.shape[1] >= 2]
        if not segs:
            ops.append(None)
            offs.append(None)
            continue
        shortest = min(s.shape[1] - 1 for s in segs)
        k_cap = min(config.linear_config.K, max(shortest - 1, 0))
        cfg = _with_order(config.linear_config, k_cap)
        model = _fit_linocs_segments(segs, cfg)
        ops.append(model.A)
        offs.append(model.b)
    return ops, offs


def _with_order(cfg: LinearFitConfig, K: int) -> LinearFitConfig:
    if K == cfg.K:
        return cfg
    sched = cfg.schedule
    if sched is not None and sched.K != K:
        sched = WeightSchedule(
            sched.kind, K,
            threshold=sched.threshold, base_weight=sched.base_weight,
            sigma_w=sched.sigma_w, decay_k=sched.decay_k, growth_e=sched.growth_e,
        )
    return LinearFitConfig(
        K=K, K_b=min(cfg.K_b, K) if cfg.K_b else cfg.K_b, schedule=sched,
        schedule_b=None, with_offset=cfg.with_offset,
        max_iters=cfg.max_iters, tol=cfg.tol,
    )


def fit_linocs_slds(observations: TimeSeries, config: SldsFitConfig) -> SwitchingModel:
    """Alternate sticky-chain segmentation with per-state operator fits.

    Initialization clusters lag pairs [x_t; x_{t+1}]; each outer round decodes
    the path under the current per-state models, smooths runs shorter than the
    minimum dwell, and refits every state on the concatenation of its segments
    (lookahead orders truncated at segment boundaries).  An emptied state is
    re-seeded from the segment with the worst residual under the current fit.
    """
    X = observations.values
    p, T = observations.p, observations.n_steps
    if T < config.J * (p + 1):
        raise ValueError(f"T={T} too short to identify {config.J} states in dimension {p}")
    if config.J == 1:
        model = _fit_linocs_segments([X], config.linear_config)
        return SwitchingModel((model.A,), (model.b,), np.zeros(T, dtype=int),
                              stickiness=config.stickiness)

    path = _init_by_lag_pair_clustering(X, config.J, config.seed)
    ops, offs = None, None
    for _ in range(config.outer_iters):
        new_ops, new_offs = _fit_states(X, path, config)
        # re-seed empty states from the worst-residual segment of the others
        filled = [j for j, f in enumerate(new_ops) if f is not None]
        missing = [j for j, f in enumerate(new_ops) if f is None]
        for j in missing:
            R = _residual_norms(X, [new_ops[i] for i in filled], [new_offs[i] for i in filled])
            seg_scores = [(R[:, a:b].min(axis=0).mean(), a, b) for _, a, b in segments_of(path)
                          if b - a >= 2]
            _, a, b = max(seg_scores)
            seed_model = fit_one_step_ls([X[:, a: b + 1]], config.linear_config.with_offset)
            new_ops[j] = seed_model.A
            new_offs[j] = seed_model.b
            path = path.copy()
            path[a:b] = j
            filled.append(j)
        ops, offs = new_ops, new_offs
        R = _residual_norms(X, ops, offs)
        tau = max(float(np.median(R.min(axis=0))), TAU_FLOOR)
        new_path = estimate_switches(observations, ops, offs, config.stickiness, tau=tau)
        new_path = _smooth_short_runs(new_path, config.min_segment, R)
        if np.array_equal(new_path, path):
            break
        path = new_path
    ops, offs = _fit_states(X, path, config)
    for j in range(config.J):
        if ops[j] is None:  # state emptied on the final decode
            ops[j] = np.zeros((p, p))
            offs[j] = np.zeros(p)
    return SwitchingModel(tuple(ops), tuple(offs), path, stickiness=config.stickiness)
