"""Time-invariant linear solvers: 1-step least squares, the three DAD
baselines, and lookahead-weighted (LINOCS) fitting of (A, b).

The multi-step objective is polynomial in A, so LINOCS iterates a convex
surrogate: lookahead regressors are rolled out under the current estimate, the
weighted least-squares problem that is linear in (A, b) is solved exactly, and
the move is damped by a backtracking line search on the exact multi-step
objective.  The noiseless fixed point of the iteration is the true model.
"""
from __future__ import annotations

import enum
import warnings
from dataclasses import dataclass

import numpy as np

from .core import DIVERGENCE_LIMIT, LinearModel, TimeSeries, predict_full_lookahead
from .weights import ScheduleKind, ScheduleState, WeightSchedule, advance, initial_state, weights_for_iteration


@dataclass(frozen=True)
class LinearFitConfig:
    K: int = 80                 # max training order
    K_b: int = 20               # max order for the offset refinement pass
    schedule: WeightSchedule | None = None    # default: exponential decay, sigma_w=0.01
    schedule_b: WeightSchedule | None = None
    with_offset: bool = True
    max_iters: int = 200
    tol: float = 1e-8           # convergence on ||dA||_F + ||db||_2

    def __post_init__(self):
        if self.K < 0 or self.K_b < 0:
            raise ValueError("K and K_b must be >= 0")
        if self.schedule is not None and self.schedule.K != self.K:
            raise ValueError(f"schedule covers K={self.schedule.K}, config has K={self.K}")
        if self.schedule_b is not None and self.schedule_b.K != self.K_b:
            raise ValueError(f"schedule_b covers K={self.schedule_b.K}, config has K_b={self.K_b}")

    def resolved_schedule(self) -> WeightSchedule:
        return self.schedule or WeightSchedule.exponential(self.K, 0.01)

    def resolved_schedule_b(self) -> WeightSchedule:
        return self.schedule_b or WeightSchedule.exponential(self.K_b, 0.01)


class DadVariant(enum.Enum):
    FULL_UPDATE = "dad-full"
    REWEIGHTED = "dad-reweigh"
    REWEIGHTED_L2 = "dad-reweigh-l2"


@dataclass(frozen=True)
class DadConfig:
    variant: DadVariant
    iterations: int = 100
    l2_weight: float = 0.0
    l2_decay: float = 1.0

    def __post_init__(self):
        if self.iterations < 1:
            raise ValueError(f"iterations must be >= 1, got {self.iterations}")


def _as_segments(observations) -> list[np.ndarray]:
    if isinstance(observations, TimeSeries):
        return [observations.values]
    return [np.asarray(s.values if isinstance(s, TimeSeries) else s, dtype=float) for s in observations]


def fit_one_step_ls(observations, with_offset: bool = True) -> LinearModel:
    """Least squares of column t+1 on column t across all time points.

    ``observations`` may be a TimeSeries or a list of contiguous segments; the
    offset is fitted by augmenting the regressor with a constant-1 row.
    """
    segs = _as_segments(observations)
    p = segs[0].shape[0]
    rows, tgts = [], []
    for X in segs:
        L = X.shape[1] - 1
        if L < 1:
            continue
        blk = X[:, :L].T
        if with_offset:
            blk = np.hstack([blk, np.ones((L, 1))])
        rows.append(blk)
        tgts.append(X[:, 1:].T)
    D = np.vstack(rows)
    Y = np.vstack(tgts)
    W, _, rank, _ = np.linalg.lstsq(D, Y, rcond=None)
    if rank < D.shape[1]:
        warnings.warn("degenerate one-step design; returning the minimum-norm solution")
    A = W[:p].T
    b = W[p] if with_offset else np.zeros(p)
    return LinearModel(A, b)


def _multi_step_objective(A: np.ndarray, b: np.ndarray, segs: list[np.ndarray], w: np.ndarray) -> float:
    """Exact weighted objective sum_k w_k sum_t ||x_{t+1} - A^{k+1} x_{t-k} - sum_j A^j b||^2."""
    p = A.shape[0]
    total = 0.0
    K = len(w) - 1
    P = np.eye(p)
    S = np.zeros((p, p))
    for k in range(K + 1):
        S = S + P          # sum of A^0..A^k after the update below uses A^{k+1}
        P = A @ P
        if w[k] == 0.0:
            continue
        if not np.all(np.isfinite(P)):
            return np.inf
        off = S @ b
        for X in segs:
            n = X.shape[1] - 1 - k
            if n < 1:
                continue
            R = X[:, k + 1:] - P @ X[:, :n] - off[:, None]
            total += w[k] * float(np.sum(R * R))
    return total


def linocs_linear_objective(A, b, observations, weights) -> float:
    """Exact multi-step objective of a candidate (A, b) on the observations."""
    A = np.asarray(A, dtype=float)
    b = np.zeros(A.shape[0]) if b is None else np.asarray(b, dtype=float).reshape(-1)
    return _multi_step_objective(A, b, _as_segments(observations), np.asarray(weights, dtype=float))


def _lookaheads(A, b, X, k_max):
    """H[k][:, i] = reconstruction of x_{k+i} anchored k steps back, i = 0..L-1-k."""
    L = X.shape[1] - 1
    H = [X[:, :L]]
    for _ in range(k_max):
        H.append(A @ H[-1][:, :-1] + b[:, None])
    return H


def _fit_linocs_segments(
    segments: list[np.ndarray],
    config: LinearFitConfig,
    objective_history: list | None = None,
) -> LinearModel:
    """Shared LINOCS driver over one or more contiguous observation segments.

    Lookahead regressors never cross a segment boundary; callers with switching
    data pass one segment per dwell period.
    """
    segs = [np.asarray(s, dtype=float) for s in segments if s.shape[1] >= 2]
    if not segs:
        raise ValueError("no segment long enough to fit")
    p = segs[0].shape[0]
    max_len = max(s.shape[1] - 1 for s in segs)
    K = min(config.K, max_len - 1)
    schedule = config.resolved_schedule()
    if K < schedule.K:
        schedule = WeightSchedule(
            schedule.kind, K,
            threshold=schedule.threshold, base_weight=schedule.base_weight,
            sigma_w=schedule.sigma_w, decay_k=schedule.decay_k, growth_e=schedule.growth_e,
        )
    state = initial_state(schedule)
    sched_b = config.resolved_schedule_b()
    state_b = initial_state(sched_b)

    model = fit_one_step_ls(segs, config.with_offset)
    A, b = model.A.copy(), model.b.copy()
    last_usable = (A, b)

    with np.errstate(over="ignore", invalid="ignore"):
        for _ in range(config.max_iters):
            w = weights_for_iteration(schedule, state)
            active = {int(k) for k in np.nonzero(w > 0)[0]}
            k_top = max(active)
            J = _multi_step_objective(A, b, segs, w)
            rows, tgts = [], []
            usable = set()
            for X in segs:
                L = X.shape[1] - 1
                H = _lookaheads(A, b, X, min(k_top, L - 1))
                for k in sorted(active):
                    if k > L - 1:
                        continue
                    Hk = H[k]
                    if not np.all(np.isfinite(Hk)) or np.max(np.abs(Hk)) > DIVERGENCE_LIMIT:
                        continue  # diverged order: drop this block for the refit
                    usable.add(k)
                    n = Hk.shape[1]
                    blk = Hk.T
                    if config.with_offset:
                        blk = np.hstack([blk, np.ones((n, 1))])
                    rows.append(np.sqrt(w[k]) * blk)
                    tgts.append(np.sqrt(w[k]) * X[:, k + 1: k + 1 + n].T)
            if not usable or (usable == {0} and active != {0}):
                # every active lookahead order diverged under the current
                # estimate: fall back to the last stable iterate
                A, b = last_usable
                break
            last_usable = (A, b)
            Wm, *_ = np.linalg.lstsq(np.vstack(rows), np.vstack(tgts), rcond=None)
            A_cand = Wm[:p].T
            b_cand = Wm[p] if config.with_offset else np.zeros(p)

            # damped step: largest halving of the refit direction that does not
            # increase the exact multi-step objective under the current weights
            alpha, accepted = 1.0, False
            for _ in range(30):
                A_try = A + alpha * (A_cand - A)
                b_try = b + alpha * (b_cand - b)
                J_try = _multi_step_objective(A_try, b_try, segs, w)
                if J_try <= J:
                    accepted = True
                    break
                alpha *= 0.5
            if not accepted:
                break
            step = float(np.linalg.norm(A_try - A)) + float(np.linalg.norm(b_try - b))
            A, b, J = A_try, b_try, J_try

            # offset refinement with A frozen ("infer b at each order" mode);
            # exactly quadratic in b.  Accepted only when it does not increase
            # the current weighted objective, which keeps the whole iteration
            # monotone even though the pass optimizes its own order weights.
            if config.with_offset and config.K_b >= 0:
                b_ref = _refine_offset(A, b, segs, weights_for_iteration(sched_b, state_b))
                J_ref = _multi_step_objective(A, b_ref, segs, w)
                if J_ref <= J:
                    b, J = b_ref, J_ref

            state = advance(schedule, state, _per_order_errors(A, b, segs, schedule.K))
            state_b = advance(sched_b, state_b, _per_order_errors(A, b, segs, sched_b.K))
            if objective_history is not None:
                objective_history.append(J)
            fully_active = (
                schedule.kind is not ScheduleKind.SEQUENTIAL_ACTIVATION
                or state.active_order == schedule.K
            )
            if step < config.tol and fully_active:
                break
    return LinearModel(A, b if config.with_offset else np.zeros(p))


def _refine_offset(A, b_init, segs, wb):
    """Exact minimizer over b of the multi-step objective with A frozen."""
    p = A.shape[0]
    Kb = len(wb) - 1
    pows = [np.eye(p)]
    for _ in range(Kb + 1):
        pows.append(A @ pows[-1])
    rows, tgts = [], []
    for k in range(Kb + 1):
        if wb[k] == 0.0 or not np.all(np.isfinite(pows[k + 1])):
            continue
        M = sum(pows[: k + 1])
        r_sum = np.zeros(p)
        count = 0
        for X in segs:
            n = X.shape[1] - 1 - k
            if n < 1:
                continue
            R = X[:, k + 1:] - pows[k + 1] @ X[:, :n]
            r_sum += R.sum(axis=1)
            count += n
        if count == 0:
            continue
        scale = np.sqrt(wb[k] * count)
        rows.append(scale * M)
        tgts.append(scale * (r_sum / count))
    if not rows:
        return b_init
    sol, *_ = np.linalg.lstsq(np.vstack(rows), np.concatenate(tgts), rcond=None)
    return sol


def _per_order_errors(A, b, segs, K):
    """Mean squared residual per time step for each order 0..K (inf if empty)."""
    p = A.shape[0]
    sse = np.zeros(K + 1)
    cnt = np.zeros(K + 1)
    P = np.eye(p)
    S = np.zeros((p, p))
    for k in range(K + 1):
        S = S + P
        P = A @ P
        if not np.all(np.isfinite(P)):
            sse[k:] = np.inf
            break
        off = S @ b
        for X in segs:
            n = X.shape[1] - 1 - k
            if n < 1:
                continue
            R = X[:, k + 1:] - P @ X[:, :n] - off[:, None]
            sse[k] += float(np.sum(R * R))
            cnt[k] += n
    with np.errstate(invalid="ignore"):
        e = np.where(cnt > 0, sse / np.maximum(cnt, 1), np.inf)
    return e


def fit_linocs_linear(
    observations,
    config: LinearFitConfig | None = None,
    objective_history: list | None = None,
) -> LinearModel:
    """Fit a time-invariant (A, b) under the lookahead-weighted objective."""
    config = config or LinearFitConfig()
    segs = _as_segments(observations)
    if isinstance(observations, TimeSeries) and observations.n_steps <= config.K:
        raise ValueError(f"series with T={observations.n_steps} cannot support training order K={config.K}")
    return _fit_linocs_segments(segs, config, objective_history=objective_history)


def fit_dad(observations: TimeSeries, config: DadConfig) -> LinearModel:
    """Data-as-demonstrator baselines: alternate a full rollout from the first
    observation with refitting on the rolled-out states.

    FULL_UPDATE regresses observations on rollout states; REWEIGHTED stacks the
    rollout pairs with the observation pairs; REWEIGHTED_L2 adds a (decaying)
    Frobenius ridge on (A, b).  Diverged rollout columns are dropped from that
    iteration's regression.
    """
    X = observations.values
    p, T = observations.p, observations.n_steps
    model = fit_one_step_ls(observations, with_offset=True)
    lam = config.l2_weight
    for _ in range(config.iterations):
        look = predict_full_lookahead(model, X[:, 0], T)
        Lv = look.values
        m = Lv.shape[1] - 1
        rows, tgts = [], []
        if m >= 1:
            rows.append(np.hstack([Lv[:, :m].T, np.ones((m, 1))]))
            if config.variant is DadVariant.FULL_UPDATE:
                tgts.append(X[:, 1: m + 1].T)
            else:
                tgts.append(Lv[:, 1:].T)
        if config.variant is not DadVariant.FULL_UPDATE:
            rows.append(np.hstack([X[:, :T].T, np.ones((T, 1))]))
            tgts.append(X[:, 1:].T)
            if config.variant is DadVariant.REWEIGHTED_L2 and lam > 0:
                rows.append(np.sqrt(lam) * np.eye(p + 1))
                tgts.append(np.zeros((p + 1, p)))
                lam *= config.l2_decay
        if not rows or sum(r.shape[0] for r in rows) < p + 1:
            break  # rollout fully diverged and nothing to regress on
        W, *_ = np.linalg.lstsq(np.vstack(rows), np.vstack(tgts), rcond=None)
        model = LinearModel(W[:p].T, W[p])
    return model
