"""Domain types and the shared prediction engine.

All model classes reduce to a per-step affine transition ``x_{t+1} = A_t x_t + b_t``;
the three prediction styles (1-step, iterative multi-step of order K, and full
lookahead from the first sample) are implemented once on top of ``transition_at``.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

# Predicted values whose magnitude exceeds this cutoff mark the series as
# diverged at that index; downstream metrics treat later columns as missing.
DIVERGENCE_LIMIT = 1e12


def _readonly(a: np.ndarray) -> np.ndarray:
    out = np.array(a, dtype=float, copy=True)
    out.flags.writeable = False
    return out


@dataclass(frozen=True)
class TimeSeries:
    """A p x (T+1) trajectory sampled at uniform steps of ``dt``.

    Column ``t`` holds the state at time ``t * dt``.  ``diverged_at`` is set by
    the prediction engine when a rollout exceeded :data:`DIVERGENCE_LIMIT`; the
    stored columns then end just before the offending index.
    """

    values: np.ndarray
    dt: float = 1.0
    diverged_at: int | None = None

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 2 or v.shape[0] < 1:
            raise ValueError(f"values must be a p x (T+1) matrix, got shape {v.shape}")
        min_cols = 1 if self.diverged_at is not None else 2
        if v.shape[1] < min_cols:
            raise ValueError(f"series needs at least {min_cols} columns, got {v.shape[1]}")
        if not np.all(np.isfinite(v)):
            raise ValueError("series values must be finite")
        if not (self.dt > 0):
            raise ValueError(f"dt must be positive, got {self.dt}")
        object.__setattr__(self, "values", _readonly(v))

    @property
    def p(self) -> int:
        return self.values.shape[0]

    @property
    def n_steps(self) -> int:
        """T: number of transitions covered by the stored columns."""
        return self.values.shape[1] - 1

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.values.shape[1]) * self.dt

    def column(self, t: int) -> np.ndarray:
        return self.values[:, t]


@dataclass(frozen=True)
class LinearModel:
    """Time-invariant transition ``x_{t+1} = A x_t + b``."""

    A: np.ndarray
    b: np.ndarray | None = None

    def __post_init__(self):
        A = np.asarray(self.A, dtype=float)
        if A.ndim != 2 or A.shape[0] != A.shape[1]:
            raise ValueError(f"A must be square, got shape {A.shape}")
        b = np.zeros(A.shape[0]) if self.b is None else np.asarray(self.b, dtype=float).reshape(-1)
        if b.shape[0] != A.shape[0]:
            raise ValueError(f"b has length {b.shape[0]}, expected {A.shape[0]}")
        if not (np.all(np.isfinite(A)) and np.all(np.isfinite(b))):
            raise ValueError("model parameters must be finite")
        object.__setattr__(self, "A", _readonly(A))
        object.__setattr__(self, "b", _readonly(b))

    @property
    def p(self) -> int:
        return self.A.shape[0]


@dataclass(frozen=True)
class SwitchingModel:
    """J per-state operators/offsets plus a discrete state path z_0..z_{T-1}."""

    operators: tuple
    offsets: tuple
    state_path: np.ndarray
    stickiness: float = 0.98

    def __post_init__(self):
        ops = tuple(_readonly(np.asarray(f, dtype=float)) for f in self.operators)
        if not ops:
            raise ValueError("need at least one state")
        p = ops[0].shape[0]
        for f in ops:
            if f.shape != (p, p) or not np.all(np.isfinite(f)):
                raise ValueError("operators must be finite square matrices of equal size")
        offs = tuple(_readonly(np.asarray(b, dtype=float).reshape(-1)) for b in self.offsets)
        if len(offs) != len(ops) or any(b.shape[0] != p for b in offs):
            raise ValueError("offsets must match operators in count and dimension")
        path = np.asarray(self.state_path, dtype=int)
        if path.ndim != 1 or path.size < 1:
            raise ValueError("state_path must be a non-empty integer sequence")
        if path.min() < 0 or path.max() >= len(ops):
            raise ValueError("state_path entries must lie in [0, J)")
        if not (0.0 < self.stickiness < 1.0):
            raise ValueError(f"stickiness must be in (0, 1), got {self.stickiness}")
        path = path.copy()
        path.flags.writeable = False
        object.__setattr__(self, "operators", ops)
        object.__setattr__(self, "offsets", offs)
        object.__setattr__(self, "state_path", path)

    @property
    def p(self) -> int:
        return self.operators[0].shape[0]

    @property
    def n_states(self) -> int:
        return len(self.operators)

    @property
    def n_steps(self) -> int:
        return self.state_path.size


@dataclass(frozen=True)
class DecomposedModel:
    """J unit-Frobenius basis operators mixed by a sparse coefficient path.

    The transition at step t is ``sum_j c[j, t] * f_j``.
    """

    operators: tuple
    coefficients: np.ndarray

    def __post_init__(self):
        ops = tuple(_readonly(np.asarray(f, dtype=float)) for f in self.operators)
        if not ops:
            raise ValueError("need at least one basis operator")
        p = ops[0].shape[0]
        for j, f in enumerate(ops):
            if f.shape != (p, p) or not np.all(np.isfinite(f)):
                raise ValueError("operators must be finite square matrices of equal size")
            nrm = np.linalg.norm(f)
            if abs(nrm - 1.0) > 1e-9:
                raise ValueError(f"operator {j} has Frobenius norm {nrm:.12f}, expected 1")
        c = np.asarray(self.coefficients, dtype=float)
        if c.ndim != 2 or c.shape[0] != len(ops) or c.shape[1] < 1:
            raise ValueError(f"coefficients must be J x T with J={len(ops)}, got {c.shape}")
        if not np.all(np.isfinite(c)):
            raise ValueError("coefficients must be finite")
        object.__setattr__(self, "operators", ops)
        object.__setattr__(self, "coefficients", _readonly(c))

    @property
    def p(self) -> int:
        return self.operators[0].shape[0]

    @property
    def n_states(self) -> int:
        return len(self.operators)

    @property
    def n_steps(self) -> int:
        return self.coefficients.shape[1]


@dataclass(frozen=True)
class TimeVaryingModel:
    """A sequence of per-time operators A_t (and optional offsets b_t)."""

    operators: np.ndarray
    offsets: np.ndarray | None = None

    def __post_init__(self):
        ops = np.asarray(self.operators, dtype=float)
        if ops.ndim != 3 or ops.shape[1] != ops.shape[2] or ops.shape[0] < 1:
            raise ValueError(f"operators must be T x p x p, got shape {ops.shape}")
        if not np.all(np.isfinite(ops)):
            raise ValueError("operators must be finite")
        if self.offsets is not None:
            offs = np.asarray(self.offsets, dtype=float)
            if offs.shape != (ops.shape[0], ops.shape[1]):
                raise ValueError(f"offsets must be T x p, got shape {offs.shape}")
            if not np.all(np.isfinite(offs)):
                raise ValueError("offsets must be finite")
            object.__setattr__(self, "offsets", _readonly(offs))
        object.__setattr__(self, "operators", _readonly(ops))

    @property
    def p(self) -> int:
        return self.operators.shape[1]

    @property
    def n_steps(self) -> int:
        return self.operators.shape[0]


Model = LinearModel | SwitchingModel | DecomposedModel | TimeVaryingModel


class PredictionMode(enum.Enum):
    ONE_STEP = "one-step"
    IMS = "ims"
    FULL_LOOKAHEAD = "full-lookahead"


@dataclass(frozen=True)
class PredictionRequest:
    mode: PredictionMode
    order: int | None = None
    start_index: int = 0
    clamp_history: bool = False

    def __post_init__(self):
        if self.mode is PredictionMode.IMS and (self.order is None or self.order < 1):
            raise ValueError("IMS prediction needs an order K >= 1")
        if self.start_index < 0:
            raise ValueError("start_index must be non-negative")


def transition_at(model: Model, t: int) -> tuple[np.ndarray, np.ndarray]:
    """Return the affine transition ``(A_t, b_t)`` active at step t."""
    if t < 0:
        raise IndexError(f"time index {t} is negative")
    if isinstance(model, LinearModel):
        return model.A, model.b
    if isinstance(model, SwitchingModel):
        if t >= model.n_steps:
            raise IndexError(f"time index {t} outside state path of length {model.n_steps}")
        j = model.state_path[t]
        return model.operators[j], model.offsets[j]
    if isinstance(model, DecomposedModel):
        if t >= model.n_steps:
            raise IndexError(f"time index {t} outside coefficient path of length {model.n_steps}")
        c = model.coefficients[:, t]
        A = np.einsum("j,jkl->kl", c, np.stack(model.operators))
        return A, np.zeros(model.p)
    if isinstance(model, TimeVaryingModel):
        if t >= model.n_steps:
            raise IndexError(f"time index {t} outside operator sequence of length {model.n_steps}")
        b = model.offsets[t] if model.offsets is not None else np.zeros(model.p)
        return model.operators[t], b
    raise TypeError(f"unsupported model type {type(model).__name__}")


def _check_dims(model: Model, observations: TimeSeries) -> None:
    if model.p != observations.p:
        raise ValueError(
            f"model dimension {model.p} does not match series dimension {observations.p}"
        )


def predict_one_step(model: Model, observations: TimeSeries, t: int) -> np.ndarray:
    """Predict x_{t+1} from the observed column t."""
    _check_dims(model, observations)
    A, b = transition_at(model, t)
    return A @ observations.column(t) + b


def predict_ims(
    model: Model,
    observations: TimeSeries,
    t: int,
    K: int,
    clamp_history: bool = False,
) -> np.ndarray:
    """Iterative multi-step prediction of x_{t+1}, anchored K steps back.

    The anchor is the observed column t-K+1; K chained transitions produce the
    estimate.  Order 1 is identical to :func:`predict_one_step`.  When the
    anchor would fall before the series start, a precondition error is raised
    unless ``clamp_history`` moves the anchor to index 0 (yielding fewer than K
    applications).
    """
    if K < 1:
        raise ValueError(f"IMS order must be >= 1, got {K}")
    _check_dims(model, observations)
    anchor = t - K + 1
    if anchor < 0:
        if not clamp_history:
            raise ValueError(
                f"IMS order {K} at t={t} needs history back to index {anchor}; "
                "enable clamp_history to anchor at 0"
            )
        anchor = 0
    x = observations.column(anchor).copy()
    for s in range(anchor, t + 1):
        A, b = transition_at(model, s)
        x = A @ x + b
    return x


def predict_full_lookahead(
    model: Model,
    x0: np.ndarray,
    horizon: int,
    dt: float = 1.0,
) -> TimeSeries:
    """Roll the model forward ``horizon`` steps from x0.

    Column 0 is x0; each later column applies the transition to the previous
    *predicted* column.  If a value passes :data:`DIVERGENCE_LIMIT` the series
    is truncated there and flagged via ``diverged_at``.
    """
    if horizon < 1:
        raise ValueError(f"horizon must be >= 1, got {horizon}")
    x0 = np.asarray(x0, dtype=float).reshape(-1)
    if x0.shape[0] != model.p:
        raise ValueError(f"x0 has dimension {x0.shape[0]}, model expects {model.p}")
    out = np.empty((model.p, horizon + 1))
    out[:, 0] = x0
    if isinstance(model, LinearModel):
        A, b = model.A, model.b  # hoist the dispatch out of the hot loop
        x = x0
        for t in range(horizon):
            x = A @ x + b
            if not np.all(np.isfinite(x)) or np.max(np.abs(x)) > DIVERGENCE_LIMIT:
                return TimeSeries(out[:, : t + 1], dt=dt, diverged_at=t + 1)
            out[:, t + 1] = x
        return TimeSeries(out, dt=dt)
    x = x0
    for t in range(horizon):
        A, b = transition_at(model, t)
        x = A @ x + b
        if not np.all(np.isfinite(x)) or np.max(np.abs(x)) > DIVERGENCE_LIMIT:
            return TimeSeries(out[:, : t + 1], dt=dt, diverged_at=t + 1)
        out[:, t + 1] = x
    return TimeSeries(out, dt=dt)


def run_prediction(
    model: Model,
    observations: TimeSeries,
    request: PredictionRequest,
) -> TimeSeries:
    """Produce a series of predictions aligned with ``observations``.

    ONE_STEP and IMS fill column t+1 with the prediction of x_{t+1} (column 0
    copies the observation); FULL_LOOKAHEAD rolls out from the start column.
    """
    _check_dims(model, observations)
    T = observations.n_steps
    s0 = request.start_index
    if s0 >= T:
        raise ValueError(f"start_index {s0} leaves no steps to predict (T={T})")
    if request.mode is PredictionMode.FULL_LOOKAHEAD:
        return predict_full_lookahead(model, observations.column(s0), T - s0, dt=observations.dt)
    out = np.empty((observations.p, T - s0 + 1))
    out[:, 0] = observations.column(s0)
    for t in range(s0, T):
        if request.mode is PredictionMode.ONE_STEP:
            out[:, t - s0 + 1] = predict_one_step(model, observations, t)
        else:
            out[:, t - s0 + 1] = predict_ims(
                model, observations, t, request.order, clamp_history=request.clamp_history
            )
    return TimeSeries(out, dt=observations.dt)
