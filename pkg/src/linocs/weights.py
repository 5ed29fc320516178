"""Weight schedules assigning per-order weights w_0..w_K during training.

Three families: sequential activation (orders switch on once the previous
order's error drops below a threshold), exponential decay over the order, and
a joint form that decays in the order while growing with the current per-order
error.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

# Errors are capped here inside JointKE so a diverged order cannot dominate.
ERROR_CAP = 1e3


class ScheduleKind(enum.Enum):
    SEQUENTIAL_ACTIVATION = "sequential"
    EXPONENTIAL_DECAY = "exponential"
    JOINT_KE = "joint-ke"


@dataclass(frozen=True)
class WeightSchedule:
    kind: ScheduleKind
    K: int
    threshold: float = 0.1     # sequential: error level that activates the next order
    base_weight: float = 1.0   # sequential: weight of active orders
    sigma_w: float = 0.01      # exponential: decay rate over the order
    decay_k: float = 0.01      # joint: decay rate over the order
    growth_e: float = 0.0      # joint: gain on the (capped) per-order error

    def __post_init__(self):
        if self.K < 0:
            raise ValueError(f"K must be >= 0, got {self.K}")
        if self.kind is ScheduleKind.SEQUENTIAL_ACTIVATION:
            if not (self.threshold > 0 and self.base_weight > 0):
                raise ValueError("sequential activation needs threshold > 0 and base_weight > 0")
        elif self.kind is ScheduleKind.EXPONENTIAL_DECAY:
            if not self.sigma_w > 0:
                raise ValueError("exponential decay needs sigma_w > 0")
        else:
            if not (self.decay_k > 0 and self.growth_e >= 0):
                raise ValueError("joint schedule needs decay_k > 0 and growth_e >= 0")
            if not self.decay_k > self.growth_e:
                raise ValueError(
                    f"joint schedule needs decay_k > growth_e, got {self.decay_k} <= {self.growth_e}"
                )

    @classmethod
    def sequential(cls, K: int, threshold: float, base_weight: float = 1.0) -> "WeightSchedule":
        return cls(ScheduleKind.SEQUENTIAL_ACTIVATION, K, threshold=threshold, base_weight=base_weight)

    @classmethod
    def exponential(cls, K: int, sigma_w: float = 0.01) -> "WeightSchedule":
        return cls(ScheduleKind.EXPONENTIAL_DECAY, K, sigma_w=sigma_w)

    @classmethod
    def joint(cls, K: int, decay_k: float, growth_e: float) -> "WeightSchedule":
        return cls(ScheduleKind.JOINT_KE, K, decay_k=decay_k, growth_e=growth_e)


@dataclass(frozen=True)
class ScheduleState:
    active_order: int
    iteration: int = 0
    last_errors: tuple = ()

    def errors_array(self, K: int) -> np.ndarray:
        if len(self.last_errors) == K + 1:
            return np.asarray(self.last_errors, dtype=float)
        return np.full(K + 1, np.inf)


def initial_state(schedule: WeightSchedule) -> ScheduleState:
    active = 0 if schedule.kind is ScheduleKind.SEQUENTIAL_ACTIVATION else schedule.K
    return ScheduleState(active_order=active)


def weights_for_iteration(schedule: WeightSchedule, state: ScheduleState) -> np.ndarray:
    """Weights w_0..w_K for the current iteration; pure in (schedule, state)."""
    K = schedule.K
    k = np.arange(K + 1)
    if schedule.kind is ScheduleKind.SEQUENTIAL_ACTIVATION:
        w = np.where(k <= state.active_order, schedule.base_weight, 0.0)
    elif schedule.kind is ScheduleKind.EXPONENTIAL_DECAY:
        w = np.exp(-schedule.sigma_w * k)
    else:
        e = np.minimum(state.errors_array(K), ERROR_CAP)
        w = np.exp(-schedule.decay_k * k) * (1.0 + schedule.growth_e * e)
        w = w / w[0]
    return w


def advance(schedule: WeightSchedule, state: ScheduleState, errors) -> ScheduleState:
    """Record per-order errors; for sequential activation, possibly switch on
    the next order (never deactivating lower ones)."""
    e = np.asarray(errors, dtype=float)
    if e.shape != (schedule.K + 1,):
        raise ValueError(f"expected {schedule.K + 1} errors, got shape {e.shape}")
    if np.any(np.isnan(e)) or np.any(e < 0):
        raise ValueError("errors must be non-negative (inf allowed for unevaluated orders)")
    active = state.active_order
    if schedule.kind is ScheduleKind.SEQUENTIAL_ACTIVATION:
        if e[active] < schedule.threshold:
            active = min(active + 1, schedule.K)
    return ScheduleState(
        active_order=active,
        iteration=state.iteration + 1,
        last_errors=tuple(float(v) for v in e),
    )
