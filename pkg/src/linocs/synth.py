"""Ground-truth system generators and noise models for the synthetic benchmarks."""
from __future__ import annotations

import enum
import hashlib
from dataclasses import dataclass

import numpy as np

from .core import (
    DecomposedModel,
    LinearModel,
    SwitchingModel,
    TimeSeries,
    predict_full_lookahead,
)


def rng_for(seed: int, tag: str) -> np.random.Generator:
    """Counter-based generator keyed by (seed, tag).

    Streams for distinct tags are independent, so adding a generator never
    perturbs existing draws for the same seed.
    """
    digest = hashlib.sha256(tag.encode("utf-8")).digest()[:8]
    tag_key = int.from_bytes(digest, "little")
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed), tag_key])))


class NoiseKind(enum.Enum):
    GAUSSIAN_IID = "gaussian"
    STRUCTURED_SINE = "sine"


@dataclass(frozen=True)
class NoiseSpec:
    kind: NoiseKind
    sigma: float
    gamma: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if not (np.isfinite(self.sigma) and self.sigma >= 0):
            raise ValueError(f"sigma must be finite and >= 0, got {self.sigma}")
        if self.kind is NoiseKind.STRUCTURED_SINE and not np.isfinite(self.gamma):
            raise ValueError("structured sine noise needs a finite gamma")


@dataclass(frozen=True)
class LorenzParams:
    sigma: float = 10.0
    rho: float = 28.0
    beta: float = 8.0 / 3.0
    dt: float = 0.1 / 9.0
    x0: tuple = (1.0, 1.0, 1.0)

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError(f"dt must be positive, got {self.dt}")
        if len(self.x0) != 3:
            raise ValueError("x0 must have 3 components")


def rotation_operator(dim: int, angles, scale: float = 1.0) -> np.ndarray:
    """Scaled rotation: one angle in 2-D; in 3-D, elementary rotations about
    x, y, z composed in that order (Rz @ Ry @ Rx)."""
    angles = np.atleast_1d(np.asarray(angles, dtype=float))
    if not scale > 0:
        raise ValueError(f"scale must be positive, got {scale}")
    if dim == 2:
        if angles.size != 1:
            raise ValueError(f"2-D rotation needs exactly 1 angle, got {angles.size}")
        th = angles[0]
        R = np.array([[np.cos(th), -np.sin(th)], [np.sin(th), np.cos(th)]])
    elif dim == 3:
        if angles.size != 3:
            raise ValueError(f"3-D rotation needs exactly 3 angles, got {angles.size}")
        ax, ay, az = angles
        Rx = np.array([[1, 0, 0], [0, np.cos(ax), -np.sin(ax)], [0, np.sin(ax), np.cos(ax)]])
        Ry = np.array([[np.cos(ay), 0, np.sin(ay)], [0, 1, 0], [-np.sin(ay), 0, np.cos(ay)]])
        Rz = np.array([[np.cos(az), -np.sin(az), 0], [np.sin(az), np.cos(az), 0], [0, 0, 1]])
        R = Rz @ Ry @ Rx
    else:
        raise ValueError(f"dim must be 2 or 3, got {dim}")
    return scale * R


def cylinder_model(angle: float, drift: float, scale: float = 1.0) -> LinearModel:
    """Rotation in the first two coordinates plus constant drift in the third.

    At scale 1 the radius in the rotating plane is preserved exactly.
    """
    A = np.eye(3)
    A[:2, :2] = rotation_operator(2, [angle], scale)
    return LinearModel(A, np.array([0.0, 0.0, float(drift)]))


def simulate_linear(model: LinearModel, x0, T: int) -> TimeSeries:
    """Exact recursion x_{t+1} = A x_t + b over T steps."""
    return predict_full_lookahead(model, x0, T)


def state_path_from_switches(
    T: int,
    switch_times,
    J: int,
    labels=None,
) -> np.ndarray:
    """Per-step state labels from strictly increasing switch times in (0, T).

    Segments cycle 0, 1, ..., J-1, 0, ... unless explicit labels are given.
    """
    switch_times = list(switch_times)
    if any(not (0 < s < T) for s in switch_times):
        raise ValueError("switch times must lie strictly inside (0, T)")
    if any(b <= a for a, b in zip(switch_times, switch_times[1:])):
        raise ValueError("switch times must be strictly increasing")
    bounds = [0] + switch_times + [T]
    if any(b == a for a, b in zip(bounds, bounds[1:])):
        raise ValueError("empty segment")
    n_segments = len(bounds) - 1
    if labels is None:
        labels = [i % J for i in range(n_segments)]
    elif len(labels) != n_segments:
        raise ValueError(f"expected {n_segments} labels, got {len(labels)}")
    path = np.empty(T, dtype=int)
    for lab, a, b in zip(labels, bounds, bounds[1:]):
        if not (0 <= lab < J):
            raise ValueError(f"label {lab} outside [0, {J})")
        path[a:b] = lab
    return path


def simulate_switching(
    J: int,
    operators,
    offsets,
    switch_times,
    x0,
    T: int,
    labels=None,
    stickiness: float = 0.98,
) -> tuple[TimeSeries, np.ndarray]:
    """Piecewise-linear recursion; returns the series and the active-state path."""
    if len(operators) != J or len(offsets) != J:
        raise ValueError(f"expected {J} operators and offsets")
    path = state_path_from_switches(T, switch_times, J, labels=labels)
    model = SwitchingModel(tuple(operators), tuple(offsets), path, stickiness=stickiness)
    return predict_full_lookahead(model, x0, T), path


def simulate_dlds(operators, coefficient_path, x0, T: int) -> TimeSeries:
    """Recursion under the time-varying combination sum_j c[j,t] f_j."""
    c = np.asarray(coefficient_path, dtype=float)
    if c.shape[1] != T:
        raise ValueError(f"coefficient path covers {c.shape[1]} steps, expected {T}")
    model = DecomposedModel(tuple(operators), c)
    return predict_full_lookahead(model, x0, T)


def pseudo_switching_coefficients(
    J: int,
    T: int,
    n_segments: int | None = None,
    labels=None,
    overlap_frac: float = 0.05,
    amplitude: float = 1.0,
) -> np.ndarray:
    """Coefficient path that trades regimes off smoothly.

    One-hot plateaus of height ``amplitude`` per segment, with linear
    (trapezoidal) cross-fades spanning ``overlap_frac`` of a segment at each
    regime change.
    """
    if n_segments is None:
        n_segments = J
    if labels is None:
        labels = [i % J for i in range(n_segments)]
    if len(labels) != n_segments:
        raise ValueError(f"expected {n_segments} labels, got {len(labels)}")
    bounds = np.linspace(0, T, n_segments + 1).astype(int)
    seg_len = T // n_segments
    w = max(1, int(round(overlap_frac * seg_len)))
    c = np.zeros((J, T))
    for i, lab in enumerate(labels):
        a, b = bounds[i], bounds[i + 1]
        c[lab, a:b] = amplitude
        if i > 0:  # fade this regime in over the first w steps, previous out
            prev = labels[i - 1]
            n = min(w, b - a)
            ramp = np.linspace(0.0, 1.0, n + 1)[1:]
            c[lab, a:a + n] = amplitude * ramp
            c[prev, a:a + n] = amplitude * (1.0 - ramp)
    return c


def lorenz_derivative(v: np.ndarray, params: LorenzParams) -> np.ndarray:
    x, y, z = v
    return np.array([
        params.sigma * (y - x),
        x * (params.rho - z) - y,
        x * y - params.beta * z,
    ])


def simulate_lorenz(params: LorenzParams, n_points: int) -> TimeSeries:
    """Classic 4th-order Runge-Kutta integration; deterministic."""
    if n_points < 2:
        raise ValueError(f"need at least 2 points, got {n_points}")
    X = np.empty((3, n_points))
    X[:, 0] = params.x0
    dt = params.dt
    for i in range(1, n_points):
        v = X[:, i - 1]
        k1 = lorenz_derivative(v, params)
        k2 = lorenz_derivative(v + 0.5 * dt * k1, params)
        k3 = lorenz_derivative(v + 0.5 * dt * k2, params)
        k4 = lorenz_derivative(v + dt * k3, params)
        X[:, i] = v + (dt / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
    return TimeSeries(X, dt=dt)


def add_noise(series: TimeSeries, spec: NoiseSpec) -> TimeSeries:
    """Additive noise; the input series is untouched and the draw is a pure
    function of the spec's seed."""
    v = series.values.copy()
    if spec.sigma == 0 and spec.kind is NoiseKind.GAUSSIAN_IID:
        return TimeSeries(v, dt=series.dt)
    if spec.kind is NoiseKind.GAUSSIAN_IID:
        rng = rng_for(spec.seed, "gaussian-noise")
        v = v + rng.normal(0.0, spec.sigma, size=v.shape)
    else:
        t = np.arange(v.shape[1])
        v = v + spec.sigma * np.sin(spec.gamma * t)[None, :]
    return TimeSeries(v, dt=series.dt)
