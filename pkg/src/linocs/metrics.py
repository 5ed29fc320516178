"""Evaluation quantities: errors, correlations, operator distances, eigenvalue
matching, and the horizon until the lookahead's relative error reaches a
threshold."""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .core import Model, TimeSeries, predict_full_lookahead
from .numerics import eigenvalues, linear_sum_assignment


@dataclass
class EvalReport:
    mse_one_step: float | None = None
    mse_ims: dict = field(default_factory=dict)          # order -> mse
    mse_full_lookahead: float | None = None
    correlation_full_lookahead: float | None = None
    operator_frobenius_error: float | list | None = None
    horizon_steps: int | None = None
    eigen_match_distances: list = field(default_factory=list)
    diverged: bool = False

    def to_dict(self) -> dict:
        return {
            "mse_one_step": self.mse_one_step,
            "mse_ims": {str(k): v for k, v in sorted(self.mse_ims.items())},
            "mse_full_lookahead": self.mse_full_lookahead,
            "correlation_full_lookahead": self.correlation_full_lookahead,
            "operator_frobenius_error": self.operator_frobenius_error,
            "horizon_steps": self.horizon_steps,
            "eigen_match_distances": list(self.eigen_match_distances),
            "diverged": self.diverged,
        }


def _overlap(a, b) -> tuple[np.ndarray, np.ndarray]:
    va = a.values if isinstance(a, TimeSeries) else np.asarray(a, dtype=float)
    vb = b.values if isinstance(b, TimeSeries) else np.asarray(b, dtype=float)
    if va.shape[0] != vb.shape[0]:
        raise ValueError(f"dimension mismatch: {va.shape[0]} vs {vb.shape[0]}")
    n = min(va.shape[1], vb.shape[1])
    if n == 0:
        raise ValueError("no overlapping columns to compare")
    return va[:, :n], vb[:, :n]


def mse(a, b) -> float:
    """Mean squared entry-wise difference over the columns present in both
    series (a diverged series contributes only its pre-divergence columns)."""
    va, vb = _overlap(a, b)
    return float(np.mean((va - vb) ** 2))


def pearson(a, b) -> float:
    """Pearson correlation of the flattened overlapping columns; defined as 0
    (with a warning) when either input is constant."""
    va, vb = _overlap(a, b)
    x = va.ravel()
    y = vb.ravel()
    sx, sy = np.std(x), np.std(y)
    if sx == 0.0 or sy == 0.0:
        warnings.warn("pearson of a constant input is defined as 0")
        return 0.0
    return float(np.mean((x - x.mean()) * (y - y.mean())) / (sx * sy))


def operator_effect_difference(A_hat, A_true, series, factor: float = 1.0) -> TimeSeries:
    """Per-column ((A_hat - A_true) x_t) * factor; the factor only rescales for
    display."""
    A_hat = np.asarray(A_hat, dtype=float)
    A_true = np.asarray(A_true, dtype=float)
    if A_hat.shape != A_true.shape:
        raise ValueError(f"operator shapes differ: {A_hat.shape} vs {A_true.shape}")
    vals = (A_hat - A_true) @ series.values * factor
    return TimeSeries(vals, dt=series.dt)


def horizon_until_error(model: Model, observations: TimeSeries, rel_threshold: float = 1.0) -> int:
    """Steps of full lookahead before the relative error first reaches the
    threshold.

    The rollout starts at the observations' first column.  The relative error
    at step h is the error norm over the running RMS of the mean-centered true
    signal (per entry) up to h; the returned horizon is the last step at which
    every ratio so far stayed below the threshold.  Immediate exceedance gives
    0; never exceeding gives the full length.
    """
    truth = observations.values
    p, n_cols = truth.shape
    pred = predict_full_lookahead(model, truth[:, 0], n_cols - 1, dt=observations.dt)
    pv = pred.values
    # running mean / per-entry variance of the centered true signal
    csum = np.cumsum(truth, axis=1)
    csq = np.cumsum(np.sum(truth * truth, axis=0))
    counts = np.arange(1, n_cols + 1)
    means = csum / counts
    var_entry = csq / counts / p - np.sum(means * means, axis=0) / p
    den = np.sqrt(np.maximum(var_entry, 0.0))
    limit = min(n_cols, pv.shape[1])
    err = np.linalg.norm(pv[:, :limit] - truth[:, :limit], axis=0)
    for h in range(1, limit):
        if den[h] <= 0.0:
            if err[h] > 0.0:
                return h - 1
            continue
        if err[h] / den[h] >= rel_threshold:
            return h - 1
    if limit < n_cols:  # the rollout itself diverged past the stored columns
        return limit - 1
    return n_cols - 1


def eigen_match(A_hat, A_true) -> np.ndarray:
    """Distances |lambda_hat_pi(i) - lambda_i| under the cost-minimal pairing
    of the two spectra."""
    ev_hat = eigenvalues(np.asarray(A_hat, dtype=float))
    ev_true = eigenvalues(np.asarray(A_true, dtype=float))
    cost = np.abs(ev_true[:, None] - ev_hat[None, :])
    perm = linear_sum_assignment(cost)
    return np.abs(ev_hat[perm] - ev_true)
