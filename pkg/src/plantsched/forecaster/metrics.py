"""Forecast accuracy metrics."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import ValidationError


@dataclass(frozen=True)
class AccuracyReport:
    rmse: float
    rrmse: float  # fraction of mean observation
    r2: float
    n: int = 0
    folds: list = field(default_factory=list)
    baseline: dict | None = None

    def to_dict(self):
        return {
            "rmse": self.rmse,
            "rrmse": self.rrmse,
            "r2": self.r2,
            "n": self.n,
            "folds": [dict(f) for f in self.folds],
            "baseline": self.baseline,
        }


def accuracy_metrics(pred, obs) -> AccuracyReport:
    pred = np.asarray(pred, dtype=np.float64)
    obs = np.asarray(obs, dtype=np.float64)
    if pred.shape != obs.shape or pred.ndim != 1:
        raise ValidationError("prediction and observation series must be 1-D and equal length")
    if len(obs) < 2:
        raise ValidationError("need at least two points")
    mean = obs.mean()
    if mean == 0:
        raise ValidationError("rrmse undefined: mean observation is zero")
    ss_tot = float(np.sum((obs - mean) ** 2))
    if ss_tot == 0:
        raise ValidationError("r2 undefined: observations have zero variance")
    rmse = float(np.sqrt(np.mean((pred - obs) ** 2)))
    r2 = 1.0 - float(np.sum((pred - obs) ** 2)) / ss_tot
    return AccuracyReport(rmse=rmse, rrmse=rmse / float(mean), r2=r2, n=len(obs))
