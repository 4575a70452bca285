"""Mini-batch Adam training on MAE, and time-wise cross-validation."""
from __future__ import annotations

import datetime as dt
import logging
from dataclasses import dataclass, field

import numpy as np

from ..calendar import date_of, day_of
from ..errors import ValidationError
from .adam import AdamState, adam_step
from .lstm import DENSE, HIDDEN, WINDOW, ForecastModel, forward, init_model, loss_and_grad, mae_normalized
from .metrics import AccuracyReport, accuracy_metrics

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.001
    batch_size: int = 32
    epochs: int = 200
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    rng_seed: int = 0
    # early stopping on the last `validation_fraction` of training pairs
    validation_fraction: float = 0.1
    patience: int = 20
    window: int = WINDOW
    hidden: int = HIDDEN
    dense: int = DENSE

    def __post_init__(self):
        problems = []
        if not self.learning_rate > 0:
            problems.append("learning_rate must be > 0")
        if self.batch_size < 1:
            problems.append("batch_size must be >= 1")
        if self.epochs < 0:
            problems.append("epochs must be >= 0")
        if not 0 <= self.validation_fraction < 1:
            problems.append("validation_fraction must be in [0, 1)")
        if problems:
            raise ValidationError(problems, context="train config")


@dataclass
class TrainLog:
    train_loss: list = field(default_factory=list)  # MAE in GDU after each epoch
    val_loss: list = field(default_factory=list)
    best_epoch: int = 0


def supervised_pairs(values, window=WINDOW):
    """Windows of ``window`` prior days and the following day's value."""
    v = np.asarray(values, dtype=np.float64)
    if len(v) <= window:
        return np.zeros((0, window)), np.zeros(0)
    X = np.lib.stride_tricks.sliding_window_view(v[:-1], window)
    return np.ascontiguousarray(X), v[window:].copy()


def _values(history):
    return np.asarray(getattr(history, "values", history), dtype=np.float64)


def train_with_log(history, config: TrainConfig = TrainConfig()):
    values = _values(history)
    if len(values) <= config.window + config.batch_size:
        raise ValidationError(
            f"series too short: {len(values)} days, need more than window + batch_size = "
            f"{config.window + config.batch_size}"
        )
    X, y = supervised_pairs(values, config.window)
    n_val = int(round(config.validation_fraction * len(y)))
    if len(y) - n_val < config.batch_size:
        n_val = 0
    fit_end = len(y) - n_val
    # normalisation constants come from the fitting span only
    fit_days = values[: fit_end + config.window]
    mean = float(fit_days.mean())
    scale = float(fit_days.std())
    if scale == 0:
        scale = 1.0

    rng = np.random.default_rng(config.rng_seed)
    model = init_model(rng, config.hidden, config.dense, 1, config.window, mean, scale)
    Z = (X - mean) / scale
    yz = (y - mean) / scale
    Zf, yf, Zv, yv = Z[:fit_end], yz[:fit_end], Z[fit_end:], yz[fit_end:]

    theta = model.to_vector()
    state = AdamState.zeros(theta.size)
    tlog = TrainLog()
    best_theta, best_val, since = theta, np.inf, 0
    for epoch in range(config.epochs):
        order = rng.permutation(fit_end)
        for k in range(0, fit_end, config.batch_size):
            idx = order[k : k + config.batch_size]
            _, g = loss_and_grad(model, Zf[idx], yf[idx])
            theta, state = adam_step(
                theta, g, state, config.learning_rate, config.adam_beta1, config.adam_beta2, config.adam_eps
            )
            model = model.with_vector(theta)
        tlog.train_loss.append(mae_normalized(model, Zf, yf) * scale)
        if n_val:
            val = mae_normalized(model, Zv, yv) * scale
            tlog.val_loss.append(val)
            if val < best_val:
                best_val, best_theta, since = val, theta, 0
                tlog.best_epoch = epoch + 1
            else:
                since += 1
                if config.patience and since >= config.patience:
                    log.debug("early stop at epoch %d (best %d)", epoch + 1, tlog.best_epoch)
                    break
        else:
            best_theta = theta
            tlog.best_epoch = epoch + 1
    if config.epochs > 0:
        model = model.with_vector(best_theta)
    return model, tlog


def train(history, config: TrainConfig = TrainConfig()) -> ForecastModel:
    """Fit the forecaster to a daily series (``DailyGduSeries`` or array)."""
    return train_with_log(history, config)[0]


def predict_series(model: ForecastModel, values, batch=4096):
    """One-step predictions for every day that has ``window`` prior days."""
    X, _ = supervised_pairs(values, model.window)
    out = np.empty(len(X))
    feats = np.empty((len(X), model.lstm.hidden_size))
    for k in range(0, len(X), batch):
        p, h = forward(model, X[k : k + batch])
        out[k : k + batch] = p
        feats[k : k + batch] = h
    return out, feats


class PersistenceModel:
    """Tomorrow equals today."""

    window = 1

    def predict_pairs(self, X):
        return X[:, -1]


def cv_folds(start_day: int, n_days: int, n_folds: int = 5):
    """Test blocks: July 1 - December 31 of each of the last ``n_folds`` complete calendar years.

    Returns a list of ``(first_day, last_day)`` test ranges, oldest first.
    """
    end_day = start_day + n_days - 1
    last = date_of(end_day)
    year = last.year if last >= dt.date(last.year, 12, 31) else last.year - 1
    folds = []
    while len(folds) < n_folds:
        a, b = day_of(dt.date(year, 7, 1)), day_of(dt.date(year, 12, 31))
        if a < start_day:
            break
        folds.append((a, b))
        year -= 1
    return folds[::-1]


def cross_validate(history, config: TrainConfig = TrainConfig(), n_folds: int = 5, fit=None, min_years: float = 6.0):
    """Expanding-window, time-wise cross-validation.

    Fold ``k`` trains on every day before its six-month test block and
    scores one-step predictions inside it. ``fit(values, config)`` may be
    supplied to replace training; it must return an object with
    ``predict_pairs(X) -> predictions``. The persistence baseline is scored
    on the same test days.
    """
    values = _values(history)
    start = int(getattr(history, "start_day", 0))
    if len(values) < int(min_years * 365):
        raise ValidationError(f"insufficient history: {len(values)} days, need at least {min_years} years")
    folds = cv_folds(start, len(values), n_folds)
    if len(folds) < n_folds:
        raise ValidationError(f"insufficient history for {n_folds} folds")
    X_all, y_all = supervised_pairs(values, config.window)
    target_day = start + config.window + np.arange(len(y_all))
    persistence = PersistenceModel()

    fold_rows, preds, base, obs = [], [], [], []
    for k, (a, b) in enumerate(folds):
        train_end = a - start  # exclusive index into values
        test = (target_day >= a) & (target_day <= b)
        if fit is None:
            model = train(values[:train_end], config)
            p = forward(model, X_all[test])[0]
        else:
            model = fit(values[:train_end], config)
            p = np.asarray(model.predict_pairs(X_all[test]), dtype=np.float64)
        q = persistence.predict_pairs(X_all[test])
        o = y_all[test]
        m = accuracy_metrics(p, o)
        mb = accuracy_metrics(q, o)
        fold_rows.append(
            {
                "fold": k + 1,
                "train_first_day": start,
                "train_last_day": a - 1,
                "test_first_day": a,
                "test_last_day": b,
                "test_first_date": date_of(a).isoformat(),
                "test_last_date": date_of(b).isoformat(),
                "n_test": int(test.sum()),
                "rmse": m.rmse,
                "rrmse": m.rrmse,
                "r2": m.r2,
                "baseline_rmse": mb.rmse,
                "baseline_r2": mb.r2,
            }
        )
        preds.append(p)
        base.append(q)
        obs.append(o)
    overall = accuracy_metrics(np.concatenate(preds), np.concatenate(obs))
    bl = accuracy_metrics(np.concatenate(base), np.concatenate(obs))
    return AccuracyReport(
        overall.rmse,
        overall.rrmse,
        overall.r2,
        overall.n,
        fold_rows,
        {"name": "persistence", "rmse": bl.rmse, "rrmse": bl.rrmse, "r2": bl.r2},
    )
