"""Windowed LSTM forecaster for next-day GDU."""
from .adam import AdamState, adam_step
from .io import load_model, save_model
from .lstm import (
    DENSE,
    HIDDEN,
    WINDOW,
    ForecastModel,
    LstmParams,
    cell_step_backward,
    forward,
    init_model,
    loss_and_grad,
    lstm_cell_step,
    zero_model,
)
from .metrics import AccuracyReport, accuracy_metrics
from .training import (
    PersistenceModel,
    TrainConfig,
    TrainLog,
    cross_validate,
    cv_folds,
    predict_series,
    supervised_pairs,
    train,
    train_with_log,
)
