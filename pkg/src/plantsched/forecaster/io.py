"""Model persistence as JSON.

Layout (format ``plantsched-forecast``, version 1)::

    {"format": "plantsched-forecast", "version": 1,
     "window": 30, "hidden": 20, "dense": 20, "input_size": 1,
     "input_mean": float, "input_scale": float,
     "lstm_W": [4][H][H+I], "lstm_b": [4][H],   # gate order f, i, c, o
     "dense_W": [D][H], "dense_b": [D], "out_w": [D], "out_b": float}

Floats are written with ``repr`` precision so a save/load round trip is
exact, and keys are sorted so identical models give identical bytes.
"""
from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from ..errors import ValidationError
from .lstm import ForecastModel, LstmParams

FORMAT = "plantsched-forecast"
VERSION = 1


def model_to_dict(model: ForecastModel) -> dict:
    return {
        "format": FORMAT,
        "version": VERSION,
        "window": model.window,
        "hidden": model.lstm.hidden_size,
        "dense": int(model.dense_W.shape[0]),
        "input_size": model.lstm.input_size,
        "input_mean": model.input_mean,
        "input_scale": model.input_scale,
        "lstm_W": model.lstm.W.tolist(),
        "lstm_b": model.lstm.b.tolist(),
        "dense_W": model.dense_W.tolist(),
        "dense_b": model.dense_b.tolist(),
        "out_w": model.out_w.tolist(),
        "out_b": model.out_b,
    }


def model_from_dict(d: dict) -> ForecastModel:
    if d.get("format") != FORMAT:
        raise ValidationError(f"not a forecaster model file (format={d.get('format')!r})")
    if d.get("version") != VERSION:
        raise ValidationError(f"unsupported model version {d.get('version')!r}")
    try:
        return ForecastModel(
            LstmParams(np.array(d["lstm_W"], dtype=np.float64), np.array(d["lstm_b"], dtype=np.float64)),
            np.array(d["dense_W"], dtype=np.float64),
            np.array(d["dense_b"], dtype=np.float64),
            np.array(d["out_w"], dtype=np.float64),
            float(d["out_b"]),
            float(d["input_mean"]),
            float(d["input_scale"]),
            int(d["window"]),
        )
    except KeyError as exc:
        raise ValidationError(f"model file missing field {exc.args[0]!r}") from None


def save_model(model: ForecastModel, path) -> None:
    Path(path).write_text(json.dumps(model_to_dict(model), sort_keys=True) + "\n", encoding="utf-8")


def load_model(path) -> ForecastModel:
    p = Path(path)
    if not p.exists():
        raise FileNotFoundError(f"model file not found: {p}")
    try:
        d = json.loads(p.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ValidationError(f"model file is not valid JSON: {exc}") from None
    return model_from_dict(d)
