import datetime as dt

import numpy as np
import pytest

from plantsched.calendar import day_of
from plantsched.errors import ShapeError, ValidationError
from plantsched.forecaster import (
    AdamState,
    LstmParams,
    TrainConfig,
    accuracy_metrics,
    adam_step,
    cell_step_backward,
    cross_validate,
    cv_folds,
    forward,
    init_model,
    io,
    loss_and_grad,
    lstm_cell_step,
    predict_series,
    train,
    train_with_log,
    zero_model,
)
from plantsched.forecaster import lstm as lstm_mod
from plantsched.ingest import DailyGduSeries


def _random_params(rng, H, I=1, scale=0.5):
    return LstmParams(rng.normal(0, scale, (4, H, H + I)), rng.normal(0, scale, (4, H)))


# ------------------------------------------------------------- cell step


def test_cell_step_all_zero():
    p = LstmParams(np.zeros((4, 3, 4)), np.zeros((4, 3)))
    h, c = lstm_cell_step(p, [0.7], np.zeros(3), np.zeros(3))
    assert np.all(h == 0) and np.all(c == 0)


def test_cell_step_zero_weights_halve_state():
    p = LstmParams(np.zeros((4, 3, 4)), np.zeros((4, 3)))
    v = np.array([1.0, -2.0, 0.3])
    h, c = lstm_cell_step(p, [5.0], np.ones(3), v)
    assert np.allclose(c, 0.5 * v, rtol=0, atol=1e-15)
    assert np.allclose(h, 0.5 * np.tanh(0.5 * v), rtol=0, atol=1e-15)


def test_cell_step_matches_gate_equations():
    rng = np.random.default_rng(0)
    p = _random_params(rng, 4)
    x, hp, cp = rng.normal(size=1), rng.normal(size=4), rng.normal(size=4)
    z = np.concatenate([hp, x])
    sig = lambda a: 1 / (1 + np.exp(-a))  # noqa: E731
    f = sig(p.W_f @ z + p.b_f)
    i = sig(p.W_i @ z + p.b_i)
    g = np.tanh(p.W_c @ z + p.b_c)
    o = sig(p.W_o @ z + p.b_o)
    c = f * cp + i * g
    h, c2 = lstm_cell_step(p, x, hp, cp)
    assert np.allclose(c2, c, atol=1e-14)
    assert np.allclose(h, o * np.tanh(c), atol=1e-14)


def test_cell_step_shape_errors():
    p = LstmParams(np.zeros((4, 3, 4)), np.zeros((4, 3)))
    with pytest.raises(ShapeError):
        lstm_cell_step(p, [1.0, 2.0], np.zeros(3), np.zeros(3))
    with pytest.raises(ShapeError):
        lstm_cell_step(p, [1.0], np.zeros(2), np.zeros(2))
    with pytest.raises(ShapeError):
        LstmParams(np.zeros((4, 3, 4)), np.zeros((4, 2)))


@pytest.mark.parametrize("seed", range(5))
def test_cell_step_jacobian_finite_differences(seed):
    rng = np.random.default_rng(seed)
    H = int(rng.integers(2, 6))
    p = _random_params(rng, H)
    x, hp, cp = rng.normal(size=1), rng.normal(size=H), rng.normal(size=H)
    state = np.concatenate([x, hp, cp])
    eps = 1e-6

    def out(v):
        h, c = lstm_cell_step(p, v[:1], v[1 : 1 + H], v[1 + H :])
        return np.concatenate([h, c])

    fd = np.empty((2 * H, state.size))
    for j in range(state.size):
        e = np.zeros_like(state)
        e[j] = eps
        fd[:, j] = (out(state + e) - out(state - e)) / (2 * eps)
    an = np.empty_like(fd)
    for k in range(2 * H):
        dh, dc = np.zeros(H), np.zeros(H)
        (dh if k < H else dc)[k % H] = 1.0
        dx, dhp, dcp, _, _ = cell_step_backward(p, x, hp, cp, dh, dc)
        an[k] = np.concatenate([dx, dhp, dcp])
    assert np.linalg.norm(an - fd) <= 1e-3 * np.linalg.norm(fd)


# ------------------------------------------------------------- forward


def test_forward_zero_model_is_bias_path():
    m = zero_model(out_b=0.3, input_mean=10.0, input_scale=2.0)
    pred, g = forward(m, np.arange(30.0))
    assert pred == pytest.approx(0.3 * 2.0 + 10.0, abs=1e-12)
    assert g.shape == (20,) and np.all(g == 0)


def test_forward_constant_windows_agree():
    m = init_model(np.random.default_rng(1), input_mean=5, input_scale=3)
    series = np.full(100, 7.5)
    (p1, g1), (p2, g2) = forward(m, series[:30]), forward(m, series[40:70])
    assert p1 == p2 and np.array_equal(g1, g2)


def test_forward_batch_matches_single_and_rejects_bad_window():
    m = init_model(np.random.default_rng(2), input_mean=5, input_scale=3)
    X = np.random.default_rng(3).uniform(0, 20, (4, 30))
    pb, gb = forward(m, X)
    for k in range(4):
        p, g = forward(m, X[k])
        assert p == pytest.approx(pb[k], abs=1e-12)
        assert np.allclose(g, gb[k], atol=1e-12)
    with pytest.raises(ShapeError):
        forward(m, np.zeros(29))


def test_normalization_round_trip():
    m = init_model(np.random.default_rng(0), input_mean=12.3, input_scale=4.56)
    v = np.random.default_rng(1).uniform(-50, 50, 1000)
    assert np.max(np.abs(m.denormalize(m.normalize(v)) - v)) <= 1e-12


def test_parameter_vector_round_trip():
    m = init_model(np.random.default_rng(0))
    vec = m.to_vector()
    assert vec.size == 4 * 20 * 21 + 4 * 20 + 20 * 20 + 20 + 20 + 1
    assert m.with_vector(vec).equals(m)
    with pytest.raises(ShapeError):
        m.with_vector(vec[:-1])


# ------------------------------------------------------------- gradients


def _fd_grad(model, Z, yz, eps=1e-6):
    theta = model.to_vector()
    g = np.empty_like(theta)
    for k in range(theta.size):
        e = np.zeros_like(theta)
        e[k] = eps
        lp = lstm_mod.mae_normalized(model.with_vector(theta + e), Z, yz)
        lm = lstm_mod.mae_normalized(model.with_vector(theta - e), Z, yz)
        g[k] = (lp - lm) / (2 * eps)
    return g


def _grad_case(seed):
    """Small random model and batch with every residual away from the MAE kink."""
    rng = np.random.default_rng(seed)
    while True:
        H, D, T, B = (int(rng.integers(2, 6)) for _ in range(4))
        m = init_model(rng, hidden=H, dense=D, window=T)
        m = m.with_vector(m.to_vector() + rng.normal(0, 0.3, m.to_vector().size))
        Z = rng.normal(size=(B, T))
        yz = rng.normal(size=B)
        res = lstm_mod.forward_normalized(m, Z)[0] - yz
        if np.min(np.abs(res)) >= 1e-4:
            return m, Z, yz


@pytest.mark.parametrize("seed", range(6))
def test_gradient_matches_finite_differences_both_paths(seed):
    m, Z, yz = _grad_case(seed)
    fd = _fd_grad(m, Z, yz)
    l_np, g_np = lstm_mod._loss_and_grad_numpy(m, Z, yz)
    l_disp, g_disp = loss_and_grad(m, Z, yz)
    for g in (g_np, g_disp):
        assert np.linalg.norm(g - fd) <= 1e-3 * np.linalg.norm(fd)
    assert l_np == pytest.approx(l_disp, abs=1e-14)
    assert np.allclose(g_np, g_disp, atol=1e-12)


# ------------------------------------------------------------- adam


def test_adam_zero_gradient_keeps_params_and_decays_moments():
    st = AdamState(np.full(3, 0.5), np.full(3, 0.25), 4)
    p = np.array([1.0, -2.0, 3.0])
    new, st2 = adam_step(p, np.zeros(3), AdamState.zeros(3))
    assert np.array_equal(new, p)
    new, st3 = adam_step(p, np.zeros(3), st)
    assert np.all(np.abs(st3.m) < np.abs(st.m)) and np.all(st3.v < st.v)
    assert st3.t == 5


def test_adam_first_step_is_lr_times_sign():
    g = np.array([3.0, -0.2, 1e3, -50.0])
    p = np.zeros(4)
    new, _ = adam_step(p, g, AdamState.zeros(4), lr=0.001)
    assert np.allclose(new, -0.001 * np.sign(g), rtol=0, atol=1e-6)


def test_adam_is_pure():
    g = np.array([0.1, 0.2])
    st = AdamState.zeros(2)
    a = adam_step(np.ones(2), g, st)
    b = adam_step(np.ones(2), g, st)
    assert np.array_equal(a[0], b[0]) and np.array_equal(a[1].v, b[1].v)
    assert np.all(st.m == 0)


# ------------------------------------------------------------- metrics


def test_metrics_examples():
    r = accuracy_metrics([2.0, 2.0], [1.0, 3.0])
    assert (r.rmse, r.rrmse, r.r2) == (1.0, 0.5, 0.0)
    obs = np.array([1.0, 4.0, 2.0, 8.0])
    r = accuracy_metrics(obs, obs)
    assert (r.rmse, r.rrmse, r.r2) == (0.0, 0.0, 1.0)
    assert accuracy_metrics(np.full(4, obs.mean()), obs).r2 == pytest.approx(0.0, abs=1e-15)


def test_metrics_errors():
    with pytest.raises(ValidationError):
        accuracy_metrics([1.0, -1.0], [1.0, -1.0])
    with pytest.raises(ValidationError):
        accuracy_metrics([1.0, 2.0], [3.0, 3.0])
    with pytest.raises(ValidationError):
        accuracy_metrics([1.0], [1.0])


# ------------------------------------------------------------- training


def test_train_config_validation():
    with pytest.raises(ValidationError):
        TrainConfig(learning_rate=0)
    with pytest.raises(ValidationError):
        TrainConfig(batch_size=0)


def test_zero_epochs_returns_initial_model():
    v = 5 + np.sin(np.arange(200) / 5)
    m = train(v, TrainConfig(epochs=0, rng_seed=4))
    fit = v[: len(v) - int(round(0.1 * (len(v) - 30)))]
    ref = init_model(np.random.default_rng(4), input_mean=fit.mean(), input_scale=fit.std())
    assert m.equals(ref)


def test_same_seed_same_parameters():
    v = 5 + np.sin(np.arange(150) / 5)
    cfg = TrainConfig(epochs=2, rng_seed=9)
    assert train(v, cfg).equals(train(v, cfg))
    assert not train(v, cfg).equals(train(v, TrainConfig(epochs=2, rng_seed=10)))


def test_series_too_short():
    with pytest.raises(ValidationError, match="too short"):
        train(np.ones(62), TrainConfig(epochs=1))


@pytest.mark.parametrize("seed", range(3))
def test_training_loss_monotone_on_linear_trend(seed):
    v = 5 + 0.02 * np.arange(300)
    cfg = TrainConfig(epochs=20, rng_seed=seed, batch_size=256, validation_fraction=0.0, patience=0)
    _, log = train_with_log(v, cfg)
    assert len(log.train_loss) == 20
    assert np.all(np.diff(log.train_loss) <= 0)


def test_trained_model_beats_persistence_on_sinusoid():
    t = np.arange(700)
    v = 10 + 5 * np.sin(2 * np.pi * t / 20)
    m = train(v[:560], TrainConfig(epochs=40, rng_seed=0, patience=0))
    pred, feats = predict_series(m, v[530:])
    obs = v[560:]
    persistence = v[559:-1]
    assert feats.shape == (len(obs), 20)
    assert np.sqrt(np.mean((pred - obs) ** 2)) < np.sqrt(np.mean((persistence - obs) ** 2))


def test_model_json_round_trip(tmp_path):
    m = init_model(np.random.default_rng(5), input_mean=3.0, input_scale=2.0)
    io.save_model(m, tmp_path / "a.json")
    m2 = io.load_model(tmp_path / "a.json")
    assert m2.equals(m)
    io.save_model(m2, tmp_path / "b.json")
    assert (tmp_path / "a.json").read_bytes() == (tmp_path / "b.json").read_bytes()
    (tmp_path / "bad.json").write_text("{not json")
    with pytest.raises(ValidationError):
        io.load_model(tmp_path / "bad.json")
    with pytest.raises(FileNotFoundError):
        io.load_model(tmp_path / "missing.json")


# ------------------------------------------------------------- cross-validation


def test_cv_folds_2009_to_2019():
    a, b = day_of(dt.date(2009, 1, 1)), day_of(dt.date(2019, 12, 31))
    folds = cv_folds(a, b - a + 1)
    assert len(folds) == 5
    for k, (f, l_) in enumerate(folds):
        assert (f, l_) == (day_of(dt.date(2015 + k, 7, 1)), day_of(dt.date(2015 + k, 12, 31)))
        assert l_ - f + 1 == 184


def test_cv_folds_skip_incomplete_last_year():
    a = day_of(dt.date(2009, 1, 1))
    b = day_of(dt.date(2019, 12, 30))
    assert cv_folds(a, b - a + 1)[-1][0] == day_of(dt.date(2018, 7, 1))


class _Oracle:
    """Knows the next value of every window in the series."""

    def __init__(self, values, window):
        self.next = {tuple(values[k : k + window]): values[k + window] for k in range(len(values) - window)}

    def predict_pairs(self, X):
        return np.array([self.next[tuple(row)] for row in X])


def test_cross_validate_with_perfect_oracle():
    rng = np.random.default_rng(0)
    start = day_of(dt.date(2009, 1, 1))
    n = day_of(dt.date(2019, 12, 31)) - start + 1
    values = 10 + 5 * np.sin(np.arange(n) * 2 * np.pi / 365) + rng.normal(0, 1, n)
    hist = DailyGduSeries(0, start, values)
    oracle = _Oracle(values, 30)
    rep = cross_validate(hist, TrainConfig(), fit=lambda v, c: oracle)
    assert len(rep.folds) == 5
    for f in rep.folds:
        assert f["rmse"] == 0 and f["r2"] == 1
        assert f["train_last_day"] < f["test_first_day"]
        assert f["n_test"] == 184
    assert rep.rmse == 0 and rep.r2 == 1
    assert rep.baseline["name"] == "persistence" and rep.baseline["rmse"] > 0


def test_cross_validate_never_trains_on_the_future():
    start = day_of(dt.date(2009, 1, 1))
    n = day_of(dt.date(2019, 12, 31)) - start + 1
    values = np.arange(n, dtype=float) + 1
    seen = []

    class _Last:
        def predict_pairs(self, X):
            return X[:, -1]

    def fit(v, cfg):
        seen.append(len(v))
        return _Last()

    rep = cross_validate(DailyGduSeries(0, start, values), TrainConfig(), fit=fit)
    for length, f in zip(seen, rep.folds):
        assert start + length - 1 == f["train_last_day"]


def test_cross_validate_insufficient_history():
    with pytest.raises(ValidationError, match="insufficient history"):
        cross_validate(np.ones(5 * 365), TrainConfig())
