"""Single-layer LSTM with a ReLU dense head, forward and backward passes.

Gate weights act on the concatenation ``[h_{t-1}, x_t]``:

    f = sigmoid(W_f z + b_f)      i = sigmoid(W_i z + b_i)
    g = tanh(W_c z + b_c)         o = sigmoid(W_o z + b_o)
    c_t = f * c_{t-1} + i * g     h_t = o * tanh(c_t)

The head maps the final hidden state through ``relu(W1 h + b1)`` to a
scalar ``w2 . r + b2``. Everything runs on batches of windows.
"""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .. import _accel
from ..errors import ShapeError

WINDOW = 30
HIDDEN = 20
DENSE = 20
GATES = ("f", "i", "c", "o")


def sigmoid(x):
    return 0.5 * (1.0 + np.tanh(0.5 * x))


@dataclass(frozen=True, eq=False)
class LstmParams:
    """Stacked gate weights ``W[g]`` of shape (hidden, hidden + input) in f, i, c, o order."""

    W: np.ndarray  # (4, H, H + I)
    b: np.ndarray  # (4, H)

    def __post_init__(self):
        if self.W.ndim != 3 or self.W.shape[0] != 4 or self.b.shape != self.W.shape[:2]:
            raise ShapeError(f"inconsistent LSTM shapes W{self.W.shape} b{self.b.shape}")
        if self.W.shape[2] <= self.W.shape[1]:
            raise ShapeError("gate weights must cover [h, x] with input size >= 1")

    @property
    def hidden_size(self) -> int:
        return self.W.shape[1]

    @property
    def input_size(self) -> int:
        return self.W.shape[2] - self.W.shape[1]

    W_f = property(lambda self: self.W[0])
    W_i = property(lambda self: self.W[1])
    W_c = property(lambda self: self.W[2])
    W_o = property(lambda self: self.W[3])
    b_f = property(lambda self: self.b[0])
    b_i = property(lambda self: self.b[1])
    b_c = property(lambda self: self.b[2])
    b_o = property(lambda self: self.b[3])

    @classmethod
    def from_gates(cls, W_f, W_i, W_c, W_o, b_f, b_i, b_c, b_o):
        return cls(np.stack([W_f, W_i, W_c, W_o]).astype(float), np.stack([b_f, b_i, b_c, b_o]).astype(float))


@dataclass(frozen=True, eq=False)
class ForecastModel:
    lstm: LstmParams
    dense_W: np.ndarray  # (D, H)
    dense_b: np.ndarray  # (D,)
    out_w: np.ndarray  # (D,)
    out_b: float
    input_mean: float = 0.0
    input_scale: float = 1.0
    window: int = WINDOW

    def normalize(self, v):
        return (np.asarray(v, dtype=np.float64) - self.input_mean) / self.input_scale

    def denormalize(self, z):
        return np.asarray(z, dtype=np.float64) * self.input_scale + self.input_mean

    # flat parameter vector: W, b, dense_W, dense_b, out_w, out_b
    def to_vector(self) -> np.ndarray:
        return np.concatenate(
            [self.lstm.W.ravel(), self.lstm.b.ravel(), self.dense_W.ravel(), self.dense_b, self.out_w, [self.out_b]]
        )

    def with_vector(self, vec) -> "ForecastModel":
        vec = np.asarray(vec, dtype=np.float64)
        shapes = [self.lstm.W.shape, self.lstm.b.shape, self.dense_W.shape, self.dense_b.shape, self.out_w.shape]
        parts, k = [], 0
        for shp in shapes:
            size = int(np.prod(shp))
            parts.append(vec[k : k + size].reshape(shp).copy())
            k += size
        if k + 1 != vec.size:
            raise ShapeError(f"parameter vector has {vec.size} entries, expected {k + 1}")
        return replace(
            self,
            lstm=LstmParams(parts[0], parts[1]),
            dense_W=parts[2],
            dense_b=parts[3],
            out_w=parts[4],
            out_b=float(vec[k]),
        )

    def equals(self, other) -> bool:
        return (
            self.window == other.window
            and self.input_mean == other.input_mean
            and self.input_scale == other.input_scale
            and np.array_equal(self.to_vector(), other.to_vector())
        )


def init_model(rng, hidden=HIDDEN, dense=DENSE, input_size=1, window=WINDOW, input_mean=0.0, input_scale=1.0):
    """Uniform(+-1/sqrt(fan_in)) weights; forget-gate bias 1, other biases 0."""
    fan = hidden + input_size
    a = 1.0 / np.sqrt(fan)
    W = rng.uniform(-a, a, size=(4, hidden, fan))
    b = np.zeros((4, hidden))
    b[0] = 1.0
    a1 = 1.0 / np.sqrt(hidden)
    dW = rng.uniform(-a1, a1, size=(dense, hidden))
    db = np.zeros(dense)
    a2 = 1.0 / np.sqrt(dense)
    ow = rng.uniform(-a2, a2, size=dense)
    return ForecastModel(LstmParams(W, b), dW, db, ow, 0.0, float(input_mean), float(input_scale), int(window))


def zero_model(hidden=HIDDEN, dense=DENSE, input_size=1, window=WINDOW, out_b=0.0, input_mean=0.0, input_scale=1.0):
    return ForecastModel(
        LstmParams(np.zeros((4, hidden, hidden + input_size)), np.zeros((4, hidden))),
        np.zeros((dense, hidden)),
        np.zeros(dense),
        np.zeros(dense),
        float(out_b),
        float(input_mean),
        float(input_scale),
        int(window),
    )


def _gates(params: LstmParams, x, h):
    z = np.concatenate([h, x], axis=-1)
    H = params.hidden_size
    a = z @ params.W.reshape(4 * H, -1).T + params.b.reshape(-1)
    f = sigmoid(a[..., :H])
    i = sigmoid(a[..., H : 2 * H])
    g = np.tanh(a[..., 2 * H : 3 * H])
    o = sigmoid(a[..., 3 * H :])
    return z, f, i, g, o


def lstm_cell_step(params: LstmParams, x_t, h_prev, c_prev):
    """One cell update; accepts single vectors or batches (leading axis)."""
    x_t = np.atleast_1d(np.asarray(x_t, dtype=np.float64))
    h_prev = np.asarray(h_prev, dtype=np.float64)
    c_prev = np.asarray(c_prev, dtype=np.float64)
    H, I = params.hidden_size, params.input_size
    if x_t.shape[-1] != I or h_prev.shape[-1] != H or c_prev.shape != h_prev.shape:
        raise ShapeError(
            f"cell step expects x[..., {I}], h/c[..., {H}]; got {x_t.shape}, {h_prev.shape}, {c_prev.shape}"
        )
    _, f, i, g, o = _gates(params, x_t, h_prev)
    c = f * c_prev + i * g
    h = o * np.tanh(c)
    return h, c


def cell_step_backward(params: LstmParams, x_t, h_prev, c_prev, dh, dc):
    """Gradients of ``<dh, h_t> + <dc, c_t>`` w.r.t. inputs, state and gate weights.

    Returns ``(dx, dh_prev, dc_prev, dW, db)``.
    """
    x_t = np.atleast_1d(np.asarray(x_t, dtype=np.float64))
    z, f, i, g, o = _gates(params, x_t, h_prev)
    c = f * c_prev + i * g
    tc = np.tanh(c)
    dc_tot = dc + dh * o * (1.0 - tc * tc)
    da = np.concatenate(
        [
            dc_tot * c_prev * f * (1.0 - f),
            dc_tot * g * i * (1.0 - i),
            dc_tot * i * (1.0 - g * g),
            dh * tc * o * (1.0 - o),
        ],
        axis=-1,
    )
    H = params.hidden_size
    Wf = params.W.reshape(4 * H, -1)
    dz = da @ Wf
    dW = np.einsum("...a,...b->ab", da, z).reshape(params.W.shape)
    db = da.reshape(-1, 4 * H).sum(axis=0).reshape(params.b.shape)
    return dz[..., H:], dz[..., :H], dc_tot * f, dW, db


def _check_windows(model, windows):
    X = np.asarray(windows, dtype=np.float64)
    if X.ndim == 1:
        X = X[None, :]
    if X.shape[-1] != model.window:
        raise ShapeError(f"window length must be {model.window}, got {X.shape[-1]}")
    return X


def _unroll(model: ForecastModel, Z):
    """Run the LSTM over normalised windows Z (B, T); keep per-step caches."""
    p = model.lstm
    B, T = Z.shape
    H = p.hidden_size
    Wf = p.W.reshape(4 * H, -1)
    Wh, Wx = Wf[:, :H], Wf[:, H:]
    bf = p.b.reshape(-1)
    h = np.zeros((B, H))
    c = np.zeros((B, H))
    cache = []
    xa = Z[:, :, None] * Wx[:, 0][None, None, :] + bf  # (B, T, 4H) input contributions
    for t in range(T):
        a = h @ Wh.T + xa[:, t]
        f = sigmoid(a[:, :H])
        i = sigmoid(a[:, H : 2 * H])
        g = np.tanh(a[:, 2 * H : 3 * H])
        o = sigmoid(a[:, 3 * H :])
        c_new = f * c + i * g
        tc = np.tanh(c_new)
        cache.append((h, c, f, i, g, o, tc))
        h = o * tc
        c = c_new
    return h, cache


def _head(model, h):
    u = h @ model.dense_W.T + model.dense_b
    r = np.maximum(u, 0.0)
    return u, r, r @ model.out_w + model.out_b


def forward_normalized(model: ForecastModel, Z):
    """Normalised prediction and final hidden state for windows already normalised."""
    h, _ = _unroll(model, Z)
    return _head(model, h)[2], h


def forward(model: ForecastModel, window):
    """Predict the next-day GDU from the previous ``model.window`` days.

    Returns ``(prediction, features)`` where ``features`` is the final hidden
    state. A 2-D input is treated as a batch of windows.
    """
    X = _check_windows(model, window)
    yz, h = forward_normalized(model, model.normalize(X))
    pred = model.denormalize(yz)
    if np.ndim(window) == 1:
        return float(pred[0]), h[0]
    return pred, h


def _loss_and_grad_numpy(model: ForecastModel, Z, yz):
    B, T = Z.shape
    p = model.lstm
    H = p.hidden_size
    h, cache = _unroll(model, Z)
    u, r, yhat = _head(model, h)
    res = yhat - yz
    loss = float(np.mean(np.abs(res)))
    dy = np.sign(res) / B
    d_out_w = r.T @ dy
    d_out_b = dy.sum()
    du = (dy[:, None] * model.out_w[None, :]) * (u > 0)
    d_dense_W = du.T @ h
    d_dense_b = du.sum(axis=0)
    dh = du @ model.dense_W

    Wf = p.W.reshape(4 * H, -1)
    Wh = Wf[:, :H]
    dWf = np.zeros_like(Wf)
    dbf = np.zeros(4 * H)
    dc = np.zeros((B, H))
    for t in range(T - 1, -1, -1):
        h_prev, c_prev, f, i, g, o, tc = cache[t]
        dc = dc + dh * o * (1.0 - tc * tc)
        da = np.concatenate(
            [dc * c_prev * f * (1.0 - f), dc * g * i * (1.0 - i), dc * i * (1.0 - g * g), dh * tc * o * (1.0 - o)],
            axis=1,
        )
        dWf[:, :H] += da.T @ h_prev
        dWf[:, H] += da.T @ Z[:, t]
        dbf += da.sum(axis=0)
        dh = da @ Wh
        dc = dc * f
    grad = np.concatenate(
        [dWf.ravel(), dbf, d_dense_W.ravel(), d_dense_b, d_out_w, [d_out_b]]
    )
    return loss, grad


@_accel.njit(fastmath=True)
def _loss_and_grad_loop(Wf, bf, dense_W, dense_b, out_w, out_b, Z, yz):
    """Fused forward + BPTT for a scalar-input LSTM; returns (loss, flat gradient)."""
    B, T = Z.shape
    H4, F = Wf.shape
    H = H4 // 4
    D = dense_W.shape[0]
    n_par = H4 * F + H4 + D * H + D + D + 1
    grad = np.zeros(n_par)
    gW = grad[: H4 * F].reshape((H4, F))
    gb = grad[H4 * F : H4 * F + H4]
    o1 = H4 * F + H4
    gDW = grad[o1 : o1 + D * H].reshape((D, H))
    gDb = grad[o1 + D * H : o1 + D * H + D]
    gOw = grad[o1 + D * H + D : o1 + D * H + 2 * D]
    hs = np.zeros((T + 1, H))
    cs = np.zeros((T + 1, H))
    acts = np.zeros((T, H4))  # post-nonlinearity gate values
    tcs = np.zeros((T, H))
    u = np.zeros(D)
    da = np.zeros(H4)
    dh = np.zeros(H)
    dc = np.zeros(H)
    loss = 0.0
    for bi in range(B):
        for t in range(T):
            x = Z[bi, t]
            for k in range(H4):
                a = bf[k] + Wf[k, H] * x
                for j in range(H):
                    a += Wf[k, j] * hs[t, j]
                if k >= 2 * H and k < 3 * H:
                    acts[t, k] = np.tanh(a)
                else:
                    acts[t, k] = 0.5 * (1.0 + np.tanh(0.5 * a))
            for j in range(H):
                c = acts[t, j] * cs[t, j] + acts[t, H + j] * acts[t, 2 * H + j]
                cs[t + 1, j] = c
                tc = np.tanh(c)
                tcs[t, j] = tc
                hs[t + 1, j] = acts[t, 3 * H + j] * tc
        yhat = out_b
        for d in range(D):
            v = dense_b[d]
            for j in range(H):
                v += dense_W[d, j] * hs[T, j]
            u[d] = v
            if v > 0.0:
                yhat += out_w[d] * v
        r = yhat - yz[bi]
        loss += abs(r)
        dy = (1.0 if r > 0.0 else (-1.0 if r < 0.0 else 0.0)) / B
        grad[n_par - 1] += dy
        for j in range(H):
            dh[j] = 0.0
            dc[j] = 0.0
        for d in range(D):
            if u[d] > 0.0:
                gOw[d] += u[d] * dy
                du = dy * out_w[d]
                gDb[d] += du
                for j in range(H):
                    gDW[d, j] += du * hs[T, j]
                    dh[j] += du * dense_W[d, j]
        for t in range(T - 1, -1, -1):
            for j in range(H):
                f = acts[t, j]
                i = acts[t, H + j]
                g = acts[t, 2 * H + j]
                o = acts[t, 3 * H + j]
                tc = tcs[t, j]
                dcj = dc[j] + dh[j] * o * (1.0 - tc * tc)
                da[j] = dcj * cs[t, j] * f * (1.0 - f)
                da[H + j] = dcj * g * i * (1.0 - i)
                da[2 * H + j] = dcj * i * (1.0 - g * g)
                da[3 * H + j] = dh[j] * tc * o * (1.0 - o)
                dc[j] = dcj * f
            x = Z[bi, t]
            for j in range(H):
                dh[j] = 0.0
            for k in range(H4):
                dak = da[k]
                gb[k] += dak
                gW[k, H] += dak * x
                for j in range(H):
                    gW[k, j] += dak * hs[t, j]
                    dh[j] += dak * Wf[k, j]
    return loss / B, grad


def loss_and_grad(model: ForecastModel, Z, yz):
    """Mean absolute error on normalised targets and its gradient (flat vector)."""
    Z = np.ascontiguousarray(Z, dtype=np.float64)
    yz = np.ascontiguousarray(yz, dtype=np.float64)
    if _accel.NUMBA_ENABLED and model.lstm.input_size == 1:
        H = model.lstm.hidden_size
        loss, grad = _loss_and_grad_loop(
            np.ascontiguousarray(model.lstm.W.reshape(4 * H, -1)),
            np.ascontiguousarray(model.lstm.b.reshape(-1)),
            np.ascontiguousarray(model.dense_W),
            np.ascontiguousarray(model.dense_b),
            np.ascontiguousarray(model.out_w),
            float(model.out_b),
            Z,
            yz,
        )
        return float(loss), grad
    return _loss_and_grad_numpy(model, Z, yz)


def mae_normalized(model: ForecastModel, Z, yz, batch=4096) -> float:
    tot = 0.0
    for k in range(0, len(Z), batch):
        yhat, _ = forward_normalized(model, Z[k : k + batch])
        tot += float(np.abs(yhat - yz[k : k + batch]).sum())
    return tot / max(len(Z), 1)
