"""Residual estimation with an I/O kernel, and Monte Carlo GDU scenarios.

A Gaussian process is fitted to the forecaster's one-step residuals
``E = y - yhat``. Its kernel adds an RBF over the forecaster's internal
features ``g(x)`` (final LSTM hidden state) and an RBF over its output::

    k(a, b) = s_in^2 exp(-|g_a - g_b|^2 / (2 l_in^2))
            + s_out^2 exp(-(yhat_a - yhat_b)^2 / (2 l_out^2))

Rollouts feed the forecaster its own sampled output one day at a time,
drawing each day from ``N(yhat + mean, var + noise^2)`` and clamping at 0.
"""
from __future__ import annotations

import csv
import json
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import linalg

from . import _accel
from .calendar import HORIZON_DAYS
from .errors import ShapeError, SingularKernelError, ValidationError
from .forecaster.lstm import ForecastModel, forward
from .forecaster.training import predict_series, supervised_pairs
from .ingest import DailyGduSeries

log = logging.getLogger(__name__)

MAX_TRAIN_POINTS = 1000
SEARCH_POINTS = 400
N_STARTS = 8


@dataclass(frozen=True)
class IoKernelHyper:
    sigma_in: float
    len_in: float
    sigma_out: float
    len_out: float
    noise_sd: float = 0.0

    def __post_init__(self):
        bad = [k for k in ("sigma_in", "len_in", "sigma_out", "len_out") if not getattr(self, k) > 0]
        if bad or not self.noise_sd >= 0:
            raise ValidationError(f"invalid kernel hyperparameters {bad or ['noise_sd']}: {self}")

    @property
    def prior_variance(self) -> float:
        return self.sigma_in**2 + self.sigma_out**2

    def to_dict(self):
        return {k: getattr(self, k) for k in ("sigma_in", "len_in", "sigma_out", "len_out", "noise_sd")}


def io_kernel(a, b, hyper: IoKernelHyper) -> float:
    """Kernel value for two points given as ``(g_vector, yhat)``."""
    ga, ya = np.asarray(a[0], dtype=np.float64), float(a[1])
    gb, yb = np.asarray(b[0], dtype=np.float64), float(b[1])
    if ga.shape != gb.shape:
        raise ShapeError(f"feature dimensions differ: {ga.shape} vs {gb.shape}")
    d2 = float(np.sum((ga - gb) ** 2))
    return hyper.sigma_in**2 * math.exp(-d2 / (2 * hyper.len_in**2)) + hyper.sigma_out**2 * math.exp(
        -((ya - yb) ** 2) / (2 * hyper.len_out**2)
    )


@_accel.njit
def _kernel_matrix_loop(G1, y1, G2, y2, s_in2, inv_in, s_out2, inv_out):
    n, m, d = G1.shape[0], G2.shape[0], G1.shape[1]
    K = np.empty((n, m))
    for i in range(n):
        for j in range(m):
            acc = 0.0
            for k in range(d):
                t = G1[i, k] - G2[j, k]
                acc += t * t
            dy = y1[i] - y2[j]
            K[i, j] = s_in2 * np.exp(-acc * inv_in) + s_out2 * np.exp(-dy * dy * inv_out)
    return K


def _kernel_matrix_numpy(G1, y1, G2, y2, s_in2, inv_in, s_out2, inv_out):
    d2 = ((G1[:, None, :] - G2[None, :, :]) ** 2).sum(axis=2)
    dy = y1[:, None] - y2[None, :]
    return s_in2 * np.exp(-d2 * inv_in) + s_out2 * np.exp(-dy * dy * inv_out)


def kernel_matrix(G1, y1, G2, y2, hyper: IoKernelHyper) -> np.ndarray:
    G1 = np.ascontiguousarray(np.atleast_2d(G1), dtype=np.float64)
    G2 = np.ascontiguousarray(np.atleast_2d(G2), dtype=np.float64)
    y1 = np.ascontiguousarray(np.atleast_1d(y1), dtype=np.float64)
    y2 = np.ascontiguousarray(np.atleast_1d(y2), dtype=np.float64)
    if G1.shape[1] != G2.shape[1] or len(y1) != len(G1) or len(y2) != len(G2):
        raise ShapeError(f"inconsistent kernel inputs {G1.shape}/{y1.shape} and {G2.shape}/{y2.shape}")
    args = (
        hyper.sigma_in**2,
        1.0 / (2 * hyper.len_in**2),
        hyper.sigma_out**2,
        1.0 / (2 * hyper.len_out**2),
    )
    if _accel.NUMBA_ENABLED:
        return _kernel_matrix_loop(G1, y1, G2, y2, *args)
    return _kernel_matrix_numpy(G1, y1, G2, y2, *args)


@dataclass(frozen=True, eq=False)
class GpResidualModel:
    hyper: IoKernelHyper
    features: np.ndarray  # (n, H) g(x) of the training points
    predictions: np.ndarray  # (n,) forecaster outputs
    residuals: np.ndarray  # (n,)
    cholesky: np.ndarray  # lower factor of K + jitter * I
    alpha: np.ndarray  # (K + jitter I)^-1 E
    jitter: float  # diagonal term actually used (a variance)
    log_marginal_likelihood: float = float("nan")

    @property
    def n(self) -> int:
        return len(self.residuals)

    @property
    def noise_sd(self) -> float:
        return math.sqrt(self.jitter)


def _chol(K, jitter, var_ref):
    """Cholesky of K + jitter I, treating a vanishing pivot as failure."""
    A = K + jitter * np.eye(len(K))
    L = linalg.cholesky(A, lower=True, check_finite=False)
    if np.min(np.diag(L)) ** 2 <= 1e-14 * max(float(np.max(np.diag(A))), var_ref):
        raise linalg.LinAlgError("numerically singular")
    return L


def _jitter_ladder(noise_var, var_ref):
    top = 1e-1 * var_ref
    steps = [noise_var]
    j = noise_var if noise_var > 0 else 1e-10 * var_ref
    if noise_var == 0:
        steps.append(j)
    while j * 10 <= top * (1 + 1e-12):
        j *= 10
        steps.append(j)
    return steps


def _factor(K, noise_var, var_ref):
    for jitter in _jitter_ladder(noise_var, var_ref):
        try:
            return _chol(K, jitter, var_ref), jitter
        except linalg.LinAlgError:
            continue
    raise SingularKernelError(
        f"kernel matrix not positive definite even with diagonal {1e-1 * var_ref:.3g} added"
    )


def log_marginal_likelihood(G, yhat, E, hyper: IoKernelHyper, var_ref=None) -> float:
    var_ref = _var_ref(E) if var_ref is None else var_ref
    K = kernel_matrix(G, yhat, G, yhat, hyper)
    L, _ = _factor(K, hyper.noise_sd**2, var_ref)
    alpha = linalg.cho_solve((L, True), E, check_finite=False)
    return float(-0.5 * E @ alpha - np.log(np.diag(L)).sum() - 0.5 * len(E) * math.log(2 * math.pi))


def _var_ref(E):
    v = float(np.var(E))
    return v if v > 0 else 1.0


def _stride(n, m):
    if n <= m:
        return np.arange(n)
    return np.unique(np.floor(np.arange(m) * (n / m)).astype(np.int64))


def _median_distance(X):
    X = np.atleast_2d(X)
    if len(X) < 2:
        return 1.0
    idx = _stride(len(X), 200)
    X = X[idx]
    d = np.sqrt(((X[:, None, :] - X[None, :, :]) ** 2).sum(-1))
    d = d[np.triu_indices(len(X), 1)]
    d = d[d > 0]
    return float(np.median(d)) if d.size else 1.0


def _coordinate_search(objective, theta0, lo, hi, step=1.0, min_step=1e-2, max_evals=150):
    """Maximise ``objective`` over a box by compass moves on each coordinate."""
    theta = np.clip(np.array(theta0, dtype=np.float64), lo, hi)
    best = objective(theta)
    evals = 1
    while step >= min_step and evals < max_evals:
        improved = False
        for k in range(len(theta)):
            for sgn in (1.0, -1.0):
                cand = theta.copy()
                cand[k] = np.clip(cand[k] + sgn * step, lo[k], hi[k])
                if cand[k] == theta[k]:
                    continue
                val = objective(cand)
                evals += 1
                if val > best:
                    theta, best, improved = cand, val, True
                    break
        if not improved:
            step /= 2
    return theta, best


def fit_gp(
    features,
    predictions,
    residuals,
    noise_sd=None,
    hyper: IoKernelHyper | None = None,
    n_starts: int = N_STARTS,
    max_points: int = MAX_TRAIN_POINTS,
    search_points: int = SEARCH_POINTS,
    seed: int = 0,
) -> GpResidualModel:
    """Fit the residual GP.

    Hyperparameters maximise the log marginal likelihood unless ``hyper`` is
    given. ``noise_sd=None`` uses a diagonal of ``1e-4 * var(E)``; ``0``
    starts noise-free. Either way the diagonal is raised tenfold on Cholesky
    failure up to ``1e-1 * var(E)``.
    """
    G = np.atleast_2d(np.asarray(features, dtype=np.float64))
    yhat = np.asarray(predictions, dtype=np.float64).ravel()
    E = np.asarray(residuals, dtype=np.float64).ravel()
    if len(G) != len(E) or len(yhat) != len(E):
        raise ShapeError(f"features {G.shape}, predictions {yhat.shape}, residuals {E.shape} disagree")
    if len(E) < 2:
        raise ValidationError("need at least two training points")
    if not (np.all(np.isfinite(G)) and np.all(np.isfinite(yhat)) and np.all(np.isfinite(E))):
        raise ValidationError("training data must be finite")
    keep = _stride(len(E), max_points)
    G, yhat, E = G[keep], yhat[keep], E[keep]
    var_ref = _var_ref(E)
    if hyper is not None:
        noise_var = hyper.noise_sd**2
    else:
        noise_var = 1e-4 * var_ref if noise_sd is None else float(noise_sd) ** 2

    if hyper is None:
        sub = _stride(len(E), search_points)
        Gs, ys, Es = G[sub], yhat[sub], E[sub]
        sd = math.sqrt(var_ref)
        l_in0 = _median_distance(Gs)
        l_out0 = _median_distance(ys[:, None])
        noise = math.sqrt(noise_var)

        def lml(theta):
            h = IoKernelHyper(*np.exp(theta), noise_sd=noise)
            try:
                return log_marginal_likelihood(Gs, ys, Es, h, var_ref)
            except SingularKernelError:
                return -np.inf

        base = np.log([sd, l_in0, sd, l_out0])
        lo, hi = base - 7.0, base + 7.0
        rng = np.random.default_rng(seed)
        starts = [base] + [base + rng.uniform(-2.0, 2.0, 4) for _ in range(max(n_starts, 1) - 1)]
        best_theta, best_val = base, -np.inf
        for s in starts:
            theta, val = _coordinate_search(lml, s, lo, hi)
            if val > best_val:
                best_theta, best_val = theta, val
        hyper = IoKernelHyper(*(float(v) for v in np.exp(best_theta)), noise_sd=noise)
        log.debug("gp hyper %s lml %.4f", hyper, best_val)

    K = kernel_matrix(G, yhat, G, yhat, hyper)
    L, jitter = _factor(K, noise_var, var_ref)
    alpha = linalg.cho_solve((L, True), E, check_finite=False)
    lml_val = float(-0.5 * E @ alpha - np.log(np.diag(L)).sum() - 0.5 * len(E) * math.log(2 * math.pi))
    if jitter != noise_var:
        log.info("kernel diagonal raised to %.3g for a stable factorisation", jitter)
    return GpResidualModel(
        hyper=IoKernelHyper(hyper.sigma_in, hyper.len_in, hyper.sigma_out, hyper.len_out, math.sqrt(jitter)),
        features=G,
        predictions=yhat,
        residuals=E,
        cholesky=L,
        alpha=alpha,
        jitter=jitter,
        log_marginal_likelihood=lml_val,
    )


def gp_posterior_batch(model: GpResidualModel, G, yhat):
    """Posterior mean and (latent) variance at many query points."""
    G = np.atleast_2d(np.asarray(G, dtype=np.float64))
    yhat = np.atleast_1d(np.asarray(yhat, dtype=np.float64))
    if G.shape[1] != model.features.shape[1]:
        raise ShapeError(f"query features have {G.shape[1]} dims, model has {model.features.shape[1]}")
    Ks = kernel_matrix(model.features, model.predictions, G, yhat, model.hyper)  # (n, q)
    mean = Ks.T @ model.alpha
    v = linalg.solve_triangular(model.cholesky, Ks, lower=True, check_finite=False)
    var = model.hyper.prior_variance - np.einsum("ij,ij->j", v, v)
    return mean, np.maximum(var, 0.0)


def gp_posterior(model: GpResidualModel, query):
    """``(mean, variance)`` of the residual at ``query = (g_vector, yhat)``."""
    g, y = query
    m, v = gp_posterior_batch(model, np.asarray(g, dtype=np.float64)[None, :], [float(y)])
    return float(m[0]), float(v[0])


def residual_training_set(model: ForecastModel, history):
    """Features, predictions and residuals of one-step forecasts over ``history``."""
    values = np.asarray(getattr(history, "values", history), dtype=np.float64)
    pred, feats = predict_series(model, values)
    _, y = supervised_pairs(values, model.window)
    return feats, pred, y - pred


def fit_residual_model(model: ForecastModel, history, **kwargs) -> GpResidualModel:
    return fit_gp(*residual_training_set(model, history), **kwargs)


def rollout(model: ForecastModel, gp: GpResidualModel, seed_window, horizon=HORIZON_DAYS, rng=None, start_day=0, site=0):
    """One sampled trajectory of ``horizon`` days following ``seed_window``."""
    if rng is None:
        rng = np.random.default_rng()
    window = np.array(seed_window, dtype=np.float64)
    if window.shape != (model.window,):
        raise ShapeError(f"seed window must hold {model.window} values, got {window.shape}")
    out = np.empty(horizon)
    noise_var = gp.jitter
    for t in range(horizon):
        yhat, g = forward(model, window)
        mean, var = gp_posterior(gp, (g, yhat))
        sd = math.sqrt(var + noise_var)
        y = yhat + mean + sd * rng.standard_normal()
        y = max(y, 0.0)
        out[t] = y
        window[:-1] = window[1:]
        window[-1] = y
    return DailyGduSeries(site, start_day, out)


@dataclass(frozen=True, eq=False)
class ScenarioSet:
    scenarios: list
    probabilities: np.ndarray
    rng_seed: int = 0
    horizon_days: int = HORIZON_DAYS
    seeds: list = field(default_factory=list)

    def __post_init__(self):
        p = np.asarray(self.probabilities, dtype=np.float64)
        if len(p) != len(self.scenarios) or len(p) == 0:
            raise ValidationError("one probability per scenario is required")
        if abs(p.sum() - 1.0) > 1e-12 or np.any(p < 0):
            raise ValidationError(f"scenario probabilities must be >= 0 and sum to 1 (sum {p.sum()!r})")
        for k, sc in enumerate(self.scenarios):
            if len(sc) != self.horizon_days:
                raise ValidationError(f"scenario {k} has {len(sc)} days, expected {self.horizon_days}")
        object.__setattr__(self, "probabilities", p)

    def __len__(self):
        return len(self.scenarios)

    @property
    def start_day(self) -> int:
        return self.scenarios[0].start_day

    def matrix(self) -> np.ndarray:
        return np.vstack([sc.values for sc in self.scenarios])

    def write(self, directory) -> None:
        d = Path(directory)
        d.mkdir(parents=True, exist_ok=True)
        with open(d / "scenarios.csv", "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["scenario", "day", "gdu"])
            for k, sc in enumerate(self.scenarios):
                for i, v in enumerate(sc.values):
                    w.writerow([k, sc.start_day + i, repr(float(v))])
        meta = {
            "count": len(self),
            "horizon_days": self.horizon_days,
            "probabilities": [float(p) for p in self.probabilities],
            "rng_seed": self.rng_seed,
            "seeds": [list(s) for s in self.seeds],
            "site": self.scenarios[0].site,
            "start_day": self.start_day,
        }
        (d / "scenarios.json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n", encoding="utf-8")

    @classmethod
    def read(cls, directory) -> "ScenarioSet":
        d = Path(directory)
        csv_path, meta_path = d / "scenarios.csv", d / "scenarios.json"
        for p in (csv_path, meta_path):
            if not p.exists():
                raise FileNotFoundError(f"scenario file not found: {p}")
        meta = json.loads(meta_path.read_text(encoding="utf-8"))
        rows: dict[int, list] = {}
        with open(csv_path, newline="", encoding="utf-8") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header != ["scenario", "day", "gdu"]:
                raise ValidationError(f"{csv_path}: expected header scenario,day,gdu, got {header}")
            for lineno, row in enumerate(reader, start=2):
                try:
                    rows.setdefault(int(row[0]), []).append((int(row[1]), float(row[2])))
                except (ValueError, IndexError):
                    raise ValidationError(f"{csv_path} line {lineno}: unparseable row {row}") from None
        series = []
        for k in range(meta["count"]):
            if k not in rows:
                raise ValidationError(f"{csv_path}: scenario {k} missing")
            r = sorted(rows[k])
            days = np.array([a for a, _ in r])
            if np.any(np.diff(days) != 1):
                raise ValidationError(f"{csv_path}: scenario {k} days are not consecutive")
            series.append(DailyGduSeries(meta.get("site", 0), int(days[0]), np.array([b for _, b in r])))
        return cls(
            series,
            np.array(meta["probabilities"]),
            meta.get("rng_seed", 0),
            meta.get("horizon_days", len(series[0])),
            [tuple(s) for s in meta.get("seeds", [])],
        )


def generate_scenarios(
    model: ForecastModel,
    gp: GpResidualModel,
    history: DailyGduSeries,
    count: int = 25,
    rng_seed: int = 0,
    horizon: int = HORIZON_DAYS,
    threads: int = 1,
) -> ScenarioSet:
    """``count`` independent rollouts from the last ``model.window`` history days.

    Scenario ``s`` draws from ``default_rng([rng_seed, s])`` so results do not
    depend on ``threads``. Trajectories start the day after the history ends.
    """
    if count < 1:
        raise ValidationError("count must be >= 1")
    if len(history) < model.window:
        raise ValidationError(f"history shorter than the {model.window}-day window")
    seed_window = np.asarray(history.values[-model.window :])
    start = history.end_day + 1
    seeds = [(int(rng_seed), s) for s in range(count)]

    def one(s):
        return rollout(model, gp, seed_window, horizon, np.random.default_rng(list(seeds[s])), start, history.site)

    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            series = list(pool.map(one, range(count)))
    else:
        series = [one(s) for s in range(count)]
    return ScenarioSet(series, np.full(count, 1.0 / count), int(rng_seed), horizon, seeds)
