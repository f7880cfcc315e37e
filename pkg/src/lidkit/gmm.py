"""Diagonal-covariance Gaussian mixture language models trained by EM."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateComponent, InsufficientData, ShapeMismatch
from .vq_dtw import _nearest, lbg_train

VAR_FLOOR = 1e-4
MIN_WEIGHT = 1e-8
_LOG_2PI = np.log(2.0 * np.pi)


@dataclass(frozen=True)
class EMOptions:
    max_iters: int = 100
    tol: float = 1e-5
    seed: int = 0
    var_floor: float = VAR_FLOOR


@dataclass(frozen=True)
class GmmModel:
    weights: np.ndarray  # (M,)
    means: np.ndarray  # (M, dim)
    variances: np.ndarray  # (M, dim)
    language: str = ""
    history: tuple = field(default=(), repr=False)

    @property
    def n_components(self) -> int:
        return len(self.weights)

    @property
    def dim(self) -> int:
        return self.means.shape[1]


def _as_rows(features) -> np.ndarray:
    x = np.asarray(getattr(features, "vectors", features), dtype=np.float64)
    if x.ndim == 1:
        x = x[:, None]
    return x


def component_log_densities(model: GmmModel, x: np.ndarray) -> np.ndarray:
    """log(w_m) + log N(x_t; mu_m, diag var_m), shape (T, M)."""
    if x.shape[1] != model.dim:
        raise ShapeMismatch(f"features have dim {x.shape[1]}, model expects {model.dim}")
    prec = 1.0 / model.variances
    const = np.log(model.weights) - 0.5 * (model.dim * _LOG_2PI + np.log(model.variances).sum(1))
    quad = (x * x) @ prec.T - 2.0 * x @ (model.means * prec).T + (model.means**2 * prec).sum(1)[None, :]
    return const[None, :] - 0.5 * quad


def _logsumexp_rows(a: np.ndarray) -> np.ndarray:
    peak = a.max(1)
    return peak + np.log(np.exp(a - peak[:, None]).sum(1))


def responsibilities(model: GmmModel, features):
    """Posterior component probabilities (T, M) and per-frame log-likelihoods (T,)."""
    x = _as_rows(features)
    lp = component_log_densities(model, x)
    ll = _logsumexp_rows(lp)
    return np.exp(lp - ll[:, None]), ll


def avg_log_likelihood(model: GmmModel, features) -> float:
    """Mean per-frame log-likelihood in nats."""
    x = _as_rows(features)
    return float(_logsumexp_rows(component_log_densities(model, x)).mean())


def _m_step(x, resp, var_floor):
    nk = resp.sum(0)
    weights = nk / nk.sum()
    means = (resp.T @ x) / nk[:, None]
    var = (resp.T @ (x * x)) / nk[:, None] - means**2
    return weights, means, np.maximum(var, var_floor)


def _init_from_lbg(x, M, var_floor):
    K = 1 << max(0, (M - 1).bit_length())
    cb = lbg_train(x, K)
    cent = cb.centroids
    if K > M:
        # keep the M most populated cells
        idx, _ = _nearest(x, cent)
        counts = np.bincount(idx, minlength=K)
        keep = np.sort(np.argsort(-counts, kind="stable")[:M])
        cent = cent[keep]
    idx, _ = _nearest(x, cent)
    counts = np.bincount(idx, minlength=M).astype(np.float64)
    weights = np.maximum(counts, 1.0)
    weights /= weights.sum()
    var = np.empty_like(cent)
    global_var = x.var(0)
    for m in range(M):
        members = x[idx == m]
        var[m] = members.var(0) if len(members) > 1 else global_var
    means = cent.copy()
    for m in range(M):
        members = x[idx == m]
        if len(members):
            means[m] = members.mean(0)
    return weights, means, np.maximum(var, var_floor)


def em_fit(features, M: int, opts: EMOptions = EMOptions(), language: str = "") -> GmmModel:
    """Fit an M-component diagonal GMM by EM, initialised from an LBG codebook.

    Stops when the per-frame log-likelihood gain drops below ``opts.tol`` or
    after ``opts.max_iters`` iterations. ``history`` holds the per-frame
    log-likelihood of every parameter set visited.
    """
    x = _as_rows(features)
    if M < 1:
        raise ValueError("M must be >= 1")
    if len(x) < 10 * M:
        raise InsufficientData(f"{len(x)} frames is fewer than 10*M = {10 * M}")
    rng = np.random.default_rng(opts.seed)

    weights, means, var = _init_from_lbg(x, M, opts.var_floor)
    model = GmmModel(weights, means, var, language)
    resp, ll = responsibilities(model, x)
    history = [float(ll.mean())]
    reseeded = False
    for _ in range(opts.max_iters):
        weights, means, var = _m_step(x, resp, opts.var_floor)
        bad = np.flatnonzero(weights < MIN_WEIGHT)
        if bad.size:
            if reseeded:
                raise DegenerateComponent(f"components {bad.tolist()} collapsed again after re-seeding")
            reseeded = True
            # move collapsed components onto poorly explained frames
            worst = np.argsort(ll, kind="stable")[: max(10, len(x) // 100)]
            picks = rng.choice(worst, size=bad.size, replace=False)
            means[bad] = x[picks]
            var[bad] = np.maximum(x.var(0), opts.var_floor)
            weights[bad] = 1.0 / len(x)
            weights /= weights.sum()
        model = GmmModel(weights, means, var, language)
        resp, ll = responsibilities(model, x)
        history.append(float(ll.mean()))
        if not bad.size and history[-1] - history[-2] < opts.tol:
            break
    return GmmModel(model.weights, model.means, model.variances, language, tuple(history))


def rank_by_score(scores: dict) -> list:
    """Languages descending by score, ties broken by name."""
    return sorted(scores, key=lambda lang: (-scores[lang], lang))


def classify_gmm(features, models: dict) -> list:
    """Equal-prior MAP decision: rank languages by average log-likelihood."""
    if not models:
        raise ValueError("no language models supplied")
    return rank_by_score({lang: avg_log_likelihood(m, features) for lang, m in models.items()})
