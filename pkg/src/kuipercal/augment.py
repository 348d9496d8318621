"""Multi-calibration by repeated refitting on score-augmented covariates.

A predictor is fitted on half the training rows using the covariates plus one
extra column holding the current scores; its predictions then become the
current scores, and the process repeats for a fixed number of rounds on the
same half. The score column is replaced each round, never accumulated.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Protocol, Sequence

import numpy as np

from .dataset import ValidationError


class PredictorContractError(RuntimeError):
    """A predictor returned probabilities that are non-finite or outside [0, 1]."""


class TrainablePredictor(Protocol):
    def fit(self, features: np.ndarray, responses: np.ndarray) -> Any: ...

    def predict_proba(self, state: Any, features: np.ndarray) -> np.ndarray: ...


@dataclass
class LogisticFitter:
    """Maximum-likelihood logistic regression by full-batch gradient descent.

    Features are standardized internally. The step size is fixed at
    ``4 / (d + 1)`` for ``d`` features, which is the inverse of an upper bound
    on the curvature of the mean log-loss in standardized coordinates.
    """

    max_iter: int = 10_000
    tol: float = 1e-8

    def fit(self, features, responses):
        x = np.asarray(features, dtype=float)
        y = np.asarray(responses, dtype=float).ravel()
        if x.ndim == 1:
            x = x[:, None]
        if x.shape[0] != y.size:
            raise ValidationError(f"{x.shape[0]} feature rows but {y.size} responses")
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
            raise ValidationError("logistic fitter needs finite features and responses")
        mu = x.mean(axis=0)
        sd = x.std(axis=0)
        sd[sd == 0] = 1.0
        z = np.hstack([np.ones((x.shape[0], 1)), (x - mu) / sd])
        beta = np.zeros(z.shape[1])
        step = 4.0 / z.shape[1]
        for _ in range(self.max_iter):
            grad = z.T @ (_sigmoid(z @ beta) - y) / y.size
            if np.max(np.abs(grad)) < self.tol:
                break
            beta -= step * grad
        return mu, sd, beta

    def predict_proba(self, state, features):
        mu, sd, beta = state
        x = np.asarray(features, dtype=float)
        if x.ndim == 1:
            x = x[:, None]
        if not np.all(np.isfinite(x)):
            raise ValidationError("logistic fitter needs finite features")
        return _sigmoid(beta[0] + ((x - mu) / sd) @ beta[1:])


def _sigmoid(t: np.ndarray) -> np.ndarray:
    # tanh form avoids overflow in exp for large |t|
    return 0.5 * (1.0 + np.tanh(0.5 * t))


def reference_logistic_fitter() -> LogisticFitter:
    return LogisticFitter()


@dataclass
class AugmentConfig:
    predictor: TrainablePredictor
    rounds: int = 3
    holdout_fraction: float = 0.5

    def __post_init__(self):
        if isinstance(self.rounds, bool) or int(self.rounds) != self.rounds or self.rounds < 1:
            raise ValidationError(f"rounds must be ≥ 1, got {self.rounds!r}")
        if not 0 < self.holdout_fraction < 1:
            raise ValidationError(
                f"holdout_fraction must lie in (0, 1), got {self.holdout_fraction!r}"
            )


def fitting_rows(n: int, fraction: float = 0.5) -> np.ndarray:
    """Evenly spread positions of the rows used for fitting.

    For ``fraction = 0.5`` these are the even positions 0, 2, 4, ...
    """
    i = np.arange(n)
    return np.flatnonzero(np.ceil((i + 1) * fraction) > np.ceil(i * fraction))


def _as_matrix(a, name: str) -> np.ndarray:
    x = np.asarray(a, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    if x.ndim != 2:
        raise ValidationError(f"{name} must be a 2-D matrix")
    return x


def _as_scores(a, n: int, name: str) -> np.ndarray:
    s = np.asarray(a, dtype=float).ravel()
    if s.size != n:
        raise ValidationError(f"{name} has {s.size} entries, expected {n}")
    if not np.all((s >= 0) & (s <= 1)):
        raise ValidationError(f"{name} must lie in [0, 1]")
    return s


def _checked(pred, n: int, round_: int) -> np.ndarray:
    out = np.asarray(pred, dtype=float).ravel()
    if out.size != n:
        raise PredictorContractError(
            f"round {round_}: predictor returned {out.size} values for {n} rows"
        )
    if not np.all((out >= 0) & (out <= 1)):
        raise PredictorContractError(
            f"round {round_}: predictor returned probabilities outside [0, 1]"
        )
    return out


def augment(
    train_covariates,
    train_responses: Sequence[float],
    base_scores_on_fit_half: Sequence[float],
    cfg: AugmentConfig,
    eval_covariates,
    base_scores_on_eval: Sequence[float],
) -> np.ndarray:
    """Run ``cfg.rounds`` rounds of augmentation and return the final eval scores.

    ``base_scores_on_fit_half`` may hold one score per training row or one per
    fitting row (see :func:`fitting_rows`). Eval scores are chained through
    every round's predictor.
    """
    xt = _as_matrix(train_covariates, "train_covariates")
    xe = _as_matrix(eval_covariates, "eval_covariates")
    y = np.asarray(train_responses, dtype=float).ravel()
    if y.size != xt.shape[0]:
        raise ValidationError(f"{xt.shape[0]} training rows but {y.size} responses")
    if xe.shape[1] != xt.shape[1]:
        raise ValidationError(
            f"eval covariates have {xe.shape[1]} columns, training has {xt.shape[1]}"
        )
    rows = fitting_rows(xt.shape[0], cfg.holdout_fraction)
    if rows.size == 0:
        raise ValidationError("no training rows left for fitting")
    base = np.asarray(base_scores_on_fit_half, dtype=float).ravel()
    fit_scores = _as_scores(base[rows] if base.size == xt.shape[0] else base, rows.size,
                            "base_scores_on_fit_half")
    eval_scores = _as_scores(base_scores_on_eval, xe.shape[0], "base_scores_on_eval")
    x_fit, y_fit = xt[rows], y[rows]

    for r in range(1, cfg.rounds + 1):
        state = cfg.predictor.fit(np.column_stack([x_fit, fit_scores]), y_fit)
        new_fit = cfg.predictor.predict_proba(state, np.column_stack([x_fit, fit_scores]))
        new_eval = cfg.predictor.predict_proba(state, np.column_stack([xe, eval_scores]))
        fit_scores = _checked(new_fit, rows.size, r)
        eval_scores = _checked(new_eval, xe.shape[0], r)
    return eval_scores
