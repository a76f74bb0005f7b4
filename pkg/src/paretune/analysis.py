"""Post-processing of optimisation output: front extraction, scalarised
optimum selection, density clustering and sparse regression attribution."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Sequence

import numpy as np

from .moo import dominates


@dataclass(frozen=True)
class FrontPoint:
    """One evaluated candidate: objective values plus its decoded parameters."""

    objectives: tuple[float, ...]
    parameters: Any = None
    generation: int = 0
    individual: int = 0


@dataclass(frozen=True)
class LassoModel:
    coefficients: tuple[float, ...]
    intercept: float
    lam: float
    sweeps: int
    converged: bool

    def predict(self, features: np.ndarray) -> np.ndarray:
        return np.asarray(features) @ np.asarray(self.coefficients) + self.intercept


def extract_pareto(points: Sequence[FrontPoint]) -> list[FrontPoint]:
    """The non-dominated subset of `points`, in stable input order."""
    out = []
    for i, p in enumerate(points):
        if not any(
            dominates(q.objectives, p.objectives) for j, q in enumerate(points) if j != i
        ):
            out.append(p)
    return out


def min_max_scale(values: Sequence[float], lo: float = 0.0, hi: float = 100.0) -> list[float]:
    """Linear map of [min, max] onto [lo, hi]; a constant input maps to all-lo."""
    arr = np.asarray(values, dtype=float)
    vmin, vmax = arr.min(), arr.max()
    if vmax == vmin:
        return [lo] * len(arr)
    return (lo + (arr - vmin) * (hi - lo) / (vmax - vmin)).tolist()


def combined_optimum(
    points: Sequence[FrontPoint], weights: Sequence[float] = (1.0, 1.0)
) -> FrontPoint:
    """Point minimising the weighted sum of min-max scaled objectives.

    Objectives are scaled to [0, 100] across `points` before weighting, so
    equal weights treat both axes even-handedly; ties keep the first point.
    """
    if not points:
        raise ValueError("combined_optimum needs at least one point")
    m = len(points[0].objectives)
    if len(weights) != m:
        raise ValueError(f"need {m} weights, got {len(weights)}")
    cols = [min_max_scale([p.objectives[j] for p in points]) for j in range(m)]
    sums = [
        sum(w * cols[j][i] for j, w in enumerate(weights)) for i in range(len(points))
    ]
    return points[int(np.argmin(sums))]


def dbscan(points: Sequence[Sequence[float]], eps: float, min_pts: int) -> list[int]:
    """Density-based cluster labels; noise is -1.

    A point is core when at least `min_pts` points (itself included) lie
    within `eps`. Clusters are the connected components of core points under
    eps-adjacency, numbered in first-core-point input order; a border point
    joins the lowest-numbered cluster among its core neighbours. Euclidean
    distances on the coordinates as given.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    if min_pts < 1:
        raise ValueError("min_pts must be >= 1")
    arr = np.asarray(points, dtype=float)
    n = len(arr)
    if n == 0:
        return []
    diffs = arr[:, None, :] - arr[None, :, :]
    within = (diffs**2).sum(axis=2) <= eps * eps
    core = within.sum(axis=1) >= min_pts

    labels = [-1] * n
    cluster = 0
    for start in range(n):
        if not core[start] or labels[start] != -1:
            continue
        stack = [start]
        labels[start] = cluster
        while stack:
            p = stack.pop()
            for q in np.nonzero(within[p])[0]:
                if core[q] and labels[q] == -1:
                    labels[q] = cluster
                    stack.append(int(q))
        cluster += 1

    for p in range(n):
        if core[p] or labels[p] != -1:
            continue
        near = [labels[q] for q in np.nonzero(within[p])[0] if core[q]]
        if near:
            labels[p] = min(near)
    return labels


def lasso_fit(features: np.ndarray, target: Sequence[float], lam: float) -> LassoModel:
    """L1-regularised least squares by cyclic coordinate descent.

    Minimises (1/2n) * ||y - X b - c||^2 + lam * ||b||_1 with an unpenalised
    intercept and no internal feature rescaling (callers scale features
    themselves). Converges when the largest coefficient change in a sweep
    drops below 1e-8, capped at 10,000 sweeps.
    """
    X = np.asarray(features, dtype=float)
    y = np.asarray(target, dtype=float)
    if X.ndim != 2 or X.shape[0] != len(y):
        raise ValueError("features must be a matrix with one row per target entry")
    if not (np.isfinite(X).all() and np.isfinite(y).all()):
        raise ValueError("features and target must be finite")
    if lam < 0:
        raise ValueError("lam must be >= 0")

    n, p = X.shape
    beta = np.zeros(p)
    intercept = float(y.mean())
    col_norms = (X**2).sum(axis=0) / n
    residual = y - intercept  # y - X beta - intercept, with beta = 0

    converged = False
    sweeps = 0
    for sweeps in range(1, 10_001):
        max_delta = 0.0
        for j in range(p):
            if col_norms[j] == 0.0:
                continue
            old = beta[j]
            rho = (X[:, j] @ residual) / n + col_norms[j] * old
            new = math_sign(rho) * max(abs(rho) - lam, 0.0) / col_norms[j]
            if new != old:
                residual += X[:, j] * (old - new)
                beta[j] = new
                max_delta = max(max_delta, abs(new - old))
        new_intercept = intercept + residual.mean()
        if new_intercept != intercept:
            residual -= new_intercept - intercept
            max_delta = max(max_delta, abs(new_intercept - intercept))
            intercept = new_intercept
        if max_delta < 1e-8:
            converged = True
            break

    return LassoModel(tuple(beta), intercept, lam, sweeps, converged)


def math_sign(x: float) -> float:
    if x > 0:
        return 1.0
    if x < 0:
        return -1.0
    return 0.0


def lasso_lambda_max(features: np.ndarray, target: Sequence[float]) -> float:
    """Smallest lam at which every coefficient is exactly zero."""
    X = np.asarray(features, dtype=float)
    y = np.asarray(target, dtype=float)
    return float(np.abs(X.T @ (y - y.mean())).max() / len(y))


def scale_feature_matrix(
    features: np.ndarray, lo: float = 1.0, hi: float = 100.0
) -> np.ndarray:
    """Min-max scale every column to [lo, hi] for cross-parameter comparability."""
    X = np.asarray(features, dtype=float)
    out = np.empty_like(X)
    for j in range(X.shape[1]):
        out[:, j] = min_max_scale(X[:, j], lo, hi)
    return out
