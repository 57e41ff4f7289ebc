"""Majorization predicates and Schur-concave entropy functions on spectra."""

from __future__ import annotations

import numpy as np

from .linalg import PSD_TOL, RANK_CUTOFF, eigvals_desc

MAJORIZATION_TOL = 1e-10
KINDS = ("moment", "renyi", "tsallis", "arimoto", "von_neumann")


def sorted_spectrum(x, length: int | None = None) -> np.ndarray:
    """Descending copy of ``x`` zero-padded to ``length``.

    Matrices (2-d input) are replaced by their eigenvalues first.
    """
    x = np.asarray(x)
    vals = eigvals_desc(x) if x.ndim == 2 else np.sort(x.astype(float))[::-1]
    vals = np.real(vals).astype(float)
    if length is not None:
        if length < vals.size:
            raise ValueError(f"cannot pad a spectrum of length {vals.size} down to {length}")
        vals = np.concatenate([vals, np.zeros(length - vals.size)])
        vals = np.sort(vals)[::-1]
    return vals


def partial_sum_slack(x, y) -> np.ndarray:
    """``sum_{i<=k} x_i - sum_{i<=k} y_i`` for every ``k`` (descending order)."""
    x = sorted_spectrum(x)
    y = sorted_spectrum(y)
    if x.size != y.size:
        raise ValueError(f"length mismatch: {x.size} vs {y.size}")
    return np.cumsum(x) - np.cumsum(y)


def _tol(x, tol):
    return tol * max(1.0, float(np.sum(np.abs(x))))


def weak_majorizes(x, y, tol: float = MAJORIZATION_TOL) -> bool:
    """True iff ``x`` weakly (sub)majorizes ``y``."""
    return bool(np.min(partial_sum_slack(x, y)) >= -_tol(x, tol))


def majorizes(x, y, tol: float = MAJORIZATION_TOL) -> bool:
    slack = partial_sum_slack(x, y)
    t = _tol(x, tol)
    return bool(np.min(slack) >= -t and abs(slack[-1]) <= t)


def _spectrum_for_entropy(x, psd_tol: float) -> np.ndarray:
    vals = sorted_spectrum(x)
    scale = max(1.0, float(np.max(np.abs(vals)))) if vals.size else 1.0
    if vals.size and vals[-1] < -psd_tol * scale:
        raise ValueError(f"entropy of a spectrum with negative entry {vals[-1]:.3g}")
    return np.clip(vals, 0.0, None)


def _support(vals: np.ndarray) -> np.ndarray:
    if vals.size == 0 or vals[0] <= 0:
        return vals[:0]
    return vals[vals > RANK_CUTOFF * vals[0]]


def log_moment(vals: np.ndarray, alpha: float) -> float:
    """``ln sum_i x_i**alpha`` over the support, stable for large ``alpha``."""
    s = _support(vals)
    if s.size == 0:
        return -np.inf
    if alpha == 0:
        return float(np.log(s.size))
    top = s[0]
    return float(alpha * np.log(top) + np.log(np.sum((s / top) ** alpha)))


def moment(vals, alpha: float) -> float:
    s = _support(np.asarray(vals, dtype=float))
    if alpha == 0:
        return float(s.size)
    return float(np.sum(s**alpha))


def von_neumann(vals) -> float:
    s = _support(np.asarray(vals, dtype=float))
    return float(-np.sum(s * np.log(s)))


def entropy(x, kind: str = "renyi", alpha: float = 2.0, psd_tol: float = PSD_TOL) -> float:
    """Moment ``f_alpha``, Renyi, Tsallis, Arimoto or von Neumann value of a spectrum.

    ``x`` is a vector or a Hermitian matrix. Natural logarithms throughout,
    ``0 ln 0 = 0`` and ``f_0`` counts the support. Renyi, Tsallis and Arimoto
    at ``alpha = 1`` return the von Neumann value. Renyi accepts
    ``alpha = inf`` (``-ln max x``).
    """
    if kind not in KINDS:
        raise ValueError(f"unknown entropy kind {kind!r}")
    if alpha < 0:
        raise ValueError("alpha must be >= 0")
    vals = _spectrum_for_entropy(x, psd_tol)
    if kind == "von_neumann":
        return von_neumann(vals)
    if kind == "moment":
        return moment(vals, alpha)
    if alpha == 1:
        return von_neumann(vals)
    if kind == "renyi":
        if np.isinf(alpha):
            s = _support(vals)
            return float(-np.log(s[0])) if s.size else np.inf
        return log_moment(vals, alpha) / (1.0 - alpha)
    if kind == "tsallis":
        return (moment(vals, alpha) - 1.0) / (1.0 - alpha)
    # arimoto: ((f_{1/alpha})^alpha - 1) / (alpha - 1); alpha -> 0 gives max x
    if alpha == 0:
        s = _support(vals)
        return float(1.0 - (s[0] if s.size else 0.0))
    return float((np.exp(alpha * log_moment(vals, 1.0 / alpha)) - 1.0) / (alpha - 1.0))
