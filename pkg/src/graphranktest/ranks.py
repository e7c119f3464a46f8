"""Asymmetric normalized ranks of the response."""

from __future__ import annotations

import numpy as np


def _as_response(y) -> np.ndarray:
    y = np.asarray(y, dtype=float)
    if y.ndim != 1:
        raise ValueError("y must be a 1-D vector of scalar responses")
    if len(y) < 2:
        raise ValueError("need at least 2 observations")
    if not np.isfinite(y).all():
        raise ValueError(f"non-finite response at index {int(np.flatnonzero(~np.isfinite(y))[0])}")
    return y


def compute_normalized_ranks(y) -> np.ndarray:
    """Matrix ``R`` with ``R[i, j] = (r_ij - 1) / N``.

    ``r_ij`` is the 1-based rank of ``|y[j] - y[i]|`` among all ``j != i``;
    equal distances are ranked by smaller ``j`` first. The diagonal is NaN.
    """
    y = _as_response(y)
    n = len(y)
    dist = np.abs(y[None, :] - y[:, None])
    np.fill_diagonal(dist, -1.0)  # self sorts first, at position 0
    order = np.argsort(dist, axis=1, kind="stable")
    pos = np.empty_like(order)
    np.put_along_axis(pos, order, np.arange(n)[None, :].repeat(n, axis=0), axis=1)
    R = (pos - 1) / n
    np.fill_diagonal(R, np.nan)
    return R


def has_rank_ties(y) -> bool:
    """True if some row ranking had to break a distance tie by index."""
    y = _as_response(y)
    dist = np.abs(y[None, :] - y[:, None])
    np.fill_diagonal(dist, -1.0)
    srt = np.sort(dist, axis=1)[:, 1:]
    return bool((np.diff(srt, axis=1) == 0).any())
