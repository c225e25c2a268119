"""Compass (pattern) search with step halving for small bounded problems."""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class SearchResult:
    x: np.ndarray
    fx: float
    evaluations: int
    halvings: int


def _directions(dim, diagonals):
    dirs = []
    for i in range(dim):
        for sgn in (1.0, -1.0):
            e = np.zeros(dim)
            e[i] = sgn
            dirs.append(e)
    if diagonals and dim > 1:
        for i, j in itertools.combinations(range(dim), 2):
            for si, sj in ((1, 1), (1, -1), (-1, 1), (-1, -1)):
                e = np.zeros(dim)
                e[i], e[j] = si, sj
                dirs.append(e)
    return dirs


def pattern_search(f, x0, step, bounds, min_step, *, maximize=False, diagonals=True,
                   fx0=None, max_evals=100_000, improve_tol=1e-14):
    """Minimize (or maximize) ``f`` over a box by polling a fixed stencil.

    Each iteration polls ``x + step * d`` for the coordinate directions (and
    the diagonals when ``diagonals``), clipped to ``bounds``, and moves to the
    best poll point if it beats the incumbent by more than ``improve_tol``
    (relative).  Otherwise every step is halved.  Stops once all steps are
    below ``min_step``.  Poll order is fixed, so runs are reproducible and a
    flat landscape never moves the incumbent.
    """
    sign = -1.0 if maximize else 1.0
    lo = np.array([b[0] for b in bounds], dtype=float)
    hi = np.array([b[1] for b in bounds], dtype=float)
    x = np.clip(np.asarray(x0, dtype=float), lo, hi)
    step = np.broadcast_to(np.asarray(step, dtype=float), x.shape).copy()
    min_step = np.broadcast_to(np.asarray(min_step, dtype=float), x.shape)
    fbest = sign * (f(x) if fx0 is None else fx0)
    evals = 0 if fx0 is not None else 1
    halvings = 0
    dirs = _directions(x.size, diagonals)
    while np.any(step >= min_step) and evals < max_evals:
        cand, fcand = None, fbest
        for d in dirs:
            y = np.clip(x + step * d, lo, hi)
            if np.array_equal(y, x):
                continue
            fy = sign * f(y)
            evals += 1
            if fy < fcand - improve_tol * max(1.0, abs(fcand)):
                cand, fcand = y, fy
        if cand is None:
            step *= 0.5
            halvings += 1
        else:
            x, fbest = cand, fcand
    return SearchResult(x, sign * fbest, evals, halvings)
