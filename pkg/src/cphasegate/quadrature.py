"""Deterministic tensor-product quadrature on a finite momentum window.

Every integral in the package runs through :func:`converge`: the estimate is
recomputed on successively doubled grids until two consecutive estimates
agree to ``rel_tol``.  Trapezoid grids are nested (2n - 1 nodes after a
refinement) and uniform, which the scattering code exploits: sums
``k_i + k_j`` of nodes land exactly on a uniform lattice.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, replace
from enum import Enum
from typing import Callable, Optional

import numpy as np

from .errors import ConvergenceError, ParameterError

MIN_HALFWIDTH = 8.0


class Rule(str, Enum):
    TRAPEZOID = "trapezoid"
    GAUSS_LEGENDRE = "gauss_legendre"


@dataclass(frozen=True)
class QuadratureSpec:
    """Discretization and tolerance settings for one family of integrals.

    ``window_halfwidth=None`` means "pick from the integrand": at least
    ``max(profile.support_halfwidth, 8)`` around ``center``, which covers the
    pulse tails and the emitter pole scale alike.
    """

    window_halfwidth: Optional[float] = None
    nodes: int = 257
    rule: Rule = Rule.TRAPEZOID
    rel_tol: float = 1e-6
    max_refinements: int = 5
    abs_tol: float = 1e-12
    center: float = 0.0

    def __post_init__(self):
        try:
            object.__setattr__(self, "rule", Rule(self.rule))
        except ValueError:
            raise ParameterError(f"unknown quadrature rule {self.rule!r}") from None
        if self.window_halfwidth is not None and not self.window_halfwidth > 0:
            raise ParameterError("window_halfwidth must be positive")
        if int(self.nodes) != self.nodes or self.nodes < 3:
            raise ParameterError("nodes must be an integer >= 3")
        if not self.rel_tol > 0:
            raise ParameterError("rel_tol must be positive")
        if self.max_refinements < 1:
            raise ParameterError("max_refinements must be >= 1")
        if self.abs_tol < 0:
            raise ParameterError("abs_tol must be non-negative")

    @property
    def halfwidth(self):
        return MIN_HALFWIDTH if self.window_halfwidth is None else float(self.window_halfwidth)

    def resolved(self, profile=None, emitter=None):
        """Copy with a concrete window fitted to ``profile`` and ``emitter``."""
        if self.window_halfwidth is not None:
            return self
        if profile is None:
            return replace(self, window_halfwidth=MIN_HALFWIDTH)
        center = profile.carrier_offset
        hw = max(profile.support_halfwidth, MIN_HALFWIDTH)
        if emitter is not None:
            hw += abs(emitter.delta - center)
        return replace(self, window_halfwidth=hw, center=center)

    def refined_counts(self):
        """Node counts visited by the refinement loop, coarsest first."""
        n = int(self.nodes)
        out = [n]
        for _ in range(self.max_refinements):
            n = 2 * n - 1 if self.rule is Rule.TRAPEZOID else 2 * n
            out.append(n)
        return out

    def to_dict(self):
        d = asdict(self)
        d["rule"] = self.rule.value
        return d

    @classmethod
    def from_dict(cls, d):
        return cls(**d)


@dataclass(frozen=True)
class Grid:
    nodes: np.ndarray
    weights: np.ndarray
    rule: Rule
    halfwidth: float
    center: float

    @property
    def size(self):
        return self.nodes.size

    @property
    def uniform(self):
        return self.rule is Rule.TRAPEZOID

    @property
    def spacing(self):
        if not self.uniform:
            raise ValueError("Gauss-Legendre grids have no uniform spacing")
        return 2.0 * self.halfwidth / (self.size - 1)


def make_grid(spec, n=None):
    """Nodes and weights for ``n`` points (default ``spec.nodes``)."""
    n = int(spec.nodes if n is None else n)
    hw, c = spec.halfwidth, spec.center
    if spec.rule is Rule.TRAPEZOID:
        k = np.linspace(c - hw, c + hw, n)
        h = 2.0 * hw / (n - 1)
        w = np.full(n, h)
        w[0] = w[-1] = 0.5 * h
    else:
        x, w = np.polynomial.legendre.leggauss(n)
        k = c + hw * x
        w = hw * w
    return Grid(k, w, spec.rule, hw, c)


@dataclass(frozen=True)
class ConvergenceReport:
    converged: bool
    nodes: int
    refinements: int
    rel_change: float
    rule: str
    window_halfwidth: float

    def to_dict(self):
        return asdict(self)


def _change(new, old):
    new = np.asarray(new)
    old = np.asarray(old)
    diff = float(np.max(np.abs(new - old))) if new.size else 0.0
    scale = float(np.max(np.abs(new))) if new.size else 0.0
    return diff, scale


def converge(estimate: Callable[[Grid], object], spec: QuadratureSpec):
    """Refine ``estimate(grid)`` by doubling nodes until it settles.

    Returns ``(value, report)``.  Raises :class:`ConvergenceError` carrying
    the last two estimates if ``max_refinements`` runs out first.
    """
    counts = spec.refined_counts()
    prev = estimate(make_grid(spec, counts[0]))
    rel = math.inf
    for i, n in enumerate(counts[1:], start=1):
        cur = estimate(make_grid(spec, n))
        diff, scale = _change(cur, prev)
        rel = diff / scale if scale > 0 else (0.0 if diff == 0 else math.inf)
        if diff <= spec.rel_tol * scale + spec.abs_tol:
            return cur, ConvergenceReport(True, n, i, rel, spec.rule.value, spec.halfwidth)
        prev_prev, prev = prev, cur
    raise ConvergenceError(
        f"quadrature did not reach rel_tol={spec.rel_tol:g} with {counts[-1]} nodes "
        f"(last relative change {rel:.3g})",
        estimates=(prev_prev, prev), nodes=counts[-1], rel_change=rel)


def integrate_1d(f, spec=None):
    """Integrate a vectorized complex ``f(k)`` over the spec's window."""
    spec = spec or QuadratureSpec()

    def estimate(g):
        return complex(np.sum(g.weights * f(g.nodes)))

    return converge(estimate, spec)


def integrate_2d(f, spec=None):
    """Integrate a vectorized ``f(k, kp)`` on the tensor-product grid."""
    spec = spec or QuadratureSpec()

    def estimate(g):
        k1, k2 = np.meshgrid(g.nodes, g.nodes, indexing="ij")
        vals = f(k1, k2)
        return complex(g.weights @ vals @ g.weights)

    return converge(estimate, spec)
