"""One- and two-photon scattering off a two-level emitter in a chiral waveguide.

Natural units: momenta in ``Gamma / v_g``.  ``gamma_wg`` is kept as a field
so the formulas read naturally, but it is 1 for every physical run.

The two-photon output amplitude is

    beta(k, k') = t(k) t(k') xi(k) xi(k') + b(k, k') / 2,

with the bound-state part

    b(k, k') = int dp xi(p) xi(K - p) B(k, k', p, K - p),   K = k + k',
    B(k, k', p, p') = i sqrt(2 G) / pi * s(k) s(k') [s(p) + s(p')].

Because ``xi(p) xi(K - p)`` is symmetric under ``p -> K - p`` the two
``s`` terms contribute equally and

    b(k, k') = i 2 sqrt(2 G) / pi * s(k) s(k') g(K),
    g(K) = int dp xi(p) xi(K - p) s(p),

so one 1-D function of the total momentum carries the whole non-linearity.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.interpolate import CubicSpline

from .errors import ContractError, ParameterError
from .pulses import amplitude
from .quadrature import Grid, QuadratureSpec, converge, make_grid


@dataclass(frozen=True)
class EmitterParams:
    """Emitter detuning and rates, all divided by the group velocity."""

    delta: float = 0.0
    gamma_wg: float = 1.0
    gamma_loss: float = 0.0

    def __post_init__(self):
        if not math.isfinite(self.delta):
            raise ParameterError("delta must be finite")
        if not (math.isfinite(self.gamma_wg) and self.gamma_wg > 0):
            raise ParameterError("gamma_wg must be positive")
        if not (math.isfinite(self.gamma_loss) and self.gamma_loss >= 0):
            raise ParameterError("gamma_loss must be non-negative")

    @property
    def lossless(self):
        return self.gamma_loss == 0.0

    def to_dict(self):
        return {"delta": self.delta, "gamma_wg": self.gamma_wg,
                "gamma_loss": self.gamma_loss}


LOSSLESS = EmitterParams()


def transmission(k, emitter=LOSSLESS):
    """Single-photon transmission coefficient t(k)."""
    k = np.asarray(k, dtype=float)
    x = k - emitter.delta
    out = (x - 1j * (emitter.gamma_wg - emitter.gamma_loss)) / (
        x + 1j * (emitter.gamma_wg + emitter.gamma_loss))
    return out[()] if out.ndim == 0 else out


def phase_theta(k, emitter=LOSSLESS):
    """Unwrapped phase of t(k) on a lossless emitter, equal to pi on resonance."""
    if not emitter.lossless:
        raise ContractError(
            "phase_theta needs gamma_loss = 0: with loss |t(k)| < 1 and t is not a pure phase")
    k = np.asarray(k, dtype=float)
    out = math.pi + 2.0 * np.arctan((k - emitter.delta) / emitter.gamma_wg)
    return out[()] if out.ndim == 0 else out


def s_pole(k, emitter=LOSSLESS):
    """Emitter pole factor s(k) = sqrt(2 G) / (k - Delta + i (G + g))."""
    k = np.asarray(k, dtype=float)
    out = math.sqrt(2.0 * emitter.gamma_wg) / (
        k - emitter.delta + 1j * (emitter.gamma_wg + emitter.gamma_loss))
    return out[()] if out.ndim == 0 else out


def bound_state_kernel(k, kp, p, pp, emitter=LOSSLESS):
    """Two-photon bound-state coefficient B(k, k', p, p').

    Energy conservation ``pp = k + kp - p`` is the caller's business.
    """
    c = 1j * math.sqrt(2.0 * emitter.gamma_wg) / math.pi
    return c * s_pole(k, emitter) * s_pole(kp, emitter) * (
        s_pole(p, emitter) + s_pole(pp, emitter))


def bound_prefactor(emitter=LOSSLESS):
    """Prefactor linking b(k, k') to s(k) s(k') g(k + k')."""
    return 2j * math.sqrt(2.0 * emitter.gamma_wg) / math.pi


def nonlinear_g(K, profile, emitter=LOSSLESS, spec=None):
    """g(K) = int dp xi(p) xi(K - p) s(p), by converged quadrature.

    ``K`` may be an array; convergence is judged on the whole vector.
    Returns ``(value, report)``.
    """
    spec = (spec or QuadratureSpec()).resolved(profile, emitter)
    K = np.asarray(K, dtype=float)

    def estimate(grid):
        a = grid.weights * amplitude(profile, grid.nodes) * s_pole(grid.nodes, emitter)
        xi_shift = amplitude(profile, K.reshape(-1, 1) - grid.nodes)
        return (xi_shift @ a).reshape(K.shape)

    val, rep = converge(estimate, spec)
    return (val[()] if val.ndim == 0 else val), rep


def g_on_lattice(grid, profile, emitter=LOSSLESS):
    """g(K) at every lattice point ``K_m = 2 (c - W) + m h`` of a uniform grid.

    On a trapezoid grid with spacing ``h`` the sums ``k_i + k_j`` are exactly
    these ``2n - 1`` points and ``K_m - k_p`` is again a lattice point, so
    the inner integral is a discrete convolution.
    """
    n = grid.size
    h = grid.spacing
    # xi on lattice indices -(n-1) .. 2n-2 relative to the first node
    ext = grid.nodes[0] + h * np.arange(-(n - 1), 2 * n - 1)
    a = grid.weights * amplitude(profile, grid.nodes) * s_pole(grid.nodes, emitter)
    full = np.convolve(a, amplitude(profile, ext))
    K = 2.0 * grid.nodes[0] + h * np.arange(2 * n - 1)
    return K, full[n - 1:3 * n - 2]


def g_interpolant(grid, profile, emitter=LOSSLESS):
    """Cubic spline of g(K) over ``[2(c - W), 2(c + W)]``.

    Used with Gauss-Legendre grids, whose node sums are scattered.  The spline
    knots are uniform and twice as dense as the mean node spacing; the inner
    integral uses the grid's own rule.
    """
    m = 4 * grid.size + 1
    c, hw = grid.center, grid.halfwidth
    K = np.linspace(2 * (c - hw), 2 * (c + hw), m)
    a = grid.weights * amplitude(profile, grid.nodes) * s_pole(grid.nodes, emitter)
    vals = np.empty(m, dtype=complex)
    for start in range(0, m, 512):
        blk = K[start:start + 512]
        vals[start:start + 512] = amplitude(profile, blk[:, None] - grid.nodes) @ a
    return CubicSpline(K, vals)


def g_pairs(grid, profile, emitter=LOSSLESS):
    """Matrix ``g(k_i + k_j)`` on the grid's nodes."""
    if grid.uniform:
        _, gl = g_on_lattice(grid, profile, emitter)
        idx = np.arange(grid.size)
        return gl[idx[:, None] + idx[None, :]]
    spline = g_interpolant(grid, profile, emitter)
    return spline(grid.nodes[:, None] + grid.nodes[None, :])


def single_photon_scatter(profile, emitter=LOSSLESS, t=None):
    """Scattered single-photon amplitude ``k -> xi(k) t(k)``.

    ``t`` overrides the transmission function (``lambda k: 1`` removes the
    emitter, for instance).
    """
    tf = (lambda k: transmission(k, emitter)) if t is None else t

    def scattered(k):
        return amplitude(profile, k) * tf(k)

    return scattered


@dataclass(frozen=True)
class TwoPhotonAmplitude:
    """Two-photon amplitude sampled on a shared tensor grid."""

    grid: Grid
    values: np.ndarray = field(repr=False)
    metadata: dict = field(default_factory=dict)

    def norm(self):
        w = self.grid.weights
        return float(w @ (np.abs(self.values) ** 2) @ w)

    def inner(self, other):
        """<self|other> on the common grid."""
        if other.grid.size != self.grid.size:
            raise ParameterError("amplitudes live on different grids")
        w = self.grid.weights
        return complex(w @ (np.conj(self.values) * other.values) @ w)


def two_photon_values(grid, profile, emitter=LOSSLESS, include_bound=True):
    xi = amplitude(profile, grid.nodes)
    lin = transmission(grid.nodes, emitter) * xi
    beta = lin[:, None] * lin[None, :]
    if include_bound:
        s = s_pole(grid.nodes, emitter)
        g = g_pairs(grid, profile, emitter)
        beta = beta + 0.5 * bound_prefactor(emitter) * s[:, None] * s[None, :] * g
    return beta


def two_photon_scatter(profile, emitter=LOSSLESS, spec=None, include_bound=True,
                       nodes: Optional[int] = None):
    """Scattered two-photon amplitude beta(k, k') for identical input photons."""
    spec = (spec or QuadratureSpec()).resolved(profile, emitter)
    grid = make_grid(spec, nodes)
    beta = two_photon_values(grid, profile, emitter, include_bound)
    meta = {"profile": profile.to_dict(), "emitter": emitter.to_dict(),
            "quadrature": spec.to_dict(), "nodes": grid.size,
            "include_bound": include_bound}
    return TwoPhotonAmplitude(grid, beta, meta)


def two_photon_norm(profile, emitter=LOSSLESS, spec=None):
    """Converged ``int int |beta|^2``; returns ``(norm, report)``."""
    spec = (spec or QuadratureSpec()).resolved(profile, emitter)

    def estimate(grid):
        beta = two_photon_values(grid, profile, emitter)
        return float(grid.weights @ (np.abs(beta) ** 2) @ grid.weights)

    return converge(estimate, spec)
