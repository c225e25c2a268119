"""Overlaps of the scattered gate outputs with the ideal outputs.

An ideal output photon is the input delayed by ``L`` with a pi phase,
``-xi(k) exp(ikL)``.  Two numbers fix the gate fidelity:

``O1``  overlap of a photon that went through an emitter with the ideal
        photon, ``-int |xi|^2 t(k) exp(-ikL) dk``;
``T``   overlap of the two-photon output with the phase-flipped ideal pair
        ``-xi(k) xi(k') exp(i(k + k')L)``.

Both equal 1 for a perfect gate.  With ``A(L) = -O1`` the factorized form is

    T = -(A(L)^2 + C(L) / 2),
    C(L) = i 2 sqrt(2 G)/pi  int int u(k) u(k') g(k + k'),
    u(k) = conj(xi(k)) s(k) exp(-ikL).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConvergenceError
from .pulses import amplitude
from .quadrature import QuadratureSpec, converge, make_grid
from .scattering import (LOSSLESS, EmitterParams, TwoPhotonAmplitude, bound_prefactor,
                         g_interpolant, g_on_lattice, s_pole, transmission)


@dataclass(frozen=True)
class GateOverlaps:
    sigma: float
    L: float
    O1: complex
    T: complex
    emitter: EmitterParams = LOSSLESS
    convergence: dict = field(default_factory=dict)

    @property
    def abs_O1(self):
        return abs(self.O1)

    @property
    def abs_T(self):
        return abs(self.T)

    def to_dict(self):
        return {"sigma": self.sigma, "L": self.L,
                "O1": [self.O1.real, self.O1.imag], "T": [self.T.real, self.T.imag],
                "emitter": self.emitter.to_dict(), "convergence": self.convergence}


def ideal_zero_amplitude(profile, L):
    """Ideal single-photon output ``k -> -xi(k) exp(ikL)``."""

    def ideal(k):
        k = np.asarray(k, dtype=float)
        return -amplitude(profile, k) * np.exp(1j * k * L)

    return ideal


def overlap_1d(bra, ket, spec):
    """<bra|ket> for two single-photon amplitude functions."""
    return converge(
        lambda g: complex(np.sum(g.weights * np.conj(bra(g.nodes)) * ket(g.nodes))), spec)


def two_photon_target(profile, L, spec=None, nodes=None):
    """Phase-flipped ideal pair ``-xi(k) xi(k') exp(i(k + k')L)`` on a grid."""
    spec = (spec or QuadratureSpec()).resolved(profile)
    grid = make_grid(spec, nodes)
    f = amplitude(profile, grid.nodes) * np.exp(1j * grid.nodes * L)
    return TwoPhotonAmplitude(grid, -f[:, None] * f[None, :],
                              {"profile": profile.to_dict(), "L": L})


def two_overlap_of(beta, profile, L):
    """Overlap of the ideal pair with an arbitrary sampled two-photon amplitude."""
    g = beta.grid
    f = amplitude(profile, g.nodes) * np.exp(1j * g.nodes * L)
    target = -f[:, None] * f[None, :]
    return complex(g.weights @ (np.conj(target) * beta.values) @ g.weights)


class _Level:
    """Everything about one grid that does not depend on L."""

    def __init__(self, grid, profile, emitter):
        self.grid = grid
        k, w = grid.nodes, grid.weights
        xi = amplitude(profile, k)
        self.k = k
        self.a_weights = w * np.abs(xi) ** 2 * transmission(k, emitter)
        self.u_weights = w * np.conj(xi) * s_pole(k, emitter)
        self.pref = bound_prefactor(emitter)
        self._profile, self._emitter = profile, emitter
        self._g = None

    @property
    def g(self):
        # lattice vector on uniform grids, full matrix on Gauss-Legendre grids
        if self._g is None:
            if self.grid.uniform:
                self._g = g_on_lattice(self.grid, self._profile, self._emitter)[1]
            else:
                spline = g_interpolant(self.grid, self._profile, self._emitter)
                self._g = spline(self.k[:, None] + self.k[None, :])
        return self._g

    def A(self, L):
        return complex(np.sum(self.a_weights * np.exp(-1j * self.k * L)))

    def C(self, L):
        u = self.u_weights * np.exp(-1j * self.k * L)
        if self.grid.uniform:
            # u^T G u with G Hankel in (i + j): sum_m g_m (u * u)_m
            val = np.dot(np.convolve(u, u), self.g)
        else:
            val = u @ self.g @ u
        return self.pref * complex(val)

    def overlaps(self, L):
        A = self.A(L)
        return np.array([-A, -(A * A + 0.5 * self.C(L))])


class OverlapKernel:
    """Per-profile precomputation reused across many L values.

    Grids are built lazily, one per refinement level, and kept; sweeping L
    at fixed sigma then costs O(n^2) per cell rather than a fresh g(K).
    """

    def __init__(self, profile, emitter=LOSSLESS, spec=None):
        self.profile = profile
        self.emitter = emitter
        self.spec = (spec or QuadratureSpec()).resolved(profile, emitter)
        self._levels = {}

    def level(self, n):
        if n not in self._levels:
            self._levels[n] = _Level(make_grid(self.spec, n), self.profile, self.emitter)
        return self._levels[n]

    def single(self, L):
        val, rep = converge(lambda g: -self.level(g.size).A(L), self.spec)
        return val, rep

    def pair(self, L):
        """``(O1, T)`` as a length-2 array plus one joint convergence report."""
        return converge(lambda g: self.level(g.size).overlaps(L), self.spec)

    def overlaps(self, L):
        vals, rep = self.pair(L)
        return GateOverlaps(self.profile.sigma, float(L), complex(vals[0]), complex(vals[1]),
                            self.emitter, rep.to_dict())

    def try_overlaps(self, L):
        """Like :meth:`overlaps` but returns None instead of raising."""
        try:
            return self.overlaps(L)
        except ConvergenceError:
            return None


def single_overlap(profile, emitter=LOSSLESS, L=0.0, spec=None, full_output=False):
    """O1 = <ideal photon | photon scattered on the emitter>."""
    val, rep = OverlapKernel(profile, emitter, spec).single(L)
    val = complex(val)
    return (val, rep) if full_output else val


def two_overlap(profile, emitter=LOSSLESS, L=0.0, spec=None, full_output=False):
    """T = <phase-flipped ideal pair | scattered pair>, via the g(K) factorization."""
    vals, rep = OverlapKernel(profile, emitter, spec).pair(L)
    val = complex(vals[1])
    return (val, rep) if full_output else val


def gate_overlaps(profile, emitter=LOSSLESS, L=0.0, spec=None):
    return OverlapKernel(profile, emitter, spec).overlaps(L)


BEAM_SPLITTER = np.array([[1.0, -1j], [-1j, 1.0]]) / math.sqrt(2.0)


def beam_splitter_transform(amp, photons=2, matrix=BEAM_SPLITTER):
    """Apply a two-mode coupler to creation-operator amplitudes.

    Mode order is (c1, s1).  For ``photons=1`` ``amp`` has shape ``(2, ...)``
    and holds the amplitude of ``a_m^dagger``; for ``photons=2`` it has shape
    ``(2, 2, ...)`` with the state ``sum_ab amp[a, b] a_a^dag a_b^dag |vac>``.
    Trailing axes (e.g. momentum grids) are carried along unchanged.
    """
    amp = np.asarray(amp, dtype=complex)
    if photons == 1:
        return np.einsum("ai,a...->i...", matrix, amp)
    if photons == 2:
        return np.einsum("ai,ab...,bj->ij...", matrix, amp, matrix)
    raise ValueError("photons must be 1 or 2")


def coincidence_amplitude(amp):
    """Amplitude of one photon in each mode for a two-photon ``(2, 2, ...)`` array."""
    amp = np.asarray(amp)
    return amp[0, 1] + amp[1, 0]
