"""Single-photon spectral profiles in natural units.

All momenta are measured in units of the waveguide coupling
``Gamma / v_g`` (so the emitter half-linewidth in momentum is 1) and all
lengths in ``v_g / Gamma``.  Widths ``sigma`` are the full width at half
maximum of the intensity ``|xi(k)|**2``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

import numpy as np

from .errors import ParameterError

SQRT_LN2 = math.sqrt(math.log(2.0))
ACOSH_SQRT2 = math.acosh(math.sqrt(2.0))


class Shape(str, Enum):
    GAUSSIAN = "gaussian"
    LORENTZIAN = "lorentzian"
    SECH = "sech"
    TABULATED = "tabulated"


class LorentzianConvention(str, Enum):
    # single pole, i.e. a one-sided exponential in time
    POLE = "pole"
    # real square root of a Lorentzian intensity
    REAL = "real"


def to_natural_momentum(value, gamma=1.0, v_g=1.0):
    """Express a momentum given in absolute units in units of gamma / v_g."""
    return value * v_g / gamma


def to_natural_length(value, gamma=1.0, v_g=1.0):
    """Express a length given in absolute units in units of v_g / gamma."""
    return value * gamma / v_g


def gaussian_sigma_prime(sigma):
    """Amplitude width sigma' of a Gaussian whose intensity FWHM is sigma."""
    return sigma / (2.0 * SQRT_LN2)


def sech_k0(sigma):
    """Scale k0 of a sech amplitude whose sech**2 intensity has FWHM sigma."""
    return sigma / (2.0 * ACOSH_SQRT2)


@dataclass(frozen=True)
class SpectralProfile:
    """Normalized spectral amplitude xi(k) of one photon.

    Instances are immutable.  Build them with :func:`make_profile` or
    :func:`tabulated_profile`, which validate and normalize.
    """

    shape: Shape
    sigma: float
    carrier_offset: float = 0.0
    lorentzian_convention: LorentzianConvention = LorentzianConvention.POLE
    table_k: Optional[np.ndarray] = field(default=None, repr=False, compare=False)
    table_values: Optional[np.ndarray] = field(default=None, repr=False, compare=False)

    def __call__(self, k):
        return amplitude(self, k)

    @property
    def support_halfwidth(self):
        """Half-width around the carrier that holds the profile's weight.

        Exponentially decaying shapes are truncated where the intensity has
        dropped below ~1e-14 of its peak.  The Lorentzian decays only
        algebraically; its window is a compromise between tail truncation
        and node count (see README).
        """
        if self.shape is Shape.GAUSSIAN:
            return 8.0 * gaussian_sigma_prime(self.sigma)
        if self.shape is Shape.SECH:
            return 16.0 * sech_k0(self.sigma)
        if self.shape is Shape.LORENTZIAN:
            return 100.0 * self.sigma
        k = self.table_k
        return float(max(abs(k[0] - self.carrier_offset), abs(k[-1] - self.carrier_offset)))

    def to_dict(self):
        d = {"shape": self.shape.value, "sigma": self.sigma,
             "carrier_offset": self.carrier_offset}
        if self.shape is Shape.LORENTZIAN:
            d["lorentzian_convention"] = self.lorentzian_convention.value
        if self.shape is Shape.TABULATED:
            d["table_k"] = [float(x) for x in self.table_k]
            d["table_values"] = [[float(v.real), float(v.imag)] for v in self.table_values]
        return d


def _parse_shape(shape):
    try:
        return Shape(shape)
    except ValueError:
        raise ParameterError(
            f"unknown profile shape {shape!r}; expected one of "
            f"{[s.value for s in Shape]}") from None


def make_profile(shape, sigma, carrier_offset=0.0, lorentzian_convention="pole"):
    """Build an analytic profile with intensity FWHM ``sigma``.

    >>> p = make_profile("gaussian", 1.0)
    >>> round(abs(p(0.0)), 5)
    0.96925
    """
    shape = _parse_shape(shape)
    if shape is Shape.TABULATED:
        raise ParameterError("use tabulated_profile() for sampled amplitudes")
    sigma = float(sigma)
    if not math.isfinite(sigma) or sigma <= 0.0:
        raise ParameterError(f"sigma must be a positive finite number, got {sigma}")
    if not math.isfinite(carrier_offset):
        raise ParameterError("carrier_offset must be finite")
    try:
        conv = LorentzianConvention(lorentzian_convention)
    except ValueError:
        raise ParameterError(
            f"unknown Lorentzian convention {lorentzian_convention!r}") from None
    return SpectralProfile(shape, sigma, float(carrier_offset), conv)


def tabulated_profile(k, values, carrier_offset=None):
    """Profile given by complex samples on an increasing grid.

    ``k`` holds absolute momenta; ``carrier_offset`` (default: the middle of
    the table) only sets where integration windows are centred.  The
    amplitude is linearly interpolated between samples and zero outside.  The
    samples are rescaled so the interpolant has unit norm exactly.
    """
    k = np.asarray(k, dtype=float)
    values = np.asarray(values, dtype=complex)
    if k.ndim != 1 or k.shape != values.shape or k.size < 2:
        raise ParameterError("tabulated profile needs matching 1-D k and values, size >= 2")
    if not np.all(np.diff(k) > 0):
        raise ParameterError("tabulated k grid must be strictly increasing")
    if not (np.all(np.isfinite(k)) and np.all(np.isfinite(values))):
        raise ParameterError("tabulated profile contains non-finite entries")
    a, b = values[:-1], values[1:]
    # exact norm of a piecewise-linear complex function
    seg = np.abs(a) ** 2 + (a * np.conj(b)).real + np.abs(b) ** 2
    norm2 = float(np.sum(np.diff(k) * seg) / 3.0)
    if norm2 <= 0.0:
        raise ParameterError("tabulated profile has zero norm")
    values = values / math.sqrt(norm2)
    intensity = np.abs(values) ** 2
    above = k[intensity >= 0.5 * intensity.max()]
    sigma = float(above[-1] - above[0]) if above.size > 1 else float(k[1] - k[0])
    if carrier_offset is None:
        carrier_offset = 0.5 * (k[0] + k[-1])
    k.setflags(write=False)
    values.setflags(write=False)
    return SpectralProfile(Shape.TABULATED, sigma, float(carrier_offset),
                           table_k=k, table_values=values)


def amplitude(profile, k):
    """Evaluate xi(k); accepts scalars or arrays."""
    k = np.asarray(k, dtype=float)
    x = k - profile.carrier_offset
    shape = profile.shape
    if shape is Shape.GAUSSIAN:
        sp = gaussian_sigma_prime(profile.sigma)
        out = (math.pi * sp * sp) ** -0.25 * np.exp(-x * x / (2.0 * sp * sp))
        out = out.astype(complex)
    elif shape is Shape.LORENTZIAN:
        c = math.sqrt(profile.sigma / (2.0 * math.pi))
        half = 0.5 * profile.sigma
        if profile.lorentzian_convention is LorentzianConvention.POLE:
            out = c / (x + 1j * half)
        else:
            out = (c / np.sqrt(x * x + half * half)).astype(complex)
    elif shape is Shape.SECH:
        k0 = sech_k0(profile.sigma)
        # 1/cosh written via exp to avoid overflow far in the tails
        ax = np.abs(x) / k0
        e = np.exp(-ax)
        out = ((2.0 * k0) ** -0.5 * 2.0 * e / (1.0 + e * e)).astype(complex)
    else:
        tk, tv = profile.table_k, profile.table_values
        # table momenta are absolute; carrier_offset only centres the window
        re = np.interp(k, tk, tv.real, left=0.0, right=0.0)
        im = np.interp(k, tk, tv.imag, left=0.0, right=0.0)
        out = re + 1j * im
    return out[()] if out.ndim == 0 else out
