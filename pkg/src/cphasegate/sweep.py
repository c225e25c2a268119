"""Parameter sweeps over (sigma, L), optimum search and a result cache.

Each sigma row shares one :class:`~cphasegate.overlaps.OverlapKernel`; L only
enters through ``exp(-ikL)`` so a row costs one g(K) per refinement level.
Rows are independent and may run in worker processes; every row is computed
by the same deterministic code, so the worker count never changes a result.
"""

from __future__ import annotations

import hashlib
import json
import logging
import math
import os
import tempfile
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__
from .errors import ContractError, ConvergenceError, ParameterError
from .fidelity import gate_fidelity, state_fidelity_map
from .overlaps import OverlapKernel
from .pulses import make_profile
from .quadrature import QuadratureSpec
from .scattering import LOSSLESS, EmitterParams
from .search import pattern_search

log = logging.getLogger(__name__)

SWEEP_QUAD = QuadratureSpec(rel_tol=1e-5)
MAX_FLAGGED_FRACTION = 0.01
CACHE_ENV = "CPHASEGATE_CACHE_DIR"


class Quantity(str, Enum):
    ABS_O1 = "abs_O1"
    ABS_T = "abs_T"
    GATE_F = "gate_F"
    STATE_F_MAP = "state_F_map"


def _range(r, name, positive=False):
    lo, hi, n = r
    lo, hi, n = float(lo), float(hi), int(n)
    if n < 2:
        raise ParameterError(f"{name} needs at least 2 points")
    if hi < lo:
        raise ParameterError(f"{name} must be increasing")
    if positive and lo <= 0:
        raise ParameterError(f"{name} must be positive")
    return (lo, hi, n)


@dataclass(frozen=True)
class SweepSpec:
    """What to evaluate and where.

    For ``state_F_map`` the (sigma, L) point is ``point`` and the map covers
    ``map_points`` x ``map_points`` input weights (a, z); the two ranges are
    then ignored.
    """

    quantity: Quantity = Quantity.GATE_F
    shape: str = "gaussian"
    sigma_range: tuple = (0.4, 3.4, 31)
    L_range: tuple = (0.0, 2.4, 49)
    emitter: EmitterParams = LOSSLESS
    quad: QuadratureSpec = SWEEP_QUAD
    lorentzian_convention: str = "pole"
    point: Optional[tuple] = None
    map_points: int = 101

    def __post_init__(self):
        try:
            object.__setattr__(self, "quantity", Quantity(self.quantity))
        except ValueError:
            raise ParameterError(f"unknown quantity {self.quantity!r}") from None
        # validates shape and convention
        make_profile(self.shape, 1.0, lorentzian_convention=self.lorentzian_convention)
        if self.quantity is Quantity.STATE_F_MAP:
            if self.point is None:
                raise ParameterError("state_F_map needs point=(sigma, L)")
            sigma, L = (float(x) for x in self.point)
            if sigma <= 0:
                raise ParameterError("sigma must be positive")
            object.__setattr__(self, "point", (sigma, L))
            if self.map_points < 2:
                raise ParameterError("map_points must be >= 2")
        else:
            object.__setattr__(self, "sigma_range",
                               _range(self.sigma_range, "sigma_range", positive=True))
            object.__setattr__(self, "L_range", _range(self.L_range, "L_range"))
        if self.quantity in (Quantity.GATE_F, Quantity.STATE_F_MAP) and not self.emitter.lossless:
            raise ContractError("fidelity sweeps require gamma_loss = 0 (pure outputs)")

    @property
    def sigmas(self):
        return np.linspace(*self.sigma_range)

    @property
    def Ls(self):
        return np.linspace(*self.L_range)

    def profile(self, sigma):
        return make_profile(self.shape, sigma, lorentzian_convention=self.lorentzian_convention)

    def to_dict(self):
        return {"quantity": self.quantity.value, "shape": self.shape,
                "lorentzian_convention": self.lorentzian_convention,
                "sigma_range": list(self.sigma_range), "L_range": list(self.L_range),
                "point": None if self.point is None else list(self.point),
                "map_points": self.map_points,
                "emitter": self.emitter.to_dict(), "quad": self.quad.to_dict()}

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        d["emitter"] = EmitterParams(**d["emitter"])
        d["quad"] = QuadratureSpec.from_dict(d["quad"])
        d["sigma_range"] = tuple(d["sigma_range"])
        d["L_range"] = tuple(d["L_range"])
        if d.get("point") is not None:
            d["point"] = tuple(d["point"])
        return cls(**d)

    def key(self):
        """Content hash of the spec and the engine version."""
        return content_hash({"kind": "sweep", "spec": self.to_dict()})


def content_hash(payload):
    blob = json.dumps({"engine": __version__, **payload}, sort_keys=True,
                      separators=(",", ":"))
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()


@dataclass(frozen=True)
class SweepResult:
    spec: SweepSpec
    axis_names: tuple
    axes: tuple
    values: np.ndarray = field(repr=False)
    converged: np.ndarray = field(repr=False)
    optimum: dict
    key: str
    engine_version: str = __version__

    @property
    def flagged_fraction(self):
        return float(np.mean(~self.converged))

    def to_dict(self):
        return {"key": self.key, "engine_version": self.engine_version,
                "spec": self.spec.to_dict(), "axis_names": list(self.axis_names),
                "axes": [list(map(float, a)) for a in self.axes],
                "values_re": self.values.real.tolist(), "values_im": self.values.imag.tolist(),
                "converged": self.converged.tolist(), "optimum": self.optimum}

    @classmethod
    def from_dict(cls, d):
        values = np.array(d["values_re"], dtype=float) + 1j * np.array(d["values_im"], dtype=float)
        return cls(SweepSpec.from_dict(d["spec"]), tuple(d["axis_names"]),
                   tuple(np.array(a, dtype=float) for a in d["axes"]), values,
                   np.array(d["converged"], dtype=bool), dict(d["optimum"]), d["key"],
                   d["engine_version"])

    def identical_to(self, other):
        return (self.key == other.key and self.axis_names == other.axis_names
                and all(np.array_equal(a, b) for a, b in zip(self.axes, other.axes))
                and np.array_equal(self.values, other.values, equal_nan=True)
                and np.array_equal(self.converged, other.converged)
                and self.optimum == other.optimum)


def _cell(kernel, quantity, L):
    """(value, converged) for one cell; failures become (nan, False)."""
    try:
        if quantity is Quantity.ABS_O1:
            val, _ = kernel.single(L)
            return complex(val), True
        ov = kernel.overlaps(L)
    except ConvergenceError:
        return complex("nan"), False
    if quantity is Quantity.ABS_T:
        return ov.T, True
    return complex(gate_fidelity(ov).F), True


def _row(spec_dict, sigma):
    spec = SweepSpec.from_dict(spec_dict)
    kernel = OverlapKernel(spec.profile(sigma), spec.emitter, spec.quad)
    cells = [_cell(kernel, spec.quantity, L) for L in spec.Ls]
    return [c[0] for c in cells], [c[1] for c in cells]


def _optimum(values, converged, axes, names, minimize=False):
    score = np.abs(values)
    score = np.where(converged, score, np.nan)
    if np.all(np.isnan(score)):
        return {"value": None, names[0]: None, names[1]: None}
    idx = np.nanargmin(score) if minimize else np.nanargmax(score)
    i, j = np.unravel_index(idx, score.shape)
    return {"value": float(score[i, j]), names[0]: float(axes[0][i]),
            names[1]: float(axes[1][j])}


def run_sweep(spec, workers=1, cache=None):
    """Evaluate ``spec.quantity`` on its grid.

    Cells whose quadrature does not converge are stored as NaN and flagged;
    more than 1% flagged cells raises :class:`ConvergenceError`.
    """
    key = spec.key()
    if cache is not None:
        hit = cache.lookup_sweep(key)
        if hit is not None:
            log.info("cache hit %s", key)
            return hit

    if spec.quantity is Quantity.STATE_F_MAP:
        sigma, L = spec.point
        ov = OverlapKernel(spec.profile(sigma), spec.emitter, spec.quad).overlaps(L)
        a, z, fmap = state_fidelity_map(ov.O1, ov.T, spec.map_points)
        values = fmap.astype(complex)
        converged = np.ones(fmap.shape, dtype=bool)
        names, axes = ("a", "z"), (a, z)
        optimum = _optimum(values, converged, axes, names, minimize=True)
    else:
        sigmas = spec.sigmas
        sd = spec.to_dict()
        if workers > 1:
            with ProcessPoolExecutor(max_workers=workers) as ex:
                rows = list(ex.map(_row, [sd] * len(sigmas), sigmas))
        else:
            rows = [_row(sd, s) for s in sigmas]
        values = np.array([r[0] for r in rows], dtype=complex)
        converged = np.array([r[1] for r in rows], dtype=bool)
        names, axes = ("sigma", "L"), (sigmas, spec.Ls)
        optimum = _optimum(values, converged, axes, names)

    result = SweepResult(spec, names, axes, values, converged, optimum, key)
    if result.flagged_fraction > MAX_FLAGGED_FRACTION:
        raise ConvergenceError(
            f"{int((~converged).sum())} of {converged.size} sweep cells did not converge")
    if cache is not None:
        cache.store(key, result.to_dict())
    return result


@dataclass(frozen=True)
class OptimizeResult:
    value: float
    sigma: float
    L: float
    quantity: Quantity
    coarse: SweepResult = field(repr=False)
    evaluations: int = 0
    overlaps: Optional[object] = field(default=None, repr=False)
    argmin: Optional[object] = None

    @property
    def F_max(self):
        return self.value

    def to_dict(self):
        return {"quantity": self.quantity.value, "value": self.value, "sigma": self.sigma,
                "L": self.L, "evaluations": self.evaluations,
                "coarse_optimum": self.coarse.optimum, "coarse_key": self.coarse.key,
                "overlaps": None if self.overlaps is None else self.overlaps.to_dict(),
                "argmin": None if self.argmin is None else self.argmin.to_dict()}


class _Objective:
    """Cached evaluation of a quantity at (sigma, L), keeping one kernel per sigma."""

    def __init__(self, spec):
        self.spec = spec
        self.kernels = {}
        self.memo = {}

    def kernel(self, sigma):
        if sigma not in self.kernels:
            if len(self.kernels) > 16:
                self.kernels.pop(next(iter(self.kernels)))
            self.kernels[sigma] = OverlapKernel(self.spec.profile(sigma), self.spec.emitter,
                                                self.spec.quad)
        return self.kernels[sigma]

    def detail(self, sigma, L):
        ov = self.kernel(sigma).overlaps(L)
        if self.spec.quantity is Quantity.GATE_F:
            res = gate_fidelity(ov)
            return res.F, ov, res.argmin
        if self.spec.quantity is Quantity.ABS_T:
            return abs(ov.T), ov, None
        return abs(ov.O1), ov, None

    def __call__(self, x):
        sigma, L = float(x[0]), float(x[1])
        if (sigma, L) not in self.memo:
            try:
                self.memo[(sigma, L)] = self.detail(sigma, L)[0]
            except ConvergenceError:
                self.memo[(sigma, L)] = -math.inf
        return self.memo[(sigma, L)]


def optimize(spec, min_step=1e-3, workers=1, cache=None):
    """Maximize ``spec.quantity`` over (sigma, L).

    A coarse sweep over ``spec``'s grid seeds a nested compass search: the
    outer search moves sigma, and for every sigma it visits an inner search
    finds the best L starting from the incumbent's L.  Both start at their
    grid spacing.  The outer search halves down to ``min_step``; the inner
    one goes a thousand times finer, since L steps at fixed sigma reuse the
    kernel and cost little.  Resolving the kink in L where the single- and
    two-photon overlaps cross keeps the outer objective smooth, otherwise
    the outer search stalls on L round-off.  The search stays inside the
    coarse ranges.
    """
    if spec.quantity is Quantity.STATE_F_MAP:
        raise ParameterError("optimize works on sigma-L quantities")
    if not spec.emitter.lossless:
        raise ContractError("optimization of the gate requires gamma_loss = 0")
    okey = content_hash({"kind": "optimize", "spec": spec.to_dict(), "min_step": min_step})
    if cache is not None:
        hit = cache.lookup(okey)
        if hit is not None:
            log.info("cache hit %s", okey)
            return _optimize_from_dict(hit, spec, cache)

    coarse = run_sweep(spec, workers=workers, cache=cache)
    best = coarse.optimum
    if best["value"] is None:
        raise ConvergenceError("no converged cell in the coarse sweep")
    dsigma, dL = np.diff(spec.sigmas)[0], np.diff(spec.Ls)[0]
    obj = _Objective(spec)
    inner = {}
    incumbent = {"L": best["L"]}

    def best_over_L(sigma, L0):
        if sigma not in inner:
            res = pattern_search(lambda x: obj((sigma, x[0])), [L0], dL, [spec.L_range[:2]],
                                 min_step * 1e-3, maximize=True)
            inner[sigma] = (float(res.fx), float(res.x[0]))
        return inner[sigma]

    def outer(x):
        F, L = best_over_L(float(x[0]), incumbent["L"])
        return F

    F0, L0 = best_over_L(best["sigma"], best["L"])
    incumbent["L"] = L0

    def tracked(x):
        F = outer(x)
        # later sigmas start their L search from the best L seen so far
        if F >= max(v[0] for v in inner.values()):
            incumbent["L"] = inner[float(x[0])][1]
        return F

    res = pattern_search(tracked, [best["sigma"]], dsigma, [spec.sigma_range[:2]], min_step,
                         maximize=True, fx0=F0)
    sigma = float(res.x[0])
    L = inner[sigma][1]
    value, ov, argmin = obj.detail(sigma, L)
    out = OptimizeResult(float(value), sigma, L, spec.quantity, coarse,
                         len(obj.memo), ov, argmin)
    if cache is not None:
        cache.store(okey, out.to_dict())
    return out


def _optimize_from_dict(d, spec, cache):
    from .fidelity import LogicalInputWeights
    from .overlaps import GateOverlaps
    coarse = cache.lookup_sweep(d["coarse_key"]) or run_sweep(spec)
    ov = d["overlaps"]
    overlaps = None if ov is None else GateOverlaps(
        ov["sigma"], ov["L"], complex(*ov["O1"]), complex(*ov["T"]),
        EmitterParams(**ov["emitter"]), ov["convergence"])
    argmin = None if d["argmin"] is None else LogicalInputWeights(**d["argmin"])
    return OptimizeResult(d["value"], d["sigma"], d["L"], Quantity(d["quantity"]), coarse,
                          d["evaluations"], overlaps, argmin)


def optimize_fidelity(shape="gaussian", emitter=LOSSLESS, quad=SWEEP_QUAD,
                      sigma_range=(0.4, 3.4, 16), L_range=(0.0, 2.4, 25), min_step=1e-3,
                      lorentzian_convention="pole", workers=1, cache=None):
    """Best worst-case gate fidelity over pulse width and extra path length."""
    if not emitter.lossless:
        raise ContractError("gate fidelity requires gamma_loss = 0 (pure outputs)")
    spec = SweepSpec(Quantity.GATE_F, shape, sigma_range, L_range, emitter, quad,
                     lorentzian_convention)
    return optimize(spec, min_step=min_step, workers=workers, cache=cache)


def scan_L(profile, Ls, emitter=LOSSLESS, quad=SWEEP_QUAD, quantity=Quantity.ABS_O1):
    """Values of ``quantity`` (complex O1 or T, or gate F) along L at fixed sigma.

    Returns ``(values, converged)``; non-converged cells are NaN.
    """
    quantity = Quantity(quantity)
    kernel = OverlapKernel(profile, emitter, quad)
    cells = [_cell(kernel, quantity, float(L)) for L in Ls]
    return (np.array([c[0] for c in cells], dtype=complex),
            np.array([c[1] for c in cells], dtype=bool))


def best_L(profile, L_range, emitter=LOSSLESS, quad=SWEEP_QUAD, quantity=Quantity.ABS_O1,
           min_step=1e-4):
    """L maximizing ``|quantity|`` at fixed sigma: grid scan then 1-D compass search."""
    quantity = Quantity(quantity)
    Ls = np.linspace(*L_range)
    vals, ok = scan_L(profile, Ls, emitter, quad, quantity)
    score = np.where(ok, np.abs(vals), -np.inf)
    i = int(np.argmax(score))
    kernel = OverlapKernel(profile, emitter, quad)

    def f(x):
        v, _ = _cell(kernel, quantity, float(x[0]))
        return abs(v) if not np.isnan(v) else -math.inf

    res = pattern_search(f, [Ls[i]], Ls[1] - Ls[0], [L_range[:2]], min_step,
                         maximize=True, fx0=float(score[i]))
    return float(res.x[0]), float(res.fx)


class ResultCache:
    """Content-addressed JSON files, one per result, named ``<sha256>.json``.

    Writes go to a temporary file in the same directory and are renamed into
    place, so concurrent writers never expose a half-written entry.
    """

    def __init__(self, root=None):
        root = root or os.environ.get(CACHE_ENV) or Path.home() / ".cache" / "cphasegate"
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)

    def path(self, key):
        return self.root / f"{key}.json"

    def store(self, key, payload):
        fd, tmp = tempfile.mkstemp(dir=self.root, prefix=".tmp-", suffix=".json")
        try:
            with os.fdopen(fd, "w", encoding="utf-8") as fp:
                json.dump({"key": key, "engine_version": __version__, "payload": payload},
                          fp, sort_keys=True)
            os.replace(tmp, self.path(key))
        except BaseException:
            if os.path.exists(tmp):
                os.unlink(tmp)
            raise

    def lookup(self, key):
        """Stored payload, or None on a miss or a corrupt entry."""
        path = self.path(key)
        if not path.exists():
            return None
        try:
            with path.open("r", encoding="utf-8") as fp:
                blob = json.load(fp)
            if blob.get("key") != key or blob.get("engine_version") != __version__:
                raise ValueError("key or engine version mismatch")
            return blob["payload"]
        except (ValueError, KeyError, TypeError, AttributeError) as exc:
            log.warning("discarding corrupt cache entry %s (%s)", path.name, exc)
            try:
                path.unlink()
            except OSError:
                pass
            return None

    def lookup_sweep(self, key):
        payload = self.lookup(key)
        if payload is None:
            return None
        try:
            return SweepResult.from_dict(payload)
        except (ValueError, KeyError, TypeError) as exc:
            log.warning("discarding unreadable sweep entry %s (%s)", key, exc)
            self.path(key).unlink(missing_ok=True)
            return None


def with_quad(spec, **changes):
    """Copy of a sweep spec with quadrature fields replaced."""
    return replace(spec, quad=replace(spec.quad, **changes))
