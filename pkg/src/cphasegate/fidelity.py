"""State fidelity for a logical input and the worst case over all inputs.

For a product input ``(alpha|0_s> + beta|1_s>)(zeta|0_c> + vartheta|1_c>)``
and lossless scattering the outputs are pure and

    F_s = | a z + O1 (a (1 - z) + (1 - a) z) + T (1 - a)(1 - z) |,

with ``a = |alpha|^2`` and ``z = |zeta|^2``.  Only these two weights enter,
so the gate fidelity is a minimum over the unit square.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import ContractError, ParameterError
from .overlaps import GateOverlaps
from .search import pattern_search

# a diagonal (a = z) minimizer is preferred when it is this close to the best
SYMMETRIC_TIE_TOL = 1e-7
_GRID_TIE_TOL = 1e-12


@dataclass(frozen=True)
class LogicalInputWeights:
    a: float
    z: float

    def __post_init__(self):
        for name in ("a", "z"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ParameterError(f"{name} must lie in [0, 1], got {v}")

    def to_dict(self):
        return asdict(self)


@dataclass(frozen=True)
class FidelityResult:
    F: float
    argmin: LogicalInputWeights
    overlaps: GateOverlaps
    solver: dict = field(default_factory=dict)

    def to_dict(self):
        return {"F": self.F, "argmin": self.argmin.to_dict(),
                "overlaps": self.overlaps.to_dict(), "solver": self.solver}


def state_fidelity(O1, T, w):
    """Fidelity of the gate output for input weights ``w``.

    ``w`` is a :class:`LogicalInputWeights` or an ``(a, z)`` pair; the pair
    may hold arrays, in which case a map is returned.
    """
    if isinstance(w, LogicalInputWeights):
        a, z = w.a, w.z
    else:
        a, z = w
    a = np.asarray(a, dtype=float)
    z = np.asarray(z, dtype=float)
    val = np.abs(a * z + O1 * (a * (1 - z) + (1 - a) * z) + T * (1 - a) * (1 - z))
    return float(val) if val.ndim == 0 else val


def state_fidelity_amplitudes(O1, T, alpha, beta, zeta, vartheta):
    """``|<Psi| U^dag T |Psi>|`` from complex input coefficients.

    The ideal and actual outputs of different logical inputs are orthogonal
    (different modes), so the overlap matrix is ``diag(1, O1, O1, T)`` in
    the basis ``|00>, |01>, |10>, |11>``.
    """
    c = np.array([alpha * zeta, alpha * vartheta, beta * zeta, beta * vartheta], dtype=complex)
    c = c / np.linalg.norm(c)
    m = np.array([1.0, O1, O1, T], dtype=complex)
    return float(abs(np.sum(np.abs(c) ** 2 * m)))


def state_fidelity_map(O1, T, points=101):
    """``(a_axis, z_axis, F[a, z])`` on a uniform grid of the unit square."""
    ax = np.linspace(0.0, 1.0, points)
    A, Z = np.meshgrid(ax, ax, indexing="ij")
    return ax, ax, state_fidelity(O1, T, (A, Z))


def _first_min(values, tol):
    """Index of the first entry within ``tol`` of the minimum (C order)."""
    flat = np.ravel(values)
    return int(np.flatnonzero(flat <= flat.min() + tol)[0])


def gate_fidelity(overlaps, grid_points=101, min_step=1e-9):
    """Worst-case state fidelity over all product logical inputs.

    A coarse grid of the unit square locates the basin; compass search with
    step halving refines it.  The diagonal ``a = z`` is searched the same way
    and wins whenever it reaches the global minimum to within
    ``SYMMETRIC_TIE_TOL``.  Remaining ties go to the smallest ``(a, z)``.
    """
    if not isinstance(overlaps, GateOverlaps):
        O1, T = overlaps
        overlaps = GateOverlaps(float("nan"), float("nan"), complex(O1), complex(T))
    if not overlaps.emitter.lossless:
        raise ContractError(
            "gate fidelity assumes pure output states; with gamma_loss > 0 photons "
            "leave the waveguide and the pure-state formula no longer applies")
    O1, T = overlaps.O1, overlaps.T

    def f(x):
        return state_fidelity(O1, T, (x[0], x[1]))

    ax, _, fmap = state_fidelity_map(O1, T, grid_points)
    h = 1.0 / (grid_points - 1)
    i, j = np.unravel_index(_first_min(fmap, _GRID_TIE_TOL), fmap.shape)
    full = pattern_search(f, [ax[i], ax[j]], h, [(0, 1), (0, 1)], min_step,
                          fx0=float(fmap[i, j]))

    diag_vals = np.diagonal(fmap)
    d = _first_min(diag_vals, _GRID_TIE_TOL)
    diag = pattern_search(lambda x: state_fidelity(O1, T, (x[0], x[0])), [ax[d]], h,
                          [(0, 1)], min_step, fx0=float(diag_vals[d]))

    if diag.fx <= full.fx + SYMMETRIC_TIE_TOL:
        F, a, z = diag.fx, diag.x[0], diag.x[0]
    else:
        F, (a, z) = full.fx, full.x
    solver = {"grid_points": grid_points, "min_step": min_step,
              "refinement_evaluations": full.evaluations + diag.evaluations,
              "symmetric_tie_tol": SYMMETRIC_TIE_TOL}
    return FidelityResult(float(F), LogicalInputWeights(float(a), float(z)), overlaps, solver)
