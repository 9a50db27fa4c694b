"""Numerical checks of the characteristic-function estimates behind the local CLT.

A centred spin with parameter m (up-probability ``(1 + tanh m)/2``, shifted
by ``mbar = tanh m``) has characteristic function

    phi(u) = exp(-i u mbar) (cos u + i mbar sin u),   |phi(u)|^2 = 1 - (1 - mbar^2) sin^2 u.

The Gaussian-type bound ``|phi(u)| <= exp(-(1 - mbar^2) u^2 / 4)`` holds for
every m exactly when ``sin^2 u >= u^2 / 2`` (the bound minus the modulus is
convex in ``1 - mbar^2`` and vanishes at 0), i.e. for ``|u| <= U_STAR``
with U_STAR ~ 1.3916. Beyond it the bound fails for m large enough, so the
scan window is ``|u| <= GAUSSIAN_BOUND_U_MAX`` rather than the full ``pi/2``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
import numpy as np
from scipy.optimize import brentq

from . import csvio
from .exactdist import PmfTable, charfn, lattice_spacing
from .quadrature import gauss_legendre, shell_boxes


def _u_star() -> float:
    return brentq(lambda u: math.sin(u) ** 2 - u * u / 2, 1.0, math.pi / 2, xtol=1e-15)


U_STAR = _u_star()
GAUSSIAN_BOUND_U_MAX = 1.39
GAUSSIAN_BOUND_M_MAX = 3.0


@dataclass(frozen=True)
class RademacherParam:
    m: float

    @property
    def m_bar(self) -> float:
        return math.tanh(self.m)


@dataclass(frozen=True)
class SplitParams:
    delta: float
    tau: float

    def __post_init__(self):
        if not 0 < self.delta < math.pi / 2:
            raise ValueError("delta must lie in (0, pi/2)")
        if not 0 < self.tau < 1:
            raise ValueError("tau must lie in (0, 1)")


def rademacher_charfn(p: RademacherParam, u):
    mb = p.m_bar
    u = np.asarray(u, dtype=float)
    val = np.exp(-1j * u * mb) * (np.cos(u) + 1j * mb * np.sin(u))
    return complex(val) if val.ndim == 0 else val


def rademacher_modulus(m_bar, u):
    return np.hypot(np.cos(u), m_bar * np.sin(u))


def gaussian_bound(m_bar, u):
    return np.exp(-(1.0 - m_bar * m_bar) * u * u / 4.0)


def gaussian_bound_margin(p: RademacherParam, u):
    """``exp(-(1 - mbar^2) u^2/4) - |phi(u)|``; non-negative where the bound holds."""
    mb = p.m_bar
    val = gaussian_bound(mb, np.asarray(u, dtype=float)) - rademacher_modulus(mb, np.asarray(u, dtype=float))
    return float(val) if np.ndim(val) == 0 else val


def bound_scan(m_max: float = GAUSSIAN_BOUND_M_MAX, u_max: float = GAUSSIAN_BOUND_U_MAX,
               m_points: int = 100, u_points: int = 100) -> np.ndarray:
    """Rows ``(m, u, modulus, bound, margin)`` over ``[-m_max, m_max] x [-u_max, u_max]``."""
    m = np.linspace(-m_max, m_max, m_points)
    u = np.linspace(-u_max, u_max, u_points)
    M, U = np.meshgrid(m, u, indexing="ij")
    MB = np.tanh(M)
    mod = rademacher_modulus(MB, U)
    bnd = gaussian_bound(MB, U)
    return np.column_stack([M.ravel(), U.ravel(), mod.ravel(), bnd.ravel(), (bnd - mod).ravel()])


def bound_scan_csv(rows: np.ndarray) -> str:
    return csvio.to_string(["m", "u", "charfn_modulus", "bound", "margin"], rows)


def theta(p: RademacherParam, delta: float) -> float:
    """Largest modulus of the centred spin charfn over ``delta <= |u| <= pi/2``.

    The modulus decreases in ``sin^2 u``, so the maximum sits at ``|u| = delta``.
    """
    if not 0 < delta <= math.pi / 2:
        raise ValueError("delta must lie in (0, pi/2]")
    mb = p.m_bar
    return math.sqrt(1.0 - (1.0 - mb * mb) * math.sin(delta) ** 2)


def s_bound(tau: float, delta: float) -> float:
    """Sup of theta over ``m in [-tau, tau]``, attained at ``|m| = tau``.

    tau bounds m itself (not tanh m).
    """
    if not 0 < tau < 1:
        raise ValueError("tau must lie in (0, 1)")
    return theta(RademacherParam(tau), delta)


def periodicity_phase(groups, k) -> int:
    """Sign picked up by the charfn under a shift of ``2 pi k / w``.

    The scaled sums live on ``sqrt(n_l) + w_l Z``; the offset is a whole
    number of spacings only for even n_l, so in general
    ``phi(t + 2 pi k/w) = (-1)^(sum_l k_l n_l) phi(t)``.
    """
    return -1 if sum(int(kl) * nl for kl, nl in zip(np.atleast_1d(k), groups.sizes)) % 2 else 1


def periodicity_residual(table: PmfTable, t, k, twisted: bool = False) -> float:
    """``|phi(t + 2 pi k / w) - phi(t)|`` with lattice spacings ``w_l = 2/sqrt(n_l)``.

    With ``twisted=True`` the shifted value is compared against
    ``periodicity_phase * phi(t)``, the identity that holds for every parity.
    """
    t = np.asarray(t, dtype=float)
    shift = 2 * math.pi * np.asarray(k, dtype=float) / lattice_spacing(table.groups)
    base = charfn(table, t)
    if twisted:
        base *= periodicity_phase(table.groups, k)
    return abs(charfn(table, t + shift) - base)


def bn_integral_diagnostic(spec, table: PmfTable, split: SplitParams,
                           points_per_unit: float = 32.0) -> float:
    """Integral of ``|phi_{S^n}|`` over the peripheral region of the inversion box.

    The region is ``prod[-pi sqrt(n_l)/2, pi sqrt(n_l)/2]`` minus
    ``prod[-delta sqrt(n_l), delta sqrt(n_l)]``; each of the 3^d - 1 tiles
    gets a composite 8-point Gauss-Legendre rule with about
    ``points_per_unit`` nodes per unit of ``t/sqrt(n_l)``, so the node count
    per axis grows like sqrt(n_l).
    """
    if spec.groups.sizes != table.groups.sizes:
        raise ValueError("table does not belong to spec")
    root = np.sqrt(np.asarray(spec.groups.sizes, dtype=float))
    inner = split.delta * root
    outer = 0.5 * math.pi * root
    total = 0.0
    for box in shell_boxes(inner, outer):
        rules = [gauss_legendre(a, b, 8 * r / points_per_unit) for (a, b), r in zip(box, root)]
        xs = np.meshgrid(*(r[0] for r in rules), indexing="ij")
        ws = np.meshgrid(*(r[1] for r in rules), indexing="ij")
        T = np.stack([g.ravel() for g in xs], axis=1)
        W = np.prod(np.stack([g.ravel() for g in ws], axis=1), axis=1)
        total += float(np.sum(W * np.abs(charfn(table, T))))
    return total
