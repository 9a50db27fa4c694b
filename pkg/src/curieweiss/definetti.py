"""De Finetti mixture representation of the multi-group Curie-Weiss law.

The Gibbs measure is a mixture, over a mean-field vector m, of product
measures in which every spin of group l is +1 with probability
``(1 + tanh m_l)/2``. The mixing density is

    f(m) ~ exp(-n (m^T J^{-1} m / 2 - sum_l (n_l/n) log cosh m_l)).

A homogeneous coupling (all entries beta) makes the Hamiltonian a function of
the total sum only, so a single scalar m shared by all groups is used with
``f(m) ~ exp(-n (m^2/(2 beta) - log cosh m))``; that also sidesteps the
singular all-beta matrix. ``beta = 0`` is a point mass at m = 0.

Integrals against the mixing measure use the composite trapezoid rule on an
automatically sized box ``[-B, B]^k``.
"""

from __future__ import annotations

import dataclasses
import math
import string
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import csvio
from .exactdist import PmfTable, logsumexp
from .linalg import inverse
from .model import MagnetizationState, ModelSpec, log_binomial_row
from .quadrature import gauss_legendre, log_integral, shell_boxes, trapezoid

BOUNDARY_DECAY = 1e-18
MAX_BOX = 50.0
DEFAULT_POINTS = {1: 401, 2: 201, 3: 81}


class DivergenceError(RuntimeError):
    """The mixing density does not decay inside the largest allowed box."""


def log_cosh(m):
    a = np.abs(m)
    return a + np.log1p(np.exp(-2.0 * a)) - math.log(2.0)


def _as_n(n_or_spec) -> int:
    return n_or_spec.n if isinstance(n_or_spec, ModelSpec) else int(n_or_spec)


def log_density_unnorm(spec: ModelSpec, m):
    """``-n (m^T J^{-1} m / 2 - sum_l (n_l/n) log cosh m_l)`` for a d-vector or (M, d) rows."""
    Jinv = inverse(spec.coupling.matrix)
    M = np.asarray(m, dtype=float)
    single = M.ndim <= 1
    M = M.reshape(-1, spec.d)
    sizes = np.asarray(spec.groups.sizes, dtype=float)
    quad = np.einsum("ij,jk,ik->i", M, Jinv, M)
    val = -0.5 * spec.n * quad + log_cosh(M) @ sizes
    return float(val[0]) if single else val


def log_density_unnorm_1d(beta: float, n, m):
    """``-n (m^2/(2 beta) - log cosh m)``; ``n`` is a total size or a ModelSpec."""
    if not beta > 0:
        raise ValueError("beta must be positive (beta = 0 is the point-mass case)")
    n = _as_n(n)
    m = np.asarray(m, dtype=float)
    val = -n * (m * m / (2 * beta) - log_cosh(m))
    return float(val) if val.ndim == 0 else val


def substitution_density_1d(beta: float, n: int, t):
    """Log of the single-group mixing density after the substitution t = tanh m.

    Equals ``log_density_unnorm_1d(beta, n, artanh t) - log(1 - t^2)``, the
    last term being the Jacobian dm/dt = 1/(1 - t^2).
    """
    if not beta > 0:
        raise ValueError("beta must be positive")
    t = np.asarray(t, dtype=float)
    if np.any(np.abs(t) >= 1):
        raise ValueError("substitution variable must satisfy |t| < 1")
    one_minus = np.log1p(-t * t)
    val = -n * (np.arctanh(t) ** 2 / (2 * beta) + 0.5 * one_minus) - one_minus
    return float(val) if val.ndim == 0 else val


@dataclass(frozen=True, eq=False)
class DeFinettiDensity:
    """Mixing density for one model, discretized on ``points_per_axis`` nodes per axis.

    ``dimension`` is 1 for homogeneous couplings and d otherwise. ``box`` and
    ``log_norm`` are filled in by :func:`normalize`.
    """

    spec: ModelSpec
    dimension: int
    points_per_axis: int
    box: float | None = None
    log_norm: float | None = None

    @property
    def point_mass(self) -> bool:
        return self.spec.coupling.is_homogeneous and self.spec.coupling.beta == 0.0

    @property
    def is_normalized(self) -> bool:
        return self.log_norm is not None

    def log_f(self, M: np.ndarray) -> np.ndarray:
        """Unnormalized log density at the rows of an (K, dimension) array."""
        M = np.asarray(M, dtype=float).reshape(-1, self.dimension)
        if self.spec.coupling.is_homogeneous:
            return log_density_unnorm_1d(self.spec.coupling.beta, self.spec.n, M[:, 0])
        return log_density_unnorm(self.spec, M)

    def rule(self) -> tuple[np.ndarray, np.ndarray]:
        return trapezoid(-self.box, self.box, self.points_per_axis)

    def grid(self) -> tuple[np.ndarray, np.ndarray]:
        """Tensor grid nodes (K, dimension) and log trapezoid weights (K,)."""
        x, w = self.rule()
        xs = np.meshgrid(*([x] * self.dimension), indexing="ij")
        lw = np.meshgrid(*([np.log(w)] * self.dimension), indexing="ij")
        return np.stack([g.ravel() for g in xs], axis=1), sum(g.ravel() for g in lw)

    def log_density(self, M) -> np.ndarray:
        if not self.is_normalized:
            raise ValueError("density is not normalized")
        return self.log_f(M) - self.log_norm


def de_finetti_density(spec: ModelSpec, points_per_axis: int | None = None,
                       box: float | None = None) -> DeFinettiDensity:
    """Normalized mixing density for ``spec``."""
    k = 1 if spec.coupling.is_homogeneous else spec.d
    P = points_per_axis or DEFAULT_POINTS.get(k, 41)
    if P % 2 == 0:
        P += 1
    return normalize(DeFinettiDensity(spec, k, P, box))


def _initial_box(density: DeFinettiDensity) -> float:
    spec = density.spec
    if density.dimension == 1 and spec.coupling.is_homogeneous:
        curv = spec.n * (1.0 / spec.coupling.beta - 1.0)
    else:
        alpha = np.asarray(spec.groups.sizes, dtype=float) / spec.n
        curv = spec.n * float(np.min(np.linalg.eigvalsh(inverse(spec.coupling.matrix) - np.diag(alpha))))
    if curv <= 0:
        return 1.0
    return min(MAX_BOX, 4.0 / math.sqrt(curv))


def _boundary_ok(density: DeFinettiDensity, B: float) -> bool:
    d = dataclasses.replace(density, box=B)
    X, _ = d.grid()
    vals = d.log_f(X).reshape((density.points_per_axis,) * density.dimension)
    peak = float(np.max(vals))
    edge = -math.inf
    for ax in range(density.dimension):
        edge = max(edge, float(np.max(np.take(vals, [0, -1], axis=ax))))
    return edge <= peak + math.log(BOUNDARY_DECAY)


def normalize(density: DeFinettiDensity) -> DeFinettiDensity:
    """Fix the box (growing it until the boundary is negligible) and compute the normalizer."""
    if density.point_mass:
        return dataclasses.replace(density, box=0.0, log_norm=0.0)
    B = density.box or _initial_box(density)
    while not _boundary_ok(density, B):
        B *= 1.25
        if B > MAX_BOX:
            raise DivergenceError(f"mixing density not concentrated within |m| <= {MAX_BOX}; "
                                  "is the model in the high temperature regime?")
    d = dataclasses.replace(density, box=B)
    X, lw = d.grid()
    return dataclasses.replace(d, log_norm=logsumexp(d.log_f(X) + lw))


@dataclass(frozen=True)
class ConcentrationReport:
    delta: float
    tail_mass: float
    n: int


def tail_mass(density: DeFinettiDensity, delta: float) -> ConcentrationReport:
    """Mass of the mixing measure outside ``[-delta, delta]^k``, inside the box.

    The shell is tiled into sub-boxes integrated separately with composite
    Gauss-Legendre rules, so small tails are not lost to cancellation.
    """
    if not density.is_normalized:
        raise ValueError("density is not normalized")
    n = density.spec.n
    if density.point_mass:
        if not delta > 0:
            raise ValueError("delta must be positive")
        return ConcentrationReport(float(delta), 0.0, n)
    B = density.box
    if not 0 < delta < B:
        raise ValueError(f"delta must lie in (0, {B})")
    # panels of four trapezoid cells, eight nodes each
    h = 4 * 2 * B / (density.points_per_axis - 1)
    k = density.dimension
    parts = []
    for box in shell_boxes([delta] * k, [B] * k):
        rules = [gauss_legendre(a, b, h) for a, b in box]
        parts.append(log_integral(density.log_f, rules))
    mass = math.exp(logsumexp(np.array(parts)) - density.log_norm)
    return ConcentrationReport(float(delta), min(1.0, mass), n)


def concentration_slope(reports: Sequence[ConcentrationReport]) -> float:
    """Least-squares slope of log tail mass against n (an estimate of -D)."""
    ns = np.array([r.n for r in reports], dtype=float)
    logs = np.log([r.tail_mass for r in reports])
    return float(np.polyfit(ns, logs, 1)[0])


def _log_rademacher(m: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """``log P(+1)`` and ``log P(-1)`` for the spin law with parameter m."""
    lc = log_cosh(m) + math.log(2.0)
    return m - lc, -m - lc


def _binomial_log_terms(size: int, nodes: np.ndarray) -> np.ndarray:
    """``log C(size,k) + k log p(m) + (size-k) log(1-p(m))``, shape (size+1, len(nodes))."""
    lp, lq = _log_rademacher(nodes)
    k = np.arange(size + 1)[:, None]
    return log_binomial_row(size)[:, None] + k * lp[None, :] + (size - k) * lq[None, :]


def mixture_pmf(spec: ModelSpec, density: DeFinettiDensity) -> PmfTable:
    """Law of the group sums obtained by integrating binomial laws against the mixing measure."""
    if not density.is_normalized:
        raise ValueError("density is not normalized")
    groups = spec.groups
    rows = [log_binomial_row(k) for k in groups.sizes]
    if density.point_mass:
        lp = np.zeros(groups.shape)
        for l, k in enumerate(groups.sizes):
            shape = [1] * groups.d
            shape[l] = k + 1
            lp = lp + (rows[l] - k * math.log(2.0)).reshape(shape)
        return PmfTable(groups, lp.ravel(), 0.0)

    x, w = density.rule()
    P = len(x)
    X, lw = density.grid()
    log_mix = (density.log_f(X) - density.log_norm + lw).reshape((P,) * density.dimension)
    cW = float(np.max(log_mix))
    W = np.exp(log_mix - cW)

    A = [_binomial_log_terms(k, x) for k in groups.sizes]
    shifts = [a.max(axis=1) for a in A]
    E = [np.exp(a - s[:, None]) for a, s in zip(A, shifts)]

    if density.dimension == 1:
        letters = string.ascii_letters[: groups.d]
        expr = "z," + ",".join(f"{c}z" for c in letters) + "->" + letters
        T = np.einsum(expr, W, *E)
    else:
        T = W
        for l in range(groups.d):
            T = np.tensordot(T, E[l], axes=([0], [1]))

    total_shift = np.zeros(groups.shape) + cW
    for l in range(groups.d):
        shape = [1] * groups.d
        shape[l] = groups.sizes[l] + 1
        total_shift = total_shift + shifts[l].reshape(shape)
    with np.errstate(divide="ignore"):
        log_probs = np.log(T) + total_shift
    return PmfTable(groups, log_probs.ravel(), 0.0)


def sample_sums(spec: ModelSpec, density: DeFinettiDensity, rng_seed: int, count: int) -> np.ndarray:
    """``count`` draws of the group sums, shape (count, d).

    m is drawn from the discretized mixing measure (a quadrature cell chosen
    by inverse CDF, then uniform inside the cell), then the up-counts are
    binomial. Randomness comes from numpy's PCG64 seeded with ``rng_seed``.
    """
    if not density.is_normalized:
        raise ValueError("density is not normalized")
    rng = np.random.Generator(np.random.PCG64(rng_seed))
    sizes = np.asarray(spec.groups.sizes)
    if count <= 0:
        return np.zeros((0, spec.d), dtype=np.int64)
    if density.point_mass:
        m = np.zeros((count, 1))
    else:
        x, w = density.rule()
        X, lw = density.grid()
        logp = density.log_f(X) - density.log_norm + lw
        p = np.exp(logp - logp.max())
        cdf = np.cumsum(p)
        cdf /= cdf[-1]
        cell = np.minimum(np.searchsorted(cdf, rng.random(count), side="right"), len(cdf) - 1)
        idx = np.stack(np.unravel_index(cell, (len(x),) * density.dimension), axis=1)
        h = x[1] - x[0]
        lo = np.maximum(x[idx] - h / 2, -density.box)
        hi = np.minimum(x[idx] + h / 2, density.box)
        m = lo + (hi - lo) * rng.random(idx.shape)
    if m.shape[1] == 1:
        m = np.repeat(m, spec.d, axis=1)
    p_up = 0.5 * (1.0 + np.tanh(m))
    ups = rng.binomial(sizes[None, :], p_up)
    return 2 * ups - sizes[None, :]


def sample(spec: ModelSpec, density: DeFinettiDensity, rng_seed: int,
           count: int) -> list[MagnetizationState]:
    return [MagnetizationState(tuple(int(v) for v in row))
            for row in sample_sums(spec, density, rng_seed, count)]


def density_profile_csv(density: DeFinettiDensity) -> str:
    """Grid values of the normalized log density; a point mass is a single row at 0."""
    header = [f"m_{i + 1}" for i in range(density.dimension)] + ["log_density_normalized"]
    if density.point_mass:
        return csvio.to_string(header, [[0.0] * density.dimension + [0.0]])
    X, _ = density.grid()
    vals = density.log_density(X)
    return csvio.to_string(header, ([*x, v] for x, v in zip(X, vals)))


def concentration_csv(reports: Sequence[ConcentrationReport]) -> str:
    return csvio.to_string(["n", "delta", "tail_mass"], ((r.n, r.delta, r.tail_mass) for r in reports))
