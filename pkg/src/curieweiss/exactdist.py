"""Exact finite-n law of the group magnetizations and local CLT diagnostics.

``exact_pmf`` enumerates the ``prod(n_l + 1)`` magnetization states; the
independent ``brute_force_pmf`` sums the Gibbs weights of all 2^n spin
configurations and is only used to check it. On top of an exact table this
module computes moments, the characteristic function of the scaled vector
``S^n = (S_l / sqrt(n_l))_l``, lattice inversion by quadrature, and the
sup-distance between the rescaled pmf and the limiting Gaussian density.

Accumulation of probabilities is in log space. The normalizer is computed
once over the whole table with ``math.fsum`` (correctly rounded), so results
do not depend on how the weight evaluation was split into chunks.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import csvio
from .linalg import cholesky, quad_form_chol
from .model import (
    GroupSizes,
    InvalidStateError,
    MagnetizationState,
    ModelSpec,
    log_binomial_row,
    state_array,
    state_chunks,
    state_index,
)
from .regime import ParameterPoint, empirical_alpha, limit_covariance

DEFAULT_MAX_STATES = 10**8
BRUTE_FORCE_MAX_N = 24
GAUSS_TAIL = 1e-16


class ResourceLimitError(RuntimeError):
    pass


@dataclass(eq=False)
class PmfTable:
    """Probability table over the magnetization grid, in lexicographic state order.

    ``log_probs[i]`` is the natural log of the probability of the i-th state
    of :func:`curieweiss.model.enumerate_states`; ``-inf`` marks zero
    probability (only possible for empirical tables).
    """

    groups: GroupSizes
    log_probs: np.ndarray
    log_Z: float = 0.0
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.log_probs = np.asarray(self.log_probs, dtype=float)
        if self.log_probs.shape != (self.groups.num_states,):
            raise ValueError(f"expected {self.groups.num_states} entries, got {self.log_probs.shape}")

    @property
    def probs(self) -> np.ndarray:
        return np.exp(self.log_probs)

    def prob(self, state: MagnetizationState) -> float:
        return float(np.exp(self.log_probs[state_index(self.groups, state)]))

    def states(self) -> np.ndarray:
        return state_array(self.groups)

    def points(self) -> np.ndarray:
        """Scaled lattice points ``s_l / sqrt(n_l)`` of every state, shape (N, d)."""
        return self.states() / np.sqrt(np.asarray(self.groups.sizes, dtype=float))

    def grid(self) -> np.ndarray:
        """Probabilities reshaped to the ``(n_1+1, ..., n_d+1)`` state grid."""
        return self.probs.reshape(self.groups.shape)

    def to_csv(self) -> str:
        d = self.groups.d
        header = [f"s_{i + 1}" for i in range(d)] + ["log_prob"]
        comments = [" ".join(f"{k}={v}" for k, v in self.meta.items())] if self.meta else []
        rows = ([*map(int, s), lp] for s, lp in zip(self.states(), self.log_probs))
        return csvio.to_string(header, rows, comments)


@dataclass(frozen=True)
class LlctReport:
    n: int
    sup_error: float
    argmax_point: tuple[float, ...]
    cov_error: float

    @property
    def d(self) -> int:
        return len(self.argmax_point)

    def row(self) -> list:
        return [self.n, self.d, self.sup_error, self.cov_error, *self.argmax_point]


def lclt_csv(reports: Sequence[LlctReport]) -> str:
    d = reports[0].d if reports else 1
    header = ["n", "d", "sup_error", "cov_error"] + [f"argmax_{i + 1}" for i in range(d)]
    return csvio.to_string(header, (r.row() for r in reports))


def logsumexp(a: np.ndarray) -> float:
    a = np.asarray(a, dtype=float).ravel()
    m = float(np.max(a)) if a.size else -math.inf
    if not math.isfinite(m):
        return m
    return m + math.log(math.fsum(np.exp(a - m)))


def _chunk_log_weights(spec: ModelSpec, rows: list[np.ndarray], index: range) -> np.ndarray:
    S = state_array(spec.groups, index)
    sizes = np.asarray(spec.groups.sizes)
    counts = (S + sizes) // 2
    lw = rows[0][counts[:, 0]].copy()
    for l in range(1, spec.d):
        lw += rows[l][counts[:, l]]
    Sf = S.astype(float)
    if spec.coupling.is_homogeneous:
        tot = Sf.sum(axis=1)
        q = spec.coupling.beta * (tot * tot)
    else:
        J = spec.coupling.matrix
        q = np.zeros(len(S))
        for a in range(spec.d):
            for b in range(spec.d):
                q += J[a, b] * (Sf[:, a] * Sf[:, b])
    return lw + q / (2 * spec.n)


def exact_pmf(spec: ModelSpec, max_states: int = DEFAULT_MAX_STATES, threads: int = 1,
              chunks: int | None = None) -> PmfTable:
    """Exact law of the group sums by enumeration of the magnetization grid."""
    N = spec.groups.num_states
    if N > max_states:
        raise ResourceLimitError(f"{N} states exceed the cap of {max_states}")
    rows = [log_binomial_row(k) for k in spec.groups.sizes]
    if chunks is None:
        chunks = max(threads, N // 2**20 + 1)
    pieces = state_chunks(spec.groups, chunks)
    if threads > 1 and len(pieces) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(lambda r: _chunk_log_weights(spec, rows, r), pieces))
    else:
        parts = [_chunk_log_weights(spec, rows, r) for r in pieces]
    lw = np.concatenate(parts)
    log_Z = logsumexp(lw)
    return PmfTable(spec.groups, lw - log_Z, log_Z)


def brute_force_pmf(spec: ModelSpec, max_n: int = BRUTE_FORCE_MAX_N) -> PmfTable:
    """Reference law obtained by summing exp(-H) over all 2^n spin configurations.

    The energy of each configuration is the literal double sum over spin
    pairs, independent of the group-sum reduction used by :func:`exact_pmf`.
    """
    n = spec.n
    if n > max_n:
        raise ResourceLimitError(f"brute force limited to n <= {max_n}, got {n}")
    sizes = spec.groups.sizes
    group_of = np.repeat(np.arange(spec.d), sizes)
    K = spec.coupling.matrix[np.ix_(group_of, group_of)]
    bits = np.arange(n, dtype=np.int64)
    offsets = np.concatenate([[0], np.cumsum(sizes)])
    total = 2**n
    step = min(total, 2**16)

    log_w = np.empty(total)
    flat = np.empty(total, dtype=np.int64)
    for lo in range(0, total, step):
        cfg = np.arange(lo, min(lo + step, total), dtype=np.int64)
        X = (((cfg[:, None] >> bits) & 1) * 2 - 1).astype(float)
        log_w[lo:lo + len(cfg)] = np.einsum("ci,ij,cj->c", X, K, X) / (2 * n)
        ups = [((X[:, offsets[l]:offsets[l + 1]] > 0).sum(axis=1)) for l in range(spec.d)]
        flat[lo:lo + len(cfg)] = np.ravel_multi_index(ups, spec.groups.shape)

    m = log_w.max()
    w = np.exp(log_w - m)
    mass = np.bincount(flat, weights=w, minlength=spec.groups.num_states)
    Z = mass.sum()
    with np.errstate(divide="ignore"):
        log_probs = np.log(mass / Z)
    return PmfTable(spec.groups, log_probs, m + math.log(Z))


def moments(table: PmfTable) -> tuple[np.ndarray, np.ndarray]:
    """Mean vector and covariance matrix of the scaled vector under the table."""
    X = table.points()
    p = table.probs
    mean = np.array([math.fsum(p * X[:, i]) for i in range(X.shape[1])])
    D = X - mean
    cov = np.array([[math.fsum(p * D[:, i] * D[:, j]) for j in range(X.shape[1])]
                    for i in range(X.shape[1])])
    return mean, 0.5 * (cov + cov.T)


def _padded_axes(groups: GroupSizes, radius: float) -> list[np.ndarray]:
    axes = []
    for k in groups.sizes:
        extra = max(0, math.ceil((radius * math.sqrt(k) - k) / 2))
        smax = k + 2 * extra
        axes.append(np.arange(-smax, smax + 1, 2))
    return axes


def local_clt_error(table: PmfTable, C) -> LlctReport:
    """Sup over the lattice of ``|prod(sqrt(n_l))/2^d * P(S^n = x) - phi_C(x)|``.

    The scan covers the support and every lattice point with
    ``max_l |x_l| <= R``, where R is chosen so that ``phi_C < 1e-16`` outside;
    off the support the pmf is zero and the error is the Gaussian density.
    """
    groups = table.groups
    d = groups.d
    C = np.atleast_2d(np.asarray(C, dtype=float))
    if C.shape != (d, d):
        raise ValueError(f"covariance shape {C.shape} does not match d={d}")
    L = cholesky(C)
    log_norm = -0.5 * d * math.log(2 * math.pi) - float(np.sum(np.log(np.diag(L))))
    lam_max = float(np.max(np.linalg.eigvalsh(C)))
    radius = math.sqrt(2 * lam_max * max(0.0, log_norm - math.log(GAUSS_TAIL)))

    sizes = np.asarray(groups.sizes, dtype=float)
    axes = _padded_axes(groups, radius)
    ext_shape = tuple(len(a) for a in axes)
    P = np.zeros(ext_shape)
    inner = tuple(slice((len(a) - (k + 1)) // 2, (len(a) - (k + 1)) // 2 + k + 1)
                  for a, k in zip(axes, groups.sizes))
    P[inner] = table.grid()
    scale = float(np.prod(np.sqrt(sizes))) / 2**d

    xs = [a / math.sqrt(k) for a, k in zip(axes, groups.sizes)]
    best, best_idx = -1.0, None
    # slabs along the first axis keep memory at one (d-1)-dimensional slice
    rest = np.stack([g.ravel() for g in np.meshgrid(*xs[1:], indexing="ij")], axis=1) \
        if d > 1 else np.zeros((1, 0))
    for i, x0 in enumerate(xs[0]):
        X = np.column_stack([np.full(len(rest), x0), rest])
        phi = np.exp(log_norm - 0.5 * quad_form_chol(L, X))
        err = np.abs(scale * P[i].ravel() - phi)
        j = int(np.argmax(err))
        if err[j] > best:
            best, best_idx = float(err[j]), (i, j)
    i, j = best_idx
    argmax = (float(xs[0][i]),) + tuple(float(v) for v in rest[j])

    _, cov = moments(table)
    return LlctReport(groups.total, best, argmax, float(np.max(np.abs(cov - C))))


def charfn(table: PmfTable, t):
    """``E exp(i t . S^n)`` at a d-vector t, or row-wise for an (M, d) array."""
    d = table.groups.d
    T = np.asarray(t, dtype=float)
    single = T.ndim <= 1
    T = T.reshape(-1, d)
    p = table.probs
    keep = p > 0
    X, p = table.points()[keep], p[keep]
    out = np.empty(len(T), dtype=complex)
    block = max(1, 2**22 // max(1, len(p)))
    for lo in range(0, len(T), block):
        phase = X @ T[lo:lo + block].T
        out[lo:lo + block] = p @ np.cos(phase) + 1j * (p @ np.sin(phase))
    return complex(out[0]) if single else out


def lattice_spacing(groups: GroupSizes) -> np.ndarray:
    """Spacing ``w_l = 2/sqrt(n_l)`` of the lattice in each coordinate."""
    return 2.0 / np.sqrt(np.asarray(groups.sizes, dtype=float))


def lattice_state(groups: GroupSizes, x, tol: float = 1e-9) -> MagnetizationState:
    """Group sums of the lattice point x; raises InvalidStateError if x is off the lattice."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if x.shape != (groups.d,):
        raise InvalidStateError(f"point has {x.size} coordinates, expected {groups.d}")
    s = x * np.sqrt(np.asarray(groups.sizes, dtype=float))
    r = np.rint(s)
    if np.any(np.abs(s - r) > tol * np.maximum(1.0, np.abs(s))) or np.any(
        (r.astype(np.int64) - np.asarray(groups.sizes)) % 2
    ):
        raise InvalidStateError(f"{x.tolist()} is not on the lattice")
    return MagnetizationState(tuple(int(v) for v in r))


def inversion_check(table: PmfTable, x, quadrature_points: int = 256) -> float:
    """Recover ``P(S^n = x)`` from the characteristic function by quadrature.

    Integrates ``prod(w)/(2 pi)^d * exp(-i t.x) phi(t)`` over the period box
    ``prod [-pi/w_l, pi/w_l]`` with the composite trapezoid rule. The
    integrand is a periodic trigonometric polynomial, so the rule is exact
    (up to rounding) once ``quadrature_points > n_l + 1`` on each axis.
    The point may lie outside the support, in which case the result is ~0.
    """
    groups = table.groups
    lattice_state_ = lattice_state(groups, x)
    if quadrature_points < 64:
        raise ValueError("need at least 64 quadrature points per axis")
    x = np.asarray(lattice_state_.sums, dtype=float) / np.sqrt(np.asarray(groups.sizes, dtype=float))
    w = lattice_spacing(groups)
    Q = int(quadrature_points)
    # periodic trapezoid: Q equally spaced nodes, endpoint dropped
    nodes = [(-math.pi + 2 * math.pi * np.arange(Q) / Q) / wl for wl in w]
    T = np.stack([g.ravel() for g in np.meshgrid(*nodes, indexing="ij")], axis=1)
    phi = charfn(table, T)
    val = np.sum(np.exp(-1j * (T @ x)) * phi) / Q**groups.d
    return float(val.real)


def balanced_sizes(alpha: Sequence[float], n: int) -> tuple[int, ...]:
    """Group sizes ``round(alpha_l * n)`` adjusted by +-1 so that they sum to n.

    Adjustments go to the groups with the largest rounding residue; every
    group keeps at least one spin.
    """
    alpha = np.asarray(alpha, dtype=float)
    raw = alpha * n
    sizes = np.maximum(np.rint(raw).astype(int), 1)
    while sizes.sum() != n:
        resid = raw - sizes
        if sizes.sum() < n:
            sizes[int(np.argmax(resid))] += 1
        else:
            cand = np.where(sizes > 1, resid, np.inf)
            sizes[int(np.argmin(cand))] -= 1
    return tuple(int(k) for k in sizes)


def lclt_sweep(point: ParameterPoint, ns: Sequence[int], threads: int = 1) -> list[LlctReport]:
    """Local CLT error for each total size in ``ns``.

    The comparison covariance uses the finite-n proportions ``n_l / n`` rather
    than ``point.alpha``, which only fixes how the groups are sized.
    """
    if list(ns) != sorted(set(ns)):
        raise ValueError("n sweep must be strictly increasing")

    def one(n: int) -> LlctReport:
        sizes = balanced_sizes(point.alpha, n)
        spec = ModelSpec(GroupSizes(sizes), point.coupling)
        C = limit_covariance(ParameterPoint(tuple(empirical_alpha(spec.groups)), point.coupling)).C
        return local_clt_error(exact_pmf(spec), C)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(one, ns))
    return [one(n) for n in ns]


def empirical_pmf(groups: GroupSizes, sums: np.ndarray, meta: dict | None = None) -> PmfTable:
    """Frequency table of observed group sums, given as a (count, d) array."""
    sums = np.asarray(sums, dtype=np.int64).reshape(-1, groups.d)
    if len(sums) == 0:
        raise ValueError("no samples")
    counts = (sums + np.asarray(groups.sizes)) // 2
    flat = np.ravel_multi_index(counts.T, groups.shape)
    freq = np.bincount(flat, minlength=groups.num_states) / len(sums)
    with np.errstate(divide="ignore"):
        return PmfTable(groups, np.log(freq), 0.0, dict(meta or {}))
