"""Single-spin-flip Metropolis chain for the multi-group Curie-Weiss measure.

Spins within a group are exchangeable, so the chain only tracks the up-counts
``k_l``. One step picks a spin uniformly among all n (group l with
probability n_l/n, then an up spin with probability k_l/n_l), proposes to
flip it, and accepts with probability ``min(1, exp(-dH))``. This is exactly
the spin-level Metropolis chain projected onto the counts.

Randomness: numpy's PCG64 bit generator seeded with ``ChainConfig.seed``;
each step consumes two consecutive doubles from ``Generator.random`` (spin
choice, then acceptance), so trajectories are reproducible bit for bit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numba
import numpy as np

from .exactdist import PmfTable
from .model import MagnetizationState, ModelSpec

BLOCK_STEPS = 1 << 20


@dataclass(frozen=True)
class ChainState:
    counts: tuple[int, ...]

    def to_magnetization(self, spec: ModelSpec) -> MagnetizationState:
        return MagnetizationState(tuple(2 * k - n for k, n in zip(self.counts, spec.groups.sizes)))

    @classmethod
    def from_magnetization(cls, spec: ModelSpec, state: MagnetizationState) -> "ChainState":
        return cls(state.validate(spec.groups).counts(spec.groups))


@dataclass(frozen=True)
class ChainConfig:
    """Chain length settings; ``None`` selects burn-in ``100 n`` and thinning ``n``.

    The default thinning is rounded up to an odd number: at beta = 0 every
    proposal is accepted, each step flips the parity of sum(k), and an even
    thinning interval would only ever record one parity class.
    """

    seed: int
    samples: int
    burn_in: int | None = None
    thin: int | None = None

    def resolved(self, n: int) -> tuple[int, int]:
        burn = 100 * n if self.burn_in is None else int(self.burn_in)
        thin = (n | 1) if self.thin is None else int(self.thin)
        if burn < 0 or thin < 1 or self.samples < 0:
            raise ValueError("need burn_in >= 0, thin >= 1, samples >= 0")
        return burn, thin


def delta_energy(spec: ModelSpec, state: ChainState, group: int, delta: int) -> float:
    """Energy change when the sum of ``group`` moves by ``delta`` (= +-2)."""
    s = np.array(state.to_magnetization(spec).sums, dtype=float)
    J = spec.coupling.matrix
    js = float(J[group] @ s)
    return -(2 * delta * js + delta * delta * J[group, group]) / (2 * spec.n)


def acceptance_probability(spec: ModelSpec, state: ChainState, group: int, delta: int) -> float:
    return min(1.0, math.exp(-delta_energy(spec, state, group, delta)))


def step(spec: ModelSpec, state: ChainState, rng: np.random.Generator) -> ChainState:
    """One Metropolis update (reference implementation of the compiled kernel)."""
    sizes = spec.groups.sizes
    r = min(int(rng.random() * spec.n), spec.n - 1)
    lam, off = 0, 0
    while r >= off + sizes[lam]:
        off += sizes[lam]
        lam += 1
    up = (r - off) < state.counts[lam]
    delta = -2 if up else 2
    dH = delta_energy(spec, state, lam, delta)
    u = rng.random()
    if dH <= 0 or u < math.exp(-dH):
        counts = list(state.counts)
        counts[lam] += -1 if up else 1
        return ChainState(tuple(counts))
    return state


@numba.njit(cache=True)
def _run_block(k, s, sizes, J, n, u, t0, burn_in, thin, total_steps, hist, strides):
    d = sizes.shape[0]
    inv2n = 1.0 / (2.0 * n)
    m = u.shape[0] // 2
    for j in range(m):
        t = t0 + j
        if t >= total_steps:
            break
        r = int(u[2 * j] * n)
        if r >= n:
            r = n - 1
        lam = 0
        off = 0
        while r >= off + sizes[lam]:
            off += sizes[lam]
            lam += 1
        up = (r - off) < k[lam]
        delta = -2.0 if up else 2.0
        js = 0.0
        for b in range(d):
            js += J[lam, b] * s[b]
        dH = -(2.0 * delta * js + delta * delta * J[lam, lam]) * inv2n
        if dH <= 0.0 or u[2 * j + 1] < math.exp(-dH):
            if up:
                k[lam] -= 1
            else:
                k[lam] += 1
            s[lam] += delta
        done = t + 1
        if done > burn_in and (done - burn_in) % thin == 0:
            idx = 0
            for b in range(d):
                idx += k[b] * strides[b]
            hist[idx] += 1


def run_counts(spec: ModelSpec, config: ChainConfig,
               initial: ChainState | None = None) -> tuple[np.ndarray, ChainState]:
    """Visit counts per state (lexicographic order) and the final chain state."""
    burn, thin = config.resolved(spec.n)
    groups = spec.groups
    sizes = np.asarray(groups.sizes, dtype=np.int64)
    k = np.array(initial.counts if initial else [c // 2 for c in groups.sizes], dtype=np.int64)
    s = (2 * k - sizes).astype(float)
    J = np.ascontiguousarray(spec.coupling.matrix, dtype=float)
    strides = np.array([math.prod(groups.shape[i + 1:]) for i in range(groups.d)], dtype=np.int64)
    hist = np.zeros(groups.num_states, dtype=np.int64)
    total = burn + config.samples * thin
    rng = np.random.Generator(np.random.PCG64(config.seed))
    t = 0
    while t < total:
        m = min(BLOCK_STEPS, total - t)
        u = rng.random(2 * m)
        _run_block(k, s, sizes, J, spec.n, u, t, burn, thin, total, hist, strides)
        t += m
    return hist, ChainState(tuple(int(v) for v in k))


def run(spec: ModelSpec, config: ChainConfig) -> PmfTable:
    """Empirical table of the thinned post-burn-in states."""
    if config.samples <= 0:
        raise ValueError("samples must be positive")
    burn, thin = config.resolved(spec.n)
    hist, _ = run_counts(spec, config)
    with np.errstate(divide="ignore"):
        log_probs = np.log(hist / config.samples)
    meta = {"seed": config.seed, "burn_in": burn, "thin": thin, "samples": config.samples}
    return PmfTable(spec.groups, log_probs, 0.0, meta)


def tv_distance(a: PmfTable, b: PmfTable) -> float:
    if a.groups.sizes != b.groups.sizes:
        raise ValueError("tables are over different group sizes")
    return 0.5 * math.fsum(np.abs(a.probs - b.probs))
