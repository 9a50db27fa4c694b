"""Multi-group Curie-Weiss model: group sizes, couplings and the magnetization grid.

The Gibbs measure on {-1, +1}^n depends on a configuration only through the
vector of group sums ``s``, so everything downstream works on the grid of
``prod(n_l + 1)`` magnetization states instead of the 2^n configurations.
A state's log weight is ``sum_l log C(n_l, k_l) - H(s)`` with ``k_l = (n_l + s_l)/2``
the number of up spins in group ``l``.

States are always ordered lexicographically in ``(k_1, ..., k_d)`` (last
group varies fastest), which is C order of the ``(n_1+1, ..., n_d+1)`` array.
"""

from __future__ import annotations

import enum
import itertools
import json
import math
import warnings
from dataclasses import dataclass, field
from typing import Iterator, Sequence

import numpy as np

from .linalg import NotPositiveDefiniteError, cholesky, symmetrize


class InvalidStateError(ValueError):
    pass


@dataclass(frozen=True)
class GroupSizes:
    sizes: tuple[int, ...]

    def __post_init__(self):
        sizes = tuple(int(k) for k in self.sizes)
        if not sizes:
            raise ValueError("need at least one group")
        if any(k < 1 for k in sizes):
            raise ValueError(f"group sizes must be positive, got {sizes}")
        object.__setattr__(self, "sizes", sizes)

    @property
    def d(self) -> int:
        return len(self.sizes)

    @property
    def total(self) -> int:
        return sum(self.sizes)

    @property
    def shape(self) -> tuple[int, ...]:
        """Shape of the state grid, one axis per group."""
        return tuple(k + 1 for k in self.sizes)

    @property
    def num_states(self) -> int:
        return math.prod(self.shape)


class CouplingKind(enum.Enum):
    HOMOGENEOUS = "homogeneous"
    HETEROGENEOUS = "heterogeneous"


@dataclass(frozen=True, eq=False)
class CouplingMatrix:
    """Symmetric d x d coupling matrix.

    Build with :meth:`homogeneous` (all entries equal to ``beta``; stored as
    the scalar) or :meth:`from_matrix`. Heterogeneous matrices are checked for
    positive definiteness unless ``require_pd=False``, which is only meant for
    evaluating energies of arbitrary symmetric couplings.
    """

    dim: int
    beta: float | None = None
    _matrix: np.ndarray | None = field(default=None, repr=False)
    symmetrized: bool = False

    @classmethod
    def homogeneous(cls, beta: float, d: int = 1) -> "CouplingMatrix":
        beta = float(beta)
        if not beta >= 0.0 or not math.isfinite(beta):
            raise ValueError(f"homogeneous coupling needs finite beta >= 0, got {beta}")
        if d < 1:
            raise ValueError("d must be positive")
        return cls(dim=int(d), beta=beta)

    @classmethod
    def from_matrix(cls, J, require_pd: bool = True) -> "CouplingMatrix":
        A = np.array(J, dtype=float)
        if A.ndim == 0:
            A = A.reshape(1, 1)
        if A.ndim != 2 or A.shape[0] != A.shape[1]:
            raise ValueError(f"coupling must be square, got shape {A.shape}")
        if not np.all(np.isfinite(A)):
            raise ValueError("coupling entries must be finite")
        was_symmetric = bool(np.array_equal(A, A.T))
        if not was_symmetric:
            A = symmetrize(A)
        if require_pd:
            try:
                cholesky(A)
            except NotPositiveDefiniteError as exc:
                raise ValueError(f"heterogeneous coupling must be positive definite: {exc}") from exc
        A.setflags(write=False)
        return cls(dim=A.shape[0], _matrix=A, symmetrized=not was_symmetric)

    @property
    def kind(self) -> CouplingKind:
        return CouplingKind.HOMOGENEOUS if self.beta is not None else CouplingKind.HETEROGENEOUS

    @property
    def is_homogeneous(self) -> bool:
        return self.beta is not None

    @property
    def matrix(self) -> np.ndarray:
        if self._matrix is not None:
            return self._matrix
        A = np.full((self.dim, self.dim), self.beta)
        A.setflags(write=False)
        object.__setattr__(self, "_matrix", A)
        return A

    def to_json_obj(self) -> dict:
        if self.is_homogeneous:
            return {"homogeneous": self.beta}
        return {"matrix": self.matrix.tolist()}

    @classmethod
    def from_json_obj(cls, obj: dict, d: int, symmetrize: bool = False,
                      require_pd: bool = True) -> "CouplingMatrix":
        """Parse ``{"homogeneous": beta}`` or ``{"matrix": [[...], ...]}``.

        Non-symmetric matrices are rejected unless ``symmetrize`` is set, in
        which case a warning is emitted and ``(J + J^T)/2`` is used.
        """
        if not isinstance(obj, dict) or len(obj) != 1:
            raise ValueError('coupling must be {"homogeneous": beta} or {"matrix": [[...]]}')
        if "homogeneous" in obj:
            return cls.homogeneous(obj["homogeneous"], d)
        if "matrix" not in obj:
            raise ValueError(f"unknown coupling key {next(iter(obj))!r}")
        A = np.array(obj["matrix"], dtype=float)
        if A.shape != (d, d):
            raise ValueError(f"coupling matrix shape {A.shape} does not match d={d}")
        if not np.array_equal(A, A.T):
            if not symmetrize:
                raise ValueError("coupling matrix is not symmetric (pass symmetrize to accept)")
            warnings.warn("non-symmetric coupling matrix replaced by (J + J^T)/2", stacklevel=2)
        return cls.from_matrix(A, require_pd=require_pd)


@dataclass(frozen=True, eq=False)
class ModelSpec:
    groups: GroupSizes
    coupling: CouplingMatrix

    def __post_init__(self):
        if self.coupling.dim != self.groups.d:
            raise ValueError(f"coupling is {self.coupling.dim}x{self.coupling.dim} "
                             f"but there are {self.groups.d} groups")

    @classmethod
    def homogeneous(cls, sizes: Sequence[int], beta: float) -> "ModelSpec":
        g = GroupSizes(tuple(sizes))
        return cls(g, CouplingMatrix.homogeneous(beta, g.d))

    @classmethod
    def from_matrix(cls, sizes: Sequence[int], J, require_pd: bool = True) -> "ModelSpec":
        return cls(GroupSizes(tuple(sizes)), CouplingMatrix.from_matrix(J, require_pd=require_pd))

    @property
    def n(self) -> int:
        return self.groups.total

    @property
    def d(self) -> int:
        return self.groups.d

    def to_json(self) -> str:
        return json.dumps({"sizes": list(self.groups.sizes), "coupling": self.coupling.to_json_obj()})

    @classmethod
    def from_json_obj(cls, obj: dict, symmetrize: bool = False) -> "ModelSpec":
        if not isinstance(obj, dict) or set(obj) != {"sizes", "coupling"}:
            raise ValueError('model must have exactly the keys "sizes" and "coupling"')
        groups = GroupSizes(tuple(obj["sizes"]))
        return cls(groups, CouplingMatrix.from_json_obj(obj["coupling"], groups.d, symmetrize))

    @classmethod
    def from_json(cls, text: str, symmetrize: bool = False) -> "ModelSpec":
        return cls.from_json_obj(json.loads(text), symmetrize)


@dataclass(frozen=True)
class SpinConfiguration:
    spins: tuple[tuple[int, ...], ...]

    def __post_init__(self):
        spins = tuple(tuple(int(x) for x in grp) for grp in self.spins)
        if any(x not in (-1, 1) for grp in spins for x in grp):
            raise InvalidStateError("spins must be -1 or +1")
        object.__setattr__(self, "spins", spins)


@dataclass(frozen=True)
class MagnetizationState:
    sums: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "sums", tuple(int(s) for s in self.sums))

    def validate(self, groups: GroupSizes) -> "MagnetizationState":
        if len(self.sums) != groups.d:
            raise InvalidStateError(f"state has {len(self.sums)} groups, expected {groups.d}")
        for s, k in zip(self.sums, groups.sizes):
            if abs(s) > k or (s - k) % 2:
                raise InvalidStateError(f"sum {s} impossible for a group of {k} spins")
        return self

    def counts(self, groups: GroupSizes) -> tuple[int, ...]:
        """Number of +1 spins per group."""
        return tuple((k + s) // 2 for s, k in zip(self.sums, groups.sizes))

    @classmethod
    def from_counts(cls, groups: GroupSizes, counts: Sequence[int]) -> "MagnetizationState":
        return cls(tuple(2 * c - k for c, k in zip(counts, groups.sizes))).validate(groups)


def group_sums(config: SpinConfiguration, groups: GroupSizes) -> MagnetizationState:
    if len(config.spins) != groups.d or any(
        len(grp) != k for grp, k in zip(config.spins, groups.sizes)
    ):
        raise InvalidStateError("configuration does not match group sizes")
    return MagnetizationState(tuple(sum(grp) for grp in config.spins))


def hamiltonian(spec: ModelSpec, state: MagnetizationState) -> float:
    """Energy ``-(1/2n) sum_{l,m} J_lm s_l s_m`` of any configuration with these group sums."""
    s = state.validate(spec.groups).sums
    n = spec.n
    if spec.coupling.is_homogeneous:
        total = sum(s)
        return -spec.coupling.beta * (total * total) / (2 * n)
    J = spec.coupling.matrix
    acc = 0.0
    for a in range(spec.d):
        for b in range(spec.d):
            acc += float(J[a, b]) * (s[a] * s[b])
    return -acc / (2 * n)


def log_binomial_row(n: int) -> np.ndarray:
    """``log C(n, k)`` for k = 0..n, mirrored so the row is exactly symmetric."""
    k = np.arange(n // 2 + 1)
    half = math.lgamma(n + 1) - np.array([math.lgamma(j + 1) + math.lgamma(n - j + 1) for j in k])
    row = np.empty(n + 1)
    row[k] = half
    row[n - k] = half
    return row


def log_weight(spec: ModelSpec, state: MagnetizationState) -> float:
    """Unnormalized log probability of the event ``S = s``: multiplicity times Boltzmann factor."""
    k = state.validate(spec.groups).counts(spec.groups)
    lc = sum(math.lgamma(nl + 1) - math.lgamma(kl + 1) - math.lgamma(nl - kl + 1)
             for nl, kl in zip(spec.groups.sizes, k))
    return lc - hamiltonian(spec, state)


def scaled_point(groups: GroupSizes, state: MagnetizationState) -> np.ndarray:
    """``(s_1/sqrt(n_1), ..., s_d/sqrt(n_d))``, a point of the lattice L_n."""
    s = state.validate(groups).sums
    return np.array([si / math.sqrt(k) for si, k in zip(s, groups.sizes)])


def enumerate_states(groups: GroupSizes, start: int = 0,
                     stop: int | None = None) -> Iterator[MagnetizationState]:
    """Yield states in lexicographic order of the up-counts.

    ``start``/``stop`` select a contiguous slice of that order, so disjoint
    ranges from :func:`state_chunks` can be consumed independently.
    """
    it = itertools.product(*(range(k + 1) for k in groups.sizes))
    for counts in itertools.islice(it, start, stop):
        yield MagnetizationState(tuple(2 * c - k for c, k in zip(counts, groups.sizes)))


def state_chunks(groups: GroupSizes, nchunks: int) -> list[range]:
    """Split the flat state index range into ``nchunks`` contiguous pieces."""
    N = groups.num_states
    nchunks = max(1, min(int(nchunks), N))
    bounds = [N * i // nchunks for i in range(nchunks + 1)]
    return [range(bounds[i], bounds[i + 1]) for i in range(nchunks)]


def state_index(groups: GroupSizes, state: MagnetizationState) -> int:
    return int(np.ravel_multi_index(state.validate(groups).counts(groups), groups.shape))


def state_array(groups: GroupSizes, index: range | None = None) -> np.ndarray:
    """Group sums of the states in ``index`` (default: all) as an (N, d) int array."""
    idx = np.arange(groups.num_states) if index is None else np.arange(index.start, index.stop)
    counts = np.stack(np.unravel_index(idx, groups.shape), axis=1).astype(np.int64)
    return 2 * counts - np.asarray(groups.sizes, dtype=np.int64)
