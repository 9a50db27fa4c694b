"""High-temperature classification and the Gaussian limit of the scaled magnetization.

For homogeneous coupling the high-temperature regime is ``beta < 1``. For a
heterogeneous (positive definite) coupling it is the set where
``H = J^{-1} - diag(alpha)`` is positive definite. There the vector
``(S_l / sqrt(n_l))_l`` is asymptotically ``N(0, C)`` with

    C = I + sqrt(alpha) Sigma sqrt(alpha),
    Sigma = beta/(1-beta) * ones   (homogeneous)   or   H^{-1}   (heterogeneous).
"""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass

import numpy as np

from .linalg import NotPositiveDefiniteError, cholesky, inverse, is_positive_definite, quad_form_chol
from .model import CouplingMatrix, GroupSizes

__all__ = [
    "ParameterPoint", "Regime", "RegimeDecision", "LimitCovariance", "RegimeError",
    "empirical_alpha", "hessian_H", "classify", "limit_covariance",
    "gaussian_density", "is_positive_definite",
]

ALPHA_TOL = 1e-12


class RegimeError(ValueError):
    """Operation requires the high-temperature regime."""


class Regime(enum.Enum):
    HIGH_TEMPERATURE = "high"
    NOT_HIGH_TEMPERATURE = "other"


@dataclass(frozen=True, eq=False)
class ParameterPoint:
    alpha: tuple[float, ...]
    coupling: CouplingMatrix

    def __post_init__(self):
        alpha = tuple(float(a) for a in self.alpha)
        if len(alpha) != self.coupling.dim:
            raise ValueError(f"{len(alpha)} proportions for a {self.coupling.dim}-group coupling")
        if any(not a >= 0.0 for a in alpha):
            raise ValueError("alpha entries must be non-negative")
        if abs(math.fsum(alpha) - 1.0) > ALPHA_TOL:
            raise ValueError(f"alpha must sum to 1, got {math.fsum(alpha)!r}")
        object.__setattr__(self, "alpha", alpha)

    @property
    def d(self) -> int:
        return len(self.alpha)

    @classmethod
    def from_groups(cls, groups: GroupSizes, coupling: CouplingMatrix) -> "ParameterPoint":
        return cls(tuple(empirical_alpha(groups)), coupling)

    def to_json(self) -> str:
        return json.dumps({"alpha": list(self.alpha), "coupling": self.coupling.to_json_obj()})

    @classmethod
    def from_json_obj(cls, obj: dict, symmetrize: bool = False) -> "ParameterPoint":
        if not isinstance(obj, dict) or set(obj) != {"alpha", "coupling"}:
            raise ValueError('parameter point must have exactly the keys "alpha" and "coupling"')
        alpha = tuple(obj["alpha"])
        return cls(alpha, CouplingMatrix.from_json_obj(obj["coupling"], len(alpha), symmetrize))

    @classmethod
    def from_json(cls, text: str, symmetrize: bool = False) -> "ParameterPoint":
        return cls.from_json_obj(json.loads(text), symmetrize)


@dataclass(frozen=True, eq=False)
class RegimeDecision:
    regime: Regime
    detail: str
    hessian: np.ndarray | None = None

    @property
    def is_high_temperature(self) -> bool:
        return self.regime is Regime.HIGH_TEMPERATURE

    def to_record(self) -> dict:
        return {"regime": self.regime.value, "reason": self.detail}


@dataclass(frozen=True, eq=False)
class LimitCovariance:
    C: np.ndarray
    sigma: np.ndarray


def empirical_alpha(groups: GroupSizes) -> np.ndarray:
    n = groups.total
    return np.array([k / n for k in groups.sizes])


def hessian_H(point: ParameterPoint) -> np.ndarray:
    """``J^{-1} - diag(alpha)``; raises LinAlgError for a singular coupling.

    A homogeneous coupling with d >= 2 is singular, so callers branch on the
    coupling kind first.
    """
    Jinv = inverse(point.coupling.matrix)
    return Jinv - np.diag(point.alpha)


def classify(point: ParameterPoint) -> RegimeDecision:
    c = point.coupling
    if c.is_homogeneous:
        if c.beta < 1.0:
            return RegimeDecision(Regime.HIGH_TEMPERATURE, f"beta = {c.beta!r} < 1")
        return RegimeDecision(Regime.NOT_HIGH_TEMPERATURE, "beta >= 1")
    try:
        H = hessian_H(point)
    except np.linalg.LinAlgError:
        return RegimeDecision(Regime.NOT_HIGH_TEMPERATURE, "J singular", None)
    try:
        cholesky(H)
    except NotPositiveDefiniteError as exc:
        return RegimeDecision(Regime.NOT_HIGH_TEMPERATURE,
                              f"H not positive definite (leading minor {exc.minor})", H)
    return RegimeDecision(Regime.HIGH_TEMPERATURE, "H positive definite", H)


def limit_covariance(point: ParameterPoint) -> LimitCovariance:
    decision = classify(point)
    if not decision.is_high_temperature:
        raise RegimeError(f"not in the high temperature regime: {decision.detail}")
    d = point.d
    if point.coupling.is_homogeneous:
        b = point.coupling.beta
        sigma = np.full((d, d), b / (1.0 - b))
    else:
        sigma = inverse(decision.hessian)
    r = np.sqrt(np.asarray(point.alpha))
    C = np.eye(d)
    for i in range(d):
        C[i, i] += r[i] * sigma[i, i] * r[i]
        for j in range(i + 1, d):
            C[i, j] = C[j, i] = r[i] * sigma[i, j] * r[j]
    return LimitCovariance(C=C, sigma=sigma)


def gaussian_density(C, x) -> float | np.ndarray:
    """Density of N(0, C) at x (a d-vector, or an (M, d) array of points).

    Uses the Cholesky factor of C; raises NotPositiveDefiniteError otherwise.
    """
    C = np.atleast_2d(np.asarray(C, dtype=float))
    L = cholesky(C)
    d = C.shape[0]
    X = np.asarray(x, dtype=float)
    single = X.ndim <= 1
    X = X.reshape(-1, d)
    log_norm = -0.5 * d * math.log(2 * math.pi) - float(np.sum(np.log(np.diag(L))))
    vals = np.exp(log_norm - 0.5 * quad_form_chol(L, X))
    return float(vals[0]) if single else vals
