"""Tensor-product composite quadrature rules on boxes and box shells."""

from __future__ import annotations

import itertools
import math
from typing import Callable, Iterator, Sequence

import numpy as np

Rule = tuple[np.ndarray, np.ndarray]  # nodes, weights


def trapezoid(a: float, b: float, points: int) -> Rule:
    x = np.linspace(a, b, points)
    w = np.full(points, (b - a) / (points - 1))
    w[0] *= 0.5
    w[-1] *= 0.5
    return x, w


def gauss_legendre(a: float, b: float, h_target: float, order: int = 8,
                   min_panels: int = 4) -> Rule:
    """Composite Gauss-Legendre rule with panels no wider than ``h_target``."""
    m = max(min_panels, math.ceil((b - a) / h_target))
    t, w = np.polynomial.legendre.leggauss(order)
    edges = np.linspace(a, b, m + 1)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[:-1] + edges[1:])
    return (mid[:, None] + half[:, None] * t).ravel(), (half[:, None] * w).ravel()


def tensor_grid(rules: Sequence[Rule]) -> tuple[np.ndarray, np.ndarray]:
    """Nodes as an (M, k) array and log weights as an (M,) array, C order."""
    xs = np.meshgrid(*(r[0] for r in rules), indexing="ij")
    lws = np.meshgrid(*(np.log(r[1]) for r in rules), indexing="ij")
    return np.stack([g.ravel() for g in xs], axis=1), sum(g.ravel() for g in lws)


def shell_boxes(inner: Sequence[float], outer: Sequence[float]) -> Iterator[list[tuple[float, float]]]:
    """Sub-boxes tiling ``prod[-outer, outer] minus prod[-inner, inner]``.

    Each axis is cut into ``[-outer,-inner], [-inner,inner], [inner,outer]``;
    all 3^k - 1 combinations other than the all-middle one are yielded.
    """
    segs = [[(-o, -i), (-i, i), (i, o)] for i, o in zip(inner, outer)]
    for combo in itertools.product(range(3), repeat=len(segs)):
        if all(c == 1 for c in combo):
            continue
        yield [segs[ax][c] for ax, c in enumerate(combo)]


def log_integral(log_f: Callable[[np.ndarray], np.ndarray], rules: Sequence[Rule]) -> float:
    X, lw = tensor_grid(rules)
    v = log_f(X) + lw
    m = float(np.max(v))
    if not math.isfinite(m):
        return m
    return m + math.log(math.fsum(np.exp(v - m)))
