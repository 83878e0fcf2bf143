"""Orthant-wise limited-memory quasi-Newton minimization for L1-regularized objectives."""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from typing import Callable

import numpy as np


@dataclass
class OptimResult:
    x: np.ndarray
    fun: float
    iterations: int
    converged: bool


def pseudo_gradient(x: np.ndarray, g: np.ndarray, l1: np.ndarray) -> np.ndarray:
    """Steepest-descent direction (negated) of f + sum(l1 * |x|)."""
    pg = np.where(x > 0, g + l1, np.where(x < 0, g - l1, 0.0))
    at_zero = x == 0
    right = g + l1
    left = g - l1
    pg = np.where(at_zero & (right < 0), right, pg)
    pg = np.where(at_zero & (left > 0), left, pg)
    return pg


def _two_loop(pg: np.ndarray, pairs) -> np.ndarray:
    q = pg.copy()
    alphas = []
    for s, y, rho in reversed(pairs):
        a = rho * (s @ q)
        alphas.append(a)
        q -= a * y
    if pairs:
        s, y, _ = pairs[-1]
        q *= (s @ y) / (y @ y)
    for (s, y, rho), a in zip(pairs, reversed(alphas)):
        b = rho * (y @ q)
        q += (a - b) * s
    return -q


def owlqn(fun: Callable[[np.ndarray], tuple[float, np.ndarray]], x0: np.ndarray,
          l1, history: int = 10, max_iterations: int = 500,
          tolerance: float = 1e-7) -> OptimResult:
    """Minimize ``fun(x)[0] + sum(l1 * |x|)`` where ``fun`` is smooth.

    ``l1`` is a scalar or per-coordinate array; coordinates with zero
    penalty are treated as ordinary smooth parameters.
    """
    x = np.asarray(x0, dtype=float).copy()
    l1 = np.broadcast_to(np.asarray(l1, dtype=float), x.shape)
    if np.any(l1 < 0):
        raise ValueError("l1 penalty must be non-negative")
    f, g = fun(x)
    total = f + float(l1 @ np.abs(x))
    pairs: deque = deque(maxlen=history)
    converged = False
    it = 0
    for it in range(1, max_iterations + 1):
        pg = pseudo_gradient(x, g, l1)
        norm = np.linalg.norm(pg)
        if norm <= 1e-10:
            converged = True
            break
        d = _two_loop(pg, list(pairs))
        d = np.where(d * pg >= 0, 0.0, d)
        if not np.any(d):
            d = -pg
        orthant = np.where(x != 0, np.sign(x), np.sign(-pg))
        step = 1.0 / norm if not pairs else 1.0
        while True:
            x_new = x + step * d
            x_new = np.where(np.sign(x_new) * orthant > 0, x_new, 0.0)
            f_new, g_new = fun(x_new)
            total_new = f_new + float(l1 @ np.abs(x_new))
            if total_new <= total + 1e-4 * float(pg @ (x_new - x)) or step < 1e-20:
                break
            step *= 0.5
        s = x_new - x
        y = g_new - g
        sy = float(s @ y)
        if sy > 1e-12:
            pairs.append((s, y, 1.0 / sy))
        decrease = total - total_new
        x, f, g, total = x_new, f_new, g_new, total_new
        if abs(decrease) <= tolerance * max(1.0, abs(total)):
            converged = True
            break
    return OptimResult(x, total, it, converged)
