from __future__ import annotations

import math
from typing import Callable, Optional

import numpy as np
from django.conf import settings

GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


def t_spacing(x: int, divisor: Optional[float] = None) -> float:
    divisor = float(divisor if divisor is not None else getattr(settings, "LSL_T_GRID_DIVISOR", 8.0))
    return math.pi / (divisor * math.log(max(x, 2)))


def t_grid(t_max: float, x: int, divisor: Optional[float] = None) -> np.ndarray:
    """Symmetric grid {+-k*h} plus the endpoints +-t_max, ascending.

    Refining ``divisor`` by an integer factor gives a superset of points.
    """
    if t_max <= 0:
        return np.zeros(1)
    h = t_spacing(x, divisor)
    half = np.arange(int(math.floor(t_max / h)) + 1) * h
    half = half[half <= t_max]
    if half[-1] < t_max:
        half = np.append(half, t_max)
    return np.concatenate([-half[:0:-1], half])


def sigma_grid(x: int, sigma_max: float) -> np.ndarray:
    """1, 1 + 1/ln(x+2), 1 + 3/ln(x+2), ... below sigma_max, then sigma_max."""
    scale = 1.0 / math.log(x + 2)
    values = [1.0]
    k = 1
    while True:
        sigma = 1.0 + (2**k - 1) * scale
        if sigma >= sigma_max:
            break
        values.append(sigma)
        k += 1
    if sigma_max > 1.0:
        values.append(float(sigma_max))
    return np.array(values)


def dyadic_grid(D: int, x: int) -> list[int]:
    values = []
    current = max(1, D)
    while current < x:
        values.append(current)
        current *= 2
    values.append(x)
    return values


def golden_section_max(
    func: Callable[[float], float],
    lo: float,
    hi: float,
    iterations: Optional[int] = None,
) -> tuple[float, float]:
    """Maximise a unimodal ``func`` on [lo, hi]; returns (argmax, max)."""
    iterations = int(iterations if iterations is not None else getattr(settings, "LSL_GOLDEN_ITERATIONS", 48))
    a, b = lo, hi
    c = b - GOLDEN * (b - a)
    d = a + GOLDEN * (b - a)
    fc, fd = func(c), func(d)
    for _ in range(iterations):
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - GOLDEN * (b - a)
            fc = func(c)
        else:
            a, c, fc = c, d, fd
            d = a + GOLDEN * (b - a)
            fd = func(d)
    return (c, fc) if fc >= fd else (d, fd)
