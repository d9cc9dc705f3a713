from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np
from django.conf import settings

from core.exceptions import DomainError

logger = logging.getLogger(__name__)

HERMITIAN_TOLERANCE = 1e-12


@dataclass(frozen=True)
class EigenPair:
    value: float
    vector: np.ndarray
    iterations: int
    residual: float


def _unit(vector: np.ndarray) -> np.ndarray:
    return vector / np.linalg.norm(vector)


def top_eigenpair(
    matrix: np.ndarray,
    *,
    seed: int = 0,
    max_iterations: Optional[int] = None,
    tol: Optional[float] = None,
) -> EigenPair:
    """Largest eigenvalue of a Hermitian PSD matrix by power iteration.

    Stops once ||Mv - lambda v|| <= tol * trace(M). The returned vector has
    unit norm and its largest-modulus entry real and positive.
    """
    max_iterations = int(max_iterations or getattr(settings, "LSL_POWER_MAX_ITERATIONS", 10**5))
    tol = float(tol if tol is not None else getattr(settings, "LSL_POWER_TOL", 1e-10))
    M = np.asarray(matrix, dtype=np.complex128)
    if M.ndim != 2 or M.shape[0] != M.shape[1] or M.shape[0] == 0:
        raise DomainError(f"expected a non-empty square matrix, got shape {M.shape}")
    scale = max(1.0, float(np.max(np.abs(M))))
    if float(np.max(np.abs(M - M.conj().T))) > HERMITIAN_TOLERANCE * scale:
        raise DomainError("matrix is not Hermitian within tolerance")
    M = (M + M.conj().T) / 2
    k = M.shape[0]
    trace = float(np.trace(M).real)
    if trace <= 0:
        return EigenPair(0.0, np.eye(k, dtype=np.complex128)[0], 0, 0.0)

    rng = np.random.default_rng(seed)
    v = _unit(rng.standard_normal(k) + 1j * rng.standard_normal(k))
    Mv = M @ v
    value = float(np.vdot(v, Mv).real)
    residual = float(np.linalg.norm(Mv - value * v))
    iterations = 0
    while residual > tol * trace and iterations < max_iterations:
        iterations += 1
        norm = np.linalg.norm(Mv)
        if norm == 0:
            v = _unit(rng.standard_normal(k) + 1j * rng.standard_normal(k))
        else:
            v = Mv / norm
        Mv = M @ v
        value = float(np.vdot(v, Mv).real)
        residual = float(np.linalg.norm(Mv - value * v))
    if residual > tol * trace:
        logger.warning("power iteration stopped after %d steps, residual %.3e", iterations, residual)

    pivot = int(np.argmax(np.abs(v)))
    v = v * (np.conj(v[pivot]) / abs(v[pivot]))
    v[pivot] = abs(v[pivot])
    return EigenPair(value, v, iterations, residual)
