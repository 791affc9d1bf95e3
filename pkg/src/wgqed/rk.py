"""Adaptive explicit Runge-Kutta integration (Dormand-Prince 5(4) pair).

Fifth-order propagation with an embedded fourth-order error estimate and a
standard controller. Steps are clipped to land exactly on the requested
output grid, so no interpolation error enters the stored samples. Works on
complex state vectors.
"""

from __future__ import annotations

from typing import Callable, Optional, Sequence

import numpy as np

from .errors import ToleranceNotMetError

# Dormand-Prince 5(4) tableau. The last stage is FSAL.
_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_A = [
    np.array([]),
    np.array([1 / 5]),
    np.array([3 / 40, 9 / 40]),
    np.array([44 / 45, -56 / 15, 32 / 9]),
    np.array([19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729]),
    np.array([9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656]),
    np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84]),
]
_B5 = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
_B4 = np.array(
    [5179 / 57600, 0.0, 7571 / 16695, 393 / 640, -92097 / 339200, 187 / 2100, 1 / 40]
)
_ERR = _B5 - _B4

_SAFETY = 0.9
_MIN_FACTOR = 0.2
_MAX_FACTOR = 5.0
_ORDER_EXP = 0.2  # 1 / (4 + 1)


def _error_norm(err: np.ndarray, y_old: np.ndarray, y_new: np.ndarray,
                rtol: float, atol: float) -> float:
    # non-finite stages yield a NaN norm, which the controller treats as a
    # rejected step
    scale = atol + rtol * np.maximum(np.abs(y_old), np.abs(y_new))
    with np.errstate(invalid="ignore"):
        return float(np.sqrt(np.mean(np.abs(err / scale) ** 2)))


def integrate_adaptive(
    rhs: Callable[[float, np.ndarray], np.ndarray],
    t_grid: Sequence[float],
    y0: np.ndarray,
    rtol: float = 1e-9,
    atol: float = 1e-12,
    max_steps: int = 1_000_000,
    step_callback: Optional[Callable[[float, np.ndarray], None]] = None,
) -> np.ndarray:
    """Integrate y' = rhs(t, y) and return the states at ``t_grid``.

    ``t_grid`` must be strictly increasing; integration starts at its first
    entry with state ``y0``. ``step_callback`` runs after every accepted step
    (including grid landings) and may raise to abort. Raises
    :class:`ToleranceNotMetError` when the controller underflows the step
    size or exceeds ``max_steps``.
    """
    t_grid = np.asarray(t_grid, dtype=float)
    if t_grid.ndim != 1 or t_grid.size < 1:
        raise ValueError("t_grid must be a 1-d array with at least one entry")
    if np.any(np.diff(t_grid) <= 0):
        raise ValueError("t_grid must be strictly increasing")

    y = np.array(y0, dtype=complex)
    out = np.empty((t_grid.size, y.size), dtype=complex)
    out[0] = y
    if t_grid.size == 1:
        return out

    t = float(t_grid[0])
    t_end = float(t_grid[-1])
    span = t_end - t
    h_min_floor = 16.0 * np.finfo(float).eps * max(abs(t_end), span)

    k = np.empty((7, y.size), dtype=complex)
    k[0] = rhs(t, y)
    h = min(span / 100.0, span)
    next_out = 1
    steps = 0

    while next_out < t_grid.size:
        if steps >= max_steps:
            raise ToleranceNotMetError(
                f"integration exceeded {max_steps} steps at t = {t:.6g}"
            )
        if h < h_min_floor:
            raise ToleranceNotMetError(
                f"step size underflow (h = {h:.3e}) at t = {t:.6g}; "
                f"tolerances rtol={rtol}, atol={atol} cannot be met"
            )
        # Clip so accepted steps land exactly on grid times.
        t_target = float(t_grid[next_out])
        h_step = min(h, t_target - t)

        for i in range(1, 7):
            yi = y + h_step * (_A[i] @ k[:i])
            k[i] = rhs(t + _C[i] * h_step, yi)
        y_new = y + h_step * (_B5 @ k)
        err = h_step * (_ERR @ k)
        norm = _error_norm(err, y, y_new, rtol, atol)
        steps += 1

        if norm <= 1.0:
            t = t + h_step
            y = y_new
            k[0] = k[6]  # FSAL
            if step_callback is not None:
                step_callback(t, y)
            if t >= t_target - 1e-15 * max(1.0, abs(t_target)):
                out[next_out] = y
                next_out += 1
            factor = _MAX_FACTOR if norm == 0.0 else min(
                _MAX_FACTOR, max(_MIN_FACTOR, _SAFETY * norm ** -_ORDER_EXP)
            )
            h = h_step * factor
        else:
            h = h_step * max(_MIN_FACTOR, _SAFETY * norm ** -_ORDER_EXP)

    return out
