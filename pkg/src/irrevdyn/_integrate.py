"""Adaptive Dormand-Prince 5(4) integrator for array-valued linear ODEs."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

__all__ = ["dopri5", "StepSizeUnderflow", "IntegrationStats"]

_C = np.array([0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1, 1])
_A = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
    [35 / 384, 0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
]
_B = np.array([35 / 384, 0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0])
_B4 = np.array([5179 / 57600, 0, 7571 / 16695, 393 / 640, -92097 / 339200, 187 / 2100, 1 / 40])
_E = _B - _B4

SAFETY = 0.9
MIN_FACTOR = 0.2
MAX_FACTOR = 5.0


class StepSizeUnderflow(RuntimeError):
    """Raised when the controller needs a step below the floor."""

    def __init__(self, t: float, h: float, h_min: float, err: float):
        self.t, self.h, self.h_min, self.err = t, h, h_min, err
        super().__init__(
            f"step size {h:.3e} fell below floor {h_min:.3e} at t={t:.6g} "
            f"(scaled error {err:.3e}); the problem looks stiff for an explicit scheme"
        )


@dataclass
class IntegrationStats:
    n_steps: int = 0
    n_rejected: int = 0
    n_evals: int = 0


def _err_norm(err, y, y_new, rtol, atol):
    scale = atol + rtol * np.maximum(np.abs(y), np.abs(y_new))
    return float(np.max(np.abs(err) / scale)) if err.size else 0.0


def dopri5(
    f: Callable[[float, np.ndarray], np.ndarray],
    t0: float,
    y0: np.ndarray,
    t_eval: Sequence[float],
    rtol: float = 1e-10,
    atol: float = 1e-10,
    h0: float | None = None,
    min_step_ratio: float = 1e-14,
    max_steps: int = 1_000_000,
) -> tuple[list[np.ndarray], IntegrationStats]:
    """Integrate ``y' = f(t, y)`` from ``t0`` and return ``y`` at each of ``t_eval``.

    ``t_eval`` must be nondecreasing and start at or after ``t0``.  Steps
    are shortened to land exactly on every output time.
    """
    y = np.array(y0, dtype=complex)
    t_eval = [float(t) for t in t_eval]
    if any(b < a for a, b in zip(t_eval, t_eval[1:])) or (t_eval and t_eval[0] < t0):
        raise ValueError("t_eval must be nondecreasing and >= t0")
    stats = IntegrationStats()
    out: list[np.ndarray] = []
    if not t_eval:
        return out, stats
    t_end = t_eval[-1]
    span = t_end - t0
    h_min = min_step_ratio * span if span > 0 else 0.0

    t = float(t0)
    k1 = f(t, y)
    stats.n_evals += 1
    if h0 is None:
        d0 = np.max(np.abs(y)) if y.size else 0.0
        d1 = np.max(np.abs(k1)) if k1.size else 0.0
        h = 0.01 * d0 / d1 if d0 > 1e-5 and d1 > 1e-5 else 1e-3
        h = min(h, span) if span > 0 else h
    else:
        h = h0

    i_out = 0
    while i_out < len(t_eval) and t_eval[i_out] <= t:
        out.append(y.copy())
        i_out += 1

    while i_out < len(t_eval):
        if stats.n_steps > max_steps:
            raise RuntimeError(f"exceeded {max_steps} steps")
        target = t_eval[i_out]
        h_try = min(h, target - t)
        landing = h_try == target - t
        ks = [k1]
        # a trial step may overflow; it is then rejected like any other
        with np.errstate(over="ignore", invalid="ignore"):
            for s in range(1, 7):
                incr = sum(a * k for a, k in zip(_A[s], ks) if a)
                ks.append(f(t + _C[s] * h_try, y + h_try * incr))
            y_new = y + h_try * sum(b * k for b, k in zip(_B, ks) if b)
            err = h_try * sum(e * k for e, k in zip(_E, ks) if e)
            en = _err_norm(err, y, y_new, rtol, atol)
        stats.n_evals += 6
        if not np.isfinite(en):
            en = np.inf
        if en <= 1.0:
            t = target if landing else t + h_try
            y = y_new
            k1 = ks[6]  # FSAL
            stats.n_steps += 1
            factor = MAX_FACTOR if en == 0 else min(MAX_FACTOR, SAFETY * en ** -0.2)
            # keep the controller's step when shortened only to hit an output time
            h = max(h, h_try * factor) if landing else h_try * factor
            while i_out < len(t_eval) and t_eval[i_out] <= t:
                out.append(y.copy())
                i_out += 1
        else:
            stats.n_rejected += 1
            h = h_try * (MIN_FACTOR if np.isinf(en) else max(MIN_FACTOR, SAFETY * en**-0.2))
            if h < h_min:
                raise StepSizeUnderflow(t, h, h_min, en)
    return out, stats
