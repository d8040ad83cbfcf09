"""Finite-volume propagators gamma_{t,s} built by ODE integration and by Euler products.

``gamma_{t,s}(A)`` solves ``dA/dt = L(t) A`` from ``A(s) = A`` (Heisenberg
picture).  As a matrix it is stored in the same column-stacking convention
as :mod:`irrevdyn.generator`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from ._integrate import IntegrationStats, StepSizeUnderflow, dopri5
from .algebra import LocalOperator, embed, op_norm
from .generator import (
    SUPEROP_CAP,
    GeneratorSpec,
    generator_lipschitz,
    psi_interaction_norm,
    superop_norm,
    unvec,
    vec,
)

__all__ = [
    "Propagator",
    "EulerReport",
    "StepSizeUnderflow",
    "evolve",
    "evolve_many",
    "propagator_matrix",
    "euler_product",
    "euler_report",
    "choi_matrix",
    "choi_check",
    "cocycle_defect",
    "DEFAULT_TOL",
    "CP_TOL",
]

DEFAULT_TOL = 1e-10
CP_TOL = 1e-8
# below this total_dim the superoperator ODE is cheaper than the batched action
_SUPEROP_ODE_MAX_DIM = 16


def _full(spec: GeneratorSpec, A) -> np.ndarray:
    if isinstance(A, LocalOperator):
        return embed(A, spec.volume)
    A = np.asarray(A, dtype=complex)
    D = spec.dim
    if A.shape[-2:] != (D, D):
        raise ValueError(f"operator shape {A.shape} does not match volume dimension {D}")
    return A


def evolve_many(
    spec: GeneratorSpec,
    A,
    s: float,
    times: Sequence[float],
    tol: float = DEFAULT_TOL,
    stats: IntegrationStats | None = None,
) -> list[np.ndarray]:
    """``gamma_{t,s}(A)`` for every ``t`` in ``times`` from one integration.

    ``A`` is a :class:`LocalOperator` or a full matrix; a stack of full
    matrices (leading batch axes) is evolved jointly.
    """
    A0 = _full(spec, A)
    times = [float(t) for t in times]
    if times and min(times) < s:
        raise ValueError("evolution times must satisfy t >= s")
    if not spec.terms:
        return [A0.copy() for _ in times]
    order = np.argsort(times, kind="stable")
    ys, st = dopri5(spec.apply, s, A0, [times[i] for i in order], rtol=tol, atol=tol)
    if stats is not None:
        stats.n_steps += st.n_steps
        stats.n_rejected += st.n_rejected
        stats.n_evals += st.n_evals
    out: list = [None] * len(times)
    for k, i in enumerate(order):
        out[i] = ys[k]
    return out


def evolve(spec: GeneratorSpec, A, s: float, t: float, tol: float = DEFAULT_TOL) -> np.ndarray:
    """``gamma_{t,s}(A)`` by adaptive Runge-Kutta integration."""
    if t < s:
        raise ValueError(f"need s <= t, got s={s}, t={t}")
    return evolve_many(spec, A, s, [t], tol)[0]


@dataclass(frozen=True, eq=False)
class Propagator:
    """``gamma_{t,s}`` either as a superoperator matrix or as an on-demand evolution."""

    s: float
    t: float
    spec: GeneratorSpec
    tol: float
    matrix: np.ndarray | None = None
    stats: IntegrationStats = field(default_factory=IntegrationStats)

    @property
    def is_matrix(self) -> bool:
        return self.matrix is not None

    def __call__(self, A) -> np.ndarray:
        A = _full(self.spec, A)
        if self.matrix is None:
            return evolve(self.spec, A, self.s, self.t, self.tol)
        D = self.spec.dim
        if A.ndim == 2:
            return unvec(self.matrix @ vec(A), D)
        flat = A.reshape(-1, D, D).transpose(0, 2, 1).reshape(-1, D * D).T
        res = (self.matrix @ flat).T.reshape(-1, D, D).transpose(0, 2, 1)
        return res.reshape(A.shape)

    def unit_defect(self) -> float:
        I = np.eye(self.spec.dim)
        return op_norm(self(I) - I)


def propagator_matrix(spec: GeneratorSpec, s: float, t: float, tol: float = DEFAULT_TOL) -> Propagator:
    """Superoperator of ``gamma_{t,s}``; falls back to a matrix-free propagator above the cap."""
    if t < s:
        raise ValueError(f"need s <= t, got s={s}, t={t}")
    D = spec.dim
    if D * D > SUPEROP_CAP:
        return Propagator(s, t, spec, tol)
    stats = IntegrationStats()
    if t == s or not spec.terms:
        return Propagator(s, t, spec, tol, np.eye(D * D, dtype=complex), stats)
    if D <= _SUPEROP_ODE_MAX_DIM:
        (S,), st = dopri5(
            lambda r, X: spec.superop(r) @ X, s, np.eye(D * D, dtype=complex), [t], tol, tol
        )
        stats.n_steps, stats.n_rejected, stats.n_evals = st.n_steps, st.n_rejected, st.n_evals
    else:
        # evolve the matrix units E_ij (column-stacked index k = i + j*D)
        units = np.zeros((D * D, D, D), dtype=complex)
        k = np.arange(D * D)
        units[k, k % D, k // D] = 1.0
        (out,) = evolve_many(spec, units, s, [t], tol, stats)
        S = out.transpose(0, 2, 1).reshape(D * D, D * D).T
    return Propagator(s, t, spec, tol, S, stats)


# -- Euler products ----------------------------------------------------------


def euler_product(spec: GeneratorSpec, n: int, t: float) -> np.ndarray:
    """``T_n(t) = prod_{k=n..1} (id + (t/n) L(k t/n))`` with the k=1 factor rightmost."""
    if n < 1:
        raise ValueError("n must be >= 1")
    D = spec.dim
    if D * D > SUPEROP_CAP:
        raise ValueError(f"superoperator dimension {D * D} exceeds cap {SUPEROP_CAP}")
    h = t / n
    I = np.eye(D * D, dtype=complex)
    T = I.copy()
    if spec.is_constant:
        return np.linalg.matrix_power(I + h * spec.superop(0.0), n)
    for k in range(1, n + 1):
        T = (I + h * spec.superop(k * h)) @ T
    return T


@dataclass(frozen=True)
class EulerReport:
    n: int
    t: float
    error: float
    bound: float
    eps_n: float
    eps_exact: bool
    M_t: float
    D: float
    step_condition: bool

    @property
    def holds(self) -> bool:
        return self.error <= self.bound

    def as_dict(self) -> dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__} | {"holds": self.holds}


def _step_condition(n: int, D: float) -> bool:
    """The admissibility condition on the Euler step used in the positivity induction."""

    def e(m):
        return 1.0 if m <= 0 else (1.0 + 1.0 / m) ** m

    return D < e(n - 1) / e(n - 2)


def continuity_modulus(spec: GeneratorSpec, t: float, n: int, samples: int = 8) -> tuple[float, bool]:
    """``eps_n``: bound on ``||L(a) - L(b)||`` for ``|a - b| <= t/n`` within ``[0, t]``.

    Exact (Lipschitz envelope) when every profile declares a Lipschitz
    constant, otherwise sampled at ``samples`` points per Euler subinterval.
    """
    if spec.is_constant or t == 0:
        return 0.0, True
    lip = generator_lipschitz(spec)
    if lip is not None:
        return lip * t / n, True
    h = t / n
    eps = 0.0
    for j in range(n):
        pts = np.linspace(j * h, (j + 1) * h, samples)
        mats = [spec.superop(p) for p in pts]
        eps = max(eps, max(superop_norm(m - mats[0]) for m in mats[1:]))
    return eps, False


def euler_report(
    spec: GeneratorSpec,
    n: int,
    t: float,
    tol: float = 1e-12,
    f_norm: float | None = None,
    gamma: np.ndarray | None = None,
) -> EulerReport:
    """Measured ``||T_n(t) - gamma_{t,0}||`` against the Euler error estimate.

    The estimate is ``t e^{2 t M} (eps_n + M**2 e^{t M / n} t / (2n))`` with
    ``M = ||Psi||_{t,mu} |Lambda| ||F||``.
    """
    if f_norm is None:
        f_norm = spec.decay.f_norm(spec.volume.graph).value
    if gamma is None:
        gamma = propagator_matrix(spec, 0.0, t, tol).matrix
    error = superop_norm(euler_product(spec, n, t) - gamma)
    M = psi_interaction_norm(spec, t) * spec.volume.n_sites * f_norm
    eps, exact = continuity_modulus(spec, t, n)
    with np.errstate(over="ignore"):
        bound = t * math.exp(min(2 * t * M, 700.0)) * (
            eps + M**2 * math.exp(min(t * M / n, 700.0)) * t / (2 * n)
        )
    if 2 * t * M > 700 or t * M / n > 700:
        bound = math.inf
    D = 1.0 + (t / n) ** 2 * M**2
    return EulerReport(n, t, error, bound, eps, exact, M, D, _step_condition(n, D))


# -- complete positivity and cocycle -----------------------------------------


def choi_matrix(S: np.ndarray) -> np.ndarray:
    """Choi matrix ``sum_ij E_ij kron Phi(E_ij)`` of the map with superoperator ``S``."""
    D = math.isqrt(S.shape[0])
    # Phi(E_ij)[a, b] = S[a + b*D, i + j*D]
    T = S.reshape(D, D, D, D)  # [b, a, j, i]
    return T.transpose(3, 1, 2, 0).reshape(D * D, D * D)


def choi_check(P: Propagator | np.ndarray) -> float:
    """Minimum Choi eigenvalue of the Schrodinger-picture adjoint (CP iff >= -tolerance)."""
    S = P.matrix if isinstance(P, Propagator) else np.asarray(P)
    if S is None:
        raise ValueError("Choi check needs a matrix representation")
    J = choi_matrix(S.conj().T)
    return float(np.linalg.eigvalsh(0.5 * (J + J.conj().T)).min())


def cocycle_defect(
    spec: GeneratorSpec,
    r: float,
    s: float,
    t: float,
    tol: float = DEFAULT_TOL,
    n_probes: int = 4,
    seed: int = 0,
) -> float:
    """``||gamma_{t,s} gamma_{s,r} - gamma_{t,r}||``; on random probes when matrix-free."""
    if not r <= s <= t:
        raise ValueError("need r <= s <= t")
    Pts = propagator_matrix(spec, s, t, tol)
    Psr = propagator_matrix(spec, r, s, tol)
    Ptr = propagator_matrix(spec, r, t, tol)
    if Pts.is_matrix:
        return superop_norm(Pts.matrix @ Psr.matrix - Ptr.matrix)
    rng = np.random.default_rng(seed)
    D = spec.dim
    worst = 0.0
    for _ in range(n_probes):
        A = rng.standard_normal((D, D)) + 1j * rng.standard_normal((D, D))
        A /= np.linalg.norm(A)
        worst = max(worst, float(np.linalg.norm(Pts(Psr(A)) - Ptr(A))))
    return worst
