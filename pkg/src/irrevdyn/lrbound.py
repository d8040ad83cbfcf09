"""Lieb-Robinson certificates for irreversible dynamics and their empirical tests.

For a map ``K`` supported on ``X`` that annihilates the identity and an
observable ``B`` on ``Y``, the propagation bound reads::

    ||K(gamma_{t,s}(B))|| <= cb(K) ||B|| / C_mu * exp(||Psi||_{t,mu} C_mu (t-s))
                             * sum_{x in X, y in Y} F_mu(d(x, y))

It is obtained by summing the iteration series whose zeroth term is
``||B|| delta_Y(X)`` (1 if the supports meet, else 0).  Keeping that term
explicitly gives :func:`lr_bound_iterated`; dropping it gives
:func:`lr_bound_sum`, which is smaller than ``cb(K) ||B||`` at ``t = s``
whenever ``X`` and ``Y`` overlap on a graph with more than one site.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .algebra import LocalOperator, Volume, embed, op_norm, pauli
from .generator import GeneratorSpec, psi_interaction_norm
from .lattice import DecayFunction, MetricGraph
from .propagator import DEFAULT_TOL, evolve_many

__all__ = [
    "LocalSuperMap",
    "LRCertificate",
    "LightconeScan",
    "DominationScan",
    "certificate",
    "lr_bound_sum",
    "lr_bound_exponential",
    "lr_bound_iterated",
    "empirical_lr",
    "lightcone_scan",
    "domination_scan",
    "batched_op_norm",
]


@dataclass(frozen=True)
class LocalSuperMap:
    """``K(B) = [A, B] + sum_a (L_a* B L_a - 1/2 {L_a* L_a, B})`` supported on ``support``."""

    support: tuple
    A: np.ndarray
    lindblads: tuple[np.ndarray, ...] = ()
    label: str = ""

    def __post_init__(self):
        object.__setattr__(self, "support", tuple(self.support))
        object.__setattr__(self, "A", np.asarray(self.A, dtype=complex))
        object.__setattr__(self, "lindblads", tuple(np.asarray(L, complex) for L in self.lindblads))

    @classmethod
    def commutator(cls, site, name: str) -> "LocalSuperMap":
        return cls((site,), pauli(name), label=f"[{name}{site},.]")

    @property
    def form(self) -> str:
        return "lindblad" if self.lindblads else "commutator"

    @property
    def cb_bound(self) -> float:
        return 2.0 * op_norm(self.A) + 2.0 * sum(op_norm(L) ** 2 for L in self.lindblads)

    def on(self, volume: Volume):
        """Return a function applying ``K`` to full-volume operators (batched)."""
        Af = embed(LocalOperator(self.support, self.A), volume)
        Ls = [embed(LocalOperator(self.support, L), volume) for L in self.lindblads]
        Ks = [L.conj().T @ L for L in Ls]

        def apply(B):
            out = Af @ B - B @ Af
            for L, K in zip(Ls, Ks):
                out = out + L.conj().T @ B @ L - 0.5 * (K @ B + B @ K)
            return out

        return apply

    def unit_defect(self, volume: Volume) -> float:
        return op_norm(self.on(volume)(volume.identity()))


@dataclass(frozen=True)
class LRCertificate:
    """Constants entering the propagation bound.

    ``c_mu`` and ``f_norm`` are analytic upper bounds for lattice families;
    ``rigorous`` is False when any ingredient was only sampled or estimated
    on a finite truncation.
    """

    mu: float
    psi_norm: float
    c_mu: float
    f_norm: float
    t_max: float
    graph: MetricGraph = field(repr=False)
    decay: DecayFunction = field(repr=False)
    rigorous: bool = True
    exclude_single_site: bool = False
    bound_form: str = "sum"

    def __post_init__(self):
        if self.mu <= 0:
            raise ValueError("certificate needs mu > 0")
        for name in ("psi_norm", "c_mu", "f_norm"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be nonnegative")

    @property
    def velocity(self) -> float:
        return self.psi_norm * self.c_mu / self.mu

    @property
    def rate(self) -> float:
        """``||Psi||_{t,mu} * C_mu``, the exponential growth rate in time."""
        return self.psi_norm * self.c_mu

    def as_dict(self) -> dict:
        return {
            "mu": self.mu,
            "alpha": self.decay.alpha,
            "psi_norm": self.psi_norm,
            "c_mu": self.c_mu,
            "f_norm": self.f_norm,
            "velocity": self.velocity,
            "t_max": self.t_max,
            "rigorous": self.rigorous,
            "exclude_single_site": self.exclude_single_site,
            "bound_form": self.bound_form,
        }


def certificate(
    spec: GeneratorSpec,
    t_max: float,
    mu: float | None = None,
    exclude_single_site: bool = False,
    psi_norm: float | None = None,
) -> LRCertificate:
    """Build a certificate from the spec's decay function and interaction norm.

    ``psi_norm`` may be supplied when the norm must hold uniformly over a
    family of volumes.
    """
    decay = spec.decay if mu is None else spec.decay.with_mu(mu)
    g = spec.volume.graph
    fn = decay.f_norm(g)
    C = decay.c_const(g)
    rigorous = fn.rigorous and C.rigorous
    if psi_norm is None:
        psi_norm, exact = psi_interaction_norm(
            spec.with_decay(decay), t_max, exclude_single_site=exclude_single_site, return_rigorous=True
        )
        rigorous = rigorous and exact
    return LRCertificate(
        mu=decay.mu,
        psi_norm=float(psi_norm),
        c_mu=C.value,
        f_norm=fn.value,
        t_max=float(t_max),
        graph=g,
        decay=decay,
        rigorous=rigorous,
        exclude_single_site=exclude_single_site,
    )


def _cb(K) -> float:
    return K.cb_bound if isinstance(K, LocalSuperMap) else float(K)


def _bnorm(B) -> float:
    if isinstance(B, LocalOperator):
        return B.norm
    if np.ndim(B) == 0:
        return float(B)
    return op_norm(B)


def _pair_sum(cert: LRCertificate, X, Y) -> float:
    g = cert.graph
    d = g.dist[np.ix_(g.indices(X), g.indices(Y))]
    return float(np.sum(cert.decay.F_mu(d)))


def _exp(x: float) -> float:
    try:
        return math.exp(x)
    except OverflowError:
        return math.inf


def _check_tau(t_minus_s):
    if t_minus_s < 0:
        raise ValueError("need t - s >= 0")


def lr_bound_sum(cert: LRCertificate, K, B, X, Y, t_minus_s: float) -> float:
    """``cb ||B|| / C_mu * exp(||Psi|| C_mu (t-s)) * sum_{x,y} F_mu(d(x,y))``."""
    _check_tau(t_minus_s)
    pref = _cb(K) * _bnorm(B) / cert.c_mu
    if pref == 0:
        return 0.0
    return pref * _exp(cert.rate * t_minus_s) * _pair_sum(cert, X, Y)


def lr_bound_exponential(cert: LRCertificate, K, B, X, Y, t_minus_s: float) -> float:
    """``cb ||B|| / C_mu * ||F|| min(|X|,|Y|) exp(-mu (d(X,Y) - v (t-s)))``."""
    _check_tau(t_minus_s)
    pref = _cb(K) * _bnorm(B) / cert.c_mu
    if pref == 0:
        return 0.0
    dXY = cert.graph.set_distance(X, Y)
    expo = -cert.mu * (dXY - cert.velocity * t_minus_s)
    return pref * cert.f_norm * min(len(X), len(Y)) * _exp(expo)


def lr_bound_iterated(cert: LRCertificate, K, B, X, Y, t_minus_s: float) -> float:
    """``cb ||B|| (delta_Y(X) + (exp(||Psi|| C_mu (t-s)) - 1) / C_mu * sum F_mu)``.

    The series form with the zeroth-order term kept; monotone in both
    ``||Psi||`` and ``C_mu`` so upper bounds for them stay valid.
    """
    _check_tau(t_minus_s)
    pref = _cb(K) * _bnorm(B)
    if pref == 0:
        return 0.0
    delta = 1.0 if set(X) & set(Y) else 0.0
    x = cert.rate * t_minus_s
    growth = math.expm1(x) if x < 700 else math.inf
    return pref * (delta + growth / cert.c_mu * _pair_sum(cert, X, Y))


def batched_op_norm(M: np.ndarray) -> np.ndarray:
    """Operator norms over the leading axes of a stack of square matrices."""
    M = np.asarray(M)
    lead = M.shape[:-2]
    flat = M.reshape((-1,) + M.shape[-2:])
    out = np.empty(flat.shape[0])
    for i, m in enumerate(flat):
        if np.array_equal(m, m.conj().T):
            out[i] = np.max(np.abs(np.linalg.eigvalsh(m)))
        elif np.array_equal(m, -m.conj().T):
            out[i] = np.max(np.abs(np.linalg.eigvalsh(1j * m)))
        else:
            out[i] = np.linalg.norm(m, 2)
    return out.reshape(lead)


def _hermitize_commutator(C: np.ndarray) -> np.ndarray:
    # commutators of Hermitian operators are anti-Hermitian up to rounding
    return 0.5 * (C - np.swapaxes(C.conj(), -1, -2))


def empirical_lr(spec: GeneratorSpec, K: LocalSuperMap, B, s: float, t: float, tol: float = DEFAULT_TOL) -> float:
    """``||K(gamma_{t,s}(B))||``."""
    (Bt,) = evolve_many(spec, B, s, [t], tol)
    return op_norm(K.on(spec.volume)(Bt))


@dataclass
class LightconeScan:
    sites: list
    times: np.ndarray
    distances: np.ndarray
    empirical: np.ndarray  # (n_sites, n_times)
    bound_sum: np.ndarray | None
    bound_exp: np.ndarray | None
    theta: float
    arrival: np.ndarray  # first crossing time per site, inf if never
    v_emp: float
    certificate: LRCertificate | None = None

    def rows(self):
        for i, x in enumerate(self.sites):
            for j, t in enumerate(self.times):
                bs = None if self.bound_sum is None else float(self.bound_sum[i, j])
                be = None if self.bound_exp is None else float(self.bound_exp[i, j])
                e = float(self.empirical[i, j])
                yield {
                    "site": x,
                    "time": float(t),
                    "empirical": e,
                    "bound_sum": bs,
                    "bound_exp": be,
                    "ratio": None if not bs else e / bs,
                }

    def front_monotone(self) -> bool:
        order = np.argsort(self.distances, kind="stable")
        arr = self.arrival[order]
        return bool(np.all(np.diff(arr[np.isfinite(arr)]) >= 0) and _inf_tail(arr))


def _inf_tail(arr: np.ndarray) -> bool:
    """Once a site (ordered by distance) is never reached, no farther one may be."""
    seen_inf = False
    for a in arr:
        if np.isinf(a):
            seen_inf = True
        elif seen_inf:
            return False
    return True


def _front(values: np.ndarray, times: np.ndarray, theta: float) -> np.ndarray:
    arrival = np.full(values.shape[0], np.inf)
    for i, row in enumerate(values):
        hit = np.nonzero(row >= theta)[0]
        if hit.size:
            arrival[i] = times[hit[0]]
    return arrival


def _velocity_fit(distances: np.ndarray, arrival: np.ndarray) -> float:
    ok = np.isfinite(arrival)
    d, a = distances[ok], arrival[ok]
    if np.unique(d).size < 2 or np.ptp(a) == 0:
        return 0.0
    slope, _ = np.polyfit(a, d, 1)
    return float(max(slope, 0.0))


def lightcone_scan(
    spec: GeneratorSpec,
    B: LocalOperator,
    site_list: Sequence | None = None,
    time_grid: Sequence[float] = (0.0, 1.0),
    cert: LRCertificate | None = None,
    tol: float = 1e-8,
    theta_rel: float = 1e-3,
    basis: str = "XYZ",
    s: float = 0.0,
) -> LightconeScan:
    """Empirical spreading of ``B`` probed by single-site commutators.

    Entry ``(x, t)`` is ``max_a ||[sigma_a(x), gamma_{s+t,s}(B)]||``.  The
    front for threshold ``theta = theta_rel * ||B|| * 2`` is the first grid
    time each site reaches ``theta``; ``v_emp`` is the least-squares slope
    of distance against arrival time.
    """
    volume = spec.volume
    sites = list(volume.sites if site_list is None else site_list)
    times = np.asarray(time_grid, dtype=float)
    evolved = np.stack(evolve_many(spec, B, s, list(s + times), tol))
    g = volume.graph
    dist = np.array([g.set_distance([x], B.support) for x in sites])
    emp = np.zeros((len(sites), len(times)))
    for i, x in enumerate(sites):
        for a in basis:
            P = embed(LocalOperator.pauli(x, a), volume)
            C = _hermitize_commutator(P @ evolved - evolved @ P)
            emp[i] = np.maximum(emp[i], batched_op_norm(C))
    bnorm = B.norm
    theta = theta_rel * bnorm * 2.0
    arrival = _front(emp, times, theta)
    bs = be = None
    if cert is not None:
        bs = np.array([[lr_bound_sum(cert, 2.0, bnorm, [x], B.support, t) for t in times] for x in sites])
        be = np.array(
            [[lr_bound_exponential(cert, 2.0, bnorm, [x], B.support, t) for t in times] for x in sites]
        )
    return LightconeScan(sites, times, dist, emp, bs, be, theta, arrival, _velocity_fit(dist, arrival), cert)


@dataclass
class DominationScan:
    """Every (K site, K label, B site, B label, time) cell of a bound-domination sweep."""

    records: list[dict]
    certificate: LRCertificate

    def violations(self, key: str = "bound_sum", slack: float = 0.0) -> list[dict]:
        return [r for r in self.records if r["empirical"] > r[key] * (1 + slack)]

    @property
    def max_ratio(self) -> float:
        return max((r["empirical"] / r["bound_sum"] for r in self.records if r["bound_sum"] > 0), default=0.0)


def domination_scan(
    spec: GeneratorSpec,
    cert: LRCertificate,
    times: Sequence[float],
    b_sites: Sequence | None = None,
    k_sites: Sequence | None = None,
    basis: str = "XYZ",
    tol: float = 1e-8,
    s: float = 0.0,
) -> DominationScan:
    """Compare ``||[sigma_a(x), gamma(sigma_b(y))]||`` with the bounds for all single-site probes."""
    volume = spec.volume
    b_sites = list(volume.sites if b_sites is None else b_sites)
    k_sites = list(volume.sites if k_sites is None else k_sites)
    probes = [LocalOperator.pauli(y, b) for y in b_sites for b in basis]
    stack = np.stack([embed(B, volume) for B in probes])
    times = [float(t) for t in times]
    evolved = evolve_many(spec, stack, s, [s + t for t in times], tol)
    kops = [(x, a, embed(LocalOperator.pauli(x, a), volume)) for x in k_sites for a in basis]
    records = []
    for j, t in enumerate(times):
        Et = evolved[j]
        for x, a, P in kops:
            norms = batched_op_norm(_hermitize_commutator(P @ Et - Et @ P))
            for B, val in zip(probes, norms):
                X, Y = (x,), B.support
                records.append(
                    {
                        "k_site": x,
                        "k_op": a,
                        "b_site": Y[0],
                        "b_op": B.label[0],
                        "time": t,
                        "empirical": float(val),
                        "bound_sum": lr_bound_sum(cert, 2.0, 1.0, X, Y, t),
                        "bound_iterated": lr_bound_iterated(cert, 2.0, 1.0, X, Y, t),
                        "bound_exp": lr_bound_exponential(cert, 2.0, 1.0, X, Y, t),
                    }
                )
    return DominationScan(records, cert)
