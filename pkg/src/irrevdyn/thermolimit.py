"""Cauchy behaviour of finite-volume dynamics along nested volumes.

For ``Lambda_m`` inside ``Lambda_n`` and ``A`` supported on ``X`` inside
``Lambda_m`` the difference of the two evolutions is bounded by::

    ||A|| ||Psi||_{t,mu} (int_s^t exp(mu v_{r,mu} r) dr) |X|
        * sup_{x in X} sum_{z in Lambda_n \\ Lambda_m} F_mu(d(x, z))

The chain of estimates producing it carries ``C_mu`` once as a divisor and
once as a factor; they cancel and only the exponent keeps ``C_mu`` through
``mu v_{r,mu} = ||Psi||_{r,mu} C_mu``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy import integrate

from .algebra import LocalOperator, Volume, embed, op_norm
from .generator import GeneratorSpec, psi_interaction_norm
from .lattice import DecayFunction, centered_chain
from .lrbound import LRCertificate, certificate
from .models import build, default_decay
from .propagator import DEFAULT_TOL, evolve

__all__ = [
    "VolumeSequence",
    "CauchySweep",
    "centered_chain_sequence",
    "volume_difference",
    "difference_bound",
    "cauchy_sweep",
    "chain_tail_sum",
    "sequence_certificate",
]


@dataclass(frozen=True, eq=False)
class VolumeSequence:
    """Strictly nested volumes with a rule producing each volume's generator."""

    volumes: tuple[Volume, ...]
    spec_family: Callable[[Volume], GeneratorSpec]

    def __post_init__(self):
        vols = tuple(self.volumes)
        for a, b in zip(vols, vols[1:]):
            if not set(a.sites) < set(b.sites):
                raise ValueError("volumes must be strictly nested")
        object.__setattr__(self, "volumes", vols)
        object.__setattr__(self, "_specs", {})

    def __len__(self):
        return len(self.volumes)

    def spec(self, n: int) -> GeneratorSpec:
        if n not in self._specs:
            self._specs[n] = self.spec_family(self.volumes[n])
        return self._specs[n]

    def added_sites(self, n: int, m: int) -> list:
        inner = set(self.volumes[m].sites)
        return [z for z in self.volumes[n].sites if z not in inner]

    def check_restriction(self) -> None:
        """Each smaller spec equals the restriction of every larger one (exact)."""
        for n in range(1, len(self)):
            big = self.spec(n)
            for m in range(n):
                small = self.spec(m)
                inner = set(self.volumes[m].sites)
                kept = [T for T in big.terms if set(T.support) <= inner]
                if len(kept) != len(small.terms):
                    raise ValueError(f"volume {m}: {len(small.terms)} terms, restriction of {n} has {len(kept)}")
                by_key = {(frozenset(T.support), T.label): T for T in small.terms}
                for T in kept:
                    S = by_key.get((frozenset(T.support), T.label))
                    if S is None or not S.same_as(T):
                        raise ValueError(f"term on {T.support} differs between volumes {m} and {n}")

    def generator_restriction_defect(self, n: int, m: int, n_probes: int = 3, seed: int = 0) -> float:
        """Action of the Lambda_n terms inside Lambda_m versus the Lambda_m generator on probes."""
        rng = np.random.default_rng(seed)
        big, small = self.spec(n), self.spec(m)
        inner = set(self.volumes[m].sites)
        sub = GeneratorSpec(big.volume, tuple(T for T in big.terms if set(T.support) <= inner), big.decay)
        D = small.dim
        worst = 0.0
        for _ in range(n_probes):
            A = rng.standard_normal((D, D)) + 1j * rng.standard_normal((D, D))
            lhs = sub.apply(0.0, _lift(A, self.volumes[m], big.volume))
            rhs = _lift(small.apply(0.0, A), self.volumes[m], big.volume)
            worst = max(worst, op_norm(lhs - rhs))
        return worst


def _lift(A: np.ndarray, inner: Volume, outer: Volume) -> np.ndarray:
    return embed(LocalOperator(inner.sites, A), outer)


def centered_chain_sequence(
    model: str,
    params: dict | None = None,
    half_widths: Sequence[int] = (1, 2, 3, 4),
    decay: DecayFunction | None = None,
) -> VolumeSequence:
    """Centered chain intervals ``[-L, L]`` for each ``L`` in ``half_widths``."""
    vols = tuple(Volume(centered_chain(L)) for L in half_widths)
    decay = decay or default_decay(vols[-1].graph)
    return VolumeSequence(vols, lambda V: build(model, params, V, decay))


def sequence_certificate(seq: VolumeSequence, t_max: float) -> LRCertificate:
    """Certificate with ``||Psi||`` maximized over every volume of the sequence."""
    psi = max(psi_interaction_norm(seq.spec(n), t_max) for n in range(len(seq)))
    return certificate(seq.spec(len(seq) - 1), t_max, psi_norm=psi)


def volume_difference(
    seq: VolumeSequence, A: LocalOperator, n: int, m: int, s: float, t: float, tol: float = DEFAULT_TOL
) -> float:
    """``||gamma^{(n)}_{t,s}(A) - gamma^{(m)}_{t,s}(A)||`` with both embedded in ``Lambda_n``."""
    if m > n:
        raise ValueError("need m <= n")
    Vm, Vn = seq.volumes[m], seq.volumes[n]
    missing = [x for x in A.support if x not in Vm]
    if missing:
        raise ValueError(f"observable support {missing} not inside volume {m}")
    if n == m:
        return 0.0
    An = evolve(seq.spec(n), A, s, t, tol)
    Am = evolve(seq.spec(m), A, s, t, tol)
    return op_norm(An - _lift(Am, Vm, Vn))


def _time_integral(cert: LRCertificate, s: float, t: float, psi_of_r: Callable[[float], float] | None) -> float:
    """``int_s^t exp(mu v_{r,mu} r) dr`` with ``mu v_{r,mu} = ||Psi||_{r,mu} C_mu``."""
    if t <= s:
        return 0.0
    if psi_of_r is None:
        k = cert.rate
        if k == 0:
            return t - s
        if k * t > 700:
            return math.inf
        return (math.exp(k * t) - math.exp(k * s)) / k
    val, _ = integrate.quad(lambda r: math.exp(psi_of_r(r) * cert.c_mu * r), s, t, limit=200)
    return val


def difference_bound(
    seq: VolumeSequence,
    A: LocalOperator,
    n: int,
    m: int,
    s: float,
    t: float,
    cert: LRCertificate,
) -> float:
    """Upper bound on :func:`volume_difference` (cancelled form, see module docstring).

    The time integral is closed-form when the certificate's interaction
    norm is an exact envelope, and a quadrature over the sampled
    ``||Psi||_{r,mu}`` otherwise.
    """
    added = seq.added_sites(n, m)
    if not added or t <= s:
        return 0.0
    g = seq.volumes[n].graph
    X = list(A.support)
    Fm = cert.decay.F_mu(g.dist[np.ix_(g.indices(X), g.indices(added))])
    zsum = float(Fm.sum(axis=1).max())
    psi_of_r = None
    if not cert.rigorous:
        spec = seq.spec(n)
        psi_of_r = lambda r: psi_interaction_norm(spec, r)  # noqa: E731
    I = _time_integral(cert, s, t, psi_of_r)
    return A.norm * cert.psi_norm * I * len(X) * zsum


def chain_tail_sum(decay: DecayFunction, x: int, half_width: int) -> float:
    """Upper bound for ``sum_{|z| > half_width} F_mu(|x - z|)`` over the integer line."""

    def one_side(k0: int) -> float:
        # sum_{k >= k0} F_mu(k)
        if decay.mu > 0:
            K = k0 + int(math.ceil(60.0 / decay.mu)) + 1
            ks = np.arange(k0, K)
            head = float(np.sum(decay.F_mu(ks)))
            return head + float(decay.F_mu(K)) / (1.0 - math.exp(-decay.mu))
        if decay.kind != "power" or decay.alpha <= 1:
            raise ValueError("tail needs mu > 0 or a summable power law")
        K = k0 + 100_000
        ks = np.arange(k0, K)
        return float(np.sum(decay.F(ks))) + (1.0 + K - 1) ** (1.0 - decay.alpha) / (decay.alpha - 1.0)

    return one_side(half_width + 1 - x) + one_side(half_width + 1 + x)


@dataclass
class CauchySweep:
    rows: list[dict]
    slope: float
    certified_tail: float | None
    certificate: LRCertificate

    @property
    def dominated(self) -> bool:
        return all(r["measured"] <= r["bound"] for r in self.rows)

    @property
    def monotone(self) -> bool:
        m = [r["measured"] for r in self.rows]
        return all(b <= a for a, b in zip(m, m[1:]))


def cauchy_sweep(
    seq: VolumeSequence,
    A: LocalOperator,
    s: float,
    t: float,
    tol: float = DEFAULT_TOL,
    cert: LRCertificate | None = None,
) -> CauchySweep:
    """Consecutive volume differences, their bounds, the decay slope and the certified tail.

    ``slope`` is the least-squares slope of ``log(measured)`` against the
    distance from ``support(A)`` to the sites added at each step.
    """
    if cert is None:
        cert = sequence_certificate(seq, t)
    evolved = [evolve(seq.spec(k), A, s, t, tol) for k in range(len(seq))]
    rows = []
    for k in range(1, len(seq)):
        Vn, Vm = seq.volumes[k], seq.volumes[k - 1]
        measured = op_norm(evolved[k] - _lift(evolved[k - 1], Vm, Vn))
        bound = difference_bound(seq, A, k, k - 1, s, t, cert)
        dist = Vn.graph.set_distance(A.support, seq.added_sites(k, k - 1))
        rows.append(
            {
                "n": k,
                "sites": Vn.n_sites,
                "boundary_distance": dist,
                "measured": measured,
                "bound": bound,
                "ratio": measured / bound if bound > 0 else (0.0 if measured == 0 else math.inf),
            }
        )
    pts = [(r["boundary_distance"], math.log(r["measured"])) for r in rows if r["measured"] > 0]
    slope = float(np.polyfit(*zip(*pts), 1)[0]) if len(pts) >= 2 else float("nan")
    tail = None
    last = seq.volumes[-1]
    if last.graph.family_tag == "chain-Z1" and all(isinstance(x, int) for x in last.sites):
        L = max(abs(x) for x in last.sites)
        if set(last.sites) == set(range(-L, L + 1)):
            zs = max(chain_tail_sum(cert.decay, x, L) for x in A.support)
            tail = A.norm * cert.psi_norm * _time_integral(cert, s, t, None) * len(A.support) * zs
    return CauchySweep(rows, slope, tail, cert)
