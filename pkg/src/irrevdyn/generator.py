"""Time-dependent Lindblad-type generators on a finite volume.

Each :class:`InteractionTerm` on a site set ``Z`` contributes::

    Psi_Z(t)(A) = i[Phi(t, Z), A] + sum_a (L_a* A L_a - 1/2 {L_a* L_a, A})

with ``Phi(t, Z) = f(t) * phi`` and ``L_a(t, Z) = sqrt(r(t)) * L_a`` for
scalar profiles ``f`` (real) and ``r`` (nonnegative).  The generator acts
on observables (Heisenberg picture) and annihilates the identity.

Superoperator matrices use column stacking, ``vec(X A Y) = (Y.T kron X) vec(A)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy import sparse

from .algebra import LocalOperator, Volume, commutator, embed, op_norm
from .lattice import DecayFunction, power_law

__all__ = [
    "Profile",
    "Constant",
    "Sinusoidal",
    "PiecewiseLinear",
    "Custom",
    "CONSTANT",
    "InteractionTerm",
    "GeneratorSpec",
    "GeneratorMatrix",
    "DissipativityReport",
    "HypothesisReport",
    "psi_z",
    "assemble",
    "cb_norm_bound",
    "cb_norm_envelope",
    "psi_interaction_norm",
    "dissipativity_defect",
    "check_hypotheses",
    "superop_norm",
    "vec",
    "unvec",
    "SUPEROP_CAP",
]

# largest superoperator dimension (total_dim**2) built as a dense matrix
SUPEROP_CAP = 4096
_SPARSE_FILL = 0.15


def vec(A: np.ndarray) -> np.ndarray:
    """Column-stacking vectorization."""
    return np.asarray(A).reshape(-1, order="F")


def unvec(v: np.ndarray, dim: int | None = None) -> np.ndarray:
    v = np.asarray(v)
    if dim is None:
        dim = math.isqrt(v.size)
    return v.reshape(dim, dim, order="F")


def superop_norm(S) -> float:
    """Norm of a superoperator matrix induced by the Hilbert-Schmidt norm."""
    S = np.asarray(S)
    if not S.any():
        return 0.0
    return float(np.linalg.norm(S, 2))


# -- time profiles -----------------------------------------------------------


class Profile:
    """Scalar function of time with optional known envelope and Lipschitz constant."""

    is_constant = False

    def __call__(self, t: float) -> float:
        raise NotImplementedError

    def envelope(self, t_max: float) -> float | None:
        """``sup_{0 <= s <= t_max} |f(s)|`` when known exactly, else None."""
        return None

    @property
    def lipschitz(self) -> float | None:
        return None


@dataclass(frozen=True)
class Constant(Profile):
    value: float = 1.0
    is_constant = True

    def __call__(self, t):
        return self.value

    def envelope(self, t_max):
        return abs(self.value)

    @property
    def lipschitz(self):
        return 0.0


CONSTANT = Constant(1.0)


@dataclass(frozen=True)
class Sinusoidal(Profile):
    """``offset + amplitude * sin(omega * t + phase)``."""

    offset: float = 1.0
    amplitude: float = 0.5
    omega: float = 1.0
    phase: float = 0.0

    def __call__(self, t):
        return self.offset + self.amplitude * math.sin(self.omega * t + self.phase)

    def envelope(self, t_max):
        # global sup; an upper bound for any window
        return abs(self.offset) + abs(self.amplitude)

    @property
    def lipschitz(self):
        return abs(self.amplitude * self.omega)


@dataclass(frozen=True)
class PiecewiseLinear(Profile):
    """Continuous interpolation through ``(knots, values)``, constant outside."""

    knots: tuple[float, ...]
    values: tuple[float, ...]

    def __post_init__(self):
        if len(self.knots) != len(self.values) or not self.knots:
            raise ValueError("knots and values must be nonempty and of equal length")
        if any(b <= a for a, b in zip(self.knots, self.knots[1:])):
            raise ValueError("knots must be strictly increasing")

    def __call__(self, t):
        return float(np.interp(t, self.knots, self.values))

    def envelope(self, t_max):
        pts = [abs(self(0.0)), abs(self(t_max))]
        pts += [abs(v) for k, v in zip(self.knots, self.values) if 0.0 <= k <= t_max]
        return max(pts)

    @property
    def lipschitz(self):
        k, v = np.asarray(self.knots), np.asarray(self.values)
        if len(k) < 2:
            return 0.0
        return float(np.max(np.abs(np.diff(v) / np.diff(k))))


@dataclass(frozen=True, eq=False)
class Custom(Profile):
    """Arbitrary callable; sup over time falls back to sampling unless given."""

    func: Callable[[float], float]
    known_envelope: float | None = None
    known_lipschitz: float | None = None

    def __call__(self, t):
        return float(self.func(t))

    def envelope(self, t_max):
        return self.known_envelope

    @property
    def lipschitz(self):
        return self.known_lipschitz


# -- terms and specs ---------------------------------------------------------


@dataclass(frozen=True, eq=False)
class InteractionTerm:
    support: tuple
    phi: np.ndarray | None = None
    lindblads: tuple[np.ndarray, ...] = ()
    profile: Profile = CONSTANT
    rate_profile: Profile = CONSTANT
    label: str = ""
    check: bool = True

    def __post_init__(self):
        support = tuple(self.support)
        if not support:
            raise ValueError("term support must be nonempty")
        phi = None if self.phi is None else np.asarray(self.phi, dtype=complex)
        lind = tuple(np.asarray(L, dtype=complex) for L in self.lindblads)
        dims = {m.shape for m in ([phi] if phi is not None else []) + list(lind)}
        if len(dims) > 1:
            raise ValueError(f"term {self.label or support}: inconsistent matrix shapes {dims}")
        if dims:
            (shape,) = dims
            if len(shape) != 2 or shape[0] != shape[1]:
                raise ValueError(f"term {self.label or support}: matrices must be square")
        if self.check and phi is not None and op_norm(phi - phi.conj().T) > 1e-12:
            raise ValueError(f"term {self.label or support}: phi is not Hermitian")
        object.__setattr__(self, "support", support)
        object.__setattr__(self, "phi", phi)
        object.__setattr__(self, "lindblads", lind)

    @property
    def dim(self) -> int | None:
        if self.phi is not None:
            return self.phi.shape[0]
        return self.lindblads[0].shape[0] if self.lindblads else None

    def phi_at(self, t: float) -> np.ndarray | None:
        return None if self.phi is None else self.profile(t) * self.phi

    def lindblads_at(self, t: float) -> list[np.ndarray]:
        r = self.rate_profile(t)
        if self.lindblads and r < 0:
            raise ValueError(f"term {self.label or self.support}: negative rate {r} at t={t}")
        s = math.sqrt(max(r, 0.0))
        return [s * L for L in self.lindblads]

    @property
    def phi_norm(self) -> float:
        return 0.0 if self.phi is None else op_norm(self.phi)

    @property
    def lindblad_weight(self) -> float:
        return float(sum(op_norm(L) ** 2 for L in self.lindblads))

    def same_as(self, other: "InteractionTerm") -> bool:
        """Exact equality of data (used for restriction consistency)."""

        def eq(a, b):
            if a is None or b is None:
                return a is b
            return a.shape == b.shape and np.array_equal(a, b)

        return (
            self.support == other.support
            and eq(self.phi, other.phi)
            and len(self.lindblads) == len(other.lindblads)
            and all(eq(a, b) for a, b in zip(self.lindblads, other.lindblads))
            and self.profile == other.profile
            and self.rate_profile == other.rate_profile
        )


def _embed_term(m: np.ndarray, support, volume: Volume) -> np.ndarray:
    return embed(LocalOperator(support, m), volume)


def _maybe_sparse(M: np.ndarray):
    if np.count_nonzero(M) <= _SPARSE_FILL * M.size:
        return sparse.csr_array(M)
    return M


def _lmul(M, A):
    """``M @ A`` for dense or sparse ``M`` and ``A`` of shape (..., D, D)."""
    if not sparse.issparse(M):
        return M @ A
    D = A.shape[-1]
    lead = A.shape[:-2]
    At = np.moveaxis(A, -2, 0).reshape(D, -1)
    return np.moveaxis((M @ At).reshape((D,) + lead + (D,)), 0, -2)


def _rmul(A, M):
    """``A @ M`` for dense or sparse ``M``."""
    if not sparse.issparse(M):
        return A @ M
    D = A.shape[-1]
    return (A.reshape(-1, D) @ M).reshape(A.shape)


@dataclass
class _Compiled:
    """Embedded, profile-grouped generator data for fast evaluation."""

    ham: list  # (profile, H_full)
    diss: list  # (rate_profile, K_full, W_diag or None, [nondiagonal L_full])


@dataclass(frozen=True, eq=False)
class GeneratorSpec:
    volume: Volume
    terms: tuple[InteractionTerm, ...] = ()
    decay: DecayFunction = field(default_factory=power_law)
    _cache: dict = field(default_factory=dict, init=False, repr=False)

    def __post_init__(self):
        terms = tuple(self.terms)
        for term in terms:
            missing = [x for x in term.support if x not in self.volume]
            if missing:
                raise ValueError(f"term {term.label or term.support}: sites {missing} not in volume")
            if term.dim is not None and term.dim != self.volume.dim_of(term.support):
                raise ValueError(
                    f"term {term.label or term.support}: dimension {term.dim}, "
                    f"expected {self.volume.dim_of(term.support)}"
                )
        g = self.volume.graph
        terms = tuple(sorted(terms, key=lambda T: (sorted(g.indices(T.support)), T.label)))
        object.__setattr__(self, "terms", terms)

    @property
    def mu(self) -> float:
        return self.decay.mu

    @property
    def dim(self) -> int:
        return self.volume.total_dim

    @property
    def is_constant(self) -> bool:
        return all(T.profile.is_constant and T.rate_profile.is_constant for T in self.terms)

    def with_decay(self, decay: DecayFunction) -> "GeneratorSpec":
        return GeneratorSpec(self.volume, self.terms, decay)

    def restrict(self, volume: Volume) -> "GeneratorSpec":
        """Terms whose support lies inside ``volume``."""
        keep = tuple(T for T in self.terms if all(x in volume for x in T.support))
        return GeneratorSpec(volume, keep, self.decay)

    # compiled evaluation ---------------------------------------------------

    def _compiled(self) -> _Compiled:
        if "compiled" in self._cache:
            return self._cache["compiled"]
        D = self.dim
        ham: dict = {}
        diss: dict = {}
        for T in self.terms:
            if T.phi is not None and T.phi.any():
                H = _embed_term(T.phi, T.support, self.volume)
                ham[T.profile] = ham.get(T.profile, 0) + H
            for L in T.lindblads:
                if not L.any():
                    continue
                Lf = _embed_term(L, T.support, self.volume)
                K, W, nondiag = diss.get(T.rate_profile, (np.zeros((D, D), complex), None, []))
                K = K + Lf.conj().T @ Lf
                if np.count_nonzero(Lf - np.diag(np.diag(Lf))) == 0:
                    l = np.diag(Lf)
                    W = np.outer(l.conj(), l) + (0 if W is None else W)
                else:
                    nondiag = nondiag + [Lf]
                diss[T.rate_profile] = (K, W, nondiag)
        compiled = _Compiled(
            ham=[(p, _maybe_sparse(H)) for p, H in ham.items()],
            diss=[
                (p, _maybe_sparse(K), W, [(_maybe_sparse(L.conj().T), _maybe_sparse(L)) for L in nd])
                for p, (K, W, nd) in diss.items()
            ],
        )
        self._cache["compiled"] = compiled
        return compiled

    def apply(self, t: float, A: np.ndarray) -> np.ndarray:
        """Generator action on full-volume operators; ``A`` may carry leading batch axes."""
        A = np.asarray(A, dtype=complex)
        c = self._compiled()
        out = np.zeros_like(A)
        # i[H, A] - 1/2 {K, A} = P A + A Q with P = iH - K/2, Q = -iH - K/2
        # (Q = P^dagger only for Hermitian H; keep the literal form)
        P = Q = None
        for prof, H in c.ham:
            f = prof(t)
            if f:
                P = 1j * f * H if P is None else P + 1j * f * H
                Q = -1j * f * H if Q is None else Q - 1j * f * H
        for prof, K, W, nondiag in c.diss:
            r = prof(t)
            if r < 0:
                raise ValueError(f"negative rate {r} at t={t}")
            if not r:
                continue
            P = -0.5 * r * K if P is None else P - 0.5 * r * K
            Q = -0.5 * r * K if Q is None else Q - 0.5 * r * K
            if W is not None:
                out += r * (W * A)
            for Ld, L in nondiag:
                out += r * _rmul(_lmul(Ld, A), L)
        if P is not None:
            if sparse.issparse(Q):
                Q = Q.tocsr()
            out += _lmul(P, A) + _rmul(A, Q)
        return out

    def superop(self, t: float) -> np.ndarray:
        """Dense superoperator matrix of the generator at time ``t``."""
        D = self.dim
        if D * D > SUPEROP_CAP:
            raise ValueError(
                f"superoperator dimension {D * D} exceeds cap {SUPEROP_CAP}; "
                "use the matrix-free action"
            )
        pieces = self._superop_pieces()
        S = np.zeros((D * D, D * D), dtype=complex)
        for kind, prof, M in pieces:
            w = prof(t)
            if kind == "ham":
                if w:
                    S += w * M
            elif w:
                if w < 0:
                    raise ValueError(f"negative rate {w} at t={t}")
                S += w * M
        return S

    def _superop_pieces(self):
        if "superop" in self._cache:
            return self._cache["superop"]
        D = self.dim
        I = sparse.identity(D, dtype=complex, format="csr")

        def dense(M):
            return M.toarray() if sparse.issparse(M) else np.asarray(M)

        pieces = []
        c = self._compiled()
        for prof, H in c.ham:
            H = sparse.csr_array(dense(H))
            S = 1j * (sparse.kron(I, H) - sparse.kron(H.T, I))
            pieces.append(("ham", prof, S.toarray()))
        for prof, K, W, nondiag in c.diss:
            K = sparse.csr_array(dense(K))
            S = -0.5 * (sparse.kron(I, K) + sparse.kron(K.T, I))
            S = S.toarray()
            if W is not None:
                S += np.diag(vec(W))
            for Ld, L in nondiag:
                S += sparse.kron(sparse.csr_array(dense(L)).T, sparse.csr_array(dense(Ld))).toarray()
            pieces.append(("diss", prof, S))
        self._cache["superop"] = pieces
        return pieces


@dataclass(frozen=True)
class GeneratorMatrix:
    time: float
    matrix: np.ndarray
    vec_convention: str = "column-stacking"

    def unit_defect(self) -> float:
        D = math.isqrt(self.matrix.shape[0])
        return float(np.linalg.norm(self.matrix @ vec(np.eye(D))))


# -- operations --------------------------------------------------------------


def psi_z(term: InteractionTerm, t: float, A: np.ndarray) -> np.ndarray:
    """Single-term generator ``Psi_Z(t)`` applied to an operator on ``H_Z``."""
    A = np.asarray(A, dtype=complex)
    if term.dim is not None and A.shape != (term.dim, term.dim):
        raise ValueError(f"operator shape {A.shape} does not match term dimension {term.dim}")
    out = np.zeros_like(A)
    phi = term.phi_at(t)
    if phi is not None:
        out += 1j * commutator(phi, A)
    for L in term.lindblads_at(t):
        Ld = L.conj().T
        LdL = Ld @ L
        out += Ld @ A @ L - 0.5 * (LdL @ A + A @ LdL)
    return out


def assemble(spec: GeneratorSpec, t: float) -> GeneratorMatrix:
    return GeneratorMatrix(t, spec.superop(t))


def cb_norm_bound(term: InteractionTerm, t: float) -> float:
    """``2 ||Phi(t,Z)|| + 2 sum_a ||L_a(t,Z)||**2``."""
    return 2.0 * abs(term.profile(t)) * term.phi_norm + 2.0 * max(
        term.rate_profile(t), 0.0
    ) * term.lindblad_weight


def cb_norm_envelope(term: InteractionTerm, t_max: float) -> float | None:
    """Upper bound of :func:`cb_norm_bound` over ``[0, t_max]``, or None if unknown."""
    ef = term.profile.envelope(t_max) if term.phi is not None else 0.0
    er = term.rate_profile.envelope(t_max) if term.lindblads else 0.0
    if ef is None or er is None:
        return None
    return 2.0 * ef * term.phi_norm + 2.0 * er * term.lindblad_weight


def _pair_sums(spec: GeneratorSpec, weights: Sequence[float], exclude_single_site: bool):
    n = spec.volume.n_sites
    W = np.zeros((n, n))
    g = spec.volume.graph
    for T, w in zip(spec.terms, weights):
        if exclude_single_site and len(T.support) == 1:
            continue
        idx = g.indices(T.support)
        W[np.ix_(idx, idx)] += w
    return W


def psi_interaction_norm(
    spec: GeneratorSpec,
    t_max: float,
    n_samples: int = 101,
    exclude_single_site: bool = False,
    return_rigorous: bool = False,
):
    """``sup_{s<=t_max} sup_{x,y} sum_{Z ∋ x,y} ||Psi_Z(s)||_cb / F_mu(d(x,y))``.

    The cb-norm is replaced by its explicit upper bound.  Known profile
    envelopes are used when every term has one; otherwise the time sup is
    sampled on ``n_samples`` uniform points and the result is flagged as
    non-rigorous.
    """
    if t_max < 0:
        raise ValueError("t_max must be >= 0")
    if spec.decay is None:
        raise ValueError("spec has no decay rate mu")
    if not spec.terms:
        return (0.0, True) if return_rigorous else 0.0
    denom = spec.decay.F_mu(spec.volume.graph.dist)
    env = [cb_norm_envelope(T, t_max) for T in spec.terms]
    if all(e is not None for e in env):
        value = float(np.max(_pair_sums(spec, env, exclude_single_site) / denom))
        rigorous = True
    else:
        value = 0.0
        for s in np.linspace(0.0, t_max, n_samples):
            w = [cb_norm_bound(T, s) for T in spec.terms]
            value = max(value, float(np.max(_pair_sums(spec, w, exclude_single_site) / denom)))
        rigorous = False
    return (value, rigorous) if return_rigorous else value


def generator_lipschitz(spec: GeneratorSpec) -> float | None:
    """Lipschitz constant of ``t -> L(t)`` from the profiles' constants, if all known."""
    total = 0.0
    for T in spec.terms:
        lf = T.profile.lipschitz if T.phi is not None else 0.0
        lr = T.rate_profile.lipschitz if T.lindblads else 0.0
        if lf is None or lr is None:
            return None
        total += 2.0 * lf * T.phi_norm + 2.0 * lr * T.lindblad_weight
    return total


@dataclass(frozen=True)
class DissipativityReport:
    min_eigenvalue: float
    commutator_form_min_eigenvalue: float
    residual: float


def dissipativity_defect(spec: GeneratorSpec, t: float, A: np.ndarray) -> DissipativityReport:
    """Spectrum of ``L(A*A) - L(A*)A - A*L(A)`` and its commutator-sum form."""
    A = np.asarray(A, dtype=complex)
    Ad = A.conj().T
    lhs = spec.apply(t, Ad @ A) - spec.apply(t, Ad) @ A - Ad @ spec.apply(t, A)
    rhs = np.zeros_like(A)
    for T in spec.terms:
        for L in T.lindblads_at(t):
            if not L.any():
                continue
            C = commutator(A, embed(LocalOperator(T.support, L), spec.volume))
            rhs += C.conj().T @ C
    herm = 0.5 * (lhs + lhs.conj().T)
    return DissipativityReport(
        min_eigenvalue=float(np.linalg.eigvalsh(herm).min()),
        commutator_form_min_eigenvalue=float(np.linalg.eigvalsh(0.5 * (rhs + rhs.conj().T)).min()),
        residual=op_norm(lhs - rhs),
    )


@dataclass(frozen=True)
class HypothesisReport:
    unit_defect: float
    hermiticity_defect: float
    dissipativity_min: float
    dissipativity_residual: float
    continuity_modulus: float
    delta: float
    tol: float = 1e-10

    @property
    def ok(self) -> bool:
        return (
            self.unit_defect <= self.tol
            and self.hermiticity_defect <= self.tol
            and self.dissipativity_min >= -self.tol
            and self.dissipativity_residual <= self.tol
        )

    def as_dict(self) -> dict:
        return {
            "unit_defect": self.unit_defect,
            "hermiticity_defect": self.hermiticity_defect,
            "dissipativity_min": self.dissipativity_min,
            "dissipativity_residual": self.dissipativity_residual,
            "continuity_modulus": self.continuity_modulus,
            "delta": self.delta,
            "tol": self.tol,
            "ok": self.ok,
        }


def random_operator(D: int, rng: np.random.Generator, normalize: bool = True) -> np.ndarray:
    A = rng.standard_normal((D, D)) + 1j * rng.standard_normal((D, D))
    return A / op_norm(A) if normalize else A


def check_hypotheses(
    spec: GeneratorSpec,
    t_grid: Sequence[float],
    n_random: int = 5,
    seed: int = 0,
    tol: float = 1e-10,
) -> HypothesisReport:
    """Evaluate the three algebraic generator hypotheses and norm continuity on a grid.

    The continuity modulus is ``max ||L(t + delta) - L(t)||`` with ``delta``
    the grid spacing, measured in the Hilbert-Schmidt-induced norm when the
    superoperator fits the cap and on random probes otherwise.
    """
    rng = np.random.default_rng(seed)
    t_grid = [float(t) for t in t_grid]
    D = spec.dim
    I = np.eye(D, dtype=complex)
    unit = herm = 0.0
    dmin = np.inf
    dres = 0.0
    for t in t_grid:
        unit = max(unit, op_norm(spec.apply(t, I)))
        for _ in range(n_random):
            A = random_operator(D, rng)
            herm = max(herm, op_norm(spec.apply(t, A.conj().T) - spec.apply(t, A).conj().T))
            rep = dissipativity_defect(spec, t, A)
            dmin = min(dmin, rep.min_eigenvalue)
            dres = max(dres, rep.residual)
    delta = float(np.min(np.diff(t_grid))) if len(t_grid) > 1 else 0.0
    cont = 0.0
    if delta > 0 and not spec.is_constant:
        use_superop = D * D <= SUPEROP_CAP
        probes = [random_operator(D, rng) for _ in range(n_random)]
        for t in t_grid:
            if use_superop:
                cont = max(cont, superop_norm(spec.superop(t + delta) - spec.superop(t)))
            else:
                for A in probes:
                    diff = spec.apply(t + delta, A) - spec.apply(t, A)
                    cont = max(cont, np.linalg.norm(diff) / np.linalg.norm(A))
    return HypothesisReport(
        unit_defect=unit,
        hermiticity_defect=herm,
        dissipativity_min=float(dmin if np.isfinite(dmin) else 0.0),
        dissipativity_residual=dres,
        continuity_modulus=float(cont),
        delta=delta,
        tol=tol,
    )


def m_t(spec: GeneratorSpec, t: float, f_norm: float | None = None) -> float:
    """``M_t = ||Psi||_{t,mu} * |Lambda| * ||F||``, an upper bound for ``||L(s)||``, s <= t."""
    if f_norm is None:
        f_norm = spec.decay.f_norm(spec.volume.graph).value
    return psi_interaction_norm(spec, t) * spec.volume.n_sites * f_norm
