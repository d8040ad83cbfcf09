"""Tensor-product operator algebra on a finite volume.

Sites are ordered as in the volume's vertex list and every Kronecker
product is site-0-major: the first listed site is the most significant
tensor factor.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import reduce
from typing import Hashable, Sequence

import numpy as np

from .lattice import MetricGraph

__all__ = [
    "Volume",
    "LocalOperator",
    "PAULI",
    "pauli",
    "pauli_string",
    "embed",
    "op_norm",
    "commutator",
    "anticommutator",
    "minimal_support",
    "weyl_basis",
    "MAX_TOTAL_DIM",
]

MAX_TOTAL_DIM = 4096

PAULI = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
    # sigma_minus lowers |0> (sigma_z = +1) to |1> (sigma_z = -1)
    "-": np.array([[0, 0], [1, 0]], dtype=complex),
    "+": np.array([[0, 1], [0, 0]], dtype=complex),
}


def pauli(name: str) -> np.ndarray:
    return PAULI[name.upper() if name not in "+-" else name].copy()


def pauli_string(s: str) -> np.ndarray:
    """Kronecker product of single-qubit factors, e.g. ``"XZ"``."""
    return reduce(np.kron, (pauli(c) for c in s))


@dataclass(frozen=True, eq=False)
class Volume:
    graph: MetricGraph
    site_dims: tuple[int, ...] | int = 2
    cap: int = MAX_TOTAL_DIM
    _dims: dict = field(init=False, repr=False)

    def __post_init__(self):
        n = len(self.graph)
        dims = self.site_dims
        if isinstance(dims, int):
            dims = (dims,) * n
        dims = tuple(int(d) for d in dims)
        if len(dims) != n:
            raise ValueError(f"{len(dims)} site dimensions for {n} sites")
        if any(d < 1 for d in dims):
            raise ValueError("site dimensions must be positive")
        if self.cap > MAX_TOTAL_DIM:
            raise ValueError(f"cap {self.cap} exceeds the absolute limit {MAX_TOTAL_DIM}")
        total = int(np.prod(dims))
        if total > self.cap:
            raise ValueError(
                f"Hilbert dimension {total} exceeds cap {self.cap}; use fewer sites"
            )
        object.__setattr__(self, "site_dims", dims)
        object.__setattr__(self, "_dims", dict(zip(self.graph.vertices, dims)))

    @property
    def sites(self) -> tuple:
        return self.graph.vertices

    @property
    def n_sites(self) -> int:
        return len(self.graph)

    @property
    def total_dim(self) -> int:
        return int(np.prod(self.site_dims))

    def dim_of(self, sites: Sequence[Hashable]) -> int:
        return int(np.prod([self._dims[x] for x in sites])) if len(sites) else 1

    def __contains__(self, site) -> bool:
        return site in self._dims

    def identity(self) -> np.ndarray:
        return np.eye(self.total_dim, dtype=complex)

    def sub(self, sites: Sequence[Hashable]) -> "Volume":
        ordered = [x for x in self.sites if x in set(sites)]
        return Volume(self.graph.subgraph(ordered), tuple(self._dims[x] for x in ordered), self.cap)


@dataclass(frozen=True)
class LocalOperator:
    """Matrix acting on the tensor product of the listed sites, in listed order."""

    support: tuple
    matrix: np.ndarray
    label: str = ""

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=complex)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ValueError(f"operator matrix must be square, got shape {m.shape}")
        if len(set(self.support)) != len(self.support):
            raise ValueError("repeated site in support")
        object.__setattr__(self, "support", tuple(self.support))
        object.__setattr__(self, "matrix", m)

    @classmethod
    def pauli(cls, site, name: str) -> "LocalOperator":
        return cls((site,), pauli(name), f"{name}{site}")

    @property
    def norm(self) -> float:
        return op_norm(self.matrix)

    def check_dims(self, volume: Volume) -> None:
        expected = volume.dim_of(self.support)
        if self.matrix.shape[0] != expected:
            raise ValueError(
                f"operator on {self.support} has dimension {self.matrix.shape[0]}, expected {expected}"
            )


def _permute_to_volume(m: np.ndarray, support: Sequence, volume: Volume) -> np.ndarray:
    """Tensor ``m`` (on ``support`` in given order) with identities and reorder to volume order."""
    rest = [x for x in volume.sites if x not in set(support)]
    order = list(support) + rest
    full = np.kron(m, np.eye(volume.dim_of(rest), dtype=complex)) if rest else m
    if order == list(volume.sites):
        return full
    dims = [volume._dims[x] for x in order]
    n = len(order)
    perm = [order.index(x) for x in volume.sites]
    t = full.reshape(dims + dims)
    t = t.transpose(perm + [n + p for p in perm])
    D = volume.total_dim
    return t.reshape(D, D)


def embed(A: LocalOperator, volume: Volume) -> np.ndarray:
    """``A`` tensored with the identity on the rest of ``volume``."""
    missing = [x for x in A.support if x not in volume]
    if missing:
        raise ValueError(f"support sites {missing} are not in the volume")
    A.check_dims(volume)
    return _permute_to_volume(A.matrix, A.support, volume)


def op_norm(M) -> float:
    """Operator norm (largest singular value)."""
    M = np.asarray(M)
    if M.size == 0:
        return 0.0
    if M.shape[0] == M.shape[1] and np.allclose(M, M.conj().T, atol=0, rtol=0):
        return float(np.max(np.abs(np.linalg.eigvalsh(M))))
    return float(np.linalg.norm(M, 2))


def _check_pair(A, B):
    A, B = np.asarray(A), np.asarray(B)
    if A.shape != B.shape:
        raise ValueError(f"dimension mismatch: {A.shape} vs {B.shape}")
    return A, B


def commutator(A, B) -> np.ndarray:
    A, B = _check_pair(A, B)
    return A @ B - B @ A


def anticommutator(A, B) -> np.ndarray:
    A, B = _check_pair(A, B)
    return A @ B + B @ A


def weyl_basis(d: int) -> list[np.ndarray]:
    """The d**2 clock-and-shift unitaries, an orthogonal basis of d x d matrices."""
    shift = np.roll(np.eye(d, dtype=complex), 1, axis=0)
    clock = np.diag(np.exp(2j * np.pi * np.arange(d) / d))
    return [
        np.linalg.matrix_power(shift, a) @ np.linalg.matrix_power(clock, b)
        for a in range(d)
        for b in range(d)
    ]


def minimal_support(M, volume: Volume, tol: float = 1e-10) -> tuple:
    """Smallest site set outside of which ``M`` acts as the identity.

    A site is dropped when conjugating ``M`` by every single-site
    clock-and-shift unitary on it changes ``M`` by at most ``tol``.
    """
    M = np.asarray(M)
    D = volume.total_dim
    if M.shape != (D, D):
        raise ValueError(f"expected a {D}x{D} matrix, got {M.shape}")
    support = []
    for x in volume.sites:
        d = volume._dims[x]
        for U in weyl_basis(d)[1:]:
            Uf = embed(LocalOperator((x,), U), volume)
            if op_norm(Uf @ M @ Uf.conj().T - M) > tol:
                support.append(x)
                break
    return tuple(support)
