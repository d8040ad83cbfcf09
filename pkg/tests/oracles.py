"""Reference computations written independently of the package internals.

Everything here builds operators from explicit Kronecker products and
superoperators by applying the Lindblad formula to matrix units, so a
convention error inside the package cannot cancel against itself.
"""

from functools import reduce

import numpy as np
from scipy.linalg import expm

I2 = np.eye(2, dtype=complex)
SX = np.array([[0, 1], [1, 0]], dtype=complex)
SY = np.array([[0, -1j], [1j, 0]], dtype=complex)
SZ = np.array([[1, 0], [0, -1]], dtype=complex)
SM = np.array([[0, 0], [1, 0]], dtype=complex)  # |0> -> |1>, |0> has sigma_z = +1


def kron_all(ops):
    return reduce(np.kron, ops)


def site_op(op, site, n):
    """``op`` on ``site`` of an ``n``-qubit chain, site 0 most significant."""
    return kron_all([op if k == site else I2 for k in range(n)])


def bond_op(a, b, i, j, n):
    return site_op(a, i, n) @ site_op(b, j, n)


def lindblad_map(H, Ls):
    """Heisenberg-picture generator ``A -> i[H,A] + sum L*AL - 1/2{L*L,A}``."""

    def f(A):
        out = 1j * (H @ A - A @ H)
        for L in Ls:
            Ld = L.conj().T
            out = out + Ld @ A @ L - 0.5 * (Ld @ L @ A + A @ Ld @ L)
        return out

    return f


def superop_of(f, D):
    """Matrix of a linear map on D x D matrices, column-stacked (vec(A) = A.ravel('F'))."""
    S = np.zeros((D * D, D * D), dtype=complex)
    for j in range(D):
        for i in range(D):
            E = np.zeros((D, D), dtype=complex)
            E[i, j] = 1.0
            S[:, i + j * D] = f(E).ravel(order="F")
    return S


def apply_superop(S, A):
    D = A.shape[0]
    return (S @ A.ravel(order="F")).reshape((D, D), order="F")


def expm_evolve(H, Ls, A, t):
    D = A.shape[0]
    return apply_superop(expm(t * superop_of(lindblad_map(H, Ls), D)), A)


def tfim_dephasing(n, J=1.0, h=1.0, gamma=0.1):
    H = sum(J * bond_op(SZ, SZ, k, k + 1, n) for k in range(n - 1)) if n > 1 else np.zeros((2, 2), complex)
    H = H + sum(h * site_op(SX, k, n) for k in range(n))
    Ls = [np.sqrt(gamma) * site_op(SZ, k, n) for k in range(n)]
    return H, Ls


def heisenberg_dephasing(n, J=1.0, gamma=0.1):
    H = sum(
        J * (bond_op(SX, SX, k, k + 1, n) + bond_op(SY, SY, k, k + 1, n) + bond_op(SZ, SZ, k, k + 1, n))
        for k in range(n - 1)
    )
    Ls = [np.sqrt(gamma) * site_op(SZ, k, n) for k in range(n)]
    return H, Ls


def spectral_norm(M):
    return float(np.linalg.svd(M, compute_uv=False)[0])


def zeta2_chain_norm():
    """``sum_{n in Z} (1+|n|)^-2 = 2 zeta(2) - 1 = pi^2/3 - 1``."""
    return np.pi**2 / 3 - 1
