"""
Dephasing as a quantum channel
==============================

A single qubit under ``L = sqrt(gamma) sigma_z``.  In the Heisenberg
picture ``sigma_x`` decays as ``exp(-2 gamma t)`` while ``sigma_z`` stays
put.  We check this against the propagator and look at the Choi spectrum
of the resulting channel.
"""

import matplotlib.pyplot as plt
import numpy as np

from irrevdyn.algebra import pauli
from irrevdyn.models import build
from irrevdyn.propagator import choi_matrix, evolve_many, propagator_matrix

gamma = 0.5
spec = build("dephasing", {"gamma": gamma}, 1)
times = np.linspace(0, 3, 31)

# %%
# Evolve the two Pauli observables and read off one matrix element each.

sx = np.array([A[0, 1].real for A in evolve_many(spec, pauli("X"), 0.0, times)])
sz = np.array([A[0, 0].real for A in evolve_many(spec, pauli("Z"), 0.0, times)])

fig, ax = plt.subplots()
ax.plot(times, sx, "o", label=r"$\sigma_x(t)$, numerical")
ax.plot(times, np.exp(-2 * gamma * times), label=r"$e^{-2\gamma t}$")
ax.plot(times, sz, "s", label=r"$\sigma_z(t)$")
ax.set_xlabel("t")
ax.legend()

# %%
# The Choi matrix of the Schrodinger-picture channel has eigenvalues
# ``1 +- exp(-2 gamma t)`` and two zeros, so it is positive for every t.

P = propagator_matrix(spec, 0.0, 1.0)
print(np.round(np.linalg.eigvalsh(choi_matrix(P.matrix.conj().T)), 6))
plt.show()
