"""
Euler products converge at first order
======================================

``T_n = prod_k (1 + (t/n) L(kt/n))`` approaches the propagator with an
error that halves whenever ``n`` doubles.  The a priori estimate is valid
but very loose, which the second panel makes plain.
"""

import matplotlib.pyplot as plt
import numpy as np

from irrevdyn.models import build
from irrevdyn.propagator import euler_report, propagator_matrix

spec = build("tfim-dephasing", None, 2)
t = 0.5
gamma = propagator_matrix(spec, 0.0, t, 1e-13).matrix
ns = np.unique(np.logspace(1, 3.3, 12).astype(int))
reports = [euler_report(spec, int(n), t, gamma=gamma) for n in ns]

fig, (a, b) = plt.subplots(1, 2, figsize=(9, 3.5))
a.loglog(ns, [r.error for r in reports], "o-", label="measured")
a.loglog(ns, reports[0].error * ns[0] / ns, "--", label="1/n")
a.set_xlabel("n")
a.legend()
b.semilogy(ns, [r.bound / r.error for r in reports], "o-")
b.set_xlabel("n")
b.set_ylabel("estimate / measured")
fig.tight_layout()
plt.show()
