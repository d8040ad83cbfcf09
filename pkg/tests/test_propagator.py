import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.linalg import expm

from irrevdyn.algebra import LocalOperator, Volume, op_norm
from irrevdyn.generator import GeneratorSpec, InteractionTerm, Sinusoidal, superop_norm, vec
from irrevdyn.lattice import chain
from irrevdyn.models import build
from irrevdyn.propagator import (
    _step_condition,
    choi_check,
    choi_matrix,
    cocycle_defect,
    euler_product,
    euler_report,
    evolve,
    evolve_many,
    propagator_matrix,
)

from oracles import SX, SY, SZ, apply_superop, expm_evolve, lindblad_map, superop_of, tfim_dephasing


def deph(gamma=0.5, n=1):
    return build("dephasing", {"gamma": gamma}, n)


def test_zero_generator_leaves_observables():
    spec = deph(0.0, 2)
    A = np.arange(16).reshape(4, 4).astype(complex)
    assert np.array_equal(evolve(spec, A, 0.0, 3.0), A)


def test_dephasing_closed_form():
    out = evolve(deph(0.5), LocalOperator.pauli(0, "X"), 0.0, 1.0)
    assert np.allclose(out, math.exp(-1) * SX, atol=1e-9, rtol=0)
    assert out[0, 1].real == pytest.approx(0.367879, abs=1e-6)


def test_precession_closed_form():
    w = 1.7
    spec = GeneratorSpec(Volume(chain(1)), (InteractionTerm((0,), phi=0.5 * w * SZ),))
    for t in (0.3, 1.0, 2.5):
        out = evolve(spec, SX, 0.0, t)
        assert np.allclose(out, math.cos(w * t) * SX - math.sin(w * t) * SY, atol=1e-9, rtol=0)


def test_evolve_many_order_and_validation():
    spec = deph(0.5)
    outs = evolve_many(spec, SX, 0.0, [1.0, 0.0, 0.5])
    for t, o in zip([1.0, 0.0, 0.5], outs):
        assert np.allclose(o, math.exp(-t) * SX, atol=1e-9)
    with pytest.raises(ValueError):
        evolve(spec, SX, 1.0, 0.5)
    with pytest.raises(ValueError, match="shape"):
        evolve(spec, np.eye(4), 0.0, 1.0)


def test_propagator_identity_at_equal_times():
    P = propagator_matrix(build("tfim-dephasing", None, 2), 0.7, 0.7)
    assert np.array_equal(P.matrix, np.eye(16))


@pytest.mark.parametrize("n", [1, 2, 3, 5])
def test_propagator_matches_expm_oracle(n):
    H, Ls = tfim_dephasing(n)
    spec = build("tfim-dephasing", None, n)
    tol = 1e-10
    P = propagator_matrix(spec, 0.2, 0.9, tol)
    ref = expm(0.7 * superop_of(lindblad_map(H, Ls), 2**n))
    assert superop_norm(P.matrix - ref) <= 10 * tol * max(1.0, superop_norm(ref))


def test_dephasing_pauli_transfer_matrix():
    P = propagator_matrix(deph(0.5), 0.0, 1.0)
    basis = [np.eye(2), SX, SY, SZ]
    R = np.array([[np.trace(a.conj().T @ P(b)).real / 2 for b in basis] for a in basis])
    assert np.allclose(R, np.diag([1, math.exp(-1), math.exp(-1), 1]), atol=1e-9)


def test_matrix_free_above_cap_and_batched_calls():
    spec = build("tfim-dephasing", None, 7)
    P = propagator_matrix(spec, 0.0, 0.2, 1e-8)
    assert not P.is_matrix
    assert P.unit_defect() <= 1e-8
    small = build("tfim-dephasing", None, 2)
    Q = propagator_matrix(small, 0.0, 0.4)
    rng = np.random.default_rng(0)
    A = rng.standard_normal((3, 4, 4))
    batch = Q(A)
    assert np.allclose(batch[1], Q(A[1]), atol=1e-14)
    assert np.allclose(batch[2], evolve(small, A[2], 0.0, 0.4), atol=1e-8)


@settings(max_examples=15)
@given(st.sampled_from(["dephasing", "amplitude-damping", "tfim-dephasing", "driven-xy", "random-decaying"]),
       st.floats(0, 1), st.floats(0, 1), st.integers(0, 1000))
def test_propagator_is_unital_and_contractive(name, s, dt, seed):
    params = {"seed": seed} if name == "random-decaying" else None
    spec = build(name, params, 2)
    P = propagator_matrix(spec, s, s + dt, 1e-10)
    assert P.unit_defect() <= 1e-9
    rng = np.random.default_rng(seed)
    for _ in range(3):
        A = rng.standard_normal((4, 4)) + 1j * rng.standard_normal((4, 4))
        assert op_norm(P(A)) <= (1 + 1e-9) * op_norm(A)
    assert choi_check(P) >= -1e-8


def test_euler_product_trivial_cases():
    spec = deph(0.0, 2)
    assert np.array_equal(euler_product(spec, 7, 1.3), np.eye(16))
    drive = build("driven-xy", None, 2)
    t = 0.8
    assert np.allclose(euler_product(drive, 1, t), np.eye(16) + t * drive.superop(t))
    with pytest.raises(ValueError):
        euler_product(drive, 0, t)


def test_euler_product_factor_order():
    drive = build("driven-xy", None, 2)
    t = 0.8
    I = np.eye(16)
    ref = (I + 0.4 * drive.superop(0.8)) @ (I + 0.4 * drive.superop(0.4))
    assert np.allclose(euler_product(drive, 2, t), ref, atol=1e-13)


def test_euler_first_order_rate_for_dephasing():
    spec = deph(0.5)
    gamma = expm(superop_of(lindblad_map(np.zeros((2, 2)), [math.sqrt(0.5) * SZ]), 2))
    e1 = superop_norm(euler_product(spec, 1000, 1.0) - gamma)
    e2 = superop_norm(euler_product(spec, 2000, 1.0) - gamma)
    assert abs(e1 / e2 - 2) <= 0.2


def test_euler_report_examples():
    zero = euler_report(deph(0.0), 10, 1.0)
    assert zero.error == 0.0 and zero.bound == 0.0 and zero.holds
    rep = euler_report(deph(0.5), 100, 1.0)
    assert rep.eps_n == 0.0 and rep.eps_exact and rep.holds
    M, t, n = rep.M_t, 1.0, 100
    assert rep.bound == pytest.approx(t * math.exp(2 * t * M) * M**2 * math.exp(t * M / n) * t / (2 * n), rel=1e-12)


def test_euler_report_time_dependent_and_overflow():
    drive = build("driven-xy", None, 2)
    rep = euler_report(drive, 50, 0.3)
    assert rep.eps_n > 0 and rep.eps_exact and rep.holds
    big = euler_report(build("tfim-dephasing", None, 3), 10, 20.0)
    assert math.isinf(big.bound) and big.holds


def test_step_condition():
    # e(m) = (1 + 1/m)^m, e(m <= 0) = 1
    assert _step_condition(1, 0.99) and not _step_condition(1, 1.0)
    e = lambda m: (1 + 1 / m) ** m if m > 0 else 1.0  # noqa: E731
    assert _step_condition(5, 0.999 * e(4) / e(3)) and not _step_condition(5, e(4) / e(3))


def test_choi_of_identity_map():
    S = np.eye(4)
    J = choi_matrix(S)
    omega = vec(np.eye(2))
    assert np.allclose(J, np.outer(omega, omega))
    assert choi_check(S) == pytest.approx(0.0, abs=1e-15)


def test_choi_of_dephasing_channel():
    g, t = 0.5, 1.0
    P = propagator_matrix(deph(g), 0.0, t)
    ev = np.sort(np.linalg.eigvalsh(choi_matrix(P.matrix.conj().T)))
    q = math.exp(-2 * g * t)
    assert np.allclose(ev, sorted([0, 0, 1 - q, 1 + q]), atol=1e-9)


def test_choi_negative_control():
    spec = build("amplitude-damping", {"gamma": 1.0}, 1)
    S = np.eye(4) + 5.0 * spec.superop(0.0)
    assert choi_check(S) < -1.0


def test_choi_uses_schrodinger_adjoint():
    # a non-self-adjoint but CP map: amplitude damping over finite time
    P = propagator_matrix(build("amplitude-damping", None, 1), 0.0, 2.0)
    rho_map = P.matrix.conj().T
    assert choi_check(P) >= -1e-10
    assert not np.allclose(rho_map, P.matrix)


def test_cocycle_examples():
    spec = build("tfim-dephasing", None, 2)
    assert cocycle_defect(spec, 0.5, 0.5, 0.5) == 0.0
    tol = 1e-10
    assert cocycle_defect(spec, 0.0, 0.3, 1.0, tol) <= 10 * tol
    drive = build("driven-xy", None, 2)
    assert cocycle_defect(drive, 0.1, 0.6, 1.4, tol) <= 10 * tol
    with pytest.raises(ValueError):
        cocycle_defect(spec, 1.0, 0.5, 2.0)


def test_cocycle_matrix_free_probes():
    spec = build("tfim-dephasing", None, 7)
    assert cocycle_defect(spec, 0.0, 0.05, 0.1, 1e-9, n_probes=1) <= 1e-7


def test_amplitude_damping_against_master_equation():
    g = 0.5
    spec = build("amplitude-damping", {"gamma": g}, 1)
    L = math.sqrt(g) * np.array([[0, 0], [1, 0]], dtype=complex)
    for t in (0.4, 1.0, 3.0):
        ref = expm_evolve(np.zeros((2, 2)), [L], SZ, t)
        closed = math.exp(-g * t) * SZ - (1 - math.exp(-g * t)) * np.eye(2)
        assert np.allclose(ref, closed, atol=1e-12)
        assert np.allclose(evolve(spec, SZ, 0.0, t), closed, atol=1e-9, rtol=0)
    P = propagator_matrix(spec, 0.0, 1.0)
    assert np.allclose(apply_superop(P.matrix, SZ), closed_at(g, 1.0), atol=1e-9)


def closed_at(g, t):
    return math.exp(-g * t) * SZ - (1 - math.exp(-g * t)) * np.eye(2)


def test_sinusoidal_drive_against_fine_euler():
    # independent check of a time-dependent propagator by a very fine midpoint product
    drive = GeneratorSpec(Volume(chain(1)), (InteractionTerm((0,), phi=SX, profile=Sinusoidal(0.0, 1.0, 3.0)),
                                             InteractionTerm((0,), lindblads=(0.3 * SZ,), label="d")))
    t, n = 1.0, 4000
    h = t / n
    T = np.eye(4, dtype=complex)
    for k in range(n):
        T = expm(h * drive.superop((k + 0.5) * h)) @ T
    P = propagator_matrix(drive, 0.0, t, 1e-11)
    assert superop_norm(P.matrix - T) <= 1e-6
