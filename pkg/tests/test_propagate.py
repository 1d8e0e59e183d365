import numpy as np
import pytest
import scipy.linalg
from hypothesis import given, settings
from hypothesis import strategies as st

from bwgrape.propagate import (
    avg_gate_fidelity,
    build_stacks,
    ensemble_fidelity,
    ordered_product,
    step_propagator,
    total_propagator,
)
from bwgrape.spinsys import SIGMA_X, EnsembleMember, ensemble_grid, single_spin_system
from gradcheck import random_hermitian, random_unitary


@settings(max_examples=50, deadline=None)
@given(st.sampled_from([2, 3, 4]), st.floats(1e-3, 5.0), st.integers(0, 2**31))
def test_step_propagator_matches_expm(d, tau, seed):
    h = random_hermitian(np.random.default_rng(seed), d)
    u = step_propagator(h, tau)
    np.testing.assert_allclose(u, scipy.linalg.expm(-1j * tau * h), atol=1e-11)
    np.testing.assert_allclose(u @ u.conj().T, np.eye(d), atol=1e-12)


def test_step_propagator_zero_field_and_validation():
    np.testing.assert_allclose(step_propagator(np.zeros((2, 2)), 1.0), np.eye(2))
    with pytest.raises(ValueError):
        step_propagator(np.array([[0, 1], [0, 0]]), 1.0)
    with pytest.raises(ValueError):
        step_propagator(np.eye(2), 0.0)


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 9), st.integers(0, 2**31))
def test_ordered_product_is_time_ordered(m, seed):
    rng = np.random.default_rng(seed)
    steps = np.stack([random_unitary(rng, 3) for _ in range(m)])
    acc = np.eye(3)
    for s in steps:
        acc = s @ acc
    np.testing.assert_allclose(ordered_product(steps), acc, atol=1e-12)


def test_fidelity_oracle_and_phase_invariance(rng):
    u = random_unitary(rng, 4)
    assert avg_gate_fidelity(u, u) == pytest.approx(1.0)
    assert avg_gate_fidelity(u, np.exp(0.7j) * u) == pytest.approx(1.0)
    ud = np.diag([1, 1, 1, -1]).astype(complex)
    assert avg_gate_fidelity(ud, np.eye(4)) == pytest.approx(0.25)
    with pytest.raises(ValueError):
        avg_gate_fidelity(np.eye(2), np.eye(4))


def test_hard_pulse_fidelity():
    sysm = single_spin_system()
    ud = step_propagator(0.25 * np.pi * SIGMA_X, 1.0)
    amp = np.pi / 2 / 1e-7
    phi, per = ensemble_fidelity(sysm, [EnsembleMember()], np.full(10, amp), 1e-8, ud)
    assert phi == pytest.approx(1.0) and per.shape == (1,)
    # off resonance: closed form for a pi/2 rotation about a tilted axis
    d = 0.3 * amp
    u = total_propagator(sysm, EnsembleMember(d), np.full(10, amp), 1e-8)
    n = np.hypot(amp, d)
    c = np.cos(n * 1e-7 / 2) * np.cos(np.pi / 4) + np.sin(n * 1e-7 / 2) * np.sin(np.pi / 4) * amp / n
    assert avg_gate_fidelity(ud, u) == pytest.approx(c**2, rel=1e-12)


def test_ensemble_fidelity_weighted_mean():
    sysm = single_spin_system()
    members = ensemble_grid([0.0, 2e6, -1e6], [1.0])
    v = np.full(7, 3e6)
    ud = step_propagator(0.25 * np.pi * SIGMA_X, 1.0)
    phi, per = ensemble_fidelity(sysm, members, v, 1e-7, ud)
    assert phi == pytest.approx(per.mean())
    phi0, _ = ensemble_fidelity(sysm, [EnsembleMember()], np.zeros(0), 1e-7, np.eye(2))
    assert phi0 == 1.0


def test_stack_overlaps_constant_and_fidelity():
    sysm = single_spin_system(True)
    rng = np.random.default_rng(3)
    v = rng.normal(size=6) + 1j * rng.normal(size=6)
    members = ensemble_grid([0.0, 0.4], [1.0])
    ud = random_unitary(rng, 2)
    stack = build_stacks(sysm, members, v, 0.2, ud)
    ov = stack.overlaps()
    np.testing.assert_allclose(ov, ov[:, :1] * np.ones_like(ov), atol=1e-13)
    _, per = ensemble_fidelity(sysm, members, v, 0.2, ud)
    np.testing.assert_allclose(stack.fidelities(), per, atol=1e-13)
