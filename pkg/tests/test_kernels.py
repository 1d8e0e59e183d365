import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bwgrape import _pykernels, kernels
from conftest import BACKENDS
from gradcheck import random_hermitian
from bwgrape.propagate import step_propagator


def _stack(rng, b, m, d):
    return step_propagator(np.stack([[random_hermitian(rng, d) for _ in range(m)] for _ in range(b)]), 0.3)


def test_causal_convolve_matches_direct_sum(rng):
    impl = kernels
    h = rng.normal(size=9) + 1j * rng.normal(size=9)
    u = rng.normal(size=7) + 1j * rng.normal(size=7)
    expect = [sum(h[m - l] * u[l] for l in range(m + 1)) for m in range(7)]
    np.testing.assert_allclose(impl.causal_convolve(h, u), expect, rtol=1e-13, atol=1e-14)


def test_causal_convolve_rejects_short_kernel():
    with pytest.raises(ValueError):
        kernels.causal_convolve(np.ones(2), np.ones(3))


@pytest.mark.parametrize("impl", BACKENDS)
def test_propagator_chains_explicit(impl, rng):
    steps = _stack(rng, 2, 4, 3)
    ud = np.linalg.qr(rng.normal(size=(3, 3)) + 0j)[0]
    fwd, bwd = impl.propagator_chains(steps, ud)
    for b in range(2):
        acc = np.eye(3)
        for m in range(4):
            acc = steps[b, m] @ acc
            np.testing.assert_allclose(fwd[b, m], acc, atol=1e-13)
            back = ud
            for k in range(3, m, -1):
                back = steps[b, k].conj().T @ back
            np.testing.assert_allclose(bwd[b, m], back, atol=1e-13)


@pytest.mark.parametrize("impl", BACKENDS)
def test_period_gradients_explicit(impl, rng):
    steps = _stack(rng, 2, 3, 2)
    ud = step_propagator(random_hermitian(rng, 2), 1.0)
    fwd, bwd = impl.propagator_chains(steps, ud)
    ctrl = np.stack([[random_hermitian(rng, 2)] for _ in range(2)])
    g = impl.period_gradients(fwd, bwd, ctrl, 0.1)
    for b in range(2):
        for m in range(3):
            p, x, hk = bwd[b, m], fwd[b, m], ctrl[b, 0]
            px = np.trace(p.conj().T @ (1j * 0.1 * hk @ x)) / 2
            xp = np.trace(x.conj().T @ p) / 2
            assert g[b, 0, m] == pytest.approx(-2 * (px * xp).real, abs=1e-14)


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 3), st.integers(1, 6), st.sampled_from([2, 4]), st.integers(0, 2**31))
def test_backends_agree(b, m, d, seed):
    if len(BACKENDS) < 2:
        return
    rng = np.random.default_rng(seed)
    cy = BACKENDS[1].values[0]
    steps = _stack(rng, b, m, d)
    ud = step_propagator(random_hermitian(rng, d), 1.0)
    f1, b1 = _pykernels.propagator_chains(steps, ud)
    f2, b2 = cy.propagator_chains(steps, ud)
    np.testing.assert_allclose(f1, f2, atol=1e-13)
    np.testing.assert_allclose(b1, b2, atol=1e-13)
    ctrl = np.stack([[random_hermitian(rng, d), random_hermitian(rng, d)] for _ in range(b)])
    np.testing.assert_allclose(
        _pykernels.period_gradients(f1, b1, ctrl, 0.05), cy.period_gradients(f1, b1, ctrl, 0.05), atol=1e-14
    )


def test_backend_name():
    assert kernels.BACKEND in ("python", "cython")


def test_env_switch_forces_fallback():
    import os
    import subprocess
    import sys

    env = dict(os.environ, BWGRAPE_PURE_PYTHON="1")
    out = subprocess.run(
        [sys.executable, "-c", "from bwgrape import kernels; print(kernels.BACKEND)"],
        env=env, capture_output=True, text=True, check=True,
    )
    assert out.stdout.strip() == "python"


@pytest.mark.parametrize("impl", BACKENDS)
def test_read_only_inputs_accepted(impl):
    steps = np.broadcast_to(np.eye(2, dtype=complex), (1, 3, 2, 2))
    fwd, bwd = impl.propagator_chains(steps, np.eye(2, dtype=complex))
    ctrl = np.broadcast_to(np.eye(2, dtype=complex), (1, 1, 2, 2))
    assert impl.period_gradients(fwd, bwd, ctrl, 0.1).shape == (1, 1, 3)
