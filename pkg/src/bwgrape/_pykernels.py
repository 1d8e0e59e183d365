"""Pure numpy implementations of the hot kernels.

``propagator_chains`` and ``period_gradients`` mirror the compiled versions in
``_ckernels.pyx`` and are used whenever the extension is unavailable (or
``BWGRAPE_PURE_PYTHON=1``). ``causal_convolve`` is always taken from here.
"""
import numpy as np


def causal_convolve(h, u):
    """v[m] = sum_{l <= m} h[m - l] * u[l], truncated to len(u)."""
    h = np.asarray(h, dtype=np.complex128)
    u = np.asarray(u, dtype=np.complex128)
    n = u.shape[0]
    if h.shape[0] < n:
        raise ValueError("impulse response shorter than input (%d < %d)" % (h.shape[0], n))
    if n == 0:
        return np.zeros(0, dtype=np.complex128)
    return np.convolve(h[:n], u)[:n]


def propagator_chains(steps, u_desired):
    """Forward and backward propagator stacks.

    Parameters
    ----------
    steps : ndarray, shape (B, M, D, D)
        Step propagators for B independent systems.
    u_desired : ndarray, shape (D, D)

    Returns
    -------
    forward : ndarray, shape (B, M, D, D)
        ``forward[:, m] = steps[:, m] @ ... @ steps[:, 0]``.
    backward : ndarray, shape (B, M, D, D)
        ``backward[:, m] = steps[:, m+1]^H @ ... @ steps[:, M-1]^H @ u_desired``.
    """
    steps = np.asarray(steps, dtype=np.complex128)
    b, m, d, _ = steps.shape
    forward = np.empty_like(steps)
    backward = np.empty_like(steps)
    acc = np.broadcast_to(np.eye(d, dtype=np.complex128), (b, d, d))
    for k in range(m):
        acc = steps[:, k] @ acc
        forward[:, k] = acc
    acc = np.broadcast_to(np.asarray(u_desired, dtype=np.complex128), (b, d, d)).copy()
    backward[:, m - 1] = acc
    for k in range(m - 1, 0, -1):
        acc = np.conj(np.swapaxes(steps[:, k], -1, -2)) @ acc
        backward[:, k - 1] = acc
    return forward, backward


def period_gradients(forward, backward, controls, tau):
    """First-order fidelity gradient per evolution period and control.

    ``g[b, k, m] = -2 Re[<P_m| i tau H_k X_m> <X_m|P_m>]`` with the inner
    product ``<A|B> = Tr(A^H B) / D``.

    Parameters
    ----------
    forward, backward : ndarray, shape (B, M, D, D)
    controls : ndarray, shape (B, K, D, D)
        Control Hamiltonians per system (already scaled per member).
    tau : float
    """
    d = forward.shape[-1]
    # <X_m|P_m>
    xp = np.einsum("bmij,bmij->bm", np.conj(forward), backward) / d
    # <P_m| H_k X_m> = Tr(P^H H X) / D
    hx = np.einsum("bkij,bmjl->bkmil", controls, forward)
    phx = np.einsum("bmil,bkmil->bkm", np.conj(backward), hx) / d
    return -2.0 * np.real(1j * tau * phx * xp[:, None, :])
