"""Piecewise-constant propagation and the average gate fidelity."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from bwgrape import kernels
from bwgrape.spinsys import EnsembleMember, SpinSystem, check_weights


def _check_hermitian(h, tol=1e-10):
    scale = max(1.0, float(np.max(np.abs(h))))
    asym = float(np.max(np.abs(h - np.conj(np.swapaxes(h, -1, -2)))))
    if asym > tol * scale:
        raise ValueError(f"Hamiltonian is not Hermitian (max asymmetry {asym:.3g})")


def step_propagator(h_total, tau: float) -> np.ndarray:
    """exp(-i H tau) for a Hermitian H, or a stack of them (..., D, D).

    Exact: closed-form Pauli rotation for D = 2, eigendecomposition otherwise.
    """
    if not tau > 0:
        raise ValueError("tau must be positive")
    h = np.asarray(h_total, dtype=complex)
    _check_hermitian(h)
    d = h.shape[-1]
    if d == 2:
        a0 = 0.5 * (h[..., 0, 0] + h[..., 1, 1]).real
        az = 0.5 * (h[..., 0, 0] - h[..., 1, 1]).real
        ax = h[..., 0, 1].real
        ay = -h[..., 0, 1].imag
        norm = np.sqrt(ax * ax + ay * ay + az * az)
        c = np.cos(norm * tau)
        s = tau * np.sinc(norm * tau / np.pi)  # sin(|a| tau) / |a|
        phase = np.exp(-1j * a0 * tau)
        u = np.empty(h.shape, dtype=complex)
        u[..., 0, 0] = c - 1j * s * az
        u[..., 1, 1] = c + 1j * s * az
        u[..., 0, 1] = -1j * s * (ax - 1j * ay)
        u[..., 1, 0] = -1j * s * (ax + 1j * ay)
        return phase[..., None, None] * u
    e, v = np.linalg.eigh(h)
    return (v * np.exp(-1j * tau * e)[..., None, :]) @ np.conj(np.swapaxes(v, -1, -2))


def step_propagators(system: SpinSystem, members: Sequence[EnsembleMember], v_tilde, sample_dt) -> np.ndarray:
    """Step propagators for every member and evolution period, shape (B, M, D, D)."""
    hs = np.stack([system.hamiltonians(m, v_tilde) for m in members])
    return step_propagator(hs, sample_dt)


def ordered_product(steps) -> np.ndarray:
    """steps[..., M-1, :, :] @ ... @ steps[..., 0, :, :] by pairwise reduction."""
    a = np.asarray(steps)
    while a.shape[-3] > 1:
        if a.shape[-3] % 2:
            last = a[..., -1:, :, :]
            paired = a[..., 1:-1:2, :, :] @ a[..., 0:-1:2, :, :]
            a = np.concatenate([paired, last], axis=-3)
        else:
            a = a[..., 1::2, :, :] @ a[..., 0::2, :, :]
    return a[..., 0, :, :]


def total_propagator(system: SpinSystem, member: EnsembleMember, v_tilde, sample_dt) -> np.ndarray:
    steps = step_propagator(system.hamiltonians(member, v_tilde), sample_dt)
    if steps.shape[0] == 0:
        return np.eye(system.dim, dtype=complex)
    return ordered_product(steps)


def avg_gate_fidelity(u_desired, u_actual) -> float:
    """|Tr(U_d^H U)|^2 / D^2."""
    ud = np.asarray(u_desired)
    ua = np.asarray(u_actual)
    if ud.shape != ua.shape:
        raise ValueError(f"dimension mismatch: {ud.shape} vs {ua.shape}")
    d = ud.shape[-1]
    tr = np.einsum("...ij,...ij->...", np.conj(ud), ua)
    return np.abs(tr) ** 2 / d**2


def ensemble_fidelity(system, members, v_tilde, sample_dt, u_desired):
    """Weighted average fidelity and the per-member values."""
    check_weights(members)
    if len(v_tilde) == 0:
        props = np.broadcast_to(np.eye(system.dim, dtype=complex), (len(members), system.dim, system.dim))
    else:
        props = ordered_product(step_propagators(system, members, v_tilde, sample_dt))
    per = np.asarray(avg_gate_fidelity(np.broadcast_to(u_desired, props.shape), props), dtype=float)
    weights = np.array([m.weight for m in members])
    return float(np.dot(weights, per)), per


@dataclass
class PropagatorStack:
    """Step, forward (X_m) and backward (P_m) propagators for B members."""

    step_props: np.ndarray
    forward: np.ndarray
    backward: np.ndarray
    u_desired: np.ndarray

    @property
    def dim(self) -> int:
        return self.u_desired.shape[-1]

    def overlaps(self) -> np.ndarray:
        """<P_m|X_m> = Tr(P_m^H X_m)/D, shape (B, M); constant in m."""
        return np.einsum("bmij,bmij->bm", np.conj(self.backward), self.forward) / self.dim

    def fidelities(self) -> np.ndarray:
        return np.abs(self.overlaps()[:, -1]) ** 2


def build_stacks(system, members, v_tilde, sample_dt, u_desired) -> PropagatorStack:
    if isinstance(members, EnsembleMember):
        members = [members]
    steps = step_propagators(system, members, v_tilde, sample_dt)
    ud = np.asarray(u_desired, dtype=complex)
    forward, backward = kernels.propagator_chains(steps, ud)
    return PropagatorStack(steps, forward, backward, ud)
