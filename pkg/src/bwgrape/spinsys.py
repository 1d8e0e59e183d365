"""Drift/control Hamiltonians for the single-spin ensemble and the 1e-1n system.

Conventions: hbar = 1, Pauli matrices with eigenvalues +-1, product basis
ordered electron (x) nucleus: |up up>, |up down>, |down up>, |down down>.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

SIGMA_I = np.eye(2, dtype=complex)
SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=complex)

HERMITIAN_TOL = 1e-12


def is_hermitian(h, tol=HERMITIAN_TOL) -> bool:
    h = np.asarray(h)
    scale = max(1.0, float(np.max(np.abs(h)))) if h.size else 1.0
    return bool(np.max(np.abs(h - np.conj(np.swapaxes(h, -1, -2))), initial=0.0) <= tol * scale)


@dataclass(frozen=True)
class SpinSystem:
    """Drift plus linear controls.

    ``h_offset`` is the operator multiplying an ensemble member's resonance
    offset. With two controls the complex control envelope drives
    ``Re -> h_controls[0]`` and ``Im -> h_controls[1]``.
    """

    h_drift: np.ndarray
    h_controls: tuple
    h_offset: np.ndarray
    labels: tuple = ()

    def __post_init__(self):
        h_drift = np.asarray(self.h_drift, dtype=complex)
        controls = tuple(np.asarray(h, dtype=complex) for h in self.h_controls)
        h_offset = np.asarray(self.h_offset, dtype=complex)
        d = h_drift.shape[0]
        if d < 2 or h_drift.shape != (d, d):
            raise ValueError("drift must be a square matrix of dimension >= 2")
        if not 1 <= len(controls) <= 2:
            raise ValueError("one control, or two controls in quadrature, are supported")
        for h in (h_drift, h_offset) + controls:
            if h.shape != (d, d):
                raise ValueError("all operators must share the drift's dimension")
            if not is_hermitian(h):
                raise ValueError("operators must be Hermitian")
        labels = tuple(self.labels) or tuple(f"H{k + 1}" for k in range(len(controls)))
        object.__setattr__(self, "h_drift", h_drift)
        object.__setattr__(self, "h_controls", controls)
        object.__setattr__(self, "h_offset", h_offset)
        object.__setattr__(self, "labels", labels)

    @property
    def dim(self) -> int:
        return self.h_drift.shape[0]

    @property
    def quadrature(self) -> bool:
        return len(self.h_controls) == 2

    def hamiltonians(self, member, v_tilde) -> np.ndarray:
        """Total Hamiltonian per evolution period, shape (M, D, D)."""
        v = np.asarray(v_tilde, dtype=complex)
        base = self.h_drift + member.delta_omega * self.h_offset
        s = member.omega1_scale
        h = base[None] + (s * v.real)[:, None, None] * self.h_controls[0][None]
        if self.quadrature:
            h = h + (s * v.imag)[:, None, None] * self.h_controls[1][None]
        return h

    def scaled_controls(self, member) -> np.ndarray:
        return member.omega1_scale * np.stack(self.h_controls)


@dataclass(frozen=True)
class EnsembleMember:
    delta_omega: float = 0.0
    omega1_scale: float = 1.0
    weight: float = 1.0

    def __post_init__(self):
        if not self.omega1_scale > 0:
            raise ValueError("omega1_scale must be positive")


def check_weights(members: Sequence[EnsembleMember], tol=1e-12) -> None:
    if not members:
        raise ValueError("empty ensemble")
    total = math.fsum(m.weight for m in members)
    if abs(total - 1.0) > tol:
        raise ValueError(f"ensemble weights sum to {total!r}, not 1")


def ensemble_grid(offsets, scales) -> list[EnsembleMember]:
    """Cartesian product of offsets (rad/s) and Rabi scales with uniform weights."""
    offsets = list(offsets)
    scales = list(scales)
    if not offsets or not scales:
        raise ValueError("offsets and scales must be nonempty")
    w = 1.0 / (len(offsets) * len(scales))
    return [EnsembleMember(float(d), float(s), w) for d in offsets for s in scales]


def single_spin_hamiltonian(delta_omega, omega1_scale, amp) -> np.ndarray:
    amp = complex(amp)
    return 0.5 * (
        delta_omega * SIGMA_Z
        + omega1_scale * amp.real * SIGMA_X
        + omega1_scale * amp.imag * SIGMA_Y
    )


def single_spin_system(quadrature: bool = False) -> SpinSystem:
    """Spin-1/2 in the carrier frame; amplitude-only control unless ``quadrature``."""
    controls = (0.5 * SIGMA_X, 0.5 * SIGMA_Y) if quadrature else (0.5 * SIGMA_X,)
    labels = ("x", "y") if quadrature else ("x",)
    return SpinSystem(np.zeros((2, 2), complex), controls, 0.5 * SIGMA_Z, labels)


# --- electron-nuclear system -------------------------------------------------


@dataclass(frozen=True)
class HyperfineParams:
    """All frequencies in rad/s."""

    omega_ze: float
    omega_zn: float
    omega_zz: float
    omega_zx: float
    carrier: float = 0.0


def hyperfine_drift(p: HyperfineParams, rotating_frame: bool = True) -> np.ndarray:
    ze = p.omega_ze - p.carrier if rotating_frame else p.omega_ze
    return (
        0.5 * ze * np.kron(SIGMA_Z, SIGMA_I)
        + 0.5 * p.omega_zn * np.kron(SIGMA_I, SIGMA_Z)
        + 0.25 * p.omega_zz * np.kron(SIGMA_Z, SIGMA_Z)
        + 0.25 * p.omega_zx * np.kron(SIGMA_Z, SIGMA_X)
    )


def electron_control() -> np.ndarray:
    return 0.5 * np.kron(SIGMA_X, SIGMA_I)


def electron_offset() -> np.ndarray:
    return 0.5 * np.kron(SIGMA_Z, SIGMA_I)


@dataclass(frozen=True)
class HyperfineEigensystem:
    """Eigenstates |1>..|4> of the lab-frame drift.

    ``theta_up``/``theta_down`` come from the closed-form arctangent
    expressions; ``theta_up_numeric``/``theta_down_numeric`` are the mixing
    angles actually realized by the eigenvectors (|1> = sin t |uu> + cos t |ud>,
    |4> = sin t |du> + cos t |dd>). The two disagree in general.
    """

    energies: np.ndarray
    vectors: np.ndarray = field(repr=False)
    theta_up: float
    theta_down: float
    theta_up_numeric: float
    theta_down_numeric: float

    @property
    def transition_14(self) -> float:
        return float(self.energies[0] - self.energies[3])

    @property
    def transition_23(self) -> float:
        return float(self.energies[1] - self.energies[2])

    @property
    def splitting(self) -> float:
        """|omega_23 - omega_14|, rad/s."""
        return abs(self.transition_23 - self.transition_14)


def _atan_ratio(num, den):
    if den == 0.0:
        return math.copysign(math.pi / 2, num) if num else 0.0
    return math.atan(num / den)


# product-basis index that dominates each labeled state |1>..|4>
_DOMINANT = (1, 0, 2, 3)


def hyperfine_eigensystem(p: HyperfineParams, degeneracy_tol: float = 1e-6) -> HyperfineEigensystem:
    h = hyperfine_drift(p, rotating_frame=False)
    # the drift is block diagonal in the electron state; diagonalize each
    # nuclear block with the electron Zeeman shift removed to keep precision
    e = np.empty(4)
    vecs = np.zeros((4, 4), dtype=complex)
    for blk, sign in ((slice(0, 2), 1.0), (slice(2, 4), -1.0)):
        shift = 0.5 * sign * p.omega_ze
        eb, vb = np.linalg.eigh(h[blk, blk] - shift * np.eye(2))
        e[blk] = eb + shift
        vecs[blk, blk] = vb
    if np.any(np.diff(np.sort(e)) < degeneracy_tol):
        raise ValueError("degenerate drift eigenvalues; states cannot be labeled")
    weight = np.abs(vecs) ** 2
    chosen = [int(np.argmax(weight[idx])) for idx in _DOMINANT]
    if len(set(chosen)) != 4:
        raise ValueError("eigenstates could not be labeled by dominant product component")
    vecs = vecs[:, chosen]
    energies = e[chosen]
    # fix phases: real, with the cos-coefficient (or dominant one) positive
    for k, idx in enumerate(_DOMINANT):
        c = vecs[idx, k]
        vecs[:, k] *= np.conj(c) / abs(c)
    up_num = math.atan2(vecs[0, 0].real, vecs[1, 0].real)
    down_num = math.atan2(vecs[2, 3].real, vecs[3, 3].real)
    return HyperfineEigensystem(
        energies=np.asarray(energies, dtype=float),
        vectors=vecs,
        theta_up=_atan_ratio(-p.omega_zx, p.omega_zz - p.omega_zn),
        theta_down=_atan_ratio(-p.omega_zx, p.omega_zz + p.omega_zn),
        theta_up_numeric=up_num,
        theta_down_numeric=down_num,
    )


def with_carrier_on_14(p: HyperfineParams) -> HyperfineParams:
    return replace(p, carrier=hyperfine_eigensystem(p).transition_14)


def hyperfine_system(p: HyperfineParams) -> SpinSystem:
    """1e-1n system in the frame rotating at ``p.carrier`` on the electron."""
    return SpinSystem(
        hyperfine_drift(p, rotating_frame=True),
        (electron_control(),),
        electron_offset(),
        ("x_e",),
    )
