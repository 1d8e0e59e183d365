"""Post-optimization analysis: FID, spectra, admittance, fidelity maps, linear response."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from bwgrape.propagate import avg_gate_fidelity, ordered_product, step_propagator
from bwgrape.resonator import ResonatorModel, admittance
from bwgrape.spinsys import SIGMA_Z, EnsembleMember, SpinSystem, check_weights


@dataclass(frozen=True)
class FidSignal:
    """Ensemble-averaged ``<sigma_x> + i<sigma_y>`` after the pulse.

    ``t`` starts at the end of the applied waveform. ``t2_star`` is the time
    the envelope takes to fall from its peak (at ``t_center``) to 1/e of it.
    """

    t: np.ndarray
    signal: np.ndarray
    t2_star: float
    t_center: float = 0.0


@dataclass(frozen=True)
class SpectrumResult:
    """Single-sided amplitude spectrum.

    ``amplitude`` is normalized to a peak of 1; ``scale`` is the peak of the
    unnormalized folded spectrum, so ``amplitude * scale`` restores it.
    """

    freqs: np.ndarray
    amplitude: np.ndarray
    scale: float

    def at(self, freq_hz: float) -> float:
        """Amplitude at the grid point nearest ``freq_hz``."""
        return float(self.amplitude[np.argmin(np.abs(self.freqs - abs(freq_hz)))])

    def max_in_band(self, lo_hz: float, hi_hz: float) -> float:
        sel = (self.freqs >= lo_hz) & (self.freqs <= hi_hz)
        if not np.any(sel):
            return self.at(0.5 * (lo_hz + hi_hz))
        return float(self.amplitude[sel].max())


@dataclass(frozen=True)
class FidelityMap:
    offsets: np.ndarray
    scales: np.ndarray
    phi: np.ndarray  # shape (len(offsets), len(scales))

    @property
    def minimum(self) -> float:
        return float(self.phi.min())


# --- FID ---------------------------------------------------------------------


def gaussian_sigma_from_t2(t2_star: float) -> float:
    """Offset standard deviation (rad/s) whose FID envelope falls to 1/e at ``t2_star``.

    A Gaussian offset distribution gives the envelope ``exp(-sigma^2 t^2 / 2)``.
    """
    if not t2_star > 0:
        raise ValueError("t2_star must be positive")
    return math.sqrt(2.0) / t2_star


def gaussian_ensemble(t2_star: float, n: int = 101, width: float = 4.0, center: float = 0.0) -> list[EnsembleMember]:
    """Offsets spanning ``center +- width*sigma`` with normalized Gaussian weights."""
    if n < 1:
        raise ValueError("n must be >= 1")
    sigma = gaussian_sigma_from_t2(t2_star)
    x = np.linspace(-width, width, n) if n > 1 else np.zeros(1)
    w = np.exp(-0.5 * x**2)
    w /= w.sum()
    return [EnsembleMember(float(center + sigma * xi), 1.0, float(wi)) for xi, wi in zip(x, w)]


def envelope_decay_time(t, signal) -> tuple[float, float]:
    """Time for ``|s|`` to fall from its peak to ``1/e`` of the peak.

    Returns ``(t_decay, t_peak)``; the crossing is linearly interpolated and
    ``t_decay`` is ``inf`` if the envelope never falls that far.
    """
    t = np.asarray(t, dtype=float)
    mag = np.abs(np.asarray(signal))
    if mag.size == 0 or mag.max() == 0:
        return 0.0, 0.0
    k = int(np.argmax(mag))
    level = mag[k] / math.e
    below = np.nonzero(mag[k:] <= level)[0]
    if below.size == 0:
        return math.inf, float(t[k])
    j = k + int(below[0])
    t0, t1, m0, m1 = t[j - 1], t[j], mag[j - 1], mag[j]
    cross = t1 if m0 == m1 else t0 + (m0 - level) / (m0 - m1) * (t1 - t0)
    return float(cross - t[k]), float(t[k])


def oscillation_frequency(t, signal, floor: float = 0.1) -> float:
    """Mean precession frequency (Hz) from the slope of the unwrapped phase.

    Only points where ``|s|`` exceeds ``floor`` of its peak are used.
    """
    t = np.asarray(t, dtype=float)
    s = np.asarray(signal)
    mag = np.abs(s)
    sel = mag > floor * mag.max()
    if sel.sum() < 2:
        raise ValueError("too few points above the floor")
    phase = np.unwrap(np.angle(s[sel]))
    slope = np.polyfit(t[sel], phase, 1)[0]
    return float(slope / (2.0 * np.pi))


def simulate_fid(
    v_tilde,
    system: SpinSystem,
    members: Sequence[EnsembleMember],
    t_max: float,
    dt_acq: float,
    sample_dt: float,
    carrier_offset: float = 0.0,
) -> FidSignal:
    """Apply the distorted pulse to each member starting from ``sigma_z/2``, then let it precess.

    ``carrier_offset`` (rad/s) is added to every member's offset, during the
    pulse and the acquisition, as when the static field is moved off
    resonance. Only the two-level system is supported.
    """
    check_weights(members)
    if system.dim != 2:
        raise ValueError("FID simulation is implemented for a single spin-1/2")
    if not (t_max > 0 and dt_acq > 0):
        raise ValueError("t_max and dt_acq must be positive")
    rho0 = 0.5 * SIGMA_Z
    norm = float(np.trace(rho0 @ SIGMA_Z).real)
    t = np.arange(0.0, t_max + 0.5 * dt_acq, dt_acq)
    signal = np.zeros(len(t), dtype=complex)
    v = np.asarray(v_tilde, dtype=complex)
    for m in members:
        shifted = EnsembleMember(m.delta_omega + carrier_offset, m.omega1_scale, m.weight)
        if len(v):
            u = ordered_product(step_propagator(system.hamiltonians(shifted, v), sample_dt))
        else:
            u = np.eye(2, dtype=complex)
        rho = u @ rho0 @ u.conj().T
        # Tr[rho (sigma_x + i sigma_y)] = 2 rho_10, which precesses as exp(i d t)
        signal += m.weight * 2.0 * rho[1, 0] * np.exp(1j * shifted.delta_omega * t)
    signal /= norm
    t2, tc = envelope_decay_time(t, signal)
    return FidSignal(t, signal, t2, tc)


# --- spectra -------------------------------------------------------------------


def pulse_spectrum(waveform, dt: float, zero_pad_factor: int = 8) -> SpectrumResult:
    """Single-sided amplitude spectrum of a complex envelope sampled every ``dt``.

    Positive and negative frequencies are folded in power,
    ``A(f) = sqrt(|X(f)|^2 + |X(-f)|^2)``, so the folded spectrum obeys
    Parseval's relation with the two-sided transform.
    """
    x = np.asarray(waveform, dtype=complex)
    if x.size == 0:
        raise ValueError("empty waveform")
    if zero_pad_factor < 1:
        raise ValueError("zero_pad_factor must be >= 1")
    n = len(x) * zero_pad_factor
    spec = np.fft.fft(x, n) * dt
    df = 1.0 / (n * dt)
    half = n // 2
    pos = spec[: half + 1]
    neg = np.zeros_like(pos)
    neg[1:] = spec[::-1][:half]  # X(-f) for f = df .. half*df
    if n % 2 == 0:
        neg[half] = 0.0  # Nyquist bin appears once
    folded = np.sqrt(np.abs(pos) ** 2 + np.abs(neg) ** 2)
    peak = float(folded.max())
    amp = folded / peak if peak > 0 else folded
    return SpectrumResult(df * np.arange(half + 1), amp, peak)


def admittance_curve(model: ResonatorModel, freqs_hz) -> np.ndarray:
    """Steady-state admittance magnitude versus offset from the carrier in Hz (peak 1)."""
    return admittance(model, 2.0 * np.pi * np.asarray(freqs_hz, dtype=float))


def half_power_bandwidth(model: ResonatorModel, span_factor: float = 20.0, n: int = 200001) -> float:
    """Full width (Hz) of the admittance where the power falls to half, found on a grid."""
    width = model.omega0 / model.q_factor / (2.0 * np.pi)
    f = np.linspace(-span_factor * width, span_factor * width, n)
    power = admittance_curve(model, f) ** 2
    above = f[power >= 0.5 * power.max()]
    return float(above[-1] - above[0])


# --- fidelity map and linear response -------------------------------------------


def fidelity_map(v_tilde, system: SpinSystem, u_desired, offsets, scales, sample_dt: float) -> FidelityMap:
    """Fidelity of the fixed distorted pulse at every (offset, Rabi scale) pair."""
    offsets = np.asarray(offsets, dtype=float)
    scales = np.asarray(scales, dtype=float)
    if offsets.size == 0 or scales.size == 0:
        raise ValueError("grids must be nonempty")
    v = np.asarray(v_tilde, dtype=complex)
    ud = np.asarray(u_desired, dtype=complex)
    phi = np.empty((offsets.size, scales.size))
    for i, d in enumerate(offsets):
        hs = np.stack([system.hamiltonians(EnsembleMember(float(d), float(s)), v) for s in scales])
        props = ordered_product(step_propagator(hs, sample_dt))
        phi[i] = avg_gate_fidelity(np.broadcast_to(ud, props.shape), props)
    return FidelityMap(offsets, scales, phi)


def linear_response_excitation(waveform, omega_grid, dt: float) -> np.ndarray:
    """``S(w) = -i sum_m x_m exp(-i w t_m) dt`` with ``t_m`` at the middle of each period."""
    x = np.asarray(waveform, dtype=complex)
    w = np.asarray(omega_grid, dtype=float)
    t = (np.arange(len(x)) + 0.5) * dt
    return -1j * dt * (np.exp(-1j * np.outer(w, t)) @ x)


def incremental_rotation_angle(amp_target, delta_omega, q_factor, omega0, delta_t) -> float:
    """Angle between the drift and drift-plus-control vectors after the field builds for ``delta_t``.

    ``atan[(amp/dw) (1 - exp(-omega0 delta_t / Q))]``; at ``dw = 0`` the
    atan2 convention gives pi/2.
    """
    build = -math.expm1(-omega0 * delta_t / q_factor)
    if delta_omega == 0:
        return math.atan2(amp_target * build, 0.0)
    return math.atan(amp_target / delta_omega * build)
