"""Resonator transient model.

The tuned-and-matched resonator is treated as a linear time-invariant filter
acting on the complex baseband envelope of the drive (frame rotating at the
carrier). Three kinds are supported:

* ``EXPONENTIAL``: first-order ring-up/ringdown with time constant Q/omega0.
* ``FULL_POLE``: the free-ringing pole of the series RLC circuit, including
  the beat between the free-ringing frequency and the carrier.
* ``MEASURED``: a digitized impulse response read from CSV.

All discrete impulse responses are normalized to unit DC gain, so a long
constant input is delivered at its commanded amplitude.
"""
from __future__ import annotations

import csv
import enum
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from bwgrape import kernels


class ResonatorKind(str, enum.Enum):
    EXPONENTIAL = "exponential"
    FULL_POLE = "full_pole"
    MEASURED = "measured"


@dataclass(frozen=True)
class Circuit:
    """Series RLC circuit capacitively coupled to a matched source."""

    r: float
    inductance_l: float
    cap_tune: float
    cap_match: float
    big_r0: float = 50.0


@dataclass(frozen=True)
class MeasuredResponse:
    t: np.ndarray
    h: np.ndarray

    @classmethod
    def from_csv(cls, path) -> "MeasuredResponse":
        """Read a ``t_s,re,im`` CSV file."""
        path = Path(path)
        with path.open(newline="") as fh:
            reader = csv.reader(fh)
            header = [c.strip() for c in next(reader)]
            if header != ["t_s", "re", "im"]:
                raise ValueError(f"{path}: expected header t_s,re,im, got {header}")
            rows = [[float(x) for x in row] for row in reader if row]
        data = np.asarray(rows, dtype=float).reshape(-1, 3)
        return cls(t=data[:, 0], h=data[:, 1] + 1j * data[:, 2])

    def to_csv(self, path) -> None:
        with Path(path).open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t_s", "re", "im"])
            for t, h in zip(self.t, self.h):
                w.writerow([repr(float(t)), repr(float(h.real)), repr(float(h.imag))])


@dataclass(frozen=True)
class ResonatorModel:
    kind: ResonatorKind
    q_factor: float
    omega0: float
    drive_freq: Optional[float] = None
    circuit: Optional[Circuit] = None
    measured: Optional[MeasuredResponse] = field(default=None, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "kind", ResonatorKind(self.kind))
        if not self.q_factor > 0:
            raise ValueError(f"q_factor must be positive, got {self.q_factor}")
        if not self.omega0 > 0:
            raise ValueError(f"omega0 must be positive, got {self.omega0}")
        if self.drive_freq is None:
            object.__setattr__(self, "drive_freq", float(self.omega0))
        if self.kind is ResonatorKind.FULL_POLE:
            if self.circuit is None:
                raise ValueError("FULL_POLE resonator requires circuit parameters")
            if not self.circuit.r < self.circuit.big_r0:
                raise ValueError("FULL_POLE model assumes r < R0 (high-Q matching)")
        if self.kind is ResonatorKind.MEASURED and self.measured is None:
            raise ValueError("MEASURED resonator requires measured response data")

    @property
    def tau_r(self) -> float:
        return self.q_factor / self.omega0

    @property
    def bandwidth(self) -> float:
        """Full width at half power, rad/s."""
        return self.omega0 / self.q_factor

    @classmethod
    def from_circuit(cls, circuit: Circuit, drive_freq=None) -> "ResonatorModel":
        omega0 = 1.0 / math.sqrt(circuit.inductance_l * circuit.cap_tune)
        q = omega0 * circuit.inductance_l / circuit.r
        return cls(ResonatorKind.FULL_POLE, q, omega0, drive_freq=drive_freq, circuit=circuit)


@dataclass(frozen=True)
class TransientQuantities:
    gamma: float
    f_scale: float
    omega_free: float
    delta3: complex
    tau_r: float

    @property
    def delta4(self) -> complex:
        return self.delta3.conjugate()


@dataclass(frozen=True)
class DiscreteImpulseResponse:
    samples: np.ndarray
    sample_dt: float

    def __len__(self):
        return len(self.samples)

    @classmethod
    def delta(cls, length: int, sample_dt: float = 1.0) -> "DiscreteImpulseResponse":
        h = np.zeros(length, dtype=complex)
        h[0] = 1.0
        return cls(h, sample_dt)


def derive_transients(model: ResonatorModel) -> TransientQuantities:
    q, w0 = model.q_factor, model.omega0
    if q < 0.5:
        raise ValueError(f"overdamped resonator (Q={q} < 0.5) is not modeled")
    gamma = w0 / q
    f = math.sqrt(1.0 - 1.0 / (4.0 * q * q))
    if model.kind is ResonatorKind.FULL_POLE:
        c = model.circuit
        if f == 0.0:
            omega_free = 0.0
        else:
            omega_free = w0 * f * (1.0 - math.sqrt(c.r / (4.0 * c.big_r0 * f * f)))
    else:
        omega_free = w0
    return TransientQuantities(
        gamma=gamma,
        f_scale=f,
        omega_free=omega_free,
        delta3=complex(gamma, -omega_free),
        tau_r=q / w0,
    )


def _first_order_zoh(pole: complex, sample_dt: float, length: int) -> np.ndarray:
    # zero-order-hold discretization of dv/dt = -pole (v - u); sums to exactly 1
    a = pole * sample_dt
    return -np.expm1(-a) * np.exp(-a * np.arange(length))


def impulse_response(model: ResonatorModel, sample_dt: float, length: int) -> DiscreteImpulseResponse:
    """Discrete impulse response ``h`` sampled every ``sample_dt`` seconds."""
    if not sample_dt > 0:
        raise ValueError("sample_dt must be positive")
    if length < 1:
        raise ValueError("length must be at least 1")
    if model.kind is ResonatorKind.EXPONENTIAL:
        tau = model.tau_r
        if not math.isfinite(tau):
            raise ValueError("ringdown time is not finite")
        h = _first_order_zoh(1.0 / tau, sample_dt, length).astype(complex)
    elif model.kind is ResonatorKind.FULL_POLE:
        tr = derive_transients(model)
        # rotating frame: e^{-delta3 t} e^{-i w_t t}
        pole = tr.delta3 + 1j * model.drive_freq
        h = _first_order_zoh(pole, sample_dt, length)
    else:
        h = _resample_measured(model.measured, sample_dt, length)
    return DiscreteImpulseResponse(np.asarray(h, dtype=complex), float(sample_dt))


def _resample_measured(meas: MeasuredResponse, sample_dt: float, length: int) -> np.ndarray:
    t = np.asarray(meas.t, dtype=float)
    h = np.asarray(meas.h, dtype=complex)
    if t.size < 2:
        raise ValueError("measured response needs at least two samples")
    if np.any(np.diff(t) <= 0):
        raise ValueError("measured response times must be strictly increasing")
    span = t[-1] - t[0]
    if sample_dt > span:
        raise ValueError(
            f"sample spacing {sample_dt:g} s exceeds the measured record length {span:g} s"
        )
    grid = t[0] + sample_dt * np.arange(length)
    re = np.interp(grid, t, h.real, right=0.0)
    im = np.interp(grid, t, h.imag, right=0.0)
    out = re + 1j * im
    dc = out.sum()
    if abs(dc) < 1e-300:
        raise ValueError("measured response has zero DC gain after resampling")
    return out / dc


def distort(h: DiscreteImpulseResponse, u_tilde) -> np.ndarray:
    """Causal discrete convolution of the resampled controls with ``h``."""
    samples = h.samples if isinstance(h, DiscreteImpulseResponse) else np.asarray(h)
    return kernels.causal_convolve(samples, u_tilde)


@dataclass(frozen=True)
class Ringdown:
    energy: float
    peak: float


def ringdown_energy(v_tilde, pulse_end_index: int, sample_dt: float) -> Ringdown:
    """Residual field after ``pulse_end_index`` (the last driven sample)."""
    v = np.asarray(v_tilde)
    if not pulse_end_index < len(v):
        raise ValueError("pulse_end_index must lie inside the waveform")
    tail = np.abs(v[pulse_end_index + 1:])
    if tail.size == 0:
        return Ringdown(0.0, 0.0)
    return Ringdown(float(np.sum(tail ** 2) * sample_dt), float(tail.max()))


def admittance(model: ResonatorModel, freqs) -> np.ndarray:
    """Resonator admittance magnitude vs offset angular frequency from the carrier.

    Peak value 1. For the exponential kind this is the conventional
    resonator Lorentzian ``|1 / (1 + 2iQ w / omega0)|`` whose half-power
    points are ``omega0/Q`` apart. Note the distortion filter itself decays
    with ``tau_r = Q/omega0`` and is therefore twice as wide; see
    :func:`filter_response`.
    """
    w = np.asarray(freqs, dtype=float)
    if model.kind is ResonatorKind.MEASURED:
        return filter_response(model, w)
    center = 0.0
    if model.kind is ResonatorKind.FULL_POLE:
        center = derive_transients(model).omega_free - model.drive_freq
    return np.abs(1.0 / (1.0 + 2j * model.q_factor * (w - center) / model.omega0))


def filter_response(model: ResonatorModel, freqs) -> np.ndarray:
    """Magnitude of the continuous transfer function applied by :func:`distort`."""
    w = np.asarray(freqs, dtype=float)
    if model.kind is ResonatorKind.MEASURED:
        t = np.asarray(model.measured.t, dtype=float)
        hm = np.asarray(model.measured.h, dtype=complex)
        kernel = np.exp(-1j * w[:, None] * (t - t[0])[None, :])
        resp = np.trapezoid(hm[None, :] * kernel, t, axis=1)
        return np.abs(resp / np.trapezoid(hm, t))
    if model.kind is ResonatorKind.FULL_POLE:
        pole = derive_transients(model).delta3 + 1j * model.drive_freq
    else:
        pole = 1.0 / model.tau_r
    return np.abs(pole / (pole + 1j * w))
