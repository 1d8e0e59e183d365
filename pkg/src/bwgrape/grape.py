"""GRAPE with resonator-distorted controls and ringdown compensation.

Control periods (length ``dt``) hold the commanded amplitudes ``u``. They are
resampled into ``n_s`` evolution periods each, ``n_r`` zero samples are
appended (compensation slot plus free-evolution deadtime), and the result is
convolved with the resonator impulse response to give the field ``v`` seen
by the spins. Gradients with respect to ``u`` follow from the per-evolution
period gradients through the top-hat/impulse-response weights ``xi``.

Complex gradients carry ``dPhi/dRe(u)`` in the real part and ``dPhi/dIm(u)``
in the imaginary part.
"""
from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field, replace
from typing import Callable, Optional, Sequence

import numpy as np

from bwgrape import kernels
from bwgrape.propagate import build_stacks, ensemble_fidelity
from bwgrape.resonator import (
    DiscreteImpulseResponse,
    ResonatorModel,
    distort,
    impulse_response,
    ringdown_energy,
)
from bwgrape.spinsys import EnsembleMember, SpinSystem, check_weights

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class ControlVector:
    u: np.ndarray
    dt: float
    amp_max: float = math.inf

    def __post_init__(self):
        object.__setattr__(self, "u", np.asarray(self.u, dtype=complex))

    @property
    def n_steps(self) -> int:
        return len(self.u)


@dataclass(frozen=True)
class ResampledControls:
    u_tilde: np.ndarray
    n_s: int
    n_r: int
    sample_dt: float

    @property
    def n_steps(self) -> int:
        return (len(self.u_tilde) - self.n_r) // self.n_s

    @property
    def m(self) -> int:
        return len(self.u_tilde)


def resample(u, n_s: int, n_r: int = 0, dt: float = 1.0) -> ResampledControls:
    """Repeat each control period ``n_s`` times and append ``n_r`` zeros."""
    if isinstance(u, ControlVector):
        u, dt = u.u, u.dt
    if n_s < 1 or n_r < 0:
        raise ValueError("need n_s >= 1 and n_r >= 0")
    u = np.asarray(u, dtype=complex)
    u_tilde = np.concatenate([np.repeat(u, n_s), np.zeros(n_r, dtype=complex)])
    return ResampledControls(u_tilde, n_s, n_r, dt / n_s)


def tophat(j: int, n_s: int, m: int, overlap: bool = False) -> int:
    """1 when evolution period ``m`` lies in control period ``j`` (both 1-based).

    With ``overlap`` the window extends one sample into the next control
    period, ``(j-1) n_s < m <= j n_s + 1``.
    """
    upper = j * n_s + (1 if overlap else 0)
    return int((j - 1) * n_s < m <= upper)


def xi_weights(h, j: int, n_s: int, m_total: int, overlap: bool = False) -> np.ndarray:
    """``xi^m(j)`` for m = 1..m_total: the top-hat of period ``j`` convolved with ``h``."""
    samples = h.samples if isinstance(h, DiscreteImpulseResponse) else np.asarray(h)
    box = np.array([tophat(j, n_s, m, overlap) for m in range(1, m_total + 1)], dtype=complex)
    return kernels.causal_convolve(samples, box)


def _block_sums(c: np.ndarray, n_steps: int, n_s: int, overlap: bool) -> np.ndarray:
    head = c[: n_steps * n_s].reshape(n_steps, n_s).sum(axis=1)
    if overlap:
        nxt = np.zeros(n_steps, dtype=c.dtype)
        avail = min(n_steps, (len(c) - 1) // n_s)  # index j*n_s exists
        idx = np.arange(1, avail + 1) * n_s
        nxt[:avail] = c[idx]
        head = head + nxt
    return head


def period_gradients(stack, system: SpinSystem, members, sample_dt) -> np.ndarray:
    """dPhi/dv per member, evolution period and control: shape (B, K, M)."""
    controls = np.stack([system.scaled_controls(m) for m in members])
    return kernels.period_gradients(stack.forward, stack.backward, controls, sample_dt)


def gradient_undistorted(stack, h_k, dt) -> np.ndarray:
    """Textbook GRAPE gradient, one control; shape (B, N)."""
    b = stack.forward.shape[0]
    controls = np.broadcast_to(np.asarray(h_k, dtype=complex), (b, 1) + np.shape(h_k))
    return kernels.period_gradients(stack.forward, stack.backward, controls, dt)[:, 0, :]


def sample_gradient(g_periods: np.ndarray, h, weights=None) -> np.ndarray:
    """Weight-averaged complex gradient with respect to each resampled control ``u_tilde``.

    ``g_periods`` has shape (B, K, M) with K = 1 (Re only) or 2 (Re, Im).
    """
    samples = h.samples if isinstance(h, DiscreteImpulseResponse) else np.asarray(h)
    b, k, m = g_periods.shape
    if weights is None:
        weights = np.full(b, 1.0 / b)
    g = np.tensordot(np.asarray(weights, dtype=float), g_periods, axes=(0, 0))  # (K, M)
    gc = g[0].astype(complex)
    if k > 1:
        gc = gc + 1j * g[1]
    # c[l] = sum_{m >= l} conj(h[m - l]) G[m]   (adjoint of the causal convolution)
    return kernels.causal_convolve(np.conj(samples[:m]), gc[::-1])[::-1]


def gradient_from_periods(
    g_periods: np.ndarray,
    h,
    n_steps: int,
    n_s: int,
    weights=None,
    overlap: bool = False,
) -> np.ndarray:
    """Chain the per-period gradients through ``xi`` to the control periods.

    Returns the weight-averaged complex gradient of length ``n_steps``.
    """
    return _block_sums(sample_gradient(g_periods, h, weights), n_steps, n_s, overlap)


def gradient_distorted(stacks, h, n_s: int, system: SpinSystem, members, sample_dt, n_steps: int, overlap=False):
    g = period_gradients(stacks, system, members, sample_dt)
    weights = np.array([mem.weight for mem in members])
    return gradient_from_periods(g, h, n_steps, n_s, weights, overlap)


def compensation_sensitivity(h, start: int, seg: "CompensationSegment", ridge: float = 1e-9) -> np.ndarray:
    """d(amplitude)/d(u_tilde[l]) for l < ``start`` at a fixed segment duration.

    The least-squares amplitude is linear in the controls,
    ``a = sum_l w_l u_tilde[l]``; returns ``w`` (length ``start``). Valid only
    when the amplitude was not clipped.
    """
    samples = h.samples if isinstance(h, DiscreteImpulseResponse) else np.asarray(h)
    d = seg.n_samples
    n = len(samples)
    step = np.cumsum(samples[: n - start])
    s = step.copy()
    s[d:] -= step[:-d]
    s_t = s[d:]
    ss = float(np.vdot(s_t, s_t).real) + ridge * d
    # corr[i] = sum_k h[d + 1 + i + k] conj(s_t[k]); sample l pairs with i = start - 1 - l
    corr = np.correlate(samples[d + 1 :], s_t, mode="valid")[:start]
    return -corr[::-1] / ss


# --- ringdown compensation ---------------------------------------------------


@dataclass(frozen=True)
class CompensationSegment:
    n_samples: int
    sample_dt: float
    amplitude: complex
    peak: float = 0.0
    energy: float = 0.0
    met_tolerance: bool = True
    clipped: bool = False

    @property
    def duration(self) -> float:
        return self.n_samples * self.sample_dt


NO_COMPENSATION = CompensationSegment(0, 1.0, 0j)


def _clip_complex(a: complex, bound: float, real_only: bool) -> complex:
    if real_only:
        a = complex(a.real, 0.0)
    worst = max(abs(a.real), abs(a.imag))
    if worst > bound:
        a = a * (bound / worst)
    return a


def optimize_compensation(
    u_tilde,
    h,
    start: int,
    max_samples: int,
    amp_max: float,
    ring_peak_tol: float = 1e-3,
    comp_amp_max: Optional[float] = None,
    real_only: bool = False,
    ridge: float = 1e-9,
) -> CompensationSegment:
    """Search duration and amplitude of a segment starting at ``start``.

    ``u_tilde`` must be zero from ``start`` on; it is padded to ``len(h)`` and
    the tail after the segment is observed up to that length. Durations
    1..``max_samples`` are scanned exhaustively; for each, the tail energy is
    quadratic in the amplitude, so its minimizer is solved in closed form (a
    tiny ridge term prefers the weakest segment among exact cancellations).
    """
    samples = h.samples if isinstance(h, DiscreteImpulseResponse) else np.asarray(h)
    sample_dt = h.sample_dt if isinstance(h, DiscreteImpulseResponse) else 1.0
    bound = amp_max if comp_amp_max is None else comp_amp_max
    n = len(samples)
    u = np.zeros(n, dtype=complex)
    u[: len(u_tilde)] = u_tilde
    if np.any(u[start:] != 0):
        raise ValueError("controls must be zero after the compensation start")
    residual = kernels.causal_convolve(samples, u)[start:]
    if not np.any(residual):
        return CompensationSegment(max_samples, sample_dt, 0j, 0.0, 0.0, True)
    step = np.cumsum(samples[: n - start])
    best = None
    for d in range(1, max_samples + 1):
        s = step.copy()
        s[d:] -= step[:-d]
        r_t, s_t = residual[d:], s[d:]
        ss = float(np.vdot(s_t, s_t).real) + ridge * d
        proj = np.vdot(s_t, r_t)
        a_free = -(proj.real if real_only else proj) / ss
        a = _clip_complex(complex(a_free), bound, real_only)
        tail = r_t + a * s_t
        energy = float(np.vdot(tail, tail).real) * sample_dt
        score = energy + ridge * d * abs(a) ** 2 * sample_dt
        if best is None or score < best[0]:
            best = (score, d, a, tail, energy, a != complex(a_free))
    _, d, a, tail, energy, clipped = best
    peak = float(np.max(np.abs(tail))) if tail.size else 0.0
    return CompensationSegment(d, sample_dt, a, peak, energy, peak <= ring_peak_tol * amp_max, clipped)


def apply_compensation(u_tilde, start: int, seg: CompensationSegment) -> np.ndarray:
    out = np.array(u_tilde, dtype=complex)
    out[start : start + seg.n_samples] = seg.amplitude
    return out


# --- line search and update --------------------------------------------------


def update(u, grad, eps: float, amp_max: float) -> np.ndarray:
    """u + eps * grad, clipped to [-amp_max, amp_max] on Re and Im separately."""
    new = np.asarray(u, dtype=complex) + eps * np.asarray(grad, dtype=complex)
    return np.clip(new.real, -amp_max, amp_max) + 1j * np.clip(new.imag, -amp_max, amp_max)


@dataclass
class LineSearchResult:
    eps: float
    phi: float
    payload: object = None
    evaluations: int = 0


def line_search(
    evaluate: Callable[[float], tuple],
    eps: float,
    phi0: float,
    trials: Sequence[float] = (0.5, 1.0, 2.0),
) -> LineSearchResult:
    """Three-point quadratic line search on ``eps``.

    ``evaluate(eps)`` returns ``(phi, payload)``. The quadratic through the
    three trial points is maximized inside the trial bracket; the best
    evaluated point wins. If nothing beats ``phi0`` the step is 0.
    """
    xs = sorted(eps * t for t in trials)
    pts = []
    for x in xs:
        phi, payload = evaluate(x)
        pts.append((x, phi, payload))
    n_eval = len(xs)
    x = np.array([p[0] for p in pts])
    y = np.array([p[1] for p in pts])
    coef = np.polyfit(x, y, 2) if np.all(np.isfinite(y)) and len(set(xs)) == 3 else None
    if coef is not None and coef[0] < 0:
        xv = float(np.clip(-coef[1] / (2 * coef[0]), x[0], x[-1]))
        if not np.any(np.isclose(xv, x, rtol=1e-12, atol=0)):
            phi, payload = evaluate(xv)
            pts.append((xv, phi, payload))
            n_eval += 1
    best = max(pts, key=lambda p: p[1])
    if not best[1] > phi0:
        return LineSearchResult(0.0, phi0, None, n_eval)
    return LineSearchResult(best[0], best[1], best[2], n_eval)


# --- the optimizer -----------------------------------------------------------


@dataclass
class GrapeConfig:
    n_steps: int
    dt: float
    amp_max: float
    n_s: int = 1
    n_r: int = 0
    target_fidelity: float = 0.99
    max_iters: int = 500
    epsilon_init: Optional[float] = None
    epsilon_trials: tuple = (0.5, 1.0, 2.0)
    rng_seed: int = 0
    init_scale: float = 0.1
    compensate: bool = False
    c_max: int = 1
    comp_amp_max: Optional[float] = None
    ring_peak_tol: float = 1e-3
    ring_window: Optional[float] = None
    quadrature: Optional[bool] = None
    tophat_overlap: bool = False
    comp_gradient: bool = False
    direction: str = "gradient"
    lbfgs_memory: int = 10
    n_starts: int = 1
    stall_window: int = 0
    stall_tol: float = 1e-3
    infidelity_power: float = 1.0
    grad_tol: float = 1e-10
    time_limit: Optional[float] = None

    def __post_init__(self):
        if self.n_steps < 1:
            raise ValueError("n_steps must be >= 1")
        if self.n_s < 1 or self.n_r < 0:
            raise ValueError("need n_s >= 1 and n_r >= 0")
        if not 0 < self.target_fidelity <= 1:
            raise ValueError("target_fidelity must lie in (0, 1]")
        if len(self.epsilon_trials) != 3:
            raise ValueError("line search uses exactly three trial steps")
        if self.direction not in ("gradient", "lbfgs"):
            raise ValueError(f"direction must be 'gradient' or 'lbfgs', got {self.direction!r}")
        if self.n_starts < 1 or self.stall_window < 0 or self.lbfgs_memory < 1:
            raise ValueError("n_starts and lbfgs_memory must be >= 1, stall_window >= 0")
        if not self.infidelity_power >= 1.0:
            raise ValueError("infidelity_power must be >= 1")
        if self.compensate and self.c_max * self.n_s > self.n_r:
            raise ValueError("n_r must hold the compensation slot (c_max * n_s samples)")

    @property
    def sample_dt(self) -> float:
        return self.dt / self.n_s

    @property
    def n_periods(self) -> int:
        return self.n_s * self.n_steps + self.n_r

    @property
    def comp_start(self) -> int:
        return self.n_s * self.n_steps


@dataclass
class Evaluation:
    u: np.ndarray
    u_tilde: np.ndarray
    v_full: np.ndarray
    compensation: CompensationSegment
    phi: float
    per_member: np.ndarray
    objective: float


@dataclass
class OptimizationResult:
    u: np.ndarray
    v: np.ndarray
    v_full: np.ndarray
    u_tilde: np.ndarray
    compensation: CompensationSegment
    fidelity: float
    per_member: np.ndarray
    fidelity_trace: list
    iterations: int
    converged: bool
    wall_time: float
    config: GrapeConfig = field(repr=False)
    objective: float = 0.0
    sample_dt: float = 0.0


class Problem:
    """Everything needed to evaluate fidelity and gradients for a control vector."""

    def __init__(self, system: SpinSystem, members, u_desired, config: GrapeConfig, h: DiscreteImpulseResponse):
        check_weights(members)
        self.system = system
        self.members = list(members)
        self.u_desired = np.asarray(u_desired, dtype=complex)
        self.config = config
        if len(h) < config.n_periods:
            raise ValueError("impulse response shorter than the propagation window")
        self.h = h
        self.weights = np.array([m.weight for m in self.members])
        q = config.quadrature
        self.quadrature = system.quadrature if q is None else bool(q)

    @classmethod
    def from_resonator(cls, system, members, u_desired, config, resonator: Optional[ResonatorModel]):
        n = config.n_periods
        if resonator is None:
            h = DiscreteImpulseResponse.delta(n + 1, config.sample_dt)
        else:
            window = config.ring_window
            if window is None:
                window = 5.0 * resonator.tau_r
            extra = int(math.ceil(window / config.sample_dt))
            h = impulse_response(resonator, config.sample_dt, n + max(extra, 1))
        return cls(system, members, u_desired, config, h)

    def evaluate(self, u) -> Evaluation:
        cfg = self.config
        u = np.asarray(u, dtype=complex)
        u_tilde = resample(u, cfg.n_s, cfg.n_r, cfg.dt).u_tilde
        comp = NO_COMPENSATION
        if cfg.compensate:
            comp = optimize_compensation(
                u_tilde,
                self.h,
                cfg.comp_start,
                cfg.c_max * cfg.n_s,
                cfg.amp_max,
                cfg.ring_peak_tol,
                cfg.comp_amp_max,
                real_only=not self.quadrature,
            )
            u_tilde = apply_compensation(u_tilde, cfg.comp_start, comp)
        padded = np.zeros(len(self.h), dtype=complex)
        padded[: len(u_tilde)] = u_tilde
        v_full = distort(self.h, padded)
        phi, per = ensemble_fidelity(
            self.system, self.members, v_full[: cfg.n_periods], cfg.sample_dt, self.u_desired
        )
        return Evaluation(u, u_tilde, v_full, comp, phi, per, self.objective(per))

    def objective(self, per_member) -> float:
        """``1 - (sum_i w_i (1 - Phi_i)^p)^(1/p)``; equals the weighted mean fidelity for p = 1."""
        p = self.config.infidelity_power
        if p == 1.0:
            return float(np.dot(self.weights, per_member))
        inf = np.clip(1.0 - np.asarray(per_member), 0.0, None)
        return 1.0 - float(np.dot(self.weights, inf**p)) ** (1.0 / p)

    def objective_weights(self, per_member) -> np.ndarray:
        """Per-member weights turning member gradients into the objective's gradient."""
        p = self.config.infidelity_power
        if p == 1.0:
            return self.weights
        inf = np.clip(1.0 - np.asarray(per_member), 1e-300, None)
        norm = float(np.dot(self.weights, inf**p)) ** (1.0 / p)
        return self.weights * (inf / norm) ** (p - 1.0)

    def fidelity(self, u) -> float:
        return self.evaluate(u).phi

    def gradient(self, ev: Evaluation) -> np.ndarray:
        """Gradient of the objective at ``ev.u``.

        By default the compensation segment is held fixed. With
        ``config.comp_gradient`` the dependence of its amplitude on the
        controls is chained in as well (the duration stays fixed).
        """
        cfg = self.config
        v = ev.v_full[: cfg.n_periods]
        stack = build_stacks(self.system, self.members, v, cfg.sample_dt, self.u_desired)
        g = period_gradients(stack, self.system, self.members, cfg.sample_dt)
        c = sample_gradient(g, self.h, self.objective_weights(ev.per_member))
        seg = ev.compensation
        if cfg.comp_gradient and seg.n_samples > 0 and not seg.clipped:
            start = cfg.comp_start
            g_a = c[start : start + seg.n_samples].sum()
            w = compensation_sensitivity(self.h, start, seg)
            c = c.copy()
            if self.quadrature:
                c[:start] += np.conj(w) * g_a
            else:
                c[:start] += w.real * g_a.real
        grad = _block_sums(c, cfg.n_steps, cfg.n_s, cfg.tophat_overlap)
        if not self.quadrature:
            grad = grad.real.astype(complex)
        return grad

    def ringdown(self, ev: Evaluation):
        end = self.config.comp_start + ev.compensation.n_samples - 1
        return ringdown_energy(ev.v_full, end, self.config.sample_dt)


def initial_controls(config: GrapeConfig, quadrature: bool, rng=None) -> np.ndarray:
    rng = np.random.default_rng(config.rng_seed) if rng is None else rng
    scale = config.init_scale * config.amp_max
    u = rng.uniform(-scale, scale, config.n_steps).astype(complex)
    if quadrature:
        u = u + 1j * rng.uniform(-scale, scale, config.n_steps)
    return u


def _stalled(trace, config: GrapeConfig) -> bool:
    w = config.stall_window
    return w > 0 and len(trace) > w and trace[-1] - trace[-1 - w] < config.stall_tol


def _ascend_lbfgs(prob: Problem, ev: Evaluation, config: GrapeConfig, budget: int, t0: float, callback, done: int):
    """Box-constrained quasi-Newton ascent (scipy L-BFGS-B) on the same objective."""
    from scipy.optimize import minimize

    amp = config.amp_max
    n = config.n_steps
    quad = prob.quadrature
    cache: dict = {}

    def to_u(x):
        return amp * (x[:n] + 1j * x[n:]) if quad else amp * x.astype(complex)

    def to_x(z):
        return np.concatenate([z.real, z.imag]) / amp if quad else z.real / amp

    def evaluate(x):
        key = x.tobytes()
        if key not in cache:
            cache.clear()
            e = prob.evaluate(to_u(x))
            cache[key] = (e, prob.gradient(e))
        return cache[key]

    def fun(x):
        e, g = evaluate(x)
        dx = np.concatenate([g.real, g.imag]) if quad else g.real
        return -e.objective, -amp * dx

    state = {"ev": ev, "iters": 0, "trace": []}

    def on_iter(intermediate_result):
        e, _ = evaluate(intermediate_result.x)
        state["iters"] += 1
        state["ev"] = e
        state["trace"].append(e.objective)
        if callback is not None:
            callback(done + state["iters"], e.objective)
        if e.objective >= config.target_fidelity or _stalled(state["trace"], config):
            raise StopIteration
        if config.time_limit is not None and time.perf_counter() - t0 > config.time_limit:
            raise StopIteration

    # L-BFGS-B may stop at a kink where the compensation duration switches;
    # restart from the current point with fresh curvature memory until stalled
    x = to_x(ev.u)
    while state["ev"].objective < config.target_fidelity and state["iters"] < budget:
        if config.time_limit is not None and time.perf_counter() - t0 > config.time_limit:
            break
        before = state["iters"], state["ev"].objective
        res = minimize(
            fun,
            x,
            jac=True,
            method="L-BFGS-B",
            bounds=[(-1.0, 1.0)] * (2 * n if quad else n),
            callback=on_iter,
            options={
                "maxiter": budget - state["iters"],
                "maxcor": config.lbfgs_memory,
                "ftol": 1e-15,
                "gtol": config.grad_tol,
            },
        )
        final, _ = evaluate(res.x)
        if final.objective > state["ev"].objective:
            state["ev"] = final
        x = to_x(state["ev"].u)
        if _stalled(state["trace"], config) or state["iters"] - before[0] < 2 or state["ev"].objective - before[1] < 1e-9:
            break
    return state["ev"], state["trace"], state["iters"]


def _ascend(prob: Problem, ev: Evaluation, config: GrapeConfig, budget: int, t0: float, callback, done: int):
    """Iterate from ``ev`` for at most ``budget`` iterations; returns (ev, trace, iterations)."""
    if config.direction == "lbfgs":
        return _ascend_lbfgs(prob, ev, config, budget, t0, callback, done)
    trace = []
    eps = config.epsilon_init
    iters = 0
    while ev.objective < config.target_fidelity and iters < budget:
        if config.time_limit is not None and time.perf_counter() - t0 > config.time_limit:
            break
        grad = prob.gradient(ev)
        gmax = float(np.max(np.abs(grad)))
        # dimensionless: fidelity change per full-scale amplitude change
        if gmax * config.amp_max < config.grad_tol:
            break
        if eps is None:
            eps = 0.05 * config.amp_max / gmax
        result = None
        for _ in range(40):

            def trial(e, _u=ev.u, _g=grad):
                cand = prob.evaluate(update(_u, _g, e, config.amp_max))
                return cand.objective, cand

            result = line_search(trial, eps, ev.objective, config.epsilon_trials)
            if result.eps > 0:
                break
            eps *= 0.5
        iters += 1
        if result is None or result.eps == 0:
            log.info("line search failed to improve at iteration %d", done + iters)
            break
        eps = result.eps
        ev = result.payload
        trace.append(ev.objective)
        if callback is not None:
            callback(done + iters, ev.objective)
        log.debug("iter %d  objective=%.6f  eps=%.3g", done + iters, ev.objective, eps)
        if _stalled(trace, config):
            break
    return ev, trace, iters


def run(
    system: SpinSystem,
    resonator: Optional[ResonatorModel],
    u_desired,
    config: GrapeConfig,
    members: Optional[Sequence[EnsembleMember]] = None,
    u0=None,
    callback: Optional[Callable[[int, float], None]] = None,
) -> OptimizationResult:
    """Optimize controls until ``target_fidelity``, ``max_iters`` or stagnation.

    With ``config.n_starts > 1`` (and no ``u0``) the optimizer restarts from
    the next random initial guess whenever the current one stalls (fidelity
    gain below ``stall_tol`` over ``stall_window`` iterations); the best
    result is returned. Every iteration counts against ``max_iters``.
    """
    t0 = time.perf_counter()
    members = list(members) if members is not None else [EnsembleMember()]
    prob = Problem.from_resonator(system, members, u_desired, config, resonator)
    rng = np.random.default_rng(config.rng_seed)
    if u0 is None:
        starts = [initial_controls(config, prob.quadrature, rng) for _ in range(config.n_starts)]
    else:
        starts = [np.asarray(u0, dtype=complex)]
    for u in starts:
        if u.shape != (config.n_steps,):
            raise ValueError(f"initial controls must have shape ({config.n_steps},)")
    iters = 0
    best = None
    for k, u in enumerate(starts):
        if k > 0 and (iters >= config.max_iters or best[0].objective >= config.target_fidelity):
            break
        if config.time_limit is not None and k > 0 and time.perf_counter() - t0 > config.time_limit:
            break
        ev = prob.evaluate(update(u, 0.0, 0.0, config.amp_max))
        phi0 = ev.objective
        ev, tr, n_it = _ascend(prob, ev, config, config.max_iters - iters, t0, callback, iters)
        iters += n_it
        if len(starts) > 1:
            log.info("start %d: objective=%.6f after %d iterations", k, ev.objective, n_it)
        if best is None or ev.objective > best[0].objective:
            best = (ev, [phi0] + tr, k)
    ev, trace, _ = best
    n = config.n_periods
    return OptimizationResult(
        u=ev.u,
        v=ev.v_full[:n],
        v_full=ev.v_full,
        u_tilde=ev.u_tilde,
        compensation=ev.compensation,
        fidelity=ev.phi,
        objective=ev.objective,
        per_member=ev.per_member,
        fidelity_trace=trace,
        iterations=iters,
        converged=ev.objective >= config.target_fidelity,
        wall_time=time.perf_counter() - t0,
        config=config,
        sample_dt=config.sample_dt,
    )


def run_stages(
    system: SpinSystem,
    resonator: Optional[ResonatorModel],
    u_desired,
    stages: Sequence[GrapeConfig],
    members: Optional[Sequence[EnsembleMember]] = None,
    u0=None,
    callback: Optional[Callable[[int, float], None]] = None,
) -> OptimizationResult:
    """Run several configurations in sequence, each starting from the previous result.

    The first stage's ``max_iters`` is the budget shared by all stages, and
    ``converged`` refers to the first stage's ``target_fidelity`` evaluated on
    the final pulse's average fidelity. A typical use is a multi-start
    mean-fidelity stage followed by a refinement with ``infidelity_power > 1``
    that evens out the ensemble.
    """
    if not stages:
        raise ValueError("need at least one stage")
    budget = stages[0].max_iters
    used = 0
    trace: list = []
    wall = 0.0
    result = None
    for k, cfg in enumerate(stages):
        remaining = budget - used
        if k > 0 and remaining <= 0:
            break
        cfg = replace(cfg, max_iters=min(cfg.max_iters, remaining))
        offset = used

        def cb(i, phi, _off=offset):
            if callback is not None:
                callback(_off + i, phi)

        result = run(system, resonator, u_desired, cfg, members, u0=u0, callback=cb)
        used += result.iterations
        wall += result.wall_time
        trace.extend(result.fidelity_trace if k == 0 else result.fidelity_trace[1:])
        u0 = result.u
    return replace(
        result,
        fidelity_trace=trace,
        iterations=used,
        converged=result.fidelity >= stages[0].target_fidelity,
        wall_time=wall,
        config=stages[0],
    )
