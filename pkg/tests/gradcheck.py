"""Random gradient-check instances shared by the FD and acceptance tests."""
from dataclasses import dataclass

import numpy as np

from bwgrape import grape
from bwgrape.propagate import total_propagator
from bwgrape.resonator import DiscreteImpulseResponse
from bwgrape.spinsys import EnsembleMember, SpinSystem


REFERENCE_DT_NORM = 0.02  # sample_dt * ||H|| used by the gradient checks


def random_hermitian(rng, d):
    a = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    return 0.5 * (a + a.conj().T)


def random_unitary(rng, d):
    q, r = np.linalg.qr(rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d)))
    return q * (np.diag(r) / np.abs(np.diag(r)))


@dataclass
class Instance:
    system: SpinSystem
    members: list
    target: np.ndarray
    h: np.ndarray
    u: np.ndarray
    n_s: int
    n_r: int
    kind: str
    h_norm: float  # max ||H|| over members and evolution periods

    def problem(self, dt_norm: float) -> grape.Problem:
        """Problem whose sample spacing gives ``sample_dt * ||H|| = dt_norm``."""
        sample_dt = dt_norm / self.h_norm
        cfg = grape.GrapeConfig(
            n_steps=len(self.u),
            dt=sample_dt * self.n_s,
            amp_max=1e9,
            n_s=self.n_s,
            n_r=self.n_r,
            quadrature=self.system.quadrature,
        )
        return grape.Problem(self.system, self.members, self.target, cfg, DiscreteImpulseResponse(self.h, sample_dt))


def make_instance(seed: int, dim=None, n_steps=None) -> Instance:
    rng = np.random.default_rng(seed)
    d = int(dim or rng.choice([2, 4]))
    k = int(rng.integers(1, 3))
    n_s = int(rng.choice([1, 2, 4]))
    n_r = int(rng.choice([0, 4 * n_s]))
    kind = str(rng.choice(["delta", "exponential", "measured"]))
    system = SpinSystem(
        random_hermitian(rng, d), tuple(random_hermitian(rng, d) for _ in range(k)), random_hermitian(rng, d)
    )
    n = int(n_steps or rng.integers(3, 9))
    m = n * n_s + n_r
    length = m + 3
    if kind == "delta":
        h = np.zeros(length, dtype=complex)
        h[0] = 1.0
    elif kind == "exponential":
        h = np.exp(-np.arange(length) / rng.uniform(1.0, 5.0)).astype(complex)
        h /= h.sum()
    else:
        h = (rng.normal(size=length) + 1j * rng.normal(size=length)) * np.exp(-np.arange(length) / 4.0)
        h /= h.sum()
    u = rng.normal(size=n) + (1j * rng.normal(size=n) if k == 2 else 0.0)
    members = [
        EnsembleMember(float(rng.normal()), float(rng.uniform(0.9, 1.1)), 0.5),
        EnsembleMember(float(rng.normal()), float(rng.uniform(0.9, 1.1)), 0.5),
    ]
    v = np.convolve(h, np.concatenate([np.repeat(u, n_s), np.zeros(n_r)]))[:m]
    h_norm = max(np.linalg.norm(hm, 2) for mem in members for hm in system.hamiltonians(mem, v))
    # reachable target: the gate made by a perturbed control sequence, so the
    # instance sits at a generic point of the landscape rather than near a
    # stationary one where the cosine is ill-conditioned
    u2 = u + rng.normal(size=n) * (1 + 1j if k == 2 else 1.0)
    v2 = np.convolve(h, np.concatenate([np.repeat(u2, n_s), np.zeros(n_r)]))[:m]
    target = total_propagator(system, members[0], v2, REFERENCE_DT_NORM / h_norm)
    return Instance(system, members, target, h, u, n_s, n_r, kind, float(h_norm))


def fd_gradient(prob: grape.Problem, u, step=1e-4) -> np.ndarray:
    """Central differences of the full pipeline (Re and, in quadrature, Im parts)."""
    u = np.asarray(u, dtype=complex)
    parts = (1.0, 1j) if prob.quadrature else (1.0,)
    out = np.zeros(len(u), dtype=complex)
    for j in range(len(u)):
        for p in parts:
            up, um = u.copy(), u.copy()
            up[j] += step * p
            um[j] -= step * p
            d = (prob.evaluate(up).objective - prob.evaluate(um).objective) / (2 * step)
            out[j] += d * p
    return out


def as_real(z, quadrature):
    z = np.asarray(z)
    return np.concatenate([z.real, z.imag]) if quadrature else z.real


def cosine(a, b) -> float:
    return float(np.dot(a, b) / (np.linalg.norm(a) * np.linalg.norm(b)))


def check(inst: Instance, dt_norm=REFERENCE_DT_NORM):
    """(cosine, |g - fd| at dt_norm, |g - fd| at dt_norm/2, relative gradient size)."""
    out = []
    for f in (1.0, 0.5):
        prob = inst.problem(dt_norm * f)
        g = as_real(prob.gradient(prob.evaluate(inst.u)), prob.quadrature)
        fd = as_real(fd_gradient(prob, inst.u), prob.quadrature)
        out.append((cosine(g, fd), float(np.linalg.norm(g - fd)), g, fd, prob))
    (c, e1, g, fd, prob), (_, e2, *_) = out
    # size of the gradient relative to the largest it could be for this step length
    scale = 2 * prob.config.sample_dt * max(np.linalg.norm(hk, 2) for hk in inst.system.h_controls)
    scale *= inst.n_s * np.sqrt(len(g))
    return c, e1, e2, float(np.linalg.norm(fd) / scale)
